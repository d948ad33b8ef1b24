//! Stack denoisers: `(stack of N_i frames, memory) -> (N_o frames, memory')`.
//!
//! Stack time `k` indexes input frame `k`; outputs are the frames at
//! `k = N_p .. N_p + N_o`. Memory frames carry an offset relative to the
//! first output, so memory frame `j` sits at stack time `N_p + offset + j`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{estimate_flow, warp, FlowField};
use crate::video_io::{ChannelLayout, Frame};

/// How frames at different stack times are aligned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FlowSource {
    /// Block-matching flow estimated on the luma of the stack frames.
    Estimated,
    /// Known global translation in pixels per frame.
    GlobalTranslation { vx: f64, vy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserKind {
    Identity,
    TemporalAverage,
    MotionCompensatedAverage {
        /// Frames within this many steps of the target contribute.
        temporal_radius: usize,
        flow: FlowSource,
    },
    RecurrentExponential {
        /// Weight of the current motion-compensated average, in (0, 1].
        lambda: f64,
        temporal_radius: usize,
        flow: FlowSource,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    #[serde(flatten)]
    pub kind: DenoiserKind,
    #[serde(default)]
    pub uses_memory: bool,
}

impl DenoiserSpec {
    pub fn new(kind: DenoiserKind, uses_memory: bool) -> Result<Self> {
        let spec = Self { kind, uses_memory };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity() -> Self {
        Self {
            kind: DenoiserKind::Identity,
            uses_memory: false,
        }
    }

    pub fn temporal_average() -> Self {
        Self {
            kind: DenoiserKind::TemporalAverage,
            uses_memory: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DenoiserKind::Identity | DenoiserKind::TemporalAverage if self.uses_memory => Err(
                Error::InvalidParams(format!("{:?} cannot use memory", self.kind)),
            ),
            DenoiserKind::RecurrentExponential { lambda, .. }
                if !(lambda > 0.0 && lambda <= 1.0) =>
            {
                Err(Error::InvalidParams(format!(
                    "lambda must be in (0, 1], got {lambda}"
                )))
            }
            DenoiserKind::MotionCompensatedAverage {
                flow: FlowSource::GlobalTranslation { vx, vy },
                ..
            }
            | DenoiserKind::RecurrentExponential {
                flow: FlowSource::GlobalTranslation { vx, vy },
                ..
            } if !(vx.is_finite() && vy.is_finite()) => {
                Err(Error::InvalidParams("translation must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// State handed from one stack to the next.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RecurrenceMemory {
    #[default]
    Empty,
    Frames {
        frames: Vec<Frame>,
        /// Time of `frames[0]` relative to the first output of the receiving stack.
        offset: isize,
    },
    StateMap(BTreeMap<String, Frame>),
}

const NUMERATOR: &str = "numerator";
const WEIGHT: &str = "weight";

/// Initial memory for any model: a cold start.
pub fn zero_memory(_spec: &DenoiserSpec) -> RecurrenceMemory {
    RecurrenceMemory::Empty
}

/// Initial memory materialized as zero planes shaped like `frame`. The
/// recurrent model stores a weighted running sum and its weight, so zero
/// planes are exactly the cold-start state; other kinds get `Empty`.
pub fn zero_memory_like(spec: &DenoiserSpec, frame: &Frame) -> Result<RecurrenceMemory> {
    Ok(match spec.kind {
        DenoiserKind::RecurrentExponential { .. } => {
            let mut planes = BTreeMap::new();
            planes.insert(
                NUMERATOR.to_string(),
                Frame::zeros(frame.width(), frame.height(), frame.layout())?,
            );
            planes.insert(
                WEIGHT.to_string(),
                Frame::zeros(frame.width(), frame.height(), ChannelLayout::Mono)?,
            );
            RecurrenceMemory::StateMap(planes)
        }
        _ => RecurrenceMemory::Empty,
    })
}

fn check_stack(stack: &[Frame], out_count: usize, memory: &RecurrenceMemory) -> Result<usize> {
    let bad = || Error::BadStackShape {
        inputs: stack.len(),
        outputs: out_count,
    };
    if out_count == 0 || stack.len() < out_count || !(stack.len() - out_count).is_multiple_of(2) {
        return Err(bad());
    }
    let first = &stack[0];
    if stack.iter().any(|f| !f.same_shape(first)) {
        return Err(Error::HeterogeneousFrames);
    }
    match memory {
        RecurrenceMemory::Frames { frames, .. } if frames.iter().any(|f| !f.same_shape(first)) => {
            return Err(Error::HeterogeneousFrames);
        }
        RecurrenceMemory::StateMap(planes)
            if planes
                .values()
                .any(|f| f.width() != first.width() || f.height() != first.height()) =>
        {
            return Err(Error::HeterogeneousFrames);
        }
        _ => {}
    }
    Ok((stack.len() - out_count) / 2)
}

/// Runs one stack through the model described by `spec`.
pub fn denoise_stack(
    spec: &DenoiserSpec,
    stack: &[Frame],
    memory: &RecurrenceMemory,
    out_count: usize,
) -> Result<(Vec<Frame>, RecurrenceMemory)> {
    spec.validate()?;
    let np = check_stack(stack, out_count, memory)?;
    let memory = if spec.uses_memory {
        memory
    } else {
        &RecurrenceMemory::Empty
    };
    match spec.kind {
        DenoiserKind::Identity => Ok((stack[np..np + out_count].to_vec(), RecurrenceMemory::Empty)),
        DenoiserKind::TemporalAverage => {
            let n = stack.len() as f64;
            let mut acc = vec![0.0; stack[0].samples().len()];
            for f in stack {
                acc.iter_mut().zip(f.samples()).for_each(|(a, s)| *a += s);
            }
            let mean = Frame::new(
                stack[0].width(),
                stack[0].height(),
                stack[0].layout(),
                acc.into_iter().map(|a| a / n).collect(),
            )?;
            Ok((vec![mean; out_count], RecurrenceMemory::Empty))
        }
        DenoiserKind::MotionCompensatedAverage {
            temporal_radius,
            flow,
        } => {
            let mut ctx = StackContext::new(stack, memory, np, flow);
            let outputs = (np..np + out_count)
                .map(|k| ctx.mc_average(k as isize, temporal_radius, true))
                .collect::<Result<Vec<_>>>()?;
            Ok((outputs, RecurrenceMemory::Empty))
        }
        DenoiserKind::RecurrentExponential {
            lambda,
            temporal_radius,
            flow,
        } => {
            let mut ctx = StackContext::new(stack, memory, np, flow);
            let outputs = ctx.recurrent(lambda, temporal_radius, np, out_count, memory)?;
            let last = outputs.last().expect("out_count >= 1").clone();
            Ok((
                outputs,
                RecurrenceMemory::Frames {
                    frames: vec![last],
                    offset: out_count as isize - 1,
                },
            ))
        }
    }
}

/// Stack frames and memory frames indexed by stack time, with cached alignment.
struct StackContext<'a> {
    stack: &'a [Frame],
    memory: Vec<(isize, &'a Frame)>,
    source: FlowSource,
    flows: HashMap<(isize, isize), FlowField>,
}

impl<'a> StackContext<'a> {
    fn new(
        stack: &'a [Frame],
        memory: &'a RecurrenceMemory,
        np: usize,
        source: FlowSource,
    ) -> Self {
        let memory = match memory {
            RecurrenceMemory::Frames { frames, offset } => frames
                .iter()
                .enumerate()
                .map(|(j, f)| (np as isize + offset + j as isize, f))
                .collect(),
            _ => Vec::new(),
        };
        Self {
            stack,
            memory,
            source,
            flows: HashMap::new(),
        }
    }

    fn input(&self, k: isize) -> Option<&'a Frame> {
        usize::try_from(k).ok().and_then(|i| self.stack.get(i))
    }

    fn memory_at(&self, k: isize) -> Option<&'a Frame> {
        self.memory.iter().find(|(t, _)| *t == k).map(|(_, f)| *f)
    }

    /// Frame used to estimate motion at time `k`.
    fn reference(&self, k: isize) -> Option<&'a Frame> {
        self.input(k).or_else(|| self.memory_at(k))
    }

    /// Flow from time `to` to time `from`: `frame_to(x) ≈ frame_from(x + flow)`.
    fn flow(&mut self, to: isize, from: isize) -> Result<&FlowField> {
        let (w, h) = (self.stack[0].width(), self.stack[0].height());
        if !self.flows.contains_key(&(to, from)) {
            let field = match self.source {
                FlowSource::GlobalTranslation { vx, vy } => {
                    let dt = (from - to) as f64;
                    FlowField::constant(w, h, dt * vx, dt * vy)
                }
                FlowSource::Estimated => match (self.reference(to), self.reference(from)) {
                    (Some(a), Some(b)) if to != from => estimate_flow(&a.to_luma(), &b.to_luma())?,
                    _ => FlowField::zeros(w, h),
                },
            };
            self.flows.insert((to, from), field);
        }
        Ok(&self.flows[&(to, from)])
    }

    /// Moves `img`, located at time `from`, onto time `to`.
    fn align(&mut self, img: &Frame, from: isize, to: isize) -> Result<(Frame, Vec<bool>)> {
        if from == to {
            return Ok((img.clone(), vec![true; img.pixel_count()]));
        }
        let flow = self.flow(to, from)?;
        warp(img, flow)
    }

    /// Mask-aware average of every input (and, if asked, memory frame)
    /// within `radius` of `k`, aligned onto `k`.
    fn mc_average(&mut self, k: isize, radius: usize, with_memory: bool) -> Result<Frame> {
        let target = self.input(k).expect("target is an input frame");
        let mut acc = Accumulator::new(target);
        let r = radius as isize;
        let stack = self.stack;
        for m in (k - r).max(0)..=(k + r).min(stack.len() as isize - 1) {
            let (aligned, mask) = self.align(&stack[m as usize], m, k)?;
            acc.add(&aligned, &mask, 1.0);
        }
        if with_memory {
            let memory: Vec<(isize, &Frame)> = self
                .memory
                .iter()
                .filter(|(t, _)| (t - k).abs() <= r)
                .copied()
                .collect();
            for (t, f) in memory {
                let (aligned, mask) = self.align(f, t, k)?;
                acc.add(&aligned, &mask, 1.0);
            }
        }
        acc.mean(target)
    }

    /// Normalized exponential recursion: `N_k = λ A_k + (1-λ) N_prior`,
    /// `W_k = λ + (1-λ) W_prior`, output `N_k / W_k`, where the prior is the
    /// previous state aligned onto `k` plus any memory frame at `k` (weight 1).
    fn recurrent(
        &mut self,
        lambda: f64,
        radius: usize,
        np: usize,
        out_count: usize,
        memory: &RecurrenceMemory,
    ) -> Result<Vec<Frame>> {
        let stack = self.stack;
        let first = &stack[0];
        let first_memory = self.memory.iter().map(|(t, _)| *t).min().unwrap_or(0);
        let k0 = first_memory.min(0);
        let mut state: Option<(Frame, Frame)> = match memory {
            RecurrenceMemory::StateMap(planes) => match (planes.get(NUMERATOR), planes.get(WEIGHT))
            {
                (Some(n), Some(w)) if n.same_shape(first) && w.channels() == 1 => {
                    Some((n.clone(), w.clone()))
                }
                _ => None,
            },
            _ => None,
        };
        let npix = first.pixel_count();
        let last = (np + out_count) as isize - 1;
        let mut outputs = Vec::with_capacity(out_count);
        for k in k0..=last {
            let mut prior_n = vec![0.0; first.samples().len()];
            let mut prior_w = vec![0.0; npix];
            if let Some((n, w)) = state.take() {
                let (n_al, mask) = self.align(&n, k - 1, k)?;
                let (w_al, _) = self.align(&w, k - 1, k)?;
                add_masked(&mut prior_n, &mut prior_w, &n_al, w_al.samples(), &mask);
            }
            if let Some(m) = self.memory_at(k) {
                add_masked(
                    &mut prior_n,
                    &mut prior_w,
                    m,
                    &vec![1.0; npix],
                    &vec![true; npix],
                );
            }
            let (num, wt) = if k >= 0 {
                let a = self.mc_average(k, radius, false)?;
                let num: Vec<f64> = a
                    .samples()
                    .iter()
                    .zip(&prior_n)
                    .map(|(a, p)| lambda * a + (1.0 - lambda) * p)
                    .collect();
                let wt: Vec<f64> = prior_w
                    .iter()
                    .map(|p| lambda + (1.0 - lambda) * p)
                    .collect();
                (num, wt)
            } else {
                (prior_n, prior_w)
            };
            let num = Frame::new(first.width(), first.height(), first.layout(), num)?;
            let wt = Frame::new(first.width(), first.height(), ChannelLayout::Mono, wt)?;
            if k >= np as isize {
                outputs.push(normalize(&num, &wt)?);
            }
            state = Some((num, wt));
        }
        Ok(outputs)
    }
}

fn add_masked(prior_n: &mut [f64], prior_w: &mut [f64], n: &Frame, w: &[f64], mask: &[bool]) {
    let npix = mask.len();
    for c in 0..n.channels() {
        for (i, (p, s)) in prior_n[c * npix..(c + 1) * npix]
            .iter_mut()
            .zip(n.plane(c))
            .enumerate()
        {
            if mask[i] {
                *p += s;
            }
        }
    }
    for (i, p) in prior_w.iter_mut().enumerate() {
        if mask[i] {
            *p += w[i];
        }
    }
}

fn normalize(num: &Frame, wt: &Frame) -> Result<Frame> {
    let npix = num.pixel_count();
    let w = wt.samples();
    let samples = num
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let d = w[i % npix];
            if d > 0.0 {
                n / d
            } else {
                0.0
            }
        })
        .collect();
    Frame::new(num.width(), num.height(), num.layout(), samples)
}

struct Accumulator {
    sum: Vec<f64>,
    weight: Vec<f64>,
    npix: usize,
}

impl Accumulator {
    fn new(like: &Frame) -> Self {
        Self {
            sum: vec![0.0; like.samples().len()],
            weight: vec![0.0; like.pixel_count()],
            npix: like.pixel_count(),
        }
    }

    fn add(&mut self, f: &Frame, mask: &[bool], w: f64) {
        for (i, s) in self.sum.iter_mut().enumerate() {
            if mask[i % self.npix] {
                *s += w * f.samples()[i];
            }
        }
        for (i, acc) in self.weight.iter_mut().enumerate() {
            if mask[i] {
                *acc += w;
            }
        }
    }

    fn mean(self, like: &Frame) -> Result<Frame> {
        let npix = self.npix;
        let samples = self
            .sum
            .iter()
            .enumerate()
            .map(|(i, s)| s / self.weight[i % npix])
            .collect();
        Frame::new(like.width(), like.height(), like.layout(), samples)
    }
}
