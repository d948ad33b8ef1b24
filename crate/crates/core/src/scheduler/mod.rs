//! MIMO stack scheduling.
//!
//! A video of `T` frames is cut into stacks. Stack `s` produces outputs for
//! frames `[c_s, c_s + N_o)` with `c_s = s * (N_o - P)`, reading inputs
//! `[c_s - N_p, c_s + N_o + N_p)` where `N_p = (N_i - N_o) / 2`. With `P > 0`
//! consecutive output ranges share `P` frames, which are blended with the
//! linear ramp `alpha_i = i / (P + 1)`.
//!
//! Padding: virtual inputs before frame 0 are mirrored (`-k -> k`), inputs
//! past the last frame repeat the last frame.

mod pipeline;

use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use pipeline::{
    run_pipeline, run_pipeline_stack_parallel, CostReport, Emitted, LatencyBudget, PipelineRun,
    StreamingPipeline,
};

use crate::denoise::RecurrenceMemory;
use crate::error::{Error, Result};
use crate::video_io::Frame;

/// Which frames of stack `s - 1` are handed to stack `s` as memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recurrence {
    #[serde(rename = "none")]
    None,
    /// The output just before the first output of the next stack.
    #[serde(rename = "prev")]
    PreviousOutput,
    /// The `P` outputs that overlap the next stack.
    #[serde(rename = "overlap")]
    OverlappedOutput,
}

impl std::str::FromStr for Recurrence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Recurrence::None),
            "prev" => Ok(Recurrence::PreviousOutput),
            "overlap" => Ok(Recurrence::OverlappedOutput),
            other => Err(Error::InvalidConfig(format!(
                "unknown recurrence `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Recurrence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Recurrence::None => "none",
            Recurrence::PreviousOutput => "prev",
            Recurrence::OverlappedOutput => "overlap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Input stack size `N_i`.
    pub ni: usize,
    /// Output stack size `N_o`.
    pub no: usize,
    /// Overlap `P` between consecutive output stacks.
    #[serde(default)]
    pub overlap: usize,
    #[serde(default = "default_recurrence")]
    pub recurrence: Recurrence,
}

fn default_recurrence() -> Recurrence {
    Recurrence::None
}

impl SchedulerConfig {
    pub fn new(ni: usize, no: usize, overlap: usize, recurrence: Recurrence) -> Result<Self> {
        let cfg = Self {
            ni,
            no,
            overlap,
            recurrence,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks `N_i >= N_o >= 1`, even padding, `2P <= N_o` and that
    /// overlapped-output recurrence has an overlap to draw from.
    ///
    /// `2P <= N_o` keeps every frame inside at most two output stacks.
    pub fn validate(&self) -> Result<()> {
        if self.no == 0 {
            return Err(Error::InvalidConfig("N_o must be at least 1".into()));
        }
        if self.ni < self.no {
            return Err(Error::InvalidConfig(format!(
                "N_i = {} < N_o = {}",
                self.ni, self.no
            )));
        }
        if !(self.ni - self.no).is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "N_i - N_o = {} must be even",
                self.ni - self.no
            )));
        }
        if self.overlap >= self.no || 2 * self.overlap > self.no {
            return Err(Error::InvalidConfig(format!(
                "overlap P = {} needs P < N_o and 2P <= N_o (N_o = {})",
                self.overlap, self.no
            )));
        }
        if self.recurrence == Recurrence::OverlappedOutput && self.overlap == 0 {
            return Err(Error::InvalidConfig(
                "overlapped-output recurrence requires P >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn padding(&self) -> usize {
        (self.ni - self.no) / 2
    }

    pub fn stride(&self) -> usize {
        self.no - self.overlap
    }
}

/// Worst-case number of future frames needed before an output can be
/// emitted: `N_o + N_p - 1`.
///
/// With overlap the same bound holds: the first overlap frame of stack `s+1`
/// waits for input `c_{s+1} + N_o + N_p - 1`, which is exactly the bound, and
/// the streaming tests observe it being attained.
pub fn worst_case_latency(config: &SchedulerConfig) -> usize {
    config.no + config.padding() - 1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StackWindow {
    pub index: usize,
    /// Virtual input indices; negative or `>= T` entries are padding.
    pub input: Range<isize>,
    /// Output frames kept from this stack, clipped to `[0, T)`.
    pub output: Range<usize>,
    /// Frames shared with the previous stack (empty for stack 0 or `P = 0`).
    pub overlap_with_prev: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StackPlan {
    frame_count: usize,
    config: SchedulerConfig,
    stacks: Vec<StackWindow>,
}

/// Number of stacks needed to cover `t` frames.
pub(crate) fn stack_count(t: usize, config: &SchedulerConfig) -> usize {
    if t <= config.no {
        1
    } else {
        1 + (t - config.no).div_ceil(config.stride())
    }
}

/// Partitions `[0, T)` into stacks.
pub fn plan_stacks(frame_count: usize, config: &SchedulerConfig) -> Result<StackPlan> {
    config.validate()?;
    if frame_count == 0 {
        return Err(Error::EmptySequence);
    }
    let np = config.padding() as isize;
    let stride = config.stride();
    let stacks = (0..stack_count(frame_count, config))
        .map(|s| {
            let c = s * stride;
            StackWindow {
                index: s,
                input: (c as isize - np)..(c + config.no) as isize + np,
                output: c..(c + config.no).min(frame_count),
                overlap_with_prev: if s == 0 { c..c } else { c..c + config.overlap },
            }
        })
        .collect();
    Ok(StackPlan {
        frame_count,
        config: *config,
        stacks,
    })
}

impl StackPlan {
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn stacks(&self) -> &[StackWindow] {
        &self.stacks
    }

    /// Real frame read for a virtual input index under the padding policy.
    pub fn source_index(&self, virtual_index: isize) -> usize {
        source_index(virtual_index, self.frame_count)
    }

    /// Last output index of every stack that is followed by another stack.
    pub fn transitions(&self) -> Vec<usize> {
        self.stacks[..self.stacks.len() - 1]
            .iter()
            .map(|s| s.index * self.config.stride() + self.config.no - 1)
            .collect()
    }

    /// The stack that emits frame `t`: for overlap frames, the later stack,
    /// since the blended value only exists once it has run.
    pub fn emitting_stack(&self, t: usize) -> usize {
        debug_assert!(t < self.frame_count);
        (t / self.config.stride()).min(self.stacks.len() - 1)
    }

    /// Number of stacks whose output range contains `t`.
    pub fn coverage(&self, t: usize) -> usize {
        self.stacks.iter().filter(|s| s.output.contains(&t)).count()
    }
}

pub(crate) fn source_index(virtual_index: isize, frame_count: usize) -> usize {
    let mirrored = virtual_index.unsigned_abs();
    mirrored.min(frame_count - 1)
}

/// Ramp weights `alpha_i = i / (P + 1)` for `i = 1..=P`, earliest first.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendWeights {
    alpha: Vec<f64>,
}

impl BlendWeights {
    pub fn new(overlap: usize) -> Self {
        let denom = (overlap + 1) as f64;
        Self {
            alpha: (1..=overlap).map(|i| i as f64 / denom).collect(),
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }
}

/// `(1 - alpha) * a + alpha * b`, evaluated as `a + alpha (b - a)` and
/// clamped to `[min(a, b), max(a, b)]` so equal inputs are returned bit-exact.
#[inline]
pub fn blend_sample(a: f64, b: f64, alpha: f64) -> f64 {
    let v = a + alpha * (b - a);
    v.clamp(a.min(b), a.max(b))
}

/// Blends the `P` overlap estimates of stack `s` (its tail) with those of
/// stack `s + 1` (its head); weight on the newer stack grows with time.
pub fn blend_overlap(prev_tail: &[Frame], next_head: &[Frame]) -> Result<Vec<Frame>> {
    if prev_tail.len() != next_head.len() {
        return Err(Error::LengthMismatch {
            left: prev_tail.len(),
            right: next_head.len(),
        });
    }
    let weights = BlendWeights::new(prev_tail.len());
    prev_tail
        .iter()
        .zip(next_head)
        .zip(weights.alpha())
        .map(|((a, b), &alpha)| a.zip_with(b, |p, q| blend_sample(p, q, alpha)))
        .collect()
}

/// Chooses the memory handed from stack `s - 1` to stack `s`.
///
/// `prev_outputs` are the raw, unblended outputs of stack `s - 1`. State-map
/// memory produced by the model is opaque and always passed through.
pub fn select_memory(
    mode: Recurrence,
    prev_outputs: &[Frame],
    prev_memory: &RecurrenceMemory,
    config: &SchedulerConfig,
) -> Result<RecurrenceMemory> {
    if let RecurrenceMemory::StateMap(_) = prev_memory {
        return Ok(prev_memory.clone());
    }
    let p = config.overlap;
    match mode {
        Recurrence::None => Ok(RecurrenceMemory::Empty),
        Recurrence::PreviousOutput => {
            let idx = config.no - p - 1;
            let frame = prev_outputs.get(idx).ok_or(Error::LengthMismatch {
                left: prev_outputs.len(),
                right: config.no,
            })?;
            Ok(RecurrenceMemory::Frames {
                frames: vec![frame.clone()],
                offset: -1,
            })
        }
        Recurrence::OverlappedOutput => {
            if p == 0 {
                return Err(Error::PolicyUnavailable(
                    "overlapped-output recurrence with P = 0".into(),
                ));
            }
            if prev_outputs.len() != config.no {
                return Err(Error::LengthMismatch {
                    left: prev_outputs.len(),
                    right: config.no,
                });
            }
            Ok(RecurrenceMemory::Frames {
                frames: prev_outputs[config.no - p..].to_vec(),
                offset: 0,
            })
        }
    }
}
