//! Frame-by-frame execution of a stack plan.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    blend_overlap, plan_stacks, select_memory, source_index, stack_count, worst_case_latency,
    SchedulerConfig, StackPlan,
};
use crate::denoise::{denoise_stack, zero_memory, DenoiserSpec, RecurrenceMemory};
use crate::error::{Error, Result};
use crate::video_io::{Frame, Sequence};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatencyBudget {
    pub worst_case: usize,
    /// For each output frame `t`: latest input index received before `t` was emitted, minus `t`.
    pub per_output_frame: Vec<usize>,
}

impl LatencyBudget {
    pub fn max_observed(&self) -> usize {
        self.per_output_frame.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub invocations: usize,
    /// `invocations * N_o`.
    pub frame_denoisings: usize,
    pub output_frames: usize,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl CostReport {
    pub fn invocations_per_frame(&self) -> f64 {
        self.frame_denoisings as f64 / self.output_frames as f64
    }
}

/// One output frame leaving the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub index: usize,
    pub frame: Frame,
    /// Stack whose evaluation released this frame.
    pub stack: usize,
    /// Latest input index received at emission time.
    pub after_input: usize,
}

/// Push-based runner: feed frames one at a time, collect outputs as soon
/// as the emission rule allows.
pub struct StreamingPipeline {
    config: SchedulerConfig,
    spec: DenoiserSpec,
    /// Input frames from index `base` onwards.
    inputs: VecDeque<Frame>,
    base: usize,
    received: usize,
    next_stack: usize,
    prev_raw: Option<Vec<Frame>>,
    prev_memory: RecurrenceMemory,
    /// Raw tail of the last evaluated stack, waiting for its second estimate.
    pending_tail: Vec<Frame>,
    invocations: usize,
    started: Instant,
}

impl StreamingPipeline {
    pub fn new(config: SchedulerConfig, spec: DenoiserSpec) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        Ok(Self {
            config,
            spec,
            inputs: VecDeque::new(),
            base: 0,
            received: 0,
            next_stack: 0,
            prev_raw: None,
            prev_memory: zero_memory(&spec),
            pending_tail: Vec::new(),
            invocations: 0,
            started: Instant::now(),
        })
    }

    pub fn invocations(&self) -> usize {
        self.invocations
    }

    fn start(&self, s: usize) -> usize {
        s * self.config.stride()
    }

    /// Input index whose arrival completes the window of stack `s`.
    fn trigger(&self, s: usize) -> usize {
        self.start(s) + self.config.no + self.config.padding() - 1
    }

    pub fn push(&mut self, frame: Frame) -> Result<Vec<Emitted>> {
        if let Some(first) = self.inputs.front() {
            if !first.same_shape(&frame) {
                return Err(Error::HeterogeneousFrames);
            }
        }
        self.inputs.push_back(frame);
        self.received += 1;
        let mut out = Vec::new();
        while self.trigger(self.next_stack) < self.received {
            out.extend(self.run_stack(self.received, false)?);
        }
        Ok(out)
    }

    /// Runs the remaining stacks with end padding and flushes every pending frame.
    pub fn finish(mut self) -> Result<(Vec<Emitted>, CostReport)> {
        let t = self.received;
        if t == 0 {
            return Err(Error::EmptySequence);
        }
        let total = stack_count(t, &self.config);
        let mut out = Vec::new();
        while self.next_stack < total {
            let last = self.next_stack + 1 == total;
            out.extend(self.run_stack(t, last)?);
        }
        let s = self.next_stack - 1;
        let tail_start = self.start(s) + self.config.no - self.pending_tail.len();
        for (i, frame) in std::mem::take(&mut self.pending_tail)
            .into_iter()
            .enumerate()
        {
            if tail_start + i < t {
                out.push(Emitted {
                    index: tail_start + i,
                    frame,
                    stack: s,
                    after_input: t - 1,
                });
            }
        }
        let cost = CostReport {
            invocations: self.invocations,
            frame_denoisings: self.invocations * self.config.no,
            output_frames: t,
            wall_clock: self.started.elapsed(),
        };
        Ok((out, cost))
    }

    fn frame(&self, index: usize) -> &Frame {
        &self.inputs[index - self.base]
    }

    /// Evaluates stack `next_stack` with `available` real frames and returns
    /// what it releases. `is_last` flushes the whole output range (clipped).
    fn run_stack(&mut self, available: usize, is_last: bool) -> Result<Vec<Emitted>> {
        let s = self.next_stack;
        let c = self.start(s);
        let (no, np, p) = (
            self.config.no,
            self.config.padding() as isize,
            self.config.overlap,
        );
        let window: Vec<Frame> = (c as isize - np..(c + no) as isize + np)
            .map(|v| self.frame(source_index(v, available)).clone())
            .collect();
        let memory = match &self.prev_raw {
            None => zero_memory(&self.spec),
            Some(raw) => {
                select_memory(self.config.recurrence, raw, &self.prev_memory, &self.config)?
            }
        };
        let (raw, memory_out) = denoise_stack(&self.spec, &window, &memory, no)?;
        self.invocations += 1;
        let after = available - 1;

        let mut out = Vec::new();
        let emit_end = if is_last { no } else { no - p };
        let mut emit = |offset: usize, frame: Frame| {
            if c + offset < available {
                out.push(Emitted {
                    index: c + offset,
                    frame,
                    stack: s,
                    after_input: after,
                });
            }
        };
        let head = if s > 0 { p } else { 0 };
        if head > 0 {
            let blended = blend_overlap(&self.pending_tail, &raw[..head])?;
            for (i, f) in blended.into_iter().enumerate() {
                emit(i, f);
            }
        }
        for (i, f) in raw.iter().enumerate().take(emit_end).skip(head) {
            emit(i, f.clone());
        }
        self.pending_tail = if is_last {
            Vec::new()
        } else {
            raw[no - p..].to_vec()
        };
        self.prev_raw = Some(raw);
        self.prev_memory = memory_out;
        self.next_stack += 1;

        let keep_from = self.start(self.next_stack).saturating_sub(np as usize);
        while self.base < keep_from && !self.inputs.is_empty() {
            self.inputs.pop_front();
            self.base += 1;
        }
        Ok(out)
    }
}

/// Complete output of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub denoised: Sequence,
    pub plan: StackPlan,
    pub budget: LatencyBudget,
    pub cost: CostReport,
    /// Stack that released each output frame.
    pub emitted_by: Vec<usize>,
}

impl PipelineRun {
    /// Input index received when frame `t` was emitted.
    pub fn emitted_after_input(&self, t: usize) -> usize {
        t + self.budget.per_output_frame[t]
    }
}

fn collect_run(
    seq: &Sequence,
    config: &SchedulerConfig,
    emitted: Vec<Emitted>,
    cost: CostReport,
) -> Result<PipelineRun> {
    let t = seq.len();
    let mut frames: Vec<Option<Frame>> = vec![None; t];
    let mut latency = vec![0; t];
    let mut emitted_by = vec![0; t];
    for e in emitted {
        debug_assert!(frames[e.index].is_none(), "frame {} emitted twice", e.index);
        latency[e.index] = e.after_input - e.index;
        emitted_by[e.index] = e.stack;
        frames[e.index] = Some(e.frame);
    }
    let frames = frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| f.ok_or_else(|| Error::InvalidConfig(format!("frame {i} was never emitted"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineRun {
        denoised: Sequence::new(frames, seq.frame_rate())?.with_params(seq.params().clone()),
        plan: plan_stacks(t, config)?,
        budget: LatencyBudget {
            worst_case: worst_case_latency(config),
            per_output_frame: latency,
        },
        cost,
        emitted_by,
    })
}

/// Streams `seq` through the scheduler, one stack after another.
pub fn run_pipeline(
    seq: &Sequence,
    config: &SchedulerConfig,
    spec: &DenoiserSpec,
) -> Result<PipelineRun> {
    let mut pipe = StreamingPipeline::new(*config, *spec)?;
    let mut emitted = Vec::with_capacity(seq.len());
    for f in seq.frames() {
        emitted.extend(pipe.push(f.clone())?);
    }
    let (tail, cost) = pipe.finish()?;
    emitted.extend(tail);
    collect_run(seq, config, emitted, cost)
}

/// Evaluates all stacks concurrently. Only valid for models that ignore
/// memory; gives the same frames and latency accounting as [`run_pipeline`].
pub fn run_pipeline_stack_parallel(
    seq: &Sequence,
    config: &SchedulerConfig,
    spec: &DenoiserSpec,
) -> Result<PipelineRun> {
    spec.validate()?;
    if spec.uses_memory {
        return Err(Error::InvalidConfig(
            "stack-parallel execution needs a memoryless model".into(),
        ));
    }
    let started = Instant::now();
    let plan = plan_stacks(seq.len(), config)?;
    let t = seq.len();
    let raw: Vec<Vec<Frame>> = plan
        .stacks()
        .par_iter()
        .map(|w| {
            let window: Vec<Frame> = w
                .input
                .clone()
                .map(|v| seq.frames()[source_index(v, t)].clone())
                .collect();
            denoise_stack(spec, &window, &zero_memory(spec), config.no).map(|(o, _)| o)
        })
        .collect::<Result<_>>()?;

    let (no, p, np) = (config.no, config.overlap, config.padding());
    let last = plan.stacks().len() - 1;
    let mut emitted = Vec::with_capacity(t);
    for (s, w) in plan.stacks().iter().enumerate() {
        let c = w.output.start;
        let trigger = c + no + np - 1;
        let released = if trigger >= t { t - 1 } else { trigger };
        let head = w.overlap_with_prev.len();
        if head > 0 {
            let blended = blend_overlap(&raw[s - 1][no - p..], &raw[s][..head])?;
            emitted.extend(blended.into_iter().enumerate().map(|(i, frame)| Emitted {
                index: c + i,
                frame,
                stack: s,
                after_input: released,
            }));
        }
        let end = if s == last { no } else { no - p };
        for (i, frame) in raw[s].iter().enumerate().take(end).skip(head) {
            let index = c + i;
            if index >= t {
                break;
            }
            // The last stack's tail only leaves at end of stream.
            let after = if s == last && i >= no - p {
                t - 1
            } else {
                released
            };
            emitted.push(Emitted {
                index,
                frame: frame.clone(),
                stack: s,
                after_input: after,
            });
        }
    }
    let cost = CostReport {
        invocations: raw.len(),
        frame_denoisings: raw.len() * no,
        output_frames: t,
        wall_clock: started.elapsed(),
    };
    collect_run(seq, config, emitted, cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::Recurrence;
    use crate::video_io::{ChannelLayout, FrameRate};

    fn counting_seq(t: usize) -> Sequence {
        let frames = (0..t)
            .map(|i| {
                Frame::from_fn(4, 3, ChannelLayout::Mono, |_, y, x| {
                    (i * 100 + y * 4 + x) as f64 + 0.5
                })
                .unwrap()
            })
            .collect();
        Sequence::new(frames, FrameRate::default()).unwrap()
    }

    fn cfg(ni: usize, no: usize, p: usize, r: Recurrence) -> SchedulerConfig {
        SchedulerConfig::new(ni, no, p, r).unwrap()
    }

    #[test]
    fn identity_round_trip() {
        for (ni, no, p) in [(7, 7, 0), (7, 7, 2), (9, 5, 1), (7, 1, 0), (5, 3, 1)] {
            for t in [1, 3, 7, 14, 23] {
                let seq = counting_seq(t);
                let run = run_pipeline(
                    &seq,
                    &cfg(ni, no, p, Recurrence::None),
                    &DenoiserSpec::identity(),
                )
                .unwrap();
                assert_eq!(run.denoised, seq, "ni={ni} no={no} p={p} t={t}");
            }
        }
    }

    #[test]
    fn cost_ratio() {
        let seq = counting_seq(70);
        let run = run_pipeline(
            &seq,
            &cfg(7, 7, 2, Recurrence::None),
            &DenoiserSpec::identity(),
        )
        .unwrap();
        assert_eq!(run.cost.invocations, 14);
        assert_eq!(run.cost.invocations_per_frame(), 1.4);
        let run = run_pipeline(
            &seq,
            &cfg(7, 7, 0, Recurrence::None),
            &DenoiserSpec::identity(),
        )
        .unwrap();
        assert_eq!(run.cost.invocations_per_frame(), 1.0);
    }

    #[test]
    fn latency_attains_bound_without_overlap() {
        let seq = counting_seq(21);
        let run = run_pipeline(
            &seq,
            &cfg(7, 7, 0, Recurrence::None),
            &DenoiserSpec::identity(),
        )
        .unwrap();
        assert_eq!(run.budget.per_output_frame[..7], [6, 5, 4, 3, 2, 1, 0]);
        assert_eq!(run.budget.max_observed(), 6);
    }

    #[test]
    fn overlap_frames_wait_for_second_estimate() {
        let seq = counting_seq(20);
        let run = run_pipeline(
            &seq,
            &cfg(7, 7, 2, Recurrence::None),
            &DenoiserSpec::identity(),
        )
        .unwrap();
        // Frames 5 and 6 wait for stack 1, released when input 11 arrives.
        assert_eq!(run.emitted_after_input(5), 11);
        assert_eq!(run.emitted_after_input(6), 11);
        assert_eq!(run.emitted_by[5], 1);
        assert_eq!(
            run.budget.max_observed(),
            worst_case_latency(run.plan.config())
        );
    }

    #[test]
    fn parallel_matches_streaming() {
        for (ni, no, p) in [(7, 7, 0), (7, 7, 3), (9, 5, 2), (5, 1, 0)] {
            for t in [2, 9, 30] {
                let seq = counting_seq(t);
                let c = cfg(ni, no, p, Recurrence::None);
                let spec = DenoiserSpec::temporal_average();
                let a = run_pipeline(&seq, &c, &spec).unwrap();
                let b = run_pipeline_stack_parallel(&seq, &c, &spec).unwrap();
                assert_eq!(a.denoised, b.denoised);
                assert_eq!(a.budget, b.budget);
                assert_eq!(a.emitted_by, b.emitted_by);
            }
        }
    }

    #[test]
    fn parallel_refuses_memory_models() {
        let spec = DenoiserSpec::new(
            crate::denoise::DenoiserKind::RecurrentExponential {
                lambda: 0.5,
                temporal_radius: 1,
                flow: crate::denoise::FlowSource::Estimated,
            },
            true,
        )
        .unwrap();
        assert!(run_pipeline_stack_parallel(
            &counting_seq(5),
            &cfg(3, 3, 0, Recurrence::PreviousOutput),
            &spec
        )
        .is_err());
    }

    #[test]
    fn memoryless_p0_equals_manual_per_stack() {
        let seq = counting_seq(17);
        let c = cfg(9, 5, 0, Recurrence::None);
        let spec = DenoiserSpec::temporal_average();
        let run = run_pipeline(&seq, &c, &spec).unwrap();
        let plan = plan_stacks(17, &c).unwrap();
        for w in plan.stacks() {
            let window: Vec<Frame> = w
                .input
                .clone()
                .map(|v| seq.frames()[plan.source_index(v)].clone())
                .collect();
            let (out, _) = denoise_stack(&spec, &window, &RecurrenceMemory::Empty, 5).unwrap();
            for t in w.output.clone() {
                assert_eq!(run.denoised.frames()[t], out[t - w.output.start]);
            }
        }
    }

    #[test]
    fn rejects_mixed_frames() {
        let mut pipe =
            StreamingPipeline::new(cfg(3, 3, 0, Recurrence::None), DenoiserSpec::identity())
                .unwrap();
        pipe.push(Frame::zeros(4, 4, ChannelLayout::Mono).unwrap())
            .unwrap();
        assert!(pipe
            .push(Frame::zeros(4, 5, ChannelLayout::Mono).unwrap())
            .is_err());
    }
}
