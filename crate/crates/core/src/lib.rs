//! Streaming MIMO video denoising: stack scheduling with overlap blending and
//! cross-stack recurrence, reference denoisers, synthetic scenes, and
//! fidelity/temporal-consistency metrics.

pub mod denoise;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod scheduler;
pub mod synth;
pub mod video_io;

pub use denoise::{
    denoise_stack, zero_memory, zero_memory_like, DenoiserKind, DenoiserSpec, FlowSource,
    RecurrenceMemory,
};
pub use error::{Error, Result};
pub use metrics::{
    estimate_flow, frame_tc, inter_tc, intra_tc, profile_report, psnr, ssim, stack_phase_profile,
    warp, FlowField, FlowMode, ProfileReport, TCSeries,
};
pub use noise::{add_awgn, expected_noisy_psnr, GaussianField, NoiseSpec};
pub use scheduler::{
    blend_overlap, plan_stacks, run_pipeline, run_pipeline_stack_parallel, select_memory,
    worst_case_latency, BlendWeights, CostReport, LatencyBudget, PipelineRun, Recurrence,
    SchedulerConfig, StackPlan, StackWindow, StreamingPipeline,
};
pub use synth::{make_texture, render_translating, render_with_texture, GroundTruth, SceneSpec};
pub use video_io::{ChannelLayout, Frame, FrameRate, Sequence};
