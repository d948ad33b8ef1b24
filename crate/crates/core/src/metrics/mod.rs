//! Optical flow, fidelity and temporal-consistency metrics.

pub mod flow;
pub mod quality;
pub mod tc;

pub use flow::{
    estimate_flow, negate_flow, sample_bilinear, warp, BlockMatcher, FlowField, MIN_FLOW_DIM,
};
pub use quality::{mse, psnr, ssim};
pub use tc::{
    finite_mean, frame_tc, frame_tc_masked, inter_tc, intra_tc, stack_phase, stack_phase_profile,
    tc_series, FlowMode, TCSeries,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scheduler::StackPlan;
use crate::video_io::Sequence;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub tc: TCSeries,
    /// `None` when the sequence has a single frame.
    pub intra_tc: Option<f64>,
    /// `None` when no full window fits.
    pub inter_tc: Option<f64>,
    pub stack_phase_profile: Vec<Option<f64>>,
}

impl ProfileReport {
    pub fn mean_psnr(&self) -> Option<f64> {
        finite_mean(self.psnr.iter().copied())
    }

    pub fn mean_ssim(&self) -> Option<f64> {
        finite_mean(self.ssim.iter().copied())
    }
}

/// Per-frame PSNR/SSIM against `clean`, TC of `denoised`, and the stack summaries.
pub fn profile_report(
    clean: &Sequence,
    denoised: &Sequence,
    plan: &StackPlan,
    flow: FlowMode<'_>,
) -> Result<ProfileReport> {
    if clean.len() != denoised.len() {
        return Err(Error::LengthMismatch {
            left: clean.len(),
            right: denoised.len(),
        });
    }
    let pairs: Vec<(f64, f64)> = clean
        .frames()
        .par_iter()
        .zip(denoised.frames())
        .map(|(c, d)| Ok((psnr(c, d)?, ssim(c, d)?)))
        .collect::<Result<_>>()?;
    let (psnr, ssim): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let tc = tc_series(denoised, flow)?;
    let intra = if tc.is_empty() {
        None
    } else {
        Some(intra_tc(&tc)?)
    };
    let inter = match inter_tc(&tc, plan.config().no, plan) {
        Ok(v) => Some(v),
        Err(Error::Empty(_)) => None,
        Err(e) => return Err(e),
    };
    let stack_phase_profile = stack_phase_profile(&psnr, plan)?;
    Ok(ProfileReport {
        psnr,
        ssim,
        tc,
        intra_tc: intra,
        inter_tc: inter,
        stack_phase_profile,
    })
}
