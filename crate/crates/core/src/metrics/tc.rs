//! Warping-error temporal consistency and its stack-aware summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{estimate_flow, warp, FlowField};
use crate::error::{Error, Result};
use crate::scheduler::StackPlan;
use crate::video_io::{Frame, Sequence};

/// Per-frame TC: `values[t]` is the warping error between frames `t` and `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TCSeries {
    pub values: Vec<f64>,
}

impl TCSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::InvalidParams(format!(
                "TC values must be >= 0, got {bad}"
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Source of the alignment between consecutive frames.
#[derive(Debug, Clone, Copy)]
pub enum FlowMode<'a> {
    /// `flows[t]` maps frame `t + 1` onto frame `t`.
    GroundTruth(&'a [FlowField]),
    /// Flow estimated on the luma of the sequence being measured.
    Estimated,
}

/// Mean of `|luma(u_t) - warp(luma(u_t1), flow)|` over the valid warp mask.
pub fn frame_tc(u_t: &Frame, u_t1: &Frame, flow: &FlowField) -> Result<f64> {
    frame_tc_masked(u_t, u_t1, flow, None)
}

/// [`frame_tc`] restricted further by `keep` (row-major, one entry per pixel).
pub fn frame_tc_masked(
    u_t: &Frame,
    u_t1: &Frame,
    flow: &FlowField,
    keep: Option<&[bool]>,
) -> Result<f64> {
    if !u_t.same_shape(u_t1) {
        return Err(Error::DimMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            u_t.width(),
            u_t.height(),
            u_t.channels(),
            u_t1.width(),
            u_t1.height(),
            u_t1.channels()
        )));
    }
    if let Some(k) = keep {
        if k.len() != u_t.pixel_count() {
            return Err(Error::DimMismatch(format!(
                "mask has {} entries, frame {}",
                k.len(),
                u_t.pixel_count()
            )));
        }
    }
    let a = u_t.to_luma();
    let (aligned, valid) = warp(&u_t1.to_luma(), flow)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, ((p, q), ok)) in a
        .samples()
        .iter()
        .zip(aligned.samples())
        .zip(&valid)
        .enumerate()
    {
        if *ok && keep.is_none_or(|k| k[i]) {
            sum += (p - q).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

/// TC for every consecutive pair of `seq`.
pub fn tc_series(seq: &Sequence, flow: FlowMode<'_>) -> Result<TCSeries> {
    let frames = seq.frames();
    if let FlowMode::GroundTruth(flows) = flow {
        if flows.len() + 1 != frames.len() {
            return Err(Error::LengthMismatch {
                left: flows.len(),
                right: frames.len().saturating_sub(1),
            });
        }
    }
    let values = (0..frames.len().saturating_sub(1))
        .into_par_iter()
        .map(|t| {
            let (a, b) = (&frames[t], &frames[t + 1]);
            match flow {
                FlowMode::GroundTruth(flows) => frame_tc(a, b, &flows[t]),
                FlowMode::Estimated => frame_tc(a, b, &estimate_flow(&a.to_luma(), &b.to_luma())?),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    TCSeries::new(values)
}

fn lower_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Median of the per-frame TC; lower median for even counts.
pub fn intra_tc(tc: &TCSeries) -> Result<f64> {
    if tc.is_empty() {
        return Err(Error::Empty("TC series".into()));
    }
    Ok(lower_median(tc.values.clone()))
}

/// Lower median of per-window maxima over windows of `no` TC values.
///
/// Windows are phased so that the first stack transition (the last output
/// index of stack 0) is the last index of a window. Partial windows at
/// either end are dropped.
pub fn inter_tc(tc: &TCSeries, no: usize, plan: &StackPlan) -> Result<f64> {
    if no == 0 {
        return Err(Error::InvalidParams("window length must be >= 1".into()));
    }
    let phase = plan.transitions().first().map_or(0, |&d| (d + 1) % no);
    let windows: Vec<f64> = tc.values[phase.min(tc.len())..]
        .chunks_exact(no)
        .map(|w| w.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    if windows.is_empty() {
        return Err(Error::Empty(format!("no full window of {no} TC values")));
    }
    Ok(lower_median(windows))
}

/// Mean of `values`, ignoring infinite entries. All-infinite input gives
/// infinity; empty input gives `None`.
pub fn finite_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut finite = 0usize;
    let mut infinite = 0usize;
    for v in values {
        if v.is_infinite() {
            infinite += 1;
        } else {
            sum += v;
            finite += 1;
        }
    }
    if infinite > 0 && finite > 0 {
        log::warn!("{infinite} infinite PSNR value(s) excluded from mean");
    }
    match (finite, infinite) {
        (0, 0) => None,
        (0, _) => Some(f64::INFINITY),
        _ => Some(sum / finite as f64),
    }
}

/// Position of frame `t` inside the stack that emits it.
pub fn stack_phase(t: usize, plan: &StackPlan) -> (usize, usize) {
    let s = plan.emitting_stack(t);
    (s, t - plan.stacks()[s].output.start)
}

/// Mean PSNR per within-stack position `0..N_o`; `None` where no frame lands.
pub fn stack_phase_profile(psnr: &[f64], plan: &StackPlan) -> Result<Vec<Option<f64>>> {
    if psnr.len() != plan.frame_count() {
        return Err(Error::LengthMismatch {
            left: psnr.len(),
            right: plan.frame_count(),
        });
    }
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); plan.config().no];
    for (t, &p) in psnr.iter().enumerate() {
        buckets[stack_phase(t, plan).1].push(p);
    }
    Ok(buckets.into_iter().map(finite_mean).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::GaussianField;
    use crate::scheduler::{plan_stacks, Recurrence, SchedulerConfig};
    use crate::video_io::ChannelLayout;

    fn plan(t: usize, no: usize, p: usize) -> StackPlan {
        plan_stacks(
            t,
            &SchedulerConfig::new(no, no, p, Recurrence::None).unwrap(),
        )
        .unwrap()
    }

    fn series(v: &[f64]) -> TCSeries {
        TCSeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn intra_median_rules() {
        assert_eq!(intra_tc(&series(&[1.0, 1.0, 1.0, 9.0, 1.0])).unwrap(), 1.0);
        assert_eq!(intra_tc(&series(&[5.0])).unwrap(), 5.0);
        assert_eq!(intra_tc(&series(&[4.0, 3.0, 2.0, 1.0])).unwrap(), 2.0);
        assert!(matches!(intra_tc(&series(&[])), Err(Error::Empty(_))));
    }

    #[test]
    fn inter_picks_transition_spikes() {
        let tc = series(&[1.0, 1.0, 5.0, 1.0, 1.0, 6.0, 1.0, 1.0, 4.0]);
        let p = plan(10, 3, 0);
        assert_eq!(p.transitions(), vec![2, 5, 8]);
        assert_eq!(inter_tc(&tc, 3, &p).unwrap(), 5.0);
    }

    #[test]
    fn inter_of_constant_series() {
        let tc = series(&[2.5; 20]);
        assert_eq!(inter_tc(&tc, 7, &plan(21, 7, 0)).unwrap(), 2.5);
    }

    #[test]
    fn inter_drops_partial_windows() {
        // Transition at 4 puts windows at [0,5), [5,10); the tail 10..12 is dropped.
        let mut v = vec![1.0; 12];
        v[4] = 3.0;
        v[9] = 7.0;
        v[11] = 100.0;
        assert_eq!(inter_tc(&series(&v), 5, &plan(13, 5, 0)).unwrap(), 3.0);
        assert!(matches!(
            inter_tc(&series(&[1.0, 2.0]), 5, &plan(13, 5, 0)),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn rejects_negative_values() {
        assert!(TCSeries::new(vec![0.0, -1.0]).is_err());
        assert!(TCSeries::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn identity_pair_is_zero() {
        let f = Frame::from_fn(20, 20, ChannelLayout::Rgb, |c, y, x| {
            (c * 7 + y * 3 + x) as f64
        })
        .unwrap();
        assert_eq!(frame_tc(&f, &f, &FlowField::zeros(20, 20)).unwrap(), 0.0);
    }

    #[test]
    fn fully_masked_pair_errors() {
        let f = Frame::zeros(4, 4, ChannelLayout::Mono).unwrap();
        let flow = FlowField::constant(4, 4, 10.0, 0.0);
        assert!(matches!(frame_tc(&f, &f, &flow), Err(Error::EmptyMask)));
    }

    #[test]
    fn independent_noise_matches_half_normal_mean() {
        let sigma = 20.0;
        let (w, h) = (400, 400);
        let field = GaussianField::new(5);
        let base = Frame::filled(w, h, ChannelLayout::Mono, 120.0).unwrap();
        let noisy = |t| {
            let n = field.fill(t, 1, h, w);
            base.zip_with(
                &Frame::new(w, h, ChannelLayout::Mono, n).unwrap(),
                |a, z| a + sigma * z,
            )
            .unwrap()
        };
        let tc = frame_tc(&noisy(0), &noisy(1), &FlowField::zeros(w, h)).unwrap();
        let expected = 2.0 * sigma / std::f64::consts::PI.sqrt();
        assert!((tc - expected).abs() < 0.5, "{tc} vs {expected}");
    }

    #[test]
    fn profile_positions() {
        let p = plan(14, 7, 2);
        // stacks [0,7), [5,12), [10,14); emitting stacks 0,0,0,0,0,1,1,1,1,1,2,2,2,2
        let phases: Vec<_> = (0..14).map(|t| stack_phase(t, &p)).collect();
        assert_eq!(phases[4], (0, 4));
        assert_eq!(phases[5], (1, 0));
        assert_eq!(phases[9], (1, 4));
        assert_eq!(phases[13], (2, 3));
        let psnr: Vec<f64> = (0..14).map(|t| t as f64).collect();
        let prof = stack_phase_profile(&psnr, &p).unwrap();
        assert_eq!(prof[0], Some((0.0 + 5.0 + 10.0) / 3.0));
        assert_eq!(prof[5], None);
        assert_eq!(prof[6], None);
    }

    #[test]
    fn profile_uniform_and_miso() {
        let p = plan(10, 1, 0);
        let prof = stack_phase_profile(&[30.0; 10], &p).unwrap();
        assert_eq!(prof, vec![Some(30.0)]);
        let p = plan(21, 7, 0);
        assert!(stack_phase_profile(&[30.0; 21], &p)
            .unwrap()
            .iter()
            .all(|v| *v == Some(30.0)));
        assert!(stack_phase_profile(&[30.0; 5], &p).is_err());
    }

    #[test]
    fn finite_mean_sentinels() {
        assert_eq!(finite_mean([1.0, f64::INFINITY, 3.0]), Some(2.0));
        assert_eq!(finite_mean([f64::INFINITY]), Some(f64::INFINITY));
        assert_eq!(finite_mean([]), None);
    }
}
