use mimostream::metrics::{negate_flow, tc_series};
use mimostream::synth::{interior_mask, make_texture};
use mimostream::*;
use proptest::prelude::*;

/// Mean SSIM of the standard texture (scale 4, seed 1, 512x512) against
/// itself plus AWGN sigma 20 (noise seed 1), frozen from the direct-window oracle below.
const SSIM_TEXTURE_SIGMA20: f64 = 0.500_356_828_9;

/// SSIM evaluated window by window with explicit 2-D Gaussian weights.
fn ssim_direct(a: &Frame, b: &Frame) -> f64 {
    let (w, h) = (a.width(), a.height());
    let (pa, pb) = (a.plane(0), b.plane(0));
    let mut weights = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in weights.iter_mut().enumerate() {
        for (j, wt) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *wt = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            total += *wt;
        }
    }
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..=h - 11 {
        for x in 0..=w - 11 {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, row) in weights.iter().enumerate() {
                for (j, wt) in row.iter().enumerate() {
                    let k = wt / total;
                    let (p, q) = (pa[(y + i) * w + x + j], pb[(y + i) * w + x + j]);
                    ma += k * p;
                    mb += k * q;
                    saa += k * p * p;
                    sbb += k * q * q;
                    sab += k * p * q;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

#[test]
fn ssim_matches_direct_oracle_and_frozen_value() {
    let tex = make_texture(1, 512, 512, 4.0).unwrap();
    let clean = Sequence::new(vec![tex.clone()], FrameRate::default()).unwrap();
    let noisy = add_awgn(&clean, &NoiseSpec::new(20.0, 1).unwrap()).unwrap();
    let fast = ssim(&tex, &noisy.frames()[0]).unwrap();
    let direct = ssim_direct(&tex, &noisy.frames()[0]);
    assert!((fast - direct).abs() < 1e-10, "{fast} vs {direct}");
    assert!((fast - SSIM_TEXTURE_SIGMA20).abs() < 1e-9, "{fast}");
}

#[test]
fn psnr_of_sigma_51_noise() {
    let tex = make_texture(3, 400, 300, 2.0).unwrap();
    let clean = Sequence::new(vec![tex.clone()], FrameRate::default()).unwrap();
    let noisy = add_awgn(&clean, &NoiseSpec::new(51.0, 2).unwrap()).unwrap();
    let got = psnr(&tex, &noisy.frames()[0]).unwrap();
    assert!((got - 13.98).abs() < 0.05, "{got}");
}

#[test]
fn psnr_decreases_with_sigma() {
    let tex = make_texture(5, 320, 320, 2.0).unwrap();
    let clean = Sequence::new(vec![tex.clone()], FrameRate::default()).unwrap();
    let values: Vec<f64> = [10.0, 20.0, 30.0, 40.0, 50.0]
        .iter()
        .map(|&s| {
            psnr(
                &tex,
                &add_awgn(&clean, &NoiseSpec::new(s, 9).unwrap())
                    .unwrap()
                    .frames()[0],
            )
            .unwrap()
        })
        .collect();
    assert!(values.windows(2).all(|w| w[0] > w[1]), "{values:?}");
}

#[test]
fn flow_self_match_and_integer_translation() {
    let gt = render_translating(&SceneSpec {
        width: 96,
        height: 80,
        length: 2,
        velocity: (2.0, -1.0),
        texture_seed: 4,
        texture_scale: 2.0,
        channels: 1,
    })
    .unwrap();
    let f = gt.clean.frames();
    let same = estimate_flow(&f[0], &f[0]).unwrap();
    let mean_mag = same
        .u()
        .iter()
        .zip(same.v())
        .map(|(u, v)| u.hypot(*v))
        .sum::<f64>()
        / same.u().len() as f64;
    assert!(mean_mag < 0.05, "{mean_mag}");
    let flow = estimate_flow(&f[0], &f[1]).unwrap();
    let epe = flow
        .mean_endpoint_error(2.0, -1.0, |y, x| {
            (8..72).contains(&y) && (8..88).contains(&x)
        })
        .unwrap();
    assert!(epe <= 0.25, "{epe}");
}

#[test]
fn tc_symmetric_under_inverted_flow() {
    let v = (1.5, 0.5);
    let gt = render_translating(&SceneSpec {
        width: 96,
        height: 96,
        length: 2,
        velocity: v,
        texture_seed: 6,
        texture_scale: 2.0,
        channels: 1,
    })
    .unwrap();
    let noisy = add_awgn(&gt.clean, &NoiseSpec::new(10.0, 3).unwrap()).unwrap();
    let f = noisy.frames();
    let forward = estimate_flow(&f[0], &f[1]).unwrap();
    let backward = negate_flow(&forward);
    let a = frame_tc(&f[0], &f[1], &forward).unwrap();
    let b = frame_tc(&f[1], &f[0], &backward).unwrap();
    assert!((a - b).abs() / a.max(b) <= 0.1, "{a} vs {b}");
}

#[test]
fn identity_run_preserves_clean_tc() {
    let gt = render_translating(&SceneSpec {
        width: 48,
        height: 48,
        length: 29,
        velocity: (1.0, 0.0),
        texture_seed: 2,
        texture_scale: 2.0,
        channels: 1,
    })
    .unwrap();
    let c = SchedulerConfig::new(7, 7, 0, Recurrence::None).unwrap();
    let run = run_pipeline(&gt.clean, &c, &DenoiserSpec::identity()).unwrap();
    let rep = profile_report(
        &gt.clean,
        &run.denoised,
        &run.plan,
        FlowMode::GroundTruth(&gt.flows),
    )
    .unwrap();
    assert_eq!(rep.inter_tc, rep.intra_tc);
    assert!(rep.psnr.iter().all(|p| p.is_infinite()));
    assert_eq!(
        rep.tc,
        tc_series(&gt.clean, FlowMode::GroundTruth(&gt.flows)).unwrap()
    );
}

#[test]
fn estimated_mode_report_runs() {
    let gt = render_translating(&SceneSpec {
        width: 32,
        height: 32,
        length: 8,
        velocity: (0.5, 0.0),
        texture_seed: 2,
        texture_scale: 2.0,
        channels: 3,
    })
    .unwrap();
    let c = SchedulerConfig::new(3, 3, 1, Recurrence::None).unwrap();
    let run = run_pipeline(&gt.clean, &c, &DenoiserSpec::identity()).unwrap();
    let rep = profile_report(&gt.clean, &run.denoised, &run.plan, FlowMode::Estimated).unwrap();
    assert_eq!(rep.tc.len(), 7);
    assert!(rep.tc.values.iter().all(|v| *v < 5.0));
}

#[test]
fn interior_tc_of_clean_scene_is_zero_for_integer_motion() {
    let gt = render_translating(&SceneSpec {
        width: 40,
        height: 30,
        length: 4,
        velocity: (-2.0, 1.0),
        texture_seed: 8,
        texture_scale: 1.5,
        channels: 3,
    })
    .unwrap();
    let keep = interior_mask(40, 30, 3);
    let f = gt.clean.frames();
    for t in 0..3 {
        let tc = mimostream::metrics::frame_tc_masked(&f[t], &f[t + 1], &gt.flows[t], Some(&keep))
            .unwrap();
        assert!(tc <= 1e-6, "{tc}");
    }
}

fn plan_for(t: usize, no: usize) -> StackPlan {
    plan_stacks(
        t,
        &SchedulerConfig::new(no, no, 0, Recurrence::None).unwrap(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn summaries_ignore_a_partial_tail(values in prop::collection::vec(0.0..50.0f64, 14..60), extra in prop::collection::vec(0.0..50.0f64, 0..6), no in 2usize..7) {
        let t = values.len() + 1;
        let windows = values.len() / no;
        let full = &values[..windows * no];
        let base = TCSeries::new(full.to_vec()).unwrap();
        let mut padded = full.to_vec();
        padded.extend(extra.iter().take(no - 1));
        let with_tail = TCSeries::new(padded).unwrap();
        prop_assert_eq!(inter_tc(&base, no, &plan_for(t, no)).unwrap(), inter_tc(&with_tail, no, &plan_for(t, no)).unwrap());
    }

    #[test]
    fn intra_is_an_order_statistic(values in prop::collection::vec(0.0..100.0f64, 1..40)) {
        let m = intra_tc(&TCSeries::new(values.clone()).unwrap()).unwrap();
        let below = values.iter().filter(|v| **v < m).count();
        let at_or_below = values.iter().filter(|v| **v <= m).count();
        prop_assert!(below <= (values.len() - 1) / 2 && at_or_below > (values.len() - 1) / 2);
    }

    #[test]
    fn warp_by_zero_is_identity(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
        let field = GaussianField::new(seed);
        let f = Frame::new(w, h, ChannelLayout::Mono, field.fill(0, 1, h, w)).unwrap();
        let (out, mask) = warp(&f, &FlowField::zeros(w, h)).unwrap();
        prop_assert_eq!(out, f);
        prop_assert!(mask.iter().all(|m| *m));
    }
}
