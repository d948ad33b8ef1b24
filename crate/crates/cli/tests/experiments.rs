use std::fs;
use std::path::Path;
use std::process::Command;

use mimostream::metrics::tc_series;
use mimostream::{render_translating, FlowMode, SceneSpec};
use mimostream_cli::report::format_real;
use mimostream_cli::{
    compare_configs, run_experiment, write_comparison_csv, CliError, ExperimentConfig,
};

const GOLDEN_HEADER: &str = include_str!("golden/frames_header.csv");

fn scene(length: usize) -> SceneSpec {
    SceneSpec {
        width: 40,
        height: 32,
        length,
        velocity: (1.0, 0.0),
        texture_seed: 11,
        texture_scale: 2.0,
        channels: 1,
    }
}

fn config(dir: &Path, id: &str, body: &str) -> ExperimentConfig {
    let text = format!(
        r#"{{"schema": 1, "id": "{id}", "output_dir": {}, {body}}}"#,
        serde_json::to_string(dir).unwrap()
    );
    ExperimentConfig::from_json(&text).unwrap()
}

fn scene_json(length: usize) -> String {
    format!(r#""input": {{"scene": {}}}"#, serde_json::to_string(&scene(length)).unwrap())
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn frame_csv_matches_golden_schema_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "sched",
        &format!(
            r#"{}, "noise": [15], "scheduler": {{"ni": 3, "no": 3}}, "denoiser": {{"kind": "temporal_average"}}"#,
            scene_json(9)
        ),
    );
    run_experiment(&cfg).unwrap();
    let csv = fs::read_to_string(cfg.artifact_dir().join("frames_sigma15.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), GOLDEN_HEADER.trim_end());
    assert_eq!(column(&csv, "stack_idx"), ["0", "0", "0", "1", "1", "1", "2", "2", "2"]);
    assert_eq!(column(&csv, "stack_phase"), ["0", "1", "2", "0", "1", "2", "0", "1", "2"]);
    assert_eq!(column(&csv, "emitted_after_input_idx"), ["2", "2", "2", "5", "5", "5", "8", "8", "8"]);
    assert_eq!(column(&csv, "tc").last().unwrap(), "");
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "det",
        &format!(
            r#"{}, "noise": [10, 25.5], "seed": 3, "scheduler": {{"ni": 5, "no": 3, "overlap": 1, "recurrence": "prev"}},
            "denoiser": {{"kind": "recurrent_exponential", "lambda": 0.5, "temporal_radius": 1, "flow": {{"source": "estimated"}}, "uses_memory": true}},
            "svg": true"#,
            scene_json(12)
        ),
    );
    let names = ["frames_sigma10.csv", "frames_sigma25.5.csv", "summary.json", "profile_sigma10.svg"];
    let read = || names.map(|n| fs::read(cfg.artifact_dir().join(n)).unwrap());
    let first_row = run_experiment(&cfg).unwrap();
    let first = read();
    let second_row = run_experiment(&cfg).unwrap();
    assert_eq!(first, read());
    assert_eq!(first_row, second_row);
}

#[test]
fn identity_at_zero_noise_is_exact_and_keeps_clean_tc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "ident",
        &format!(
            r#"{}, "noise": [0], "scheduler": {{"ni": 7, "no": 5, "overlap": 2}}, "denoiser": {{"kind": "identity"}},
            "metrics": {{"use_gt_flow": true}}"#,
            scene_json(16)
        ),
    );
    let row = run_experiment(&cfg).unwrap();
    assert!(row.mean_psnr.is_infinite());
    let csv = fs::read_to_string(cfg.artifact_dir().join("frames_sigma0.csv")).unwrap();
    assert!(column(&csv, "psnr").iter().all(|p| p == "inf"));
    let gt = render_translating(&scene(16)).unwrap();
    let clean_tc: Vec<String> = tc_series(&gt.clean, FlowMode::GroundTruth(&gt.flows))
        .unwrap()
        .values
        .into_iter()
        .map(format_real)
        .collect();
    let tc = column(&csv, "tc");
    assert_eq!(&tc[..15], &clean_tc[..]);
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(cfg.artifact_dir().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["summary"]["mean_psnr"], "inf");
}

#[test]
fn mean_psnr_is_arithmetic_mean_over_sigmas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "sweep",
        &format!(
            r#"{}, "noise": [10, 20, 30, 40, 50], "scheduler": {{"ni": 5, "no": 5}}, "denoiser": {{"kind": "temporal_average"}}"#,
            scene_json(10)
        ),
    );
    let row = run_experiment(&cfg).unwrap();
    assert_eq!(row.psnr.len(), 5);
    assert_eq!(row.mean_psnr, row.psnr.iter().sum::<f64>() / 5.0);
    assert_eq!(row.mean_ssim, row.ssim.iter().sum::<f64>() / 5.0);
    assert!(row.psnr.windows(2).all(|w| w[0] > w[1]));
}

fn delta_columns(csv: &str) -> Vec<Vec<String>> {
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    header
        .iter()
        .filter(|h| h.starts_with("delta_"))
        .map(|h| column(csv, h))
        .collect()
}

#[test]
fn lone_baseline_has_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "base",
        &format!(
            r#"{}, "noise": [0, 20], "scheduler": {{"ni": 5, "no": 5}}, "denoiser": {{"kind": "identity"}}"#,
            scene_json(10)
        ),
    );
    let rows = compare_configs(&[cfg]).unwrap();
    let mut out = Vec::new();
    write_comparison_csv(&mut out, &rows).unwrap();
    let csv = String::from_utf8(out).unwrap();
    for col in delta_columns(&csv) {
        assert_eq!(col.len(), 1);
        assert!(col[0] == "0", "{csv}");
    }
}

#[test]
fn overlap_with_identity_keeps_psnr_and_costs_seven_fifths() {
    let dir = tempfile::tempdir().unwrap();
    let body = |sched: &str| {
        format!(
            r#"{}, "noise": [20], "scheduler": {sched}, "denoiser": {{"kind": "identity"}}"#,
            scene_json(70)
        )
    };
    let base = config(dir.path(), "mimo", &body(r#"{"ni": 7, "no": 7}"#));
    let oso = config(dir.path(), "oso", &body(r#"{"ni": 7, "no": 7, "overlap": 2}"#));
    let rows = compare_configs(&[base, oso]).unwrap();
    assert_eq!(rows[0].psnr, rows[1].psnr);
    assert_eq!(rows[0].ssim, rows[1].ssim);
    let ratio = rows[1].invocations_per_frame / rows[0].invocations_per_frame;
    assert!((ratio - 1.4).abs() < 1e-12, "{ratio}");
}

#[test]
fn roso_lowers_inter_stack_tc_for_motion_compensation() {
    let dir = tempfile::tempdir().unwrap();
    let input = r#""input": {"scene": {"width": 64, "height": 64, "length": 43, "velocity": [0.5, 0.25], "texture_seed": 7, "texture_scale": 2.0}}"#;
    let body = |sched: &str, memory: bool| {
        format!(
            r#"{input}, "noise": [30], "seed": 5, "scheduler": {sched},
            "denoiser": {{"kind": "motion_compensated_average", "temporal_radius": 2,
                "flow": {{"source": "global_translation", "vx": 0.5, "vy": 0.25}}, "uses_memory": {memory}}},
            "metrics": {{"use_gt_flow": true}}"#
        )
    };
    let base = config(dir.path(), "base", &body(r#"{"ni": 7, "no": 7}"#, false));
    let roso = config(
        dir.path(),
        "roso",
        &body(r#"{"ni": 7, "no": 7, "overlap": 2, "recurrence": "overlap"}"#, true),
    );
    let rows = compare_configs(&[base, roso]).unwrap();
    let (b, r) = (rows[0].inter_tc.unwrap(), rows[1].inter_tc.unwrap());
    assert!(r < b, "roso {r} vs baseline {b}");
}

#[test]
fn compare_rejects_heterogeneous_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let body = |noise: &str, len: usize| {
        format!(
            r#"{}, "noise": {noise}, "scheduler": {{"ni": 3, "no": 3}}, "denoiser": {{"kind": "identity"}}"#,
            scene_json(len)
        )
    };
    let a = config(dir.path(), "a", &body("[10]", 8));
    let b = config(dir.path(), "b", &body("[20]", 8));
    let c = config(dir.path(), "c", &body("[10]", 9));
    for other in [b, c] {
        let err = compare_configs(&[a.clone(), other]).unwrap_err();
        assert!(matches!(err, CliError::HeterogeneousInputs(_)));
        assert_eq!(err.exit_code(), 2);
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mimostream"))
}

#[test]
fn binary_exit_codes_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let status = bin()
        .args(["synth", "--scene", "24x20x8", "--velocity", "-1,0.5", "--out"])
        .arg(d.join("clean.y4m"))
        .arg("--flows")
        .arg(d.join("gt.flo"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let status = bin()
        .args(["noise", "--sigma", "10", "--input"])
        .arg(d.join("clean.y4m"))
        .arg("--out")
        .arg(d.join("noisy.y4m"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let out = bin()
        .args(["metrics", "--no", "4", "--reference"])
        .arg(d.join("clean.y4m"))
        .arg("--test")
        .arg(d.join("noisy.y4m"))
        .arg("--flows")
        .arg(d.join("gt.flo"))
        .arg("--csv")
        .arg(d.join("m.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["frames"], 8);

    let status = bin()
        .args(["plot", "--no", "4", "--input"])
        .arg(d.join("m.csv"))
        .arg("--out")
        .arg(d.join("m.svg"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let svg = fs::read_to_string(d.join("m.svg")).unwrap();
    assert_eq!(svg.matches(r#"class="transition""#).count(), 1);

    // Invalid scheduler overrides are configuration errors.
    let status = bin()
        .args(["metrics", "--no", "4", "--overlap", "3", "--reference"])
        .arg(d.join("clean.y4m"))
        .arg("--test")
        .arg(d.join("noisy.y4m"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    fs::write(d.join("broken.y4m"), b"YUV4MPEG2 W4 H4 F30:1 C444\nFRAME\n\x01\x02").unwrap();
    let status = bin()
        .args(["metrics", "--reference"])
        .arg(d.join("clean.y4m"))
        .arg("--test")
        .arg(d.join("broken.y4m"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    let status = bin()
        .env("MIMOSTREAM_THREADS", "0")
        .args(["noise", "--sigma", "1", "--input"])
        .arg(d.join("clean.y4m"))
        .arg("--out")
        .arg(d.join("x.y4m"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn run_subcommand_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(
        &path,
        format!(
            r#"{{"schema": 1, "id": "cli", "output_dir": "out", {}, "noise": [20],
            "scheduler": {{"ni": 5, "no": 5}}, "denoiser": {{"kind": "identity"}}}}"#,
            scene_json(20)
        ),
    )
    .unwrap();
    let out = bin()
        .args(["run", "--overlap", "2", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let row: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(row["id"], "cli");
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("out/cli/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["scheduler"]["overlap"], 2);

    fs::write(&path, r#"{"schema": 9}"#).unwrap();
    let status = bin().args(["run", "--config"]).arg(&path).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
