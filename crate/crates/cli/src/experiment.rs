//! Experiment configs, sigma sweeps and multi-config comparison.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use mimostream::video_io::read_video;
use mimostream::{
    add_awgn, profile_report, render_translating, run_pipeline, DenoiserSpec, FlowField, FlowMode,
    NoiseSpec, PipelineRun, ProfileReport, SceneSpec, SchedulerConfig, Sequence,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::report::{
    format_real, serialize_opt_real, serialize_opt_reals, serialize_real, serialize_reals,
    write_frame_csv,
};
use crate::svg::emit_profile_svg;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Scene(SceneSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsOptions {
    /// Measure TC with the scene's ground-truth flow instead of estimating it.
    #[serde(default)]
    pub use_gt_flow: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub id: String,
    pub input: InputSource,
    /// Noise standard deviations, one pipeline run each.
    pub noise: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    pub scheduler: SchedulerConfig,
    pub denoiser: DenoiserSpec,
    #[serde(default)]
    pub metrics: MetricsOptions,
    /// Artifacts land in `output_dir/<id>/`.
    pub output_dir: PathBuf,
    #[serde(default)]
    pub svg: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it resolve against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        if let InputSource::Path(p) = &mut cfg.input {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id == "." || self.id == ".."
        {
            return Err(CliError::Config(format!(
                "id `{}` is not a valid directory name",
                self.id
            )));
        }
        if self.noise.is_empty() {
            return Err(CliError::Config("noise list is empty".into()));
        }
        let mut seen = HashSet::new();
        for &s in &self.noise {
            NoiseSpec::new(s, self.seed)?;
            if !seen.insert(s.to_bits()) {
                return Err(CliError::Config(format!("sigma {s} listed twice")));
            }
        }
        if let InputSource::Scene(scene) = &self.input {
            scene.validate()?;
        } else if self.metrics.use_gt_flow {
            return Err(CliError::Config(
                "use_gt_flow needs a synthetic scene input".into(),
            ));
        }
        self.scheduler.validate()?;
        self.denoiser.validate()?;
        Ok(())
    }

    pub fn artifact_dir(&self) -> PathBuf {
        self.output_dir.join(&self.id)
    }
}

/// Every sigma uses the config seed, so a sweep shares one noise pattern
/// scaled per level and configs with equal seeds see identical noise.
pub fn noise_for(cfg: &ExperimentConfig, sigma: f64) -> CliResult<NoiseSpec> {
    Ok(NoiseSpec::new(sigma, cfg.seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub id: String,
    pub sigmas: Vec<f64>,
    /// Mean over frames with finite PSNR; `inf` when every frame is exact.
    #[serde(serialize_with = "serialize_reals")]
    pub psnr: Vec<f64>,
    #[serde(serialize_with = "serialize_reals")]
    pub ssim: Vec<f64>,
    #[serde(serialize_with = "serialize_real")]
    pub mean_psnr: f64,
    #[serde(serialize_with = "serialize_real")]
    pub mean_ssim: f64,
    /// Averaged over sigmas.
    #[serde(serialize_with = "serialize_opt_real")]
    pub intra_tc: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    pub inter_tc: Option<f64>,
    pub invocations_per_frame: f64,
    pub worst_case_latency: usize,
    pub max_latency: usize,
}

#[derive(Debug, Clone, Serialize)]
struct SigmaResult {
    sigma: f64,
    noise_seed: u64,
    #[serde(serialize_with = "serialize_real")]
    mean_psnr: f64,
    #[serde(serialize_with = "serialize_real")]
    mean_ssim: f64,
    #[serde(serialize_with = "serialize_opt_real")]
    intra_tc: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    inter_tc: Option<f64>,
    #[serde(serialize_with = "serialize_opt_reals")]
    stack_phase_profile: Vec<Option<f64>>,
    invocations: usize,
    invocations_per_frame: f64,
    max_latency: usize,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    summary: &'a SummaryRow,
    per_sigma: &'a [SigmaResult],
}

struct Loaded {
    clean: Sequence,
    flows: Option<Vec<FlowField>>,
}

fn load_input(cfg: &ExperimentConfig) -> CliResult<Loaded> {
    match &cfg.input {
        InputSource::Scene(scene) => {
            let gt = render_translating(scene)?;
            Ok(Loaded {
                clean: gt.clean,
                flows: Some(gt.flows),
            })
        }
        InputSource::Path(p) => Ok(Loaded {
            clean: read_video(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
            flows: None,
        }),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn mean_opt(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

fn sigma_tag(sigma: f64) -> String {
    format_real(sigma)
}

fn run_sigma(
    cfg: &ExperimentConfig,
    input: &Loaded,
    sigma: f64,
) -> CliResult<(SigmaResult, ProfileReport, PipelineRun)> {
    let spec = noise_for(cfg, sigma)?;
    let noisy = add_awgn(&input.clean, &spec)?;
    let run = run_pipeline(&noisy, &cfg.scheduler, &cfg.denoiser)?;
    let mode = match (&input.flows, cfg.metrics.use_gt_flow) {
        (Some(flows), true) => FlowMode::GroundTruth(flows),
        _ => FlowMode::Estimated,
    };
    let report = profile_report(&input.clean, &run.denoised, &run.plan, mode)?;
    let result = SigmaResult {
        sigma,
        noise_seed: spec.seed,
        mean_psnr: report.mean_psnr().unwrap_or(f64::INFINITY),
        mean_ssim: report.mean_ssim().unwrap_or(1.0),
        intra_tc: report.intra_tc,
        inter_tc: report.inter_tc,
        stack_phase_profile: report.stack_phase_profile.clone(),
        invocations: run.cost.invocations,
        invocations_per_frame: run.cost.invocations_per_frame(),
        max_latency: run.budget.max_observed(),
    };
    info!(
        "{}: sigma {sigma} psnr {} inter_tc {:?}",
        cfg.id,
        format_real(result.mean_psnr),
        result.inter_tc
    );
    Ok((result, report, run))
}

/// Runs every sigma of `cfg` and writes `frames_sigma<s>.csv`, `summary.json`
/// and, when enabled, `profile_sigma<s>.svg` under [`ExperimentConfig::artifact_dir`].
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<SummaryRow> {
    cfg.validate()?;
    let input = load_input(cfg)?;
    let dir = cfg.artifact_dir();
    fs::create_dir_all(&dir)?;

    let outcomes: Vec<(SigmaResult, ProfileReport, PipelineRun)> = cfg
        .noise
        .par_iter()
        .map(|&s| run_sigma(cfg, &input, s))
        .collect::<CliResult<_>>()?;

    for (result, report, run) in &outcomes {
        let tag = sigma_tag(result.sigma);
        let mut csv = Vec::new();
        write_frame_csv(&mut csv, report, run)?;
        fs::write(dir.join(format!("frames_sigma{tag}.csv")), csv)?;
        if cfg.svg {
            fs::write(
                dir.join(format!("profile_sigma{tag}.svg")),
                emit_profile_svg(report, &run.plan),
            )?;
        }
    }

    let results: Vec<SigmaResult> = outcomes.into_iter().map(|(r, _, _)| r).collect();
    let psnr: Vec<f64> = results.iter().map(|r| r.mean_psnr).collect();
    let ssim: Vec<f64> = results.iter().map(|r| r.mean_ssim).collect();
    let row = SummaryRow {
        id: cfg.id.clone(),
        sigmas: cfg.noise.clone(),
        mean_psnr: mean(&psnr),
        mean_ssim: mean(&ssim),
        psnr,
        ssim,
        intra_tc: mean_opt(results.iter().map(|r| r.intra_tc)),
        inter_tc: mean_opt(results.iter().map(|r| r.inter_tc)),
        invocations_per_frame: results[0].invocations_per_frame,
        worst_case_latency: mimostream::worst_case_latency(&cfg.scheduler),
        max_latency: results.iter().map(|r| r.max_latency).max().unwrap_or(0),
    };
    let file = SummaryFile {
        config: cfg,
        summary: &row,
        per_sigma: &results,
    };
    let mut json = serde_json::to_vec_pretty(&file).map_err(|e| CliError::Data(e.to_string()))?;
    json.push(b'\n');
    fs::write(dir.join("summary.json"), json)?;
    Ok(row)
}

/// Runs all configs (in parallel) after checking they share input and noise list.
pub fn compare_configs(cfgs: &[ExperimentConfig]) -> CliResult<Vec<SummaryRow>> {
    let Some(base) = cfgs.first() else {
        return Err(CliError::Config("no configs to compare".into()));
    };
    let mut ids = HashSet::new();
    for c in cfgs {
        if c.input != base.input || c.noise != base.noise {
            return Err(CliError::HeterogeneousInputs(format!(
                "`{}` differs from `{}`",
                c.id, base.id
            )));
        }
        if !ids.insert((c.output_dir.clone(), c.id.clone())) {
            return Err(CliError::Config(format!("duplicate config id `{}`", c.id)));
        }
    }
    cfgs.par_iter().map(run_experiment).collect()
}

/// `a - b`, with equal infinities giving zero.
fn delta(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

/// One row per config plus `delta_*` columns against the first row.
pub fn write_comparison_csv<W: Write>(out: W, rows: &[SummaryRow]) -> CliResult<()> {
    let Some(base) = rows.first() else {
        return Err(CliError::Config("no rows to compare".into()));
    };
    let mut header: Vec<String> = [
        "id",
        "mean_psnr",
        "mean_ssim",
        "intra_tc",
        "inter_tc",
        "invocations_per_frame",
        "worst_case_latency",
        "max_latency",
    ]
    .map(String::from)
    .to_vec();
    for s in &base.sigmas {
        header.push(format!("psnr_sigma{}", sigma_tag(*s)));
        header.push(format!("ssim_sigma{}", sigma_tag(*s)));
    }
    for name in [
        "mean_psnr",
        "mean_ssim",
        "intra_tc",
        "inter_tc",
        "invocations_per_frame",
        "worst_case_latency",
        "max_latency",
    ] {
        header.push(format!("delta_{name}"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.id.clone(),
            format_real(r.mean_psnr),
            format_real(r.mean_ssim),
            opt(r.intra_tc),
            opt(r.inter_tc),
            format_real(r.invocations_per_frame),
            r.worst_case_latency.to_string(),
            r.max_latency.to_string(),
        ];
        for (p, s) in r.psnr.iter().zip(&r.ssim) {
            rec.push(format_real(*p));
            rec.push(format_real(*s));
        }
        let d_opt = |a: Option<f64>, b: Option<f64>| opt(a.zip(b).map(|(a, b)| delta(a, b)));
        rec.extend([
            format_real(delta(r.mean_psnr, base.mean_psnr)),
            format_real(delta(r.mean_ssim, base.mean_ssim)),
            d_opt(r.intra_tc, base.intra_tc),
            d_opt(r.inter_tc, base.inter_tc),
            format_real(delta(r.invocations_per_frame, base.invocations_per_frame)),
            (r.worst_case_latency as i64 - base.worst_case_latency as i64).to_string(),
            (r.max_latency as i64 - base.max_latency as i64).to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
