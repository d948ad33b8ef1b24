use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimostream::video_io::{read_flows, read_video, write_flows, write_video};
use mimostream::{
    add_awgn, plan_stacks, profile_report, render_translating, run_pipeline, DenoiserSpec,
    FlowMode, NoiseSpec, ProfileReport, Recurrence, SceneSpec, SchedulerConfig, TCSeries,
};
use mimostream_cli::experiment::compare_configs;
use mimostream_cli::report::{format_real, serialize_opt_real, serialize_opt_reals};
use mimostream_cli::{
    emit_profile_svg, run_experiment, write_comparison_csv, write_frame_csv, CliError, CliResult,
    ExperimentConfig, FRAME_COLUMNS,
};

#[derive(Parser)]
#[command(
    name = "mimostream",
    version,
    about = "Streaming stack-denoising experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a translating textured scene.
    Synth {
        /// WIDTHxHEIGHTxFRAMES, e.g. 128x96x70
        #[arg(long)]
        scene: String,
        /// Pixels per frame as VX,VY
        #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
        velocity: String,
        #[arg(long, default_value_t = 2.0)]
        texture_scale: f64,
        #[arg(long, default_value_t = 0)]
        texture_seed: u64,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        /// `.y4m` or raw planar output
        #[arg(long)]
        out: PathBuf,
        /// Optional ground-truth flow output
        #[arg(long)]
        flows: Option<PathBuf>,
    },
    /// Add seeded Gaussian noise to a video.
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        ni: Option<usize>,
        #[arg(long)]
        no: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
        #[arg(long)]
        recurrence: Option<Recurrence>,
    },
    /// Run several configs on the same input and tabulate deltas against the first.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fidelity and temporal consistency of a test video against a reference.
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Ground-truth flows for TC instead of estimated flow
        #[arg(long)]
        flows: Option<PathBuf>,
        #[command(flatten)]
        plan: PlanArgs,
        /// Per-frame CSV output
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Draw the PSNR/TC profile of a per-frame CSV.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// Input stack size (defaults to the output stack size)
    #[arg(long)]
    ni: Option<usize>,
    #[arg(long, default_value_t = 7)]
    no: usize,
    #[arg(long, default_value_t = 0)]
    overlap: usize,
    #[arg(long, default_value = "none")]
    recurrence: Recurrence,
}

impl PlanArgs {
    fn config(&self) -> CliResult<SchedulerConfig> {
        Ok(SchedulerConfig::new(
            self.ni.unwrap_or(self.no),
            self.no,
            self.overlap,
            self.recurrence,
        )?)
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_scene(text: &str) -> CliResult<(usize, usize, usize)> {
    let parts: Vec<&str> = text.split('x').collect();
    let bad = || config_err(format!("scene `{text}` is not WxHxT"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let n: Vec<usize> = parts
        .iter()
        .map(|p| p.parse().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    Ok((n[0], n[1], n[2]))
}

fn parse_velocity(text: &str) -> CliResult<(f64, f64)> {
    let bad = || config_err(format!("velocity `{text}` is not VX,VY"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    println!("{text}");
    Ok(())
}

#[derive(serde::Serialize)]
struct MetricsSummary {
    frames: usize,
    #[serde(serialize_with = "serialize_opt_real")]
    mean_psnr: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    mean_ssim: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    intra_tc: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    inter_tc: Option<f64>,
    #[serde(serialize_with = "serialize_opt_reals")]
    stack_phase_psnr: Vec<Option<f64>>,
}

fn metrics(
    reference: &Path,
    test: &Path,
    flows: Option<&Path>,
    plan: &PlanArgs,
    csv: Option<&Path>,
) -> CliResult<()> {
    let clean = read_video(reference)?;
    let test = read_video(test)?;
    let config = plan.config()?;
    let flows = flows.map(read_flows).transpose()?;
    let mode = flows
        .as_deref()
        .map_or(FlowMode::Estimated, FlowMode::GroundTruth);
    // Emission timing depends only on the schedule, so replaying the test
    // video through an identity pipeline recovers it.
    let run = run_pipeline(&test, &config, &DenoiserSpec::identity())?;
    let report = profile_report(&clean, &test, &run.plan, mode)?;
    if let Some(path) = csv {
        write_frame_csv(fs::File::create(path)?, &report, &run)?;
    }
    print_json(&MetricsSummary {
        frames: clean.len(),
        mean_psnr: report.mean_psnr(),
        mean_ssim: report.mean_ssim(),
        intra_tc: report.intra_tc,
        inter_tc: report.inter_tc,
        stack_phase_psnr: report.stack_phase_profile.clone(),
    })
}

fn read_profile_csv(path: &Path) -> CliResult<ProfileReport> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != FRAME_COLUMNS {
        return Err(CliError::Data(format!(
            "{}: unexpected columns {header:?}",
            path.display()
        )));
    }
    let num = |s: &str| -> CliResult<f64> {
        s.parse()
            .map_err(|_| CliError::Data(format!("bad number `{s}`")))
    };
    let (mut psnr, mut ssim, mut tc) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        psnr.push(num(&rec[1])?);
        ssim.push(num(&rec[2])?);
        if !rec[3].is_empty() {
            tc.push(num(&rec[3])?);
        }
    }
    if psnr.is_empty() {
        return Err(CliError::Data(format!("{}: no frames", path.display())));
    }
    Ok(ProfileReport {
        stack_phase_profile: Vec::new(),
        psnr,
        ssim,
        tc: TCSeries::new(tc)?,
        intra_tc: None,
        inter_tc: None,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth {
            scene,
            velocity,
            texture_scale,
            texture_seed,
            channels,
            out,
            flows,
        } => {
            let (width, height, length) = parse_scene(&scene)?;
            let gt = render_translating(&SceneSpec {
                width,
                height,
                length,
                velocity: parse_velocity(&velocity)?,
                texture_seed,
                texture_scale,
                channels,
            })?;
            write_video(&gt.clean, &out)?;
            if let Some(path) = flows {
                write_flows(&gt.flows, &path)?;
            }
            Ok(())
        }
        Command::Noise {
            input,
            sigma,
            seed,
            out,
        } => {
            let seq = read_video(&input)?;
            write_video(&add_awgn(&seq, &NoiseSpec::new(sigma, seed)?)?, &out)?;
            Ok(())
        }
        Command::Run {
            config,
            ni,
            no,
            overlap,
            recurrence,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            let s = &mut cfg.scheduler;
            s.ni = ni.unwrap_or(s.ni);
            s.no = no.unwrap_or(s.no);
            s.overlap = overlap.unwrap_or(s.overlap);
            s.recurrence = recurrence.unwrap_or(s.recurrence);
            let row = run_experiment(&cfg)?;
            print_json(&row)
        }
        Command::Compare { configs, out } => {
            let cfgs = configs
                .iter()
                .map(|p| ExperimentConfig::load(p))
                .collect::<CliResult<Vec<_>>>()?;
            let rows = compare_configs(&cfgs)?;
            write_comparison_csv(fs::File::create(&out)?, &rows)?;
            for r in &rows {
                println!(
                    "{}\tpsnr {}\tinter_tc {}",
                    r.id,
                    format_real(r.mean_psnr),
                    r.inter_tc.map(format_real).unwrap_or_default()
                );
            }
            Ok(())
        }
        Command::Metrics {
            reference,
            test,
            flows,
            plan,
            csv,
        } => metrics(&reference, &test, flows.as_deref(), &plan, csv.as_deref()),
        Command::Plot { input, plan, out } => {
            let report = read_profile_csv(&input)?;
            let stacks = plan_stacks(report.psnr.len(), &plan.config()?)?;
            fs::write(out, emit_profile_svg(&report, &stacks))?;
            Ok(())
        }
    }
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("MIMOSTREAM_THREADS") else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        config_err(format!(
            "MIMOSTREAM_THREADS=`{value}` is not a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_err(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
