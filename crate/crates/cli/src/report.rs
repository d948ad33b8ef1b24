//! CSV and JSON emission. Non-finite reals are written as `inf`, `-inf` or `nan`.

use std::io::Write;

use mimostream::metrics::stack_phase;
use mimostream::{PipelineRun, ProfileReport};
use serde::Serializer;

use crate::error::CliResult;

/// Fixed column order of the per-frame CSV.
pub const FRAME_COLUMNS: [&str; 7] = [
    "frame_idx",
    "psnr",
    "ssim",
    "tc",
    "stack_idx",
    "stack_phase",
    "emitted_after_input_idx",
];

/// Shortest round-trip decimal for finite values, `inf`/`-inf`/`nan` otherwise.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

pub fn serialize_real<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format_real(*v))
    }
}

pub fn serialize_reals<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| Real(*x)))
}

pub fn serialize_opt_real<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_real(x, s),
        None => s.serialize_none(),
    }
}

pub fn serialize_opt_reals<S: Serializer>(v: &[Option<f64>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.map(Real)))
}

#[derive(Clone, Copy)]
struct Real(f64);

impl serde::Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_real(&self.0, s)
    }
}

/// Writes one row per frame: metrics, emitting stack, phase and emission time.
pub fn write_frame_csv<W: Write>(
    out: W,
    report: &ProfileReport,
    run: &PipelineRun,
) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FRAME_COLUMNS)?;
    for t in 0..report.psnr.len() {
        let (stack, phase) = stack_phase(t, &run.plan);
        let tc = report
            .tc
            .values
            .get(t)
            .map(|v| format_real(*v))
            .unwrap_or_default();
        w.write_record([
            t.to_string(),
            format_real(report.psnr[t]),
            format_real(report.ssim[t]),
            tc,
            stack.to_string(),
            phase.to_string(),
            run.emitted_after_input(t).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(f64::INFINITY), "inf");
        assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_real(f64::NAN), "nan");
        assert_eq!(format_real(20.5), "20.5");
        assert_eq!(format_real(3.0), "3");
    }

    #[derive(serde::Serialize)]
    struct Probe {
        #[serde(serialize_with = "serialize_real")]
        a: f64,
        #[serde(serialize_with = "serialize_reals")]
        b: Vec<f64>,
        #[serde(serialize_with = "serialize_opt_real")]
        c: Option<f64>,
    }

    #[test]
    fn json_infinity_is_a_string() {
        let p = Probe {
            a: f64::INFINITY,
            b: vec![1.5, f64::INFINITY],
            c: None,
        };
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"a":"inf","b":[1.5,"inf"],"c":null}"#
        );
    }
}
