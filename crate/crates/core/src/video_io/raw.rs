//! Raw planar video: a headerless stream of little-endian `f32` samples,
//! frame after frame, each frame channel-major, described by a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::frame::{ChannelLayout, Frame, FrameRate, Sequence};
use crate::error::{Error, Result};
use crate::metrics::FlowField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDescriptor {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub frames: usize,
    #[serde(default = "default_sample_format")]
    pub sample_format: String,
    #[serde(default)]
    pub frame_rate: Option<FrameRate>,
}

fn default_sample_format() -> String {
    "f32le".to_string()
}

/// `video.raw` -> `video.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

pub fn encode_raw(seq: &Sequence) -> (RawDescriptor, Vec<u8>) {
    let desc = RawDescriptor {
        width: seq.width(),
        height: seq.height(),
        channels: seq.channels(),
        frames: seq.len(),
        sample_format: default_sample_format(),
        frame_rate: Some(seq.frame_rate()),
    };
    let mut bytes = Vec::with_capacity(seq.len() * seq.width() * seq.height() * seq.channels() * 4);
    for frame in seq.frames() {
        for &s in frame.samples() {
            bytes.extend_from_slice(&(s as f32).to_le_bytes());
        }
    }
    (desc, bytes)
}

pub fn decode_raw(desc: &RawDescriptor, bytes: &[u8]) -> Result<Sequence> {
    if desc.sample_format != "f32le" {
        return Err(Error::FormatMismatch(format!(
            "sample format `{}`",
            desc.sample_format
        )));
    }
    let layout = match desc.channels {
        1 => ChannelLayout::Mono,
        3 => ChannelLayout::Rgb,
        n => return Err(Error::FormatMismatch(format!("{n} channels"))),
    };
    let per_frame = desc.width * desc.height * desc.channels;
    let expected = per_frame * desc.frames * 4;
    if bytes.len() < expected {
        return Err(Error::TruncatedFrame {
            frame: bytes.len() / (per_frame * 4).max(1),
            expected,
            found: bytes.len(),
        });
    }
    let frames = bytes[..expected]
        .chunks_exact(per_frame * 4)
        .map(|chunk| {
            let samples = chunk
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
                .collect();
            Frame::new(desc.width, desc.height, layout, samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Sequence::new(frames, desc.frame_rate.unwrap_or_default())
}

pub fn write_raw(seq: &Sequence, path: &Path) -> Result<()> {
    let (desc, bytes) = encode_raw(seq);
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&desc)?)?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<Sequence> {
    let desc: RawDescriptor = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    decode_raw(&desc, &fs::read(path)?)
}

/// Sidecar for a flow file: per field a `u` plane and a `v` plane of
/// `f32le`, then one validity byte per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDescriptor {
    pub width: usize,
    pub height: usize,
    pub fields: usize,
    #[serde(default = "default_sample_format")]
    pub sample_format: String,
}

pub fn encode_flows(flows: &[FlowField]) -> Result<(FlowDescriptor, Vec<u8>)> {
    let first = flows.first().ok_or(Error::EmptySequence)?;
    let (w, h) = (first.width(), first.height());
    if flows.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(Error::HeterogeneousFrames);
    }
    let mut bytes = Vec::with_capacity(flows.len() * w * h * 9);
    for f in flows {
        for plane in [f.u(), f.v()] {
            for &s in plane {
                bytes.extend_from_slice(&(s as f32).to_le_bytes());
            }
        }
        bytes.extend(f.valid().iter().map(|&ok| u8::from(ok)));
    }
    let desc = FlowDescriptor {
        width: w,
        height: h,
        fields: flows.len(),
        sample_format: default_sample_format(),
    };
    Ok((desc, bytes))
}

pub fn decode_flows(desc: &FlowDescriptor, bytes: &[u8]) -> Result<Vec<FlowField>> {
    if desc.sample_format != "f32le" {
        return Err(Error::FormatMismatch(format!(
            "sample format `{}`",
            desc.sample_format
        )));
    }
    let n = desc.width * desc.height;
    let per_field = n * 9;
    let expected = per_field * desc.fields;
    if bytes.len() < expected {
        return Err(Error::TruncatedFrame {
            frame: bytes.len() / per_field.max(1),
            expected,
            found: bytes.len(),
        });
    }
    let floats = |b: &[u8]| -> Vec<f64> {
        b.chunks_exact(4)
            .map(|q| f64::from(f32::from_le_bytes([q[0], q[1], q[2], q[3]])))
            .collect()
    };
    bytes[..expected]
        .chunks_exact(per_field)
        .map(|chunk| {
            let u = floats(&chunk[..4 * n]);
            let v = floats(&chunk[4 * n..8 * n]);
            let valid = chunk[8 * n..].iter().map(|&b| b != 0).collect();
            FlowField::new(desc.width, desc.height, u, v, valid)
        })
        .collect()
}

pub fn write_flows(flows: &[FlowField], path: &Path) -> Result<()> {
    let (desc, bytes) = encode_flows(flows)?;
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), serde_json::to_vec_pretty(&desc)?)?;
    Ok(())
}

pub fn read_flows(path: &Path) -> Result<Vec<FlowField>> {
    let desc: FlowDescriptor = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    decode_flows(&desc, &fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_on_disk() {
        let frames = (0..3)
            .map(|t| {
                Frame::from_fn(4, 2, ChannelLayout::Rgb, |c, y, x| {
                    (t * 50 + c * 10 + y * 4 + x) as f64 + 0.25
                })
                .unwrap()
            })
            .collect();
        let seq = Sequence::new(frames, FrameRate::new(24, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.raw");
        write_raw(&seq, &path).unwrap();
        assert!(sidecar_path(&path).exists());
        assert_eq!(read_raw(&path).unwrap(), seq);
    }

    #[test]
    fn short_payload_is_truncated() {
        let desc = RawDescriptor {
            width: 2,
            height: 2,
            channels: 1,
            frames: 2,
            sample_format: default_sample_format(),
            frame_rate: None,
        };
        assert!(matches!(
            decode_raw(&desc, &[0u8; 20]),
            Err(Error::TruncatedFrame { .. })
        ));
    }

    #[test]
    fn flow_round_trip() {
        let a = FlowField::constant(3, 2, 0.5, -1.25);
        let b = FlowField::constant(3, 2, 2.0, 0.0)
            .with_valid(vec![true, false, true, true, true, false])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flow.raw");
        write_flows(&[a.clone(), b.clone()], &path).unwrap();
        assert_eq!(read_flows(&path).unwrap(), vec![a, b]);
    }
}
