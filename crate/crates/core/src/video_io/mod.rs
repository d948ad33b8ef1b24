//! Frame value model and bit-exact video file IO.

mod frame;
pub mod raw;
pub mod y4m;

pub use frame::{to_luma, ChannelLayout, Frame, FrameRate, HeaderParam, Sequence, StreamParams};
pub use raw::{read_flows, read_raw, write_flows, write_raw, FlowDescriptor, RawDescriptor};
pub use y4m::{parse_y4m, quantize, write_y4m, Colorspace, Container, VideoFormat};

use std::path::Path;

use crate::error::Result;

/// Reads a `.y4m` file or a raw planar file with its JSON sidecar.
pub fn read_video(path: &Path) -> Result<Sequence> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("y4m") => parse_y4m(&std::fs::read(path)?),
        _ => read_raw(path),
    }
}

/// Writes `.y4m` when the extension says so, raw planar otherwise.
pub fn write_video(seq: &Sequence, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("y4m") => {
            std::fs::write(path, write_y4m(seq, &VideoFormat::y4m_for(seq))?)?;
            Ok(())
        }
        _ => write_raw(seq, path),
    }
}
