//! YUV4MPEG2 reader and writer restricted to 8-bit 4:4:4 and mono streams.
//!
//! Stream grammar:
//!
//! ```text
//! "YUV4MPEG2" (SP param)* LF  ( "FRAME" (SP param)* LF payload )*
//! ```
//!
//! Parsing keeps the order of the header parameters, any `X` extensions and
//! per-frame parameters, so `write_y4m(parse_y4m(bytes))` reproduces `bytes`
//! exactly for canonical streams.

use super::frame::{ChannelLayout, Frame, FrameRate, HeaderParam, Sequence, StreamParams};
use crate::error::{Error, Result};

const MAGIC: &[u8] = b"YUV4MPEG2 ";
const FRAME_MARKER: &[u8] = b"FRAME";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Container {
    Y4m,
    RawPlanar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colorspace {
    C444,
    Mono,
}

impl Colorspace {
    fn tag(self) -> &'static str {
        match self {
            Colorspace::C444 => "444",
            Colorspace::Mono => "mono",
        }
    }

    fn channels(self) -> usize {
        match self {
            Colorspace::C444 => 3,
            Colorspace::Mono => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VideoFormat {
    pub container: Container,
    pub colorspace: Colorspace,
    pub bit_depth: u8,
}

impl VideoFormat {
    /// The Y4M format matching a sequence's channel count.
    pub fn y4m_for(seq: &Sequence) -> Self {
        Self {
            container: Container::Y4m,
            colorspace: if seq.channels() == 1 {
                Colorspace::Mono
            } else {
                Colorspace::C444
            },
            bit_depth: 8,
        }
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedHeader(msg.into())
}

fn parse_uint(token: &str, what: &str) -> Result<u32> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed(format!("bad {what} value `{token}`")));
    }
    token
        .parse()
        .map_err(|_| malformed(format!("{what} value `{token}` out of range")))
}

fn parse_ratio(token: &str, what: &str) -> Result<(u32, u32)> {
    let (n, d) = token
        .split_once(':')
        .ok_or_else(|| malformed(format!("{what} must be <num>:<den>, got `{token}`")))?;
    Ok((parse_uint(n, what)?, parse_uint(d, what)?))
}

struct Header {
    width: usize,
    height: usize,
    frame_rate: FrameRate,
    colorspace: Colorspace,
    params: Vec<HeaderParam>,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut width = None;
    let mut height = None;
    let mut frame_rate = None;
    let mut colorspace = None;
    let mut params = Vec::new();

    for token in line.split(' ') {
        let mut chars = token.chars();
        let tag = chars
            .next()
            .ok_or_else(|| malformed("empty header parameter"))?;
        let value = chars.as_str();
        let dup = |name: &str| malformed(format!("duplicate {name} parameter"));
        match tag {
            'W' => {
                if width.replace(parse_uint(value, "W")?).is_some() {
                    return Err(dup("W"));
                }
                params.push(HeaderParam::Width);
            }
            'H' => {
                if height.replace(parse_uint(value, "H")?).is_some() {
                    return Err(dup("H"));
                }
                params.push(HeaderParam::Height);
            }
            'F' => {
                let (num, den) = parse_ratio(value, "F")?;
                if frame_rate.replace(FrameRate::new(num, den)).is_some() {
                    return Err(dup("F"));
                }
                params.push(HeaderParam::FrameRate);
            }
            'C' => {
                let cs = match value {
                    "444" => Colorspace::C444,
                    "mono" => Colorspace::Mono,
                    other => return Err(Error::UnsupportedColorspace(format!("C{other}"))),
                };
                if colorspace.replace(cs).is_some() {
                    return Err(dup("C"));
                }
                params.push(HeaderParam::Colorspace);
            }
            'I' => {
                let mut it = value.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => params.push(HeaderParam::Interlace(c)),
                    _ => return Err(malformed(format!("bad interlace value `{value}`"))),
                }
            }
            'A' => {
                let (n, d) = parse_ratio(value, "A")?;
                params.push(HeaderParam::Aspect(n, d));
            }
            _ => params.push(HeaderParam::Other(token.to_string())),
        }
    }

    let width = width.ok_or_else(|| malformed("missing W"))? as usize;
    let height = height.ok_or_else(|| malformed("missing H"))? as usize;
    if width == 0 || height == 0 {
        return Err(malformed(format!("zero frame size {width}x{height}")));
    }
    let frame_rate = frame_rate.ok_or_else(|| malformed("missing F"))?;
    // Without a C tag the stream is 4:2:0 by convention.
    let colorspace =
        colorspace.ok_or_else(|| Error::UnsupportedColorspace("C420jpeg (implied)".into()))?;

    Ok(Header {
        width,
        height,
        frame_rate,
        colorspace,
        params,
    })
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize, what: &str) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| malformed(format!("unterminated {what} line")))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| malformed(format!("{what} line is not ASCII")))
}

/// Parses a complete Y4M byte stream. Samples are the raw byte values.
pub fn parse_y4m(bytes: &[u8]) -> Result<Sequence> {
    if !bytes.starts_with(MAGIC) {
        return Err(malformed("missing YUV4MPEG2 magic"));
    }
    let mut pos = MAGIC.len();
    let header = parse_header(read_line(bytes, &mut pos, "stream header")?)?;

    let layout = match header.colorspace {
        Colorspace::C444 => ChannelLayout::YCbCr,
        Colorspace::Mono => ChannelLayout::Mono,
    };
    let payload_len = header.width * header.height * header.colorspace.channels();

    let mut frames = Vec::new();
    let mut frame_params = Vec::new();
    while pos < bytes.len() {
        if !bytes[pos..].starts_with(FRAME_MARKER) {
            return Err(malformed(format!("expected FRAME marker at byte {pos}")));
        }
        let line = read_line(bytes, &mut pos, "frame header")?;
        let extra = match &line[FRAME_MARKER.len()..] {
            "" => String::new(),
            rest => rest
                .strip_prefix(' ')
                .filter(|r| !r.is_empty())
                .ok_or_else(|| malformed(format!("bad frame header `{line}`")))?
                .to_string(),
        };
        let available = bytes.len() - pos;
        if available < payload_len {
            return Err(Error::TruncatedFrame {
                frame: frames.len(),
                expected: payload_len,
                found: available,
            });
        }
        let samples = bytes[pos..pos + payload_len]
            .iter()
            .map(|&b| f64::from(b))
            .collect();
        pos += payload_len;
        frames.push(Frame::new(header.width, header.height, layout, samples)?);
        frame_params.push(extra);
    }

    Ok(
        Sequence::new(frames, header.frame_rate)?.with_params(StreamParams {
            header: header.params,
            frame_params,
        }),
    )
}

/// Round half away from zero, then clamp to the 8-bit range.
pub fn quantize(sample: f64) -> u8 {
    sample.round().clamp(0.0, 255.0) as u8
}

fn rgb_to_ycbcr(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b,
        128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b,
        128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b,
    ]
}

/// Serializes a sequence as Y4M. RGB frames are converted to full-range
/// BT.601 Y'CbCr; Y'CbCr and mono planes are written as stored.
pub fn write_y4m(seq: &Sequence, format: &VideoFormat) -> Result<Vec<u8>> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if format.container != Container::Y4m {
        return Err(Error::FormatMismatch(
            "write_y4m needs a Y4M container".into(),
        ));
    }
    if format.bit_depth != 8 {
        return Err(Error::FormatMismatch(format!(
            "unsupported bit depth {}",
            format.bit_depth
        )));
    }
    if format.colorspace.channels() != seq.channels() {
        return Err(Error::FormatMismatch(format!(
            "colorspace C{} cannot hold {}-channel frames",
            format.colorspace.tag(),
            seq.channels()
        )));
    }

    let rate = seq.frame_rate();
    let render = |p: &HeaderParam| match p {
        HeaderParam::Width => format!("W{}", seq.width()),
        HeaderParam::Height => format!("H{}", seq.height()),
        HeaderParam::FrameRate => format!("F{}:{}", rate.num, rate.den),
        HeaderParam::Colorspace => format!("C{}", format.colorspace.tag()),
        HeaderParam::Interlace(c) => format!("I{c}"),
        HeaderParam::Aspect(n, d) => format!("A{n}:{d}"),
        HeaderParam::Other(raw) => raw.clone(),
    };

    let mut params = seq.params().header.clone();
    for required in [
        HeaderParam::Width,
        HeaderParam::Height,
        HeaderParam::FrameRate,
        HeaderParam::Colorspace,
    ] {
        if !params.contains(&required) {
            params.push(required);
        }
    }

    let payload_len = seq.width() * seq.height() * seq.channels();
    let mut out = Vec::with_capacity(64 + seq.len() * (payload_len + 6));
    out.extend_from_slice(b"YUV4MPEG2");
    for p in &params {
        out.push(b' ');
        out.extend_from_slice(render(p).as_bytes());
    }
    out.push(b'\n');

    let frame_params = &seq.params().frame_params;
    let keep_frame_params = frame_params.len() == seq.len();
    for (i, frame) in seq.frames().iter().enumerate() {
        out.extend_from_slice(FRAME_MARKER);
        if keep_frame_params && !frame_params[i].is_empty() {
            out.push(b' ');
            out.extend_from_slice(frame_params[i].as_bytes());
        }
        out.push(b'\n');
        match frame.layout() {
            ChannelLayout::Rgb => {
                let n = frame.pixel_count();
                let (r, g, b) = (frame.plane(0), frame.plane(1), frame.plane(2));
                let mut planes = vec![0u8; 3 * n];
                for i in 0..n {
                    let ycc = rgb_to_ycbcr(r[i], g[i], b[i]);
                    for (c, v) in ycc.iter().enumerate() {
                        planes[c * n + i] = quantize(*v);
                    }
                }
                out.extend_from_slice(&planes);
            }
            ChannelLayout::Mono | ChannelLayout::YCbCr => {
                out.extend(frame.samples().iter().map(|&s| quantize(s)));
            }
        }
    }
    Ok(out)
}
