use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the channels of a [`Frame`] are to be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelLayout {
    Mono,
    Rgb,
    /// Full-range BT.601 Y'CbCr, as carried by 4:4:4 Y4M streams.
    YCbCr,
}

impl ChannelLayout {
    pub fn channels(self) -> usize {
        match self {
            ChannelLayout::Mono => 1,
            ChannelLayout::Rgb | ChannelLayout::YCbCr => 3,
        }
    }
}

/// A planar image with real-valued samples on the nominal [0, 255] scale.
///
/// Samples are stored channel-major: all of channel 0 row by row, then
/// channel 1, then channel 2. Every sample is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    layout: ChannelLayout,
    samples: Vec<f64>,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        layout: ChannelLayout,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero-sized frame {width}x{height}"
            )));
        }
        let expected = width * height * layout.channels();
        if samples.len() != expected {
            return Err(Error::InvalidFrame(format!(
                "{} samples for a {width}x{height}x{} frame",
                samples.len(),
                layout.channels()
            )));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidFrame(format!(
                "non-finite sample at index {pos}"
            )));
        }
        Ok(Self {
            width,
            height,
            layout,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, layout: ChannelLayout, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            layout,
            vec![value; width * height * layout.channels()],
        )
    }

    pub fn zeros(width: usize, height: usize, layout: ChannelLayout) -> Result<Self> {
        Self::filled(width, height, layout, 0.0)
    }

    /// Builds a frame from a per-pixel function of `(channel, row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        layout: ChannelLayout,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * layout.channels());
        for c in 0..layout.channels() {
            for y in 0..height {
                for x in 0..width {
                    samples.push(f(c, y, x));
                }
            }
        }
        Self::new(width, height, layout, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.layout.channels()
    }

    pub fn layout(&self) -> ChannelLayout {
        self.layout
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.pixel_count();
        &self.samples[channel * n..(channel + 1) * n]
    }

    #[inline]
    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.samples[(channel * self.height + y) * self.width + x]
    }

    /// True when `other` has the same width, height and layout.
    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.layout == other.layout
    }

    /// Applies `f` to every sample. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Frame> {
        Frame::new(
            self.width,
            self.height,
            self.layout,
            self.samples.iter().map(|&s| f(s)).collect(),
        )
    }

    /// Sample-wise combination of two equally shaped frames.
    pub fn zip_with(&self, other: &Frame, f: impl Fn(f64, f64) -> f64) -> Result<Frame> {
        if !self.same_shape(other) {
            return Err(Error::HeterogeneousFrames);
        }
        Frame::new(
            self.width,
            self.height,
            self.layout,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Rec.601 luma. RGB frames are weighted 0.299/0.587/0.114, Y'CbCr frames
    /// yield their Y' plane, mono frames are returned unchanged.
    pub fn to_luma(&self) -> Frame {
        match self.layout {
            ChannelLayout::Mono => self.clone(),
            ChannelLayout::YCbCr => Frame {
                width: self.width,
                height: self.height,
                layout: ChannelLayout::Mono,
                samples: self.plane(0).to_vec(),
            },
            ChannelLayout::Rgb => {
                let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
                let samples = r
                    .iter()
                    .zip(g)
                    .zip(b)
                    .map(|((&r, &g), &b)| 0.299 * r + 0.587 * g + 0.114 * b)
                    .collect();
                Frame {
                    width: self.width,
                    height: self.height,
                    layout: ChannelLayout::Mono,
                    samples,
                }
            }
        }
    }
}

/// Free-function form of [`Frame::to_luma`].
pub fn to_luma(frame: &Frame) -> Frame {
    frame.to_luma()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl Default for FrameRate {
    fn default() -> Self {
        Self { num: 25, den: 1 }
    }
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Self {
        Self { num, den }
    }
}

/// One Y4M stream-header parameter, kept in the order it was read.
///
/// `Width`, `Height`, `FrameRate` and `Colorspace` are placeholders whose
/// values are taken from the sequence at write time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeaderParam {
    Width,
    Height,
    FrameRate,
    Colorspace,
    Interlace(char),
    Aspect(u32, u32),
    /// `X` extensions and any other parameter letter, stored verbatim.
    Other(String),
}

/// Container metadata carried alongside the frames so that a parsed stream
/// can be written back byte for byte.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamParams {
    pub header: Vec<HeaderParam>,
    /// Raw text following `FRAME ` for each frame; empty when absent.
    pub frame_params: Vec<String>,
}

/// An ordered, homogeneous, non-empty list of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    frames: Vec<Frame>,
    frame_rate: FrameRate,
    params: StreamParams,
}

impl Sequence {
    pub fn new(frames: Vec<Frame>, frame_rate: FrameRate) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptySequence)?;
        if frames.iter().any(|f| !f.same_shape(first)) {
            return Err(Error::HeterogeneousFrames);
        }
        Ok(Self {
            frames,
            frame_rate,
            params: StreamParams::default(),
        })
    }

    pub fn with_params(mut self, params: StreamParams) -> Self {
        self.params = params;
        self
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_rate(&self) -> FrameRate {
        self.frame_rate
    }

    pub fn params(&self) -> &StreamParams {
        &self.params
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn layout(&self) -> ChannelLayout {
        self.frames[0].layout()
    }

    pub fn channels(&self) -> usize {
        self.layout().channels()
    }

    /// Luma version of every frame; container metadata is dropped.
    pub fn to_luma(&self) -> Sequence {
        Sequence {
            frames: self.frames.iter().map(Frame::to_luma).collect(),
            frame_rate: self.frame_rate,
            params: StreamParams::default(),
        }
    }
}
