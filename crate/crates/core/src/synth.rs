//! Globally translating synthetic scenes with exact ground-truth flow.
//!
//! Frame `t` samples a band-limited random texture at `x + origin - t v`, so
//! `frame_{t+1}(x + v) = frame_t(x)` and the flow from `t` to `t + 1` is `v`
//! everywhere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{sample_bilinear, FlowField};
use crate::noise::GaussianField;
use crate::video_io::{ChannelLayout, Frame, FrameRate, Sequence};

pub const TEXTURE_MEAN: f64 = 128.0;
pub const TEXTURE_STD: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub length: usize,
    /// Pixels per frame.
    pub velocity: (f64, f64),
    pub texture_seed: u64,
    /// Correlation length in pixels (std of the blur kernel).
    pub texture_scale: f64,
    /// 1 (mono) or 3 (RGB, one independent texture per channel).
    #[serde(default = "one")]
    pub channels: usize,
}

fn one() -> usize {
    1
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene(
                "width and height must be positive".into(),
            ));
        }
        if self.length < 2 {
            return Err(Error::InvalidScene(format!(
                "length must be >= 2, got {}",
                self.length
            )));
        }
        if !(self.texture_scale >= 1.0 && self.texture_scale.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "texture_scale must be >= 1, got {}",
                self.texture_scale
            )));
        }
        if !(self.velocity.0.is_finite() && self.velocity.1.is_finite()) {
            return Err(Error::InvalidScene("velocity must be finite".into()));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::InvalidScene(format!(
                "channels must be 1 or 3, got {}",
                self.channels
            )));
        }
        Ok(())
    }

    fn layout(&self) -> ChannelLayout {
        if self.channels == 3 {
            ChannelLayout::Rgb
        } else {
            ChannelLayout::Mono
        }
    }

    /// Total displacement over the clip along one axis.
    fn travel(&self, v: f64) -> f64 {
        (self.length - 1) as f64 * v
    }

    /// Texture size needed to render the clip with a one-pixel margin.
    pub fn texture_dims(&self) -> (usize, usize) {
        let (vx, vy) = self.velocity;
        (
            self.width + 2 + self.travel(vx).abs().ceil() as usize,
            self.height + 2 + self.travel(vy).abs().ceil() as usize,
        )
    }

    /// Texture coordinate of pixel `(0, 0)` in frame 0.
    fn origin(&self) -> (f64, f64) {
        let (vx, vy) = self.velocity;
        (
            1.0 + self.travel(vx).max(0.0).ceil(),
            1.0 + self.travel(vy).max(0.0).ceil(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub clean: Sequence,
    /// `flows[t]` relates frame `t` to frame `t + 1`.
    pub flows: Vec<FlowField>,
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|t| *t /= sum);
    k
}

/// Separable convolution with edge clamping.
fn blur(plane: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut horiz = vec![0.0; w * h];
    horiz.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &plane[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            *out = taps
                .iter()
                .enumerate()
                .map(|(j, t)| t * src[clamp(x as isize + j as isize - r, w)])
                .sum();
        }
    });
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = taps
                .iter()
                .enumerate()
                .map(|(j, t)| t * horiz[clamp(y as isize + j as isize - r, h) * w + x])
                .sum();
        }
    });
    out
}

fn texture_plane(
    field: &GaussianField,
    channel: usize,
    w: usize,
    h: usize,
    scale: f64,
) -> Vec<f64> {
    let white = field.fill(0, channel + 1, h, w).split_off(channel * w * h);
    let mut plane = blur(&white, w, h, &gaussian_taps(scale));
    let n = plane.len() as f64;
    let mean = plane.iter().sum::<f64>() / n;
    let std = (plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let gain = if std > 0.0 { TEXTURE_STD / std } else { 0.0 };
    plane
        .iter_mut()
        .for_each(|v| *v = TEXTURE_MEAN + gain * (*v - mean));
    plane
}

/// White noise blurred with a Gaussian of std `scale`, rescaled to mean 128, std 40.
pub fn make_texture(seed: u64, big_width: usize, big_height: usize, scale: f64) -> Result<Frame> {
    make_texture_channels(seed, big_width, big_height, scale, ChannelLayout::Mono)
}

/// [`make_texture`] with one independent texture per channel of `layout`.
pub fn make_texture_channels(
    seed: u64,
    big_width: usize,
    big_height: usize,
    scale: f64,
    layout: ChannelLayout,
) -> Result<Frame> {
    if big_width == 0 || big_height == 0 || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidScene(format!(
            "texture {big_width}x{big_height} with scale {scale}"
        )));
    }
    let field = GaussianField::new(seed);
    let samples = (0..layout.channels())
        .flat_map(|c| texture_plane(&field, c, big_width, big_height, scale))
        .collect();
    Frame::new(big_width, big_height, layout, samples)
}

/// Renders the scene from a freshly generated texture.
pub fn render_translating(spec: &SceneSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let (bw, bh) = spec.texture_dims();
    let texture =
        make_texture_channels(spec.texture_seed, bw, bh, spec.texture_scale, spec.layout())?;
    render_with_texture(spec, &texture)
}

/// Renders the scene from a caller-supplied texture.
pub fn render_with_texture(spec: &SceneSpec, texture: &Frame) -> Result<GroundTruth> {
    spec.validate()?;
    let (need_w, need_h) = spec.texture_dims();
    if texture.width() < need_w || texture.height() < need_h {
        return Err(Error::FootprintExceedsTexture {
            needed_w: need_w,
            needed_h: need_h,
            have_w: texture.width(),
            have_h: texture.height(),
        });
    }
    if texture.channels() != spec.channels {
        return Err(Error::InvalidScene(format!(
            "texture has {} channels, scene wants {}",
            texture.channels(),
            spec.channels
        )));
    }
    let (ox, oy) = spec.origin();
    let (vx, vy) = spec.velocity;
    let (tw, th) = (texture.width(), texture.height());
    let frames = (0..spec.length)
        .into_par_iter()
        .map(|t| {
            let (sx, sy) = (ox - t as f64 * vx, oy - t as f64 * vy);
            Frame::from_fn(spec.width, spec.height, texture.layout(), |c, y, x| {
                sample_bilinear(texture.plane(c), tw, th, x as f64 + sx, y as f64 + sy)
                    .expect("footprint checked against texture size")
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let flows = vec![FlowField::constant(spec.width, spec.height, vx, vy); spec.length - 1];
    Ok(GroundTruth {
        clean: Sequence::new(frames, FrameRate::default())?,
        flows,
    })
}

/// Interior mask excluding a `margin`-pixel border.
pub fn interior_mask(width: usize, height: usize, margin: usize) -> Vec<bool> {
    let mut m = vec![false; width * height];
    for y in margin..height.saturating_sub(margin) {
        for x in margin..width.saturating_sub(margin) {
            m[y * width + x] = true;
        }
    }
    m
}
