//! Seeded additive white Gaussian noise.
//!
//! Every draw is a pure function of `(seed, frame, channel, row, col)`: the
//! coordinates are folded through the SplitMix64 finalizer to produce two
//! independent 53-bit uniforms, which a Box-Muller transform turns into one
//! standard normal. Results do not depend on iteration order or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video_io::{Frame, Sequence};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation on the [0, 255] sample scale.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidNoise(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state ^ mix64(word.wrapping_add(GOLDEN)))
}

/// Counter-based standard normal draw for one coordinate.
#[derive(Debug, Clone, Copy)]
pub struct GaussianField {
    key: u64,
}

impl GaussianField {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed.wrapping_add(GOLDEN)),
        }
    }

    #[inline]
    fn row_key(&self, t: u64, c: u64, y: u64) -> u64 {
        absorb(absorb(absorb(self.key, t), c), y)
    }

    #[inline]
    fn draw_in_row(row_key: u64, x: u64) -> f64 {
        let base = absorb(row_key, x);
        let h1 = mix64(base ^ 0x1);
        let h2 = mix64(base ^ 0x2);
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((h1 >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (h2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// N(0, 1) sample at `(t, c, y, x)`.
    #[inline]
    pub fn sample(&self, t: u64, c: u64, y: u64, x: u64) -> f64 {
        Self::draw_in_row(self.row_key(t, c, y), x)
    }

    /// Standard normal samples for a whole frame-shaped block, channel-major.
    pub fn fill(&self, t: u64, channels: usize, height: usize, width: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                let rk = self.row_key(t, c as u64, y as u64);
                out.extend((0..width).map(|x| Self::draw_in_row(rk, x as u64)));
            }
        }
        out
    }
}

fn noisy_frame(field: &GaussianField, frame: &Frame, t: usize, sigma: f64) -> Result<Frame> {
    let noise = field.fill(t as u64, frame.channels(), frame.height(), frame.width());
    Frame::new(
        frame.width(),
        frame.height(),
        frame.layout(),
        frame
            .samples()
            .iter()
            .zip(noise)
            .map(|(&s, n)| s + sigma * n)
            .collect(),
    )
}

/// Adds independent N(0, sigma^2) noise to every sample. No clamping.
pub fn add_awgn(seq: &Sequence, spec: &NoiseSpec) -> Result<Sequence> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidNoise(format!(
            "sigma must be finite and >= 0, got {}",
            spec.sigma
        )));
    }
    if spec.sigma == 0.0 {
        return Ok(seq.clone());
    }
    let field = GaussianField::new(spec.seed);
    let frames = seq
        .frames()
        .par_iter()
        .enumerate()
        .map(|(t, f)| noisy_frame(&field, f, t, spec.sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence::new(frames, seq.frame_rate())?.with_params(seq.params().clone()))
}

/// PSNR of an AWGN-corrupted signal against its clean source: `20 log10(255 / sigma)`.
pub fn expected_noisy_psnr(sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::NonPositiveSigma(sigma));
    }
    Ok(20.0 * (255.0 / sigma).log10())
}
