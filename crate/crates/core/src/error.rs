use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed Y4M header: {0}")]
    MalformedHeader(String),
    #[error("unsupported colorspace `{0}` (only C444 and Cmono are accepted)")]
    UnsupportedColorspace(String),
    #[error("truncated frame {frame}: expected {expected} bytes, found {found}")]
    TruncatedFrame {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("frames in a sequence or stack must share width, height and channels")]
    HeterogeneousFrames,
    #[error("format mismatch: {0}")]
    FormatMismatch(String),

    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("scene footprint {needed_w}x{needed_h} exceeds texture {have_w}x{have_h}")]
    FootprintExceedsTexture {
        needed_w: usize,
        needed_h: usize,
        have_w: usize,
        have_h: usize,
    },

    #[error("invalid denoiser parameters: {0}")]
    InvalidParams(String),
    #[error("bad stack shape: {inputs} input frames for {outputs} outputs")]
    BadStackShape { inputs: usize, outputs: usize },

    #[error("invalid scheduler config: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("recurrence policy unavailable: {0}")]
    PolicyUnavailable(String),

    #[error("image too small: {width}x{height}, need at least {min} pixels per side")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("no valid pixels under the mask")]
    EmptyMask,
    #[error("empty series: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}
