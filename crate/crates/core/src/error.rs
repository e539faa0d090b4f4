use std::io;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants carry the names used on the command line, see [`Error::name`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation is at gimbal lock (pitch {pitch} rad); Euler angles are ambiguous")]
    GimbalLock { pitch: f64 },
    #[error("point lands behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("translation norm {norm} is too small to define epipolar geometry")]
    DegenerateTranslation { norm: f64 },
    #[error("point is the epipole; epipolar line is undefined")]
    DegenerateLine,
    #[error("match set is empty")]
    EmptyMatchSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no valid pixels remain after warping")]
    NoValidPixels,
    #[error("translation is not unit length (norm {norm})")]
    UnnormalizedTranslation { norm: f64 },
    #[error("configuration error: {0}")]
    ConfigError(String),
    #[error("points are degenerate (all coincide)")]
    DegeneratePoints,
    #[error("need at least {needed} matches, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("degenerate match configuration (design matrix rank < 8)")]
    DegenerateConfiguration,
    #[error("no consensus: best model has {best} inliers, {required} required")]
    NoConsensus { best: usize, required: usize },
    #[error("objective is not finite at the probed parameters")]
    NonFiniteObjective,
    #[error("no valid ground-truth pixels")]
    NoValidGroundTruth,
    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),
    #[error("snippet windows do not match: {0}")]
    WindowMismatch(String),
    #[error("no motion estimate covers the transition {from} -> {to}")]
    CoverageGap { from: usize, to: usize },
    #[error("ray through pixel ({u}, {v}) misses every plane")]
    RayMiss { u: f64, v: f64 },
    #[error("only {got} of {needed} projections landed inside the other view")]
    InsufficientOverlap { needed: usize, got: usize },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: rotation drift {drift:e} exceeds tolerance")]
    InvalidRotation { line: usize, drift: f64 },
    #[error("bad header: {0}")]
    HeaderMismatch(String),
    #[error("header announces {expected} entries, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("depth value {value} at index {index} is not positive")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("unsupported image magic {0:?}")]
    UnsupportedMagic(String),
    #[error("unsupported maxval {0} (only 255)")]
    MaxvalUnsupported(u32),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable variant name, printed by the command-line tool.
    pub fn name(&self) -> &'static str {
        match self {
            Error::GimbalLock { .. } => "GimbalLock",
            Error::BehindCamera { .. } => "BehindCamera",
            Error::DegenerateTranslation { .. } => "DegenerateTranslation",
            Error::DegenerateLine => "DegenerateLine",
            Error::EmptyMatchSet => "EmptyMatchSet",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NoValidPixels => "NoValidPixels",
            Error::UnnormalizedTranslation { .. } => "UnnormalizedTranslation",
            Error::ConfigError(_) => "ConfigError",
            Error::DegeneratePoints => "DegeneratePoints",
            Error::InsufficientMatches { .. } => "InsufficientMatches",
            Error::DegenerateConfiguration => "DegenerateConfiguration",
            Error::NoConsensus { .. } => "NoConsensus",
            Error::NonFiniteObjective => "NonFiniteObjective",
            Error::NoValidGroundTruth => "NoValidGroundTruth",
            Error::DegenerateTrajectory(_) => "DegenerateTrajectory",
            Error::WindowMismatch(_) => "WindowMismatch",
            Error::CoverageGap { .. } => "CoverageGap",
            Error::RayMiss { .. } => "RayMiss",
            Error::InsufficientOverlap { .. } => "InsufficientOverlap",
            Error::MalformedLine { .. } => "MalformedLine",
            Error::InvalidRotation { .. } => "InvalidRotation",
            Error::HeaderMismatch(_) => "HeaderMismatch",
            Error::CountMismatch { .. } => "CountMismatch",
            Error::TruncatedPayload { .. } => "TruncatedPayload",
            Error::NonPositiveValue { .. } => "NonPositiveValue",
            Error::UnsupportedMagic(_) => "UnsupportedMagic",
            Error::MaxvalUnsupported(_) => "MaxvalUnsupported",
            Error::InvalidValue(_) => "InvalidValue",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
