//! View synthesis and the photometric, smoothness, geometric and pose-prior
//! loss terms, plus their weighted combination.

mod ssim;
mod terms;
mod total;
mod warp;

pub use ssim::{ssim_map, SSIM_C1, SSIM_C2};
pub use terms::{
    percentile_keep_count, percentile_mask, percentile_mask_within, pose_prior_loss, reconstruction_loss, smoothness_loss,
    ReconstructionLoss,
};
pub use total::{total_loss, LossBreakdown, SourceFrame, View};
pub use warp::{bilinear_sample, inverse_warp, Sample, WarpResult};

use crate::error::{Error, Result};

/// A real-valued per-pixel map (loss or SSIM), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl PixelMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!("expected {} values, got {}", width * height, data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// How the per-match epipolar distances of one frame pair are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeoReduction {
    /// Plain sum over matches.
    #[default]
    Sum,
    /// Sum divided by the number of contributing matches.
    Mean,
}

/// Weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Balance between SSIM and L1 in the reconstruction term.
    pub alpha: f64,
    pub w_s: f64,
    pub w_g: f64,
    pub w_p: f64,
    pub w_r: f64,
    pub w_t: f64,
    /// Fraction of lowest-loss pixels kept by the percentile mask.
    pub p_m: f64,
    pub geo_reduction: GeoReduction,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::pairwise_matching()
    }
}

impl LossWeights {
    /// Photometric + smoothness only.
    pub fn baseline() -> Self {
        Self { alpha: 0.85, w_s: 0.1, w_g: 0.0, w_p: 0.0, w_r: 1.0, w_t: 1.0, p_m: 0.99, geo_reduction: GeoReduction::Sum }
    }

    /// Epipolar match supervision: `w_g = 0.001`, `w_p = 0`.
    pub fn pairwise_matching() -> Self {
        Self { w_g: 0.001, ..Self::baseline() }
    }

    /// Weak-pose prior: `w_g = 0`, `w_p = 0.1`.
    pub fn prior_weak_pose() -> Self {
        Self { w_p: 0.1, ..Self::baseline() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::ConfigError(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.p_m > 0.0 && self.p_m <= 1.0) {
            return Err(Error::ConfigError(format!("p_m must lie in (0, 1], got {}", self.p_m)));
        }
        for (name, v) in [("w_s", self.w_s), ("w_g", self.w_g), ("w_p", self.w_p), ("w_r", self.w_r), ("w_t", self.w_t)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::ConfigError(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}
