use crate::error::{Error, Result};
use crate::geometry::{fundamental_from_pose, geometric_loss, CameraIntrinsics, EulerPose, RigidMotion};
use crate::image::{DepthMap, ImageBuffer};
use crate::matching::MatchSet;

use super::terms::{percentile_mask_within, pose_prior_loss, reconstruction_loss, smoothness_loss};
use super::warp::inverse_warp;
use super::{GeoReduction, LossWeights};

/// An image together with the intrinsics it was captured with.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub image: ImageBuffer,
    pub intrinsics: CameraIntrinsics,
}

impl View {
    pub fn new(image: ImageBuffer, intrinsics: CameraIntrinsics) -> Self {
        Self { image, intrinsics }
    }
}

/// One source frame of a snippet and the supervision attached to it.
#[derive(Debug, Clone)]
pub struct SourceFrame<'a> {
    pub view: &'a View,
    /// Maps target camera coordinates into this source camera.
    pub motion: RigidMotion,
    /// Matches with `p` in this source image and `q` in the target image.
    pub matches: Option<&'a MatchSet>,
    /// Weak relative pose for the prior term.
    pub weak_pose: Option<EulerPose>,
}

/// Unweighted terms and the weighted total.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean over sources of the masked reconstruction loss.
    pub photometric: f64,
    pub per_source_photometric: Vec<f64>,
    pub smoothness: f64,
    /// Summed over sources; present when `w_g > 0`.
    pub geometric: Option<f64>,
    /// Summed over sources; present when `w_p > 0`.
    pub pose_prior: Option<f64>,
}

/// Masked reconstruction + `w_s`·smoothness + `w_g`·geometric + `w_p`·pose prior.
pub fn total_loss(target: &View, depth: &DepthMap, sources: &[SourceFrame<'_>], w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    if sources.is_empty() {
        return Err(Error::ConfigError("at least one source frame is required".into()));
    }
    if depth.width() != target.image.width() || depth.height() != target.image.height() {
        return Err(Error::DimensionMismatch(format!(
            "depth {}x{} vs target {}x{}",
            depth.width(),
            depth.height(),
            target.image.width(),
            target.image.height()
        )));
    }
    if w.w_g > 0.0 && sources.iter().any(|s| s.matches.is_none()) {
        return Err(Error::ConfigError("w_g > 0 requires a match set for every source".into()));
    }
    if w.w_p > 0.0 && sources.iter().any(|s| s.weak_pose.is_none()) {
        return Err(Error::ConfigError("w_p > 0 requires a weak pose for every source".into()));
    }

    let mut per_source = Vec::with_capacity(sources.len());
    for s in sources {
        if s.view.image.channels() != target.image.channels() {
            return Err(Error::DimensionMismatch("source and target channel counts differ".into()));
        }
        let warp = inverse_warp(&s.view.image, depth, &s.motion, &s.view.intrinsics, &target.intrinsics)?;
        let rec = reconstruction_loss(&target.image, &warp, w.alpha)?;
        let mask = percentile_mask_within(&rec.map, &warp.validity, w.p_m)?;
        let (sum, n) = rec
            .map
            .data()
            .iter()
            .zip(mask.data())
            .filter(|(_, keep)| **keep)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        if n == 0 {
            return Err(Error::NoValidPixels);
        }
        per_source.push(sum / n as f64);
    }
    let photometric = per_source.iter().sum::<f64>() / per_source.len() as f64;
    let smoothness = smoothness_loss(depth, &target.image)?;

    let geometric = if w.w_g > 0.0 {
        let mut acc = 0.0;
        for s in sources {
            let f = fundamental_from_pose(&s.view.intrinsics, &target.intrinsics, &s.motion)?;
            let g = geometric_loss(&f, s.matches.expect("checked above"))?;
            acc += match w.geo_reduction {
                GeoReduction::Sum => g.sum,
                GeoReduction::Mean => g.mean(),
            };
        }
        Some(acc)
    } else {
        None
    };

    let pose_prior = if w.w_p > 0.0 {
        let mut acc = 0.0;
        for s in sources {
            let est = EulerPose::from_motion(&s.motion)?.normalized()?;
            let weak = s.weak_pose.expect("checked above").normalized()?;
            acc += pose_prior_loss(&est, &weak, w.w_r, w.w_t)?;
        }
        Some(acc)
    } else {
        None
    };

    let total = photometric + w.w_s * smoothness + geometric.map_or(0.0, |g| w.w_g * g) + pose_prior.map_or(0.0, |p| w.w_p * p);
    Ok(LossBreakdown { total, photometric, per_source_photometric: per_source, smoothness, geometric, pose_prior })
}
