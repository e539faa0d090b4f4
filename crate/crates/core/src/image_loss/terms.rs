use crate::error::{Error, Result};
use crate::geometry::EulerPose;
use crate::image::{BinaryMask, DepthMap, ImageBuffer};

use super::ssim::ssim_from_planes;
use super::warp::WarpResult;
use super::PixelMap;

const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionLoss {
    /// Per-pixel loss, 0 on invalid pixels.
    pub map: PixelMap,
    /// Mean over valid pixels.
    pub mean: f64,
    pub valid: usize,
}

/// `(1−α)·|I − Ĩ|₁ + α·(1 − SSIM)/2` per pixel, channel-averaged.
///
/// Invalid synthesized pixels take the target's value before SSIM windows are
/// formed, so they do not bleed into valid neighbours.
pub fn reconstruction_loss(target: &ImageBuffer, synth: &WarpResult, alpha: f64) -> Result<ReconstructionLoss> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::ConfigError(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if !target.same_shape(&synth.synthesized)
        || synth.validity.width() != target.width()
        || synth.validity.height() != target.height()
    {
        return Err(Error::DimensionMismatch("target and synthesized image differ in shape".into()));
    }
    let (w, h, ch) = (target.width(), target.height(), target.channels());
    let valid = synth.validity.data();
    let t = target.data();
    let mut filled = synth.synthesized.data().to_vec();
    for (i, ok) in valid.iter().enumerate() {
        if !ok {
            filled[i * ch..(i + 1) * ch].copy_from_slice(&t[i * ch..(i + 1) * ch]);
        }
    }
    let ssim = ssim_from_planes(w, h, ch, t, &filled);

    let mut map = vec![0.0; w * h];
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..w * h {
        if !valid[i] {
            continue;
        }
        let l1 = (0..ch).map(|c| (t[i * ch + c] - filled[i * ch + c]).abs()).sum::<f64>() / ch as f64;
        let v = (1.0 - alpha) * l1 + alpha * (1.0 - ssim.data()[i]) / 2.0;
        map[i] = v;
        sum += v;
        count += 1;
    }
    if count == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(ReconstructionLoss { map: PixelMap::from_raw(w, h, map), mean: sum / count as f64, valid: count })
}

/// Edge-aware smoothness: `|∂D|·exp(−|∂I|)` with forward differences.
///
/// Each direction is averaged over the positions where its forward difference
/// exists ((W−1)·H for x, W·(H−1) for y); the two means are summed. Image
/// gradients are averaged over channels.
pub fn smoothness_loss(depth: &DepthMap, image: &ImageBuffer) -> Result<f64> {
    let (w, h) = (depth.width(), depth.height());
    if image.width() != w || image.height() != h {
        return Err(Error::DimensionMismatch(format!("depth {}x{} vs image {}x{}", w, h, image.width(), image.height())));
    }
    let ch = image.channels();
    let img_grad = |x0: usize, y0: usize, x1: usize, y1: usize| -> f64 {
        (0..ch).map(|c| (image.get(x1, y1, c) - image.get(x0, y0, c)).abs()).sum::<f64>() / ch as f64
    };
    let mut sx = 0.0;
    for y in 0..h {
        for x in 0..w.saturating_sub(1) {
            sx += (depth.get(x + 1, y) - depth.get(x, y)).abs() * (-img_grad(x, y, x + 1, y)).exp();
        }
    }
    let mut sy = 0.0;
    for y in 0..h.saturating_sub(1) {
        for x in 0..w {
            sy += (depth.get(x, y + 1) - depth.get(x, y)).abs() * (-img_grad(x, y, x, y + 1)).exp();
        }
    }
    let nx = (w - 1) * h;
    let ny = w * (h - 1);
    let mx = if nx > 0 { sx / nx as f64 } else { 0.0 };
    let my = if ny > 0 { sy / ny as f64 } else { 0.0 };
    Ok(mx + my)
}

/// Number of pixels a percentile mask keeps: `⌈p·n⌉`, snapping products that
/// are an integer up to rounding noise.
pub fn percentile_keep_count(p_m: f64, n: usize) -> usize {
    let x = p_m * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * (n.max(1) as f64) { r } else { x.ceil() };
    (k as usize).min(n)
}

/// Keeps exactly `⌈p_m·N⌉` lowest-loss pixels; ties go to the smaller row-major index.
pub fn percentile_mask(loss_map: &PixelMap, p_m: f64) -> Result<BinaryMask> {
    let all = BinaryMask::filled(loss_map.width(), loss_map.height(), true);
    percentile_mask_within(loss_map, &all, p_m)
}

/// [`percentile_mask`] restricted to the pixels set in `candidates`.
pub fn percentile_mask_within(loss_map: &PixelMap, candidates: &BinaryMask, p_m: f64) -> Result<BinaryMask> {
    if !(p_m > 0.0 && p_m <= 1.0) {
        return Err(Error::ConfigError(format!("mask percentile must lie in (0, 1], got {p_m}")));
    }
    if loss_map.data().is_empty() {
        return Err(Error::InvalidValue("loss map is empty".into()));
    }
    if candidates.width() != loss_map.width() || candidates.height() != loss_map.height() {
        return Err(Error::DimensionMismatch("mask and loss map differ in size".into()));
    }
    let values = loss_map.data();
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| candidates.data()[i]).collect();
    let keep = percentile_keep_count(p_m, idx.len());
    let mut mask = BinaryMask::filled(loss_map.width(), loss_map.height(), false);
    if keep == idx.len() {
        idx.iter().for_each(|&i| mask.data_mut()[i] = true);
        return Ok(mask);
    }
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    for &i in &idx[..keep] {
        mask.data_mut()[i] = true;
    }
    Ok(mask)
}

/// `w_r·‖r̂ − r̄‖₂ + w_t·‖t̂ − t̄‖₂` with unit-length translations.
pub fn pose_prior_loss(est: &EulerPose, weak: &EulerPose, w_r: f64, w_t: f64) -> Result<f64> {
    for p in [est, weak] {
        let norm = p.t.norm();
        if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
            return Err(Error::UnnormalizedTranslation { norm });
        }
    }
    Ok(w_r * (est.r - weak.r).norm() + w_t * (est.t - weak.t).norm())
}
