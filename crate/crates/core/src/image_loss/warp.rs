use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{project_pixel, CameraIntrinsics, RigidMotion};
use crate::image::{BinaryMask, DepthMap, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub in_bounds: bool,
}

/// Bilinear interpolation of channel `channel` at `(x, y)`.
///
/// Out-of-bounds means some neighbour with nonzero weight falls outside
/// `[0, W−1] × [0, H−1]`; the value is then 0.
pub fn bilinear_sample(src: &ImageBuffer, x: f64, y: f64, channel: usize) -> Sample {
    let mut out = [0.0; 3];
    let in_bounds = sample_into(src, x, y, &mut out[..src.channels()]);
    Sample { value: if in_bounds { out[channel] } else { 0.0 }, in_bounds }
}

/// Samples every channel into `out`; returns false (and leaves `out` zeroed)
/// when out of bounds.
pub(crate) fn sample_into(src: &ImageBuffer, x: f64, y: f64, out: &mut [f64]) -> bool {
    out.iter_mut().for_each(|v| *v = 0.0);
    let (w, h) = (src.width(), src.height());
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64) {
        return false;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    // frac is 0 on the last row/column, so clamping never changes the value
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let w00 = (1.0 - fx) * (1.0 - fy);
    let w10 = fx * (1.0 - fy);
    let w01 = (1.0 - fx) * fy;
    let w11 = fx * fy;
    for (c, o) in out.iter_mut().enumerate() {
        *o = w00 * src.get(x0, y0, c) + w10 * src.get(x1, y0, c) + w01 * src.get(x0, y1, c) + w11 * src.get(x1, y1, c);
    }
    true
}

/// Target view synthesized from a source image.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub synthesized: ImageBuffer,
    pub validity: BinaryMask,
}

impl WarpResult {
    pub fn valid_count(&self) -> usize {
        self.validity.count_ones()
    }
}

/// Synthesizes the target view by projecting each target pixel with its depth
/// through `motion` (target → source) and sampling the source bilinearly.
pub fn inverse_warp(
    src: &ImageBuffer,
    target_depth: &DepthMap,
    motion: &RigidMotion,
    k_src: &CameraIntrinsics,
    k_tgt: &CameraIntrinsics,
) -> Result<WarpResult> {
    let (w, h, ch) = (target_depth.width(), target_depth.height(), src.channels());
    let mut synthesized = ImageBuffer::zeros(w, h, ch);
    let mut validity = BinaryMask::filled(w, h, false);
    let mut buf = [0.0; 3];
    {
        let data = synthesized.data_mut();
        let valid = validity.data_mut();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let d = target_depth.get(x, y);
                if !(d > 0.0) {
                    continue;
                }
                let p = Vector3::new(x as f64, y as f64, 1.0);
                let proj = match project_pixel(&p, d, k_tgt, k_src, motion) {
                    Ok(proj) => proj,
                    Err(Error::BehindCamera { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let out = &mut buf[..ch];
                if sample_into(src, proj.pixel.x, proj.pixel.y, out) {
                    data[i * ch..(i + 1) * ch].copy_from_slice(out);
                    valid[i] = true;
                }
            }
        }
    }
    Ok(WarpResult { synthesized, validity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_sample_is_exact() {
        let img = ImageBuffer::from_fn(4, 3, |x, y| (x + 4 * y) as f64 / 11.0).unwrap();
        for y in 0..3 {
            for x in 0..4 {
                let s = bilinear_sample(&img, x as f64, y as f64, 0);
                assert!(s.in_bounds);
                assert_eq!(s.value, img.get(x, y, 0));
            }
        }
    }

    #[test]
    fn midpoint_and_constant() {
        let img = ImageBuffer::new(2, 2, 1, vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&img, 0.5, 0.5, 0).value, 0.5);
        let c = ImageBuffer::filled(5, 4, 3, 0.3).unwrap();
        for (x, y) in [(0.2, 0.7), (3.9, 2.1), (4.0, 3.0), (1.5, 0.0)] {
            let s = bilinear_sample(&c, x, y, 2);
            assert!(s.in_bounds);
            assert!((s.value - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_bounds_is_flagged() {
        let img = ImageBuffer::filled(3, 3, 1, 0.5).unwrap();
        for (x, y) in [(-0.01, 1.0), (2.01, 1.0), (1.0, 2.5), (f64::NAN, 0.0)] {
            let s = bilinear_sample(&img, x, y, 0);
            assert!(!s.in_bounds);
            assert_eq!(s.value, 0.0);
        }
    }

    #[test]
    fn identity_warp_reproduces_source() {
        let img = ImageBuffer::from_fn(9, 7, |x, y| ((x * 7 + y * 3) % 10) as f64 / 10.0).unwrap();
        let depth = DepthMap::filled(9, 7, 4.0).unwrap();
        let k = CameraIntrinsics::new(10.0, 10.0, 4.0, 3.0).unwrap();
        let out = inverse_warp(&img, &depth, &RigidMotion::identity(), &k, &k).unwrap();
        assert_eq!(out.valid_count(), 63);
        for (a, b) in out.synthesized.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn everything_behind_camera_is_invalid() {
        let img = ImageBuffer::filled(6, 5, 1, 0.5).unwrap();
        let depth = DepthMap::filled(6, 5, 2.0).unwrap();
        let k = CameraIntrinsics::new(10.0, 10.0, 3.0, 2.0).unwrap();
        let motion = RigidMotion::from_translation(Vector3::new(0.0, 0.0, -5.0));
        let out = inverse_warp(&img, &depth, &motion, &k, &k).unwrap();
        assert_eq!(out.valid_count(), 0);
        assert!(out.synthesized.data().iter().all(|v| *v == 0.0));
    }
}
