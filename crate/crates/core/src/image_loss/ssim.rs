use crate::error::{Error, Result};
use crate::image::ImageBuffer;

use super::PixelMap;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Per-pixel SSIM over 3×3 uniform windows, averaged across channels.
///
/// Borders are handled by mirror reflection (pixel −1 reads pixel 1).
pub fn ssim_map(a: &ImageBuffer, b: &ImageBuffer) -> Result<PixelMap> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "ssim inputs {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(ssim_from_planes(a.width(), a.height(), a.channels(), a.data(), b.data()))
}

pub(crate) fn ssim_from_planes(w: usize, h: usize, ch: usize, a: &[f64], b: &[f64]) -> PixelMap {
    let mut out = vec![0.0; w * h];
    let xs: Vec<[usize; 3]> = (0..w).map(|x| [reflect(x as isize - 1, w), x, reflect(x as isize + 1, w)]).collect();
    let ys: Vec<[usize; 3]> = (0..h).map(|y| [reflect(y as isize - 1, h), y, reflect(y as isize + 1, h)]).collect();
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for c in 0..ch {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for &yy in &ys[y] {
                    for &xx in &xs[x] {
                        let i = (yy * w + xx) * ch + c;
                        let (va, vb) = (a[i], b[i]);
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                }
                acc += ssim_from_moments(sa / 9.0, sb / 9.0, saa / 9.0, sbb / 9.0, sab / 9.0);
            }
            out[y * w + x] = acc / ch as f64;
        }
    }
    PixelMap::from_raw(w, h, out)
}

#[inline]
fn ssim_from_moments(mu_a: f64, mu_b: f64, e_aa: f64, e_bb: f64, e_ab: f64) -> f64 {
    let var_a = e_aa - mu_a * mu_a;
    let var_b = e_bb - mu_b * mu_b;
    let cov = e_ab - mu_a * mu_b;
    let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2);
    (num / den).clamp(-1.0, 1.0)
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let r = if i < 0 {
        -i
    } else if i >= n {
        2 * (n - 1) - i
    } else {
        i
    };
    r.clamp(0, n - 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_image(rng: &mut impl Rng, w: usize, h: usize, ch: usize) -> ImageBuffer {
        ImageBuffer::new(w, h, ch, (0..w * h * ch).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn self_similarity_is_one() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let img = random_image(&mut rng, 8, 6, 3);
        let s = ssim_map(&img, &img).unwrap();
        assert!(s.data().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn constant_zero_versus_one() {
        let a = ImageBuffer::filled(5, 5, 1, 0.0).unwrap();
        let b = ImageBuffer::filled(5, 5, 1, 1.0).unwrap();
        let s = ssim_map(&a, &b).unwrap();
        // closed form for constants: C1 / (1 + C1)
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        for v in s.data() {
            assert!((v - expected).abs() < 1e-15);
            assert!(*v < 0.01);
        }
    }

    #[test]
    fn range_and_symmetry() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(6);
        for _ in 0..20 {
            let a = random_image(&mut rng, 7, 9, 1);
            let b = random_image(&mut rng, 7, 9, 1);
            let ab = ssim_map(&a, &b).unwrap();
            let ba = ssim_map(&b, &a).unwrap();
            for (x, y) in ab.data().iter().zip(ba.data()) {
                assert!((-1.0..=1.0).contains(x));
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let a = ImageBuffer::filled(5, 5, 1, 0.0).unwrap();
        let b = ImageBuffer::filled(5, 4, 1, 0.0).unwrap();
        assert!(matches!(ssim_map(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(-1, 1), 0);
        assert_eq!(reflect(1, 1), 0);
    }
}
