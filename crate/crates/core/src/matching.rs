//! Pairwise match verification: Hartley normalization, the normalized
//! eight-point algorithm, RANSAC and seeded subsampling.

use nalgebra::{DMatrix, Matrix3, Vector2};
use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{epipolar_line, point_line_distance, FundamentalMatrix};
use crate::rng::seeded;

/// A correspondence: `p` in image 1, `q` in image 2 (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub p: Vector2<f64>,
    pub q: Vector2<f64>,
}

impl Match {
    pub fn new(p: Vector2<f64>, q: Vector2<f64>) -> Self {
        Self { p, q }
    }
}

/// Ordered matches plus the sizes (width, height) of both images.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    matches: Vec<Match>,
    pub size1: (usize, usize),
    pub size2: (usize, usize),
}

impl MatchSet {
    pub fn new(matches: Vec<Match>, size1: (usize, usize), size2: (usize, usize)) -> Self {
        Self { matches, size1, size2 }
    }

    pub fn matches(&self) -> &[Match] {
        &self.matches
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Match> {
        self.matches.iter()
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Same images, matches picked by `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> MatchSet {
        MatchSet { matches: indices.iter().map(|&i| self.matches[i]).collect(), size1: self.size1, size2: self.size2 }
    }

    /// Swaps the roles of the two images.
    pub fn swapped(&self) -> MatchSet {
        MatchSet { matches: self.matches.iter().map(|m| Match::new(m.q, m.p)).collect(), size1: self.size2, size2: self.size1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    /// Symmetric epipolar distance threshold, pixels.
    pub threshold: f64,
    pub seed: u64,
    pub min_inliers: usize,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { iterations: 2000, threshold: 1.0, seed: 0, min_inliers: 15 }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::ConfigError("RANSAC needs at least one iteration".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::ConfigError(format!("RANSAC threshold must be positive, got {}", self.threshold)));
        }
        Ok(())
    }
}

/// Similarity-normalized points and the transform `T` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPoints {
    pub points: Vec<Vector2<f64>>,
    pub transform: Matrix3<f64>,
}

/// Translates the centroid to the origin and scales the mean distance to √2.
pub fn hartley_normalize(points: &[Vector2<f64>]) -> Result<NormalizedPoints> {
    if points.is_empty() {
        return Err(Error::DegeneratePoints);
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    let extent = points.iter().map(|p| p.amax()).fold(0.0, f64::max).max(1.0);
    if !(mean_dist > 1e-12 * extent) {
        return Err(Error::DegeneratePoints);
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let transform = Matrix3::new(s, 0.0, -s * centroid.x, 0.0, s, -s * centroid.y, 0.0, 0.0, 1.0);
    let points = points.iter().map(|p| (p - centroid) * s).collect();
    Ok(NormalizedPoints { points, transform })
}

/// Normalized eight-point estimate of `F` from at least eight matches.
pub fn eight_point(matches: &MatchSet) -> Result<FundamentalMatrix> {
    eight_point_from(matches.matches())
}

fn eight_point_from(matches: &[Match]) -> Result<FundamentalMatrix> {
    if matches.len() < 8 {
        return Err(Error::InsufficientMatches { needed: 8, got: matches.len() });
    }
    let ps: Vec<_> = matches.iter().map(|m| m.p).collect();
    let qs: Vec<_> = matches.iter().map(|m| m.q).collect();
    let np = hartley_normalize(&ps).map_err(|_| Error::DegenerateConfiguration)?;
    let nq = hartley_normalize(&qs).map_err(|_| Error::DegenerateConfiguration)?;

    // zero-padded to 9 rows so the thin SVD still yields the full right basis
    let rows = matches.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in np.points.iter().zip(&nq.points).enumerate() {
        let row = [q.x * p.x, q.x * p.y, q.x, q.y * p.x, q.y * p.y, q.y, p.x, p.y, 1.0];
        for (j, v) in row.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    let svd = a.svd(false, true);
    let sv = &svd.singular_values;
    if !(sv[7] > 1e-10 * sv[0]) {
        return Err(Error::DegenerateConfiguration);
    }
    let v_t = svd.v_t.as_ref().expect("requested V");
    let f = v_t.row(8);
    let fn_ = Matrix3::new(f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8]);

    let inner = fn_.svd(true, true);
    let mut s = inner.singular_values;
    s[2] = 0.0;
    let rank2 = inner.u.expect("requested U") * Matrix3::from_diagonal(&s) * inner.v_t.expect("requested V");
    FundamentalMatrix::from_matrix(nq.transform.transpose() * rank2 * np.transform)
}

/// Mean of the point-to-epipolar-line distances in both images; infinite when
/// either point is an epipole.
pub fn symmetric_epipolar_distance(f: &FundamentalMatrix, m: &Match) -> f64 {
    let ft = f.transpose();
    let d2 = epipolar_line(f, &m.p.push(1.0)).map(|l| point_line_distance(&l, &m.q));
    let d1 = epipolar_line(&ft, &m.q.push(1.0)).map(|l| point_line_distance(&l, &m.p));
    match (d1, d2) {
        (Ok(a), Ok(b)) => 0.5 * (a + b),
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub fundamental: FundamentalMatrix,
    pub inliers: MatchSet,
    /// Positions of the inliers in the input set.
    pub inlier_indices: Vec<usize>,
    /// Iteration that produced the winning minimal sample.
    pub best_iteration: usize,
}

/// RANSAC over minimal eight-point samples.
///
/// All samples are drawn up front from one seeded stream; hypotheses are scored
/// in parallel and the winner is the largest inlier count, ties going to the
/// lower iteration index. The returned `F` is re-estimated on all inliers and
/// the inlier set is recomputed against it.
pub fn ransac_fundamental(matches: &MatchSet, params: &RansacParams) -> Result<RansacResult> {
    params.validate()?;
    let n = matches.len();
    if n < 8 {
        return Err(Error::InsufficientMatches { needed: 8, got: n });
    }
    let mut rng = seeded(params.seed);
    let samples: Vec<Vec<usize>> = (0..params.iterations).map(|_| index::sample(&mut rng, n, 8).into_vec()).collect();
    let data = matches.matches();

    let best = samples
        .par_iter()
        .enumerate()
        .map(|(it, idx)| {
            let sample: Vec<Match> = idx.iter().map(|&i| data[i]).collect();
            let count = match eight_point_from(&sample) {
                Ok(f) => data.iter().filter(|m| symmetric_epipolar_distance(&f, m) <= params.threshold).count(),
                Err(_) => 0,
            };
            (count, it)
        })
        .reduce(|| (0, usize::MAX), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });

    let (best_count, best_iteration) = best;
    if best_count < params.min_inliers.max(8) {
        return Err(Error::NoConsensus { best: best_count, required: params.min_inliers.max(8) });
    }
    let sample: Vec<Match> = samples[best_iteration].iter().map(|&i| data[i]).collect();
    let model = eight_point_from(&sample)?;
    let inlier_idx = inlier_indices(&model, data, params.threshold);
    let inliers: Vec<Match> = inlier_idx.iter().map(|&i| data[i]).collect();
    let refined = eight_point_from(&inliers)?;
    let final_idx = inlier_indices(&refined, data, params.threshold);
    if final_idx.len() < params.min_inliers.max(8) {
        return Err(Error::NoConsensus { best: final_idx.len(), required: params.min_inliers.max(8) });
    }
    Ok(RansacResult { fundamental: refined, inliers: matches.select(&final_idx), inlier_indices: final_idx, best_iteration })
}

fn inlier_indices(f: &FundamentalMatrix, data: &[Match], threshold: f64) -> Vec<usize> {
    (0..data.len()).filter(|&i| symmetric_epipolar_distance(f, &data[i]) <= threshold).collect()
}

/// Draws `n` distinct matches without replacement; the result keeps input order.
pub fn sample_matches(inliers: &MatchSet, n: usize, seed: u64) -> MatchSet {
    if inliers.len() <= n {
        return inliers.clone();
    }
    let mut rng = seeded(seed);
    let mut idx = index::sample(&mut rng, inliers.len(), n).into_vec();
    idx.sort_unstable();
    inliers.select(&idx)
}

/// Indices chosen by [`sample_matches`] for a set of `len` matches.
pub fn sample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if len <= n {
        return (0..len).collect();
    }
    let mut rng = seeded(seed);
    let mut idx = index::sample(&mut rng, len, n).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_angle, fundamental_from_pose, project_pixel, CameraIntrinsics, RigidMotion};
    use nalgebra::Vector3;
    use rand::Rng;

    /// Random 3D points in front of both cameras, matched exactly.
    fn scene_matches(n: usize, seed: u64) -> (MatchSet, FundamentalMatrix) {
        let mut rng = seeded(seed);
        let k = CameraIntrinsics::new(300.0, 310.0, 160.0, 120.0).unwrap();
        let motion = RigidMotion::new(axis_angle(&Vector3::new(0.2, 1.0, 0.1), 0.05), Vector3::new(0.4, 0.05, -0.3)).unwrap();
        let f = fundamental_from_pose(&k, &k, &motion).unwrap();
        let mut out = Vec::new();
        while out.len() < n {
            let q = Vector3::new(rng.random_range(0.0..320.0), rng.random_range(0.0..240.0), 1.0);
            let pr = project_pixel(&q, rng.random_range(3.0..20.0), &k, &k, &motion).unwrap();
            out.push(Match::new(pr.pixel, q.xy()));
        }
        (MatchSet::new(out, (320, 240), (320, 240)), f)
    }

    #[test]
    fn normalization_postconditions() {
        let mut rng = seeded(4);
        for _ in 0..20 {
            let pts: Vec<_> =
                (0..30).map(|_| Vector2::new(rng.random_range(-50.0..900.0), rng.random_range(0.0..500.0))).collect();
            let np = hartley_normalize(&pts).unwrap();
            let c = np.points.iter().fold(Vector2::zeros(), |a, p| a + p) / 30.0;
            let md = np.points.iter().map(|p| p.norm()).sum::<f64>() / 30.0;
            assert!(c.norm() <= 1e-12);
            assert!((md - std::f64::consts::SQRT_2).abs() <= 1e-12);
            let inv = np.transform.try_inverse().unwrap();
            for (orig, n) in pts.iter().zip(&np.points) {
                let back = inv * n.push(1.0);
                assert!((back.xy() - orig).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn normalization_of_already_normal_points() {
        let pts = vec![Vector2::new(1.0, 1.0), Vector2::new(-1.0, -1.0), Vector2::new(1.0, -1.0), Vector2::new(-1.0, 1.0)];
        let np = hartley_normalize(&pts).unwrap();
        assert!((np.transform - Matrix3::identity()).amax() < 1e-15);
        let same = vec![Vector2::new(3.0, 3.0); 5];
        assert!(matches!(hartley_normalize(&same), Err(Error::DegeneratePoints)));
    }

    #[test]
    fn eight_point_recovers_noiseless_f() {
        for seed in 0..10 {
            let (set, truth) = scene_matches(20, seed);
            let f = eight_point(&set).unwrap();
            assert!(f.distance(&truth) <= 1e-6, "seed {seed}: {}", f.distance(&truth));
            let (set8, truth8) = scene_matches(8, seed + 100);
            assert!(eight_point(&set8).unwrap().distance(&truth8) <= 1e-6);
        }
    }

    #[test]
    fn eight_point_errors() {
        let (set, _) = scene_matches(7, 1);
        assert!(matches!(eight_point(&set), Err(Error::InsufficientMatches { needed: 8, got: 7 })));
        let m = Match::new(Vector2::new(3.0, 4.0), Vector2::new(5.0, 6.0));
        let same = MatchSet::new(vec![m; 12], (10, 10), (10, 10));
        assert!(matches!(eight_point(&same), Err(Error::DegenerateConfiguration)));
    }

    #[test]
    fn eight_point_is_similarity_invariant() {
        let (set, _) = scene_matches(30, 9);
        let f = eight_point(&set).unwrap();
        // the same similarity applied to both images
        let s = 1.7;
        let r = nalgebra::Rotation2::new(0.4);
        let t = Vector2::new(-30.0, 12.0);
        let h = Matrix3::new(s * r[(0, 0)], s * r[(0, 1)], t.x, s * r[(1, 0)], s * r[(1, 1)], t.y, 0.0, 0.0, 1.0);
        let moved: Vec<Match> = set.iter().map(|m| Match::new(s * (r * m.p) + t, s * (r * m.q) + t)).collect();
        let g = eight_point(&MatchSet::new(moved, set.size1, set.size2)).unwrap();
        let back = FundamentalMatrix::from_matrix(h.transpose() * g.matrix() * h).unwrap();
        assert!(back.distance(&f) < 1e-9);
    }

    #[test]
    fn ransac_all_inliers_on_clean_data() {
        let (set, truth) = scene_matches(100, 3);
        let r = ransac_fundamental(&set, &RansacParams { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(r.inliers.len(), 100);
        assert!(r.fundamental.distance(&truth) < 1e-6);
    }

    #[test]
    fn ransac_is_deterministic() {
        let (mut set, _) = scene_matches(60, 5);
        let mut rng = seeded(77);
        let mut ms = set.matches().to_vec();
        for m in ms.iter_mut().take(20) {
            m.q = Vector2::new(rng.random_range(0.0..320.0), rng.random_range(0.0..240.0));
        }
        set = MatchSet::new(ms, set.size1, set.size2);
        let params = RansacParams { iterations: 300, seed: 9, ..Default::default() };
        let a = ransac_fundamental(&set, &params).unwrap();
        let b = ransac_fundamental(&set, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ransac_no_consensus_on_noise() {
        let mut rng = seeded(8);
        let ms: Vec<Match> = (0..100)
            .map(|_| {
                Match::new(
                    Vector2::new(rng.random_range(0.0..320.0), rng.random_range(0.0..240.0)),
                    Vector2::new(rng.random_range(0.0..320.0), rng.random_range(0.0..240.0)),
                )
            })
            .collect();
        let set = MatchSet::new(ms, (320, 240), (320, 240));
        let params = RansacParams { min_inliers: 50, seed: 42, ..Default::default() };
        assert!(matches!(ransac_fundamental(&set, &params), Err(Error::NoConsensus { .. })));
        let (few, _) = scene_matches(5, 1);
        assert!(matches!(ransac_fundamental(&few, &params), Err(Error::InsufficientMatches { .. })));
    }

    #[test]
    fn sampling_rules() {
        let (set, _) = scene_matches(40, 2);
        assert_eq!(sample_matches(&set, 40, 1), set);
        assert_eq!(sample_matches(&set, 100, 1), set);
        let a = sample_matches(&set, 10, 5);
        assert_eq!(a, sample_matches(&set, 10, 5));
        assert_eq!(a.len(), 10);
    }

    #[test]
    fn sample_trace_is_frozen() {
        let idx = sample_indices(2000, 100, 42);
        assert_eq!(idx.len(), 100);
        let mut dedup = idx.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 100);
        assert_eq!(&idx[..8], &FROZEN_TRACE[..]);
    }

    // first eight of the 100 indices drawn from 2000 with seed 42
    const FROZEN_TRACE: [usize; 8] = [15, 52, 53, 104, 116, 136, 137, 139];
}
