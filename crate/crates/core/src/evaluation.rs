//! Depth metrics, trajectory alignment, snippet ATE and relative-motion
//! chaining.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{compose, invert, RigidMotion};
use crate::image::DepthMap;

/// Floor applied to predictions before computing metrics.
pub const MIN_DEPTH: f64 = 1e-3;
/// Relative singular-value threshold below which a point set counts as collinear.
const COLLINEAR_EPS: f64 = 1e-12;

/// Camera-to-world poses keyed by strictly increasing frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<usize>,
    poses: Vec<RigidMotion>,
}

impl Trajectory {
    pub fn new(frames: Vec<usize>, poses: Vec<RigidMotion>) -> Result<Self> {
        if frames.len() != poses.len() {
            return Err(Error::InvalidValue(format!("{} frame indices for {} poses", frames.len(), poses.len())));
        }
        if frames.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidValue("frame indices must be strictly increasing".into()));
        }
        Ok(Self { frames, poses })
    }

    /// Frames numbered from zero.
    pub fn from_poses(poses: Vec<RigidMotion>) -> Self {
        Self { frames: (0..poses.len()).collect(), poses }
    }

    pub fn frames(&self) -> &[usize] {
        &self.frames
    }

    pub fn poses(&self) -> &[RigidMotion] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn pose(&self, frame: usize) -> Option<&RigidMotion> {
        self.frames.binary_search(&frame).ok().map(|i| &self.poses[i])
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| p.translation).collect()
    }

    /// Re-expresses every pose relative to the first one.
    pub fn gauge_fixed(&self) -> Self {
        let Some(first) = self.poses.first() else {
            return self.clone();
        };
        let inv = invert(first);
        Self { frames: self.frames.clone(), poses: self.poses.iter().map(|p| compose(&inv, p)).collect() }
    }

    /// Frames present in both trajectories, with their positions.
    fn common_positions(&self, other: &Trajectory) -> (Vec<usize>, Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        let mut frames = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (f, p) in self.frames.iter().zip(&self.poses) {
            if let Some(q) = other.pose(*f) {
                frames.push(*f);
                a.push(p.translation);
                b.push(q.translation);
            }
        }
        (frames, a, b)
    }
}

/// Poses of frames `anchor, anchor + 1, ...` relative to the anchor frame;
/// the first motion is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Snippet {
    pub anchor: usize,
    pub motions: Vec<RigidMotion>,
}

impl Snippet {
    pub fn new(anchor: usize, motions: Vec<RigidMotion>) -> Result<Self> {
        if motions.len() < 2 {
            return Err(Error::InvalidValue(format!("a snippet needs at least 2 frames, got {}", motions.len())));
        }
        Ok(Self { anchor, motions })
    }

    pub fn len(&self) -> usize {
        self.motions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motions.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.motions.iter().map(|m| m.translation).collect()
    }
}

/// How snippet windows are placed along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnippetStride {
    /// A window starts at every frame.
    #[default]
    EveryFrame,
    /// Windows share no frames.
    Disjoint,
}

/// Cuts `n`-frame snippets from consecutive trajectory entries.
pub fn cut_snippets(traj: &Trajectory, n: usize, stride: SnippetStride) -> Result<Vec<Snippet>> {
    if n < 2 {
        return Err(Error::InvalidValue(format!("snippet size must be at least 2, got {n}")));
    }
    if traj.frames.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(Error::InvalidValue("snippets need consecutive frame indices".into()));
    }
    let step = match stride {
        SnippetStride::EveryFrame => 1,
        SnippetStride::Disjoint => n,
    };
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= traj.len() {
        let inv = invert(&traj.poses[start]);
        let motions = traj.poses[start..start + n].iter().map(|p| compose(&inv, p)).collect();
        out.push(Snippet::new(traj.frames[start], motions)?);
        start += step;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DepthMetrics {
    pub const NAMES: [&'static str; 7] = ["abs_rel", "sq_rel", "rmse", "rmse_log", "a1", "a2", "a3"];

    pub fn values(&self) -> [f64; 7] {
        [self.abs_rel, self.sq_rel, self.rmse, self.rmse_log, self.a1, self.a2, self.a3]
    }
}

/// Pixel window `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crop {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Crop {
    /// The crop of Eigen et al. expressed as fractions of the image size.
    pub fn eigen(width: usize, height: usize) -> Self {
        let f = |v: usize, r: f64| (v as f64 * r) as usize;
        Self { x0: f(width, 0.035_944_88), y0: f(height, 0.408_108_11), x1: f(width, 0.964_055_12), y1: f(height, 0.991_891_89) }
    }

    fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthEvalOptions {
    pub cap: f64,
    pub median_scaling: bool,
    pub min_depth: f64,
    pub crop: Option<Crop>,
}

impl DepthEvalOptions {
    pub fn new(cap: f64, median_scaling: bool) -> Self {
        Self { cap, median_scaling, min_depth: MIN_DEPTH, crop: None }
    }
}

/// Median of a slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn check_same_size(pred: &DepthMap, gt: &DepthMap) -> Result<()> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

/// Scales `pred` so its median over valid ground-truth pixels (`gt > 0`)
/// equals the ground-truth median there.
pub fn median_scale(pred: &DepthMap, gt: &DepthMap) -> Result<(f64, DepthMap)> {
    check_same_size(pred, gt)?;
    let (p, g): (Vec<f64>, Vec<f64>) =
        pred.data().iter().zip(gt.data()).filter(|(_, g)| **g > 0.0).map(|(p, g)| (*p, *g)).unzip();
    let scale = scale_from(&p, &g)?;
    Ok((scale, pred.map(|v| v * scale)?))
}

fn scale_from(pred: &[f64], gt: &[f64]) -> Result<f64> {
    let mg = median(gt).ok_or(Error::NoValidGroundTruth)?;
    let mp = median(pred).ok_or(Error::NoValidGroundTruth)?;
    if !(mp > 0.0) {
        return Err(Error::InvalidValue(format!("prediction median must be positive, got {mp}")));
    }
    Ok(mg / mp)
}

/// Standard monocular depth metrics over pixels with `0 < gt ≤ cap`.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, opts: &DepthEvalOptions) -> Result<DepthMetrics> {
    check_same_size(pred, gt)?;
    if !(opts.cap > 0.0) || !(opts.min_depth > 0.0) || opts.min_depth > opts.cap {
        return Err(Error::InvalidValue(format!("need 0 < min_depth <= cap, got {} and {}", opts.min_depth, opts.cap)));
    }
    let w = pred.width();
    let mut p = Vec::new();
    let mut g = Vec::new();
    for (i, (pv, gv)) in pred.data().iter().zip(gt.data()).enumerate() {
        let inside = opts.crop.is_none_or(|c| c.contains(i % w, i / w));
        if inside && *gv > 0.0 && *gv <= opts.cap {
            p.push(*pv);
            g.push(*gv);
        }
    }
    if g.is_empty() {
        return Err(Error::NoValidGroundTruth);
    }
    if opts.median_scaling {
        let s = scale_from(&p, &g)?;
        p.iter_mut().for_each(|v| *v *= s);
    }
    p.iter_mut().for_each(|v| *v = v.clamp(opts.min_depth, opts.cap));

    let n = g.len() as f64;
    let mut acc = [0.0f64; 7];
    for (pv, gv) in p.iter().zip(&g) {
        let d = pv - gv;
        let ratio = (pv / gv).max(gv / pv);
        acc[0] += d.abs() / gv;
        acc[1] += d * d / gv;
        acc[2] += d * d;
        acc[3] += (pv.ln() - gv.ln()).powi(2);
        acc[4] += f64::from(u8::from(ratio < 1.25));
        acc[5] += f64::from(u8::from(ratio < 1.25f64.powi(2)));
        acc[6] += f64::from(u8::from(ratio < 1.25f64.powi(3)));
    }
    Ok(DepthMetrics {
        abs_rel: acc[0] / n,
        sq_rel: acc[1] / n,
        rmse: (acc[2] / n).sqrt(),
        rmse_log: (acc[3] / n).sqrt(),
        a1: acc[4] / n,
        a2: acc[5] / n,
        a3: acc[6] / n,
    })
}

/// `x ↦ s R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    /// Moves a camera-to-world pose into the aligned world frame.
    pub fn apply_to_pose(&self, pose: &RigidMotion) -> RigidMotion {
        RigidMotion::from_parts_unchecked(self.rotation * pose.rotation, self.apply(&pose.translation))
    }

    pub fn apply_to_trajectory(&self, traj: &Trajectory) -> Trajectory {
        Trajectory { frames: traj.frames.clone(), poses: traj.poses.iter().map(|p| self.apply_to_pose(p)).collect() }
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

fn check_spread(points: &[Vector3<f64>], mean: &Vector3<f64>, what: &str) -> Result<()> {
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let sv = cov.singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    if !(s[0] > 0.0) || s[1] <= COLLINEAR_EPS * s[0] {
        return Err(Error::DegenerateTrajectory(format!("{what} positions are collinear")));
    }
    Ok(())
}

/// Least-squares similarity mapping `src` points onto `dst` points.
pub fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} points", src.len(), dst.len())));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateTrajectory(format!("need at least 3 common frames, got {}", src.len())));
    }
    let mu_s = centroid(src);
    let mu_d = centroid(dst);
    check_spread(src, &mu_s, "predicted")?;
    check_spread(dst, &mu_d, "reference")?;
    let n = src.len() as f64;
    let mut sigma = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let ds = s - mu_s;
        sigma += (d - mu_d) * ds.transpose();
        var_s += ds.norm_squared();
    }
    sigma /= n;
    var_s /= n;
    let svd = sigma.svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let mut sign = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        // reflection guard on the smallest singular direction
        let (imin, _) = svd.singular_values.argmin();
        sign[(imin, imin)] = -1.0;
    }
    let rotation = u * sign * v_t;
    let trace: f64 = (0..3).map(|i| svd.singular_values[i] * sign[(i, i)]).sum();
    let scale = trace / var_s;
    let translation = mu_d - rotation * mu_s * scale;
    Ok(SimilarityTransform { scale, rotation, translation })
}

/// Similarity alignment of `pred` onto `gt` over their common frames.
pub fn umeyama_align(pred: &Trajectory, gt: &Trajectory) -> Result<(SimilarityTransform, Trajectory)> {
    let (_, p, g) = pred.common_positions(gt);
    let sim = umeyama(&p, &g)?;
    Ok((sim, sim.apply_to_trajectory(pred)))
}

/// RMSE of snippet positions after the best scale and translation alignment.
pub fn snippet_ate(pred: &Snippet, gt: &Snippet) -> Result<f64> {
    if pred.anchor != gt.anchor || pred.len() != gt.len() {
        return Err(Error::WindowMismatch(format!(
            "anchor {} size {} vs anchor {} size {}",
            pred.anchor,
            pred.len(),
            gt.anchor,
            gt.len()
        )));
    }
    let p = pred.positions();
    let g = gt.positions();
    let mp = centroid(&p);
    let mg = centroid(&g);
    let (num, den) = p.iter().zip(&g).fold((0.0, 0.0), |(num, den), (a, b)| {
        let (da, db) = (a - mp, b - mg);
        (num + da.dot(&db), den + da.norm_squared())
    });
    let scale = if den > 0.0 { num / den } else { 0.0 };
    let sse: f64 = p.iter().zip(&g).map(|(a, b)| ((a - mp) * scale - (b - mg)).norm_squared()).sum();
    Ok((sse / p.len() as f64).sqrt())
}

/// Mean and population standard deviation of per-snippet ATE.
pub fn snippet_ate_stats(pred: &[Snippet], gt: &[Snippet]) -> Result<(f64, f64)> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::WindowMismatch(format!("{} predicted vs {} reference snippets", pred.len(), gt.len())));
    }
    let errs = pred.iter().zip(gt).map(|(p, g)| snippet_ate(p, g)).collect::<Result<Vec<_>>>()?;
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Chordal mean of rotations: sign-aligned quaternion average, renormalized.
pub fn average_rotation(rotations: &[Matrix3<f64>]) -> Matrix3<f64> {
    let quats: Vec<UnitQuaternion<f64>> =
        rotations.iter().map(|r| UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r))).collect();
    let reference = quats[0].coords;
    let mut sum = Vector4::zeros();
    for q in &quats {
        let c = q.coords;
        sum += if c.dot(&reference) < 0.0 { -c } else { c };
    }
    UnitQuaternion::from_quaternion(Quaternion::from(sum)).to_rotation_matrix().into_inner()
}

/// Chains snippet motions into absolute poses, averaging every inter-frame
/// motion estimated by more than one snippet. The first frame gets the
/// identity pose.
pub fn chain_and_average(snippets: &[Snippet]) -> Result<Trajectory> {
    let Some(first) = snippets.iter().map(|s| s.anchor).min() else {
        return Err(Error::InvalidValue("no snippets to chain".into()));
    };
    let last = snippets.iter().map(|s| s.anchor + s.len() - 1).max().expect("non-empty");
    let mut estimates: Vec<Vec<RigidMotion>> = vec![Vec::new(); last - first];
    for s in snippets {
        for k in 0..s.len() - 1 {
            let step = compose(&invert(&s.motions[k]), &s.motions[k + 1]);
            estimates[s.anchor + k - first].push(step);
        }
    }
    let mut poses = vec![RigidMotion::identity()];
    for (i, est) in estimates.iter().enumerate() {
        if est.is_empty() {
            return Err(Error::CoverageGap { from: first + i, to: first + i + 1 });
        }
        let step = if est.len() == 1 {
            est[0]
        } else {
            let rotations: Vec<Matrix3<f64>> = est.iter().map(|m| m.rotation).collect();
            let t = est.iter().map(|m| m.translation).sum::<Vector3<f64>>() / est.len() as f64;
            RigidMotion::from_parts_unchecked(average_rotation(&rotations), t)
        };
        let next = compose(poses.last().expect("seeded with identity"), &step);
        poses.push(next);
    }
    Trajectory::new((first..=last).collect(), poses)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryError {
    pub median: f64,
    pub mean: f64,
    pub rmse: f64,
}

/// Per-frame position error after similarity alignment.
pub fn full_trajectory_error(pred: &Trajectory, gt: &Trajectory) -> Result<TrajectoryError> {
    let (_, p, g) = pred.common_positions(gt);
    let sim = umeyama(&p, &g)?;
    let errs: Vec<f64> = p.iter().zip(&g).map(|(a, b)| (sim.apply(a) - b).norm()).collect();
    let n = errs.len() as f64;
    Ok(TrajectoryError {
        median: median(&errs).expect("at least 3 frames"),
        mean: errs.iter().sum::<f64>() / n,
        rmse: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
    })
}
