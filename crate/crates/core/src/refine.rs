//! Deterministic descent on the total loss over relative pose and depth.
//!
//! Gradients come from central differences, directions from BFGS (falling
//! back to steepest descent) and step lengths from Armijo backtracking, so
//! every accepted iterate lowers the objective.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{fundamental_from_pose, geometric_loss, CameraIntrinsics, EulerPose, RigidMotion};
use crate::image::DepthMap;
use crate::image_loss::{total_loss, LossBreakdown, LossWeights, SourceFrame, View};
use crate::matching::MatchSet;
use crate::rng::seeded;

/// Sufficient-decrease constant of the line search.
pub const ARMIJO_C: f64 = 1e-4;
/// Largest number of pixels refined per-pixel by [`refine_depth`].
pub const MAX_DEPTH_PARAMS: usize = 64 * 64;
const MAX_BACKTRACKS: usize = 60;
const MAX_GRADIENT_SAMPLES: usize = 16;
const SAMPLING_RADIUS_START: f64 = 1e-4;
const SAMPLING_RADIUS_END: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub max_iters: usize,
    /// Length of the first steepest-descent trial step.
    pub step: f64,
    pub backtrack: f64,
    pub grad_eps: f64,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tol: f64,
    /// Alternate pose and depth refinement.
    pub optimize_depth: bool,
    /// Pose/depth rounds when `optimize_depth` is set.
    pub alternations: usize,
    /// Keep each translation at its initial norm.
    pub fix_translation_norm: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            step: 1e-2,
            backtrack: 0.5,
            grad_eps: 1e-5,
            tol: 1e-10,
            optimize_depth: false,
            alternations: 2,
            fix_translation_norm: false,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::ConfigError(format!("step must be positive, got {}", self.step)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::ConfigError(format!("backtrack must lie in (0, 1), got {}", self.backtrack)));
        }
        if !(self.grad_eps > 0.0) || !self.grad_eps.is_finite() {
            return Err(Error::ConfigError(format!("grad_eps must be positive, got {}", self.grad_eps)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::ConfigError(format!("tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    /// One relative pose per source frame.
    pub poses: Vec<EulerPose>,
    pub depth: Option<DepthMap>,
    /// Loss at the start and after every accepted step.
    pub loss_trace: Vec<f64>,
    /// Term breakdown matching `loss_trace`; empty for objectives without one.
    pub terms: Vec<LossBreakdown>,
    pub iterations: usize,
    pub converged: bool,
}

impl RefineReport {
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("trace holds the initial loss")
    }

    pub fn motions(&self) -> Vec<RigidMotion> {
        self.poses.iter().map(EulerPose::to_motion).collect()
    }
}

/// Central differences `(f(x + eps eᵢ) − f(x − eps eᵢ)) / 2eps`; probes run in
/// parallel, results are collected in coordinate order.
pub fn numeric_gradient<F>(f: &F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if !(eps > 0.0) {
        return Err(Error::ConfigError(format!("eps must be positive, got {eps}")));
    }
    let f0 = f(x)?;
    if !f0.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut probe = x.to_vec();
            probe[i] = x[i] + eps;
            let plus = f(&probe)?;
            probe[i] = x[i] - eps;
            let minus = f(&probe)?;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFiniteObjective);
            }
            Ok((plus - minus) / (2.0 * eps))
        })
        .collect()
}

struct Outcome {
    x: Vec<f64>,
    trace: Vec<f64>,
    accepted: Vec<Vec<f64>>,
    iterations: usize,
    converged: bool,
}

/// BFGS with Armijo backtracking. Trial points whose objective errors or is
/// non-finite count as failed steps.
fn minimize<F>(f: &F, x0: &[f64], cfg: &RefineConfig) -> Result<Outcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice())?;
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut g = DVector::from_vec(numeric_gradient(f, x.as_slice(), cfg.grad_eps)?);
    let mut h: Option<DMatrix<f64>> = None;
    let mut trace = vec![fx];
    let mut accepted = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut force_sampling = false;

    while iterations < cfg.max_iters {
        let gnorm = g.norm();
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        let mut step = None;
        if !force_sampling {
            // quasi-Newton direction first, then a plain gradient step
            for attempt in 0..2 {
                let (dir, alpha0) = match (&h, attempt) {
                    (Some(hm), 0) => (-(hm * &g), 1.0),
                    (None, 0) | (_, 1) => (-&g, cfg.step / gnorm),
                    _ => unreachable!(),
                };
                let slope = g.dot(&dir);
                if slope < 0.0 {
                    if let Some(found) = line_search(f, &x, fx, &dir, slope, alpha0, cfg) {
                        step = Some(found);
                        break;
                    }
                }
                if h.is_none() {
                    break;
                }
            }
        }
        let sampled = step.is_none();
        if sampled {
            step = sampled_gradient_step(f, &x, fx, &g, cfg, iterations as u64)?;
        }
        let Some((x_new, f_new)) = step else {
            converged = true;
            break;
        };
        iterations += 1;
        let decrease = fx - f_new;
        let g_new = DVector::from_vec(numeric_gradient(f, x_new.as_slice(), cfg.grad_eps)?);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
            let mut hm = h.take().unwrap_or_else(|| DMatrix::identity(n, n) * (sy / y.dot(&y)));
            let rho = 1.0 / sy;
            let hy = &hm * &y;
            let yhy = y.dot(&hy);
            // H⁺ = H − ρ(Hy sᵀ + s yᵀH) + (ρ² yᵀHy + ρ) s sᵀ
            hm -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            hm += (&s * s.transpose()) * (rho * rho * yhy + rho);
            h = Some(hm);
        } else {
            h = None;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        accepted.push(x.as_slice().to_vec());
        // a tiny smooth step may just be a kink; only a tiny sampled step ends the run
        force_sampling = decrease < cfg.tol && !sampled;
        if decrease < cfg.tol && sampled {
            converged = true;
            break;
        }
    }
    Ok(Outcome { x: x.as_slice().to_vec(), trace, accepted, iterations, converged })
}

/// Fallback for kinks: descend along the minimum-norm element of the convex
/// hull of gradients sampled around `x`, shrinking the radius until a step is
/// accepted or the radius becomes negligible.
fn sampled_gradient_step<F>(
    f: &F,
    x: &DVector<f64>,
    fx: f64,
    g: &DVector<f64>,
    cfg: &RefineConfig,
    salt: u64,
) -> Result<Option<(DVector<f64>, f64)>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = x.len();
    let samples = (n + 1).min(MAX_GRADIENT_SAMPLES);
    let mut rng = seeded(0x5eed_0000 ^ salt);
    let mut radius = SAMPLING_RADIUS_START;
    while radius >= SAMPLING_RADIUS_END {
        let mut grads = vec![g.clone()];
        for _ in 0..samples {
            let mut u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let norm = u.norm();
            if norm == 0.0 {
                continue;
            }
            u *= radius / norm;
            if let Ok(gs) = numeric_gradient(f, (x + u).as_slice(), cfg.grad_eps.min(radius)) {
                grads.push(DVector::from_vec(gs));
            }
        }
        let dir = -min_norm_in_hull(&grads);
        let dnorm = dir.norm();
        if dnorm > 0.0 {
            let slope = g.dot(&dir).min(-dnorm * dnorm);
            let alpha0 = (cfg.step / dnorm).max(1.0);
            if let Some(found) = line_search(f, x, fx, &dir, slope, alpha0, cfg) {
                return Ok(Some(found));
            }
        }
        radius *= 0.1;
    }
    Ok(None)
}

/// Minimum-norm point of the convex hull of `points` (Frank-Wolfe with exact
/// line search).
fn min_norm_in_hull(points: &[DVector<f64>]) -> DVector<f64> {
    let mut z = points[0].clone();
    for _ in 0..2000 {
        let (best, _) =
            points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.dot(&z)))
                .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let d = &points[best] - &z;
        let dd = d.dot(&d);
        if dd == 0.0 {
            break;
        }
        let t = (-z.dot(&d) / dd).clamp(0.0, 1.0);
        if t * t * dd <= 1e-30 * z.dot(&z).max(1e-300) {
            break;
        }
        z += d * t;
    }
    z
}

fn line_search<F>(
    f: &F,
    x: &DVector<f64>,
    fx: f64,
    dir: &DVector<f64>,
    slope: f64,
    alpha0: f64,
    cfg: &RefineConfig,
) -> Option<(DVector<f64>, f64)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let mut alpha = alpha0;
    for _ in 0..MAX_BACKTRACKS {
        let trial = x + dir * alpha;
        if let Ok(ft) = f(trial.as_slice()) {
            if ft.is_finite() && ft <= fx + ARMIJO_C * alpha * slope && ft < fx {
                return Some((trial, ft));
            }
        }
        alpha *= cfg.backtrack;
    }
    None
}

fn pose_from_params(p: &[f64], norms: Option<f64>) -> EulerPose {
    let mut pose = EulerPose::from_params(p);
    if let Some(n0) = norms {
        let n = pose.t.norm();
        if n > 0.0 {
            pose.t *= n0 / n;
        }
    }
    pose
}

struct PoseParams {
    norms: Vec<Option<f64>>,
}

impl PoseParams {
    fn new(initial: &[EulerPose], fix_norm: bool) -> Self {
        Self { norms: initial.iter().map(|p| fix_norm.then(|| p.t.norm())).collect() }
    }

    fn poses(&self, x: &[f64]) -> Vec<EulerPose> {
        x.chunks(6).zip(&self.norms).map(|(c, n)| pose_from_params(c, *n)).collect()
    }
}

fn with_motions<'a>(sources: &[SourceFrame<'a>], poses: &[EulerPose]) -> Vec<SourceFrame<'a>> {
    sources.iter().zip(poses).map(|(s, p)| SourceFrame { motion: p.to_motion(), ..s.clone() }).collect()
}

fn pose_stage(
    target: &View,
    depth: &DepthMap,
    sources: &[SourceFrame<'_>],
    poses: &[EulerPose],
    weights: &LossWeights,
    cfg: &RefineConfig,
) -> Result<(Vec<EulerPose>, Outcome)> {
    let params = PoseParams::new(poses, cfg.fix_translation_norm);
    let x0: Vec<f64> = poses.iter().flat_map(|p| p.to_params()).collect();
    let objective = |x: &[f64]| -> Result<f64> {
        let frames = with_motions(sources, &params.poses(x));
        Ok(total_loss(target, depth, &frames, weights)?.total)
    };
    let out = minimize(&objective, &x0, cfg)?;
    Ok((params.poses(&out.x), out))
}

fn depth_stage(
    target: &View,
    depth: &DepthMap,
    sources: &[SourceFrame<'_>],
    weights: &LossWeights,
    cfg: &RefineConfig,
) -> Result<(DepthMap, Outcome)> {
    if depth.len() > MAX_DEPTH_PARAMS {
        return Err(Error::ConfigError(format!("depth refinement is limited to {MAX_DEPTH_PARAMS} pixels, got {}", depth.len())));
    }
    depth.validate_prediction()?;
    let (w, h) = (depth.width(), depth.height());
    let x0: Vec<f64> = depth.data().iter().map(|d| d.ln()).collect();
    let to_depth = |x: &[f64]| DepthMap::new(w, h, x.iter().map(|v| v.exp()).collect());
    let objective = |x: &[f64]| -> Result<f64> { Ok(total_loss(target, &to_depth(x)?, sources, weights)?.total) };
    let out = minimize(&objective, &x0, cfg)?;
    Ok((to_depth(&out.x)?, out))
}

fn initial_poses(sources: &[SourceFrame<'_>]) -> Result<Vec<EulerPose>> {
    sources.iter().map(|s| EulerPose::from_motion(&s.motion)).collect()
}

fn breakdowns(
    target: &View,
    sources: &[SourceFrame<'_>],
    weights: &LossWeights,
    states: &[(Vec<EulerPose>, DepthMap)],
) -> Result<Vec<LossBreakdown>> {
    states.iter().map(|(poses, depth)| total_loss(target, depth, &with_motions(sources, poses), weights)).collect()
}

/// Minimizes the total loss over every source's relative pose, starting from
/// the motions stored in `sources`. With `optimize_depth` the depth is refined
/// too, alternating with the pose.
pub fn refine_pose(
    target: &View,
    depth: &DepthMap,
    sources: &[SourceFrame<'_>],
    weights: &LossWeights,
    cfg: &RefineConfig,
) -> Result<RefineReport> {
    cfg.validate()?;
    weights.validate()?;
    let mut poses = initial_poses(sources)?;
    let mut current_depth = depth.clone();
    let start = total_loss(target, depth, sources, weights)?;
    let mut trace = vec![start.total];
    let mut states = Vec::new();
    let mut iterations = 0;
    let mut converged;
    let rounds = if cfg.optimize_depth { cfg.alternations.max(1) } else { 1 };

    let mut round = 0;
    loop {
        let (new_poses, out) = pose_stage(target, &current_depth, sources, &poses, weights, cfg)?;
        let params = PoseParams::new(&poses, cfg.fix_translation_norm);
        states.extend(out.accepted.iter().map(|x| (params.poses(x), current_depth.clone())));
        trace.extend_from_slice(&out.trace[1..]);
        iterations += out.iterations;
        converged = out.converged;
        poses = new_poses;
        if !cfg.optimize_depth {
            break;
        }
        let frames = with_motions(sources, &poses);
        let (new_depth, out) = depth_stage(target, &current_depth, &frames, weights, cfg)?;
        let (w, h) = (depth.width(), depth.height());
        for x in &out.accepted {
            states.push((poses.clone(), DepthMap::new(w, h, x.iter().map(|v| v.exp()).collect())?));
        }
        trace.extend_from_slice(&out.trace[1..]);
        iterations += out.iterations;
        converged &= out.converged;
        current_depth = new_depth;
        round += 1;
        if round >= rounds {
            break;
        }
    }

    let mut terms = vec![start];
    terms.extend(breakdowns(target, sources, weights, &states)?);
    Ok(RefineReport {
        poses,
        depth: cfg.optimize_depth.then_some(current_depth),
        loss_trace: trace,
        terms,
        iterations,
        converged,
    })
}

/// Minimizes the total loss over per-pixel log-depth with the poses in
/// `sources` held fixed.
pub fn refine_depth(
    target: &View,
    initial: &DepthMap,
    sources: &[SourceFrame<'_>],
    weights: &LossWeights,
    cfg: &RefineConfig,
) -> Result<RefineReport> {
    cfg.validate()?;
    weights.validate()?;
    let poses = initial_poses(sources)?;
    let start = total_loss(target, initial, sources, weights)?;
    let (depth, out) = depth_stage(target, initial, sources, weights, cfg)?;
    let (w, h) = (initial.width(), initial.height());
    let states = out
        .accepted
        .iter()
        .map(|x| Ok((poses.clone(), DepthMap::new(w, h, x.iter().map(|v| v.exp()).collect())?)))
        .collect::<Result<Vec<_>>>()?;
    let mut terms = vec![start];
    terms.extend(breakdowns(target, sources, weights, &states)?);
    Ok(RefineReport {
        poses,
        depth: Some(depth),
        loss_trace: out.trace,
        terms,
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Pose refinement driven by the geometric loss alone. The loss cannot see
/// the translation scale, so the translation norm stays at its initial value.
pub fn refine_pose_geometric(
    initial: &EulerPose,
    matches: &MatchSet,
    k_source: &CameraIntrinsics,
    k_target: &CameraIntrinsics,
    cfg: &RefineConfig,
) -> Result<RefineReport> {
    cfg.validate()?;
    let norm = initial.t.norm();
    let objective = |x: &[f64]| -> Result<f64> {
        let pose = pose_from_params(x, Some(norm));
        let f = fundamental_from_pose(k_source, k_target, &pose.to_motion())?;
        Ok(geometric_loss(&f, matches)?.sum)
    };
    let out = minimize(&objective, &initial.to_params(), cfg)?;
    Ok(RefineReport {
        poses: vec![pose_from_params(&out.x, Some(norm))],
        depth: None,
        loss_trace: out.trace,
        terms: Vec::new(),
        iterations: out.iterations,
        converged: out.converged,
    })
}

/// Angle between unit translation directions expressed as the chord length
/// `‖t̂₁ − t̂₂‖`.
pub fn translation_direction_error(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.normalize() - b.normalize()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_angle, rotation_angle};
    use crate::synth::{perturb_pose, SceneSpec, SyntheticScene};

    #[test]
    fn gradient_of_quadratic() {
        let f = |x: &[f64]| -> Result<f64> { Ok(x.iter().map(|v| v * v).sum()) };
        let g = numeric_gradient(&f, &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = |_: &[f64]| -> Result<f64> { Ok(3.25) };
        assert_eq!(numeric_gradient(&f, &[0.1, -4.0, 9.0], 1e-4).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn non_finite_probe_is_reported() {
        let f = |x: &[f64]| -> Result<f64> { Ok(if x[0] > 0.5 { f64::NAN } else { x[0] }) };
        assert!(matches!(numeric_gradient(&f, &[0.5], 1e-3), Err(Error::NonFiniteObjective)));
    }

    #[test]
    fn minimize_rosenbrock() {
        let f = |x: &[f64]| -> Result<f64> { Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)) };
        let cfg = RefineConfig { max_iters: 500, tol: 0.0, ..RefineConfig::default() };
        let out = minimize(&f, &[-1.2, 1.0], &cfg).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out.x);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn config_validation() {
        assert!(RefineConfig::default().validate().is_ok());
        assert!(RefineConfig { step: 0.0, ..Default::default() }.validate().is_err());
        assert!(RefineConfig { backtrack: 1.0, ..Default::default() }.validate().is_err());
        assert!(RefineConfig { grad_eps: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn geometric_refinement_keeps_translation_norm() {
        let scene = SyntheticScene::generate(&SceneSpec::default(), 11).unwrap();
        let truth = scene.relative_motion(0, 1).unwrap();
        let matches = scene.make_matches(1, 0, 100, 2).unwrap();
        let start = perturb_pose(&truth, 1.0, 0.05, 5).unwrap();
        let initial = EulerPose::from_motion(&start).unwrap();
        let cfg = RefineConfig::default();
        let report =
            refine_pose_geometric(&initial, &matches, &scene.cameras[1].intrinsics, &scene.cameras[0].intrinsics, &cfg).unwrap();
        let got = report.poses[0].to_motion();
        assert!((got.translation.norm() - truth.translation.norm()).abs() < 1e-12);
        assert!(report.loss_trace.windows(2).all(|w| w[1] <= w[0]));
        let rot_err = rotation_angle(&(got.rotation * truth.rotation.transpose())).to_degrees();
        assert!(rot_err < 0.1, "{rot_err}");
        assert!(translation_direction_error(&got.translation, &truth.translation) < 0.01);
    }

    #[test]
    fn pose_scale_invariance_of_geometric_loss() {
        let scene = SyntheticScene::generate(&SceneSpec::default(), 12).unwrap();
        let m = scene.relative_motion(0, 1).unwrap();
        let matches = scene.make_matches(1, 0, 50, 1).unwrap();
        let (k1, k2) = (scene.cameras[1].intrinsics, scene.cameras[0].intrinsics);
        let base = geometric_loss(&fundamental_from_pose(&k1, &k2, &perturb_pose(&m, 2.0, 0.1, 3).unwrap()).unwrap(), &matches)
            .unwrap()
            .sum;
        for s in [0.1, 3.0, 17.0] {
            let p = perturb_pose(&m, 2.0, 0.1, 3).unwrap();
            let scaled = RigidMotion { translation: p.translation * s, ..p };
            let g = geometric_loss(&fundamental_from_pose(&k1, &k2, &scaled).unwrap(), &matches).unwrap().sum;
            assert!((g - base).abs() <= 1e-9 * base.max(1.0));
        }
    }

    #[test]
    fn rotation_helper_sanity() {
        let r = axis_angle(&Vector3::z(), 0.25);
        assert!((rotation_angle(&r) - 0.25).abs() < 1e-15);
    }
}
