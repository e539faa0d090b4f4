use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use geovo::evaluation::{
    chain_and_average, cut_snippets, depth_metrics, full_trajectory_error, snippet_ate_stats, umeyama_align, Crop,
    DepthEvalOptions,
};
use geovo::geometry::{compose, invert};
use geovo::image_loss::{inverse_warp, total_loss};
use geovo::io::{self, fmt17, DepthRole};
use geovo::matching::{ransac_fundamental, sample_matches};
use geovo::refine::refine_pose;
use geovo::synth::{SceneSpec, SyntheticScene};
use geovo::{
    CameraIntrinsics, DepthMap, Error, EulerPose, MatchSet, Result, RigidMotion, RunConfig, SourceFrame, Trajectory, View,
};

use crate::svg;
use crate::Common;

pub struct Context {
    pub config: RunConfig,
    pub out: Option<PathBuf>,
}

impl Context {
    pub fn new(common: &Common) -> Result<Self> {
        let mut config = match &common.config {
            Some(path) => RunConfig::read(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(Self { config, out: common.out.clone() })
    }

    fn require_out(&self, what: &str) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::ConfigError(format!("--out is required: {what}")))
    }

    /// Writes to `--out` when given, stdout otherwise.
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn read_motions(path: &Path, expected: usize) -> Result<Vec<RigidMotion>> {
    let traj = io::read_pose_file(path)?;
    if traj.len() != expected {
        return Err(Error::CountMismatch { expected, found: traj.len() });
    }
    Ok(traj.poses().to_vec())
}

// synth ------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of views; view 0 is the target.
    #[arg(long, default_value_t = 3)]
    views: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 48)]
    height: usize,
    #[arg(long, default_value_t = 50.0)]
    focal: f64,
    /// Matches generated per source view.
    #[arg(long, default_value_t = 200)]
    matches: usize,
}

/// Writes into the `--out` directory:
/// target.pgm, target.depth, target.k, source{i}.pgm, source{i}.k,
/// poses.txt (camera-to-world, all views), motions.txt (target → source{i})
/// and matches{i}.txt (p in source{i}, q in target).
pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<()> {
    let dir = ctx.require_out("output directory for synth")?;
    fs::create_dir_all(dir)?;
    let spec = SceneSpec { views: a.views, width: a.width, height: a.height, focal: a.focal, ..SceneSpec::default() };
    let scene = SyntheticScene::generate(&spec, ctx.config.seed)?;
    let (image, depth) = scene.render_view(0)?;
    io::write_image_file(dir.join("target.pgm"), &image)?;
    io::write_depth_file(dir.join("target.depth"), &depth)?;
    io::write_intrinsics_file(dir.join("target.k"), &scene.cameras[0].intrinsics)?;
    let mut motions = Vec::new();
    for i in 1..a.views {
        let (img, _) = scene.render_view(i)?;
        io::write_image_file(dir.join(format!("source{i}.pgm")), &img)?;
        io::write_intrinsics_file(dir.join(format!("source{i}.k")), &scene.cameras[i].intrinsics)?;
        let m = scene.make_matches(i, 0, a.matches, ctx.config.seed.wrapping_add(i as u64))?;
        io::write_match_file(dir.join(format!("matches{i}.txt")), &m)?;
        motions.push(scene.relative_motion(0, i)?);
    }
    io::write_pose_file(dir.join("poses.txt"), &Trajectory::from_poses(scene.cameras.iter().map(|c| c.pose).collect()))?;
    io::write_pose_file(dir.join("motions.txt"), &Trajectory::from_poses(motions))?;
    Ok(())
}

// warp -------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct WarpArgs {
    #[arg(long)]
    source: PathBuf,
    /// Target depth map.
    #[arg(long)]
    depth: PathBuf,
    /// Pose file whose first line maps target into source coordinates.
    #[arg(long)]
    motion: PathBuf,
    #[arg(long)]
    k_source: PathBuf,
    #[arg(long)]
    k_target: PathBuf,
    /// Optional mask image (255 valid, 0 invalid).
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

pub fn warp(ctx: &Context, a: &WarpArgs) -> Result<()> {
    let out = ctx.require_out("synthesized image path")?;
    let src = io::read_image_file(&a.source)?;
    let depth = io::read_depth_file(&a.depth, DepthRole::Prediction)?;
    let motion = *io::read_pose_file(&a.motion)?.poses().first().ok_or(Error::CountMismatch { expected: 1, found: 0 })?;
    let w =
        inverse_warp(&src, &depth, &motion, &io::read_intrinsics_file(&a.k_source)?, &io::read_intrinsics_file(&a.k_target)?)?;
    io::write_image_file(out, &w.synthesized)?;
    if let Some(path) = &a.mask_out {
        let m = geovo::ImageBuffer::new(
            w.validity.width(),
            w.validity.height(),
            1,
            w.validity.data().iter().map(|v| if *v { 1.0 } else { 0.0 }).collect(),
        )?;
        io::write_image_file(path, &m)?;
    }
    println!("valid_pixels,{}", w.valid_count());
    Ok(())
}

// shared frame inputs ----------------------------------------------------

#[derive(Args, Debug)]
pub struct FrameArgs {
    #[arg(long)]
    target: PathBuf,
    /// Target depth map.
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    k_target: PathBuf,
    /// Source images, one flag per frame.
    #[arg(long = "source", required = true)]
    sources: Vec<PathBuf>,
    /// Source intrinsics, one per source or a single shared file.
    #[arg(long = "k-source", required = true)]
    k_sources: Vec<PathBuf>,
    /// Pose file, one line per source: target → source motion.
    #[arg(long)]
    motions: PathBuf,
    /// Match files (p in source, q in target), one per source.
    #[arg(long = "matches")]
    matches: Vec<PathBuf>,
    /// Pose file of weak relative poses, one line per source.
    #[arg(long)]
    weak_poses: Option<PathBuf>,
}

struct Frames {
    target: View,
    depth: DepthMap,
    views: Vec<View>,
    motions: Vec<RigidMotion>,
    matches: Vec<MatchSet>,
    weak: Vec<EulerPose>,
}

impl Frames {
    fn load(a: &FrameArgs, ctx: &Context) -> Result<Self> {
        let n = a.sources.len();
        let k_target = io::read_intrinsics_file(&a.k_target)?;
        let k_sources: Vec<CameraIntrinsics> = match a.k_sources.len() {
            1 => vec![io::read_intrinsics_file(&a.k_sources[0])?; n],
            m if m == n => a.k_sources.iter().map(io::read_intrinsics_file).collect::<Result<_>>()?,
            m => return Err(Error::CountMismatch { expected: n, found: m }),
        };
        let views = a
            .sources
            .iter()
            .zip(k_sources)
            .map(|(p, k)| Ok(View::new(io::read_image_file(p)?, k)))
            .collect::<Result<Vec<_>>>()?;
        if !a.matches.is_empty() && a.matches.len() != n {
            return Err(Error::CountMismatch { expected: n, found: a.matches.len() });
        }
        let matches = a
            .matches
            .iter()
            .enumerate()
            .map(|(i, p)| {
                Ok(sample_matches(&io::read_match_file(p)?, ctx.config.match_samples, ctx.config.seed.wrapping_add(i as u64)))
            })
            .collect::<Result<Vec<_>>>()?;
        let weak = match &a.weak_poses {
            Some(p) => read_motions(p, n)?.iter().map(|m| EulerPose::from_motion(m)?.normalized()).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        Ok(Self {
            target: View::new(io::read_image_file(&a.target)?, k_target),
            depth: io::read_depth_file(&a.depth, DepthRole::Prediction)?,
            views,
            motions: read_motions(&a.motions, n)?,
            matches,
            weak,
        })
    }

    fn sources(&self) -> Vec<SourceFrame<'_>> {
        (0..self.views.len())
            .map(|i| SourceFrame {
                view: &self.views[i],
                motion: self.motions[i],
                matches: self.matches.get(i),
                weak_pose: self.weak.get(i).copied(),
            })
            .collect()
    }
}

// loss -------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct LossArgs {
    #[command(flatten)]
    frames: FrameArgs,
}

const LOSS_HEADER: [&str; 5] = ["total", "photometric", "smoothness", "geometric", "pose_prior"];

fn loss_row(b: &geovo::LossBreakdown) -> Vec<f64> {
    vec![b.total, b.photometric, b.smoothness, b.geometric.unwrap_or(0.0), b.pose_prior.unwrap_or(0.0)]
}

pub fn loss(ctx: &Context, a: &LossArgs) -> Result<()> {
    let f = Frames::load(&a.frames, ctx)?;
    let b = total_loss(&f.target, &f.depth, &f.sources(), &ctx.config.weights)?;
    ctx.emit(&csv(&LOSS_HEADER, &[loss_row(&b)]))
}

// fmatrix ----------------------------------------------------------------

#[derive(Args, Debug)]
pub struct FmatrixArgs {
    #[arg(long)]
    matches: PathBuf,
    /// Where to write the sampled inlier matches.
    #[arg(long)]
    inliers_out: Option<PathBuf>,
}

/// Prints F row-major plus the inlier count; `--inliers-out` receives up to
/// `match_samples` inliers drawn with the run seed.
pub fn fmatrix(ctx: &Context, a: &FmatrixArgs) -> Result<()> {
    let set = io::read_match_file(&a.matches)?;
    let r = ransac_fundamental(&set, &ctx.config.ransac)?;
    if let Some(path) = &a.inliers_out {
        io::write_match_file(path, &sample_matches(&r.inliers, ctx.config.match_samples, ctx.config.seed))?;
    }
    let header = ["f11", "f12", "f13", "f21", "f22", "f23", "f31", "f32", "f33", "inliers", "matches"];
    let m = r.fundamental.matrix();
    let mut row: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| m[(i, j)])).collect();
    row.push(r.inliers.len() as f64);
    row.push(set.len() as f64);
    ctx.emit(&csv(&header, &[row]))
}

// refine -----------------------------------------------------------------

#[derive(Args, Debug)]
pub struct RefineArgs {
    #[command(flatten)]
    frames: FrameArgs,
    /// Per-iteration loss trace as CSV.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

/// Writes refined target → source motions (one pose line per source) to
/// `--out` and prints the final loss terms.
pub fn refine(ctx: &Context, a: &RefineArgs) -> Result<()> {
    let out = ctx.require_out("refined pose file")?;
    let f = Frames::load(&a.frames, ctx)?;
    let report = refine_pose(&f.target, &f.depth, &f.sources(), &ctx.config.weights, &ctx.config.refine)?;
    io::write_pose_file(out, &Trajectory::from_poses(report.motions()))?;
    if let Some(path) = &a.trace_out {
        let rows: Vec<Vec<f64>> = report.loss_trace.iter().enumerate().map(|(i, l)| vec![i as f64, *l]).collect();
        fs::write(path, csv(&["iteration", "loss"], &rows))?;
    }
    let last = report.terms.last().map(loss_row).unwrap_or_default();
    let mut header = LOSS_HEADER.to_vec();
    header.extend(["iterations", "converged"]);
    let mut row = last;
    row.push(report.iterations as f64);
    row.push(if report.converged { 1.0 } else { 0.0 });
    print!("{}", csv(&header, &[row]));
    Ok(())
}

// eval-depth -------------------------------------------------------------

#[derive(Args, Debug)]
pub struct EvalDepthArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Depth cap in meters; defaults to the configured cap.
    #[arg(long)]
    cap: Option<f64>,
    /// Disable per-image median scaling.
    #[arg(long)]
    no_median_scaling: bool,
    /// Apply the Eigen crop.
    #[arg(long)]
    eigen_crop: bool,
}

pub fn eval_depth(ctx: &Context, a: &EvalDepthArgs) -> Result<()> {
    let pred = io::read_depth_file(&a.pred, DepthRole::Prediction)?;
    let gt = io::read_depth_file(&a.gt, DepthRole::GroundTruth)?;
    let mut opts =
        DepthEvalOptions::new(a.cap.unwrap_or(ctx.config.depth_cap), ctx.config.median_scaling && !a.no_median_scaling);
    if a.eigen_crop {
        opts.crop = Some(Crop::eigen(gt.width(), gt.height()));
    }
    let m = depth_metrics(&pred, &gt, &opts)?;
    ctx.emit(&csv(&geovo::DepthMetrics::NAMES, &[m.values().to_vec()]))
}

// eval-odom --------------------------------------------------------------

#[derive(Args, Debug)]
pub struct EvalOdomArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Snippet length; defaults to the configured size.
    #[arg(long)]
    snippet: Option<usize>,
    /// SVG trajectory overlay path.
    #[arg(long)]
    svg: Option<PathBuf>,
}

/// Full-trajectory errors after similarity alignment, and snippet ATE
/// statistics over windows cut from both trajectories.
pub fn eval_odom(ctx: &Context, a: &EvalOdomArgs) -> Result<()> {
    let pred = io::read_pose_file(&a.pred)?;
    let gt = io::read_pose_file(&a.gt)?;
    if pred.len() != gt.len() {
        return Err(Error::CountMismatch { expected: gt.len(), found: pred.len() });
    }
    let full = full_trajectory_error(&pred, &gt)?;
    let n = a.snippet.unwrap_or(ctx.config.snippet_size);
    let (ate_mean, ate_std) = if gt.len() >= n {
        snippet_ate_stats(&cut_snippets(&pred, n, ctx.config.snippet_stride)?, &cut_snippets(&gt, n, ctx.config.snippet_stride)?)?
    } else {
        (f64::NAN, f64::NAN)
    };
    if let Some(path) = &a.svg {
        let (_, aligned) = umeyama_align(&pred, &gt)?;
        fs::write(path, svg::trajectory_overlay(&gt.positions(), &aligned.positions()))?;
    }
    ctx.emit(&csv(
        &["median", "mean", "rmse", "snippet_ate_mean", "snippet_ate_std", "frames"],
        &[vec![full.median, full.mean, full.rmse, ate_mean, ate_std, gt.len() as f64]],
    ))
}

// chain ------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ChainArgs {
    /// Snippet file (`SNIPPET <anchor> <n>` blocks).
    #[arg(long)]
    snippets: PathBuf,
    /// Optional first pose: the chained trajectory is re-anchored onto it.
    #[arg(long)]
    anchor: Option<PathBuf>,
}

pub fn chain(ctx: &Context, a: &ChainArgs) -> Result<()> {
    let snippets = io::read_snippet_file(&a.snippets)?;
    let mut traj = chain_and_average(&snippets)?;
    if let Some(path) = &a.anchor {
        let first = *io::read_pose_file(path)?.poses().first().ok_or(Error::CountMismatch { expected: 1, found: 0 })?;
        let shift = compose(&first, &invert(&traj.poses()[0]));
        traj = Trajectory::new(traj.frames().to_vec(), traj.poses().iter().map(|p| compose(&shift, p)).collect())?;
    }
    ctx.emit(&io::format_poses(&traj))
}
