//! Analytic synthetic scenes with exactly consistent images, depths, poses
//! and correspondences.
//!
//! A scene is the boundary of a convex region bounded by a few planes, viewed
//! from cameras inside that region, so every surface point is visible from
//! every camera (no occlusion). Intensities come from a band-limited solid
//! texture (a sum of 3D sinusoids) evaluated exactly at each pixel's surface
//! point.

use nalgebra::{Vector2, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{axis_angle, compose, invert, CameraIntrinsics, RigidMotion};
use crate::image::{DepthMap, ImageBuffer};
use crate::image_loss::View;
use crate::matching::{Match, MatchSet};
use crate::rng::seeded;

/// Plane `normal · X = offset` in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vector3<f64>, offset: f64) -> Self {
        let n = normal.norm();
        Self { normal: normal / n, offset: offset / n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    /// Angular frequency vector, radians per world unit.
    pub frequency: Vector3<f64>,
    pub phase: f64,
    pub amplitude: f64,
}

/// `0.5 + Σ aₖ sin(ωₖ·X + φₖ)`; amplitudes sum to at most 0.45.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidTexture {
    pub components: Vec<Sinusoid>,
}

impl SolidTexture {
    pub fn value(&self, x: &Vector3<f64>) -> f64 {
        0.5 + self.components.iter().map(|c| c.amplitude * (c.frequency.dot(x) + c.phase).sin()).sum::<f64>()
    }
}

/// A camera of the scene: intrinsics, camera-to-world pose and image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneCamera {
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidMotion,
    pub width: usize,
    pub height: usize,
}

impl SceneCamera {
    fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub planes: Vec<Plane>,
    pub texture: SolidTexture,
    pub cameras: Vec<SceneCamera>,
}

/// Knobs of [`SyntheticScene::generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    /// Extra border (pixels) rendered around source views so that warped
    /// target pixels stay inside them.
    pub source_margin: usize,
    /// Number of cameras; camera 0 is the target.
    pub views: usize,
    pub planes: usize,
    /// Depth range of the planes along the optical axis, meters.
    pub depth_range: (f64, f64),
    /// Range of source-camera translation magnitude, meters.
    pub baseline: (f64, f64),
    /// Maximum source-camera rotation, degrees.
    pub max_rotation_deg: f64,
    /// Texture period range at the nearest plane depth, pixels.
    pub period_px: (f64, f64),
    pub texture_components: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            focal: 50.0,
            source_margin: 16,
            views: 2,
            planes: 3,
            depth_range: (6.0, 10.0),
            baseline: (0.6, 1.0),
            max_rotation_deg: 2.0,
            period_px: (24.0, 48.0),
            texture_components: 6,
        }
    }
}

impl SyntheticScene {
    /// Seeded random scene. Camera 0 sits at the world origin looking down +z.
    pub fn generate(spec: &SceneSpec, seed: u64) -> Result<Self> {
        if spec.views == 0 || spec.planes == 0 || spec.width < 2 || spec.height < 2 {
            return Err(Error::InvalidValue("scene needs at least one view, one plane and 2x2 pixels".into()));
        }
        let mut rng = seeded(seed);
        let (w, h, m) = (spec.width, spec.height, spec.source_margin);
        let target_k = CameraIntrinsics::new(spec.focal, spec.focal, (w - 1) as f64 / 2.0, (h - 1) as f64 / 2.0)?;
        let source_k =
            CameraIntrinsics::new(spec.focal, spec.focal, (w - 1) as f64 / 2.0 + m as f64, (h - 1) as f64 / 2.0 + m as f64)?;

        let mut cameras = vec![SceneCamera { intrinsics: target_k, pose: RigidMotion::identity(), width: w, height: h }];
        for v in 1..spec.views {
            // alternate behind/ahead of the target along the optical axis
            let forward = if v % 2 == 1 { -1.0 } else { 1.0 };
            let dir = Vector3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.15..0.15), forward).normalize();
            let mag = rng.random_range(spec.baseline.0..=spec.baseline.1) * v.div_ceil(2) as f64;
            let axis = random_unit(&mut rng);
            let angle = rng.random_range(0.0..=spec.max_rotation_deg).to_radians();
            let pose = RigidMotion::new(axis_angle(&axis, angle), dir * mag)?;
            cameras.push(SceneCamera { intrinsics: source_k, pose, width: w + 2 * m, height: h + 2 * m });
        }

        let mut planes = Vec::with_capacity(spec.planes);
        for _ in 0..spec.planes {
            let tilt = rng.random_range(10.0f64..30.0).to_radians();
            let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
            let normal = Vector3::new(tilt.sin() * azimuth.cos(), tilt.sin() * azimuth.sin(), tilt.cos());
            let depth = rng.random_range(spec.depth_range.0..=spec.depth_range.1);
            planes.push(Plane::new(normal, depth * normal.z));
        }

        let k = spec.texture_components.max(1);
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let components = weights
            .iter()
            .map(|wt| {
                let period_px = rng.random_range(spec.period_px.0..=spec.period_px.1);
                let wavelength = period_px * spec.depth_range.0 / spec.focal;
                Sinusoid {
                    frequency: random_unit(&mut rng) * (std::f64::consts::TAU / wavelength),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                    amplitude: 0.45 * wt / total,
                }
            })
            .collect();

        let scene = Self { planes, texture: SolidTexture { components }, cameras };
        scene.check_cameras_inside()?;
        Ok(scene)
    }

    fn check_cameras_inside(&self) -> Result<()> {
        for cam in &self.cameras {
            let c = cam.pose.translation;
            if self.planes.iter().any(|p| p.normal.dot(&c) >= p.offset) {
                return Err(Error::InvalidValue("a camera lies outside the planar region".into()));
            }
        }
        Ok(())
    }

    pub fn camera(&self, index: usize) -> Result<&SceneCamera> {
        self.cameras.get(index).ok_or_else(|| Error::InvalidValue(format!("scene has no camera {index}")))
    }

    /// Motion mapping camera `target` coordinates into camera `source` coordinates.
    pub fn relative_motion(&self, target: usize, source: usize) -> Result<RigidMotion> {
        let t = self.camera(target)?;
        let s = self.camera(source)?;
        Ok(compose(&invert(&s.pose), &t.pose))
    }

    /// Nearest surface hit along the ray through pixel `(u, v)`; returns the
    /// camera-frame depth and the world point.
    pub fn cast(&self, cam: &SceneCamera, u: f64, v: f64) -> Result<(f64, Vector3<f64>)> {
        let ray_cam = cam.intrinsics.back_project(u, v);
        let origin = cam.pose.translation;
        let dir = cam.pose.rotation * ray_cam;
        let mut best: Option<f64> = None;
        for p in &self.planes {
            let denom = p.normal.dot(&dir);
            if denom <= 0.0 {
                continue;
            }
            let s = (p.offset - p.normal.dot(&origin)) / denom;
            if s > 0.0 && best.is_none_or(|b| s < b) {
                best = Some(s);
            }
        }
        // the camera-frame ray has unit z, so the ray parameter is the depth
        let s = best.ok_or(Error::RayMiss { u, v })?;
        Ok((s, origin + dir * s))
    }

    /// Renders camera `index`: exact texture samples and true depth per pixel.
    pub fn render_view(&self, index: usize) -> Result<(ImageBuffer, DepthMap)> {
        let cam = self.camera(index)?;
        let mut intensity = Vec::with_capacity(cam.width * cam.height);
        let mut depth = Vec::with_capacity(cam.width * cam.height);
        for y in 0..cam.height {
            for x in 0..cam.width {
                let (d, world) = self.cast(cam, x as f64, y as f64)?;
                intensity.push(self.texture.value(&world).clamp(0.0, 1.0));
                depth.push(d);
            }
        }
        Ok((ImageBuffer::new(cam.width, cam.height, 1, intensity)?, DepthMap::new(cam.width, cam.height, depth)?))
    }

    pub fn view(&self, index: usize) -> Result<View> {
        let (image, _) = self.render_view(index)?;
        Ok(View::new(image, self.camera(index)?.intrinsics))
    }

    /// `n` seeded random pixels of view `from` (`p`) projected exactly into
    /// view `to` (`q`).
    pub fn make_matches(&self, from: usize, to: usize, n: usize, seed: u64) -> Result<MatchSet> {
        let src = self.camera(from)?;
        let dst = self.camera(to)?;
        let motion = compose(&invert(&dst.pose), &src.pose);
        let mut rng = seeded(seed);
        let mut out = Vec::with_capacity(n);
        let attempts = 50 * n.max(1);
        for _ in 0..attempts {
            if out.len() == n {
                break;
            }
            let p = Vector2::new(rng.random_range(0.0..=(src.width - 1) as f64), rng.random_range(0.0..=(src.height - 1) as f64));
            let (d, _) = self.cast(src, p.x, p.y)?;
            let x = motion.transform_point(&(src.intrinsics.back_project(p.x, p.y) * d));
            if x.z <= 0.0 {
                continue;
            }
            let q = dst.intrinsics.project(&x);
            if dst.contains(&q) {
                out.push(Match::new(p, q));
            }
        }
        if out.len() < n {
            return Err(Error::InsufficientOverlap { needed: n, got: out.len() });
        }
        Ok(MatchSet::new(out, (src.width, src.height), (dst.width, dst.height)))
    }
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotates `pose` by exactly `rot_deg` degrees about a random axis and tilts its
/// translation direction so the unit-vector chord error equals `trans_frac`,
/// preserving the translation magnitude.
pub fn perturb_pose(pose: &RigidMotion, rot_deg: f64, trans_frac: f64, seed: u64) -> Result<RigidMotion> {
    if !(rot_deg >= 0.0) || !(trans_frac >= 0.0) || trans_frac > 2.0 {
        return Err(Error::InvalidValue(format!(
            "perturbation needs rot_deg >= 0 and trans_frac in [0, 2], got {rot_deg}, {trans_frac}"
        )));
    }
    let mut rng = seeded(seed);
    let axis = random_unit(&mut rng);
    let rotation = axis_angle(&axis, rot_deg.to_radians()) * pose.rotation;

    let t = pose.translation;
    let translation = if t.norm() > 0.0 && trans_frac > 0.0 {
        let dir = t.normalize();
        let perp = loop {
            let r = random_unit(&mut rng);
            let p = r - dir * dir.dot(&r);
            if p.norm() > 1e-3 {
                break p.normalize();
            }
        };
        let tilt = 2.0 * (trans_frac / 2.0).asin();
        axis_angle(&dir.cross(&perp), tilt) * t
    } else {
        t
    };
    Ok(RigidMotion { rotation, translation })
}
