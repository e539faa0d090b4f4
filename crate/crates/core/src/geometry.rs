//! Camera models, rigid-motion algebra, reprojection and epipolar quantities.
//!
//! Motion convention: a [`RigidMotion`] passed to [`project_pixel`],
//! [`fundamental_from_pose`] or the warping code maps points expressed in the
//! *target* camera (image 2) into the *source* camera (image 1):
//! `X_src = R * X_tgt + t`. Absolute poses (trajectories, synthetic cameras)
//! map camera coordinates to world coordinates.

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::matching::MatchSet;

/// Minimum source-frame depth for a projection to count as in front of the camera.
pub const BEHIND_CAMERA_EPS: f64 = 1e-6;
/// Translation norms at or below this value carry no epipolar geometry.
pub const DEGENERATE_TRANSLATION_EPS: f64 = 1e-9;
const GIMBAL_LOCK_EPS: f64 = 1e-6;
const DEGENERATE_LINE_EPS: f64 = 1e-12;

/// Pinhole intrinsics with optional skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::with_skew(fx, fy, cx, cy, 0.0)
    }

    pub fn with_skew(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64) -> Result<Self> {
        let all_finite = [fx, fy, cx, cy, skew].iter().all(|v| v.is_finite());
        if !all_finite || fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidValue(format!(
                "intrinsics need finite values and positive focal lengths, got fx={fx} fy={fy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, skew })
    }

    pub fn identity() -> Self {
        Self { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, skew: 0.0 }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Closed-form inverse of the upper-triangular calibration matrix.
    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let (fx, fy, s, cx, cy) = (self.fx, self.fy, self.skew, self.cx, self.cy);
        Matrix3::new(1.0 / fx, -s / (fx * fy), (s * cy - cx * fy) / (fx * fy), 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0)
    }

    /// Ray direction (z = 1) through a pixel.
    pub fn back_project(&self, u: f64, v: f64) -> Vector3<f64> {
        let y = (v - self.cy) / self.fy;
        let x = (u - self.cx - self.skew * y) / self.fx;
        Vector3::new(x, y, 1.0)
    }

    pub fn project(&self, p: &Vector3<f64>) -> Vector2<f64> {
        let x = p.x / p.z;
        let y = p.y / p.z;
        Vector2::new(self.fx * x + self.skew * y + self.cx, self.fy * y + self.cy)
    }
}

/// A proper rigid transform (rotation followed by translation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidMotion {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidMotion {
    const ORTHONORMAL_TOL: f64 = 1e-9;

    /// Builds a motion, rejecting rotations that are not orthonormal with det 1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let drift = rotation_drift(&rotation);
        if !(drift <= Self::ORTHONORMAL_TOL) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidValue(format!("rotation is not orthonormal (drift {drift:e}) or translation not finite")));
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation: t }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Geodesic angle (radians) of the rotation part.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }
}

/// Max-abs deviation of `RᵀR` from identity, or infinity if det(R) is not positive.
pub fn rotation_drift(r: &Matrix3<f64>) -> f64 {
    if !r.iter().all(|v| v.is_finite()) || r.determinant() <= 0.0 {
        return f64::INFINITY;
    }
    let d = r.transpose() * r - Matrix3::identity();
    d.amax()
}

/// Angle of a rotation matrix, robust near 0 and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin2 = skew.norm();
    let cos2 = r.trace() - 1.0;
    sin2.atan2(cos2)
}

/// Rotation of `angle` radians about `axis` (need not be unit length).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.norm();
    if n == 0.0 || angle == 0.0 {
        return Matrix3::identity();
    }
    let k = axis / n;
    let kx = cross_matrix(&k);
    Matrix3::identity() + kx * angle.sin() + kx * kx * (1.0 - angle.cos())
}

/// Skew-symmetric matrix `[v]ₓ` with `[v]ₓ w = v × w`.
pub fn cross_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Euler-angle pose: `r = (roll, pitch, yaw)` applied as intrinsic X, then Y, then Z,
/// i.e. `R = Rx(roll) · Ry(pitch) · Rz(yaw)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerPose {
    pub r: Vector3<f64>,
    pub t: Vector3<f64>,
}

impl EulerPose {
    pub fn new(r: Vector3<f64>, t: Vector3<f64>) -> Self {
        Self { r, t }
    }

    pub fn to_motion(&self) -> RigidMotion {
        RigidMotion { rotation: euler_to_matrix(&self.r), translation: self.t }
    }

    pub fn from_motion(m: &RigidMotion) -> Result<Self> {
        Ok(Self { r: matrix_to_euler(&m.rotation)?, t: m.translation })
    }

    /// Same rotation, translation scaled to unit length.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.t.norm();
        if n <= DEGENERATE_TRANSLATION_EPS {
            return Err(Error::DegenerateTranslation { norm: n });
        }
        Ok(Self { r: self.r, t: self.t / n })
    }

    pub fn to_params(&self) -> [f64; 6] {
        [self.r.x, self.r.y, self.r.z, self.t.x, self.t.y, self.t.z]
    }

    pub fn from_params(p: &[f64]) -> Self {
        Self { r: Vector3::new(p[0], p[1], p[2]), t: Vector3::new(p[3], p[4], p[5]) }
    }
}

pub fn euler_to_matrix(r: &Vector3<f64>) -> Matrix3<f64> {
    let (sa, ca) = r.x.sin_cos();
    let (sb, cb) = r.y.sin_cos();
    let (sc, cc) = r.z.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, ca, -sa, 0.0, sa, ca);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rz = Matrix3::new(cc, -sc, 0.0, sc, cc, 0.0, 0.0, 0.0, 1.0);
    rx * ry * rz
}

/// Inverse of [`euler_to_matrix`]; angles land in (−π, π].
pub fn matrix_to_euler(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    // R[0][2] = sin(pitch)
    let pitch = r[(0, 2)].clamp(-1.0, 1.0).asin();
    if (pitch.abs() - std::f64::consts::FRAC_PI_2).abs() <= GIMBAL_LOCK_EPS {
        return Err(Error::GimbalLock { pitch });
    }
    let roll = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let yaw = (-r[(0, 1)]).atan2(r[(0, 0)]);
    Ok(Vector3::new(wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw)))
}

fn wrap_angle(a: f64) -> f64 {
    if a <= -std::f64::consts::PI {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

/// Applies `b` first, then `a`.
pub fn compose(a: &RigidMotion, b: &RigidMotion) -> RigidMotion {
    RigidMotion { rotation: a.rotation * b.rotation, translation: a.rotation * b.translation + a.translation }
}

pub fn invert(p: &RigidMotion) -> RigidMotion {
    let rt = p.rotation.transpose();
    RigidMotion { rotation: rt, translation: -(rt * p.translation) }
}

/// `P₁ · P₂⁻¹` for absolute world-to-camera poses: the motion that maps frame-2
/// camera coordinates into frame-1 camera coordinates.
pub fn relative_from_absolute(p1: &RigidMotion, p2: &RigidMotion) -> RigidMotion {
    compose(p1, &invert(p2))
}

/// Result of projecting a target pixel into the source view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    /// Depth of the point in the source camera, before dehomogenization.
    pub depth: f64,
}

/// Maps pixel `p2` (homogeneous, third component 1) with depth `depth` in the
/// target view through `motion` into the source view: `K₁ (R · d K₂⁻¹ p₂ + t)`.
pub fn project_pixel(
    p2: &Vector3<f64>,
    depth: f64,
    k2: &CameraIntrinsics,
    k1: &CameraIntrinsics,
    motion: &RigidMotion,
) -> Result<Projection> {
    let ray = k2.back_project(p2.x / p2.z, p2.y / p2.z);
    let point = motion.transform_point(&(ray * depth));
    if !(point.z > BEHIND_CAMERA_EPS) {
        return Err(Error::BehindCamera { z: point.z });
    }
    Ok(Projection { pixel: k1.project(&point), depth: point.z })
}

/// Rank-2 matrix with `qᵀ F p = 0` for `p` in image 1 and `q` in image 2.
///
/// Stored with unit Frobenius norm and its largest-magnitude entry positive, so
/// two estimates of the same geometry compare entry-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    m: Matrix3<f64>,
}

impl FundamentalMatrix {
    /// Canonicalizes `m` (unit norm, sign). Rank is not enforced here.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let n = m.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidValue("fundamental matrix must be finite and nonzero".into()));
        }
        let mut m = m / n;
        let mut best = 0;
        for i in 1..9 {
            if m[i].abs() > m[best].abs() {
                best = i;
            }
        }
        if m[best] < 0.0 {
            m = -m;
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn transpose(&self) -> Self {
        Self { m: self.m.transpose() }
    }

    /// `min(‖F₁ − F₂‖, ‖F₁ + F₂‖)`, the distance between canonical forms.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.m - other.m).norm().min((self.m + other.m).norm())
    }
}

/// `F = K₂⁻ᵀ Rᵀ [t]ₓ K₁⁻¹` for a motion mapping image-2 camera coordinates to
/// image-1 camera coordinates.
pub fn fundamental_from_pose(k1: &CameraIntrinsics, k2: &CameraIntrinsics, motion: &RigidMotion) -> Result<FundamentalMatrix> {
    let norm = motion.translation.norm();
    if !(norm > DEGENERATE_TRANSLATION_EPS) {
        return Err(Error::DegenerateTranslation { norm });
    }
    let essential = motion.rotation.transpose() * cross_matrix(&motion.translation);
    let f = k2.inverse_matrix().transpose() * essential * k1.inverse_matrix();
    FundamentalMatrix::from_matrix(f)
}

/// Line `a x + b y + c = 0` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpipolarLine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl EpipolarLine {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if a.abs() <= DEGENERATE_LINE_EPS && b.abs() <= DEGENERATE_LINE_EPS {
            return Err(Error::DegenerateLine);
        }
        Ok(Self { a, b, c })
    }
}

/// Epipolar line `F p` in image 2 of point `p` (homogeneous) in image 1.
pub fn epipolar_line(f: &FundamentalMatrix, p: &Vector3<f64>) -> Result<EpipolarLine> {
    let l = f.matrix() * p;
    EpipolarLine::new(l.x, l.y, l.z)
}

pub fn point_line_distance(l: &EpipolarLine, q: &Vector2<f64>) -> f64 {
    (l.a * q.x + l.b * q.y + l.c).abs() / l.a.hypot(l.b)
}

/// Outcome of [`geometric_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricLoss {
    /// Sum of point-to-epipolar-line distances in image 2, pixels.
    pub sum: f64,
    /// Matches that contributed.
    pub used: usize,
    /// Matches skipped because `p` is the epipole.
    pub skipped: usize,
}

impl GeometricLoss {
    pub fn mean(&self) -> f64 {
        if self.used == 0 {
            0.0
        } else {
            self.sum / self.used as f64
        }
    }
}

/// Sum over matches of the distance from `q` to the epipolar line of `p`.
pub fn geometric_loss(f: &FundamentalMatrix, matches: &MatchSet) -> Result<GeometricLoss> {
    if matches.is_empty() {
        return Err(Error::EmptyMatchSet);
    }
    let mut out = GeometricLoss { sum: 0.0, used: 0, skipped: 0 };
    for m in matches.iter() {
        match epipolar_line(f, &m.p.push(1.0)) {
            Ok(line) => {
                out.sum += point_line_distance(&line, &m.q);
                out.used += 1;
            }
            Err(Error::DegenerateLine) => out.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_motion(rng: &mut impl Rng) -> RigidMotion {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let t = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        RigidMotion::new(axis_angle(&axis, rng.random_range(-PI..PI)), t).unwrap()
    }

    fn assert_motion_eq(a: &RigidMotion, b: &RigidMotion, tol: f64) {
        assert!((a.rotation - b.rotation).amax() <= tol, "{a:?} vs {b:?}");
        assert!((a.translation - b.translation).amax() <= tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn euler_zero_and_quarter_turn() {
        assert_eq!(euler_to_matrix(&Vector3::zeros()), Matrix3::identity());
        let r = euler_to_matrix(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let x = r * Vector3::x();
        assert_relative_eq!(x, Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn euler_round_trip() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for _ in 0..500 {
            let r = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let back = matrix_to_euler(&euler_to_matrix(&r)).unwrap();
            assert!((back - r).amax() <= 1e-10, "{r:?} -> {back:?}");
        }
    }

    #[test]
    fn euler_gimbal_lock() {
        let r = euler_to_matrix(&Vector3::new(0.3, FRAC_PI_2, -0.2));
        assert!(matches!(matrix_to_euler(&r), Err(Error::GimbalLock { .. })));
    }

    #[test]
    fn euler_angles_stay_in_half_open_range() {
        let r = euler_to_matrix(&Vector3::new(PI, 0.0, PI));
        let e = matrix_to_euler(&r).unwrap();
        for a in e.iter() {
            assert!(*a > -PI && *a <= PI);
        }
    }

    #[test]
    fn compose_and_invert_laws() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        for _ in 0..100 {
            let p = random_motion(&mut rng);
            let q = random_motion(&mut rng);
            let c = random_motion(&mut rng);
            assert_motion_eq(&compose(&RigidMotion::identity(), &p), &p, 0.0);
            assert_motion_eq(&compose(&p, &invert(&p)), &RigidMotion::identity(), 1e-12);
            // 4x4 homogeneous product oracle
            let h = p.to_homogeneous() * q.to_homogeneous();
            assert!((compose(&p, &q).to_homogeneous() - h).amax() <= 1e-12);
            let left = compose(&p, &compose(&q, &c));
            let right = compose(&compose(&p, &q), &c);
            assert_motion_eq(&left, &right, 1e-10);
        }
    }

    #[test]
    fn invert_pure_translation() {
        let t = Vector3::new(1.0, -2.0, 3.0);
        let inv = invert(&RigidMotion::from_translation(t));
        assert_eq!(inv.rotation, Matrix3::identity());
        assert_eq!(inv.translation, -t);
        assert_eq!(invert(&RigidMotion::identity()), RigidMotion::identity());
    }

    #[test]
    fn relative_from_absolute_cases() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let p1 = random_motion(&mut rng);
        let p2 = random_motion(&mut rng);
        assert_motion_eq(&relative_from_absolute(&p1, &p1), &RigidMotion::identity(), 1e-12);
        assert_motion_eq(&relative_from_absolute(&p1, &RigidMotion::identity()), &p1, 0.0);
        assert_eq!(relative_from_absolute(&p1, &p2), compose(&p1, &invert(&p2)));
        // expanded form: (R1 R2ᵀ, T1 − R1 R2ᵀ T2)
        let r = p1.rotation * p2.rotation.transpose();
        let t = p1.translation - r * p2.translation;
        assert_motion_eq(&relative_from_absolute(&p1, &p2), &RigidMotion::from_parts_unchecked(r, t), 1e-12);
    }

    #[test]
    fn project_pixel_hand_example() {
        let k = CameraIntrinsics::identity();
        let m = RigidMotion::from_translation(Vector3::new(1.0, 0.0, 0.0));
        let pr = project_pixel(&Vector3::new(1.0, 1.0, 1.0), 2.0, &k, &k, &m).unwrap();
        assert_relative_eq!(pr.pixel, Vector2::new(1.5, 1.0), epsilon = 1e-15);
        assert_eq!(pr.depth, 2.0);
    }

    #[test]
    fn project_pixel_identity_and_behind() {
        let k = CameraIntrinsics::new(500.0, 480.0, 320.0, 240.0).unwrap();
        for d in [0.1, 1.0, 57.0] {
            let pr = project_pixel(&Vector3::new(12.25, 400.5, 1.0), d, &k, &k, &RigidMotion::identity()).unwrap();
            assert_relative_eq!(pr.pixel, Vector2::new(12.25, 400.5), epsilon = 1e-10);
        }
        let back = RigidMotion::from_translation(Vector3::new(0.0, 0.0, -2.0));
        let r = project_pixel(&Vector3::new(0.0, 0.0, 1.0), 2.0, &k, &k, &back);
        assert!(matches!(r, Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn intrinsics_inverse_with_skew() {
        let k = CameraIntrinsics::with_skew(400.0, 380.0, 300.0, 200.0, 2.5).unwrap();
        assert!((k.matrix() * k.inverse_matrix() - Matrix3::identity()).amax() < 1e-14);
        let ray = k.back_project(123.0, 77.0);
        assert_relative_eq!(k.project(&(ray * 3.0)), Vector2::new(123.0, 77.0), epsilon = 1e-10);
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn fundamental_pure_translation() {
        let k = CameraIntrinsics::identity();
        let f = fundamental_from_pose(&k, &k, &RigidMotion::from_translation(Vector3::x())).unwrap();
        let expected = FundamentalMatrix::from_matrix(Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)).unwrap();
        assert!(f.distance(&expected) < 1e-15);
        let err = fundamental_from_pose(&k, &k, &RigidMotion::identity());
        assert!(matches!(err, Err(Error::DegenerateTranslation { .. })));
    }

    #[test]
    fn fundamental_satisfied_by_projected_points() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..50 {
            let k1 =
                CameraIntrinsics::with_skew(rng.random_range(200.0..600.0), rng.random_range(200.0..600.0), 320.0, 240.0, 0.5)
                    .unwrap();
            let k2 = CameraIntrinsics::new(rng.random_range(200.0..600.0), rng.random_range(200.0..600.0), 300.0, 200.0).unwrap();
            let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let m = RigidMotion::new(axis_angle(&axis, 0.1), Vector3::new(0.3, -0.1, 0.5)).unwrap();
            let f = fundamental_from_pose(&k1, &k2, &m).unwrap();
            for _ in 0..20 {
                let q = Vector3::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0), 1.0);
                let pr = project_pixel(&q, rng.random_range(2.0..30.0), &k2, &k1, &m).unwrap();
                let p = pr.pixel.push(1.0);
                let line = epipolar_line(&f, &p).unwrap();
                assert!(point_line_distance(&line, &q.xy()) < 1e-8);
            }
        }
    }

    #[test]
    fn epipolar_line_rectified_and_epipole() {
        let f = FundamentalMatrix::from_matrix(cross_matrix(&Vector3::x())).unwrap();
        let l = epipolar_line(&f, &Vector3::new(3.0, 7.0, 1.0)).unwrap();
        // canonical F is [x]ₓ/√2, so the line is (0, −1, 7) up to that scale
        assert_eq!(l.a, 0.0);
        assert_relative_eq!(l.c / l.b, -7.0, epsilon = 1e-14);
        assert!(l.b < 0.0);
        // epipole of [x]ₓ is (1, 0, 0), the point at infinity along x
        assert!(matches!(epipolar_line(&f, &Vector3::x()), Err(Error::DegenerateLine)));
        let m = Matrix3::new(0.1, 0.2, 0.3, -0.4, 0.5, 0.6, 0.7, -0.8, 0.9);
        let f = FundamentalMatrix::from_matrix(m).unwrap();
        let p = Vector3::new(2.0, -1.0, 1.0);
        let l = epipolar_line(&f, &p).unwrap();
        let direct = f.matrix() * p;
        assert_eq!(Vector3::new(l.a, l.b, l.c), direct);
    }

    #[test]
    fn point_line_distance_examples() {
        let l = EpipolarLine::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(point_line_distance(&l, &Vector2::new(3.0, 4.0)), 3.0);
        assert_eq!(point_line_distance(&l, &Vector2::new(0.0, 9.0)), 0.0);
        let l = EpipolarLine::new(3.0, 4.0, -5.0).unwrap();
        assert_relative_eq!(point_line_distance(&l, &Vector2::new(4.0, 3.0)), 3.8, epsilon = 1e-15);
        let scaled = EpipolarLine::new(-7.5, -10.0, 12.5).unwrap();
        assert_relative_eq!(point_line_distance(&scaled, &Vector2::new(4.0, 3.0)), 3.8, epsilon = 1e-15);
    }

    #[test]
    fn geometric_loss_offsets() {
        use crate::matching::Match;
        let f = FundamentalMatrix::from_matrix(cross_matrix(&Vector3::x())).unwrap();
        // rectified: the epipolar line of p is the row y = p.y; move q by 1 px vertically
        let matches: Vec<Match> = (0..7)
            .map(|i| Match::new(Vector2::new(i as f64, 2.0 * i as f64), Vector2::new(i as f64 + 5.0, 2.0 * i as f64 + 1.0)))
            .collect();
        let set = MatchSet::new(matches, (64, 64), (64, 64));
        let loss = geometric_loss(&f, &set).unwrap();
        assert_relative_eq!(loss.sum, 7.0, epsilon = 1e-12);
        assert_eq!(loss.used, 7);

        let single = MatchSet::new(vec![Match::new(Vector2::new(0.0, 0.0), Vector2::new(4.0, 3.0))], (8, 8), (8, 8));
        // F with F·(0,0,1) = (3,4,-5)
        let m = Matrix3::new(0.0, 0.0, 3.0, 0.0, 0.0, 4.0, 1.0, 1.0, -5.0);
        let f = FundamentalMatrix::from_matrix(m).unwrap();
        assert_relative_eq!(geometric_loss(&f, &single).unwrap().sum, 3.8, epsilon = 1e-12);

        let empty = MatchSet::new(vec![], (8, 8), (8, 8));
        assert!(matches!(geometric_loss(&f, &empty), Err(Error::EmptyMatchSet)));
    }
}
