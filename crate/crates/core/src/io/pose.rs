use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::{fmt17, parse_f64, parse_usize};
use crate::error::{Error, Result};
use crate::evaluation::{Snippet, Trajectory};
use crate::geometry::{rotation_drift, CameraIntrinsics, RigidMotion};

/// Rotations drifting more than this from orthonormal are rejected on read.
pub const ORTHONORMALIZE_TOL: f64 = 1e-6;
/// Below this drift a rotation is kept exactly as written.
const EXACT_TOL: f64 = 1e-9;

fn parse_pose_line(text: &str, line: usize) -> Result<RigidMotion> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != 12 {
        return Err(Error::MalformedLine { line, reason: format!("expected 12 numbers, found {}", tokens.len()) });
    }
    let v = tokens.iter().map(|t| parse_f64(t, line)).collect::<Result<Vec<_>>>()?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::MalformedLine { line, reason: "non-finite value".into() });
    }
    let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
    let t = Vector3::new(v[3], v[7], v[11]);
    let drift = rotation_drift(&r);
    if drift <= EXACT_TOL {
        Ok(RigidMotion::from_parts_unchecked(r, t))
    } else if drift <= ORTHONORMALIZE_TOL {
        Ok(RigidMotion::from_parts_unchecked(orthonormalize(&r), t))
    } else {
        Err(Error::InvalidRotation { line, drift })
    }
}

/// Nearest rotation in the Frobenius sense.
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut fix = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    u * fix * v_t
}

fn format_pose_line(out: &mut String, p: &RigidMotion) {
    let (r, t) = (&p.rotation, &p.translation);
    let row = |i: usize| [r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]];
    let vals: Vec<String> = (0..3).flat_map(row).map(fmt17).collect();
    out.push_str(&vals.join(" "));
    out.push('\n');
}

/// KITTI odometry poses: one row-major 3×4 camera-to-world matrix per line.
/// Frames are numbered from zero in file order; blank lines are skipped.
pub fn parse_poses(text: &str) -> Result<Trajectory> {
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        poses.push(parse_pose_line(line, i + 1)?);
    }
    Ok(Trajectory::from_poses(poses))
}

pub fn format_poses(traj: &Trajectory) -> String {
    let mut out = String::new();
    for p in traj.poses() {
        format_pose_line(&mut out, p);
    }
    out
}

pub fn read_pose_file(path: impl AsRef<Path>) -> Result<Trajectory> {
    parse_poses(&std::fs::read_to_string(path)?)
}

pub fn write_pose_file(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    Ok(std::fs::write(path, format_poses(traj))?)
}

/// Snippet blocks: a `SNIPPET <anchor> <n>` line followed by `n` pose lines
/// holding each frame's pose relative to the anchor.
pub fn parse_snippets(text: &str) -> Result<Vec<Snippet>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    while let Some((i, header)) = lines.next() {
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 3 || tokens[0] != "SNIPPET" {
            return Err(Error::HeaderMismatch(format!("line {}: expected \"SNIPPET <anchor> <n>\"", i + 1)));
        }
        let anchor = parse_usize(tokens[1], "anchor")?;
        let n = parse_usize(tokens[2], "snippet size")?;
        let mut motions = Vec::with_capacity(n);
        for _ in 0..n {
            let (j, line) = lines.next().ok_or(Error::CountMismatch { expected: n, found: motions.len() })?;
            if line.trim_start().starts_with("SNIPPET") {
                return Err(Error::CountMismatch { expected: n, found: motions.len() });
            }
            motions.push(parse_pose_line(line, j + 1)?);
        }
        out.push(Snippet::new(anchor, motions)?);
    }
    Ok(out)
}

pub fn format_snippets(snippets: &[Snippet]) -> String {
    let mut out = String::new();
    for s in snippets {
        let _ = writeln!(out, "SNIPPET {} {}", s.anchor, s.len());
        for m in &s.motions {
            format_pose_line(&mut out, m);
        }
    }
    out
}

pub fn read_snippet_file(path: impl AsRef<Path>) -> Result<Vec<Snippet>> {
    parse_snippets(&std::fs::read_to_string(path)?)
}

pub fn write_snippet_file(path: impl AsRef<Path>, snippets: &[Snippet]) -> Result<()> {
    Ok(std::fs::write(path, format_snippets(snippets))?)
}

/// One line `fx fy cx cy [skew]`.
pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics> {
    let (i, line) = text
        .lines()
        .enumerate()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or(Error::MalformedLine { line: 1, reason: "empty intrinsics file".into() })?;
    let v = line.split_whitespace().map(|t| parse_f64(t, i + 1)).collect::<Result<Vec<_>>>()?;
    match v.as_slice() {
        [fx, fy, cx, cy] => CameraIntrinsics::new(*fx, *fy, *cx, *cy),
        [fx, fy, cx, cy, s] => CameraIntrinsics::with_skew(*fx, *fy, *cx, *cy, *s),
        _ => Err(Error::MalformedLine { line: i + 1, reason: format!("expected 4 or 5 numbers, found {}", v.len()) }),
    }
}

pub fn format_intrinsics(k: &CameraIntrinsics) -> String {
    format!("{} {} {} {} {}\n", fmt17(k.fx), fmt17(k.fy), fmt17(k.cx), fmt17(k.cy), fmt17(k.skew))
}

pub fn read_intrinsics_file(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    parse_intrinsics(&std::fs::read_to_string(path)?)
}

pub fn write_intrinsics_file(path: impl AsRef<Path>, k: &CameraIntrinsics) -> Result<()> {
    Ok(std::fs::write(path, format_intrinsics(k))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::axis_angle;

    #[test]
    fn identity_line() {
        let t = parse_poses("1 0 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        assert_eq!(t.poses(), &[RigidMotion::identity()]);
    }

    #[test]
    fn wrong_token_count() {
        assert!(matches!(parse_poses("1 0 0 0 0 1 0 0 0 0 1"), Err(Error::MalformedLine { line: 1, .. })));
        assert!(matches!(parse_poses("1 0 0 0 0 1 0 0 0 0 1 x"), Err(Error::MalformedLine { .. })));
    }

    #[test]
    fn slightly_drifted_rotation_is_repaired() {
        let r = axis_angle(&Vector3::new(0.2, 1.0, -0.3), 0.8) * 1.000_000_2;
        let mut text = String::new();
        format_pose_line(&mut text, &RigidMotion::from_parts_unchecked(r, Vector3::zeros()));
        let back = parse_poses(&text).unwrap();
        assert!(rotation_drift(&back.poses()[0].rotation) < 1e-12);
        let bad = axis_angle(&Vector3::z(), 0.1) * 1.001;
        let mut text = String::new();
        format_pose_line(&mut text, &RigidMotion::from_parts_unchecked(bad, Vector3::zeros()));
        assert!(matches!(parse_poses(&text), Err(Error::InvalidRotation { line: 1, .. })));
    }

    #[test]
    fn snippet_count_mismatch() {
        let text = "SNIPPET 0 3\n1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 0 0 1 0 0 0 0 1 0\n";
        assert!(matches!(parse_snippets(text), Err(Error::CountMismatch { expected: 3, found: 2 })));
    }

    #[test]
    fn intrinsics_round_trip() {
        let k = CameraIntrinsics::with_skew(718.856, 718.857, 607.1928, 185.2157, 0.25).unwrap();
        assert_eq!(parse_intrinsics(&format_intrinsics(&k)).unwrap(), k);
        assert_eq!(parse_intrinsics("10 10 5 5").unwrap().skew, 0.0);
    }
}
