use std::fmt::Write as _;

use geovo::nalgebra::Vector3;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// Top-down (x, z) overlay of ground truth and aligned prediction.
pub fn trajectory_overlay(gt: &[Vector3<f64>], pred: &[Vector3<f64>]) -> String {
    let all = gt.iter().chain(pred);
    let (mut x0, mut x1, mut z0, mut z1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        z0 = z0.min(p.z);
        z1 = z1.max(p.z);
    }
    let span = (x1 - x0).max(z1 - z0).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let to_px = |p: &Vector3<f64>| (MARGIN + (p.x - x0) * scale, SIZE - MARGIN - (p.z - z0) * scale);

    let polyline = |pts: &[Vector3<f64>], colour: &str| {
        let coords: Vec<String> = pts
            .iter()
            .map(|p| {
                let (u, v) = to_px(p);
                format!("{u:.3},{v:.3}")
            })
            .collect();
        format!("  <polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>\n", coords.join(" "))
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    );
    out.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&polyline(gt, "black"));
    out.push_str(&polyline(pred, "red"));
    out.push_str("  <text x=\"10\" y=\"16\" font-size=\"12\" fill=\"black\">ground truth</text>\n");
    out.push_str("  <text x=\"10\" y=\"32\" font-size=\"12\" fill=\"red\">prediction (aligned)</text>\n");
    out.push_str("</svg>\n");
    out
}
