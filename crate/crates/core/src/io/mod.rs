//! File formats and run configuration.
//!
//! Every writer here produces text or bytes that the matching reader turns
//! back into bit-identical values.

mod config;
mod depth;
mod matches;
mod pnm;
mod pose;

pub use config::{RunConfig, CONFIG_KEYS};
pub use depth::{decode_depth, encode_depth, read_depth_file, write_depth_file, DepthRole};
pub use matches::{format_matches, parse_matches, read_match_file, write_match_file};
pub use pnm::{decode_pnm, encode_pnm, read_image_file, write_image_file};
pub use pose::{
    format_intrinsics, format_poses, format_snippets, parse_intrinsics, parse_poses, parse_snippets, read_intrinsics_file,
    read_pose_file, read_snippet_file, write_intrinsics_file, write_pose_file, write_snippet_file, ORTHONORMALIZE_TOL,
};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::MalformedLine { line, reason: format!("{token:?} is not a number") })
}

fn parse_usize(token: &str, what: &str) -> Result<usize> {
    token.parse::<usize>().map_err(|_| Error::HeaderMismatch(format!("{what} {token:?} is not a count")))
}
