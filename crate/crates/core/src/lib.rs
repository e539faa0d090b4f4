//! Geometric and photometric supervision for self-supervised depth and
//! ego-motion: view synthesis losses, epipolar match losses, match
//! verification, a direct pose/depth refiner, synthetic oracle scenes and the
//! depth and visual-odometry evaluation protocol.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod image;
pub mod image_loss;
pub mod io;
pub mod matching;
pub mod refine;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use evaluation::{DepthMetrics, SimilarityTransform, Snippet, Trajectory};
pub use geometry::{CameraIntrinsics, EpipolarLine, EulerPose, FundamentalMatrix, RigidMotion};
pub use image::{BinaryMask, DepthMap, ImageBuffer};
pub use image_loss::{LossBreakdown, LossWeights, PixelMap, SourceFrame, View, WarpResult};
pub use io::RunConfig;
pub use matching::{Match, MatchSet, RansacParams};
pub use nalgebra;
pub use refine::{RefineConfig, RefineReport};
pub use synth::{SceneSpec, SyntheticScene};
