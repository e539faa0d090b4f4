//! Shared fixtures for the criterion benchmarks.

use geovo::synth::{SceneSpec, SyntheticScene};
use geovo::{DepthMap, MatchSet, RigidMotion, View};

/// A rendered two-view scene with ground-truth motion and matches.
pub struct Fixture {
    pub target: View,
    pub source: View,
    pub depth: DepthMap,
    pub motion: RigidMotion,
    pub matches: MatchSet,
}

impl Fixture {
    pub fn new(width: usize, height: usize, seed: u64) -> Self {
        let spec = SceneSpec { width, height, focal: width as f64 * 50.0 / 64.0, ..SceneSpec::default() };
        let scene = SyntheticScene::generate(&spec, seed).expect("scene");
        let (_, depth) = scene.render_view(0).expect("render");
        Self {
            target: scene.view(0).expect("target"),
            source: scene.view(1).expect("source"),
            depth,
            motion: scene.relative_motion(0, 1).expect("motion"),
            matches: scene.make_matches(1, 0, 100, seed).expect("matches"),
        }
    }
}
