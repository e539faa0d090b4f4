use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::SnippetStride;
use crate::image_loss::{GeoReduction, LossWeights};
use crate::matching::RansacParams;
use crate::refine::RefineConfig;

/// Every run setting, stored as `key = value` lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub weights: LossWeights,
    pub refine: RefineConfig,
    pub ransac: RansacParams,
    /// Depth evaluation cap, meters.
    pub depth_cap: f64,
    pub median_scaling: bool,
    pub snippet_size: usize,
    pub snippet_stride: SnippetStride,
    /// Matches sampled from the RANSAC inliers for the geometric loss.
    pub match_samples: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            refine: RefineConfig::default(),
            ransac: RansacParams::default(),
            depth_cap: 80.0,
            median_scaling: true,
            snippet_size: 5,
            snippet_stride: SnippetStride::EveryFrame,
            match_samples: 100,
            seed: 0,
        }
    }
}

/// Keys in canonical order.
pub const CONFIG_KEYS: [&str; 28] = [
    "alpha",
    "w_s",
    "w_g",
    "w_p",
    "w_r",
    "w_t",
    "p_m",
    "geo_reduction",
    "max_iters",
    "step",
    "backtrack",
    "grad_eps",
    "tol",
    "optimize_depth",
    "alternations",
    "fix_translation_norm",
    "ransac_iterations",
    "ransac_threshold",
    "ransac_seed",
    "ransac_min_inliers",
    "depth_cap",
    "median_scaling",
    "snippet_size",
    "snippet_stride",
    "match_samples",
    "seed",
    "preset",
    "version",
];

fn bad(key: &str, value: &str, expect: &str) -> Error {
    Error::ConfigError(format!("{key}: {value:?} is not {expect}"))
}

fn float(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| bad(key, v, "a number"))?;
    if !x.is_finite() {
        return Err(bad(key, v, "a finite number"));
    }
    Ok(x)
}

fn uint<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, v, "true or false")),
    }
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
    /// keys are errors. A `preset` line (baseline, pairwise_matching,
    /// prior_weak_pose) must come before individual weights.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::ConfigError(format!("line {}: expected key = value", i + 1)))?;
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::ConfigError(format!("line {}: unknown key {key:?}", i + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::ConfigError(format!("line {}: duplicate key {key:?}", i + 1)));
            }
            cfg.set(key, value, &seen)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str, seen: &HashSet<String>) -> Result<()> {
        let w = &mut self.weights;
        let r = &mut self.refine;
        match key {
            "version" => {
                if v != "1" {
                    return Err(bad(key, v, "1"));
                }
            }
            "preset" => {
                if seen.len() > 1 + usize::from(seen.contains("version")) {
                    return Err(Error::ConfigError("preset must precede every other key".into()));
                }
                *w = match v {
                    "baseline" => LossWeights::baseline(),
                    "pairwise_matching" => LossWeights::pairwise_matching(),
                    "prior_weak_pose" => LossWeights::prior_weak_pose(),
                    _ => return Err(bad(key, v, "baseline, pairwise_matching or prior_weak_pose")),
                };
            }
            "alpha" => w.alpha = float(key, v)?,
            "w_s" => w.w_s = float(key, v)?,
            "w_g" => w.w_g = float(key, v)?,
            "w_p" => w.w_p = float(key, v)?,
            "w_r" => w.w_r = float(key, v)?,
            "w_t" => w.w_t = float(key, v)?,
            "p_m" => w.p_m = float(key, v)?,
            "geo_reduction" => {
                w.geo_reduction = match v {
                    "sum" => GeoReduction::Sum,
                    "mean" => GeoReduction::Mean,
                    _ => return Err(bad(key, v, "sum or mean")),
                }
            }
            "max_iters" => r.max_iters = uint(key, v)?,
            "step" => r.step = float(key, v)?,
            "backtrack" => r.backtrack = float(key, v)?,
            "grad_eps" => r.grad_eps = float(key, v)?,
            "tol" => r.tol = float(key, v)?,
            "optimize_depth" => r.optimize_depth = flag(key, v)?,
            "alternations" => r.alternations = uint(key, v)?,
            "fix_translation_norm" => r.fix_translation_norm = flag(key, v)?,
            "ransac_iterations" => self.ransac.iterations = uint(key, v)?,
            "ransac_threshold" => self.ransac.threshold = float(key, v)?,
            "ransac_seed" => self.ransac.seed = uint(key, v)?,
            "ransac_min_inliers" => self.ransac.min_inliers = uint(key, v)?,
            "depth_cap" => self.depth_cap = float(key, v)?,
            "median_scaling" => self.median_scaling = flag(key, v)?,
            "snippet_size" => self.snippet_size = uint(key, v)?,
            "snippet_stride" => {
                self.snippet_stride = match v {
                    "every" => SnippetStride::EveryFrame,
                    "disjoint" => SnippetStride::Disjoint,
                    _ => return Err(bad(key, v, "every or disjoint")),
                }
            }
            "match_samples" => self.match_samples = uint(key, v)?,
            "seed" => self.seed = uint(key, v)?,
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.refine.validate()?;
        self.ransac.validate()?;
        if !(self.depth_cap > 0.0) {
            return Err(Error::ConfigError(format!("depth_cap must be positive, got {}", self.depth_cap)));
        }
        if self.snippet_size < 2 {
            return Err(Error::ConfigError(format!("snippet_size must be at least 2, got {}", self.snippet_size)));
        }
        Ok(())
    }

    /// Canonical text: every key except `preset`, in [`CONFIG_KEYS`] order,
    /// floats in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let w = &self.weights;
        let r = &self.refine;
        let mut out = String::from("version = 1\n");
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("alpha", format!("{:?}", w.alpha));
        put("w_s", format!("{:?}", w.w_s));
        put("w_g", format!("{:?}", w.w_g));
        put("w_p", format!("{:?}", w.w_p));
        put("w_r", format!("{:?}", w.w_r));
        put("w_t", format!("{:?}", w.w_t));
        put("p_m", format!("{:?}", w.p_m));
        put(
            "geo_reduction",
            match w.geo_reduction {
                GeoReduction::Sum => "sum".into(),
                GeoReduction::Mean => "mean".into(),
            },
        );
        put("max_iters", r.max_iters.to_string());
        put("step", format!("{:?}", r.step));
        put("backtrack", format!("{:?}", r.backtrack));
        put("grad_eps", format!("{:?}", r.grad_eps));
        put("tol", format!("{:?}", r.tol));
        put("optimize_depth", r.optimize_depth.to_string());
        put("alternations", r.alternations.to_string());
        put("fix_translation_norm", r.fix_translation_norm.to_string());
        put("ransac_iterations", self.ransac.iterations.to_string());
        put("ransac_threshold", format!("{:?}", self.ransac.threshold));
        put("ransac_seed", self.ransac.seed.to_string());
        put("ransac_min_inliers", self.ransac.min_inliers.to_string());
        put("depth_cap", format!("{:?}", self.depth_cap));
        put("median_scaling", self.median_scaling.to_string());
        put("snippet_size", self.snippet_size.to_string());
        put(
            "snippet_stride",
            match self.snippet_stride {
                SnippetStride::EveryFrame => "every".into(),
                SnippetStride::Disjoint => "disjoint".into(),
            },
        );
        put("match_samples", self.match_samples.to_string());
        put("seed", self.seed.to_string());
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_text())?)
    }
}
