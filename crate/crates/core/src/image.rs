//! Dense per-pixel grids: intensity images, depth maps and binary masks.
//!
//! All grids are row-major with the center of the top-left pixel at (0, 0).

use crate::error::{Error, Result};

/// Intensities in [0, 1], channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidValue(format!("images have 1 or 3 channels, got {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidValue("image must be nonempty".into()));
        }
        check_len(width * height * channels, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidValue(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel image from a function of pixel coordinates.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    /// Zero image used as a scratch target; not subject to validation.
    pub(crate) fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Single-channel plane `c` as a contiguous vector.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }
}

/// Per-pixel depth in meters. Zero marks a missing ground-truth sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    /// Accepts finite non-negative values; use [`DepthMap::validate_prediction`]
    /// where zeros are not allowed.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidValue("depth map must be nonempty".into()));
        }
        check_len(width * height, data.len())?;
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NonPositiveValue { index, value });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Predictions must be strictly positive everywhere.
    pub fn validate_prediction(&self) -> Result<()> {
        match self.data.iter().enumerate().find(|(_, v)| **v <= 0.0) {
            Some((index, &value)) => Err(Error::NonPositiveValue { index, value }),
            None => Ok(()),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_len(width * height, data.len())?;
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch("mask sizes differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect();
        Ok(BinaryMask { width: self.width, height: self.height, data })
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch(format!("expected {expected} values, got {found}")));
    }
    Ok(())
}
