//! Grid types shared by every stage of the pipeline.
//!
//! All grids are row-major, `index = y * width + x`. Disparity-like grids mark
//! missing values with [`INVALID_DISPARITY`], which lies outside every valid
//! disparity range.

use crate::error::{Error, Result};

/// Sentinel stored in disparity and ground-truth grids for missing values.
pub const INVALID_DISPARITY: f64 = -1.0;

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "grid must be non-empty, got {width}x{height}"
        )));
    }
    if width * height != len {
        return Err(Error::Dimension(format!(
            "{width}x{height} grid needs {} values, got {len}",
            width * height
        )));
    }
    Ok(())
}

fn flip_rows<T: Clone>(width: usize, data: &[T]) -> Vec<T> {
    data.chunks(width)
        .flat_map(|row| row.iter().rev().cloned())
        .collect()
}

/// Single-channel intensity image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!(
                "image intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from arbitrary values, clamping them into `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(width, height, data)
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

    /// Replicated-border access.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Mirrors the image left to right.
    pub fn flip_h(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: flip_rows(self.width, &self.data),
        }
    }

    pub fn same_dims<T: GridDims>(&self, other: &T) -> bool {
        self.width == other.width() && self.height == other.height()
    }
}

/// Anything with a width and height.
pub trait GridDims {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
}

macro_rules! impl_dims {
    ($($t:ty),*) => {$(
        impl GridDims for $t {
            fn width(&self) -> usize { self.width }
            fn height(&self) -> usize { self.height }
        }
    )*};
}

impl_dims!(Image, DisparityMap, GroundTruthMap, ScoreMap, BoolMap);

pub(crate) fn ensure_same_dims(a: &impl GridDims, b: &impl GridDims, what: &str) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "{what}: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Per-pixel horizontal disparity, with [`INVALID_DISPARITY`] for missing
/// values. Valid entries lie in `[0, d_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    d_max: f64,
    data: Vec<f64>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, d_max: f64, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if !(d_max.is_finite() && d_max >= 0.0) {
            return Err(Error::InvalidData(format!("bad d_max {d_max}")));
        }
        for &d in &data {
            if d != INVALID_DISPARITY && !(0.0..=d_max).contains(&d) {
                return Err(Error::InvalidData(format!(
                    "disparity {d} outside [0, {d_max}]"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            d_max,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, d_max: f64, value: f64) -> Result<Self> {
        Self::new(width, height, d_max, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    /// Raw values including sentinels.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.raw(x, y);
        (d != INVALID_DISPARITY).then_some(d)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.raw(x, y) != INVALID_DISPARITY
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d != INVALID_DISPARITY).count()
    }

    pub fn flip_h(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            d_max: self.d_max,
            data: flip_rows(self.width, &self.data),
        }
    }
}

/// Sparse ground truth: same layout as [`DisparityMap`] without an upper
/// bound. Used for evaluation only.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GroundTruthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width, height, data.len())?;
        if let Some(d) = data
            .iter()
            .find(|&&d| d != INVALID_DISPARITY && !(d >= 0.0 && d.is_finite()))
        {
            return Err(Error::InvalidData(format!("ground truth value {d} < 0")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
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
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.data[y * self.width + x];
        (d != INVALID_DISPARITY).then_some(d)
    }

    /// Ground truth restricted to pixels where `keep` is true.
    pub fn masked(&self, keep: &[bool]) -> Self {
        let data = self
            .data
            .iter()
            .zip(keep)
            .map(|(&d, &k)| if k { d } else { INVALID_DISPARITY })
            .collect();
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

impl From<&DisparityMap> for GroundTruthMap {
    fn from(d: &DisparityMap) -> Self {
        Self {
            width: d.width,
            height: d.height,
            data: d.data.clone(),
        }
    }
}

/// Real-valued per-pixel score with a validity mask. Raw cues (where higher
/// need not mean "more confident") and network outputs both use this layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl ScoreMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        check_len(width, height, data.len())?;
        check_len(width, height, valid.len())?;
        if data.iter().zip(&valid).any(|(v, &ok)| ok && v.is_nan()) {
            return Err(Error::InvalidData("NaN score on a valid pixel".into()));
        }
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
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

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.data[i])
    }

    /// Applies `f` to every valid score.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let data = self
            .data
            .iter()
            .zip(&self.valid)
            .map(|(&v, &ok)| if ok { f(v) } else { v })
            .collect();
        Self {
            data,
            ..self.clone()
        }
    }
}

/// A [`ScoreMap`] whose valid entries all lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceMap(ScoreMap);

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let scores = ScoreMap::new(width, height, data, valid)?;
        Self::try_from(scores)
    }

    pub fn scores(&self) -> &ScoreMap {
        &self.0
    }

    pub fn into_scores(self) -> ScoreMap {
        self.0
    }
}

impl TryFrom<ScoreMap> for ConfidenceMap {
    type Error = Error;

    fn try_from(scores: ScoreMap) -> Result<Self> {
        let out_of_range = scores
            .data
            .iter()
            .zip(&scores.valid)
            .find(|(v, &ok)| ok && !(0.0..=1.0).contains(*v));
        if let Some((v, _)) = out_of_range {
            return Err(Error::InvalidData(format!("confidence {v} outside [0, 1]")));
        }
        Ok(Self(scores))
    }
}

impl std::ops::Deref for ConfidenceMap {
    type Target = ScoreMap;

    fn deref(&self) -> &ScoreMap {
        &self.0
    }
}

/// Per-pixel boolean with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct BoolMap {
    width: usize,
    height: usize,
    data: Vec<bool>,
    valid: Vec<bool>,
}

impl BoolMap {
    pub fn new(width: usize, height: usize, data: Vec<bool>, valid: Vec<bool>) -> Result<Self> {
        check_len(width, height, data.len())?;
        check_len(width, height, valid.len())?;
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
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

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<bool> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.data[i])
    }

    /// Number of valid pixels that are set.
    pub fn count_true(&self) -> usize {
        self.data
            .iter()
            .zip(&self.valid)
            .filter(|(&b, &ok)| ok && b)
            .count()
    }

    /// 1.0 / 0.0 scores, keeping the validity mask.
    pub fn to_scores(&self) -> ScoreMap {
        ScoreMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            valid: self.valid.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_out_of_range_and_bad_len() {
        assert!(Image::new(2, 2, vec![0.0, 0.5, 1.0, 1.5]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn flip_twice_is_identity() {
        let img = Image::new(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let flipped = img.flip_h();
        assert_eq!(flipped.row(0), &[0.3, 0.2, 0.1]);
        assert_eq!(flipped.flip_h(), img);
    }

    #[test]
    fn disparity_sentinel_is_distinct() {
        let d = DisparityMap::new(2, 1, 4.0, vec![INVALID_DISPARITY, 0.0]).unwrap();
        assert_eq!(d.get(0, 0), None);
        assert_eq!(d.get(1, 0), Some(0.0));
        assert!(DisparityMap::new(1, 1, 4.0, vec![4.5]).is_err());
        assert!(DisparityMap::new(1, 1, 4.0, vec![-0.5]).is_err());
    }

    #[test]
    fn confidence_range_enforced() {
        assert!(ConfidenceMap::new(1, 2, vec![0.5, 2.0], vec![true, false]).is_ok());
        assert!(ConfidenceMap::new(1, 2, vec![0.5, 2.0], vec![true, true]).is_err());
    }
}
