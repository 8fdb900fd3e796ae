//! Confidence cues and the proxy criteria derived from them.
//!
//! Black-box cues need only the stereo pair and the reference disparity:
//! photometric reprojection error, disparity agreement and uniqueness. LRC
//! additionally needs a right-reference disparity, PKR and LRD need cost
//! volumes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, BoolMap, DisparityMap, Image, ScoreMap};
use crate::matcher::{argmin, CostVolume};

/// Stabiliser for ratios with a vanishing denominator.
pub const RATIO_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CueConfig {
    /// Weight of the structural term in the photometric error.
    pub alpha: f64,
    pub ssim_window: usize,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
    pub da_window: usize,
    /// Neighbours within this many pixels of the centre disparity agree.
    pub da_tolerance: f64,
    pub da_threshold: f64,
    pub lrc_threshold: f64,
    /// Hypotheses within this distance of the best one are not considered
    /// when searching the second local minimum for PKR.
    pub pkr_exclusion: usize,
}

impl Default for CueConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            ssim_window: 3,
            ssim_c1: 0.01 * 0.01,
            ssim_c2: 0.03 * 0.03,
            da_window: 5,
            da_tolerance: 1.0,
            da_threshold: 0.5,
            lrc_threshold: 1.0,
            pkr_exclusion: 1,
        }
    }
}

impl CueConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        for (name, win) in [("SSIM", self.ssim_window), ("DA", self.da_window)] {
            if win % 2 == 0 {
                return Err(Error::Config(format!("{name} window must be odd, got {win}")));
            }
        }
        for (name, v) in [
            ("DA tolerance", self.da_tolerance),
            ("DA threshold", self.da_threshold),
            ("LRC threshold", self.lrc_threshold),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.ssim_c1 < 0.0 || self.ssim_c2 < 0.0 {
            return Err(Error::Config("SSIM stabilisers must be non-negative".into()));
        }
        Ok(())
    }
}

/// Samples `right` at `x - d(x, y)` with linear interpolation. Invalid
/// disparities copy the right pixel in place.
pub fn warp_right(disparity: &DisparityMap, right: &Image) -> Result<Image> {
    ensure_same_dims(disparity, right, "warp")?;
    let w = right.width();
    let max_x = (w - 1) as f64;
    let data = (0..w * right.height())
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let Some(d) = disparity.get(x, y) else {
                return right.get(x, y);
            };
            let src = (x as f64 - d).clamp(0.0, max_x);
            let x0 = src.floor();
            let t = src - x0;
            let x0 = x0 as usize;
            let a = right.get(x0, y);
            if t == 0.0 {
                a
            } else {
                a + t * (right.get(x0 + 1, y) - a)
            }
        })
        .collect();
    Image::from_clamped(w, right.height(), data)
}

/// Per-pixel SSIM over a uniform window, clamped to `[-1, 1]`.
pub fn ssim_map(a: &Image, b: &Image, window: usize, c1: f64, c2: f64) -> Result<Vec<f64>> {
    ensure_same_dims(a, b, "SSIM")?;
    let (w, h) = (a.width(), a.height());
    let r = (window / 2) as isize;
    let n = (window * window) as f64;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (xi, yi) = (x as isize + dx, y as isize + dy);
                    let va = a.get_clamped(xi, yi);
                    let vb = b.get_clamped(xi, yi);
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let var_a = saa / n - ma * ma;
            let var_b = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            *o = if den == 0.0 { 1.0 } else { (num / den).clamp(-1.0, 1.0) };
        }
    });
    Ok(out)
}

/// `alpha * (1 - SSIM) + (1 - alpha) * |a - b|` per pixel.
pub fn photometric_delta(a: &Image, b: &Image, cfg: &CueConfig) -> Result<Vec<f64>> {
    let ssim = ssim_map(a, b, cfg.ssim_window, cfg.ssim_c1, cfg.ssim_c2)?;
    Ok(ssim
        .iter()
        .zip(a.data().iter().zip(b.data()))
        .map(|(s, (va, vb))| cfg.alpha * (1.0 - s) + (1.0 - cfg.alpha) * (va - vb).abs())
        .collect())
}

/// Rich-texture test: reprojection must strictly lower the photometric error
/// compared with the unwarped pair.
pub fn texture_criterion(
    left: &Image,
    right: &Image,
    warped: &Image,
    cfg: &CueConfig,
) -> Result<Vec<bool>> {
    let unwarped = photometric_delta(left, right, cfg)?;
    let reprojected = photometric_delta(left, warped, cfg)?;
    Ok(unwarped.iter().zip(&reprojected).map(|(u, r)| u > r).collect())
}

/// Fraction of the `N x N` window whose valid disparities lie within the
/// tolerance of the centre. The denominator is always `N * N`; pixels
/// outside the image simply do not count.
pub fn disparity_agreement(disparity: &DisparityMap, cfg: &CueConfig) -> Result<ScoreMap> {
    if cfg.da_window % 2 == 0 {
        return Err(Error::Config("DA window must be odd".into()));
    }
    let (w, h) = (disparity.width(), disparity.height());
    let r = (cfg.da_window / 2) as isize;
    let norm = (cfg.da_window * cfg.da_window) as f64;
    let mut data = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    data.par_chunks_mut(w)
        .zip(valid.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (row, vrow))| {
            for x in 0..w {
                let Some(center) = disparity.get(x, y) else { continue };
                let mut count = 0usize;
                for yy in (y as isize - r).max(0)..=(y as isize + r).min(h as isize - 1) {
                    for xx in (x as isize - r).max(0)..=(x as isize + r).min(w as isize - 1) {
                        if let Some(d) = disparity.get(xx as usize, yy as usize) {
                            if (d - center).abs() <= cfg.da_tolerance {
                                count += 1;
                            }
                        }
                    }
                }
                row[x] = count as f64 / norm;
                vrow[x] = true;
            }
        });
    ScoreMap::new(w, h, data, valid)
}

pub fn agreement_criterion(da: &ScoreMap, cfg: &CueConfig) -> BoolMap {
    let data = da.data().iter().map(|&v| v > cfg.da_threshold).collect();
    BoolMap::new(da.width(), da.height(), data, da.valid().to_vec()).expect("same layout")
}

#[inline]
fn grid_disparity(d: f64) -> i64 {
    d.round_ties_even() as i64
}

/// Uniqueness: a pixel passes when no other pixel of its row lands on the
/// same target column. The search covers exactly the offsets `k` in
/// `[-d, -1] ∪ [1, d_max - d]`, which are all columns that could collide.
pub fn uniqueness_criterion(disparity: &DisparityMap, d_max: f64) -> BoolMap {
    let (w, h) = (disparity.width(), disparity.height());
    let d_max = grid_disparity(d_max);
    let mut data = vec![false; w * h];
    let valid: Vec<bool> = disparity.data().iter().map(|&d| d >= 0.0).collect();
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let rounded: Vec<Option<i64>> = (0..w)
            .map(|x| disparity.get(x, y).map(grid_disparity))
            .collect();
        for x in 0..w {
            let Some(d) = rounded[x] else { continue };
            let target = x as i64 - d;
            let collides = (-d..=-1).chain(1..=d_max - d).any(|k| {
                let other = x as i64 + k;
                if other < 0 || other >= w as i64 {
                    return false;
                }
                rounded[other as usize].is_some_and(|d2| other - d2 == target)
            });
            row[x] = !collides;
        }
    });
    BoolMap::new(w, h, data, valid).expect("same layout")
}

/// Left-right consistency with nearest-neighbour sampling of `D_R` at the
/// rounded, row-clamped target column. Invalid pixels in either map are
/// inconsistent.
pub fn lrc(left: &DisparityMap, right: &DisparityMap, threshold: f64) -> Result<BoolMap> {
    ensure_same_dims(left, right, "LRC")?;
    let (w, h) = (left.width(), left.height());
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let Some(dl) = left.get(x, y) else { return false };
            let target = grid_disparity(x as f64 - dl).clamp(0, w as i64 - 1) as usize;
            right.get(target, y).is_some_and(|dr| (dl - dr).abs() < threshold)
        })
        .collect();
    BoolMap::new(w, h, data, vec![true; w * h])
}

/// Peak ratio between the second local minimum and the global minimum.
/// Pixels without a second local minimum receive the largest ratio found in
/// the map (1.0 if none exists anywhere).
pub fn pkr(vol: &CostVolume, exclusion: usize) -> Result<ScoreMap> {
    if vol.d_max() < 2 {
        return Err(Error::Config(format!("PKR needs d_max >= 2, got {}", vol.d_max())));
    }
    let (w, h) = (vol.width(), vol.height());
    let ratios: Vec<Option<f64>> = (0..w * h)
        .map(|i| peak_ratio(vol.curve(i % w, i / w), exclusion))
        .collect();
    let fill = ratios.iter().flatten().copied().fold(f64::NAN, f64::max);
    let fill = if fill.is_nan() { 1.0 } else { fill };
    let data = ratios.into_iter().map(|r| r.unwrap_or(fill)).collect();
    ScoreMap::new(w, h, data, vec![true; w * h])
}

fn peak_ratio(curve: &[f64], exclusion: usize) -> Option<f64> {
    let (d1, c1) = argmin(curve);
    let shift = if c1 == 0.0 { RATIO_EPS } else { 0.0 };
    let n = curve.len();
    let is_local_min = |d: usize| {
        (d == 0 || curve[d - 1] > curve[d]) && (d + 1 == n || curve[d + 1] > curve[d])
    };
    (0..n)
        .filter(|&d| d.abs_diff(d1) > exclusion && is_local_min(d))
        .map(|d| curve[d])
        .fold(None, |best: Option<f64>, c| Some(best.map_or(c, |b| b.min(c))))
        .map(|c2| (c2 + shift) / (c1 + shift))
}

/// Left-right difference: margin between the two best costs over the gap
/// between the best left cost and the best right cost at the matched column.
pub fn lrd(vol_left: &CostVolume, vol_right: &CostVolume) -> Result<ScoreMap> {
    if vol_left.width() != vol_right.width()
        || vol_left.height() != vol_right.height()
        || vol_left.d_max() != vol_right.d_max()
    {
        return Err(Error::Dimension("LRD volumes differ in shape".into()));
    }
    if vol_left.d_max() < 1 {
        return Err(Error::Config("LRD needs at least two hypotheses".into()));
    }
    let (w, h) = (vol_left.width(), vol_left.height());
    let data = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let curve = vol_left.curve(x, y);
            let (d1, c1) = argmin(curve);
            let c2 = curve
                .iter()
                .enumerate()
                .filter(|&(d, _)| d != d1)
                .map(|(_, &c)| c)
                .fold(f64::INFINITY, f64::min);
            let xr = x.saturating_sub(d1);
            let right_min = argmin(vol_right.curve(xr, y)).1;
            let mut den = c1 - right_min;
            if den.abs() < RATIO_EPS {
                den = if den < 0.0 { -RATIO_EPS } else { RATIO_EPS };
            }
            (c2 - c1) / den
        })
        .collect();
    ScoreMap::new(w, h, data, vec![true; w * h])
}

/// The three black-box proxy criteria.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Reprojection lowers the photometric error (rich texture).
    T,
    /// Majority of the neighbourhood agrees on the disparity.
    A,
    /// The match does not collide with another one in the target view.
    U,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::T, Criterion::A, Criterion::U];
}

/// Per-pixel criteria, defined on valid-disparity pixels only.
#[derive(Clone, Debug, PartialEq)]
pub struct CriteriaMap {
    pub width: usize,
    pub height: usize,
    pub texture: Vec<bool>,
    pub agreement: Vec<bool>,
    pub uniqueness: Vec<bool>,
    pub valid: Vec<bool>,
}

impl CriteriaMap {
    pub fn get(&self, criterion: Criterion, i: usize) -> bool {
        match criterion {
            Criterion::T => self.texture[i],
            Criterion::A => self.agreement[i],
            Criterion::U => self.uniqueness[i],
        }
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }
}

/// Everything computable from `(I_L, I_R, D_L)` alone.
#[derive(Clone, Debug)]
pub struct BlackBoxCues {
    /// Photometric error after reprojection; higher means less reliable.
    pub delta: ScoreMap,
    pub agreement: ScoreMap,
    pub uniqueness: BoolMap,
    pub criteria: CriteriaMap,
}

pub fn black_box_cues(
    left: &Image,
    right: &Image,
    disparity: &DisparityMap,
    cfg: &CueConfig,
) -> Result<BlackBoxCues> {
    cfg.validate()?;
    ensure_same_dims(left, right, "stereo pair")?;
    ensure_same_dims(left, disparity, "disparity")?;
    let (w, h) = (left.width(), left.height());
    let valid: Vec<bool> = disparity.data().iter().map(|&d| d >= 0.0).collect();

    let warped = warp_right(disparity, right)?;
    let unwarped = photometric_delta(left, right, cfg)?;
    let reprojected = photometric_delta(left, &warped, cfg)?;
    let texture = unwarped.iter().zip(&reprojected).map(|(u, r)| u > r).collect();

    let agreement = disparity_agreement(disparity, cfg)?;
    let agree = agreement_criterion(&agreement, cfg);
    let uniqueness = uniqueness_criterion(disparity, disparity.d_max());

    let criteria = CriteriaMap {
        width: w,
        height: h,
        texture,
        agreement: agree.data().to_vec(),
        uniqueness: uniqueness.data().to_vec(),
        valid: valid.clone(),
    };
    Ok(BlackBoxCues {
        delta: ScoreMap::new(w, h, reprojected, valid)?,
        agreement,
        uniqueness,
        criteria,
    })
}

pub fn compute_criteria(
    left: &Image,
    right: &Image,
    disparity: &DisparityMap,
    cfg: &CueConfig,
) -> Result<CriteriaMap> {
    Ok(black_box_cues(left, right, disparity, cfg)?.criteria)
}
