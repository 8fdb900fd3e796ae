//! Reference stereo matchers: census cost, box aggregation, semi-global
//! matching and winner-take-all extraction.
//!
//! All window operations replicate the image border.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, DisparityMap, Image, INVALID_DISPARITY};

/// Cost assigned to hypotheses that would match outside the target image.
pub const OUT_OF_RANGE_COST: f64 = 1.0e4;

/// Per-pixel census bitstrings. Bit `k` refers to the `k`-th neighbour in
/// row-major window order, skipping the centre.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusGrid {
    width: usize,
    height: usize,
    window: usize,
    bits: Vec<u64>,
}

impl CensusGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn bits(&self) -> &[u64] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u64 {
        self.bits[y * self.width + x]
    }
}

fn check_odd(window: usize, what: &str) -> Result<()> {
    if window % 2 == 0 {
        return Err(Error::Config(format!("{what} window must be odd, got {window}")));
    }
    Ok(())
}

pub fn census_transform(img: &Image, window: usize) -> Result<CensusGrid> {
    check_odd(window, "census")?;
    if window * window - 1 > 64 {
        return Err(Error::Config(format!(
            "census window {window} needs {} bits, at most 64 fit",
            window * window - 1
        )));
    }
    let (w, h) = (img.width(), img.height());
    let r = (window / 2) as isize;
    let mut bits = vec![0u64; w * h];
    bits.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let center = img.get(x, y);
            let mut code = 0u64;
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    if img.get_clamped(x as isize + dx, y as isize + dy) < center {
                        code |= 1 << k;
                    }
                    k += 1;
                }
            }
            *out = code;
        }
    });
    Ok(CensusGrid {
        width: w,
        height: h,
        window,
        bits,
    })
}

/// Matching costs laid out as `(y, x, d)` for `d` in `0..=d_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    ndisp: usize,
    data: Vec<f64>,
}

impl CostVolume {
    pub fn new(width: usize, height: usize, d_max: usize, data: Vec<f64>) -> Result<Self> {
        let ndisp = d_max + 1;
        if width * height * ndisp != data.len() || width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "cost volume {width}x{height}x{ndisp} needs {} values, got {}",
                width * height * ndisp,
                data.len()
            )));
        }
        if data.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidData("costs must be finite and non-negative".into()));
        }
        Ok(Self {
            width,
            height,
            ndisp,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn d_max(&self) -> usize {
        self.ndisp - 1
    }

    pub fn num_disparities(&self) -> usize {
        self.ndisp
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, d: usize) -> f64 {
        self.data[(y * self.width + x) * self.ndisp + d]
    }

    /// Cost curve over all hypotheses at one pixel.
    #[inline]
    pub fn curve(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.ndisp;
        &self.data[i..i + self.ndisp]
    }

    /// Mirrors the volume left to right (hypotheses untouched).
    pub fn flip_h(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                data.extend_from_slice(self.curve(x, y));
            }
        }
        Self { data, ..*self }
    }

    fn zeros_like(&self) -> Self {
        Self {
            data: vec![0.0; self.data.len()],
            ..*self
        }
    }
}

/// Hamming-distance volume with the left grid as reference.
pub fn build_cost_volume(left: &CensusGrid, right: &CensusGrid, d_max: usize) -> Result<CostVolume> {
    if left.width != right.width || left.height != right.height {
        return Err(Error::Dimension("census grids differ in size".into()));
    }
    let (w, h, nd) = (left.width, left.height, d_max + 1);
    let mut data = vec![0.0; w * h * nd];
    data.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let code = left.get(x, y);
            for d in 0..nd {
                row[x * nd + d] = if d <= x {
                    (code ^ right.get(x - d, y)).count_ones() as f64
                } else {
                    OUT_OF_RANGE_COST
                };
            }
        }
    });
    CostVolume::new(w, h, d_max, data)
}

/// Per-hypothesis mean filter over a `window x window` neighbourhood.
pub fn aggregate_box(vol: &CostVolume, window: usize) -> Result<CostVolume> {
    check_odd(window, "aggregation")?;
    if window == 1 {
        return Ok(vol.clone());
    }
    let (w, h, nd) = (vol.width, vol.height, vol.ndisp);
    let r = (window / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut horiz = vol.zeros_like();
    horiz.data.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            for k in -r..=r {
                let src = clamp(x as isize + k, w);
                let curve = vol.curve(src, y);
                for d in 0..nd {
                    row[x * nd + d] += curve[d];
                }
            }
        }
    });

    let norm = (window * window) as f64;
    let mut out = vol.zeros_like();
    out.data.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        for k in -r..=r {
            let src = clamp(y as isize + k, h);
            let src_row = &horiz.data[src * w * nd..(src + 1) * w * nd];
            for (o, s) in row.iter_mut().zip(src_row) {
                *o += s;
            }
        }
        for o in row.iter_mut() {
            *o /= norm;
        }
    });
    Ok(out)
}

/// Scanline directions `(dx, dy)`; the first four are used for 4-path SGM.
pub const SGM_DIRECTIONS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

fn check_penalties(p1: f64, p2: f64) -> Result<()> {
    if !(0.0 <= p1 && p1 <= p2 && p2.is_finite()) {
        return Err(Error::Config(format!(
            "SGM penalties must satisfy 0 <= P1 <= P2, got P1={p1}, P2={p2}"
        )));
    }
    Ok(())
}

/// Aggregated costs along a single scanline direction. The path enters the
/// image at pixels whose predecessor `p - r` lies outside; those copy the raw
/// cost.
pub fn sgm_path(vol: &CostVolume, dir: (isize, isize), p1: f64, p2: f64) -> Result<CostVolume> {
    check_penalties(p1, p2)?;
    let (w, h, nd) = (vol.width, vol.height, vol.ndisp);
    let (dx, dy) = dir;
    let mut out = vol.zeros_like();

    let ys: Vec<usize> = if dy >= 0 { (0..h).collect() } else { (0..h).rev().collect() };
    let xs: Vec<usize> = if dx >= 0 { (0..w).collect() } else { (0..w).rev().collect() };
    let mut prev = vec![0.0; nd];
    for &y in &ys {
        for &x in &xs {
            let px = x as isize - dx;
            let py = y as isize - dy;
            let raw = vol.curve(x, y);
            let base = (y * w + x) * nd;
            if px < 0 || py < 0 || px >= w as isize || py >= h as isize {
                out.data[base..base + nd].copy_from_slice(raw);
                continue;
            }
            let pbase = (py as usize * w + px as usize) * nd;
            prev.copy_from_slice(&out.data[pbase..pbase + nd]);
            let min_prev = prev.iter().copied().fold(f64::INFINITY, f64::min);
            for d in 0..nd {
                let mut best = prev[d].min(min_prev + p2);
                if d > 0 {
                    best = best.min(prev[d - 1] + p1);
                }
                if d + 1 < nd {
                    best = best.min(prev[d + 1] + p1);
                }
                out.data[base + d] = raw[d] + (best - min_prev);
            }
        }
    }
    Ok(out)
}

/// Semi-global aggregation: the sum of `paths` directional volumes, added in
/// the fixed order of [`SGM_DIRECTIONS`].
pub fn sgm_aggregate(vol: &CostVolume, p1: f64, p2: f64, paths: usize) -> Result<CostVolume> {
    check_penalties(p1, p2)?;
    if paths != 4 && paths != 8 {
        return Err(Error::Config(format!("SGM paths must be 4 or 8, got {paths}")));
    }
    let per_path: Vec<CostVolume> = SGM_DIRECTIONS[..paths]
        .par_iter()
        .map(|&dir| sgm_path(vol, dir, p1, p2))
        .collect::<Result<_>>()?;
    let mut out = vol.zeros_like();
    for path in &per_path {
        for (o, v) in out.data.iter_mut().zip(&path.data) {
            *o += v;
        }
    }
    Ok(out)
}

/// Per-pixel argmin; ties go to the smaller disparity. Pixels whose best cost
/// is still the out-of-range penalty are invalid.
pub fn wta(vol: &CostVolume) -> DisparityMap {
    let data = (0..vol.width * vol.height)
        .map(|i| {
            let curve = &vol.data[i * vol.ndisp..(i + 1) * vol.ndisp];
            let (best, cost) = argmin(curve);
            if cost >= OUT_OF_RANGE_COST {
                INVALID_DISPARITY
            } else {
                best as f64
            }
        })
        .collect();
    DisparityMap::new(vol.width, vol.height, vol.d_max() as f64, data)
        .expect("argmin lies in [0, d_max]")
}

/// Index and value of the first minimum.
#[inline]
pub(crate) fn argmin(curve: &[f64]) -> (usize, f64) {
    curve
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (d, &c)| if c < acc.1 { (d, c) } else { acc })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Raw census costs, winner-take-all.
    Wta,
    /// Box-filtered census costs, winner-take-all.
    Box,
    /// Semi-global matching over census costs.
    #[default]
    Sgm,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wta" => Ok(Algorithm::Wta),
            "box" => Ok(Algorithm::Box),
            "sgm" => Ok(Algorithm::Sgm),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatcherConfig {
    pub algorithm: Algorithm,
    pub census_window: usize,
    pub d_max: usize,
    pub p1: f64,
    pub p2: f64,
    pub paths: usize,
    pub box_window: usize,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sgm,
            census_window: 5,
            d_max: 32,
            p1: 7.0,
            p2: 86.0,
            paths: 8,
            box_window: 5,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        check_odd(self.census_window, "census")?;
        check_odd(self.box_window, "aggregation")?;
        if self.census_window * self.census_window - 1 > 64 {
            return Err(Error::Config("census window exceeds 64 bits".into()));
        }
        if self.d_max == 0 {
            return Err(Error::Config("d_max must be positive".into()));
        }
        check_penalties(self.p1, self.p2)?;
        if self.paths != 4 && self.paths != 8 {
            return Err(Error::Config(format!("SGM paths must be 4 or 8, got {}", self.paths)));
        }
        Ok(())
    }
}

/// Anything that turns a rectified pair into a disparity map for its first
/// argument. Closures qualify, so opaque (black-box) matchers plug in too.
pub trait StereoMatcher {
    fn disparity(&self, reference: &Image, target: &Image) -> Result<DisparityMap>;
}

impl<F> StereoMatcher for F
where
    F: Fn(&Image, &Image) -> Result<DisparityMap>,
{
    fn disparity(&self, reference: &Image, target: &Image) -> Result<DisparityMap> {
        self(reference, target)
    }
}

/// The census-based pipeline selected by [`MatcherConfig::algorithm`].
#[derive(Clone, Debug)]
pub struct CensusMatcher {
    cfg: MatcherConfig,
}

impl CensusMatcher {
    pub fn new(cfg: MatcherConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &MatcherConfig {
        &self.cfg
    }

    /// Raw census volume with `reference` as the reference view.
    pub fn raw_cost_volume(&self, reference: &Image, target: &Image) -> Result<CostVolume> {
        ensure_same_dims(reference, target, "stereo pair")?;
        if self.cfg.d_max >= reference.width() {
            return Err(Error::Config(format!(
                "d_max {} must be smaller than image width {}",
                self.cfg.d_max,
                reference.width()
            )));
        }
        let l = census_transform(reference, self.cfg.census_window)?;
        let r = census_transform(target, self.cfg.census_window)?;
        build_cost_volume(&l, &r, self.cfg.d_max)
    }

    /// Volume the disparity is extracted from, after the configured
    /// aggregation.
    pub fn cost_volume(&self, reference: &Image, target: &Image) -> Result<CostVolume> {
        let raw = self.raw_cost_volume(reference, target)?;
        match self.cfg.algorithm {
            Algorithm::Wta => Ok(raw),
            Algorithm::Box => aggregate_box(&raw, self.cfg.box_window),
            Algorithm::Sgm => sgm_aggregate(&raw, self.cfg.p1, self.cfg.p2, self.cfg.paths),
        }
    }

    /// Right-reference volume, built from mirrored inputs and mirrored back.
    pub fn right_cost_volume(&self, left: &Image, right: &Image) -> Result<CostVolume> {
        Ok(self.cost_volume(&right.flip_h(), &left.flip_h())?.flip_h())
    }
}

impl StereoMatcher for CensusMatcher {
    fn disparity(&self, reference: &Image, target: &Image) -> Result<DisparityMap> {
        Ok(wta(&self.cost_volume(reference, target)?))
    }
}

/// Right-reference disparity from a matcher that only knows left-reference
/// matching: mirror both views, swap them, match, mirror the result back.
pub fn compute_right_disparity<S: StereoMatcher + ?Sized>(
    matcher: &S,
    left: &Image,
    right: &Image,
) -> Result<DisparityMap> {
    Ok(matcher.disparity(&right.flip_h(), &left.flip_h())?.flip_h())
}
