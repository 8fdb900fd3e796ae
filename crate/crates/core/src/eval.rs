//! Error rates, sparsification curves and their area.
//!
//! Pixels are removed in increasing order of confidence; the curve tracks
//! the bad-τ rate of what remains. Ties keep row-major order.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, DisparityMap, GroundTruthMap, ScoreMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Error threshold in pixels.
    pub tau: f64,
    /// Fraction of pixels removed per step.
    pub step: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tau: 3.0, step: 0.05 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.step > 0.0 && self.step <= 0.5) {
            return Err(Error::Config(format!("step must lie in (0, 0.5], got {}", self.step)));
        }
        Ok(())
    }

    /// Number of curve points, `floor(1 / step)`.
    pub fn num_points(&self) -> usize {
        (1.0 / self.step + 1e-9).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparsificationResult {
    /// `(fraction_removed, error_rate)` pairs.
    pub curve: Vec<(f64, f64)>,
    pub auc: f64,
    pub optimal_auc: f64,
    pub bad_tau_full: f64,
    pub pixels: usize,
}

/// Indices of pixels where both maps hold a value, with their errors.
fn joint_errors(d: &DisparityMap, gt: &GroundTruthMap) -> Result<Vec<(usize, f64)>> {
    ensure_same_dims(d, gt, "ground truth")?;
    Ok(d.data()
        .iter()
        .zip(gt.data())
        .enumerate()
        .filter(|(_, (&dv, &g))| dv >= 0.0 && g >= 0.0)
        .map(|(i, (&dv, &g))| (i, (dv - g).abs()))
        .collect())
}

pub fn bad_tau(d: &DisparityMap, gt: &GroundTruthMap, tau: f64) -> Result<f64> {
    let errors = joint_errors(d, gt)?;
    if errors.is_empty() {
        return Err(Error::InvalidData("no pixel with both disparity and ground truth".into()));
    }
    let bad = errors.iter().filter(|(_, e)| *e > tau).count();
    Ok(bad as f64 / errors.len() as f64)
}

/// Sparsification of `wrong` flags ordered by `confidence`. Returns the curve
/// and its normalised area.
pub fn sparsify(confidence: &[f64], wrong: &[bool], cfg: &EvalConfig) -> Result<(Vec<(f64, f64)>, f64)> {
    cfg.validate()?;
    let n = confidence.len();
    if n == 0 {
        return Err(Error::InvalidData("sparsification over zero pixels".into()));
    }
    if wrong.len() != n {
        return Err(Error::Dimension(format!("{n} confidences vs {} error flags", wrong.len())));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| confidence[a].total_cmp(&confidence[b]));

    // prefix[k] = wrong pixels among the k least confident.
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &i in &order {
        prefix.push(prefix.last().unwrap() + wrong[i] as usize);
    }
    let total = prefix[n];

    let curve: Vec<(f64, f64)> = (0..cfg.num_points())
        .map(|i| {
            let frac = i as f64 * cfg.step;
            let removed = ((frac * n as f64).round() as usize).min(n - 1);
            let rate = (total - prefix[removed]) as f64 / (n - removed) as f64;
            (frac, rate)
        })
        .collect();
    Ok((curve.clone(), area(&curve)))
}

fn area(curve: &[(f64, f64)]) -> f64 {
    let span = curve.last().unwrap().0 - curve[0].0;
    if span <= 0.0 {
        return curve[0].1;
    }
    let integral: f64 = curve
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    integral / span
}

/// Full sparsification of `confidence` against `d` and `gt`. Pixels count
/// where all three are valid.
pub fn sparsification(
    confidence: &ScoreMap,
    d: &DisparityMap,
    gt: &GroundTruthMap,
    cfg: &EvalConfig,
) -> Result<SparsificationResult> {
    ensure_same_dims(confidence, d, "confidence")?;
    let errors: Vec<(usize, f64)> = joint_errors(d, gt)?
        .into_iter()
        .filter(|&(i, _)| confidence.valid()[i])
        .collect();
    let conf: Vec<f64> = errors.iter().map(|&(i, _)| confidence.data()[i]).collect();
    let wrong: Vec<bool> = errors.iter().map(|&(_, e)| e > cfg.tau).collect();
    let (curve, auc) = sparsify(&conf, &wrong, cfg)?;
    let perfect: Vec<f64> = errors.iter().map(|&(_, e)| -e).collect();
    let (_, optimal_auc) = sparsify(&perfect, &wrong, cfg)?;
    Ok(SparsificationResult {
        curve,
        auc,
        optimal_auc,
        bad_tau_full: wrong.iter().filter(|&&w| w).count() as f64 / wrong.len() as f64,
        pixels: wrong.len(),
    })
}

/// Area obtained by removing the largest errors first.
pub fn optimal_auc(d: &DisparityMap, gt: &GroundTruthMap, cfg: &EvalConfig) -> Result<f64> {
    let errors = joint_errors(d, gt)?;
    let conf: Vec<f64> = errors.iter().map(|&(_, e)| -e).collect();
    let wrong: Vec<bool> = errors.iter().map(|&(_, e)| e > cfg.tau).collect();
    Ok(sparsify(&conf, &wrong, cfg)?.1)
}

/// One frame of an evaluation table.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub measure: String,
    pub frame: String,
    pub auc: f64,
    pub optimal_auc: f64,
    pub bad_tau: f64,
}

impl EvalRow {
    pub fn new(measure: &str, frame: &str, result: &SparsificationResult) -> Self {
        Self {
            measure: measure.to_string(),
            frame: frame.to_string(),
            auc: result.auc,
            optimal_auc: result.optimal_auc,
            bad_tau: result.bad_tau_full,
        }
    }
}

/// Frame to evaluate: confidence plus the maps it is judged against. Frames
/// without ground truth are skipped with a warning.
pub struct EvalFrame<'a> {
    pub name: &'a str,
    pub confidence: &'a ScoreMap,
    pub disparity: &'a DisparityMap,
    pub gt: Option<&'a GroundTruthMap>,
}

/// Per-frame rows for one measure, in the given frame order.
pub fn evaluate_measure(measure: &str, frames: &[EvalFrame<'_>], cfg: &EvalConfig) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::with_capacity(frames.len());
    for f in frames {
        let Some(gt) = f.gt else {
            log::warn!("frame {} has no ground truth; skipped", f.name);
            continue;
        };
        let result = sparsification(f.confidence, f.disparity, gt, cfg)?;
        rows.push(EvalRow::new(measure, f.name, &result));
    }
    Ok(rows)
}

/// Row averaging every column over `rows`, labelled with frame `mean`.
pub fn mean_row(measure: &str, rows: &[EvalRow]) -> Option<EvalRow> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some(EvalRow {
        measure: measure.to_string(),
        frame: "mean".to_string(),
        auc: mean(|r| r.auc),
        optimal_auc: mean(|r| r.optimal_auc),
        bad_tau: mean(|r| r.bad_tau),
    })
}

pub const CSV_HEADER: &str = "measure,frame,auc,optimal_auc,bad_tau";

pub fn write_csv<W: Write>(mut out: W, rows: &[EvalRow]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.measure,
            r.frame,
            format_sig(r.auc),
            format_sig(r.optimal_auc),
            format_sig(r.bad_tau)
        )?;
    }
    Ok(())
}

pub fn csv_string(rows: &[EvalRow]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("ascii")
}

/// Six significant digits, shortest form, like C's `%g`.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
