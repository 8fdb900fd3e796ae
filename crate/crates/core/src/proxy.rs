//! Proxy labels from the black-box criteria and the multi-modal binary
//! cross entropy trained on them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::cues::{CriteriaMap, Criterion};
use crate::error::{Error, Result};

/// Clamp applied to the network output before taking logarithms.
pub const OUTPUT_EPS: f64 = 1e-7;

/// Which criteria vote for "correct" (`P`) and whose negations vote for
/// "wrong" (`Q`). Requiring `Q ⊆ P` makes contradictory labels impossible.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MbceConfig {
    #[serde(rename = "P")]
    pub positive: BTreeSet<Criterion>,
    #[serde(rename = "Q")]
    pub negative: BTreeSet<Criterion>,
}

impl Default for MbceConfig {
    fn default() -> Self {
        Self::new(&Criterion::ALL, &[Criterion::T]).expect("legal")
    }
}

impl MbceConfig {
    pub fn new(positive: &[Criterion], negative: &[Criterion]) -> Result<Self> {
        let cfg = Self {
            positive: positive.iter().copied().collect(),
            negative: negative.iter().copied().collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positive.is_empty() {
            return Err(Error::Config("MBCE positive set P must not be empty".into()));
        }
        if !self.negative.is_subset(&self.positive) {
            return Err(Error::Config(format!(
                "MBCE negative set {:?} must be a subset of the positive set {:?}",
                self.negative, self.positive
            )));
        }
        Ok(())
    }

    /// The nine positive/negative combinations of the ablation study, in
    /// table order.
    pub fn ablation_configurations() -> Vec<MbceConfig> {
        use Criterion::{A, T, U};
        let rows: [(&[Criterion], &[Criterion]); 9] = [
            (&[T], &[T]),
            (&[A], &[A]),
            (&[U], &[U]),
            (&[T, A], &[T]),
            (&[T, A], &[T, A]),
            (&[T, U], &[T]),
            (&[T, U], &[T, U]),
            (&[T, A, U], &[T]),
            (&[T, A, U], &[T, A, U]),
        ];
        rows.iter()
            .map(|(p, q)| MbceConfig::new(p, q).expect("table rows are legal"))
            .collect()
    }

    /// Short label such as `TAU/T`.
    pub fn label(&self) -> String {
        let fmt = |set: &BTreeSet<Criterion>| set.iter().map(|c| format!("{c:?}")).collect::<String>();
        format!("{}/{}", fmt(&self.positive), fmt(&self.negative))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProxyLabel {
    /// Product over `P` of the criteria.
    pub positive: bool,
    /// Product over `Q` of the negated criteria.
    pub negative: bool,
}

impl ProxyLabel {
    pub const NONE: ProxyLabel = ProxyLabel {
        positive: false,
        negative: false,
    };

    pub fn is_supervised(self) -> bool {
        self.positive || self.negative
    }

    fn p(self) -> f64 {
        self.positive as u8 as f64
    }

    fn q(self) -> f64 {
        self.negative as u8 as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxyLabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<ProxyLabel>,
    pub valid: Vec<bool>,
}

impl ProxyLabelMap {
    pub fn count_positive(&self) -> usize {
        self.iter_valid().filter(|l| l.positive).count()
    }

    pub fn count_negative(&self) -> usize {
        self.iter_valid().filter(|l| l.negative).count()
    }

    pub fn count_supervised(&self) -> usize {
        self.iter_valid().filter(|l| l.is_supervised()).count()
    }

    /// Pixel indices carrying a label, in row-major order.
    pub fn supervised_indices(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.valid[i] && self.labels[i].is_supervised())
            .collect()
    }

    fn iter_valid(&self) -> impl Iterator<Item = ProxyLabel> + '_ {
        self.labels
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|(&l, _)| l)
    }
}

pub fn build_proxies(criteria: &CriteriaMap, cfg: &MbceConfig) -> Result<ProxyLabelMap> {
    cfg.validate()?;
    let labels = (0..criteria.len())
        .map(|i| {
            if !criteria.valid[i] {
                return ProxyLabel::NONE;
            }
            ProxyLabel {
                positive: cfg.positive.iter().all(|&c| criteria.get(c, i)),
                negative: cfg.negative.iter().all(|&c| !criteria.get(c, i)),
            }
        })
        .collect();
    Ok(ProxyLabelMap {
        width: criteria.width,
        height: criteria.height,
        labels,
        valid: criteria.valid.clone(),
    })
}

/// Loss and its derivative with respect to `o`, both evaluated at the
/// clamped output.
pub fn mbce_loss(output: f64, label: ProxyLabel) -> (f64, f64) {
    if !label.is_supervised() {
        return (0.0, 0.0);
    }
    let o = output.clamp(OUTPUT_EPS, 1.0 - OUTPUT_EPS);
    let (p, q) = (label.p(), label.q());
    let loss = -(p * o.ln() + q * (1.0 - o).ln());
    let grad = -p / o + q / (1.0 - o);
    (loss, grad)
}

/// Pairwise summation with a fixed split, so the result depends only on the
/// order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchLoss {
    /// Mean loss over supervised samples.
    pub loss: f64,
    pub supervised: usize,
    /// Set when no sample carried a label; `loss` is then 0.
    pub no_supervision: bool,
}

pub fn batch_loss(outputs: &[f64], labels: &[ProxyLabel]) -> Result<BatchLoss> {
    if outputs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} outputs vs {} labels",
            outputs.len(),
            labels.len()
        )));
    }
    let losses: Vec<f64> = outputs
        .iter()
        .zip(labels)
        .filter(|(_, l)| l.is_supervised())
        .map(|(&o, &l)| mbce_loss(o, l).0)
        .collect();
    if losses.is_empty() {
        log::warn!("batch without supervised pixels; loss defined as 0");
        return Ok(BatchLoss {
            loss: 0.0,
            supervised: 0,
            no_supervision: true,
        });
    }
    Ok(BatchLoss {
        loss: pairwise_sum(&losses) / losses.len() as f64,
        supervised: losses.len(),
        no_supervision: false,
    })
}
