use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, extract_patch, forward_dense_logits, Checkpoint, Gradients, NetShape, Patch, PatchNet};
use crate::cues::{compute_criteria, CueConfig};
use crate::error::{Error, Result};
use crate::eval::{sparsification, EvalConfig, EvalRow};
use crate::image::{DisparityMap, GroundTruthMap, Image};
use crate::proxy::{build_proxies, MbceConfig, ProxyLabel, ProxyLabelMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub shape: NetShape,
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub adapt_learning_rate: f64,
    pub seed: u64,
    /// Loss is averaged and reported every this many iterations.
    pub log_every: usize,
    /// Draw half of each batch from positive and half from negative labels.
    pub rebalance: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            shape: NetShape::default(),
            batch_size: 128,
            iterations: 5000,
            learning_rate: 0.001,
            adapt_learning_rate: 0.0001,
            seed: 0,
            log_every: 100,
            rebalance: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        if self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::Config("batch_size and log_every must be positive".into()));
        }
        for (name, lr) in [("learning_rate", self.learning_rate), ("adapt_learning_rate", self.adapt_learning_rate)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {lr}")));
            }
        }
        Ok(())
    }
}

/// A frame prepared for offline training: proxies are computed once on the
/// full-resolution maps before any patch is sampled.
#[derive(Clone, Debug)]
pub struct TrainingFrame {
    pub disparity: DisparityMap,
    /// Reference image, used only by networks with an image channel.
    pub image: Option<Image>,
    pub labels: ProxyLabelMap,
}

impl TrainingFrame {
    pub fn from_views(
        left: &Image,
        right: &Image,
        disparity: DisparityMap,
        cues: &CueConfig,
        mbce: &MbceConfig,
        keep_image: bool,
    ) -> Result<Self> {
        let criteria = compute_criteria(left, right, &disparity, cues)?;
        let labels = build_proxies(&criteria, mbce)?;
        Ok(Self {
            disparity,
            image: keep_image.then(|| left.clone()),
            labels,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPoint {
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub checkpoint: Checkpoint,
    pub losses: Vec<LossPoint>,
}

/// `(frame, pixel)` pools of supervised samples.
struct Pools {
    all: Vec<(u32, u32)>,
    positive: Vec<(u32, u32)>,
    negative: Vec<(u32, u32)>,
}

impl Pools {
    fn new(frames: &[&ProxyLabelMap]) -> Self {
        let mut pools = Pools {
            all: Vec::new(),
            positive: Vec::new(),
            negative: Vec::new(),
        };
        for (f, labels) in frames.iter().enumerate() {
            for i in labels.supervised_indices() {
                let key = (f as u32, i as u32);
                pools.all.push(key);
                if labels.labels[i].positive {
                    pools.positive.push(key);
                } else {
                    pools.negative.push(key);
                }
            }
        }
        pools
    }

    fn draw(&self, rng: &mut ChaCha8Rng, n: usize, rebalance: bool) -> Vec<(u32, u32)> {
        let pick = |pool: &[(u32, u32)], rng: &mut ChaCha8Rng| pool[rng.gen_range(0..pool.len())];
        if rebalance && !self.positive.is_empty() && !self.negative.is_empty() {
            (0..n)
                .map(|k| pick(if k % 2 == 0 { &self.positive } else { &self.negative }, rng))
                .collect()
        } else {
            (0..n).map(|_| pick(&self.all, rng)).collect()
        }
    }
}

/// Draws `n` supervised pixels (with replacement) from `labels` and returns
/// their patches and labels. Empty when the map carries no supervision.
pub fn sample_batch(
    rng: &mut ChaCha8Rng,
    disparity: &DisparityMap,
    image: Option<&Image>,
    labels: &ProxyLabelMap,
    n: usize,
    rebalance: bool,
) -> (Vec<Patch<f32>>, Vec<ProxyLabel>) {
    let pools = Pools::new(&[labels]);
    if pools.all.is_empty() {
        return (Vec::new(), Vec::new());
    }
    gather(&pools.draw(rng, n, rebalance), &[(disparity, image, labels)])
}

type FrameRef<'a> = (&'a DisparityMap, Option<&'a Image>, &'a ProxyLabelMap);

fn gather(keys: &[(u32, u32)], frames: &[FrameRef<'_>]) -> (Vec<Patch<f32>>, Vec<ProxyLabel>) {
    keys.iter()
        .map(|&(f, i)| {
            let (d, img, labels) = frames[f as usize];
            let i = i as usize;
            let patch = extract_patch(d, img, i % d.width(), i / d.width()).expect("supervised pixels are valid");
            (patch, labels.labels[i])
        })
        .unzip()
}

/// `θ ← θ − lr·∇θ`.
pub fn sgd_step(net: &mut PatchNet<f32>, grads: &Gradients<f32>, lr: f64) {
    let lr = lr as f32;
    for (p, g) in net.parameters_mut().zip(grads.parameters()) {
        *p -= lr * *g;
    }
}

/// Offline schedule: each iteration samples one batch of supervised pixels
/// uniformly across all frames and takes one SGD step.
pub fn train_offline(mut net: PatchNet<f32>, frames: &[TrainingFrame], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if frames.is_empty() {
        return Err(Error::InvalidData("training set is empty".into()));
    }
    if net.shape() != &cfg.shape {
        return Err(Error::Config("network shape differs from the training configuration".into()));
    }
    if frames.iter().any(|f| f.image.is_some() != cfg.shape.use_image) {
        return Err(Error::Config("image channel presence must match the network shape".into()));
    }
    let label_maps: Vec<&ProxyLabelMap> = frames.iter().map(|f| &f.labels).collect();
    let pools = Pools::new(&label_maps);
    if pools.all.is_empty() {
        return Err(Error::InvalidData("training set has no supervised pixels".into()));
    }
    log::info!(
        "training on {} frames, {} supervised pixels ({} positive)",
        frames.len(),
        pools.all.len(),
        pools.positive.len()
    );
    let refs: Vec<FrameRef<'_>> = frames.iter().map(|f| (&f.disparity, f.image.as_ref(), &f.labels)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut losses = Vec::new();
    let mut window = Vec::with_capacity(cfg.log_every);
    for it in 1..=cfg.iterations {
        let keys = pools.draw(&mut rng, cfg.batch_size, cfg.rebalance);
        let (patches, labels) = gather(&keys, &refs);
        let (grads, loss) = backward(&net, &patches, &labels)?;
        if cfg.learning_rate > 0.0 {
            sgd_step(&mut net, &grads, cfg.learning_rate);
        }
        window.push(loss.loss);
        if it % cfg.log_every == 0 || it == cfg.iterations {
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            log::info!("iteration {it}: loss {mean:.5}");
            losses.push(LossPoint { iteration: it, loss: mean });
            window.clear();
        }
    }
    Ok(TrainReport {
        checkpoint: Checkpoint {
            net,
            iteration: cfg.iterations as u64,
        },
        losses,
    })
}

/// One frame of an adaptation stream.
#[derive(Clone, Debug)]
pub struct AdaptFrame {
    pub name: String,
    pub left: Image,
    pub right: Image,
    pub disparity: DisparityMap,
    /// Used for evaluation only.
    pub gt: Option<GroundTruthMap>,
}

#[derive(Clone, Debug)]
pub struct AdaptReport {
    /// AUC-before-update rows, one per frame with ground truth.
    pub rows: Vec<EvalRow>,
    /// Frames whose update was skipped for lack of supervision.
    pub skipped_updates: usize,
    pub net: PatchNet<f32>,
}

/// Online adaptation: every frame is first scored and evaluated with the
/// current parameters, then used for a single SGD step on its own proxies.
pub fn adapt_online<I>(
    mut net: PatchNet<f32>,
    stream: I,
    cfg: &TrainConfig,
    cues: &CueConfig,
    mbce: &MbceConfig,
    eval: &EvalConfig,
    measure: &str,
) -> Result<AdaptReport>
where
    I: IntoIterator<Item = AdaptFrame>,
{
    cfg.validate()?;
    eval.validate()?;
    let lr = cfg.adapt_learning_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut skipped_updates = 0;
    for frame in stream {
        let image = net.shape().use_image.then_some(&frame.left);
        let conf = forward_dense_logits(&net, &frame.disparity, image)?;
        if let Some(gt) = &frame.gt {
            let result = sparsification(&conf, &frame.disparity, gt, eval)?;
            rows.push(EvalRow::new(measure, &frame.name, &result));
        } else {
            log::warn!("frame {} has no ground truth; not evaluated", frame.name);
        }
        if lr == 0.0 {
            continue;
        }
        let criteria = compute_criteria(&frame.left, &frame.right, &frame.disparity, cues)?;
        let labels = build_proxies(&criteria, mbce)?;
        let (patches, batch_labels) =
            sample_batch(&mut rng, &frame.disparity, image, &labels, cfg.batch_size, cfg.rebalance);
        if patches.is_empty() {
            log::warn!("frame {} has no supervised pixels; no update", frame.name);
            skipped_updates += 1;
            continue;
        }
        let (grads, _) = backward(&net, &patches, &batch_labels)?;
        sgd_step(&mut net, &grads, lr);
    }
    Ok(AdaptReport {
        rows,
        skipped_updates,
        net,
    })
}
