//! Patch-based confidence network in the style of CCNN: four valid 3x3
//! convolutions, two pointwise hidden layers and a pointwise logit, each
//! hidden stage followed by a rectifier. The receptive field is 9x9, so a
//! single patch yields a single confidence, and the same stack slid over a
//! padded disparity map yields a dense map.
//!
//! Activations are stored NHWC (`[batch][y][x][channel]`), which turns every
//! stage into one matrix product: convolutions via im2col, pointwise stages
//! directly.

mod checkpoint;
mod real;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use real::Real;
pub use train::{
    adapt_online, sample_batch, sgd_step, train_offline, AdaptFrame, AdaptReport, LossPoint,
    TrainConfig, TrainReport, TrainingFrame,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ConfidenceMap, DisparityMap, Image, ScoreMap};
use crate::proxy::{mbce_loss, pairwise_sum, BatchLoss, ProxyLabel};
use real::{gemm, Order};

/// Side length of the input patch (receptive field of four valid 3x3 convs).
pub const PATCH_SIZE: usize = 9;
const PATCH_RADIUS: usize = PATCH_SIZE / 2;
const NUM_CONVS: usize = 4;

/// Patches are processed in fixed-size groups so gradient summation order
/// never depends on the thread count.
const GRAD_CHUNK: usize = 32;
const DENSE_BAND_ROWS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetShape {
    /// Output widths of the four 3x3 convolutions.
    pub conv_widths: [usize; NUM_CONVS],
    /// Widths of the pointwise hidden layers.
    pub fc_widths: Vec<usize>,
    /// Feed the reference-image patch as a second input channel.
    pub use_image: bool,
}

impl Default for NetShape {
    fn default() -> Self {
        Self {
            conv_widths: [64; NUM_CONVS],
            fc_widths: vec![100, 100],
            use_image: false,
        }
    }
}

impl NetShape {
    pub fn in_channels(&self) -> usize {
        if self.use_image {
            2
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_widths.iter().chain(&self.fc_widths).any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text used for checkpoint compatibility hashing.
    pub fn describe(&self) -> String {
        format!(
            "ccnn;in={};conv={:?};fc={:?}",
            self.in_channels(),
            self.conv_widths,
            self.fc_widths
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv3x3,
    Pointwise,
}

/// One stage. Weights form a `fan_in x out_channels` row-major matrix; for
/// convolutions the fan-in is ordered `(ky, kx, in_channel)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub relu: bool,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Conv3x3 => 9 * self.in_channels,
            LayerKind::Pointwise => self.in_channels,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weights: vec![T::ZERO; self.weights.len()],
            bias: vec![T::ZERO; self.bias.len()],
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchNet<T> {
    shape: NetShape,
    layers: Vec<Layer<T>>,
}

/// Gradients share the network's layout.
pub type Gradients<T> = PatchNet<T>;

fn layer_plan(shape: &NetShape) -> Vec<(LayerKind, usize, usize, bool)> {
    let mut plan = Vec::new();
    let mut ch = shape.in_channels();
    for &w in &shape.conv_widths {
        plan.push((LayerKind::Conv3x3, ch, w, true));
        ch = w;
    }
    for &w in &shape.fc_widths {
        plan.push((LayerKind::Pointwise, ch, w, true));
        ch = w;
    }
    plan.push((LayerKind::Pointwise, ch, 1, false));
    plan
}

impl<T: Real> PatchNet<T> {
    /// Every parameter set to zero: the logit is 0 and the output 0.5.
    pub fn zeros(shape: &NetShape) -> Result<Self> {
        shape.validate()?;
        let layers = layer_plan(shape)
            .into_iter()
            .map(|(kind, cin, cout, relu)| {
                let fan_in = if kind == LayerKind::Conv3x3 { 9 * cin } else { cin };
                Layer {
                    kind,
                    in_channels: cin,
                    out_channels: cout,
                    relu,
                    weights: vec![T::ZERO; fan_in * cout],
                    bias: vec![T::ZERO; cout],
                }
            })
            .collect();
        Ok(Self {
            shape: shape.clone(),
            layers,
        })
    }

    /// Uniform Glorot initialisation, zero biases.
    pub fn init(shape: &NetShape, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut net.layers {
            let taps = if layer.kind == LayerKind::Conv3x3 { 9 } else { 1 };
            let limit = (6.0 / ((layer.fan_in() + taps * layer.out_channels) as f64)).sqrt();
            for w in &mut layer.weights {
                *w = T::from_f64(rng.gen_range(-limit..=limit));
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from explicit layers, checking they match `shape`.
    pub fn from_layers(shape: &NetShape, layers: Vec<Layer<T>>) -> Result<Self> {
        shape.validate()?;
        let plan = layer_plan(shape);
        if plan.len() != layers.len() {
            return Err(Error::InvalidData(format!(
                "expected {} layers, got {}",
                plan.len(),
                layers.len()
            )));
        }
        for (i, ((kind, cin, cout, relu), layer)) in plan.iter().zip(&layers).enumerate() {
            let ok = layer.kind == *kind
                && layer.in_channels == *cin
                && layer.out_channels == *cout
                && layer.relu == *relu
                && layer.weights.len() == layer.fan_in() * cout
                && layer.bias.len() == *cout;
            if !ok {
                return Err(Error::InvalidData(format!("layer {i} does not match the shape")));
            }
        }
        Ok(Self {
            shape: shape.clone(),
            layers,
        })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> impl Iterator<Item = &T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    /// Converts parameters to another scalar type.
    pub fn cast<U: Real>(&self) -> PatchNet<U> {
        PatchNet {
            shape: self.shape.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    kind: l.kind,
                    in_channels: l.in_channels,
                    out_channels: l.out_channels,
                    relu: l.relu,
                    weights: l.weights.iter().map(|w| U::from_f64(w.to_f64())).collect(),
                    bias: l.bias.iter().map(|b| U::from_f64(b.to_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// A 9x9 input patch, channels interleaved per pixel (`[y][x][c]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Patch<T> {
    pub channels: usize,
    pub data: Vec<T>,
}

impl<T: Real> Patch<T> {
    pub fn new(channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != PATCH_SIZE * PATCH_SIZE * channels {
            return Err(Error::Dimension(format!(
                "patch needs {}x{}x{channels} values, got {}",
                PATCH_SIZE,
                PATCH_SIZE,
                data.len()
            )));
        }
        Ok(Self { channels, data })
    }
}

/// Extracts the patch centred on `(x, y)` with replicated borders. Values
/// are `disparity / d_max`; invalid neighbours take the centre's value.
/// Returns `None` when the centre itself is invalid.
pub fn extract_patch<T: Real>(
    disparity: &DisparityMap,
    image: Option<&Image>,
    x: usize,
    y: usize,
) -> Option<Patch<T>> {
    let center = disparity.get(x, y)?;
    let scale = 1.0 / disparity.d_max().max(f64::MIN_POSITIVE);
    let (w, h) = (disparity.width() as isize, disparity.height() as isize);
    let channels = 1 + image.is_some() as usize;
    let r = PATCH_RADIUS as isize;
    let mut data = Vec::with_capacity(PATCH_SIZE * PATCH_SIZE * channels);
    for dy in -r..=r {
        for dx in -r..=r {
            let xx = (x as isize + dx).clamp(0, w - 1) as usize;
            let yy = (y as isize + dy).clamp(0, h - 1) as usize;
            let d = disparity.get(xx, yy).unwrap_or(center);
            data.push(T::from_f64(d * scale));
            if let Some(img) = image {
                data.push(T::from_f64(img.get(xx, yy)));
            }
        }
    }
    Some(Patch { channels, data })
}

/// NHWC activation block.
#[derive(Clone, Debug)]
struct Act<T> {
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    data: Vec<T>,
}

impl<T: Real> Act<T> {
    fn rows(&self) -> usize {
        self.n * self.h * self.w
    }
}

fn im2col<T: Real>(input: &Act<T>) -> Vec<T> {
    let (oh, ow, c) = (input.h - 2, input.w - 2, input.c);
    let mut cols = Vec::with_capacity(input.n * oh * ow * 9 * c);
    for b in 0..input.n {
        for y in 0..oh {
            for x in 0..ow {
                for ky in 0..3 {
                    let start = ((b * input.h + y + ky) * input.w + x) * c;
                    cols.extend_from_slice(&input.data[start..start + 3 * c]);
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], n: usize, h: usize, w: usize, c: usize) -> Vec<T> {
    let (oh, ow) = (h - 2, w - 2);
    let mut out = vec![T::ZERO; n * h * w * c];
    let mut row = 0;
    for b in 0..n {
        for y in 0..oh {
            for x in 0..ow {
                let src = &cols[row * 9 * c..(row + 1) * 9 * c];
                for ky in 0..3 {
                    let start = ((b * h + y + ky) * w + x) * c;
                    for (o, s) in out[start..start + 3 * c].iter_mut().zip(&src[ky * 3 * c..]) {
                        *o += *s;
                    }
                }
                row += 1;
            }
        }
    }
    out
}

struct Trace<T> {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Act<T>>,
    /// im2col buffers of the convolution layers.
    cols: Vec<Option<Vec<T>>>,
}

fn layer_forward<T: Real>(layer: &Layer<T>, input: &Act<T>) -> (Option<Vec<T>>, Act<T>) {
    let (cols, oh, ow) = match layer.kind {
        LayerKind::Conv3x3 => (Some(im2col(input)), input.h - 2, input.w - 2),
        LayerKind::Pointwise => (None, input.h, input.w),
    };
    let rows = input.n * oh * ow;
    let cout = layer.out_channels;
    let mut out = vec![T::ZERO; rows * cout];
    let a = cols.as_deref().unwrap_or(&input.data);
    gemm(rows, layer.fan_in(), cout, a, Order::RowMajor, &layer.weights, Order::RowMajor, &mut out, false);
    for row in out.chunks_mut(cout) {
        for (v, &b) in row.iter_mut().zip(&layer.bias) {
            *v += b;
            if layer.relu && !(*v > T::ZERO) {
                *v = T::ZERO;
            }
        }
    }
    let act = Act {
        n: input.n,
        h: oh,
        w: ow,
        c: cout,
        data: out,
    };
    (cols, act)
}

fn run<T: Real>(net: &PatchNet<T>, input: Act<T>, keep_trace: bool) -> Trace<T> {
    let mut acts = vec![input];
    let mut cols = Vec::new();
    for layer in &net.layers {
        let (c, out) = layer_forward(layer, acts.last().expect("non-empty"));
        cols.push(c);
        if keep_trace {
            acts.push(out);
        } else {
            acts = vec![out];
            cols.clear();
        }
    }
    Trace { acts, cols }
}

/// Sigmoid evaluated in double precision and kept strictly inside (0, 1).
pub fn sigmoid(logit: f64) -> f64 {
    let o = if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    };
    o.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn stack_patches<T: Real>(net: &PatchNet<T>, patches: &[&Patch<T>]) -> Result<Act<T>> {
    let c = net.shape.in_channels();
    let mut data = Vec::with_capacity(patches.len() * PATCH_SIZE * PATCH_SIZE * c);
    for p in patches {
        if p.channels != c || p.data.len() != PATCH_SIZE * PATCH_SIZE * c {
            return Err(Error::Dimension(format!(
                "network expects {PATCH_SIZE}x{PATCH_SIZE}x{c} patches, got {} values with {} channels",
                p.data.len(),
                p.channels
            )));
        }
        data.extend_from_slice(&p.data);
    }
    Ok(Act {
        n: patches.len(),
        h: PATCH_SIZE,
        w: PATCH_SIZE,
        c,
        data,
    })
}

/// Raw network output before the sigmoid.
pub fn forward_logit<T: Real>(net: &PatchNet<T>, patch: &Patch<T>) -> Result<f64> {
    let input = stack_patches(net, &[patch])?;
    let trace = run(net, input, false);
    Ok(trace.acts[0].data[0].to_f64())
}

/// Confidence in (0, 1) for one patch.
pub fn forward<T: Real>(net: &PatchNet<T>, patch: &Patch<T>) -> Result<f64> {
    forward_logit(net, patch).map(sigmoid)
}

/// Confidences for a batch of patches.
pub fn forward_batch<T: Real>(net: &PatchNet<T>, patches: &[Patch<T>]) -> Result<Vec<f64>> {
    let refs: Vec<&Patch<T>> = patches.iter().collect();
    let trace = run(net, stack_patches(net, &refs)?, false);
    Ok(trace.acts[0].data.iter().map(|v| sigmoid(v.to_f64())).collect())
}

/// Slides the network over the whole map. Every valid pixel receives exactly
/// the value [`forward`] gives for its patch; pixels whose 9x9 neighbourhood
/// holds invalid disparities are evaluated patch by patch to honour the
/// centre-value imputation.
pub fn forward_dense<T: Real>(
    net: &PatchNet<T>,
    disparity: &DisparityMap,
    image: Option<&Image>,
) -> Result<ConfidenceMap> {
    let logits = forward_dense_logits(net, disparity, image)?;
    let data = logits
        .data()
        .iter()
        .zip(logits.valid())
        .map(|(&z, &ok)| if ok { sigmoid(z) } else { 0.0 })
        .collect();
    ConfidenceMap::new(logits.width(), logits.height(), data, logits.valid().to_vec())
}

/// Dense pre-sigmoid outputs. They rank pixels exactly like
/// [`forward_dense`] but without the sigmoid's saturation ties, so
/// evaluation should prefer them.
pub fn forward_dense_logits<T: Real>(
    net: &PatchNet<T>,
    disparity: &DisparityMap,
    image: Option<&Image>,
) -> Result<ScoreMap> {
    if net.shape.use_image != image.is_some() {
        return Err(Error::Config(
            "reference image must be supplied exactly when the network uses it".into(),
        ));
    }
    let (w, h) = (disparity.width(), disparity.height());
    if let Some(img) = image {
        crate::image::ensure_same_dims(disparity, img, "network input")?;
    }
    let c = net.shape.in_channels();
    let r = PATCH_RADIUS as isize;
    let (pw, ph) = (w + 2 * PATCH_RADIUS, h + 2 * PATCH_RADIUS);
    let scale = 1.0 / disparity.d_max().max(f64::MIN_POSITIVE);

    // Padded input; invalid pixels hold 0 here and are handled below.
    let mut padded = Vec::with_capacity(pw * ph * c);
    for py in 0..ph as isize {
        for px in 0..pw as isize {
            let x = (px - r).clamp(0, w as isize - 1) as usize;
            let y = (py - r).clamp(0, h as isize - 1) as usize;
            padded.push(T::from_f64(disparity.get(x, y).map_or(0.0, |d| d * scale)));
            if let Some(img) = image {
                padded.push(T::from_f64(img.get(x, y)));
            }
        }
    }

    let bands: Vec<(usize, usize)> = (0..h)
        .step_by(DENSE_BAND_ROWS)
        .map(|y0| (y0, (y0 + DENSE_BAND_ROWS).min(h)))
        .collect();
    let logits: Vec<Vec<T>> = bands
        .par_iter()
        .map(|&(y0, y1)| {
            let rows_in = y1 - y0 + 2 * PATCH_RADIUS;
            let input = Act {
                n: 1,
                h: rows_in,
                w: pw,
                c,
                data: padded[y0 * pw * c..(y0 + rows_in) * pw * c].to_vec(),
            };
            run(net, input, false).acts.pop().expect("output").data
        })
        .collect();
    let mut logits: Vec<f64> = logits.into_iter().flatten().map(|v| v.to_f64()).collect();

    let has_invalid = disparity.valid_count() < w * h;
    let mut valid = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !disparity.is_valid(x, y) {
                continue;
            }
            valid[i] = true;
            if has_invalid && neighbourhood_has_invalid(disparity, x, y) {
                let patch = extract_patch::<T>(disparity, image, x, y).expect("valid centre");
                logits[i] = forward_logit(net, &patch)?;
            }
        }
    }
    for (z, &ok) in logits.iter_mut().zip(&valid) {
        if !ok {
            *z = 0.0;
        }
    }
    ScoreMap::new(w, h, logits, valid)
}

fn neighbourhood_has_invalid(d: &DisparityMap, x: usize, y: usize) -> bool {
    let r = PATCH_RADIUS as isize;
    let (w, h) = (d.width() as isize, d.height() as isize);
    (-r..=r).any(|dy| {
        (-r..=r).any(|dx| {
            let xx = (x as isize + dx).clamp(0, w - 1) as usize;
            let yy = (y as isize + dy).clamp(0, h - 1) as usize;
            !d.is_valid(xx, yy)
        })
    })
}

/// Gradient of the mean MBCE over supervised samples with respect to every
/// parameter, together with the loss itself.
pub fn backward<T: Real>(
    net: &PatchNet<T>,
    patches: &[Patch<T>],
    labels: &[ProxyLabel],
) -> Result<(Gradients<T>, BatchLoss)> {
    if patches.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} patches vs {} labels",
            patches.len(),
            labels.len()
        )));
    }
    let supervised = labels.iter().filter(|l| l.is_supervised()).count();
    let mut grads = net.zeros_like();
    if supervised == 0 {
        log::warn!("batch without supervised pixels; zero gradient");
        return Ok((
            grads,
            BatchLoss {
                loss: 0.0,
                supervised: 0,
                no_supervision: true,
            },
        ));
    }
    let norm = 1.0 / supervised as f64;

    let chunks: Vec<(Gradients<T>, Vec<f64>)> = patches
        .par_chunks(GRAD_CHUNK)
        .zip(labels.par_chunks(GRAD_CHUNK))
        .map(|(p, l)| chunk_backward(net, p, l, norm))
        .collect::<Result<_>>()?;

    let mut losses = Vec::with_capacity(supervised);
    for (g, chunk_losses) in chunks {
        for (acc, part) in grads.layers.iter_mut().zip(&g.layers) {
            for (a, b) in acc.weights.iter_mut().zip(&part.weights) {
                *a += *b;
            }
            for (a, b) in acc.bias.iter_mut().zip(&part.bias) {
                *a += *b;
            }
        }
        losses.extend(chunk_losses);
    }
    let loss = BatchLoss {
        loss: pairwise_sum(&losses) * norm,
        supervised,
        no_supervision: false,
    };
    Ok((grads, loss))
}

fn chunk_backward<T: Real>(
    net: &PatchNet<T>,
    patches: &[Patch<T>],
    labels: &[ProxyLabel],
    norm: f64,
) -> Result<(Gradients<T>, Vec<f64>)> {
    let refs: Vec<&Patch<T>> = patches.iter().collect();
    let trace = run(net, stack_patches(net, &refs)?, true);
    let logits = &trace.acts.last().expect("output").data;

    let mut losses = Vec::new();
    let mut grad_out: Vec<T> = logits
        .iter()
        .zip(labels)
        .map(|(z, &label)| {
            if !label.is_supervised() {
                return T::ZERO;
            }
            let o = sigmoid(z.to_f64());
            let (loss, dloss) = mbce_loss(o, label);
            losses.push(loss);
            T::from_f64(dloss * o * (1.0 - o) * norm)
        })
        .collect();

    let mut grads = net.zeros_like();
    for (l, layer) in net.layers.iter().enumerate().rev() {
        let out = &trace.acts[l + 1];
        let input = &trace.acts[l];
        if layer.relu {
            for (g, &a) in grad_out.iter_mut().zip(&out.data) {
                if !(a > T::ZERO) {
                    *g = T::ZERO;
                }
            }
        }
        let rows = out.rows();
        let (k, cout) = (layer.fan_in(), layer.out_channels);
        let cols = trace.cols[l].as_deref().unwrap_or(&input.data);
        let g = &mut grads.layers[l];
        gemm(k, rows, cout, cols, Order::Transposed, &grad_out, Order::RowMajor, &mut g.weights, true);
        for row in grad_out.chunks(cout) {
            for (b, &v) in g.bias.iter_mut().zip(row) {
                *b += v;
            }
        }
        if l == 0 {
            break;
        }
        let mut grad_cols = vec![T::ZERO; rows * k];
        gemm(rows, cout, k, &grad_out, Order::RowMajor, &layer.weights, Order::Transposed, &mut grad_cols, false);
        grad_out = match layer.kind {
            LayerKind::Conv3x3 => col2im(&grad_cols, input.n, input.h, input.w, input.c),
            LayerKind::Pointwise => grad_cols,
        };
    }
    Ok((grads, losses))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_shape() -> NetShape {
        NetShape {
            conv_widths: [4; 4],
            fc_widths: vec![8],
            use_image: false,
        }
    }

    fn random_patch(seed: u64) -> Patch<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Patch::new(1, (0..81).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_net_outputs_half() {
        let net = PatchNet::<f32>::zeros(&NetShape::default()).unwrap();
        let patch = Patch::new(1, vec![0.3f32; 81]).unwrap();
        assert_eq!(forward(&net, &patch).unwrap(), 0.5);
    }

    #[test]
    fn wrong_patch_size_rejected() {
        let net = PatchNet::<f32>::zeros(&tiny_shape()).unwrap();
        let bad = Patch {
            channels: 1,
            data: vec![0.0f32; 49],
        };
        assert!(forward(&net, &bad).is_err());
        assert!(Patch::new(1, vec![0.0f32; 49]).is_err());
    }

    #[test]
    fn default_shape_has_ccnn_widths() {
        let net = PatchNet::<f32>::zeros(&NetShape::default()).unwrap();
        let widths: Vec<usize> = net.layers().iter().map(|l| l.out_channels).collect();
        assert_eq!(widths, vec![64, 64, 64, 64, 100, 100, 1]);
    }

    #[test]
    fn sigmoid_stays_open() {
        for z in [-1000.0, -40.0, 0.0, 40.0, 1000.0] {
            let o = sigmoid(z);
            assert!(o > 0.0 && o < 1.0, "{z} -> {o}");
        }
    }

    #[test]
    fn unsupervised_batch_has_zero_gradient() {
        let net = PatchNet::<f64>::init(&tiny_shape(), 1).unwrap();
        let patches: Vec<_> = (0..5).map(random_patch).collect();
        let (g, loss) = backward(&net, &patches, &[ProxyLabel::NONE; 5]).unwrap();
        assert!(loss.no_supervision);
        assert!(g.parameters().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let net = PatchNet::<f64>::init(&tiny_shape(), 2).unwrap();
        let patches: Vec<_> = (0..6).map(random_patch).collect();
        let labels: Vec<_> = (0..6)
            .map(|i| ProxyLabel {
                positive: i % 2 == 0,
                negative: i % 3 == 1,
            })
            .collect();
        let (g1, _) = backward(&net, &patches, &labels).unwrap();
        let doubled: Vec<_> = patches.iter().chain(&patches).cloned().collect();
        let labels2: Vec<_> = labels.iter().chain(&labels).copied().collect();
        let (g2, _) = backward(&net, &doubled, &labels2).unwrap();
        for (a, b) in g1.parameters().zip(g2.parameters()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn dense_of_constant_map_is_constant() {
        let net = PatchNet::<f32>::init(&tiny_shape(), 5).unwrap();
        let d = DisparityMap::constant(20, 13, 32.0, 11.0).unwrap();
        let conf = forward_dense(&net, &d, None).unwrap();
        let first = conf.data()[0];
        assert!(conf.data().iter().all(|&v| v == first));
    }
}
