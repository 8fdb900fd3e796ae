//! Network forward/backward checked against naive reference code.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereoconf::network::{
    backward, extract_patch, forward, forward_dense, forward_logit, sigmoid, LayerKind, NetShape, Patch, PatchNet,
};
use stereoconf::proxy::{batch_loss, ProxyLabel};
use stereoconf::DisparityMap;

fn tiny() -> NetShape {
    NetShape {
        conv_widths: [4; 4],
        fc_widths: vec![8],
        use_image: false,
    }
}

fn random_patch(rng: &mut ChaCha8Rng) -> Patch<f64> {
    Patch::new(1, (0..81).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

fn random_label(rng: &mut ChaCha8Rng) -> ProxyLabel {
    match rng.gen_range(0..3) {
        0 => ProxyLabel { positive: true, negative: false },
        1 => ProxyLabel { positive: false, negative: true },
        _ => ProxyLabel { positive: true, negative: true },
    }
}

/// Straight nested loops over `[y][x][c]` feature maps.
fn naive_logit(net: &PatchNet<f64>, patch: &Patch<f64>) -> f64 {
    let (mut h, mut w, mut c) = (9usize, 9usize, patch.channels);
    let mut act = patch.data.clone();
    for layer in net.layers() {
        let cout = layer.out_channels;
        let (oh, ow) = match layer.kind {
            LayerKind::Conv3x3 => (h - 2, w - 2),
            LayerKind::Pointwise => (h, w),
        };
        let mut out = vec![0.0; oh * ow * cout];
        for y in 0..oh {
            for x in 0..ow {
                for o in 0..cout {
                    let mut s = layer.bias[o];
                    match layer.kind {
                        LayerKind::Conv3x3 => {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    for ci in 0..c {
                                        let k = (ky * 3 + kx) * c + ci;
                                        s += act[((y + ky) * w + x + kx) * c + ci] * layer.weights[k * cout + o];
                                    }
                                }
                            }
                        }
                        LayerKind::Pointwise => {
                            for ci in 0..c {
                                s += act[(y * w + x) * c + ci] * layer.weights[ci * cout + o];
                            }
                        }
                    }
                    out[(y * ow + x) * cout + o] = if layer.relu { s.max(0.0) } else { s };
                }
            }
        }
        act = out;
        h = oh;
        w = ow;
        c = cout;
    }
    act[0]
}

fn randomise_biases(net: &mut PatchNet<f64>, rng: &mut ChaCha8Rng) {
    for l in net.layers_mut() {
        for b in &mut l.bias {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
}

#[test]
fn forward_matches_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..20 {
        let mut net = PatchNet::<f64>::init(&NetShape::default(), seed).unwrap();
        randomise_biases(&mut net, &mut rng);
        let patch = random_patch(&mut rng);
        let fast = forward(&net, &patch).unwrap();
        let slow = sigmoid(naive_logit(&net, &patch));
        assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
    }
}

fn batch_loss_of(net: &PatchNet<f64>, patches: &[Patch<f64>], labels: &[ProxyLabel]) -> f64 {
    let outs: Vec<f64> = patches.iter().map(|p| forward(net, p).unwrap()).collect();
    batch_loss(&outs, labels).unwrap().loss
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = PatchNet::<f64>::init(&tiny(), 3).unwrap();
    randomise_biases(&mut net, &mut rng);
    let patches: Vec<_> = (0..6).map(|_| random_patch(&mut rng)).collect();
    let labels: Vec<_> = (0..6).map(|_| random_label(&mut rng)).collect();
    let (grads, loss) = backward(&net, &patches, &labels).unwrap();
    assert!((loss.loss - batch_loss_of(&net, &patches, &labels)).abs() < 1e-12);

    let h = 1e-6;
    let n = net.num_parameters();
    let analytic: Vec<f64> = grads.parameters().copied().collect();
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut plus = net.clone();
        *plus.parameters_mut().nth(k).unwrap() += h;
        let mut minus = net.clone();
        *minus.parameters_mut().nth(k).unwrap() -= h;
        let numeric =
            (batch_loss_of(&plus, &patches, &labels) - batch_loss_of(&minus, &patches, &labels)) / (2.0 * h);
        let scale = numeric.abs().max(analytic[k].abs()).max(1e-6);
        worst = worst.max((numeric - analytic[k]).abs() / scale);
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn dense_equals_patchwise_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = PatchNet::<f32>::init(&NetShape::default(), 4).unwrap();
    let (w, h) = (37, 23);
    let data: Vec<f64> = (0..w * h)
        .map(|_| if rng.gen_bool(0.1) { -1.0 } else { rng.gen_range(0.0..32.0) })
        .collect();
    let d = DisparityMap::new(w, h, 32.0, data).unwrap();
    let dense = forward_dense(&net, &d, None).unwrap();
    for _ in 0..50 {
        let (x, y) = (rng.gen_range(0..w), rng.gen_range(0..h));
        match extract_patch::<f32>(&d, None, x, y) {
            Some(p) => assert_eq!(dense.get(x, y), Some(forward(&net, &p).unwrap())),
            None => assert_eq!(dense.get(x, y), None),
        }
    }
}

#[test]
fn zero_net_dense_is_half() {
    let net = PatchNet::<f32>::zeros(&NetShape::default()).unwrap();
    let d = DisparityMap::constant(12, 10, 16.0, 3.0).unwrap();
    let conf = forward_dense(&net, &d, None).unwrap();
    assert!(conf.data().iter().all(|&v| v == 0.5));
}

#[test]
fn image_channel_patches() {
    let shape = NetShape { use_image: true, ..tiny() };
    let net = PatchNet::<f32>::init(&shape, 2).unwrap();
    let d = DisparityMap::constant(12, 12, 16.0, 3.0).unwrap();
    let img = stereoconf::Image::new(12, 12, (0..144).map(|i| i as f64 / 144.0).collect()).unwrap();
    let dense = forward_dense(&net, &d, Some(&img)).unwrap();
    let p = extract_patch::<f32>(&d, Some(&img), 5, 6).unwrap();
    assert_eq!(p.channels, 2);
    assert_eq!(dense.get(5, 6), Some(forward(&net, &p).unwrap()));
    assert!(forward_dense(&net, &d, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_strictly_inside_unit_interval(seed in 0u64..1000, scale in 0.0f64..1e4) {
        let mut net = PatchNet::<f64>::init(&tiny(), seed).unwrap();
        for p in net.parameters_mut() {
            *p *= scale;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = forward(&net, &random_patch(&mut rng)).unwrap();
        prop_assert!(o > 0.0 && o < 1.0);
    }

    #[test]
    fn f32_and_f64_nets_agree(seed in 0u64..1000) {
        let net = PatchNet::<f64>::init(&tiny(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_patch(&mut rng);
        let p32 = Patch::new(1, p.data.iter().map(|&v| v as f32).collect()).unwrap();
        let a = forward_logit(&net, &p).unwrap();
        let b = forward_logit(&net.cast::<f32>(), &p32).unwrap();
        prop_assert!((a - b).abs() < 1e-4 * (1.0 + a.abs()));
    }
}
