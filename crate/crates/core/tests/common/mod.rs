//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniqueness by comparing every pair of pixels in a row.
pub fn uc_pairwise(row: &[Option<f64>]) -> Vec<bool> {
    let target = |x: usize| row[x].map(|d| x as i64 - d.round_ties_even() as i64);
    (0..row.len())
        .map(|x| {
            let Some(t) = target(x) else { return false };
            !(0..row.len()).any(|o| o != x && target(o) == Some(t))
        })
        .collect()
}

/// Window count with explicit bounds checks; `None` marks invalid pixels.
pub fn da_brute(map: &[Option<f64>], w: usize, h: usize, n: usize, tol: f64) -> Vec<Option<f64>> {
    let r = (n / 2) as i64;
    (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            let c = map[i]?;
            let mut count = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (xx, yy) = (x + dx, y + dy);
                    if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                        continue;
                    }
                    if let Some(v) = map[(yy * w as i64 + xx) as usize] {
                        if (v - c).abs() <= tol {
                            count += 1;
                        }
                    }
                }
            }
            Some(count as f64 / (n * n) as f64)
        })
        .collect()
}

/// Sort, remove, count, integrate: one loop per curve point.
pub fn auc_brute(conf: &[f64], wrong: &[bool], step: f64) -> f64 {
    let n = conf.len();
    let mut order: Vec<(f64, usize)> = conf.iter().copied().zip(0..).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let points = (1.0 / step + 1e-9).floor() as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..points {
        let f = i as f64 * step;
        let k = ((f * n as f64).round() as usize).min(n - 1);
        let mut bad = 0;
        for &(_, idx) in &order[k..] {
            if wrong[idx] {
                bad += 1;
            }
        }
        xs.push(f);
        ys.push(bad as f64 / (n - k) as f64);
    }
    let mut area = 0.0;
    for i in 1..points {
        area += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) / 2.0;
    }
    area / (xs[points - 1] - xs[0])
}

/// Forward energies along one row: `E(x, d) = C(x, d) + min_d' E(x-1, d') + pen(d, d')`.
pub fn sgm_row_dp(costs: &[Vec<f64>], p1: f64, p2: f64) -> Vec<Vec<f64>> {
    let pen = |a: usize, b: usize| match a.abs_diff(b) {
        0 => 0.0,
        1 => p1,
        _ => p2,
    };
    let mut e: Vec<Vec<f64>> = vec![costs[0].clone()];
    for x in 1..costs.len() {
        let prev = &e[x - 1];
        let cur = (0..costs[x].len())
            .map(|d| {
                costs[x][d]
                    + (0..prev.len())
                        .map(|q| prev[q] + pen(d, q))
                        .fold(f64::INFINITY, f64::min)
            })
            .collect();
        e.push(cur);
    }
    e
}

/// Minimum chain energy over every labeling of a short row.
pub fn chain_energy_exhaustive(costs: &[Vec<f64>], p1: f64, p2: f64) -> f64 {
    let nd = costs[0].len();
    let n = costs.len();
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut e = costs[0][labels[0]];
        for x in 1..n {
            e += costs[x][labels[x]]
                + match labels[x].abs_diff(labels[x - 1]) {
                    0 => 0.0,
                    1 => p1,
                    _ => p2,
                };
        }
        best = best.min(e);
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < nd {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random row of disparities in `[0, d_max]` with some invalid entries.
pub fn random_row(rng: &mut ChaCha8Rng, w: usize, d_max: f64) -> Vec<Option<f64>> {
    (0..w)
        .map(|_| {
            if rng.gen_bool(0.1) {
                None
            } else if rng.gen_bool(0.5) {
                Some(rng.gen_range(0..=d_max as u32) as f64)
            } else {
                Some(rng.gen_range(0.0..=d_max))
            }
        })
        .collect()
}

pub fn to_raw(row: &[Option<f64>]) -> Vec<f64> {
    row.iter().map(|d| d.unwrap_or(-1.0)).collect()
}

/// Signs of every ReLU pre-activation, from plain nested loops.
pub fn relu_pattern(net: &stereoconf::network::PatchNet<f64>, patch: &stereoconf::network::Patch<f64>) -> Vec<bool> {
    use stereoconf::network::LayerKind;
    let (mut h, mut w, mut c) = (9usize, 9usize, patch.channels);
    let mut act = patch.data.clone();
    let mut pattern = Vec::new();
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
                    let taps = if layer.kind == LayerKind::Conv3x3 { 3 } else { 1 };
                    for ky in 0..taps {
                        for kx in 0..taps {
                            for ci in 0..c {
                                let k = (ky * taps + kx) * c + ci;
                                s += act[((y + ky) * w + x + kx) * c + ci] * layer.weights[k * cout + o];
                            }
                        }
                    }
                    if layer.relu {
                        pattern.push(s > 0.0);
                        s = s.max(0.0);
                    }
                    out[(y * ow + x) * cout + o] = s;
                }
            }
        }
        act = out;
        (h, w, c) = (oh, ow, cout);
    }
    pattern
}
