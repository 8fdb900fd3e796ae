//! Cue, matcher and evaluation outputs against independent reference code.

mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use stereoconf::cues::{disparity_agreement, uniqueness_criterion, CueConfig};
use stereoconf::eval::{optimal_auc, sparsification, sparsify, EvalConfig};
use stereoconf::matcher::{sgm_aggregate, sgm_path, wta, CostVolume};
use stereoconf::{DisparityMap, GroundTruthMap, ScoreMap};

#[test]
fn uniqueness_matches_pairwise_collisions() {
    let mut rng = rng(1);
    for _ in 0..300 {
        let w = rng.gen_range(1..60);
        let d_max = rng.gen_range(1..20) as f64;
        let row = random_row(&mut rng, w, d_max);
        let map = DisparityMap::new(w, 1, d_max, to_raw(&row)).unwrap();
        let uc = uniqueness_criterion(&map, d_max);
        let oracle = uc_pairwise(&row);
        for x in 0..w {
            let expected = row[x].map(|_| oracle[x]);
            assert_eq!(uc.get(x, 0), expected, "row {row:?} x {x}");
        }
    }
}

#[test]
fn uniqueness_on_slanted_rows() {
    // Slope 1: every pixel maps onto the same column as its neighbour.
    let ramp: Vec<f64> = (0..10).map(|x| x as f64).collect();
    let map = DisparityMap::new(10, 1, 16.0, ramp).unwrap();
    assert_eq!(uniqueness_criterion(&map, 16.0).count_true(), 0);
    // Slope 0.5 collides only where rounding makes targets coincide.
    let half: Vec<Option<f64>> = (0..12).map(|x| Some(x as f64 * 0.5)).collect();
    let map = DisparityMap::new(12, 1, 16.0, to_raw(&half)).unwrap();
    let uc = uniqueness_criterion(&map, 16.0);
    let oracle = uc_pairwise(&half);
    assert!(oracle.iter().any(|&u| !u));
    assert_eq!(uc.data(), &oracle[..]);
}

#[test]
fn agreement_matches_window_count() {
    let mut rng = rng(2);
    let cfg = CueConfig::default();
    for _ in 0..40 {
        let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..15));
        let row = random_row(&mut rng, w * h, 12.0);
        let map = DisparityMap::new(w, h, 12.0, to_raw(&row)).unwrap();
        let da = disparity_agreement(&map, &cfg).unwrap();
        let oracle = da_brute(&row, w, h, cfg.da_window, cfg.da_tolerance);
        for i in 0..w * h {
            assert_eq!(da.get(i % w, i / w), oracle[i]);
        }
    }
}

#[test]
fn auc_matches_brute_force() {
    let mut rng = rng(3);
    for _ in 0..100 {
        let n = 40;
        let conf: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..8) as f64) / 8.0).collect();
        let wrong: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let step = [0.05, 0.1, 0.25][rng.gen_range(0..3)];
        let cfg = EvalConfig { tau: 1.0, step };
        let (_, auc) = sparsify(&conf, &wrong, &cfg).unwrap();
        assert!((auc - auc_brute(&conf, &wrong, step)).abs() <= 1e-12);
    }
}

#[test]
fn constant_confidence_removes_in_index_order() {
    let wrong: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
    let (_, auc) = sparsify(&[0.5; 40], &wrong, &EvalConfig::default()).unwrap();
    assert_eq!(auc, auc_brute(&[0.5; 40], &wrong, 0.05));
}

#[test]
fn optimal_auc_follows_closed_form() {
    let mut rng = rng(4);
    let n = 10_000;
    for eps in [0.05, 0.1, 0.2, 0.3, 0.5] {
        let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..20.0)).collect();
        let bad = (eps * n as f64).round() as usize;
        let d: Vec<f64> = gt
            .iter()
            .enumerate()
            .map(|(i, &g)| if i < bad { g + rng.gen_range(3.5..10.0) } else { g + rng.gen_range(-1.0..1.0) })
            .collect();
        let dm = DisparityMap::new(100, 100, 40.0, d).unwrap();
        let gm = GroundTruthMap::new(100, 100, gt).unwrap();
        let got = optimal_auc(&dm, &gm, &EvalConfig::default()).unwrap();
        let closed = eps + (1.0 - eps) * (1.0 - eps).ln();
        assert!((got - closed).abs() < 0.01, "eps {eps}: {got} vs {closed}");
    }
}

fn random_costs(rng: &mut rand_chacha::ChaCha8Rng, n: usize, nd: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..nd).map(|_| rng.gen_range(0..25) as f64).collect()).collect()
}

fn volume(costs: &[Vec<f64>]) -> CostVolume {
    let nd = costs[0].len();
    CostVolume::new(costs.len(), 1, nd - 1, costs.concat()).unwrap()
}

#[test]
fn sgm_row_matches_dynamic_programming() {
    let mut rng = rng(5);
    for _ in 0..200 {
        let (n, nd) = (rng.gen_range(1..30), rng.gen_range(2..10));
        let costs = random_costs(&mut rng, n, nd);
        let (p1, p2) = (rng.gen_range(0..5) as f64, rng.gen_range(5..40) as f64);
        let vol = volume(&costs);
        let fwd = sgm_path(&vol, (1, 0), p1, p2).unwrap();
        let dp = sgm_row_dp(&costs, p1, p2);
        for x in 0..n {
            let curve = fwd.curve(x, 0);
            let lmin = curve.iter().copied().fold(f64::INFINITY, f64::min);
            let emin = dp[x].iter().copied().fold(f64::INFINITY, f64::min);
            for d in 0..nd {
                assert!(((curve[d] - lmin) - (dp[x][d] - emin)).abs() < 1e-9);
            }
        }

        // Eight paths on a single row: both horizontal passes plus six
        // single-pixel paths that copy the raw cost.
        let rev: Vec<Vec<f64>> = costs.iter().rev().cloned().collect();
        let bwd_dp: Vec<Vec<f64>> = sgm_row_dp(&rev, p1, p2).into_iter().rev().collect();
        let all = sgm_aggregate(&vol, p1, p2, 8).unwrap();
        let (a, b) = (wta(&all), wta(&volume(
            &(0..n)
                .map(|x| {
                    let fmin = dp[x].iter().copied().fold(f64::INFINITY, f64::min);
                    let bmin = bwd_dp[x].iter().copied().fold(f64::INFINITY, f64::min);
                    (0..nd).map(|d| dp[x][d] - fmin + bwd_dp[x][d] - bmin + 6.0 * costs[x][d]).collect()
                })
                .collect::<Vec<_>>(),
        )));
        assert_eq!(a, b);
    }
}

#[test]
fn sgm_row_minimum_is_global_chain_minimum() {
    let mut rng = rng(6);
    for _ in 0..100 {
        let (n, nd) = (rng.gen_range(1..6), rng.gen_range(2..5));
        let costs = random_costs(&mut rng, n, nd);
        let (p1, p2) = (rng.gen_range(0..5) as f64, rng.gen_range(5..40) as f64);
        let dp = sgm_row_dp(&costs, p1, p2);
        let best = dp[n - 1].iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(best, chain_energy_exhaustive(&costs, p1, p2));
    }
}

#[test]
fn sgm_without_penalties_is_wta() {
    let mut rng = rng(7);
    let (w, h, dm) = (17, 9, 6);
    let data: Vec<f64> = (0..w * h * (dm + 1)).map(|_| rng.gen_range(0..25) as f64).collect();
    let vol = CostVolume::new(w, h, dm, data).unwrap();
    for paths in [4, 8] {
        assert_eq!(wta(&sgm_aggregate(&vol, 0.0, 0.0, paths).unwrap()), wta(&vol));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_never_beats_optimal(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let n = r.gen_range(1..80);
        let gt: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..20.0)).collect();
        let d: Vec<f64> = gt.iter().map(|g| (g + r.gen_range(-8.0..8.0f64)).clamp(0.0, 30.0)).collect();
        let conf: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..1.0)).collect();
        let dm = DisparityMap::new(n, 1, 30.0, d).unwrap();
        let gm = GroundTruthMap::new(n, 1, gt).unwrap();
        let res = sparsification(&ScoreMap::new(n, 1, conf, vec![true; n]).unwrap(), &dm, &gm, &EvalConfig::default()).unwrap();
        prop_assert!(res.auc >= res.optimal_auc - 1e-12);
        prop_assert!(res.curve.iter().all(|&(_, e)| (0.0..=1.0).contains(&e)));
    }

    #[test]
    fn auc_invariant_under_monotone_transform(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let n = r.gen_range(1..60);
        let conf: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..3.0)).collect();
        let wrong: Vec<bool> = (0..n).map(|_| r.gen_bool(0.4)).collect();
        let cfg = EvalConfig::default();
        let a = sparsify(&conf, &wrong, &cfg).unwrap().1;
        let mapped: Vec<f64> = conf.iter().map(|c| 1.0 / (1.0 + (-c).exp())).collect();
        prop_assert_eq!(a, sparsify(&mapped, &wrong, &cfg).unwrap().1);
    }

    #[test]
    fn decreasing_error_function_is_optimal(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let n = r.gen_range(1..60);
        let err: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..10.0)).collect();
        let wrong: Vec<bool> = err.iter().map(|&e| e > 3.0).collect();
        let cfg = EvalConfig::default();
        let conf: Vec<f64> = err.iter().map(|e| (-e).exp()).collect();
        let perfect: Vec<f64> = err.iter().map(|e| -e).collect();
        prop_assert_eq!(sparsify(&conf, &wrong, &cfg).unwrap().1, sparsify(&perfect, &wrong, &cfg).unwrap().1);
    }

    #[test]
    fn bad_tau_permutation_invariant(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let n = r.gen_range(1..50);
        let gt: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..20.0)).collect();
        let d: Vec<f64> = gt.iter().map(|g| (g + r.gen_range(-8.0..8.0f64)).clamp(0.0, 30.0)).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.reverse();
        let a = stereoconf::eval::bad_tau(&DisparityMap::new(n, 1, 30.0, d.clone()).unwrap(), &GroundTruthMap::new(n, 1, gt.clone()).unwrap(), 3.0).unwrap();
        let b = stereoconf::eval::bad_tau(
            &DisparityMap::new(n, 1, 30.0, idx.iter().map(|&i| d[i]).collect()).unwrap(),
            &GroundTruthMap::new(n, 1, idx.iter().map(|&i| gt[i]).collect()).unwrap(),
            3.0,
        ).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn uniqueness_proptest(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let w = r.gen_range(1..40);
        let row = random_row(&mut r, w, 10.0);
        let map = DisparityMap::new(w, 1, 10.0, to_raw(&row)).unwrap();
        let uc = uniqueness_criterion(&map, 10.0);
        let oracle = uc_pairwise(&row);
        for x in 0..w {
            prop_assert_eq!(uc.get(x, 0), row[x].map(|_| oracle[x]));
        }
    }
}
