//! Sparsification curves of a perfect, a constant and a noisy confidence,
//! and the CSV table the evaluation step writes.
//!
//! cargo run --release --example sparsification

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereoconf::eval::{csv_string, sparsification, EvalConfig, EvalRow};
use stereoconf::{DisparityMap, GroundTruthMap, ScoreMap};

fn main() -> stereoconf::Result<()> {
    let (w, h) = (100, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // 20% of pixels off by 5 px.
    let gt: Vec<f64> = (0..w * h).map(|_| rng.gen_range(1.0..30.0)).collect();
    let d: Vec<f64> = gt
        .iter()
        .map(|&g| if rng.gen_bool(0.2) { (g + 5.0f64).min(40.0) } else { g })
        .collect();
    let err: Vec<f64> = d.iter().zip(&gt).map(|(a, b)| (a - b).abs()).collect();
    let dm = DisparityMap::new(w, h, 40.0, d)?;
    let gm = GroundTruthMap::new(w, h, gt)?;

    let all = vec![true; w * h];
    let measures = [
        ("perfect", err.iter().map(|e| -e).collect::<Vec<_>>()),
        ("constant", vec![0.5; w * h]),
        ("noisy", err.iter().map(|e| -e + rng.gen_range(0.0..8.0)).collect()),
    ];
    let cfg = EvalConfig::default();
    let mut rows = Vec::new();
    for (name, conf) in measures {
        let r = sparsification(&ScoreMap::new(w, h, conf, all.clone())?, &dm, &gm, &cfg)?;
        let curve: Vec<String> = r.curve.iter().step_by(4).map(|(f, e)| format!("{f:.2}:{e:.3}")).collect();
        println!("{name:>8}: {}", curve.join(" "));
        rows.push(EvalRow::new(name, "demo", &r));
    }
    println!("closed form optimum for 20% errors: {:.4}", 0.2 + 0.8 * 0.8f64.ln());
    print!("{}", csv_string(&rows));
    Ok(())
}
