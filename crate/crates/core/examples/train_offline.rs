//! Offline training on proxy labels, then a comparison with the black-box
//! cues on held-out scenes. Pass an iteration count to train longer.
//!
//! cargo run --release --example train_offline -- 2000

use stereoconf::cues::{black_box_cues, CueConfig};
use stereoconf::eval::{mean_row, sparsification, EvalConfig, EvalRow};
use stereoconf::matcher::{Algorithm, CensusMatcher, MatcherConfig, StereoMatcher};
use stereoconf::network::{forward_dense_logits, save_checkpoint, train_offline, PatchNet, TrainConfig, TrainingFrame};
use stereoconf::proxy::MbceConfig;
use stereoconf::scene::{generate_scene, SceneConfig};

fn main() -> stereoconf::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let scene = SceneConfig {
        textureless_fraction: 0.3,
        ..SceneConfig::default()
    };
    let matcher = CensusMatcher::new(MatcherConfig {
        algorithm: Algorithm::Wta,
        ..MatcherConfig::default()
    })?;
    let (cues, mbce) = (CueConfig::default(), MbceConfig::default());

    let mut frames = Vec::new();
    for seed in 0..20 {
        let s = generate_scene(&scene, seed)?;
        let d = matcher.disparity(&s.left, &s.right)?;
        frames.push(TrainingFrame::from_views(&s.left, &s.right, d, &cues, &mbce, false)?);
    }
    let cfg = TrainConfig {
        iterations,
        learning_rate: 0.01,
        log_every: (iterations / 5).max(1),
        ..TrainConfig::default()
    };
    let report = train_offline(PatchNet::init(&cfg.shape, 1)?, &frames, &cfg)?;
    let path = std::env::temp_dir().join("stereoconf_example.ckpt");
    save_checkpoint(&report.checkpoint, &path)?;
    println!("checkpoint saved to {}", path.display());

    let eval = EvalConfig::default();
    let names = ["network", "-delta", "da", "u"];
    let mut rows: Vec<Vec<EvalRow>> = vec![Vec::new(); names.len()];
    for seed in 100..105 {
        let s = generate_scene(&scene, seed)?;
        let d = matcher.disparity(&s.left, &s.right)?;
        let bb = black_box_cues(&s.left, &s.right, &d, &cues)?;
        let confs = [
            forward_dense_logits(&report.checkpoint.net, &d, None)?,
            bb.delta.map(|v| -v),
            bb.agreement,
            bb.uniqueness.to_scores(),
        ];
        for ((name, out), conf) in names.iter().zip(&mut rows).zip(&confs) {
            out.push(EvalRow::new(name, &seed.to_string(), &sparsification(conf, &d, &s.gt, &eval)?));
        }
    }
    for (name, r) in names.iter().zip(&rows) {
        let m = mean_row(name, r).expect("rows present");
        println!("{name:>8}: AUC {:.4} (optimal {:.4})", m.auc, m.optimal_auc);
    }
    Ok(())
}
