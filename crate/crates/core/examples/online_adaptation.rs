//! A network trained on clean scenes meets a noisier, sparser stream. The
//! frozen and the adapting copy see the same frames; each frame is scored
//! before the update it triggers.
//!
//! cargo run --release --example online_adaptation

use stereoconf::cues::CueConfig;
use stereoconf::eval::{mean_row, EvalConfig};
use stereoconf::matcher::{Algorithm, CensusMatcher, MatcherConfig, StereoMatcher};
use stereoconf::network::{adapt_online, train_offline, AdaptFrame, PatchNet, TrainConfig, TrainingFrame};
use stereoconf::proxy::MbceConfig;
use stereoconf::scene::{generate_scene, SceneConfig};

fn main() -> stereoconf::Result<()> {
    let source = SceneConfig {
        textureless_fraction: 0.3,
        ..SceneConfig::default()
    };
    let target = SceneConfig {
        noise: 0.1,
        texture_density: 0.5,
        texture_contrast: 0.5,
        ..source.clone()
    };
    let matcher = CensusMatcher::new(MatcherConfig {
        algorithm: Algorithm::Wta,
        ..MatcherConfig::default()
    })?;
    let (cues, mbce) = (CueConfig::default(), MbceConfig::default());

    let mut frames = Vec::new();
    for seed in 0..20 {
        let s = generate_scene(&source, seed)?;
        let d = matcher.disparity(&s.left, &s.right)?;
        frames.push(TrainingFrame::from_views(&s.left, &s.right, d, &cues, &mbce, false)?);
    }
    let cfg = TrainConfig {
        iterations: 1500,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let net = train_offline(PatchNet::init(&cfg.shape, 1)?, &frames, &cfg)?.checkpoint.net;

    let mut stream = Vec::new();
    for seed in 0..60 {
        let s = generate_scene(&target, 5000 + seed)?;
        let d = matcher.disparity(&s.left, &s.right)?;
        stream.push(AdaptFrame {
            name: format!("t{seed:03}"),
            left: s.left,
            right: s.right,
            disparity: d,
            gt: Some(s.gt),
        });
    }
    let eval = EvalConfig::default();
    let frozen_cfg = TrainConfig {
        adapt_learning_rate: 0.0,
        ..cfg.clone()
    };
    let frozen = adapt_online(net.clone(), stream.clone(), &frozen_cfg, &cues, &mbce, &eval, "frozen")?;
    let adapted = adapt_online(net, stream, &cfg, &cues, &mbce, &eval, "adapted")?;
    for (a, b) in frozen.rows.iter().zip(&adapted.rows).step_by(10) {
        println!("{}: frozen {:.4} adapted {:.4}", a.frame, a.auc, b.auc);
    }
    let (f, a) = (mean_row("", &frozen.rows).unwrap(), mean_row("", &adapted.rows).unwrap());
    println!("mean AUC frozen {:.4}, adapted {:.4}", f.auc, a.auc);
    Ok(())
}
