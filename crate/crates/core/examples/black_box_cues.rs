//! The three black-box cues and how well each ranks matching errors on its
//! own.
//!
//! cargo run --release --example black_box_cues

use stereoconf::cues::{black_box_cues, CueConfig};
use stereoconf::eval::{sparsification, EvalConfig};
use stereoconf::matcher::{Algorithm, CensusMatcher, MatcherConfig, StereoMatcher};
use stereoconf::scene::{generate_scene, SceneConfig};

fn main() -> stereoconf::Result<()> {
    let scene = generate_scene(
        &SceneConfig {
            textureless_fraction: 0.3,
            noise: 0.02,
            ..SceneConfig::default()
        },
        11,
    )?;
    let matcher = CensusMatcher::new(MatcherConfig {
        algorithm: Algorithm::Wta,
        ..MatcherConfig::default()
    })?;
    let d = matcher.disparity(&scene.left, &scene.right)?;
    let cues = black_box_cues(&scene.left, &scene.right, &d, &CueConfig::default())?;

    let c = &cues.criteria;
    let count = |v: &[bool]| v.iter().zip(&c.valid).filter(|(&b, &ok)| b && ok).count();
    println!("valid pixels {}", c.valid.iter().filter(|&&v| v).count());
    println!("T holds at {}, A at {}, U at {}", count(&c.texture), count(&c.agreement), count(&c.uniqueness));

    let eval = EvalConfig::default();
    let scored = [
        ("-delta", cues.delta.map(|v| -v)),
        ("da", cues.agreement.clone()),
        ("uc", cues.uniqueness.to_scores()),
    ];
    for (name, conf) in &scored {
        let r = sparsification(conf, &d, &scene.gt, &eval)?;
        println!("{name:>7}: AUC {:.4} (optimal {:.4}, bad-3 {:.3})", r.auc, r.optimal_auc, r.bad_tau_full);
    }
    Ok(())
}
