//! Cues that need more than the left disparity: left-right consistency
//! (right map) and peak ratio / left-right difference (cost volumes).
//!
//! cargo run --release --example gray_white_box_cues

use stereoconf::cues::{lrc, lrd, pkr};
use stereoconf::eval::{sparsification, EvalConfig};
use stereoconf::matcher::{wta, CensusMatcher, MatcherConfig};
use stereoconf::scene::{generate_scene, SceneConfig};
use stereoconf::ScoreMap;

fn main() -> stereoconf::Result<()> {
    let scene = generate_scene(&SceneConfig { noise: 0.05, ..SceneConfig::default() }, 5)?;
    let matcher = CensusMatcher::new(MatcherConfig::default())?;
    let vol_l = matcher.cost_volume(&scene.left, &scene.right)?;
    let vol_r = matcher.right_cost_volume(&scene.left, &scene.right)?;
    let (dl, dr) = (wta(&vol_l), wta(&vol_r));

    let eval = EvalConfig::default();
    let report = |name: &str, conf: &ScoreMap| -> stereoconf::Result<()> {
        let r = sparsification(conf, &dl, &scene.gt, &eval)?;
        println!("{name}: AUC {:.4} (optimal {:.4})", r.auc, r.optimal_auc);
        Ok(())
    };
    report("lrc", &lrc(&dl, &dr, 1.0)?.to_scores())?;
    report("pkr", &pkr(&vol_l, 1)?)?;
    report("lrd", &lrd(&vol_l, &vol_r)?)?;
    Ok(())
}
