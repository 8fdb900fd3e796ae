//! Label statistics for every positive/negative criterion combination.
//!
//! cargo run --release --example proxy_labels

use stereoconf::cues::{compute_criteria, CueConfig};
use stereoconf::matcher::{Algorithm, CensusMatcher, MatcherConfig, StereoMatcher};
use stereoconf::proxy::{build_proxies, MbceConfig};
use stereoconf::scene::{generate_scene, SceneConfig};

fn main() -> stereoconf::Result<()> {
    let scene = generate_scene(&SceneConfig { textureless_fraction: 0.3, ..SceneConfig::default() }, 2)?;
    let matcher = CensusMatcher::new(MatcherConfig { algorithm: Algorithm::Wta, ..MatcherConfig::default() })?;
    let d = matcher.disparity(&scene.left, &scene.right)?;
    let criteria = compute_criteria(&scene.left, &scene.right, &d, &CueConfig::default())?;

    println!("{:>8} {:>8} {:>8} {:>10} {:>10}", "P/Q", "p=1", "q=1", "p=1 wrong", "q=1 wrong");
    for cfg in MbceConfig::ablation_configurations() {
        let labels = build_proxies(&criteria, &cfg)?;
        let wrong = |i: usize| (d.data()[i] - scene.gt.data()[i]).abs() > 3.0;
        let (mut pw, mut qw) = (0, 0);
        for i in labels.supervised_indices() {
            let l = labels.labels[i];
            pw += (l.positive && wrong(i)) as usize;
            qw += (l.negative && wrong(i)) as usize;
        }
        println!(
            "{:>8} {:>8} {:>8} {:>10} {:>10}",
            cfg.label(),
            labels.count_positive(),
            labels.count_negative(),
            pw,
            qw
        );
    }
    Ok(())
}
