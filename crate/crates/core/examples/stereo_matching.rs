//! Census matching with the three aggregation strategies, plus the
//! right-reference map obtained by mirroring.
//!
//! cargo run --release --example stereo_matching

use stereoconf::cues::lrc;
use stereoconf::eval::bad_tau;
use stereoconf::matcher::{compute_right_disparity, Algorithm, CensusMatcher, MatcherConfig, StereoMatcher};
use stereoconf::scene::{generate_scene, SceneConfig};

fn main() -> stereoconf::Result<()> {
    let scene = generate_scene(&SceneConfig::default(), 3)?;
    let gt = scene.gt_non_occluded();
    for algo in [Algorithm::Wta, Algorithm::Box, Algorithm::Sgm] {
        let matcher = CensusMatcher::new(MatcherConfig {
            algorithm: algo,
            ..MatcherConfig::default()
        })?;
        let left = matcher.disparity(&scene.left, &scene.right)?;
        let right = compute_right_disparity(&matcher, &scene.left, &scene.right)?;
        let consistent = lrc(&left, &right, 1.0)?.count_true();
        println!(
            "{algo:?}: bad-1 {:.3}  bad-3 {:.3}  left-right consistent {:.1}%",
            bad_tau(&left, &gt, 1.0)?,
            bad_tau(&left, &gt, 3.0)?,
            100.0 * consistent as f64 / scene.occluded.len() as f64
        );
    }
    Ok(())
}
