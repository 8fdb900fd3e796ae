//! Renders one random-dot stereo scene and writes it as 16-bit PNGs.
//!
//! cargo run --release --example generate_scene -- [out_dir] [seed]

use std::path::PathBuf;

use stereoconf::io::{save_ground_truth_png16, save_image_png16, save_mask_png16};
use stereoconf::scene::{generate_scene, SceneConfig};

fn main() -> stereoconf::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("stereoconf_scene"));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    let cfg = SceneConfig {
        textureless_fraction: 0.3,
        slanted: true,
        ..SceneConfig::default()
    };
    let scene = generate_scene(&cfg, seed)?;
    std::fs::create_dir_all(&out).map_err(|e| stereoconf::Error::Config(e.to_string()))?;
    save_image_png16(&scene.left, out.join("left.png"))?;
    save_image_png16(&scene.right, out.join("right.png"))?;
    save_ground_truth_png16(&scene.gt, out.join("gt.png"))?;
    save_mask_png16(&scene.occlusion_map(), out.join("occlusion.png"))?;

    let occluded = scene.occluded.iter().filter(|&&o| o).count();
    let (lo, hi) = scene
        .gt
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    println!("{}x{} scene, seed {seed}", cfg.width, cfg.height);
    println!("disparity range [{lo:.2}, {hi:.2}], {occluded} occluded pixels");
    println!("written to {}", out.display());
    Ok(())
}
