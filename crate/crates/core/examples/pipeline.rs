//! The command-line steps driven from code: render a dataset, match, compute
//! cues, train, evaluate. Everything lands in a temporary directory.
//!
//! cargo run --release --example pipeline

use stereoconf::cli::{cmd_cues, cmd_datagen, cmd_eval, cmd_stereo, cmd_train};
use stereoconf::config::RunConfig;
use stereoconf::eval::csv_string;
use stereoconf::matcher::Algorithm;

const CONFIG: &str = r#"
seed = 3
measures = ["network", "delta", "da", "uc", "lrc", "pkr", "lrd"]

[data]
frames = 4

[scene]
textureless_fraction = 0.3

[matcher]
algorithm = "sgm"

[stereo]
right = true
cache_volumes = true

[train]
iterations = 300
learning_rate = 0.01
log_every = 100
"#;

fn main() -> stereoconf::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let dir = std::env::temp_dir().join("stereoconf_pipeline");
    let mut cfg = RunConfig::from_toml(CONFIG)?;
    cfg.output_dir = dir.join("run");
    cfg.data.dir = Some(dir.join("data"));
    assert_eq!(cfg.matcher.algorithm, Algorithm::Sgm);

    cmd_datagen(&cfg, true)?;
    cmd_stereo(&cfg, true)?;
    cmd_cues(&cfg, true)?;
    cmd_train(&cfg, true)?;
    let rows = cmd_eval(&cfg, true)?;
    let means: Vec<_> = rows.into_iter().filter(|r| r.frame == "mean").collect();
    print!("{}", csv_string(&means));
    println!("{} measures evaluated; outputs in {}", cfg.measures.len(), dir.display());
    Ok(())
}
