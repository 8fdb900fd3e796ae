//! Declarative run configuration (TOML). Unknown keys are rejected at every
//! level and every field has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cues::CueConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::matcher::MatcherConfig;
use crate::network::TrainConfig;
use crate::proxy::MbceConfig;
use crate::scene::SceneConfig;

/// Confidence sources that can be evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Trained network checkpoint.
    Network,
    /// Negated reprojection error.
    Delta,
    /// Disparity agreement.
    Da,
    /// Uniqueness constraint.
    Uc,
    /// Left-right consistency; needs right disparities.
    Lrc,
    /// Peak ratio; needs cached cost volumes.
    Pkr,
    /// Left-right difference; needs cached cost volumes.
    Lrd,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Network => "network",
            Measure::Delta => "delta",
            Measure::Da => "da",
            Measure::Uc => "uc",
            Measure::Lrc => "lrc",
            Measure::Pkr => "pkr",
            Measure::Lrd => "lrd",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Frames rendered by `datagen`.
    pub frames: usize,
    /// Dataset used for training, stereo and cues; defaults to the output
    /// directory.
    pub dir: Option<PathBuf>,
    /// Stream consumed by `adapt`; defaults to `dir`.
    pub stream_dir: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            frames: 10,
            dir: None,
            stream_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StereoOptions {
    /// Also produce right-reference disparities.
    pub right: bool,
    /// Store cost volumes next to the disparities (needed by PKR and LRD).
    pub cache_volumes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Checkpoint written by `train` and read by `adapt` and `eval`;
    /// defaults to `<output_dir>/checkpoint.bin`.
    pub checkpoint: Option<PathBuf>,
    pub measures: Vec<Measure>,
    pub data: DataConfig,
    pub scene: SceneConfig,
    pub matcher: MatcherConfig,
    pub stereo: StereoOptions,
    pub cues: CueConfig,
    pub mbce: MbceConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("run"),
            checkpoint: None,
            measures: vec![Measure::Network, Measure::Delta, Measure::Da, Measure::Uc],
            data: DataConfig::default(),
            scene: SceneConfig::default(),
            matcher: MatcherConfig::default(),
            stereo: StereoOptions::default(),
            cues: CueConfig::default(),
            mbce: MbceConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.matcher.validate()?;
        self.cues.validate()?;
        self.mbce.validate()?;
        self.train.validate()?;
        self.eval.validate()
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data.dir.clone().unwrap_or_else(|| self.output_dir.clone())
    }

    pub fn stream_dir(&self) -> PathBuf {
        self.data.stream_dir.clone().unwrap_or_else(|| self.data_dir())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.output_dir.join("checkpoint.bin"))
    }
}
