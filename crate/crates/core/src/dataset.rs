//! On-disk frame collections.
//!
//! A dataset directory holds `manifest.json`, the stereo pairs under
//! `frames/`, matcher outputs under `disparity/<algo>/` and cue maps under
//! `cues/<algo>/`. Paths inside the manifest are relative to its directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BoolMap, DisparityMap, GroundTruthMap, Image};
use crate::io;
use crate::matcher::Algorithm;
use crate::scene::{generate_scene, SceneConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub name: String,
    pub left: PathBuf,
    pub right: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
    /// Left-referenced occlusion mask (non-zero = occluded).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub d_max: usize,
    pub frames: Vec<FrameEntry>,
}

/// A loaded frame.
#[derive(Clone, Debug)]
pub struct Frame {
    pub name: String,
    pub left: Image,
    pub right: Image,
    pub gt: Option<GroundTruthMap>,
    pub occlusion: Option<BoolMap>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn suffix(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format("manifest", &path, e.to_string()))?;
        Ok(Self { root, manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn d_max(&self) -> usize {
        self.manifest.d_max
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.manifest.frames.iter().map(|f| f.name.as_str())
    }

    pub fn load_frame(&self, index: usize) -> Result<Frame> {
        let entry = self
            .manifest
            .frames
            .get(index)
            .ok_or_else(|| Error::Missing(format!("frame index {index}")))?;
        let gt = match &entry.gt {
            Some(p) => Some(io::load_ground_truth_png16(self.root.join(p))?),
            None => None,
        };
        let occlusion = match &entry.occlusion {
            Some(p) => Some(io::load_mask_png16(self.root.join(p))?),
            None => None,
        };
        Ok(Frame {
            name: entry.name.clone(),
            left: io::load_image(self.root.join(&entry.left))?,
            right: io::load_image(self.root.join(&entry.right))?,
            gt,
            occlusion,
        })
    }

    pub fn disparity_dir(&self, algo: Algorithm) -> PathBuf {
        self.root.join("disparity").join(algo_name(algo))
    }

    pub fn disparity_path(&self, algo: Algorithm, name: &str, side: Side) -> PathBuf {
        self.disparity_dir(algo).join(format!("{name}_{}.png", side.suffix()))
    }

    /// Cost volume cache, stored as a PFM of width `width * (d_max + 1)`.
    pub fn volume_path(&self, algo: Algorithm, name: &str, side: Side) -> PathBuf {
        self.disparity_dir(algo).join(format!("{name}_{}_volume.pfm", side.suffix()))
    }

    pub fn load_disparity(&self, algo: Algorithm, name: &str, side: Side) -> Result<DisparityMap> {
        let path = self.disparity_path(algo, name, side);
        if !path.exists() {
            return Err(Error::Missing(format!(
                "{} disparity for frame {name} ({}); run the stereo step first",
                side.suffix(),
                path.display()
            )));
        }
        io::load_disparity_png16(path, self.d_max() as f64)
    }

    pub fn cue_dir(&self, algo: Algorithm) -> PathBuf {
        self.root.join("cues").join(algo_name(algo))
    }

    /// `file` is e.g. `delta.pfm` or `t.png`.
    pub fn cue_path(&self, algo: Algorithm, name: &str, file: &str) -> PathBuf {
        self.cue_dir(algo).join(format!("{name}_{file}"))
    }
}

pub fn algo_name(algo: Algorithm) -> &'static str {
    match algo {
        Algorithm::Wta => "wta",
        Algorithm::Box => "box",
        Algorithm::Sgm => "sgm",
    }
}

/// Fails when `dir` exists and holds files, unless `force` is set.
pub fn prepare_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if non_empty && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Seed of frame `index` in a dataset generated with `seed`.
pub fn frame_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// Renders `count` synthetic scenes into `dir` and writes the manifest.
pub fn write_synthetic_dataset(
    dir: &Path,
    scene: &SceneConfig,
    count: usize,
    seed: u64,
    force: bool,
) -> Result<Dataset> {
    scene.validate()?;
    prepare_output_dir(dir, force)?;
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let s = generate_scene(scene, frame_seed(seed, i))?;
        let name = format!("{i:06}");
        let rel = |kind: &str| PathBuf::from("frames").join(format!("{name}_{kind}.png"));
        let entry = FrameEntry {
            name: name.clone(),
            left: rel("left"),
            right: rel("right"),
            gt: Some(rel("gt")),
            occlusion: Some(rel("occ")),
        };
        io::save_image_png16(&s.left, dir.join(&entry.left))?;
        io::save_image_png16(&s.right, dir.join(&entry.right))?;
        io::save_ground_truth_png16(&s.gt, dir.join(entry.gt.as_ref().unwrap()))?;
        io::save_mask_png16(&s.occlusion_map(), dir.join(entry.occlusion.as_ref().unwrap()))?;
        entries.push(entry);
    }
    let manifest = Manifest {
        d_max: scene.d_max,
        frames: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(Dataset {
        root: dir.to_path_buf(),
        manifest,
    })
}
