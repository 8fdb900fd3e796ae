//! Pipeline steps behind the command-line tool. Each step reads what the
//! previous one wrote into the dataset directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Measure, RunConfig};
use crate::cues::{black_box_cues, lrc, lrd, pkr};
use crate::dataset::{algo_name, write_synthetic_dataset, Dataset, Frame, Side};
use crate::error::{Error, Result};
use crate::eval::{csv_string, evaluate_measure, format_sig, mean_row, sparsification, EvalFrame, EvalRow};
use crate::image::{DisparityMap, ScoreMap};
use crate::io;
use crate::matcher::{compute_right_disparity, Algorithm, CensusMatcher, CostVolume, MatcherConfig, StereoMatcher};
use crate::network::{
    adapt_online, forward_dense_logits, load_checkpoint, save_checkpoint, train_offline, AdaptFrame, PatchNet,
    TrainingFrame,
};

/// Command-line overrides shared by all steps.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub force: bool,
    pub algo: Option<Algorithm>,
    pub right: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.train.seed = seed;
        }
        if let Some(algo) = self.algo {
            cfg.matcher.algorithm = algo;
        }
        if self.right {
            cfg.stereo.right = true;
        }
    }
}

fn ensure_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str, force: bool) -> Result<()> {
    ensure_writable(path, force)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Renders the synthetic dataset.
pub fn cmd_datagen(cfg: &RunConfig, force: bool) -> Result<Dataset> {
    let ds = write_synthetic_dataset(&cfg.data_dir(), &cfg.scene, cfg.data.frames, cfg.seed, force)?;
    log::info!("wrote {} frames to {}", ds.len(), ds.root().display());
    Ok(ds)
}

fn matcher_for(cfg: &RunConfig, d_max: usize) -> Result<CensusMatcher> {
    CensusMatcher::new(MatcherConfig {
        d_max,
        ..cfg.matcher.clone()
    })
}

fn save_volume(vol: &CostVolume, path: &Path) -> Result<()> {
    io::save_pfm(path, vol.width() * vol.num_disparities(), vol.height(), vol.data())
}

fn load_volume(path: &Path, d_max: usize) -> Result<CostVolume> {
    let (w, h, data) = io::load_pfm(path)?;
    CostVolume::new(w / (d_max + 1), h, d_max, data)
}

/// Disparity maps for every frame, left and optionally right.
pub fn cmd_stereo(cfg: &RunConfig, force: bool) -> Result<()> {
    let ds = Dataset::open(cfg.data_dir())?;
    let algo = cfg.matcher.algorithm;
    let matcher = matcher_for(cfg, ds.d_max())?;
    let mut failures = Vec::new();
    for (i, name) in ds.names().enumerate() {
        let frame = match ds.load_frame(i) {
            Ok(f) => f,
            Err(e) => {
                log::error!("frame {name}: {e}");
                failures.push(name.to_string());
                continue;
            }
        };
        let left_path = ds.disparity_path(algo, name, Side::Left);
        ensure_writable(&left_path, force)?;
        let (dl, dr) = if cfg.stereo.cache_volumes {
            let vl = matcher.cost_volume(&frame.left, &frame.right)?;
            save_volume(&vl, &ds.volume_path(algo, name, Side::Left))?;
            let vr = matcher.right_cost_volume(&frame.left, &frame.right)?;
            save_volume(&vr, &ds.volume_path(algo, name, Side::Right))?;
            (crate::matcher::wta(&vl), crate::matcher::wta(&vr))
        } else {
            let dl = matcher.disparity(&frame.left, &frame.right)?;
            let dr = if cfg.stereo.right {
                compute_right_disparity(&matcher, &frame.left, &frame.right)?
            } else {
                dl.clone()
            };
            (dl, dr)
        };
        io::save_disparity_png16(&dl, &left_path)?;
        if cfg.stereo.right {
            let right_path = ds.disparity_path(algo, name, Side::Right);
            ensure_writable(&right_path, force)?;
            io::save_disparity_png16(&dr, &right_path)?;
        }
    }
    if !failures.is_empty() {
        return Err(Error::Missing(format!("unreadable frames: {}", failures.join(", "))));
    }
    log::info!("disparities for {} frames in {}", ds.len(), ds.disparity_dir(algo).display());
    Ok(())
}

/// Cue maps and criteria masks for every frame.
pub fn cmd_cues(cfg: &RunConfig, force: bool) -> Result<()> {
    let ds = Dataset::open(cfg.data_dir())?;
    let algo = cfg.matcher.algorithm;
    for (i, name) in ds.names().enumerate() {
        let frame = ds.load_frame(i)?;
        let dl = ds.load_disparity(algo, name, Side::Left)?;
        let cues = black_box_cues(&frame.left, &frame.right, &dl, &cfg.cues)?;
        let (w, h) = (dl.width(), dl.height());
        let out = |file: &str| -> Result<PathBuf> {
            let p = ds.cue_path(algo, name, file);
            ensure_writable(&p, force)?;
            Ok(p)
        };
        io::save_pfm(out("delta.pfm")?, w, h, &masked(&cues.delta))?;
        io::save_confidence_png16(&cues.agreement.clone().try_into()?, out("da.png")?)?;
        io::save_mask_png16(&cues.uniqueness, out("uc.png")?)?;
        let crit = &cues.criteria;
        for (file, data) in [("t.png", &crit.texture), ("a.png", &crit.agreement), ("u.png", &crit.uniqueness)] {
            let mask = crate::image::BoolMap::new(w, h, data.clone(), crit.valid.clone())?;
            io::save_mask_png16(&mask, out(file)?)?;
        }

        let right_path = ds.disparity_path(algo, name, Side::Right);
        if right_path.exists() {
            let dr = ds.load_disparity(algo, name, Side::Right)?;
            io::save_mask_png16(&lrc(&dl, &dr, cfg.cues.lrc_threshold)?, out("lrc.png")?)?;
        } else {
            log::info!("frame {name}: no right disparity, LRC skipped");
        }
        let (vl_path, vr_path) = (ds.volume_path(algo, name, Side::Left), ds.volume_path(algo, name, Side::Right));
        if vl_path.exists() && vr_path.exists() {
            let vl = load_volume(&vl_path, ds.d_max())?;
            let vr = load_volume(&vr_path, ds.d_max())?;
            io::save_pfm(out("pkr.pfm")?, w, h, pkr(&vl, cfg.cues.pkr_exclusion)?.data())?;
            io::save_pfm(out("lrd.pfm")?, w, h, lrd(&vl, &vr)?.data())?;
        } else {
            log::info!("frame {name}: no cached cost volumes, PKR and LRD skipped");
        }
    }
    log::info!("cues for {} frames in {}", ds.len(), ds.cue_dir(algo).display());
    Ok(())
}

/// Scores with NaN at invalid pixels, for PFM output.
fn masked(map: &ScoreMap) -> Vec<f64> {
    map.data()
        .iter()
        .zip(map.valid())
        .map(|(&v, &ok)| if ok { v } else { f64::NAN })
        .collect()
}

/// Trains a network on the proxies of every frame and saves the checkpoint.
pub fn cmd_train(cfg: &RunConfig, force: bool) -> Result<()> {
    let ds = Dataset::open(cfg.data_dir())?;
    let algo = cfg.matcher.algorithm;
    let ckpt_path = cfg.checkpoint_path();
    ensure_writable(&ckpt_path, force)?;
    let mut frames = Vec::with_capacity(ds.len());
    for (i, name) in ds.names().enumerate() {
        let frame = ds.load_frame(i)?;
        let d = ds.load_disparity(algo, name, Side::Left)?;
        frames.push(TrainingFrame::from_views(
            &frame.left,
            &frame.right,
            d,
            &cfg.cues,
            &cfg.mbce,
            cfg.train.shape.use_image,
        )?);
    }
    let net = PatchNet::init(&cfg.train.shape, cfg.train.seed)?;
    let report = train_offline(net, &frames, &cfg.train)?;
    save_checkpoint(&report.checkpoint, &ckpt_path)?;
    let mut text = String::from("iteration,loss\n");
    for p in &report.losses {
        text.push_str(&format!("{},{}\n", p.iteration, format_sig(p.loss)));
    }
    write_text(&cfg.output_dir.join(format!("loss_{}.csv", algo_name(algo))), &text, force)?;
    log::info!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

fn load_stream(ds: &Dataset, algo: Algorithm) -> Result<Vec<AdaptFrame>> {
    let mut frames = Vec::with_capacity(ds.len());
    for (i, name) in ds.names().enumerate() {
        let Frame { name: _, left, right, gt, .. } = ds.load_frame(i)?;
        frames.push(AdaptFrame {
            name: name.to_string(),
            left,
            right,
            disparity: ds.load_disparity(algo, name, Side::Left)?,
            gt,
        });
    }
    Ok(frames)
}

fn with_mean(measure: &str, mut rows: Vec<EvalRow>) -> Vec<EvalRow> {
    if let Some(mean) = mean_row(measure, &rows) {
        rows.push(mean);
    }
    rows
}

/// Streams frames through online adaptation and writes the per-frame
/// AUC-before-update table.
pub fn cmd_adapt(cfg: &RunConfig, force: bool) -> Result<Vec<EvalRow>> {
    let ds = Dataset::open(cfg.stream_dir())?;
    let algo = cfg.matcher.algorithm;
    let out = cfg.output_dir.join(format!("adapt_{}.csv", algo_name(algo)));
    ensure_writable(&out, force)?;
    let ckpt = load_checkpoint(cfg.checkpoint_path(), Some(&cfg.train.shape))?;
    let stream = load_stream(&ds, algo)?;
    let report = adapt_online(
        ckpt.net,
        stream,
        &cfg.train,
        &cfg.cues,
        &cfg.mbce,
        &cfg.eval,
        Measure::Network.name(),
    )?;
    if report.skipped_updates > 0 {
        log::warn!("{} frames carried no supervision", report.skipped_updates);
    }
    let rows = with_mean(Measure::Network.name(), report.rows);
    write_text(&out, &csv_string(&rows), force)?;
    log::info!("adaptation table written to {}", out.display());
    Ok(rows)
}

fn measure_confidence(
    measure: Measure,
    ds: &Dataset,
    algo: Algorithm,
    cfg: &RunConfig,
    net: Option<&PatchNet<f32>>,
    frame: &Frame,
    dl: &DisparityMap,
) -> Result<ScoreMap> {
    let name = &frame.name;
    match measure {
        Measure::Network => {
            let net = net.expect("loaded when requested");
            let image = net.shape().use_image.then_some(&frame.left);
            forward_dense_logits(net, dl, image)
        }
        Measure::Delta | Measure::Da | Measure::Uc => {
            let cues = black_box_cues(&frame.left, &frame.right, dl, &cfg.cues)?;
            Ok(match measure {
                Measure::Delta => cues.delta.map(|v| -v),
                Measure::Da => cues.agreement,
                _ => cues.uniqueness.to_scores(),
            })
        }
        Measure::Lrc => {
            let dr = ds.load_disparity(algo, name, Side::Right)?;
            Ok(lrc(dl, &dr, cfg.cues.lrc_threshold)?.to_scores())
        }
        Measure::Pkr | Measure::Lrd => {
            let paths = [ds.volume_path(algo, name, Side::Left), ds.volume_path(algo, name, Side::Right)];
            if let Some(p) = paths.iter().find(|p| !p.exists()) {
                return Err(Error::Missing(format!(
                    "cost volume {} for {}; run stereo with cache_volumes",
                    p.display(),
                    measure.name()
                )));
            }
            let vl = load_volume(&paths[0], ds.d_max())?;
            let scores = if measure == Measure::Pkr {
                pkr(&vl, cfg.cues.pkr_exclusion)?
            } else {
                lrd(&vl, &load_volume(&paths[1], ds.d_max())?)?
            };
            // Only pixels with a disparity take part.
            ScoreMap::new(dl.width(), dl.height(), scores.data().to_vec(), dl.data().iter().map(|&d| d >= 0.0).collect())
        }
    }
}

/// Evaluates every configured measure; writes the AUC table and the
/// sparsification curves.
pub fn cmd_eval(cfg: &RunConfig, force: bool) -> Result<Vec<EvalRow>> {
    let ds = Dataset::open(cfg.data_dir())?;
    let algo = cfg.matcher.algorithm;
    let out = cfg.output_dir.join(format!("eval_{}.csv", algo_name(algo)));
    let curves_out = cfg.output_dir.join(format!("curves_{}.csv", algo_name(algo)));
    ensure_writable(&out, force)?;
    ensure_writable(&curves_out, force)?;
    let net = if cfg.measures.contains(&Measure::Network) {
        Some(load_checkpoint(cfg.checkpoint_path(), Some(&cfg.train.shape))?.net)
    } else {
        None
    };

    let mut frames = Vec::with_capacity(ds.len());
    for (i, name) in ds.names().enumerate() {
        let frame = ds.load_frame(i)?;
        let dl = ds.load_disparity(algo, name, Side::Left)?;
        frames.push((frame, dl));
    }

    let mut rows = Vec::new();
    let mut curves = String::from("measure,frame,fraction_removed,error_rate\n");
    for &measure in &cfg.measures {
        let confs = frames
            .iter()
            .map(|(frame, dl)| measure_confidence(measure, &ds, algo, cfg, net.as_ref(), frame, dl))
            .collect::<Result<Vec<_>>>()?;
        let eval_frames: Vec<EvalFrame<'_>> = frames
            .iter()
            .zip(&confs)
            .map(|((frame, dl), conf)| EvalFrame {
                name: &frame.name,
                confidence: conf,
                disparity: dl,
                gt: frame.gt.as_ref(),
            })
            .collect();
        for f in &eval_frames {
            if let Some(gt) = f.gt {
                for (x, y) in sparsification(f.confidence, f.disparity, gt, &cfg.eval)?.curve {
                    curves.push_str(&format!("{},{},{},{}\n", measure.name(), f.name, format_sig(x), format_sig(y)));
                }
            }
        }
        rows.extend(with_mean(measure.name(), evaluate_measure(measure.name(), &eval_frames, &cfg.eval)?));
    }
    write_text(&out, &csv_string(&rows), force)?;
    write_text(&curves_out, &curves, force)?;
    log::info!("evaluation table written to {}", out.display());
    Ok(rows)
}
