//! Random-dot stereo scenes with exact ground truth.
//!
//! A scene is a background plane plus a stack of rectangles, each carrying its
//! own random-dot texture attached to the surface. Rectangle extents are given
//! in reference (left) coordinates; a larger disparity means a nearer surface.
//! The right view is rendered by looking up, for every right pixel, the
//! nearest surface that projects there and sampling its texture at the
//! rounded source column.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BoolMap, GroundTruthMap, Image};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub d_max: usize,
    pub num_rects: usize,
    pub background_disparity: f64,
    /// Disparity range rectangles are drawn from, inclusive.
    pub rect_disparity: [f64; 2],
    /// Side-length range of rectangles in pixels.
    pub rect_size: [usize; 2],
    /// Amplitude of uniform noise: left and right each receive noise in
    /// `[-noise/2, noise/2]`, so corresponding pixels differ by at most `noise`.
    pub noise: f64,
    /// Probability that a texture pixel carries a random dot.
    pub texture_density: f64,
    /// Spread of dot intensities around the surface's base intensity.
    pub texture_contrast: f64,
    /// Probability that a surface is rendered flat (no dots at all).
    pub textureless_fraction: f64,
    /// Draw non-integer rectangle disparities.
    pub subpixel: bool,
    /// Give rectangles a horizontal disparity slope in `[-0.5, 0.5]`.
    pub slanted: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            d_max: 32,
            num_rects: 6,
            background_disparity: 4.0,
            rect_disparity: [8.0, 28.0],
            rect_size: [16, 48],
            noise: 0.0,
            texture_density: 1.0,
            texture_contrast: 1.0,
            textureless_fraction: 0.0,
            subpixel: false,
            slanted: false,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.width == 0 || self.height == 0 {
            return bad("scene dimensions must be positive".into());
        }
        if self.d_max >= self.width {
            return bad(format!(
                "d_max {} must be smaller than width {}",
                self.d_max, self.width
            ));
        }
        let d_max = self.d_max as f64;
        if !(0.0..=d_max).contains(&self.background_disparity) {
            return bad(format!(
                "background disparity {} outside [0, {d_max}]",
                self.background_disparity
            ));
        }
        let [lo, hi] = self.rect_disparity;
        if self.num_rects > 0 && !(0.0 <= lo && lo <= hi && hi <= d_max) {
            return bad(format!("rect disparity range [{lo}, {hi}] not within [0, {d_max}]"));
        }
        let [smin, smax] = self.rect_size;
        if self.num_rects > 0 && (smin == 0 || smin > smax) {
            return bad(format!("bad rect size range [{smin}, {smax}]"));
        }
        if !(self.noise >= 0.0) {
            return bad(format!("noise {} must be non-negative", self.noise));
        }
        if !(0.0..=1.0).contains(&self.texture_density) {
            return bad(format!("texture density {} outside [0, 1]", self.texture_density));
        }
        if !(0.0..=1.0).contains(&self.textureless_fraction) {
            return bad(format!("textureless fraction {} outside [0, 1]", self.textureless_fraction));
        }
        if !(self.texture_contrast >= 0.0) {
            return bad("texture contrast must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub left: Image,
    pub right: Image,
    pub gt: GroundTruthMap,
    /// True where the left pixel has no correspondence in the right view.
    pub occluded: Vec<bool>,
}

impl SyntheticScene {
    pub fn occlusion_map(&self) -> BoolMap {
        let n = self.occluded.len();
        BoolMap::new(self.left.width(), self.left.height(), self.occluded.clone(), vec![true; n])
            .expect("scene dimensions are consistent")
    }

    /// Ground truth with occluded pixels removed.
    pub fn gt_non_occluded(&self) -> GroundTruthMap {
        let keep: Vec<bool> = self.occluded.iter().map(|o| !o).collect();
        self.gt.masked(&keep)
    }
}

struct Layer {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    d0: f64,
    slope: f64,
    texture: Vec<f64>,
}

impl Layer {
    fn covers(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    fn disparity(&self, x: f64) -> f64 {
        self.d0 + self.slope * (x - self.x0 as f64)
    }

    /// Left column whose projection lands on right column `xr`.
    fn source_column(&self, xr: f64) -> f64 {
        (xr + self.d0 - self.slope * self.x0 as f64) / (1.0 - self.slope)
    }
}

fn random_texture(rng: &mut ChaCha8Rng, n: usize, cfg: &SceneConfig) -> Vec<f64> {
    let base: f64 = rng.gen_range(0.2..0.8);
    let density = if rng.gen::<f64>() < cfg.textureless_fraction {
        0.0
    } else {
        cfg.texture_density
    };
    (0..n)
        .map(|_| {
            if rng.gen::<f64>() < density {
                (base + cfg.texture_contrast * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0)
            } else {
                base
            }
        })
        .collect()
}

/// Generates a scene; identical `(config, seed)` pairs give identical scenes.
pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<SyntheticScene> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let d_max = cfg.d_max as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut layers = vec![Layer {
        x0: 0,
        x1: w,
        y0: 0,
        y1: h,
        d0: cfg.background_disparity,
        slope: 0.0,
        texture: random_texture(&mut rng, w * h, cfg),
    }];
    for _ in 0..cfg.num_rects {
        let [smin, smax] = cfg.rect_size;
        let rw = rng.gen_range(smin..=smax).min(w);
        let rh = rng.gen_range(smin..=smax).min(h);
        let x0 = rng.gen_range(0..=w - rw);
        let y0 = rng.gen_range(0..=h - rh);
        let [lo, hi] = cfg.rect_disparity;
        let mut d0 = rng.gen_range(lo..=hi);
        if !cfg.subpixel {
            d0 = d0.round().clamp(lo.ceil(), hi.floor().max(lo.ceil()));
        }
        let mut slope = 0.0;
        if cfg.slanted {
            slope = rng.gen_range(-0.5..=0.5);
            // Keep the whole rectangle inside [0, d_max].
            let end = d0 + slope * (rw as f64 - 1.0);
            if !(0.0..=d_max).contains(&end) {
                slope = ((end.clamp(0.0, d_max) - d0) / (rw as f64 - 1.0).max(1.0)).clamp(-0.5, 0.5);
            }
        }
        layers.push(Layer {
            x0,
            x1: x0 + rw,
            y0,
            y1: y0 + rh,
            d0,
            slope,
            texture: random_texture(&mut rng, w * h, cfg),
        });
    }

    // Left view: nearest covering surface per pixel.
    let mut left_layer = vec![0usize; w * h];
    let mut gt = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (best, d) = layers
                .iter()
                .enumerate()
                .filter(|(_, l)| l.covers(x, y))
                .map(|(i, l)| (i, l.disparity(x as f64)))
                .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            left_layer[y * w + x] = best;
            gt[y * w + x] = d;
        }
    }
    let left: Vec<f64> = (0..w * h).map(|i| layers[left_layer[i]].texture[i]).collect();

    // Right view: nearest surface projecting onto each right pixel.
    let mut right = vec![0.0; w * h];
    let mut right_layer = vec![usize::MAX; w * h];
    for y in 0..h {
        for xr in 0..w {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, layer) in layers.iter().enumerate() {
                let src = layer.source_column(xr as f64).round();
                if src < 0.0 || src >= w as f64 {
                    continue;
                }
                let xs = src as usize;
                if !layer.covers(xs, y) {
                    continue;
                }
                let depth = layer.disparity(xs as f64);
                if best.map_or(true, |(_, _, d)| depth > d) {
                    best = Some((i, xs, depth));
                }
            }
            let i = y * w + xr;
            match best {
                Some((li, xs, _)) => {
                    right[i] = layers[li].texture[y * w + xs];
                    right_layer[i] = li;
                }
                // Nothing visible in the left view projects here.
                None => right[i] = random_texture(&mut rng, 1, cfg)[0],
            }
        }
    }

    let mut occluded = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let xr = (x as f64 - gt[i]).round_ties_even();
            occluded[i] = xr < 0.0 || right_layer[y * w + xr as usize] != left_layer[i];
        }
    }

    let mut add_noise = |img: Vec<f64>| -> Vec<f64> {
        if cfg.noise == 0.0 {
            return img;
        }
        img.into_iter()
            .map(|v| v + cfg.noise * (rng.gen::<f64>() - 0.5))
            .collect()
    };
    let left = add_noise(left);
    let right = add_noise(right);

    Ok(SyntheticScene {
        left: Image::from_clamped(w, h, left)?,
        right: Image::from_clamped(w, h, right)?,
        gt: GroundTruthMap::new(w, h, gt)?,
        occluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_cfg(bg: f64) -> SceneConfig {
        SceneConfig {
            width: 40,
            height: 12,
            d_max: 16,
            num_rects: 0,
            background_disparity: bg,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn zero_disparity_scene_is_identity() {
        let s = generate_scene(&flat_cfg(0.0), 3).unwrap();
        assert_eq!(s.left, s.right);
        assert!(s.occluded.iter().all(|o| !o));
    }

    #[test]
    fn uniform_shift_occludes_left_border() {
        let s = generate_scene(&flat_cfg(5.0), 3).unwrap();
        assert!(s.gt.data().iter().all(|&d| d == 5.0));
        for y in 0..12 {
            for x in 0..40 {
                assert_eq!(s.occluded[y * 40 + x], x < 5, "({x},{y})");
            }
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = SceneConfig {
            noise: 0.05,
            ..SceneConfig::default()
        };
        assert_eq!(generate_scene(&cfg, 9).unwrap(), generate_scene(&cfg, 9).unwrap());
        assert_ne!(generate_scene(&cfg, 9).unwrap().left, generate_scene(&cfg, 10).unwrap().left);
    }

    #[test]
    fn photometric_consistency_without_noise() {
        for seed in 0..5 {
            let s = generate_scene(&SceneConfig::default(), seed).unwrap();
            let w = s.left.width();
            let mut checked = 0;
            for y in 0..s.left.height() {
                for x in 0..w {
                    if s.occluded[y * w + x] {
                        continue;
                    }
                    let d = s.gt.get(x, y).unwrap();
                    assert_eq!(s.right.get(x - d as usize, y), s.left.get(x, y));
                    checked += 1;
                }
            }
            assert!(checked > w * s.left.height() / 2);
        }
    }

    #[test]
    fn noise_bounded_by_amplitude() {
        let cfg = SceneConfig {
            noise: 0.1,
            texture_contrast: 0.5,
            ..SceneConfig::default()
        };
        let s = generate_scene(&cfg, 1).unwrap();
        let w = s.left.width();
        for y in 0..s.left.height() {
            for x in 0..w {
                if !s.occluded[y * w + x] {
                    let d = s.gt.get(x, y).unwrap() as usize;
                    assert!((s.right.get(x - d, y) - s.left.get(x, y)).abs() <= 0.1 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn d_max_must_be_below_width() {
        let cfg = SceneConfig {
            width: 32,
            d_max: 32,
            ..SceneConfig::default()
        };
        assert!(matches!(generate_scene(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn slanted_scenes_have_fractional_ground_truth() {
        let cfg = SceneConfig {
            slanted: true,
            ..SceneConfig::default()
        };
        let s = generate_scene(&cfg, 4).unwrap();
        assert!(s.gt.data().iter().any(|d| d.fract() != 0.0));
        assert!(s.gt.data().iter().all(|&d| (0.0..=32.0).contains(&d)));
    }
}
