//! Self-supervised stereo confidence estimation.
//!
//! A census matcher produces disparities; black-box cues computed from the
//! stereo pair and the disparity map alone vote for proxy labels; a small
//! patch network trained on those labels scores every pixel. Evaluation uses
//! sparsification curves against ground truth.

pub mod cli;
pub mod config;
pub mod cues;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod image;
pub mod io;
pub mod matcher;
pub mod network;
pub mod proxy;
pub mod scene;

pub use error::{Error, Result};
pub use image::{BoolMap, ConfidenceMap, DisparityMap, GroundTruthMap, Image, ScoreMap};
