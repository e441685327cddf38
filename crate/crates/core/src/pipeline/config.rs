//! Run configuration: every pipeline knob in one validated struct, loadable
//! from a flat `key = value` file (unknown keys rejected) and echoed verbatim
//! into every report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{parse_typed, KeyValueFile};
use crate::descriptors::StaticProvider;
use crate::error::{Error, Result};
use crate::fusion::{ContributionRatio, FusionMethod};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,

    // Segmentation.
    pub segment_length: usize,
    pub stride: usize,

    // Optical flow.
    pub flow_window: usize,
    pub flow_levels: usize,
    pub flow_iterations: usize,
    pub flow_eig_threshold: f64,

    // Tracker.
    pub max_trajectory_length: usize,
    pub max_jump: f64,
    pub min_displacement: f64,
    pub grid_step: usize,
    pub mag_threshold: f64,

    // Clustering.
    pub dbscan_eps: f64,
    pub dbscan_min_points: usize,
    pub min_box_side: f64,

    // Descriptors.
    pub hoof_bins: usize,
    pub codebook_k: usize,
    pub codebook_sample_n: usize,
    pub static_provider: StaticProvider,

    // Fusion.
    pub fusion_method: FusionMethod,
    pub ratio: ContributionRatio,

    // LSTM.
    pub lstm_hidden: usize,
    pub lstm_dropout: f64,
    pub lstm_epochs: usize,
    pub lstm_lr: f64,
    pub lstm_batch: usize,
    pub lstm_clip: f64,

    // Forest baseline.
    pub forest_trees: usize,
    pub forest_max_depth: usize,

    // Evaluation.
    pub train_frac: f64,
    pub seed: u64,

    // Debug dumps.
    pub dump_clusters: bool,
    pub dump_tubes: bool,
}

impl RunConfig {
    pub fn new(dataset_root: PathBuf, output_dir: PathBuf) -> Self {
        Self {
            dataset_root,
            output_dir,
            segment_length: 15,
            stride: 10,
            flow_window: 5,
            flow_levels: 3,
            flow_iterations: 3,
            flow_eig_threshold: 1e-4,
            max_trajectory_length: 15,
            max_jump: 8.0,
            min_displacement: 0.4,
            grid_step: 5,
            mag_threshold: 0.5,
            dbscan_eps: 8.0,
            dbscan_min_points: 10,
            min_box_side: 8.0,
            hoof_bins: 100,
            codebook_k: 1000,
            codebook_sample_n: 100_000,
            static_provider: StaticProvider::Toy { seed: 0 },
            fusion_method: FusionMethod::Cholesky,
            ratio: ContributionRatio::new(50.0, 50.0).expect("50:50 is valid"),
            lstm_hidden: 128,
            lstm_dropout: 0.8,
            lstm_epochs: 60,
            lstm_lr: 0.2,
            lstm_batch: 8,
            lstm_clip: 5.0,
            forest_trees: 100,
            forest_max_depth: 16,
            train_frac: 0.8,
            seed: 0,
            dump_clusters: false,
            dump_tubes: false,
        }
    }

    pub const KNOWN_KEYS: &'static [&'static str] = &[
        "dataset_root",
        "output_dir",
        "segment_length",
        "stride",
        "flow_window",
        "flow_levels",
        "flow_iterations",
        "flow_eig_threshold",
        "max_trajectory_length",
        "max_jump",
        "min_displacement",
        "grid_step",
        "mag_threshold",
        "dbscan_eps",
        "dbscan_min_points",
        "min_box_side",
        "hoof_bins",
        "codebook_k",
        "codebook_sample_n",
        "static_provider",
        "fusion_method",
        "ratio",
        "lstm_hidden",
        "lstm_dropout",
        "lstm_epochs",
        "lstm_lr",
        "lstm_batch",
        "lstm_clip",
        "forest_trees",
        "forest_max_depth",
        "train_frac",
        "seed",
        "dump_clusters",
        "dump_tubes",
    ];

    /// Loads a `key = value` file; every key must be known, the two path keys
    /// are required.
    pub fn from_file(path: &Path) -> Result<Self> {
        let kv = KeyValueFile::load(path)?;
        kv.reject_unknown(Self::KNOWN_KEYS)?;
        let root = kv
            .get("dataset_root")
            .ok_or_else(|| Error::Config("missing key `dataset_root`".into()))?;
        let out = kv
            .get("output_dir")
            .ok_or_else(|| Error::Config("missing key `output_dir`".into()))?;
        let mut cfg = Self::new(PathBuf::from(root), PathBuf::from(out));
        cfg.apply_kv(&kv)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies every present key onto `self`.
    pub fn apply_kv(&mut self, kv: &KeyValueFile) -> Result<()> {
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.get($key) {
                    $field = parse_typed($key, v)?;
                }
            };
        }
        if let Some(v) = kv.get("dataset_root") {
            self.dataset_root = PathBuf::from(v);
        }
        if let Some(v) = kv.get("output_dir") {
            self.output_dir = PathBuf::from(v);
        }
        set!("segment_length", self.segment_length);
        set!("stride", self.stride);
        set!("flow_window", self.flow_window);
        set!("flow_levels", self.flow_levels);
        set!("flow_iterations", self.flow_iterations);
        set!("flow_eig_threshold", self.flow_eig_threshold);
        set!("max_trajectory_length", self.max_trajectory_length);
        set!("max_jump", self.max_jump);
        set!("min_displacement", self.min_displacement);
        set!("grid_step", self.grid_step);
        set!("mag_threshold", self.mag_threshold);
        set!("dbscan_eps", self.dbscan_eps);
        set!("dbscan_min_points", self.dbscan_min_points);
        set!("min_box_side", self.min_box_side);
        set!("hoof_bins", self.hoof_bins);
        set!("codebook_k", self.codebook_k);
        set!("codebook_sample_n", self.codebook_sample_n);
        if let Some(v) = kv.get("static_provider") {
            self.static_provider = v.parse()?;
        }
        if let Some(v) = kv.get("fusion_method") {
            self.fusion_method = v.parse()?;
        }
        if let Some(v) = kv.get("ratio") {
            self.ratio = ContributionRatio::from_static_motion_str(v)?;
        }
        set!("lstm_hidden", self.lstm_hidden);
        set!("lstm_dropout", self.lstm_dropout);
        set!("lstm_epochs", self.lstm_epochs);
        set!("lstm_lr", self.lstm_lr);
        set!("lstm_batch", self.lstm_batch);
        set!("lstm_clip", self.lstm_clip);
        set!("forest_trees", self.forest_trees);
        set!("forest_max_depth", self.forest_max_depth);
        set!("train_frac", self.train_frac);
        set!("seed", self.seed);
        set!("dump_clusters", self.dump_clusters);
        set!("dump_tubes", self.dump_tubes);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_length < 2 {
            return Err(Error::Config("segment_length must be >= 2".into()));
        }
        if self.stride == 0 || self.stride >= self.segment_length {
            return Err(Error::Config(
                "stride must satisfy 1 <= stride < segment_length".into(),
            ));
        }
        if self.flow_window % 2 == 0 || self.flow_window < 3 {
            return Err(Error::Config("flow_window must be odd and >= 3".into()));
        }
        if !(0.0..1.0).contains(&self.lstm_dropout) {
            return Err(Error::Config("lstm_dropout must be in [0, 1)".into()));
        }
        if !(0.0 < self.train_frac && self.train_frac < 1.0) {
            return Err(Error::Config("train_frac must be in (0, 1)".into()));
        }
        if self.codebook_k == 0 || self.hoof_bins == 0 {
            return Err(Error::Config("codebook_k and hoof_bins must be positive".into()));
        }
        Ok(())
    }

    /// The config slice that determines extraction outputs; part of each
    /// video's cache hash so stale caches are recomputed.
    pub fn extraction_fingerprint(&self) -> String {
        format!(
            "seg={}/{} flow={}x{}i{}e{} trk={}j{}d{}g{}m{} clu={}p{}b{} hoof={} static={}",
            self.segment_length,
            self.stride,
            self.flow_window,
            self.flow_levels,
            self.flow_iterations,
            self.flow_eig_threshold,
            self.max_trajectory_length,
            self.max_jump,
            self.min_displacement,
            self.grid_step,
            self.mag_threshold,
            self.dbscan_eps,
            self.dbscan_min_points,
            self.min_box_side,
            self.hoof_bins,
            self.static_provider,
        )
    }
}
