//! Stage two: codebook training, per-segment fusion, train/eval runs, ratio
//! sweeps, and LSTM-vs-forest comparisons, with JSON + CSV reports.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::descriptors::{
    build_codebook, encode_bow, segment_static_descriptor, Codebook, HoofVector,
    RandomProjection, StaticProvider, TOY_HIST_DIM,
};
use crate::error::{Error, Result};
use crate::eval::{average_precision, mean_average_precision, ConfusionMatrix};
use crate::feature::FeatureVec;
use crate::fusion::{
    fuse_cholesky, fuse_pca, fuse_variance, rho_from_ratio, ContributionRatio, FusionMethod,
};
use crate::rng::RandomSeed;
use crate::temporal::{
    lstm_predict, train_forest, train_lstm, ForestConfig, LstmTrainConfig, SequenceSample,
};
use crate::vten::atomic_write;

use super::config::RunConfig;
use super::extract::{
    index_dataset, load_hoofs, load_manifest, load_static_source, run_extract, DatasetIndex,
    ExtractStatus, ExtractSummary, VideoRef,
};

/// Codebook stage output: when the corpus cannot support the requested k the
/// codebook shrinks to the achievable size and records that.
pub struct CodebookStage {
    pub codebook: Codebook,
    pub requested_k: usize,
    pub effective_k: usize,
    pub objective_non_increasing: bool,
}

/// Gathers every cached HOOF vector (all classes, all videos).
pub fn gather_hoof_corpus(cfg: &RunConfig, index: &DatasetIndex) -> Result<Vec<HoofVector>> {
    let mut corpus = Vec::new();
    for video in &index.videos {
        let manifest = match load_manifest(cfg, video) {
            Ok(m) => m,
            Err(_) => continue, // skipped or failed video
        };
        if manifest.status != ExtractStatus::Ok {
            continue;
        }
        for seg in load_hoofs(cfg, video, &manifest)? {
            corpus.extend(seg);
        }
    }
    Ok(corpus)
}

pub fn codebook_stage(cfg: &RunConfig, index: &DatasetIndex) -> Result<CodebookStage> {
    let corpus = gather_hoof_corpus(cfg, index)?;
    let seed = RandomSeed(cfg.seed);
    let requested_k = cfg.codebook_k;
    let (codebook, trace) =
        match build_codebook(&corpus, requested_k, cfg.codebook_sample_n, seed) {
            Ok(out) => out,
            Err(Error::SmallCorpus { achievable, .. }) if achievable > 0 => {
                build_codebook(&corpus, achievable, cfg.codebook_sample_n, seed)?
            }
            Err(e) => return Err(e),
        };
    let non_increasing = trace
        .objectives
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
    let effective_k = codebook.k();
    codebook.save(
        &cfg.output_dir.join("codebook.vten"),
        &cfg.output_dir.join("codebook.json"),
    )?;
    Ok(CodebookStage {
        codebook,
        requested_k,
        effective_k,
        objective_non_increasing: non_increasing,
    })
}

/// Per-run fusion statistics for reports.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FusionStats {
    pub segments: usize,
    pub zero_motion_segments: usize,
    pub mean_w_motion: f64,
    pub mean_w_static: f64,
    /// Variance method: the dataset's derived optimum motion contribution in
    /// percent (mean of the per-segment weights).
    pub derived_optimum_motion_pct: Option<f64>,
    pub pca_share_min: Option<f64>,
    pub pca_share_mean: Option<f64>,
    pub degenerate_fusions: usize,
}

/// One video's fused descriptor sequence.
#[derive(Debug, Clone)]
pub struct FusedVideo {
    pub video: VideoRef,
    pub sequence: Vec<FeatureVec>,
}

pub struct FusedDataset {
    pub class_names: Vec<String>,
    pub videos: Vec<FusedVideo>,
    pub stats: FusionStats,
    /// Input hashes of every fused video, for report provenance.
    pub input_hashes: BTreeMap<String, String>,
    pub skipped: Vec<(String, String)>,
}

/// Encodes, adapts, and fuses every cached video under the configured fusion
/// method. Motion histograms are L1-normalized before fusion so both domains
/// share the unit-mass scale; all-zero (no-motion) histograms stay zero and
/// fall back to the static vector under the variance method.
pub fn assemble_features(
    cfg: &RunConfig,
    index: &DatasetIndex,
    codebook: &Codebook,
) -> Result<FusedDataset> {
    let k = codebook.k();
    let weights = rho_from_ratio(cfg.ratio);
    let mut stats = FusionStats::default();
    let mut videos = Vec::new();
    let mut input_hashes = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut w_motion_acc = 0.0;
    let mut w_static_acc = 0.0;
    let mut pca_shares: Vec<f64> = Vec::new();
    let mut variance_w_motion: Vec<f64> = Vec::new();

    for video in &index.videos {
        let manifest = match load_manifest(cfg, video) {
            Ok(m) => m,
            Err(e) => {
                skipped.push((video.id(), e.to_string()));
                continue;
            }
        };
        if let ExtractStatus::Skipped { reason } = &manifest.status {
            skipped.push((video.id(), reason.clone()));
            continue;
        }
        input_hashes.insert(video.id(), manifest.input_hash.clone());

        let projection = if manifest.static_is_toy {
            let seed = match cfg.static_provider {
                StaticProvider::Toy { seed } => seed,
                _ => cfg.seed,
            };
            Some(RandomProjection::new(TOY_HIST_DIM, k, RandomSeed(seed)))
        } else if manifest.static_raw_dim != k {
            Some(RandomProjection::new(manifest.static_raw_dim, k, RandomSeed(cfg.seed)))
        } else {
            None
        };

        let segment_hoofs = load_hoofs(cfg, video, &manifest)?;
        let static_source = load_static_source(cfg, video, &manifest)?;
        let mut sequence = Vec::with_capacity(manifest.segments.len());
        for (segment, hoofs) in manifest.segments.iter().zip(&segment_hoofs) {
            let bow = encode_bow(hoofs, codebook);
            let motion = bow.l1_normalized();
            let stat =
                segment_static_descriptor(&static_source, segment, k, projection.as_ref())?;
            let zero_motion = motion.sum() == 0.0;
            if zero_motion {
                stats.zero_motion_segments += 1;
            }
            let fused = match cfg.fusion_method {
                FusionMethod::Cholesky => {
                    w_motion_acc += weights.w_motion;
                    w_static_acc += weights.w_static;
                    fuse_cholesky(&stat, &motion, &weights)?
                }
                FusionMethod::Variance => {
                    if zero_motion {
                        stats.degenerate_fusions += 1;
                        w_static_acc += 1.0;
                        variance_w_motion.push(0.0);
                        stat.clone()
                    } else {
                        let out = fuse_variance(&stat, &motion)?;
                        if out.degenerate {
                            stats.degenerate_fusions += 1;
                        }
                        w_motion_acc += out.weights.w_motion;
                        w_static_acc += out.weights.w_static;
                        variance_w_motion.push(out.weights.w_motion);
                        out.fused
                    }
                }
                FusionMethod::Pca => {
                    let out = fuse_pca(&stat, &motion)?;
                    if out.degenerate {
                        stats.degenerate_fusions += 1;
                    }
                    pca_shares.push(out.explained_share);
                    out.fused
                }
            };
            stats.segments += 1;
            sequence.push(fused);
        }
        if sequence.is_empty() {
            skipped.push((video.id(), "no segments".into()));
            continue;
        }
        videos.push(FusedVideo {
            video: video.clone(),
            sequence,
        });
    }

    if stats.segments > 0 {
        stats.mean_w_motion = w_motion_acc / stats.segments as f64;
        stats.mean_w_static = w_static_acc / stats.segments as f64;
    }
    if !variance_w_motion.is_empty() {
        stats.derived_optimum_motion_pct = Some(
            100.0 * variance_w_motion.iter().sum::<f64>() / variance_w_motion.len() as f64,
        );
    }
    if !pca_shares.is_empty() {
        stats.pca_share_min = pca_shares.iter().cloned().reduce(f64::min);
        stats.pca_share_mean =
            Some(pca_shares.iter().sum::<f64>() / pca_shares.len() as f64);
    }
    Ok(FusedDataset {
        class_names: index.classes.clone(),
        videos,
        stats,
        input_hashes,
        skipped,
    })
}

/// Stratified video-level split: every class is shuffled with the run seed
/// and cut at `train_frac`, keeping at least one video on each side. Classes
/// with fewer than two videos are a `Split` error.
pub fn split_stratified(
    dataset: &FusedDataset,
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = RandomSeed(seed).stream("split");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class_index in 0..dataset.class_names.len() {
        let mut members: Vec<usize> = dataset
            .videos
            .iter()
            .enumerate()
            .filter(|(_, v)| v.video.class_index == class_index)
            .map(|(i, _)| i)
            .collect();
        if members.len() < 2 {
            return Err(Error::Split(format!(
                "class `{}` has {} usable videos; need at least 2",
                dataset.class_names[class_index],
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let train_n = ((n as f64 * train_frac).round() as usize).clamp(1, n - 1);
        train.extend_from_slice(&members[..train_n]);
        test.extend_from_slice(&members[train_n..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Wall-clock seconds per stage; excluded from the content hash.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub extract_secs: f64,
    pub codebook_secs: f64,
    pub features_secs: f64,
    pub train_secs: f64,
    pub eval_secs: f64,
}

/// The deterministic body of an evaluation report; hashing this is what makes
/// two same-seed runs comparable byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalContent {
    pub config: RunConfig,
    pub classifier: String,
    pub class_names: Vec<String>,
    pub codebook_k: usize,
    pub train_videos: Vec<String>,
    pub test_videos: Vec<String>,
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<(String, Option<f64>)>,
    pub per_class_ap: Vec<(String, Option<f64>)>,
    pub mean_average_precision: f64,
    pub confusion: ConfusionMatrix,
    pub fusion: FusionStats,
    pub ratio_static_motion: String,
    pub ratio_motion_static: String,
    pub loss_curve: Vec<f64>,
    pub input_hashes: BTreeMap<String, String>,
    pub skipped: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub content: EvalContent,
    /// SHA-256 of the serialized content block.
    pub content_hash: String,
    pub runtime: StageTimes,
}

pub fn content_hash(content: &EvalContent) -> Result<String> {
    let bytes = serde_json::to_vec(content)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn evaluate_predictions(
    dataset: &FusedDataset,
    test: &[usize],
    predictions: &[(usize, Vec<f64>)],
) -> (f64, Vec<Option<f64>>, Vec<Option<f64>>, f64, ConfusionMatrix) {
    let num_classes = dataset.class_names.len();
    let mut confusion = ConfusionMatrix::new(num_classes);
    for (&vi, (pred, _)) in test.iter().zip(predictions) {
        confusion.record(dataset.videos[vi].video.class_index, *pred);
    }
    let accuracy = confusion.accuracy();
    let per_class = confusion.per_class_accuracy();
    let mut per_class_ap = Vec::with_capacity(num_classes);
    for c in 0..num_classes {
        let scores: Vec<f64> = predictions.iter().map(|(_, s)| s[c]).collect();
        let positives: Vec<bool> = test
            .iter()
            .map(|&vi| dataset.videos[vi].video.class_index == c)
            .collect();
        per_class_ap.push(average_precision(&scores, &positives));
    }
    let map = mean_average_precision(&per_class_ap);
    (accuracy, per_class, per_class_ap, map, confusion)
}

struct EvalPieces {
    content: EvalContent,
}

fn build_content(
    cfg: &RunConfig,
    dataset: &FusedDataset,
    codebook_k: usize,
    classifier: &str,
    train: &[usize],
    test: &[usize],
    predictions: &[(usize, Vec<f64>)],
    loss_curve: Vec<f64>,
) -> EvalPieces {
    let (accuracy, per_class, per_class_ap, map, confusion) =
        evaluate_predictions(dataset, test, predictions);
    let name = |i: &usize| dataset.videos[*i].video.id();
    let content = EvalContent {
        config: cfg.clone(),
        classifier: classifier.to_string(),
        class_names: dataset.class_names.clone(),
        codebook_k,
        train_videos: train.iter().map(name).collect(),
        test_videos: test.iter().map(name).collect(),
        overall_accuracy: accuracy,
        per_class_accuracy: dataset
            .class_names
            .iter()
            .cloned()
            .zip(per_class)
            .collect(),
        per_class_ap: dataset
            .class_names
            .iter()
            .cloned()
            .zip(per_class_ap)
            .collect(),
        mean_average_precision: map,
        confusion,
        fusion: dataset.stats.clone(),
        ratio_static_motion: cfg.ratio.static_motion_label(),
        ratio_motion_static: cfg.ratio.motion_static_label(),
        loss_curve,
        input_hashes: dataset.input_hashes.clone(),
        skipped: dataset.skipped.clone(),
    };
    EvalPieces { content }
}

fn lstm_config(cfg: &RunConfig) -> LstmTrainConfig {
    LstmTrainConfig {
        hidden: cfg.lstm_hidden,
        dropout_prob: cfg.lstm_dropout,
        epochs: cfg.lstm_epochs,
        learning_rate: cfg.lstm_lr,
        batch_size: cfg.lstm_batch,
        clip_norm: cfg.lstm_clip,
        seed: cfg.seed,
    }
}

fn sequences_for(dataset: &FusedDataset, indices: &[usize]) -> Vec<SequenceSample> {
    indices
        .iter()
        .map(|&i| SequenceSample {
            vectors: dataset.videos[i].sequence.clone(),
            label: dataset.videos[i].video.class_index,
        })
        .collect()
}

/// Full run: extract (cached), codebook, fuse, split, LSTM train, evaluate.
pub fn run_train_eval(cfg: &RunConfig) -> Result<(EvalReport, ExtractSummary)> {
    let index = index_dataset(&cfg.dataset_root)?;
    std::fs::create_dir_all(&cfg.output_dir)?;

    let t0 = Instant::now();
    let summary = run_extract(cfg, &index)?;
    let extract_secs = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let stage = codebook_stage(cfg, &index)?;
    let codebook_secs = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let dataset = assemble_features(cfg, &index, &stage.codebook)?;
    let features_secs = t2.elapsed().as_secs_f64();

    let (train, test) = split_stratified(&dataset, cfg.train_frac, cfg.seed)?;

    let t3 = Instant::now();
    let train_set = sequences_for(&dataset, &train);
    let out = train_lstm(&train_set, dataset.class_names.len(), &lstm_config(cfg))?;
    let train_secs = t3.elapsed().as_secs_f64();

    let t4 = Instant::now();
    let mut predictions = Vec::with_capacity(test.len());
    for &vi in &test {
        let sample = SequenceSample {
            vectors: dataset.videos[vi].sequence.clone(),
            label: dataset.videos[vi].video.class_index,
        };
        predictions.push(lstm_predict(&out.model, &sample)?);
    }
    let eval_secs = t4.elapsed().as_secs_f64();

    let pieces = build_content(
        cfg,
        &dataset,
        stage.effective_k,
        "lstm",
        &train,
        &test,
        &predictions,
        out.loss_curve,
    );
    let content_hash = content_hash(&pieces.content)?;
    let report = EvalReport {
        content: pieces.content,
        content_hash,
        runtime: StageTimes {
            extract_secs,
            codebook_secs,
            features_secs,
            train_secs,
            eval_secs,
        },
    };
    let model_base = cfg.output_dir.join("models");
    std::fs::create_dir_all(&model_base)?;
    out.model.save(
        &model_base.join("lstm.vten"),
        &model_base.join("lstm.json"),
        cfg.seed,
        &dataset.class_names,
    )?;
    Ok((report, summary))
}

/// One sweep row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio_static_motion: String,
    pub ratio_motion_static: String,
    pub w_motion: f64,
    pub accuracy: f64,
    pub mean_average_precision: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub best_ratio_static_motion: String,
    pub best_accuracy: f64,
    pub worst_accuracy: f64,
}

/// The default sweep grid (static:motion percent pairs).
pub const SWEEP_RATIOS: [(f64, f64); 7] = [
    (100.0, 0.0),
    (80.0, 20.0),
    (60.0, 40.0),
    (50.0, 50.0),
    (40.0, 60.0),
    (20.0, 80.0),
    (0.0, 100.0),
];

/// Trains and evaluates once per contribution ratio under Cholesky fusion,
/// sharing extraction caches, the codebook, and the split across ratios.
pub fn sweep_ratio(
    cfg: &RunConfig,
    ratios: &[ContributionRatio],
) -> Result<(SweepReport, Vec<EvalReport>)> {
    if cfg.fusion_method != FusionMethod::Cholesky {
        return Err(Error::Config("ratio sweeps require Cholesky fusion".into()));
    }
    let index = index_dataset(&cfg.dataset_root)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    run_extract(cfg, &index)?;
    let stage = codebook_stage(cfg, &index)?;

    let mut rows = Vec::with_capacity(ratios.len());
    let mut reports = Vec::with_capacity(ratios.len());
    for ratio in ratios {
        let mut run_cfg = cfg.clone();
        run_cfg.ratio = *ratio;
        let dataset = assemble_features(&run_cfg, &index, &stage.codebook)?;
        // One shared split: seeded identically for every ratio.
        let (train, test) = split_stratified(&dataset, cfg.train_frac, cfg.seed)?;
        let train_set = sequences_for(&dataset, &train);
        let out = train_lstm(&train_set, dataset.class_names.len(), &lstm_config(&run_cfg))?;
        let mut predictions = Vec::with_capacity(test.len());
        for &vi in &test {
            let sample = SequenceSample {
                vectors: dataset.videos[vi].sequence.clone(),
                label: dataset.videos[vi].video.class_index,
            };
            predictions.push(lstm_predict(&out.model, &sample)?);
        }
        let pieces = build_content(
            &run_cfg,
            &dataset,
            stage.effective_k,
            "lstm",
            &train,
            &test,
            &predictions,
            out.loss_curve,
        );
        let hash = content_hash(&pieces.content)?;
        rows.push(SweepRow {
            ratio_static_motion: ratio.static_motion_label(),
            ratio_motion_static: ratio.motion_static_label(),
            w_motion: rho_from_ratio(*ratio).w_motion,
            accuracy: pieces.content.overall_accuracy,
            mean_average_precision: pieces.content.mean_average_precision,
        });
        reports.push(EvalReport {
            content: pieces.content,
            content_hash: hash,
            runtime: StageTimes::default(),
        });
    }
    let best = rows
        .iter()
        .max_by(|a, b| a.accuracy.partial_cmp(&b.accuracy).unwrap())
        .expect("at least one ratio");
    let worst = rows
        .iter()
        .min_by(|a, b| a.accuracy.partial_cmp(&b.accuracy).unwrap())
        .expect("at least one ratio");
    let report = SweepReport {
        best_ratio_static_motion: best.ratio_static_motion.clone(),
        best_accuracy: best.accuracy,
        worst_accuracy: worst.accuracy,
        rows,
    };
    Ok((report, reports))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub lstm: EvalReport,
    pub forest: EvalReport,
    /// LSTM accuracy minus forest accuracy, in points (fractions of 1).
    pub accuracy_margin: f64,
    pub forest_oob_accuracy: Option<f64>,
}

/// Trains the LSTM and the random-forest baseline on identical fused features
/// and split; the baseline sees each video as the mean of its fused vectors.
pub fn compare_temporal(cfg: &RunConfig) -> Result<CompareReport> {
    let index = index_dataset(&cfg.dataset_root)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    run_extract(cfg, &index)?;
    let stage = codebook_stage(cfg, &index)?;
    let dataset = assemble_features(cfg, &index, &stage.codebook)?;
    let (train, test) = split_stratified(&dataset, cfg.train_frac, cfg.seed)?;

    // LSTM side.
    let train_set = sequences_for(&dataset, &train);
    let lstm_out = train_lstm(&train_set, dataset.class_names.len(), &lstm_config(cfg))?;
    let mut lstm_predictions = Vec::with_capacity(test.len());
    for &vi in &test {
        let sample = SequenceSample {
            vectors: dataset.videos[vi].sequence.clone(),
            label: dataset.videos[vi].video.class_index,
        };
        lstm_predictions.push(lstm_predict(&lstm_out.model, &sample)?);
    }
    let lstm_pieces = build_content(
        cfg,
        &dataset,
        stage.effective_k,
        "lstm",
        &train,
        &test,
        &lstm_predictions,
        lstm_out.loss_curve,
    );

    // Forest side: mean-pooled fused vectors.
    let pool = |vi: usize| -> FeatureVec {
        crate::feature::mean_vector(&dataset.videos[vi].sequence).expect("nonempty sequences")
    };
    let forest_train: Vec<(FeatureVec, usize)> = train
        .iter()
        .map(|&vi| (pool(vi), dataset.videos[vi].video.class_index))
        .collect();
    let forest_out = train_forest(
        &forest_train,
        &ForestConfig {
            trees: cfg.forest_trees,
            max_depth: cfg.forest_max_depth,
            seed: cfg.seed,
        },
    )?;
    let forest_predictions: Vec<(usize, Vec<f64>)> = test
        .iter()
        .map(|&vi| {
            let v = pool(vi);
            (forest_out.model.predict(&v), forest_out.model.scores(&v))
        })
        .collect();
    let forest_pieces = build_content(
        cfg,
        &dataset,
        stage.effective_k,
        "random_forest",
        &train,
        &test,
        &forest_predictions,
        Vec::new(),
    );

    let forest_json = cfg.output_dir.join("models").join("forest.json");
    std::fs::create_dir_all(forest_json.parent().unwrap())?;
    atomic_write(&forest_json, forest_out.model.to_json()?.as_bytes())?;

    let lstm_hash = content_hash(&lstm_pieces.content)?;
    let forest_hash = content_hash(&forest_pieces.content)?;
    let margin =
        lstm_pieces.content.overall_accuracy - forest_pieces.content.overall_accuracy;
    Ok(CompareReport {
        lstm: EvalReport {
            content: lstm_pieces.content,
            content_hash: lstm_hash,
            runtime: StageTimes::default(),
        },
        forest: EvalReport {
            content: forest_pieces.content,
            content_hash: forest_hash,
            runtime: StageTimes::default(),
        },
        accuracy_margin: margin,
        forest_oob_accuracy: forest_out.oob_accuracy,
    })
}

/// Writes an evaluation report as pretty JSON plus a per-class CSV.
pub fn write_eval_report(report: &EvalReport, json_path: &Path, csv_path: &Path) -> Result<()> {
    atomic_write(json_path, serde_json::to_string_pretty(report)?.as_bytes())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "accuracy", "average_precision"])
        .map_err(csv_err)?;
    for ((name, acc), (_, ap)) in report
        .content
        .per_class_accuracy
        .iter()
        .zip(&report.content.per_class_ap)
    {
        w.write_record([
            name.as_str(),
            &fmt_opt(*acc),
            &fmt_opt(*ap),
        ])
        .map_err(csv_err)?;
    }
    w.write_record([
        "overall",
        &format!("{:.6}", report.content.overall_accuracy),
        &format!("{:.6}", report.content.mean_average_precision),
    ])
    .map_err(csv_err)?;
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(csv_path, &bytes)?;
    Ok(())
}

/// Writes the ratio sweep as JSON plus the ratio/accuracy/mAP CSV table.
pub fn write_sweep_report(report: &SweepReport, json_path: &Path, csv_path: &Path) -> Result<()> {
    atomic_write(json_path, serde_json::to_string_pretty(report)?.as_bytes())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ratio_static_motion", "accuracy", "mean_average_precision"])
        .map_err(csv_err)?;
    for row in &report.rows {
        w.write_record([
            row.ratio_static_motion.as_str(),
            &format!("{:.6}", row.accuracy),
            &format!("{:.6}", row.mean_average_precision),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    atomic_write(csv_path, &bytes)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
