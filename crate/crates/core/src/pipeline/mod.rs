//! Batch orchestration: dataset indexing, cached extraction, codebook and
//! fusion stages, train/eval runs, ratio sweeps, temporal comparisons, and
//! report files.

pub mod config;
pub mod extract;
pub mod run;

pub use config::RunConfig;
pub use extract::{
    cache_paths, extract_video, index_dataset, input_hash, load_hoofs, load_manifest,
    load_static_source, run_extract, DatasetIndex, ExtractStatus, ExtractSummary, VideoManifest,
    VideoRef,
};
pub use run::{
    assemble_features, codebook_stage, compare_temporal, content_hash, gather_hoof_corpus,
    run_train_eval, split_stratified, sweep_ratio, write_eval_report, write_sweep_report,
    CodebookStage, CompareReport, EvalContent, EvalReport, FusedDataset, FusedVideo, FusionStats,
    StageTimes, SweepReport, SweepRow, SWEEP_RATIOS,
};
