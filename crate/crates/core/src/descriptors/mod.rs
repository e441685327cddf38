//! Per-segment descriptor construction: HOOF motion histograms, the k-means
//! codebook with bag-of-words encoding, and static descriptor providers.

pub mod codebook;
pub mod hoof;
pub mod statics;

pub use codebook::{
    build_codebook, encode_bow, nearest_center, Codebook, KmeansTrace, DEFAULT_CODEBOOK_K,
    DEFAULT_SAMPLE_N,
};
pub use hoof::{
    compute_hoof, extract_segment_hoofs, hoof_bin, primary_angle, HoofVector, DEFAULT_HOOF_BINS,
};
pub use statics::{
    segment_static_descriptor, toy_frame_histogram, RandomProjection, StaticProvider,
    StaticSource, TOY_HIST_DIM,
};
