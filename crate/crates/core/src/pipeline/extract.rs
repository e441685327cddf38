//! Stage one: per-video descriptor extraction with content-addressed caches.
//!
//! Each video yields per-segment HOOF vectors and per-frame raw static
//! vectors, written atomically under
//! `<output>/caches/<class>/<video>/`. A cache is reused when the hash of its
//! inputs (frame bytes, sidecar files, extraction config) is unchanged.
//! Failing videos are recorded and skipped; the run continues.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{boxes_for_frame, dbscan, ClusterParams};
use crate::descriptors::hoof::extract_segment_hoofs;
use crate::descriptors::{HoofVector, StaticProvider, StaticSource};
use crate::error::{Error, Result};
use crate::frame::{list_frame_files, read_frame_dir, FrameSequence};
use crate::segment::{segment_video, Segment};
use crate::trajectory::{
    compute_flow, read_trajectory_file, track_video, FlowField, FlowParams, TrackerParams,
    TrajectoryPointSet,
};
use crate::tubes::{build_motion_tubes, equalize_box_counts, link_boxes, normalize_tube_boxes};
use crate::vten::{atomic_write, Tensor};

use super::config::RunConfig;

/// One video of the dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoRef {
    pub class_index: usize,
    pub class_name: String,
    pub video_name: String,
    pub dir: PathBuf,
}

impl VideoRef {
    pub fn id(&self) -> String {
        format!("{}/{}", self.class_name, self.video_name)
    }
}

/// Sorted classes and videos under the dataset root.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub classes: Vec<String>,
    pub videos: Vec<VideoRef>,
}

pub fn index_dataset(root: &Path) -> Result<DatasetIndex> {
    let mut classes: Vec<String> = std::fs::read_dir(root)
        .map_err(|e| Error::Config(format!("cannot read dataset root {}: {e}", root.display())))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    classes.sort();
    if classes.is_empty() {
        return Err(Error::Config(format!(
            "dataset root {} holds no class directories",
            root.display()
        )));
    }
    let mut videos = Vec::new();
    for (class_index, class_name) in classes.iter().enumerate() {
        let class_dir = root.join(class_name);
        let mut names: Vec<String> = std::fs::read_dir(&class_dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(Error::Config(format!("class `{class_name}` holds no videos")));
        }
        for video_name in names {
            let dir = class_dir.join(&video_name);
            videos.push(VideoRef {
                class_index,
                class_name: class_name.clone(),
                video_name,
                dir,
            });
        }
    }
    Ok(DatasetIndex { classes, videos })
}

/// Extraction outcome of one video.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub enum ExtractStatus {
    Ok,
    /// Too short for a single segment.
    Skipped { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoManifest {
    pub input_hash: String,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub segments: Vec<Segment>,
    /// HOOF vectors per segment (zero for no-motion segments).
    pub hoof_counts: Vec<usize>,
    pub hoof_bins: usize,
    pub static_raw_dim: usize,
    pub static_is_toy: bool,
    pub status: ExtractStatus,
}

pub struct VideoCachePaths {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub hoofs: PathBuf,
    pub static_raw: PathBuf,
}

pub fn cache_paths(cfg: &RunConfig, video: &VideoRef) -> VideoCachePaths {
    let dir = cfg
        .output_dir
        .join("caches")
        .join(&video.class_name)
        .join(&video.video_name);
    VideoCachePaths {
        manifest: dir.join("manifest.json"),
        hoofs: dir.join("hoofs.vten"),
        static_raw: dir.join("static_raw.vten"),
        dir,
    }
}

/// Hash of everything that determines this video's cache content.
pub fn input_hash(cfg: &RunConfig, video: &VideoRef) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(cfg.extraction_fingerprint().as_bytes());
    for file in list_frame_files(&video.dir)? {
        hasher.update(file.file_name().unwrap_or_default().as_encoded_bytes());
        hasher.update(std::fs::read(&file)?);
    }
    let traj = video.dir.join("trajectories.txt");
    if traj.exists() {
        hasher.update(b"trajectories");
        hasher.update(std::fs::read(&traj)?);
    }
    if let StaticProvider::File { path } = &cfg.static_provider {
        let sidecar = video.dir.join(path);
        if sidecar.exists() {
            hasher.update(b"static");
            hasher.update(std::fs::read(&sidecar)?);
        }
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Summary of an extraction run.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ExtractSummary {
    pub processed: Vec<String>,
    /// Videos served from an up-to-date cache (subset of `processed`).
    pub cache_hits: Vec<String>,
    pub skipped: Vec<(String, String)>,
    pub failed: Vec<(String, String)>,
}

impl ExtractSummary {
    pub fn all_processed(&self) -> bool {
        self.skipped.is_empty() && self.failed.is_empty()
    }
}

/// Runs extraction over every indexed video, in parallel, reusing up-to-date
/// caches. Never aborts on a per-video failure.
pub fn run_extract(cfg: &RunConfig, index: &DatasetIndex) -> Result<ExtractSummary> {
    let results: Vec<(String, Result<(bool, ExtractStatus)>)> = index
        .videos
        .par_iter()
        .map(|video| (video.id(), extract_video(cfg, video)))
        .collect();
    let mut summary = ExtractSummary::default();
    for (id, result) in results {
        match result {
            Ok((cache_hit, ExtractStatus::Ok)) => {
                if cache_hit {
                    summary.cache_hits.push(id.clone());
                }
                summary.processed.push(id);
            }
            Ok((_, ExtractStatus::Skipped { reason })) => summary.skipped.push((id, reason)),
            Err(e) => summary.failed.push((id, e.to_string())),
        }
    }
    Ok(summary)
}

/// Extracts one video (or validates its cache). Returns (cache_hit, status).
pub fn extract_video(cfg: &RunConfig, video: &VideoRef) -> Result<(bool, ExtractStatus)> {
    let paths = cache_paths(cfg, video);
    let hash = input_hash(cfg, video)?;
    if let Ok(text) = std::fs::read_to_string(&paths.manifest) {
        if let Ok(manifest) = serde_json::from_str::<VideoManifest>(&text) {
            if manifest.input_hash == hash {
                return Ok((true, manifest.status));
            }
        }
    }
    std::fs::create_dir_all(&paths.dir)?;

    let frames = read_frame_dir(&video.dir)?;
    let segments = match segment_video(frames.len(), cfg.segment_length, cfg.stride) {
        Ok(s) => s,
        Err(Error::EmptyVideo { frame_count, segment_length }) => {
            let status = ExtractStatus::Skipped {
                reason: format!("EmptyVideo: {frame_count} frames < segment length {segment_length}"),
            };
            let manifest = VideoManifest {
                input_hash: hash,
                frame_count: frames.len(),
                width: frames.width(),
                height: frames.height(),
                segments: Vec::new(),
                hoof_counts: Vec::new(),
                hoof_bins: cfg.hoof_bins,
                static_raw_dim: 0,
                static_is_toy: matches!(cfg.static_provider, StaticProvider::Toy { .. }),
                status: status.clone(),
            };
            atomic_write(&paths.manifest, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
            return Ok((false, status));
        }
        Err(e) => return Err(e),
    };

    let (hoof_counts, hoofs) = extract_motion(cfg, video, &frames, &segments, &paths)?;

    // Static rows, raw (projection to the codebook dimension happens later).
    let static_source = match &cfg.static_provider {
        StaticProvider::Toy { .. } => StaticSource::from_toy(&frames),
        StaticProvider::File { path } => StaticSource::from_file(&video.dir.join(path))?,
    };
    if static_source.rows.len() < frames.len() {
        return Err(Error::DataGap {
            frame: static_source.rows.len(),
        });
    }
    static_source.to_tensor()?.save(&paths.static_raw)?;

    let flat: Vec<f64> = hoofs.iter().flat_map(|h| h.bins.iter().copied()).collect();
    Tensor::f32_from_f64(vec![hoofs.len(), cfg.hoof_bins], &flat)?.save(&paths.hoofs)?;

    let manifest = VideoManifest {
        input_hash: hash,
        frame_count: frames.len(),
        width: frames.width(),
        height: frames.height(),
        segments,
        hoof_counts,
        hoof_bins: cfg.hoof_bins,
        static_raw_dim: static_source.raw_dim,
        static_is_toy: static_source.needs_projection,
        status: ExtractStatus::Ok,
    };
    atomic_write(&paths.manifest, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok((false, ExtractStatus::Ok))
}

/// Flow, tracking, clustering, tubes, HOOFs for every segment.
fn extract_motion(
    cfg: &RunConfig,
    video: &VideoRef,
    frames: &FrameSequence,
    segments: &[Segment],
    paths: &VideoCachePaths,
) -> Result<(Vec<usize>, Vec<HoofVector>)> {
    let flow_params = FlowParams {
        window: cfg.flow_window,
        pyramid_levels: cfg.flow_levels,
        iterations: cfg.flow_iterations,
        eig_threshold: cfg.flow_eig_threshold,
    };
    let tracker_params = TrackerParams {
        max_trajectory_length: cfg.max_trajectory_length,
        max_jump: cfg.max_jump,
        min_displacement: cfg.min_displacement,
        grid_step: cfg.grid_step,
        mag_threshold: cfg.mag_threshold,
    };
    let cluster_params = ClusterParams {
        eps: cfg.dbscan_eps,
        min_points: cfg.dbscan_min_points,
        min_box_side: cfg.min_box_side,
    };
    let (w, h) = (frames.width(), frames.height());

    // flows[k] maps frame k to k+1; the last frame gets a zero field so every
    // box has a flow plane to read.
    let mut flows: Vec<FlowField> = Vec::with_capacity(frames.len());
    for k in 0..frames.len() - 1 {
        flows.push(compute_flow(frames.frame(k), frames.frame(k + 1), &flow_params)?);
    }

    let traj_file = video.dir.join("trajectories.txt");
    let mut point_sets: Vec<TrajectoryPointSet> = if traj_file.exists() {
        read_trajectory_file(&traj_file)?
    } else {
        track_video(&flows, &tracker_params)
    };
    point_sets.resize_with(frames.len(), TrajectoryPointSet::default);

    flows.push(FlowField::zeros(w, h));

    // Per-frame action boxes.
    let mut cluster_dump = cfg.dump_clusters.then(String::new);
    let per_frame_boxes: Vec<Vec<crate::clustering::ActionBox>> = point_sets
        .iter()
        .enumerate()
        .map(|(k, set)| {
            let points: Vec<(f64, f64)> = set.points.iter().map(|&(x, y, _)| (x, y)).collect();
            let (clusters, _noise) =
                dbscan(&points, k, cluster_params.eps, cluster_params.min_points);
            if let Some(dump) = &mut cluster_dump {
                let line = serde_json::json!({
                    "frame": k,
                    "clusters": clusters.iter().map(|c| serde_json::json!({
                        "size": c.len(),
                        "centroid": [c.centroid.0, c.centroid.1],
                    })).collect::<Vec<_>>(),
                });
                dump.push_str(&line.to_string());
                dump.push('\n');
            }
            boxes_for_frame(clusters, w, h, &cluster_params)
        })
        .collect();
    if let Some(dump) = cluster_dump {
        atomic_write(&paths.dir.join("clusters.jsonl"), dump.as_bytes())?;
    }

    let mut hoof_counts = Vec::with_capacity(segments.len());
    let mut all_hoofs: Vec<HoofVector> = Vec::new();
    for segment in segments {
        let slice = &per_frame_boxes[segment.start_frame..segment.end_frame];
        match equalize_box_counts(slice, segment.start_frame) {
            Err(Error::NoMotion) => {
                hoof_counts.push(0);
            }
            Err(e) => return Err(e),
            Ok((equalized, _n)) => {
                let mut assignments = Vec::with_capacity(equalized.len() - 1);
                for pair in equalized.windows(2) {
                    assignments.push(link_boxes(&pair[0], &pair[1])?);
                }
                let (tubes, matrix) = build_motion_tubes(&equalized, &assignments)?;
                if cfg.dump_tubes {
                    let base = paths.dir.join(format!("tubes_seg{:03}", segment.segment_index));
                    matrix.to_tensor().save(&base.with_extension("vten"))?;
                    let sidecar = serde_json::json!({
                        "segment_index": segment.segment_index,
                        "start_frame": segment.start_frame,
                        "end_frame": segment.end_frame,
                        "tubes": tubes.len(),
                    });
                    atomic_write(
                        &base.with_extension("json"),
                        serde_json::to_string_pretty(&sidecar)?.as_bytes(),
                    )?;
                }
                let normalized: Vec<_> = tubes
                    .iter()
                    .map(|t| normalize_tube_boxes(t, w, h))
                    .collect();
                let hoofs = extract_segment_hoofs(segment, &normalized, &flows, cfg.hoof_bins);
                hoof_counts.push(hoofs.len());
                all_hoofs.extend(hoofs);
            }
        }
    }
    Ok((hoof_counts, all_hoofs))
}

/// Loads a cached video's manifest.
pub fn load_manifest(cfg: &RunConfig, video: &VideoRef) -> Result<VideoManifest> {
    let paths = cache_paths(cfg, video);
    let text = std::fs::read_to_string(&paths.manifest)?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a cached video's per-segment HOOF vectors.
pub fn load_hoofs(
    cfg: &RunConfig,
    video: &VideoRef,
    manifest: &VideoManifest,
) -> Result<Vec<Vec<HoofVector>>> {
    let paths = cache_paths(cfg, video);
    let t = Tensor::load(&paths.hoofs)?;
    let dims = t.dims().to_vec();
    if dims.len() != 2 || dims[1] != manifest.hoof_bins {
        return Err(Error::Shape(format!("hoof cache dims {dims:?}")));
    }
    let data = t.to_f64();
    let mut rows = data
        .chunks_exact(manifest.hoof_bins)
        .map(|c| HoofVector { bins: c.to_vec() });
    let mut out = Vec::with_capacity(manifest.hoof_counts.len());
    for &count in &manifest.hoof_counts {
        out.push((&mut rows).take(count).collect());
    }
    Ok(out)
}

/// Loads a cached video's raw static rows.
pub fn load_static_source(
    cfg: &RunConfig,
    video: &VideoRef,
    manifest: &VideoManifest,
) -> Result<StaticSource> {
    let paths = cache_paths(cfg, video);
    let t = Tensor::load(&paths.static_raw)?;
    let dims = t.dims().to_vec();
    if dims.len() != 2 || dims[1] != manifest.static_raw_dim {
        return Err(Error::Shape(format!("static cache dims {dims:?}")));
    }
    let data = t.to_f64();
    Ok(StaticSource {
        rows: data.chunks_exact(dims[1]).map(|r| r.to_vec()).collect(),
        raw_dim: dims[1],
        needs_projection: manifest.static_is_toy,
    })
}
