//! Static (appearance) descriptors.
//!
//! The upstream network that produced per-frame appearance vectors is
//! replaced by two providers: ingestion of precomputed per-frame rows from a
//! VTEN file, and a deterministic toy descriptor (an 8x8 spatial by 8
//! intensity-bin histogram pushed through a seeded random projection).
//! A segment's static descriptor is the component-wise mean of its frames'
//! vectors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::feature::FeatureVec;
use crate::frame::{Frame, FrameSequence};
use crate::rng::RandomSeed;
use crate::segment::Segment;
use crate::vten::Tensor;

/// 8x8 spatial grid x 8 intensity bins.
pub const TOY_HIST_DIM: usize = 512;
const GRID: usize = 8;
const INTENSITY_BINS: usize = 8;

/// Where per-frame static vectors come from.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StaticProvider {
    /// Per-video VTEN file (frames x dim); the path is resolved relative to
    /// each video directory.
    File { path: PathBuf },
    /// Deterministic color/spatial histogram with a seeded projection.
    Toy { seed: u64 },
}

impl FromStr for StaticProvider {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("file", path)) if !path.is_empty() => Ok(StaticProvider::File {
                path: PathBuf::from(path),
            }),
            Some(("toy", seed)) => Ok(StaticProvider::Toy {
                seed: seed
                    .parse()
                    .map_err(|_| Error::Config(format!("bad toy seed `{seed}`")))?,
            }),
            _ => Err(Error::Config(format!(
                "static provider must be `file:<path>` or `toy:<seed>`, got `{s}`"
            ))),
        }
    }
}

impl std::fmt::Display for StaticProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StaticProvider::File { path } => write!(f, "file:{}", path.display()),
            StaticProvider::Toy { seed } => write!(f, "toy:{seed}"),
        }
    }
}

/// Raw per-frame static vectors for one video, before any projection.
#[derive(Debug, Clone)]
pub struct StaticSource {
    pub rows: Vec<Vec<f64>>,
    pub raw_dim: usize,
    /// Toy rows are projected and normalized even when dimensions match.
    pub needs_projection: bool,
}

impl StaticSource {
    /// Loads a frames x dim VTEN file of precomputed features.
    pub fn from_file(path: &Path) -> Result<Self> {
        let t = Tensor::load(path)?;
        let dims = t.dims().to_vec();
        if dims.len() != 2 {
            return Err(Error::Shape(format!(
                "static feature tensor must be rank 2, got {dims:?}"
            )));
        }
        let data = t.to_f64();
        let rows = data.chunks_exact(dims[1]).map(|r| r.to_vec()).collect();
        Ok(Self {
            rows,
            raw_dim: dims[1],
            needs_projection: false,
        })
    }

    /// Computes the toy histogram for every frame.
    pub fn from_toy(frames: &FrameSequence) -> Self {
        let rows = frames.frames().iter().map(toy_frame_histogram).collect();
        Self {
            rows,
            raw_dim: TOY_HIST_DIM,
            needs_projection: true,
        }
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        let flat: Vec<f64> = self.rows.iter().flatten().copied().collect();
        Tensor::f32_from_f64(vec![self.rows.len(), self.raw_dim], &flat)
    }
}

/// The toy per-frame descriptor: pixel counts over an 8x8 spatial grid with
/// 8 intensity bins each, normalized to sum to one.
pub fn toy_frame_histogram(frame: &Frame) -> Vec<f64> {
    let mut hist = vec![0.0; TOY_HIST_DIM];
    let (w, h) = (frame.width, frame.height);
    for y in 0..h {
        let cy = (y * GRID / h).min(GRID - 1);
        for x in 0..w {
            let cx = (x * GRID / w).min(GRID - 1);
            let luma = frame.luma(x, y);
            let bin = ((luma * INTENSITY_BINS as f64) as usize).min(INTENSITY_BINS - 1);
            hist[(cy * GRID + cx) * INTENSITY_BINS + bin] += 1.0;
        }
    }
    let total = (w * h) as f64;
    for v in &mut hist {
        *v /= total;
    }
    hist
}

/// Seeded random projection with nonnegative entries, so histogram inputs
/// stay histogram-like after projection.
#[derive(Debug, Clone)]
pub struct RandomProjection {
    matrix: Vec<f64>, // row-major, out_dim x in_dim
    pub in_dim: usize,
    pub out_dim: usize,
}

impl RandomProjection {
    pub fn new(in_dim: usize, out_dim: usize, seed: RandomSeed) -> Self {
        let mut rng = seed.stream("static.projection");
        let matrix = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        Self {
            matrix,
            in_dim,
            out_dim,
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.in_dim {
            return Err(Error::Shape(format!(
                "projection expects {} inputs, got {}",
                self.in_dim,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.out_dim];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[j * self.in_dim..(j + 1) * self.in_dim];
            *o = row.iter().zip(v).map(|(m, x)| m * x).sum();
        }
        Ok(out)
    }
}

/// Adapts one raw frame row to the target dimension: toy rows (and file rows
/// of mismatched dimension) are projected and L1-normalized; matching file
/// rows pass through untouched.
fn adapt_row(
    row: &[f64],
    source: &StaticSource,
    target_dim: usize,
    projection: Option<&RandomProjection>,
) -> Result<FeatureVec> {
    if !source.needs_projection && source.raw_dim == target_dim {
        return FeatureVec::new(row.to_vec());
    }
    let proj = projection.ok_or_else(|| {
        Error::Shape(format!(
            "static rows of dim {} need a projection to dim {target_dim}",
            source.raw_dim
        ))
    })?;
    Ok(FeatureVec::new(proj.apply(row)?)?.l1_normalized())
}

/// Per-segment static descriptor: the mean of the segment frames' adapted
/// vectors. A frame without a feature row is a `DataGap`.
pub fn segment_static_descriptor(
    source: &StaticSource,
    segment: &Segment,
    target_dim: usize,
    projection: Option<&RandomProjection>,
) -> Result<FeatureVec> {
    let mut acc = vec![0.0; target_dim];
    for frame in segment.frames() {
        let row = source
            .rows
            .get(frame)
            .ok_or(Error::DataGap { frame })?;
        let v = adapt_row(row, source, target_dim, projection)?;
        if v.dim() != target_dim {
            return Err(Error::Shape(format!(
                "static row dim {} != target {target_dim}",
                v.dim()
            )));
        }
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
    }
    let n = segment.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    FeatureVec::new(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray_frame(w: usize, h: usize, fill: impl Fn(usize, usize) -> u8) -> Frame {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(fill(x, y));
            }
        }
        Frame::new(w, h, 1, data).unwrap()
    }

    fn seg(start: usize, end: usize) -> Segment {
        Segment { start_frame: start, end_frame: end, segment_index: 0 }
    }

    #[test]
    fn provider_flag_parsing() {
        assert_eq!(
            StaticProvider::from_str("toy:42").unwrap(),
            StaticProvider::Toy { seed: 42 }
        );
        assert_eq!(
            StaticProvider::from_str("file:static.vten").unwrap(),
            StaticProvider::File { path: PathBuf::from("static.vten") }
        );
        assert!(StaticProvider::from_str("cnn:whatever").is_err());
        assert!(StaticProvider::from_str("toy:abc").is_err());
    }

    #[test]
    fn toy_histogram_is_a_distribution() {
        let f = gray_frame(32, 32, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let h = toy_frame_histogram(&f);
        assert_eq!(h.len(), TOY_HIST_DIM);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(h.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn identical_frames_average_to_single_frame_descriptor() {
        let f = gray_frame(16, 16, |x, _| (x * 16) as u8);
        let seq = FrameSequence::new(vec![f; 4], None).unwrap();
        let source = StaticSource::from_toy(&seq);
        let proj = RandomProjection::new(TOY_HIST_DIM, 64, RandomSeed(7));
        let avg = segment_static_descriptor(&source, &seg(0, 4), 64, Some(&proj)).unwrap();
        let single = segment_static_descriptor(&source, &seg(0, 1), 64, Some(&proj)).unwrap();
        for (a, b) in avg.iter().zip(single.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn file_rows_average_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("static.vten");
        let rows = vec![1.0f64, 2.0, 3.0, 5.0, 6.0, 7.0];
        Tensor::f64(vec![2, 3], rows).unwrap().save(&path).unwrap();
        let source = StaticSource::from_file(&path).unwrap();
        let v = segment_static_descriptor(&source, &seg(0, 2), 3, None).unwrap();
        assert_eq!(v.as_slice(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn missing_frame_row_is_a_data_gap() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("static.vten");
        Tensor::f64(vec![2, 3], vec![0.0; 6]).unwrap().save(&path).unwrap();
        let source = StaticSource::from_file(&path).unwrap();
        match segment_static_descriptor(&source, &seg(0, 4), 3, None) {
            Err(Error::DataGap { frame }) => assert_eq!(frame, 2),
            other => panic!("expected DataGap, got {other:?}"),
        }
    }

    #[test]
    fn toy_provider_is_bit_deterministic() {
        let f = gray_frame(24, 24, |x, y| ((x * y) % 256) as u8);
        let seq = FrameSequence::new(vec![f; 3], None).unwrap();
        let run = || {
            let source = StaticSource::from_toy(&seq);
            let proj = RandomProjection::new(TOY_HIST_DIM, 32, RandomSeed(9));
            segment_static_descriptor(&source, &seg(0, 3), 32, Some(&proj)).unwrap()
        };
        let a = run();
        let b = run();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn mismatched_file_dim_projects_to_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("static.vten");
        Tensor::f64(vec![1, 10], vec![0.1; 10]).unwrap().save(&path).unwrap();
        let mut source = StaticSource::from_file(&path).unwrap();
        source.needs_projection = true;
        let proj = RandomProjection::new(10, 4, RandomSeed(3));
        let v = segment_static_descriptor(&source, &seg(0, 1), 4, Some(&proj)).unwrap();
        assert_eq!(v.dim(), 4);
        assert!((v.sum() - 1.0).abs() < 1e-12, "projected rows are normalized");
    }
}
