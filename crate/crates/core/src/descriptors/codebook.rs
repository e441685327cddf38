//! HOOF codebook (k-means) and bag-of-words encoding.
//!
//! Training samples a bounded subset of the corpus without replacement,
//! seeds with k-means++, and runs Lloyd iterations until the relative
//! objective improvement drops below 1e-6 or 100 iterations pass. Encoding
//! counts nearest-center hits, so the histogram total equals the number of
//! encoded descriptors exactly.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::feature::FeatureVec;
use crate::rng::RandomSeed;
use crate::vten::{atomic_write, Tensor};

use super::hoof::HoofVector;

pub const DEFAULT_CODEBOOK_K: usize = 1000;
pub const DEFAULT_SAMPLE_N: usize = 100_000;

const MAX_LLOYD_ITERS: usize = 100;
const REL_TOL: f64 = 1e-6;

/// k cluster heads over HOOF space.
#[derive(Debug, Clone)]
pub struct Codebook {
    /// k rows of `dim` values.
    pub centers: Vec<Vec<f64>>,
    pub dim: usize,
    pub train_sample_count: usize,
    pub seed: u64,
}

/// Per-iteration Lloyd objective values (non-increasing).
#[derive(Debug, Clone)]
pub struct KmeansTrace {
    pub objectives: Vec<f64>,
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn save(&self, tensor_path: &Path, manifest_path: &Path) -> Result<()> {
        let flat: Vec<f64> = self.centers.iter().flatten().copied().collect();
        Tensor::f64(vec![self.k(), self.dim], flat)?.save(tensor_path)?;
        let manifest = serde_json::json!({
            "k": self.k(),
            "dim": self.dim,
            "train_sample_count": self.train_sample_count,
            "seed": self.seed,
        });
        atomic_write(manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
        Ok(())
    }

    pub fn load(tensor_path: &Path, manifest_path: &Path) -> Result<Self> {
        let t = Tensor::load(tensor_path)?;
        let dims = t.dims().to_vec();
        if dims.len() != 2 {
            return Err(Error::Shape(format!("codebook tensor must be rank 2, got {dims:?}")));
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
        let data = t.to_f64();
        let centers = data.chunks_exact(dims[1]).map(|c| c.to_vec()).collect();
        Ok(Self {
            centers,
            dim: dims[1],
            train_sample_count: manifest["train_sample_count"].as_u64().unwrap_or(0) as usize,
            seed: manifest["seed"].as_u64().unwrap_or(0),
        })
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center by squared Euclidean distance, ties resolved
/// to the lowest index.
pub fn nearest_center(centers: &[Vec<f64>], v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Trains a codebook on up to `sample_n` vectors sampled uniformly without
/// replacement. Fails with `SmallCorpus` when the sampled set has fewer
/// distinct vectors than requested centers; the error carries the achievable
/// count so desk-scale callers can shrink k.
pub fn build_codebook(
    corpus: &[HoofVector],
    k: usize,
    sample_n: usize,
    seed: RandomSeed,
) -> Result<(Codebook, KmeansTrace)> {
    if corpus.is_empty() {
        return Err(Error::SmallCorpus {
            requested: k,
            achievable: 0,
        });
    }
    assert!(k >= 1, "codebook must request at least one center");
    let dim = corpus[0].dim();
    let mut rng = seed.stream("codebook.sample");

    // Uniform sample without replacement (partial Fisher-Yates on indices).
    let take = sample_n.min(corpus.len());
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    for i in 0..take {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    let sample: Vec<&[f64]> = indices[..take]
        .iter()
        .map(|&i| corpus[i].bins.as_slice())
        .collect();

    let distinct: HashSet<Vec<u64>> = sample
        .iter()
        .map(|v| v.iter().map(|x| x.to_bits()).collect())
        .collect();
    if distinct.len() < k {
        return Err(Error::SmallCorpus {
            requested: k,
            achievable: distinct.len(),
        });
    }

    // k-means++ seeding.
    let mut seeding_rng = seed.stream("codebook.kmeanspp");
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = seeding_rng.gen_range(0..sample.len());
    centers.push(sample[first].to_vec());
    let mut min_d2: Vec<f64> = sample.iter().map(|v| sq_dist(v, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = min_d2.iter().sum();
        debug_assert!(total > 0.0, "distinct count guarantees a positive mass");
        let mut target = seeding_rng.gen_range(0.0..total);
        let mut chosen = sample.len() - 1;
        for (i, &d) in min_d2.iter().enumerate() {
            if target < d {
                chosen = i;
                break;
            }
            target -= d;
        }
        let c = sample[chosen].to_vec();
        for (i, v) in sample.iter().enumerate() {
            min_d2[i] = min_d2[i].min(sq_dist(v, &c));
        }
        centers.push(c);
    }

    // Lloyd iterations.
    let mut objectives: Vec<f64> = Vec::new();
    let mut assignment = vec![0usize; sample.len()];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut objective = 0.0;
        for (i, v) in sample.iter().enumerate() {
            let c = nearest_center(&centers, v);
            assignment[i] = c;
            objective += sq_dist(v, &centers[c]);
        }
        let improved = match objectives.last() {
            None => true,
            Some(&prev) => prev - objective >= REL_TOL * prev.max(f64::MIN_POSITIVE),
        };
        objectives.push(objective);
        if !improved || objective == 0.0 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, v) in sample.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, x) in sums[assignment[i]].iter_mut().zip(*v) {
                *s += x;
            }
        }
        for (c, (sum, count)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                for (cj, sj) in c.iter_mut().zip(sum) {
                    *cj = sj / *count as f64;
                }
            }
        }
    }

    Ok((
        Codebook {
            centers,
            dim,
            train_sample_count: take,
            seed: seed.0,
        },
        KmeansTrace { objectives },
    ))
}

/// Bag-of-words histogram: one count per descriptor at its nearest center.
/// The output dimension is the codebook size and its sum equals the number of
/// inputs exactly.
pub fn encode_bow(segment_hoofs: &[HoofVector], codebook: &Codebook) -> FeatureVec {
    let mut hist = vec![0.0; codebook.k()];
    for h in segment_hoofs {
        hist[nearest_center(&codebook.centers, &h.bins)] += 1.0;
    }
    FeatureVec::new(hist).expect("counts are finite")
}
