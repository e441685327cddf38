//! Random-forest baseline: bootstrap-sampled CART trees with Gini splits over
//! sqrt(D) random features per node, majority vote at prediction time. The
//! baseline deliberately ignores sequence order; its input is one pooled
//! vector per video.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::FeatureVec;
use crate::rng::RandomSeed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Training class counts; never empty at train time.
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    fn leaf_counts<'a>(&'a self, v: &[f64]) -> &'a [usize] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if v[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Leaf majority class, ties to the lowest class index.
    pub fn predict(&self, v: &[f64]) -> usize {
        argmax_counts(self.leaf_counts(v))
    }
}

fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub num_classes: usize,
    pub tree_count: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl ForestModel {
    /// Majority vote over trees, ties to the lowest class index.
    pub fn predict(&self, v: &FeatureVec) -> usize {
        argmax_counts(&self.votes(v))
    }

    /// Per-class vote fractions in [0, 1]; usable as ranking scores.
    pub fn scores(&self, v: &FeatureVec) -> Vec<f64> {
        self.votes(v)
            .iter()
            .map(|&c| c as f64 / self.trees.len() as f64)
            .collect()
    }

    fn votes(&self, v: &FeatureVec) -> Vec<usize> {
        let mut votes = vec![0usize; self.num_classes];
        for t in &self.trees {
            votes[t.predict(v.as_slice())] += 1;
        }
        votes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug)]
pub struct ForestTrainOutput {
    pub model: ForestModel,
    /// Out-of-bag accuracy over samples left out of at least one bootstrap.
    pub oob_accuracy: Option<f64>,
}

/// Trains bootstrap-sampled CART trees with Gini splits over sqrt(D) random
/// features per node.
pub fn train_forest(
    samples: &[(FeatureVec, usize)],
    config: &ForestConfig,
) -> Result<ForestTrainOutput> {
    if samples.is_empty() {
        return Err(Error::Config("empty forest training set".into()));
    }
    let num_classes = samples.iter().map(|(_, l)| l + 1).max().unwrap();
    if num_classes < 2 {
        return Err(Error::Config("forest training needs at least two classes".into()));
    }
    let dim = samples[0].0.dim();
    let features_per_node = ((dim as f64).sqrt().floor() as usize).clamp(1, dim);
    let seed = RandomSeed(config.seed);
    let n = samples.len();

    let mut trees = Vec::with_capacity(config.trees);
    let mut oob_votes: Vec<Vec<usize>> = vec![vec![0; num_classes]; n];
    for t in 0..config.trees {
        let mut rng = seed.stream(&format!("forest.tree.{t}"));
        let bag: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut in_bag = vec![false; n];
        for &i in &bag {
            in_bag[i] = true;
        }
        let mut builder = TreeBuilder {
            samples,
            num_classes,
            max_depth: config.max_depth,
            feature_pool: dim,
            features_per_node,
            nodes: Vec::new(),
            rng,
        };
        builder.grow(bag, 0);
        let tree = DecisionTree {
            nodes: builder.nodes,
        };
        for (i, (v, _)) in samples.iter().enumerate() {
            if !in_bag[i] {
                oob_votes[i][tree.predict(v.as_slice())] += 1;
            }
        }
        trees.push(tree);
    }

    let mut oob_total = 0usize;
    let mut oob_correct = 0usize;
    for (i, votes) in oob_votes.iter().enumerate() {
        if votes.iter().sum::<usize>() == 0 {
            continue;
        }
        oob_total += 1;
        if argmax_counts(votes) == samples[i].1 {
            oob_correct += 1;
        }
    }
    let oob_accuracy = (oob_total > 0).then(|| oob_correct as f64 / oob_total as f64);

    Ok(ForestTrainOutput {
        model: ForestModel {
            trees,
            num_classes,
            tree_count: config.trees,
            max_depth: config.max_depth,
            seed: config.seed,
        },
        oob_accuracy,
    })
}

struct TreeBuilder<'a> {
    samples: &'a [(FeatureVec, usize)],
    num_classes: usize,
    max_depth: usize,
    feature_pool: usize,
    features_per_node: usize,
    nodes: Vec<Node>,
    rng: rand_chacha::ChaCha8Rng,
}

impl TreeBuilder<'_> {
    /// Grows the subtree for `indices`, returning its node id.
    fn grow(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&indices);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || indices.len() < 2 {
            return self.push_leaf(counts);
        }
        match self.best_split(&indices, &counts) {
            None => self.push_leaf(counts),
            Some((feature, threshold)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| self.samples[i].0[feature] <= threshold);
                let id = self.nodes.len();
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                let left = self.grow(left_idx, depth + 1);
                let right = self.grow(right_idx, depth + 1);
                if let Node::Split {
                    left: l, right: r, ..
                } = &mut self.nodes[id]
                {
                    *l = left;
                    *r = right;
                }
                id
            }
        }
    }

    fn push_leaf(&mut self, counts: Vec<usize>) -> usize {
        debug_assert!(counts.iter().sum::<usize>() > 0, "leaves are never empty");
        self.nodes.push(Node::Leaf { counts });
        self.nodes.len() - 1
    }

    fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &i in indices {
            counts[self.samples[i].1] += 1;
        }
        counts
    }

    /// Best Gini split over a random feature subset; None when nothing
    /// improves on the parent impurity.
    fn best_split(&mut self, indices: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let total = indices.len() as f64;
        let parent_gini = gini(counts, indices.len());

        // Sample features without replacement.
        let mut pool: Vec<usize> = (0..self.feature_pool).collect();
        for i in 0..self.features_per_node.min(pool.len()) {
            let j = self.rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        let chosen = &pool[..self.features_per_node.min(pool.len())];

        let mut best: Option<(usize, f64)> = None;
        let mut best_gini = parent_gini - 1e-12;
        for &feature in chosen {
            let mut vals: Vec<(f64, usize)> = indices
                .iter()
                .map(|&i| (self.samples[i].0[feature], self.samples[i].1))
                .collect();
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let mut left_counts = vec![0usize; self.num_classes];
            let mut left_n = 0usize;
            for w in 0..vals.len() - 1 {
                left_counts[vals[w].1] += 1;
                left_n += 1;
                if vals[w].0 == vals[w + 1].0 {
                    continue; // no threshold separates equal values
                }
                let right_n = indices.len() - left_n;
                let mut right_counts = counts.to_vec();
                for (rc, lc) in right_counts.iter_mut().zip(&left_counts) {
                    *rc -= lc;
                }
                let weighted = (left_n as f64 / total) * gini(&left_counts, left_n)
                    + (right_n as f64 / total) * gini(&right_counts, right_n);
                if weighted < best_gini {
                    best_gini = weighted;
                    best = Some((feature, 0.5 * (vals[w].0 + vals[w + 1].0)));
                }
            }
        }
        best
    }
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / nf;
            p * p
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: Vec<f64>) -> FeatureVec {
        FeatureVec::new(v).unwrap()
    }

    #[test]
    fn single_tree_fits_separable_points() {
        let samples = vec![
            (fv(vec![0.0, 0.0]), 0),
            (fv(vec![0.1, 0.0]), 0),
            (fv(vec![1.0, 1.0]), 1),
            (fv(vec![0.9, 1.0]), 1),
        ];
        // Seed 16's bootstrap is a permutation of all four points, so the
        // single tree sees the whole training set and must fit it perfectly.
        let out = train_forest(
            &samples,
            &ForestConfig {
                trees: 1,
                max_depth: 4,
                seed: 16,
            },
        )
        .unwrap();
        for (v, l) in &samples {
            assert_eq!(out.model.predict(v), *l);
        }
    }

    #[test]
    fn conflicting_duplicates_resolve_by_majority_then_lowest_index() {
        // The same point with labels {0, 1, 1} -> majority 1; with {0, 1} the
        // tie resolves to class 0.
        let samples = vec![
            (fv(vec![0.5, 0.5]), 0),
            (fv(vec![0.5, 0.5]), 1),
            (fv(vec![0.5, 0.5]), 1),
            (fv(vec![5.0, 5.0]), 0),
        ];
        let counts = vec![1usize, 2];
        assert_eq!(argmax_counts(&counts), 1);
        let tie = vec![2usize, 2];
        assert_eq!(argmax_counts(&tie), 0);
        // End to end: the duplicated point predicts deterministically.
        let out = train_forest(
            &samples,
            &ForestConfig {
                trees: 7,
                max_depth: 3,
                seed: 2,
            },
        )
        .unwrap();
        let a = out.model.predict(&fv(vec![0.5, 0.5]));
        let b = out.model.predict(&fv(vec![0.5, 0.5]));
        assert_eq!(a, b);
    }

    fn separable_dataset(per_class: usize) -> Vec<(FeatureVec, usize)> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut out = Vec::new();
        for i in 0..per_class {
            let _ = i;
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..0.4)).collect();
            let mut b: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..0.4)).collect();
            b[0] += 1.0;
            out.push((fv(a), 0));
            out.push((fv(b), 1));
        }
        out
    }

    #[test]
    fn oob_accuracy_on_separable_data() {
        let samples = separable_dataset(40);
        let out = train_forest(&samples, &ForestConfig::default()).unwrap();
        let oob = out.oob_accuracy.expect("bootstraps leave samples out");
        assert!(oob >= 0.9, "OOB accuracy {oob}");
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let samples = separable_dataset(10);
        let cfg = ForestConfig {
            trees: 12,
            max_depth: 6,
            seed: 9,
        };
        let a = train_forest(&samples, &cfg).unwrap();
        let b = train_forest(&samples, &cfg).unwrap();
        assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    }

    #[test]
    fn json_roundtrip_preserves_predictions() {
        let samples = separable_dataset(10);
        let out = train_forest(
            &samples,
            &ForestConfig {
                trees: 5,
                max_depth: 5,
                seed: 3,
            },
        )
        .unwrap();
        let json = out.model.to_json().unwrap();
        let back = ForestModel::from_json(&json).unwrap();
        for (v, _) in &samples {
            assert_eq!(out.model.predict(v), back.predict(v));
            assert_eq!(out.model.scores(v), back.scores(v));
        }
    }

    #[test]
    fn scores_sum_to_one() {
        let samples = separable_dataset(8);
        let out = train_forest(
            &samples,
            &ForestConfig {
                trees: 9,
                max_depth: 4,
                seed: 1,
            },
        )
        .unwrap();
        let s = out.model.scores(&samples[0].0);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

