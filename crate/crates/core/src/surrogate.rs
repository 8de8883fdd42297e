//! Random-forest regression surrogate.
//!
//! Trees are CART regressors with variance-reduction splits. Each tree keeps
//! one presorted index list per feature and partitions those lists stably as
//! it descends, so split search costs `O(n)` per feature and node.

use rand::seq::SliceRandom;
use rand::{Rng as _, RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features_fraction: f64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 64,
            max_depth: None,
            min_samples_split: 3,
            max_features_fraction: 0.8,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidSettings("n_trees must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidSettings("max_depth must be positive".into()));
        }
        if self.min_samples_split == 0 {
            return Err(Error::InvalidSettings("min_samples_split must be positive".into()));
        }
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return Err(Error::InvalidSettings("max_features_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

const LEAF: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    feature: usize,
    threshold: f64,
    left: usize,
    right: usize,
    value: f64,
}

impl Node {
    fn leaf(value: f64) -> Self {
        Self {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            value,
        }
    }
}

/// Axis-aligned regression tree. Samples go left when `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// A tree that predicts `value` everywhere.
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::leaf(value)],
        }
    }

    /// A single split on `feature`.
    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        Self {
            nodes: vec![
                Node {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    value: 0.5 * (left + right),
                },
                Node::leaf(left),
                Node::leaf(right),
            ],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                return node.value;
            }
            i = if x[node.feature] <= node.threshold {
                node.left
            } else {
                node.right
            };
        }
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter(|n| n.feature != LEAF).map(|n| n.feature)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// For every coalition mask `S` (bit `j` set means feature `j` is read
    /// from `other`, otherwise from `reference`), adds `scale` times the
    /// prediction on the hybrid point to `table[S]`.
    pub(crate) fn accumulate_hybrids(&self, reference: &[f64], other: &[f64], scale: f64, table: &mut [f64]) {
        let full = table.len() - 1;
        let mut stack = vec![(0usize, 0usize, 0usize)];
        while let Some((i, must_in, must_out)) = stack.pop() {
            let node = &self.nodes[i];
            if node.feature == LEAF {
                let free = full & !(must_in | must_out);
                let value = scale * node.value;
                let mut sub = free;
                loop {
                    table[sub | must_in] += value;
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & free;
                }
                continue;
            }
            let f = node.feature;
            let bit = 1usize << f;
            let go = |x: &[f64]| {
                if x[f] <= node.threshold {
                    node.left
                } else {
                    node.right
                }
            };
            if must_in & bit != 0 {
                stack.push((go(other), must_in, must_out));
            } else if must_out & bit != 0 {
                stack.push((go(reference), must_in, must_out));
            } else {
                let (via_ref, via_other) = (go(reference), go(other));
                if via_ref == via_other {
                    stack.push((via_ref, must_in, must_out));
                } else {
                    stack.push((via_ref, must_in, must_out | bit));
                    stack.push((via_other, must_in | bit, must_out));
                }
            }
        }
    }
}

/// Bagged ensemble of regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    params: ForestParams,
    n_features: usize,
}

impl Forest {
    /// Wraps hand-built trees; `params.n_trees` is set to the tree count.
    pub fn from_trees(trees: Vec<Tree>, n_features: usize) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidData("a forest needs at least one tree".into()));
        }
        let params = ForestParams {
            n_trees: trees.len(),
            ..ForestParams::default()
        };
        Ok(Self {
            trees,
            params,
            n_features,
        })
    }

    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams, rng: &mut Rng) -> Result<Self> {
        params.validate()?;
        if x.is_empty() {
            return Err(Error::InvalidData("no training samples".into()));
        }
        if x.len() != y.len() {
            return Err(Error::InvalidData(format!("{} rows but {} targets", x.len(), y.len())));
        }
        let n_features = x[0].len();
        if n_features == 0 {
            return Err(Error::InvalidData("zero features".into()));
        }
        for row in x {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite feature value".into()));
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite target".into()));
        }
        let seeds: Vec<u64> = (0..params.n_trees).map(|_| rng.next_u64()).collect();
        let data = TrainingData { x, y, n_features };
        let trees = seeds
            .into_par_iter()
            .map(|seed| data.grow(params, &mut Rng::seed_from_u64(seed)))
            .collect();
        Ok(Self {
            trees,
            params: params.clone(),
            n_features,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean and population variance of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let n = self.trees.len() as f64;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for t in &self.trees {
            let p = t.predict(x);
            sum += p;
            sum_sq += p * p;
        }
        let mean = sum / n;
        Ok((mean, (sum_sq / n - mean * mean).max(0.0)))
    }

    /// Features never used by any split.
    pub fn unused_features(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_features];
        for t in &self.trees {
            for f in t.split_features() {
                used[f] = true;
            }
        }
        (0..self.n_features).filter(|&f| !used[f]).collect()
    }
}

struct TrainingData<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    n_features: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TrainingData<'_> {
    fn grow(&self, params: &ForestParams, rng: &mut Rng) -> Tree {
        let n = self.x.len();
        // Row index of each in-bag sample.
        let rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let m = rows.len();
        let feature = |s: usize, f: usize| self.x[rows[s]][f];
        let target = |s: usize| self.y[rows[s]];

        let mut sorted: Vec<Vec<usize>> = (0..self.n_features)
            .map(|f| {
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&a, &b| feature(a, f).total_cmp(&feature(b, f)));
                order
            })
            .collect();
        let max_features = ((params.max_features_fraction * self.n_features as f64).ceil() as usize)
            .clamp(1, self.n_features);
        let mut features: Vec<usize> = (0..self.n_features).collect();
        let mut goes_left = vec![false; m];
        let mut scratch = Vec::with_capacity(m);

        let mut nodes = vec![Node::leaf(0.0)];
        let mut stack = vec![(0usize, 0usize, m, 0usize)];
        while let Some((id, start, end, depth)) = stack.pop() {
            let count = end - start;
            let sum: f64 = sorted[0][start..end].iter().map(|&s| target(s)).sum();
            let mean = sum / count as f64;
            nodes[id].value = mean;
            let constant = sorted[0][start..end].iter().all(|&s| target(s) == target(sorted[0][start]));
            let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
            if count < params.min_samples_split || count < 2 || constant || depth_reached {
                continue;
            }

            features.shuffle(rng);
            let mut best: Option<Split> = None;
            for (inspected, &f) in features.iter().enumerate() {
                if inspected >= max_features && best.is_some() {
                    break;
                }
                let order = &sorted[f][start..end];
                let mut left_sum = 0.0;
                for k in 0..count - 1 {
                    left_sum += target(order[k]);
                    let (a, b) = (feature(order[k], f), feature(order[k + 1], f));
                    if a == b {
                        continue;
                    }
                    let nl = (k + 1) as f64;
                    let nr = (count - k - 1) as f64;
                    let right_sum = sum - left_sum;
                    let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                    if best.as_ref().is_none_or(|s| score > s.score) {
                        let mut threshold = 0.5 * (a + b);
                        if threshold >= b {
                            threshold = a;
                        }
                        best = Some(Split {
                            feature: f,
                            threshold,
                            score,
                        });
                    }
                }
            }
            let Some(split) = best else { continue };

            for &s in &sorted[split.feature][start..end] {
                goes_left[s] = feature(s, split.feature) <= split.threshold;
            }
            let mut n_left = 0;
            for order in sorted.iter_mut() {
                scratch.clear();
                let range = &mut order[start..end];
                let mut w = 0;
                for r in 0..range.len() {
                    let s = range[r];
                    if goes_left[s] {
                        range[w] = s;
                        w += 1;
                    } else {
                        scratch.push(s);
                    }
                }
                range[w..].copy_from_slice(&scratch);
                n_left = w;
            }

            let left = nodes.len();
            nodes.push(Node::leaf(0.0));
            nodes.push(Node::leaf(0.0));
            let node = &mut nodes[id];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = left;
            node.right = left + 1;
            stack.push((left + 1, start + n_left, end, depth + 1));
            stack.push((left, start, start + n_left, depth + 1));
        }
        Tree { nodes }
    }
}
