//! Augmented Tchebycheff scalarization with simplex-uniform weights.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSettings(format!(
                "weights must be non-negative and sum to one: {weights:?}"
            )));
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationParams {
    pub rho: f64,
}

impl Default for ScalarizationParams {
    fn default() -> Self {
        Self { rho: 0.05 }
    }
}

/// Uniform draw from the `(m-1)`-simplex via normalised exponentials.
pub fn sample_weights<R: rand::Rng + ?Sized>(m: usize, rng: &mut R) -> WeightVector {
    assert!(m >= 1, "need at least one objective");
    if m == 1 {
        return WeightVector(vec![1.0]);
    }
    loop {
        let draws: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
        let sum: f64 = draws.iter().sum();
        if sum > 0.0 {
            let mut w: Vec<f64> = draws.iter().map(|d| d / sum).collect();
            // Push the rounding residue onto the largest entry.
            let residue = 1.0 - w.iter().sum::<f64>();
            let k = (0..m).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
            w[k] += residue;
            return WeightVector(w);
        }
    }
}

/// Per-objective min-max normalisation of a cost matrix (rows are records).
/// Objectives with zero spread map to zero.
pub fn normalize_objectives(costs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(first) = costs.first() else {
        return Vec::new();
    };
    let m = first.len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for row in costs {
        for j in 0..m {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    costs
        .iter()
        .map(|row| {
            (0..m)
                .map(|j| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        (row[j] - lo[j]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// `max_j w_j f_j + rho * sum_j w_j f_j`.
pub fn scalarize(costs: &[f64], weights: &WeightVector, params: ScalarizationParams) -> f64 {
    debug_assert_eq!(costs.len(), weights.len());
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (f, w) in costs.iter().zip(weights.as_slice()) {
        let t = w * f;
        max = max.max(t);
        sum += t;
    }
    max + params.rho * sum
}

/// Normalises the cost matrix and scalarizes every row.
pub fn scalarized_costs(costs: &[Vec<f64>], weights: &WeightVector, params: ScalarizationParams) -> Vec<f64> {
    normalize_objectives(costs)
        .iter()
        .map(|row| scalarize(row, weights, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::*;

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn hand_values() {
        let p = ScalarizationParams::default();
        let f = [0.4, 0.6];
        assert!((scalarize(&f, &w(&[0.5, 0.5]), p) - 0.325).abs() < 1e-12);
        assert!((scalarize(&f, &w(&[1.0, 0.0]), p) - 0.42).abs() < 1e-12);
        assert!((scalarize(&f, &w(&[0.0, 1.0]), p) - 0.63).abs() < 1e-12);
    }

    #[test]
    fn weight_sampling() {
        let mut rng = seeded_rng(1);
        assert_eq!(sample_weights(1, &mut rng).as_slice(), &[1.0]);
        let n = 100_000;
        let mut total = 0.0;
        for _ in 0..n {
            let wv = sample_weights(2, &mut rng);
            assert!(wv.as_slice().iter().all(|&x| x >= 0.0));
            assert!((wv.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            total += wv.as_slice()[0];
        }
        let mean = total / n as f64;
        assert!((0.49..=0.51).contains(&mean), "{mean}");
    }

    #[test]
    fn normalization() {
        let z = normalize_objectives(&[vec![0.2, 5.0], vec![0.4, 5.0], vec![0.6, 5.0]]);
        let col0: Vec<f64> = z.iter().map(|r| r[0]).collect();
        assert!((col0[0]).abs() < 1e-12 && (col0[1] - 0.5).abs() < 1e-12 && (col0[2] - 1.0).abs() < 1e-12);
        assert!(z.iter().all(|r| r[1] == 0.0));
        assert_eq!(normalize_objectives(&[vec![3.0, 4.0]]), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.5, 1.5]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_costs(seed in any::<u64>(), f in prop::collection::vec(0.0f64..1.0, 3), bump in 0.001f64..1.0, k in 0usize..3) {
            let mut rng = seeded_rng(seed);
            let weights = sample_weights(3, &mut rng);
            prop_assume!(weights.as_slice().iter().all(|&x| x > 1e-6));
            let mut g = f.clone();
            g[k] += bump;
            let p = ScalarizationParams::default();
            prop_assert!(scalarize(&f, &weights, p) < scalarize(&g, &weights, p));
        }

        #[test]
        fn zero_and_scaling(seed in any::<u64>(), rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..20), c in 0.1f64..10.0) {
            let weights = sample_weights(2, &mut seeded_rng(seed));
            let p = ScalarizationParams::default();
            prop_assert_eq!(scalarize(&[0.0, 0.0], &weights, p), 0.0);
            let base: Vec<f64> = rows.iter().map(|r| scalarize(r, &weights, p)).collect();
            let scaled: Vec<f64> = rows.iter().map(|r| scalarize(&[r[0] * c, r[1] * c], &weights, p)).collect();
            for (a, b) in base.iter().zip(&scaled) {
                prop_assert!((a * c - b).abs() < 1e-9);
            }
            let argmin = |v: &[f64]| (0..v.len()).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
            prop_assert!((scaled[argmin(&scaled)] - scaled[argmin(&base)]).abs() < 1e-9);
        }
    }
}
