//! Shapley-value tunability of hyperparameters on the surrogate.
//!
//! Players are hyperparameters. A coalition `S` is worth the largest
//! predicted improvement over a reference configuration that can be reached
//! by copying the values on `S` from any member of a random pool, keeping
//! the reference values elsewhere. Shapley values of that game rank the
//! hyperparameters, and [`select_important`] keeps the smallest top prefix
//! that accounts for a fraction `tau` of the total gain.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::configspace::{ConfigSpace, Configuration};
use crate::scalarization::WeightVector;
use crate::surrogate::Forest;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpiSettings {
    /// Random configurations the game draws hybrid values from.
    pub pool_size: usize,
    /// Largest player count solved by full enumeration.
    pub exact_limit: usize,
    /// Permutations per player for the sampling estimator.
    pub permutations_per_player: usize,
}

impl Default for HpiSettings {
    fn default() -> Self {
        Self {
            pool_size: 64,
            exact_limit: 12,
            permutations_per_player: 2,
        }
    }
}

impl HpiSettings {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 || self.permutations_per_player == 0 {
            return Err(Error::InvalidSettings("pool size and permutation count must be positive".into()));
        }
        if self.exact_limit > 20 {
            return Err(Error::InvalidSettings("exact_limit above 20 is not supported".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapleyMethod {
    Exact,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpiResult {
    pub shapley: Vec<f64>,
    /// Selected hyperparameters in descending order of importance.
    pub important: Vec<usize>,
    pub method: ShapleyMethod,
    pub total_gain: f64,
}

/// Cooperative game over the hyperparameters of a space.
pub struct TunabilityGame<'a> {
    forest: &'a Forest,
    weights: WeightVector,
    reference: Configuration,
    pool: Vec<Configuration>,
    reference_encoded: Vec<f64>,
    pool_encoded: Vec<Vec<f64>>,
    reference_prediction: f64,
    players: usize,
}

impl<'a> TunabilityGame<'a> {
    /// `forest` predicts the scalarized cost under `weights` on encodings of
    /// `space`; `reference` and every pool member must be legal in `space`.
    pub fn new(
        space: &ConfigSpace,
        forest: &'a Forest,
        weights: WeightVector,
        reference: Configuration,
        pool: Vec<Configuration>,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::InvalidSettings("tunability game needs a non-empty pool".into()));
        }
        let space = space.unconstrained();
        space.validate(&reference)?;
        for p in &pool {
            space.validate(p)?;
        }
        if forest.n_features() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: forest.n_features(),
            });
        }
        let reference_encoded = space.encode(&reference);
        let pool_encoded = pool.iter().map(|c| space.encode(c)).collect();
        let mut game = Self {
            forest,
            weights,
            reference,
            pool,
            reference_encoded,
            pool_encoded,
            reference_prediction: 0.0,
            players: space.dim(),
        };
        game.reference_prediction = game.predict(&game.reference_encoded);
        Ok(game)
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn reference(&self) -> &Configuration {
        &self.reference
    }

    pub fn pool(&self) -> &[Configuration] {
        &self.pool
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// Forest mean accumulated tree by tree, in the same order as the
    /// coalition table so both routes round identically.
    fn predict(&self, x: &[f64]) -> f64 {
        let scale = 1.0 / self.forest.trees().len() as f64;
        self.forest.trees().iter().fold(0.0, |acc, t| acc + scale * t.predict(x))
    }

    /// Value of the coalition whose members are flagged in `members`.
    pub fn value(&self, members: &[bool]) -> f64 {
        assert_eq!(members.len(), self.players);
        if !members.iter().any(|&m| m) {
            return 0.0;
        }
        let mut hybrid = self.reference_encoded.clone();
        let mut best = f64::INFINITY;
        for p in &self.pool_encoded {
            for (j, &m) in members.iter().enumerate() {
                hybrid[j] = if m { p[j] } else { self.reference_encoded[j] };
            }
            best = best.min(self.predict(&hybrid));
        }
        (self.reference_prediction - best).max(0.0)
    }

    pub fn value_of_mask(&self, mask: usize) -> f64 {
        let members: Vec<bool> = (0..self.players).map(|j| mask >> j & 1 == 1).collect();
        self.value(&members)
    }

    /// Values of all `2^d` coalitions, indexed by bit mask.
    pub fn coalition_values(&self) -> Vec<f64> {
        assert!(self.players < usize::BITS as usize - 1, "too many players for a table");
        let size = 1usize << self.players;
        let scale = 1.0 / self.forest.trees().len() as f64;
        let mut best = vec![f64::INFINITY; size];
        let mut table = vec![0.0; size];
        for p in &self.pool_encoded {
            table.iter_mut().for_each(|v| *v = 0.0);
            for t in self.forest.trees() {
                t.accumulate_hybrids(&self.reference_encoded, p, scale, &mut table);
            }
            for (b, &v) in best.iter_mut().zip(&table) {
                *b = b.min(v);
            }
        }
        let mut values: Vec<f64> = best
            .into_iter()
            .map(|b| (self.reference_prediction - b).max(0.0))
            .collect();
        values[0] = 0.0;
        values
    }
}

/// Shapley values from a table of all coalition values indexed by bit mask.
pub fn shapley_from_table(values: &[f64], players: usize) -> Vec<f64> {
    assert_eq!(values.len(), 1 << players);
    if players == 0 {
        return Vec::new();
    }
    // weight[s] = s! (d - s - 1)! / d! = 1 / (d * C(d - 1, s))
    let mut weight = vec![0.0; players];
    let mut binom = 1.0;
    for (s, w) in weight.iter_mut().enumerate() {
        *w = 1.0 / (players as f64 * binom);
        binom = binom * (players - 1 - s) as f64 / (s + 1) as f64;
    }
    let mut phi = vec![0.0; players];
    for mask in 0..values.len() {
        let size = mask.count_ones() as usize;
        for (j, phi_j) in phi.iter_mut().enumerate() {
            let bit = 1 << j;
            if mask & bit == 0 {
                *phi_j += weight[size] * (values[mask | bit] - values[mask]);
            }
        }
    }
    phi
}

/// Exact Shapley values by enumerating all `2^d` coalitions. The value
/// function receives coalitions as bit masks and is called once per mask.
pub fn shapley_exact<F: FnMut(usize) -> f64>(mut value: F, players: usize, exact_limit: usize) -> Result<Vec<f64>> {
    if players > exact_limit {
        return Err(Error::TooManyPlayers {
            players,
            limit: exact_limit,
        });
    }
    let values: Vec<f64> = (0..1usize << players).map(&mut value).collect();
    Ok(shapley_from_table(&values, players))
}

/// Average marginal contributions along the given player orderings.
pub fn shapley_from_permutations<F, I>(mut value: F, players: usize, permutations: I) -> Vec<f64>
where
    F: FnMut(&[bool]) -> f64,
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut phi = vec![0.0; players];
    let mut count = 0usize;
    let mut members = vec![false; players];
    for perm in permutations {
        members.iter_mut().for_each(|m| *m = false);
        let mut previous = value(&members);
        for &j in &perm {
            members[j] = true;
            let current = value(&members);
            phi[j] += current - previous;
            previous = current;
        }
        count += 1;
    }
    if count > 0 {
        phi.iter_mut().for_each(|p| *p /= count as f64);
    }
    phi
}

/// Permutation-sampling Shapley estimator.
pub fn shapley_permutation<F: FnMut(&[bool]) -> f64>(
    value: F,
    players: usize,
    n_permutations: usize,
    rng: &mut Rng,
) -> Vec<f64> {
    let perms: Vec<Vec<usize>> = (0..n_permutations)
        .map(|_| {
            let mut p: Vec<usize> = (0..players).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    shapley_from_permutations(value, players, perms)
}

/// Top prefix (by clamped Shapley value) whose cumulative share reaches
/// `tau` of the clamped total. Negative values count as zero. Degenerate
/// totals select everything.
pub fn select_important(shapley: &[f64], tau: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..shapley.len()).collect();
    if shapley.iter().any(|v| v.is_nan()) {
        return order;
    }
    let clamped: Vec<f64> = shapley.iter().map(|v| v.max(0.0)).collect();
    order.sort_by(|&a, &b| clamped[b].total_cmp(&clamped[a]));
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return order;
    }
    // Inclusive comparison with slack for summation rounding.
    let threshold = tau * total - 1e-12 * total;
    let mut cumulative = 0.0;
    let mut selected = Vec::new();
    for j in order {
        selected.push(j);
        cumulative += clamped[j];
        if cumulative >= threshold {
            break;
        }
    }
    selected
}

/// Builds the tunability game around `reference`, solves it, and selects
/// the hyperparameters covering `tau` of the total gain.
pub fn compute_hpi(
    space: &ConfigSpace,
    forest: &Forest,
    weights: &WeightVector,
    reference: &Configuration,
    tau: f64,
    settings: &HpiSettings,
    rng: &mut Rng,
) -> Result<HpiResult> {
    let full = space.unconstrained();
    let pool = full.sample_n(settings.pool_size, rng);
    let game = TunabilityGame::new(&full, forest, weights.clone(), reference.clone(), pool)?;
    let d = game.players();
    let (shapley, method) = if d <= settings.exact_limit {
        (shapley_from_table(&game.coalition_values(), d), ShapleyMethod::Exact)
    } else {
        let n = settings.permutations_per_player * d;
        (
            shapley_permutation(|m| game.value(m), d, n, rng),
            ShapleyMethod::Permutation,
        )
    };
    let total_gain = shapley.iter().sum();
    let important = select_important(&shapley, tau);
    Ok(HpiResult {
        shapley,
        important,
        method,
        total_gain,
    })
}
