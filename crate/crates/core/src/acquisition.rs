//! Expected improvement and its maximisation by random sampling followed by
//! hill climbing.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::configspace::{ConfigSpace, Configuration};
use crate::surrogate::Forest;
use crate::{Error, Result, Rng};

/// Neighbors drawn per hill-climbing step.
pub const LOCAL_SEARCH_NEIGHBORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSettings {
    pub n_random_candidates: usize,
    pub n_local_starts: usize,
    pub local_steps: usize,
    pub duplicate_retry_limit: usize,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self {
            n_random_candidates: 1000,
            n_local_starts: 5,
            local_steps: 20,
            duplicate_retry_limit: 100,
        }
    }
}

impl AcquisitionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_random_candidates == 0
            || self.n_local_starts == 0
            || self.local_steps == 0
            || self.duplicate_retry_limit == 0
        {
            return Err(Error::InvalidSettings("acquisition counts must be positive".into()));
        }
        Ok(())
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement below `best` for a Gaussian prediction (minimisation).
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return (best - mean).max(0.0);
    }
    let z = (best - mean) / sigma;
    (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
}

struct Scorer<'a> {
    space: &'a ConfigSpace,
    forest: &'a Forest,
    best: f64,
    buf: Vec<f64>,
}

impl Scorer<'_> {
    fn ei(&mut self, config: &Configuration) -> f64 {
        self.space.encode_into(config, &mut self.buf);
        let (mean, var) = self.forest.predict(&self.buf).expect("encoded width matches forest");
        expected_improvement(mean, var, self.best)
    }
}

fn is_seen(config: &Configuration, seen: &[Configuration]) -> bool {
    seen.iter().any(|s| s.same_point(config))
}

/// Returns the EI-maximising configuration of `space` that is not in `seen`.
///
/// Fails with [`Error::SpaceExhausted`] when no unseen candidate turns up,
/// which for a fully pinned space means its single point is already known.
pub fn optimize_acquisition(
    space: &ConfigSpace,
    forest: &Forest,
    seen: &[Configuration],
    best_scalarized: f64,
    settings: &AcquisitionSettings,
    rng: &mut Rng,
) -> Result<Configuration> {
    if space.tunable_count() == 0 {
        let only = space.default_configuration();
        return if is_seen(&only, seen) {
            Err(Error::SpaceExhausted)
        } else {
            Ok(only)
        };
    }
    let mut scorer = Scorer {
        space,
        forest,
        best: best_scalarized,
        buf: Vec::with_capacity(space.dim()),
    };

    let mut scored: Vec<(f64, Configuration)> = space
        .sample_n(settings.n_random_candidates, rng)
        .into_iter()
        .map(|c| (scorer.ei(&c), c))
        .collect();
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));

    let starts: Vec<(f64, Configuration)> = order
        .iter()
        .take(settings.n_local_starts)
        .map(|&i| scored[i].clone())
        .collect();
    for (mut value, mut current) in starts {
        for _ in 0..settings.local_steps {
            let Ok(neighbors) = space.neighbors(&current, LOCAL_SEARCH_NEIGHBORS, rng) else {
                break;
            };
            let best = neighbors
                .into_iter()
                .map(|n| (scorer.ei(&n), n))
                .max_by(|a, b| a.0.total_cmp(&b.0));
            match best {
                Some((v, n)) if v > value => {
                    value = v;
                    current = n;
                    scored.push((v, current.clone()));
                }
                _ => break,
            }
        }
    }

    // Stable sort keeps sampling order among equal EI values.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    if let Some((_, c)) = scored.into_iter().find(|(_, c)| !is_seen(c, seen)) {
        return Ok(c);
    }
    for _ in 0..settings.duplicate_retry_limit {
        let c = space.sample(rng);
        if !is_seen(&c, seen) {
            return Ok(c);
        }
    }
    Err(Error::SpaceExhausted)
}
