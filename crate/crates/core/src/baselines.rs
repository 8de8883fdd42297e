//! Random search and NSGA-II.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::benchmarks::Task;
use crate::configspace::{ConfigSpace, Configuration, Domain, Value};
use crate::history::{HistoryMeta, Record, RunHistory, Source};
use crate::metrics::dominates;
use crate::{seeded_rng, Error, Result, Rng};

fn new_history(task: &Task, optimizer: &str, budget: usize, seed: u64, settings: serde_json::Value) -> RunHistory {
    RunHistory::new(HistoryMeta {
        task: task.name().to_string(),
        optimizer: optimizer.to_string(),
        seed,
        budget,
        objectives: task.objective_count(),
        settings,
        space: task.space().clone(),
        truncated: false,
    })
}

/// `budget` uniform samples from the task's space.
pub fn run_random_search(task: &Task, budget: usize, seed: u64) -> Result<RunHistory> {
    if budget == 0 {
        return Err(Error::InvalidSettings("budget must be positive".into()));
    }
    let mut rng = seeded_rng(seed);
    let mut history = new_history(task, "random", budget, seed, serde_json::json!({ "budget": budget }));
    for _ in 0..budget {
        let config = task.space().sample(&mut rng);
        let objectives = task.evaluate(&config)?;
        history.push(Record::new(0, config, objectives, Source::RandomSearch))?;
    }
    Ok(history)
}

/// Non-dominated fronts, best first. Every index appears in exactly one front.
pub fn fast_nondominated_sort(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of a front.
#[allow(clippy::needless_range_loop)]
pub fn crowding_distance(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut distance = vec![0.0; n];
    if n == 0 {
        return distance;
    }
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..front[0].len() {
        order.sort_by(|&a, &b| front[a][k].total_cmp(&front[b][k]));
        let (lo, hi) = (front[order[0]][k], front[order[n - 1]][k]);
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..n.saturating_sub(1) {
                let i = order[w];
                distance[i] += (front[order[w + 1]][k] - front[order[w - 1]][k]) / (hi - lo);
            }
        }
    }
    distance
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Settings {
    pub population_size: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability; `None` means `1 / D`.
    pub mutation_prob: Option<f64>,
    pub sbx_eta: f64,
    pub pm_eta: f64,
}

impl Default for Nsga2Settings {
    fn default() -> Self {
        Self {
            population_size: 20,
            crossover_prob: 0.9,
            mutation_prob: None,
            sbx_eta: 15.0,
            pm_eta: 20.0,
        }
    }
}

impl Nsga2Settings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSettings(m.to_string()));
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return bad("population size must be a positive even number");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("crossover probability must lie in [0, 1]");
        }
        if self.mutation_prob.is_some_and(|p| !(0.0..=1.0).contains(&p)) {
            return bad("mutation probability must lie in [0, 1]");
        }
        if !(self.sbx_eta >= 0.0 && self.pm_eta >= 0.0) {
            return bad("distribution indices must be non-negative");
        }
        Ok(())
    }
}

struct Individual {
    config: Configuration,
    objectives: Vec<f64>,
    rank: usize,
    crowding: f64,
}

/// Simulated binary crossover of two genes on `[lo, hi]`.
fn sbx(y1: f64, y2: f64, lo: f64, hi: f64, eta: f64, rng: &mut Rng) -> (f64, f64) {
    if (y1 - y2).abs() <= 1e-14 {
        return (y1, y2);
    }
    let (a, b) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
    let u: f64 = rng.random();
    let spread = |beta: f64| {
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
        }
    };
    let betaq = spread(1.0 + 2.0 * (a - lo) / (b - a));
    let c1 = 0.5 * ((a + b) - betaq * (b - a));
    let betaq = spread(1.0 + 2.0 * (hi - b) / (b - a));
    let c2 = 0.5 * ((a + b) + betaq * (b - a));
    let (c1, c2) = (c1.clamp(lo, hi), c2.clamp(lo, hi));
    if rng.random_bool(0.5) {
        (c2, c1)
    } else {
        (c1, c2)
    }
}

/// Polynomial mutation of one gene on `[lo, hi]`.
fn polynomial_mutation(y: f64, lo: f64, hi: f64, eta: f64, rng: &mut Rng) -> f64 {
    let span = hi - lo;
    let (d1, d2) = ((y - lo) / span, (hi - y) / span);
    let u: f64 = rng.random();
    let power = 1.0 / (eta + 1.0);
    let deltaq = if u < 0.5 {
        let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        val.powf(power) - 1.0
    } else {
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - val.powf(power)
    };
    (y + deltaq * span).clamp(lo, hi)
}

fn make_offspring(
    space: &ConfigSpace,
    a: &Configuration,
    b: &Configuration,
    settings: &Nsga2Settings,
    mutation_prob: f64,
    rng: &mut Rng,
) -> (Configuration, Configuration) {
    let mut c1 = a.values().to_vec();
    let mut c2 = b.values().to_vec();
    if rng.random::<f64>() < settings.crossover_prob {
        for (j, p) in space.params().iter().enumerate() {
            if !rng.random_bool(0.5) {
                continue;
            }
            match p.domain() {
                Domain::Categorical { .. } => std::mem::swap(&mut c1[j], &mut c2[j]),
                d => {
                    let (lo, hi) = d.search_bounds().expect("numeric");
                    if hi <= lo {
                        continue;
                    }
                    let (s1, s2) = sbx(d.to_search(&c1[j]), d.to_search(&c2[j]), lo, hi, settings.sbx_eta, rng);
                    c1[j] = d.decode_search(s1);
                    c2[j] = d.decode_search(s2);
                }
            }
        }
    }
    for child in [&mut c1, &mut c2] {
        for (j, p) in space.params().iter().enumerate() {
            if rng.random::<f64>() >= mutation_prob {
                continue;
            }
            match p.domain() {
                Domain::Categorical { categories } => {
                    let Value::Cat(cur) = child[j] else { unreachable!() };
                    let pick = rng.random_range(0..categories.len() - 1);
                    child[j] = Value::Cat(if pick >= cur { pick + 1 } else { pick });
                }
                d => {
                    let (lo, hi) = d.search_bounds().expect("numeric");
                    if hi <= lo {
                        continue;
                    }
                    let s = polynomial_mutation(d.to_search(&child[j]), lo, hi, settings.pm_eta, rng);
                    child[j] = d.decode_search(s);
                }
            }
        }
    }
    (Configuration::new(c1), Configuration::new(c2))
}

fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let objectives: Vec<Vec<f64>> = pop.iter().map(|i| i.objectives.clone()).collect();
    for (rank, front) in fast_nondominated_sort(&objectives).into_iter().enumerate() {
        let points: Vec<Vec<f64>> = front.iter().map(|&i| objectives[i].clone()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&points)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
}

/// Crowded comparison: lower rank, then larger crowding distance.
fn better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'a>(pop: &'a [Individual], rng: &mut Rng) -> &'a Individual {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if better(b, a) {
        b
    } else {
        a
    }
}

/// Generational NSGA-II. Every evaluation is recorded; the run stops after
/// exactly `budget` evaluations.
pub fn run_nsga2(task: &Task, settings: &Nsga2Settings, budget: usize, seed: u64) -> Result<RunHistory> {
    settings.validate()?;
    if budget < settings.population_size {
        return Err(Error::InvalidSettings(format!(
            "budget {budget} is smaller than the population {}",
            settings.population_size
        )));
    }
    let space = task.space();
    let mutation_prob = settings.mutation_prob.unwrap_or(1.0 / space.dim() as f64);
    let mut rng = seeded_rng(seed);
    let snapshot = serde_json::json!({ "budget": budget, "nsga2": settings });
    let mut history = new_history(task, "nsga2", budget, seed, snapshot);

    let mut population = Vec::with_capacity(2 * settings.population_size);
    for _ in 0..settings.population_size {
        let config = space.sample(&mut rng);
        let objectives = task.evaluate(&config)?;
        history.push(Record::new(0, config.clone(), objectives.clone(), Source::Initial))?;
        population.push(Individual {
            config,
            objectives,
            rank: 0,
            crowding: 0.0,
        });
    }
    assign_rank_and_crowding(&mut population);

    while history.len() < budget {
        let mut offspring = Vec::with_capacity(settings.population_size);
        while offspring.len() < settings.population_size && history.len() < budget {
            let (a, b) = (tournament(&population, &mut rng), tournament(&population, &mut rng));
            let (c1, c2) = make_offspring(space, &a.config, &b.config, settings, mutation_prob, &mut rng);
            for config in [c1, c2] {
                if offspring.len() == settings.population_size || history.len() == budget {
                    break;
                }
                let objectives = task.evaluate(&config)?;
                history.push(Record::new(0, config.clone(), objectives.clone(), Source::Evolution))?;
                offspring.push(Individual {
                    config,
                    objectives,
                    rank: 0,
                    crowding: 0.0,
                });
            }
        }
        population.extend(offspring);
        assign_rank_and_crowding(&mut population);
        // Environmental selection: by rank, then by crowding distance.
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&i, &j| {
            population[i]
                .rank
                .cmp(&population[j].rank)
                .then(population[j].crowding.total_cmp(&population[i].crowding))
        });
        order.truncate(settings.population_size);
        let mut keep = vec![false; population.len()];
        for i in order {
            keep[i] = true;
        }
        let mut k = 0;
        population.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        assign_rank_and_crowding(&mut population);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::ZdtVariant;
    use proptest::prelude::*;

    fn pts(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn sorting_cases() {
        assert_eq!(fast_nondominated_sort(&pts(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(fast_nondominated_sort(&pts(&[[1.0, 2.0], [2.0, 1.0]])), vec![vec![0, 1]]);
        assert_eq!(
            fast_nondominated_sort(&pts(&[[1.0, 2.0], [2.0, 1.0], [2.0, 2.0]])),
            vec![vec![0, 1], vec![2]]
        );
        assert!(fast_nondominated_sort(&[]).is_empty());
    }

    #[test]
    fn crowding_cases() {
        assert_eq!(crowding_distance(&pts(&[[0.3, 0.3]])), vec![f64::INFINITY]);
        assert_eq!(
            crowding_distance(&pts(&[[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])),
            vec![f64::INFINITY, 2.0, f64::INFINITY]
        );
        assert_eq!(crowding_distance(&pts(&[[0.0, 1.0], [1.0, 0.0]])), vec![f64::INFINITY; 2]);
    }

    #[test]
    fn random_search_basics() {
        let task = Task::zdt(ZdtVariant::Zdt1, 4).unwrap();
        let h = run_random_search(&task, 1, 0).unwrap();
        assert_eq!(h.len(), 1);
        let a = run_random_search(&task, 30, 7).unwrap();
        let b = run_random_search(&task, 30, 7).unwrap();
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        assert!(run_random_search(&task, 0, 7).is_err());
    }

    #[test]
    fn nsga2_budget_and_determinism() {
        let task = Task::zdt(ZdtVariant::Zdt2, 6).unwrap();
        let s = Nsga2Settings::default();
        let a = run_nsga2(&task, &s, 75, 3).unwrap();
        let b = run_nsga2(&task, &s, 75, 3).unwrap();
        assert_eq!(a.len(), 75);
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        assert!(a.records().iter().all(|r| task.space().contains(&r.config)));
        assert!(run_nsga2(&task, &s, 10, 3).is_err());
        let odd = Nsga2Settings {
            population_size: 7,
            ..Nsga2Settings::default()
        };
        assert!(run_nsga2(&task, &odd, 100, 3).is_err());
    }

    #[test]
    fn nsga2_offspring_legal_on_mixed_space() {
        let task = Task::mixed(3, 3).unwrap();
        let h = run_nsga2(&task, &Nsga2Settings::default(), 120, 4).unwrap();
        assert!(h.records().iter().all(|r| task.space().contains(&r.config)));
    }

    #[test]
    fn operators_stay_in_bounds() {
        let mut rng = seeded_rng(9);
        for _ in 0..10_000 {
            let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let (c1, c2) = sbx(a, b, -5.0, 5.0, 15.0, &mut rng);
            assert!((-5.0..=5.0).contains(&c1) && (-5.0..=5.0).contains(&c2));
            let m = polynomial_mutation(a, -5.0, 5.0, 20.0, &mut rng);
            assert!((-5.0..=5.0).contains(&m));
        }
    }

    fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sort_matches_brute_force(points in prop::collection::vec(prop::collection::vec(0u8..6, 2..4), 0..60)) {
            let m = points.first().map_or(2, |p| p.len());
            let points: Vec<Vec<f64>> = points.into_iter().map(|p| p.into_iter().take(m).map(f64::from).chain(std::iter::repeat(0.0)).take(m).collect()).collect();
            let fronts = fast_nondominated_sort(&points);
            prop_assert_eq!(&fronts, &brute_force_fronts(&points));
            let mut all: Vec<usize> = fronts.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..points.len()).collect::<Vec<_>>());
        }
    }
}
