//! Test problems: the ZDT family and a synthetic mixed-type task with planted
//! importance.

use std::f64::consts::PI;

use crate::configspace::{ConfigSpace, Configuration, Hyperparameter, Value};
use crate::{Error, Result};

/// Default number of decision variables for ZDT tasks.
pub const DEFAULT_ZDT_DIM: usize = 10;

/// Lower end of the ZDT6 front in `f1`, `1 - exp(-4x) sin^6(6 pi x)` minimised.
pub const ZDT6_F1_MIN: f64 = 0.280_775_319_1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZdtVariant {
    Zdt1,
    Zdt2,
    Zdt3,
    Zdt4,
    Zdt6,
}

impl ZdtVariant {
    pub const ALL: [ZdtVariant; 5] = [Self::Zdt1, Self::Zdt2, Self::Zdt3, Self::Zdt4, Self::Zdt6];

    pub fn name(self) -> &'static str {
        match self {
            Self::Zdt1 => "zdt1",
            Self::Zdt2 => "zdt2",
            Self::Zdt3 => "zdt3",
            Self::Zdt4 => "zdt4",
            Self::Zdt6 => "zdt6",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Box bounds of coordinate `i`.
    pub fn bounds(self, i: usize) -> (f64, f64) {
        match self {
            Self::Zdt4 if i > 0 => (-5.0, 5.0),
            _ => (0.0, 1.0),
        }
    }
}

/// Evaluates a ZDT problem at `x` (minimisation of both objectives).
pub fn zdt_evaluate(variant: ZdtVariant, x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return Err(Error::OutOfBounds(format!("ZDT needs at least 2 variables, got {n}")));
    }
    for (i, &xi) in x.iter().enumerate() {
        let (lo, hi) = variant.bounds(i);
        if !(lo..=hi).contains(&xi) {
            return Err(Error::OutOfBounds(format!(
                "{}: x[{i}] = {xi} outside [{lo}, {hi}]",
                variant.name()
            )));
        }
    }
    let tail = &x[1..];
    let tail_mean = tail.iter().sum::<f64>() / (n - 1) as f64;
    let (f1, g) = match variant {
        ZdtVariant::Zdt1 | ZdtVariant::Zdt2 | ZdtVariant::Zdt3 => (x[0], 1.0 + 9.0 * tail_mean),
        ZdtVariant::Zdt4 => {
            let s: f64 = tail.iter().map(|v| v * v - 10.0 * (4.0 * PI * v).cos()).sum();
            (x[0], 1.0 + 10.0 * (n - 1) as f64 + s)
        }
        ZdtVariant::Zdt6 => {
            let f1 = 1.0 - (-4.0 * x[0]).exp() * (6.0 * PI * x[0]).sin().powi(6);
            (f1, 1.0 + 9.0 * tail_mean.powf(0.25))
        }
    };
    let ratio = f1 / g;
    let h = match variant {
        ZdtVariant::Zdt1 | ZdtVariant::Zdt4 => 1.0 - ratio.sqrt(),
        ZdtVariant::Zdt2 | ZdtVariant::Zdt6 => 1.0 - ratio * ratio,
        ZdtVariant::Zdt3 => 1.0 - ratio.sqrt() - ratio * (10.0 * PI * f1).sin(),
    };
    Ok((f1, g * h))
}

/// Points on the true Pareto front (`g = 1`). ZDT3's disconnected front is
/// sampled densely and filtered to its non-dominated part, so it returns
/// fewer than `n_points` entries.
pub fn analytic_pareto_front(variant: ZdtVariant, n_points: usize) -> Vec<[f64; 2]> {
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        if n_points == 1 {
            return vec![lo];
        }
        (0..n_points)
            .map(|i| lo + (hi - lo) * i as f64 / (n_points - 1) as f64)
            .collect()
    };
    match variant {
        ZdtVariant::Zdt1 | ZdtVariant::Zdt4 => grid(0.0, 1.0)
            .into_iter()
            .map(|f1| [f1, 1.0 - f1.sqrt()])
            .collect(),
        ZdtVariant::Zdt2 => grid(0.0, 1.0).into_iter().map(|f1| [f1, 1.0 - f1 * f1]).collect(),
        ZdtVariant::Zdt6 => grid(ZDT6_F1_MIN, 1.0)
            .into_iter()
            .map(|f1| [f1, 1.0 - f1 * f1])
            .collect(),
        ZdtVariant::Zdt3 => {
            let curve: Vec<[f64; 2]> = grid(0.0, 0.852)
                .into_iter()
                .map(|f1| [f1, 1.0 - f1.sqrt() - f1 * (10.0 * PI * f1).sin()])
                .collect();
            // Sorted by f1, so a point survives iff its f2 beats every earlier one.
            let mut front = Vec::new();
            let mut best = f64::INFINITY;
            for p in curve {
                if p[1] < best {
                    best = p[1];
                    front.push(p);
                }
            }
            front
        }
    }
}

/// Trial budget `multiplier * round(20 + 40 sqrt(D))`.
pub fn task_budget(dimension: usize, multiplier: usize) -> usize {
    let base = (20.0 + 40.0 * (dimension as f64).sqrt()).round() as usize;
    multiplier * base
}

#[derive(Debug, Clone, PartialEq)]
enum Problem {
    Zdt(ZdtVariant),
    Mixed(MixedProblem),
}

/// Additively separable two-objective problem over continuous and
/// categorical hyperparameters. The first objective only depends on the
/// first half of each kind, the second objective on the rest; weights decay
/// geometrically so importance is non-uniform within each half.
#[derive(Debug, Clone, PartialEq)]
struct MixedProblem {
    n_continuous: usize,
    n_categorical: usize,
}

impl MixedProblem {
    const CATEGORIES: [&'static str; 3] = ["a", "b", "c"];

    /// Objective (0 or 1) that hyperparameter `j` contributes to, and its weight.
    fn role(&self, j: usize) -> (usize, f64) {
        let (local, count) = if j < self.n_continuous {
            (j, self.n_continuous)
        } else {
            (j - self.n_continuous, self.n_categorical)
        };
        let first_half = count.div_ceil(2);
        if local < first_half {
            (0, 0.5f64.powi(local as i32))
        } else {
            (1, 0.5f64.powi((local - first_half) as i32))
        }
    }

    fn evaluate(&self, config: &Configuration) -> [f64; 2] {
        let mut f = [0.0; 2];
        for (j, v) in config.values().iter().enumerate() {
            let (obj, weight) = self.role(j);
            let penalty = match v {
                Value::Float(x) => {
                    let target = if obj == 0 { 0.2 } else { 0.8 };
                    (x - target).powi(2)
                }
                Value::Cat(c) => {
                    let target = if obj == 0 { 1 } else { 2 };
                    if *c == target {
                        0.0
                    } else {
                        0.25
                    }
                }
                Value::Int(_) => unreachable!("mixed task has no integers"),
            };
            f[obj] += weight * penalty;
        }
        f
    }

    /// Indices the first objective ignores.
    fn ignored_by_first(&self) -> Vec<usize> {
        (0..self.n_continuous + self.n_categorical)
            .filter(|&j| self.role(j).0 == 1)
            .collect()
    }
}

/// A multi-objective minimisation problem over a configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    name: String,
    space: ConfigSpace,
    objectives: usize,
    problem: Problem,
}

impl Task {
    pub fn zdt(variant: ZdtVariant, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSettings(format!("ZDT dimension must be >= 2, got {n}")));
        }
        let params = (0..n)
            .map(|i| {
                let (lo, hi) = variant.bounds(i);
                Hyperparameter::continuous(format!("x{i}"), lo, hi, false)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: variant.name().to_string(),
            space: ConfigSpace::new(params)?,
            objectives: 2,
            problem: Problem::Zdt(variant),
        })
    }

    /// Synthetic mixed task with `n_continuous` hyperparameters on `[0, 1]`
    /// and `n_categorical` three-way categoricals.
    pub fn mixed(n_continuous: usize, n_categorical: usize) -> Result<Self> {
        if n_continuous + n_categorical < 2 {
            return Err(Error::InvalidSettings("mixed task needs at least 2 hyperparameters".into()));
        }
        let mut params = Vec::new();
        for i in 0..n_continuous {
            params.push(Hyperparameter::continuous(format!("x{i}"), 0.0, 1.0, false)?);
        }
        for i in 0..n_categorical {
            params.push(Hyperparameter::categorical(format!("c{i}"), MixedProblem::CATEGORIES)?);
        }
        Ok(Self {
            name: "mixed".into(),
            space: ConfigSpace::new(params)?,
            objectives: 2,
            problem: Problem::Mixed(MixedProblem {
                n_continuous,
                n_categorical,
            }),
        })
    }

    /// Registry lookup. `dimension` is the ZDT variable count (default 10)
    /// or, for `mixed`, the total hyperparameter count split evenly between
    /// continuous and categorical (default 8).
    pub fn by_name(name: &str, dimension: Option<usize>) -> Result<Self> {
        if let Some(variant) = ZdtVariant::from_name(name) {
            return Self::zdt(variant, dimension.unwrap_or(DEFAULT_ZDT_DIM));
        }
        if name == "mixed" {
            let d = dimension.unwrap_or(8);
            return Self::mixed(d - d / 2, d / 2);
        }
        Err(Error::UnknownTask(name.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn objective_count(&self) -> usize {
        self.objectives
    }

    pub fn dimension(&self) -> usize {
        self.space.dim()
    }

    pub fn evaluate(&self, config: &Configuration) -> Result<Vec<f64>> {
        self.space.validate(config)?;
        match &self.problem {
            Problem::Zdt(variant) => {
                let x: Vec<f64> = config
                    .values()
                    .iter()
                    .map(|v| match v {
                        Value::Float(x) => *x,
                        _ => unreachable!("ZDT spaces are continuous"),
                    })
                    .collect();
                let (f1, f2) = zdt_evaluate(*variant, &x)?;
                Ok(vec![f1, f2])
            }
            Problem::Mixed(p) => Ok(p.evaluate(config).to_vec()),
        }
    }

    pub fn analytic_front(&self, n_points: usize) -> Option<Vec<[f64; 2]>> {
        match &self.problem {
            Problem::Zdt(v) => Some(analytic_pareto_front(*v, n_points)),
            Problem::Mixed(_) => None,
        }
    }

    /// For the mixed task: hyperparameters the first objective does not use.
    pub fn ignored_by_first_objective(&self) -> Option<Vec<usize>> {
        match &self.problem {
            Problem::Mixed(p) => Some(p.ignored_by_first()),
            Problem::Zdt(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use rand::Rng;

    fn zeros_with_first(first: f64) -> Vec<f64> {
        let mut x = vec![0.0; 10];
        x[0] = first;
        x
    }

    #[test]
    fn zdt_hand_values() {
        let (f1, f2) = zdt_evaluate(ZdtVariant::Zdt1, &zeros_with_first(0.0)).unwrap();
        assert_eq!((f1, f2), (0.0, 1.0));
        let (f1, f2) = zdt_evaluate(ZdtVariant::Zdt1, &zeros_with_first(0.5)).unwrap();
        assert_eq!(f1, 0.5);
        assert!((f2 - (1.0 - 0.5f64.sqrt())).abs() < 1e-12);
        assert!((f2 - 0.292_893_218_813_452_5).abs() < 1e-12);
        let (f1, f2) = zdt_evaluate(ZdtVariant::Zdt2, &zeros_with_first(0.5)).unwrap();
        assert_eq!((f1, f2), (0.5, 0.75));
        // ZDT4 at the origin of the tail: g = 1 + 9*10 + 9*(0 - 10) = 1.
        let (f1, f2) = zdt_evaluate(ZdtVariant::Zdt4, &zeros_with_first(0.25)).unwrap();
        assert_eq!(f1, 0.25);
        assert!((f2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zdt_rejects_out_of_bounds() {
        assert!(zdt_evaluate(ZdtVariant::Zdt1, &[1.5, 0.0]).is_err());
        assert!(zdt_evaluate(ZdtVariant::Zdt1, &[0.5, -0.1]).is_err());
        assert!(zdt_evaluate(ZdtVariant::Zdt4, &[0.5, -4.0]).is_ok());
        assert!(zdt_evaluate(ZdtVariant::Zdt4, &[0.5, -5.5]).is_err());
        assert!(zdt_evaluate(ZdtVariant::Zdt1, &[0.5]).is_err());
    }

    #[test]
    fn front_hand_values() {
        let front = analytic_pareto_front(ZdtVariant::Zdt1, 5);
        assert_eq!(front.first(), Some(&[0.0, 1.0]));
        assert_eq!(front.last(), Some(&[1.0, 0.0]));
        assert_eq!(front[1], [0.25, 0.5]);
        let front = analytic_pareto_front(ZdtVariant::Zdt2, 3);
        assert_eq!(front[1], [0.5, 0.75]);
    }

    #[test]
    fn fronts_are_mutually_non_dominated() {
        for v in ZdtVariant::ALL {
            let front = analytic_pareto_front(v, 500);
            for a in &front {
                for b in &front {
                    let dominates = a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
                    assert!(!dominates, "{v:?}: {a:?} dominates {b:?}");
                }
            }
        }
    }

    #[test]
    fn no_random_point_dominates_the_front() {
        let mut rng = seeded_rng(11);
        for v in ZdtVariant::ALL {
            let front = analytic_pareto_front(v, 200);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..10)
                    .map(|i| {
                        let (lo, hi) = v.bounds(i);
                        rng.random_range(lo..=hi)
                    })
                    .collect();
                let (f1, f2) = zdt_evaluate(v, &x).unwrap();
                for p in &front {
                    let strictly = f1 < p[0] - 1e-9 && f2 < p[1] - 1e-9;
                    assert!(!strictly, "{v:?}: ({f1}, {f2}) dominates {p:?}");
                }
            }
        }
    }

    #[test]
    fn budgets() {
        assert_eq!(task_budget(4, 5), 500);
        assert_eq!(task_budget(1, 3), 180);
        assert_eq!(task_budget(9, 1), 140);
        assert_eq!(task_budget(10, 3), 438);
    }

    #[test]
    fn registry_and_determinism() {
        let task = Task::by_name("zdt3", None).unwrap();
        assert_eq!(task.dimension(), 10);
        assert_eq!(task.objective_count(), 2);
        let c = task.space().sample(&mut seeded_rng(1));
        assert_eq!(task.evaluate(&c).unwrap(), task.evaluate(&c).unwrap());
        assert!(matches!(Task::by_name("zdt5", None), Err(Error::UnknownTask(_))));
        assert_eq!(Task::by_name("zdt4", Some(4)).unwrap().space().params()[1].domain(),
            &crate::configspace::Domain::Continuous { lower: -5.0, upper: 5.0, log: false });
    }

    #[test]
    fn mixed_task_planted_structure() {
        let task = Task::mixed(4, 2).unwrap();
        assert_eq!(task.ignored_by_first_objective().unwrap(), vec![2, 3, 5]);
        let best = Configuration::new(vec![
            Value::Float(0.2),
            Value::Float(0.2),
            Value::Float(0.8),
            Value::Float(0.8),
            Value::Cat(1),
            Value::Cat(2),
        ]);
        assert_eq!(task.evaluate(&best).unwrap(), vec![0.0, 0.0]);
        // Changing an ignored hyperparameter leaves f1 untouched.
        let mut values = best.values().to_vec();
        values[3] = Value::Float(0.0);
        values[5] = Value::Cat(0);
        let f = task.evaluate(&Configuration::new(values)).unwrap();
        assert_eq!(f[0], 0.0);
        assert!(f[1] > 0.0);
    }
}
