//! Pareto extraction, two-objective hypervolume, and normalised
//! hypervolume-regret curves with their aggregation across tasks and seeds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::history::RunHistory;
use crate::{Error, Result};

/// `a` dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the non-dominated points; of several identical points only
/// the first is kept.
pub fn pareto_indices(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = &points[i];
            !points.iter().enumerate().any(|(k, q)| dominates(q, p) || (k < i && q == p))
        })
        .collect()
}

pub fn pareto_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pareto_indices(points).into_iter().map(|i| points[i].clone()).collect()
}

fn check_two_objectives(points: &[Vec<f64>], reference: &[f64]) -> Result<()> {
    if reference.len() != 2 || points.iter().any(|p| p.len() != 2) {
        return Err(Error::Unsupported(
            "hypervolume is only implemented for two objectives".into(),
        ));
    }
    Ok(())
}

/// Area dominated by `points` inside the box bounded by `reference`.
/// Points outside the box contribute nothing; dominated points are ignored.
pub fn hypervolume_2d(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    check_two_objectives(points, reference)?;
    let mut inside: Vec<[f64; 2]> = points
        .iter()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .map(|p| [p[0], p[1]])
        .collect();
    inside.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut front: Vec<[f64; 2]> = Vec::with_capacity(inside.len());
    for p in inside {
        if front.last().is_none_or(|last| p[1] < last[1]) {
            front.push(p);
        }
    }
    Ok(sweep(&front, reference))
}

/// Sum of the rectangles of a front sorted by ascending first objective.
fn sweep(front: &[[f64; 2]], reference: &[f64]) -> f64 {
    front
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let next = front.get(i + 1).map_or(reference[0], |q| q[0]);
            (next - p[0]) * (reference[1] - p[1])
        })
        .sum()
}

/// Hypervolume of the best-so-far front after each prefix of `points`.
pub fn hypervolume_trajectory(points: &[Vec<f64>], reference: &[f64]) -> Result<Vec<f64>> {
    check_two_objectives(points, reference)?;
    let mut front: Vec<[f64; 2]> = Vec::new();
    let mut out = Vec::with_capacity(points.len());
    let mut current = 0.0;
    for p in points {
        let p = [p[0], p[1]];
        let inside = p[0] < reference[0] && p[1] < reference[1];
        let covered = front.iter().any(|q| q[0] <= p[0] && q[1] <= p[1]);
        if inside && !covered {
            front.retain(|q| !(p[0] <= q[0] && p[1] <= q[1]));
            let at = front.partition_point(|q| q[0] < p[0]);
            front.insert(at, p);
            current = sweep(&front, reference);
        }
        out.push(current);
    }
    Ok(out)
}

/// Componentwise maximum over every observed cost vector.
pub fn reference_point<'a, I: IntoIterator<Item = &'a Vec<f64>>>(points: I) -> Option<Vec<f64>> {
    let mut it = points.into_iter();
    let mut reference = it.next()?.clone();
    for p in it {
        for (r, v) in reference.iter_mut().zip(p) {
            *r = r.max(*v);
        }
    }
    Some(reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl ConvergenceCurve {
    /// Value at `x` under last-value-carried-forward interpolation; 1 before
    /// the first point.
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&xi| xi <= x + 1e-12);
        if k == 0 {
            1.0
        } else {
            self.ys[k - 1]
        }
    }

    pub fn last(&self) -> Option<f64> {
        self.ys.last().copied()
    }
}

/// Normalised incumbent hypervolume regret per trial:
/// `(hv_max - HV_t) / (hv_max - hv_min)` clipped to `[0, 1]`, at
/// `x_t = (t + 1) / budget`.
pub fn hv_regret_curve(history: &RunHistory, reference: &[f64], hv_bounds: (f64, f64)) -> Result<ConvergenceCurve> {
    let trajectory = hypervolume_trajectory(&history.objectives(), reference)?;
    let (hv_min, hv_max) = hv_bounds;
    let budget = history.meta.budget.max(history.len()).max(1) as f64;
    let xs = (1..=trajectory.len()).map(|t| t as f64 / budget).collect();
    let ys = trajectory
        .into_iter()
        .map(|hv| {
            if hv_max > hv_min {
                ((hv_max - hv) / (hv_max - hv_min)).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(ConvergenceCurve { xs, ys })
}

/// Trapezoidal area under the curve over `[0, 1]`. The curve is taken as 1
/// before its first point and as its last value after its final point.
pub fn auc(curve: &ConvergenceCurve) -> f64 {
    let (Some(&x0), Some(&xn), Some(&yn)) = (curve.xs.first(), curve.xs.last(), curve.ys.last()) else {
        return 1.0;
    };
    let mut area = x0.clamp(0.0, 1.0);
    for i in 1..curve.xs.len() {
        let (a, b) = (curve.xs[i - 1].clamp(0.0, 1.0), curve.xs[i].clamp(0.0, 1.0));
        area += (b - a) * 0.5 * (curve.ys[i - 1] + curve.ys[i]);
    }
    area += (1.0 - xn.clamp(0.0, 1.0)) * yn;
    area
}

/// One curve of one optimizer on one task for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveCell {
    pub optimizer: String,
    pub task: String,
    pub seed: u64,
    pub curve: ConvergenceCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub optimizer: String,
    pub xs: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub curves: Vec<AggregateCurve>,
    /// `(optimizer, task, seed)` combinations with no curve.
    pub missing: Vec<(String, String, u64)>,
}

/// Mean curve and standard-error band per optimizer on a grid of
/// `resolution + 1` evenly spaced points in `[0, 1]`. Curves are averaged
/// over tasks within each seed first, then over seeds.
pub fn aggregate(cells: &[CurveCell], resolution: usize) -> Result<Aggregate> {
    if cells.is_empty() {
        return Err(Error::InvalidData("no curves to aggregate".into()));
    }
    let resolution = resolution.max(1);
    let xs: Vec<f64> = (0..=resolution).map(|k| k as f64 / resolution as f64).collect();
    let tasks: BTreeSet<&str> = cells.iter().map(|c| c.task.as_str()).collect();
    let mut by_optimizer: BTreeMap<&str, BTreeMap<u64, Vec<&CurveCell>>> = BTreeMap::new();
    for c in cells {
        by_optimizer
            .entry(c.optimizer.as_str())
            .or_default()
            .entry(c.seed)
            .or_default()
            .push(c);
    }
    let mut missing = Vec::new();
    let mut curves = Vec::new();
    for (optimizer, seeds) in by_optimizer {
        let per_seed: Vec<Vec<f64>> = seeds
            .iter()
            .map(|(&seed, cells)| {
                for &t in &tasks {
                    if !cells.iter().any(|c| c.task == t) {
                        missing.push((optimizer.to_string(), t.to_string(), seed));
                    }
                }
                xs.iter()
                    .map(|&x| cells.iter().map(|c| c.curve.value_at(x)).sum::<f64>() / cells.len() as f64)
                    .collect()
            })
            .collect();
        let n = per_seed.len() as f64;
        let mean: Vec<f64> = (0..xs.len())
            .map(|k| per_seed.iter().map(|s| s[k]).sum::<f64>() / n)
            .collect();
        let stderr = (0..xs.len())
            .map(|k| {
                if per_seed.len() < 2 {
                    return 0.0;
                }
                let var = per_seed.iter().map(|s| (s[k] - mean[k]).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            })
            .collect();
        curves.push(AggregateCurve {
            optimizer: optimizer.to_string(),
            xs: xs.clone(),
            mean,
            stderr,
            seeds: per_seed.len(),
        });
    }
    Ok(Aggregate { curves, missing })
}
