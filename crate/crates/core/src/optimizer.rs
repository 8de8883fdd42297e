//! The HPI-ParEGO loop and its vanilla ParEGO special case.
//!
//! Each iteration scalarizes the normalised history under the current
//! weights, refits the forest when due, and either evaluates a random
//! configuration (with probability `r`) or maximises expected improvement.
//! When the threshold schedule is active, the acquisition search runs in a
//! space where every hyperparameter outside the HPI selection is pinned to
//! the anchor configuration.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::acquisition::{optimize_acquisition, AcquisitionSettings};
use crate::benchmarks::Task;
use crate::configspace::Configuration;
use crate::history::{HistoryMeta, Record, RunHistory, Source};
use crate::hpi::{compute_hpi, HpiSettings};
use crate::scalarization::{sample_weights, scalarized_costs, ScalarizationParams, WeightVector};
use crate::surrogate::{Forest, ForestParams};
use crate::{seeded_rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// No reduction, reduction, no reduction.
    Symmetric,
    /// Reduction in every third.
    Constant,
    /// No reduction, then reduction for the remaining two thirds.
    InitPhase,
    /// Reduction for two thirds, none in the last.
    ConvPhase,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "constant" => Ok(Self::Constant),
            "init_phase" | "init-phase" => Ok(Self::InitPhase),
            "conv_phase" | "conv-phase" => Ok(Self::ConvPhase),
            _ => Err(Error::InvalidSettings(format!(
                "unknown schedule `{s}` (valid: symmetric, constant, init_phase, conv_phase)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub kind: ScheduleKind,
    pub tau: f64,
}

impl Default for ThresholdSchedule {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Symmetric,
            tau: 0.8,
        }
    }
}

/// HPI threshold for `trial`, or `None` when no reduction applies. Thirds
/// start at `floor(B/3)` and `floor(2B/3)`.
pub fn threshold_at(schedule: &ThresholdSchedule, trial: usize, budget: usize) -> Option<f64> {
    let third = if trial < budget / 3 {
        0
    } else if trial < 2 * budget / 3 {
        1
    } else {
        2
    };
    let active = match schedule.kind {
        ScheduleKind::Symmetric => third == 1,
        ScheduleKind::Constant => true,
        ScheduleKind::InitPhase => third >= 1,
        ScheduleKind::ConvPhase => third <= 1,
    };
    active.then_some(schedule.tau)
}

/// Where pinned hyperparameters take their values from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorMode {
    Incumbent,
    Default,
    Random,
}

impl std::str::FromStr for AnchorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "incumbent" => Ok(Self::Incumbent),
            "default" => Ok(Self::Default),
            "random" => Ok(Self::Random),
            _ => Err(Error::InvalidSettings(format!(
                "unknown anchor `{s}` (valid: incumbent, default, random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub budget: usize,
    pub n_init: usize,
    pub weight_update_u: usize,
    pub random_chance_r: f64,
    pub retrain_every: usize,
    pub rho: f64,
    pub schedule: ThresholdSchedule,
    pub anchor_mode: AnchorMode,
    pub hpi_enabled: bool,
    pub forest: ForestParams,
    pub acquisition: AcquisitionSettings,
    pub hpi: HpiSettings,
}

/// `max(ceil(B/10), 8)`, kept below the budget.
pub fn default_n_init(budget: usize) -> usize {
    budget.div_ceil(10).max(8).min(budget.saturating_sub(1)).max(1)
}

impl OptimizerSettings {
    /// HPI-ParEGO defaults for a budget.
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            n_init: default_n_init(budget),
            weight_update_u: 10,
            random_chance_r: 0.1,
            retrain_every: 2,
            rho: 0.05,
            schedule: ThresholdSchedule::default(),
            anchor_mode: AnchorMode::Incumbent,
            hpi_enabled: true,
            forest: ForestParams::default(),
            acquisition: AcquisitionSettings::default(),
            hpi: HpiSettings::default(),
        }
    }

    /// Same settings with the HPI reduction switched off.
    pub fn parego(budget: usize) -> Self {
        Self {
            hpi_enabled: false,
            ..Self::new(budget)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSettings(m.to_string()));
        if self.n_init == 0 || self.n_init >= self.budget {
            return bad("need 1 <= n_init < budget");
        }
        if self.weight_update_u == 0 || self.retrain_every == 0 {
            return bad("u and retrain_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.random_chance_r) {
            return bad("random chance r must lie in [0, 1]");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be positive");
        }
        if !(self.schedule.tau > 0.0 && self.schedule.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        self.forest.validate()?;
        self.acquisition.validate()?;
        self.hpi.validate()
    }

    pub fn optimizer_name(&self) -> &'static str {
        if self.hpi_enabled {
            "hpi-parego"
        } else {
            "parego"
        }
    }
}

fn argmin(values: &[f64]) -> Option<usize> {
    // First index wins ties.
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Record with the lowest scalarized normalised cost; earliest wins ties.
pub fn incumbent(history: &RunHistory, weights: &WeightVector, rho: f64) -> Result<Configuration> {
    let costs = scalarized_costs(&history.objectives(), weights, ScalarizationParams { rho });
    let i = argmin(&costs).ok_or_else(|| Error::InvalidData("incumbent of an empty history".into()))?;
    Ok(history.records()[i].config.clone())
}

/// Runs HPI-ParEGO (or vanilla ParEGO when `hpi_enabled` is false).
pub fn run(task: &Task, settings: &OptimizerSettings, seed: u64) -> Result<RunHistory> {
    settings.validate()?;
    if task.objective_count() < 2 {
        return Err(Error::InvalidSettings("ParEGO needs at least two objectives".into()));
    }
    let mut rng = seeded_rng(seed);
    let space = task.space();
    let scal = ScalarizationParams { rho: settings.rho };
    let mut history = RunHistory::new(HistoryMeta {
        task: task.name().to_string(),
        optimizer: settings.optimizer_name().to_string(),
        seed,
        budget: settings.budget,
        objectives: task.objective_count(),
        settings: serde_json::to_value(settings)?,
        space: space.clone(),
        truncated: false,
    });
    let mut seen: Vec<Configuration> = Vec::with_capacity(settings.budget);
    let mut encoded: Vec<Vec<f64>> = Vec::with_capacity(settings.budget);

    let mut initial = vec![space.default_configuration()];
    initial.extend(space.sample_n(settings.n_init - 1, &mut rng));
    for config in initial {
        let objectives = task.evaluate(&config)?;
        encoded.push(space.encode(&config));
        seen.push(config.clone());
        history.push(Record::new(0, config, objectives, Source::Initial))?;
    }

    let mut weights = WeightVector::new(vec![1.0 / task.objective_count() as f64; task.objective_count()])?;
    let mut weights_fresh = false;
    let mut forest: Option<Forest> = None;
    let mut fitted_at = 0;

    for i in settings.n_init..settings.budget {
        if (i - settings.n_init).is_multiple_of(settings.weight_update_u) {
            weights = sample_weights(task.objective_count(), &mut rng);
            weights_fresh = true;
        }
        let costs = scalarized_costs(&history.objectives(), &weights, scal);
        if forest.is_none() || weights_fresh || history.len() - fitted_at >= settings.retrain_every {
            forest = Some(Forest::fit(&encoded, &costs, &settings.forest, &mut rng)?);
            fitted_at = history.len();
            weights_fresh = false;
        }
        let forest_ref = forest.as_ref().expect("fitted above");
        let best = costs.iter().copied().fold(f64::INFINITY, f64::min);

        let mut record = if rng.random::<f64>() < settings.random_chance_r {
            Record::new(0, space.sample(&mut rng), Vec::new(), Source::RandomInterleave)
        } else {
            let tau = if settings.hpi_enabled {
                threshold_at(&settings.schedule, i, settings.budget)
            } else {
                None
            };
            let mut proposal = None;
            let mut hpi_info = None;
            if let Some(tau) = tau {
                let anchor = match settings.anchor_mode {
                    AnchorMode::Incumbent => history.records()[argmin(&costs).expect("non-empty")].config.clone(),
                    AnchorMode::Default => space.default_configuration(),
                    AnchorMode::Random => space.sample(&mut rng),
                };
                let hpi = compute_hpi(space, forest_ref, &weights, &anchor, tau, &settings.hpi, &mut rng)?;
                let reduced = space.reduce(&hpi.important, &anchor)?;
                let is_reduced = reduced.tunable_count() < space.dim();
                match optimize_acquisition(&reduced, forest_ref, &seen, best, &settings.acquisition, &mut rng) {
                    Ok(c) => {
                        let mut r = Record::new(0, c, Vec::new(), Source::Acquisition);
                        r.reduced = is_reduced;
                        proposal = Some(r);
                    }
                    Err(Error::SpaceExhausted) => {}
                    Err(e) => return Err(e),
                }
                hpi_info = Some((hpi, anchor));
            }
            let mut record = match proposal {
                Some(r) => r,
                None => {
                    let source = if hpi_info.is_some() {
                        Source::Fallback
                    } else {
                        Source::Acquisition
                    };
                    match optimize_acquisition(space, forest_ref, &seen, best, &settings.acquisition, &mut rng) {
                        Ok(c) => Record::new(0, c, Vec::new(), source),
                        Err(Error::SpaceExhausted) => {
                            // Space is tiny and discrete; the acquisition
                            // already retried random draws without success.
                            history.meta.truncated = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            if let Some((hpi, anchor)) = hpi_info {
                record.important = Some(hpi.important);
                record.shapley = Some(hpi.shapley);
                record.anchor = Some(anchor);
            }
            record
        };
        record.weights = Some(weights.as_slice().to_vec());
        record.objectives = task.evaluate(&record.config)?;
        encoded.push(space.encode(&record.config));
        seen.push(record.config.clone());
        history.push(record)?;
    }
    Ok(history)
}

/// Vanilla ParEGO: [`run`] with the HPI reduction disabled.
pub fn run_parego(task: &Task, settings: &OptimizerSettings, seed: u64) -> Result<RunHistory> {
    let settings = OptimizerSettings {
        hpi_enabled: false,
        ..settings.clone()
    };
    run(task, &settings, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{ConfigSpace, Hyperparameter, Value};
    use crate::history::HistoryMeta;

    fn sched(kind: ScheduleKind) -> ThresholdSchedule {
        ThresholdSchedule { kind, tau: 0.8 }
    }

    #[test]
    fn schedule_thirds() {
        assert_eq!(threshold_at(&sched(ScheduleKind::Symmetric), 45, 90), Some(0.8));
        assert_eq!(threshold_at(&sched(ScheduleKind::Symmetric), 10, 90), None);
        assert_eq!(threshold_at(&sched(ScheduleKind::Symmetric), 29, 90), None);
        assert_eq!(threshold_at(&sched(ScheduleKind::Symmetric), 30, 90), Some(0.8));
        assert_eq!(threshold_at(&sched(ScheduleKind::Symmetric), 60, 90), None);
        assert_eq!(threshold_at(&sched(ScheduleKind::ConvPhase), 80, 90), None);
        assert_eq!(threshold_at(&sched(ScheduleKind::ConvPhase), 5, 90), Some(0.8));
        assert_eq!(threshold_at(&sched(ScheduleKind::InitPhase), 5, 90), None);
        assert_eq!(threshold_at(&sched(ScheduleKind::InitPhase), 80, 90), Some(0.8));
        for t in 0..90 {
            assert_eq!(threshold_at(&sched(ScheduleKind::Constant), t, 90), Some(0.8));
        }
    }

    fn two_record_history() -> RunHistory {
        let space = ConfigSpace::new(vec![Hyperparameter::continuous("x", 0.0, 1.0, false).unwrap()]).unwrap();
        let mut h = RunHistory::new(HistoryMeta {
            task: "t".into(),
            optimizer: "o".into(),
            seed: 0,
            budget: 10,
            objectives: 2,
            settings: serde_json::Value::Null,
            space,
            truncated: false,
        });
        let c = |v| Configuration::new(vec![Value::Float(v)]);
        h.push(Record::new(0, c(0.1), vec![0.0, 1.0], Source::Initial)).unwrap();
        h.push(Record::new(0, c(0.2), vec![1.0, 0.0], Source::Initial)).unwrap();
        h
    }

    #[test]
    fn incumbent_follows_weights() {
        let h = two_record_history();
        let w10 = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let w01 = WeightVector::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(incumbent(&h, &w10, 0.05).unwrap(), h.records()[0].config);
        assert_eq!(incumbent(&h, &w01, 0.05).unwrap(), h.records()[1].config);
        // Equal scalarized values: the earlier record wins.
        let half = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(incumbent(&h, &half, 0.05).unwrap(), h.records()[0].config);
    }

    #[test]
    fn n_init_default() {
        assert_eq!(default_n_init(438), 44);
        assert_eq!(default_n_init(60), 8);
        assert_eq!(default_n_init(5), 4);
    }

    #[test]
    fn settings_validation() {
        let mut s = OptimizerSettings::new(50);
        assert!(s.validate().is_ok());
        s.random_chance_r = 1.5;
        assert!(s.validate().is_err());
        let mut s = OptimizerSettings::new(50);
        s.n_init = 50;
        assert!(s.validate().is_err());
        let mut s = OptimizerSettings::new(50);
        s.schedule.tau = 0.0;
        assert!(s.validate().is_err());
    }

    fn small(budget: usize) -> OptimizerSettings {
        let mut s = OptimizerSettings::new(budget);
        s.forest.n_trees = 16;
        s.acquisition.n_random_candidates = 200;
        s
    }

    #[test]
    fn forced_random_interleave() {
        let task = Task::zdt(crate::benchmarks::ZdtVariant::Zdt1, 4).unwrap();
        let mut s = small(9);
        s.n_init = 8;
        s.random_chance_r = 1.0;
        let h = run(&task, &s, 1).unwrap();
        assert_eq!(h.len(), 9);
        let post: Vec<_> = h.records().iter().filter(|r| r.source != Source::Initial).collect();
        assert_eq!(post.len(), 1);
        assert_eq!(post[0].source, Source::RandomInterleave);
        assert_eq!(h.records()[0].config, task.space().default_configuration());
    }

    #[test]
    fn parego_never_reduces_and_is_deterministic() {
        let task = Task::zdt(crate::benchmarks::ZdtVariant::Zdt2, 5).unwrap();
        let s = small(40);
        let a = run_parego(&task, &s, 3).unwrap();
        let b = run_parego(&task, &s, 3).unwrap();
        assert_eq!(a.len(), 40);
        assert_eq!(a.to_jsonl().unwrap(), b.to_jsonl().unwrap());
        assert!(a.records().iter().all(|r| !r.reduced && r.important.is_none()));
        assert_eq!(a.meta.optimizer, "parego");
    }

    #[test]
    fn reduced_records_agree_with_anchor() {
        let task = Task::mixed(4, 2).unwrap();
        let mut s = small(60);
        s.schedule.kind = ScheduleKind::Constant;
        let h = run(&task, &s, 4).unwrap();
        assert_eq!(h.len(), 60);
        let mut reduced = 0;
        for r in h.records() {
            assert!(task.space().contains(&r.config));
            if r.reduced {
                reduced += 1;
                let important = r.important.as_ref().unwrap();
                let anchor = r.anchor.as_ref().unwrap();
                for j in (0..task.dimension()).filter(|j| !important.contains(j)) {
                    assert_eq!(r.config[j], anchor[j]);
                }
            }
        }
        assert!(reduced > 0);
    }

    #[test]
    fn anchor_modes_run() {
        let task = Task::zdt(crate::benchmarks::ZdtVariant::Zdt3, 4).unwrap();
        for mode in [AnchorMode::Default, AnchorMode::Random] {
            let mut s = small(30);
            s.anchor_mode = mode;
            s.schedule.kind = ScheduleKind::Constant;
            let h = run(&task, &s, 5).unwrap();
            assert_eq!(h.len(), 30);
            if mode == AnchorMode::Default {
                for r in h.records().iter().filter(|r| r.anchor.is_some()) {
                    assert_eq!(r.anchor.as_ref().unwrap(), &task.space().default_configuration());
                }
            }
        }
    }

    #[test]
    fn tiny_space_falls_back_then_truncates() {
        // Only 2 * 3 = 6 distinct configurations exist.
        let task = Task::mixed(0, 2).unwrap();
        let mut s = small(20);
        s.n_init = 2;
        s.schedule.kind = ScheduleKind::Constant;
        let h = run(&task, &s, 6).unwrap();
        assert!(h.meta.truncated || h.len() == 20);
        for (i, a) in h.records().iter().enumerate() {
            for b in &h.records()[..i] {
                if a.source != Source::RandomInterleave && a.source != Source::Initial {
                    assert!(!a.config.same_point(&b.config));
                }
            }
        }
    }
}
