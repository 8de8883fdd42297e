//! Running optimizers by name, single cells and whole experiment suites.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_nsga2, run_random_search, Nsga2Settings};
use crate::benchmarks::{task_budget, Task};
use crate::history::RunHistory;
use crate::optimizer::{self, AnchorMode, OptimizerSettings, ScheduleKind};
use crate::{Error, Result};

pub const OPTIMIZERS: [&str; 4] = ["hpi-parego", "parego", "random", "nsga2"];

/// Optional settings applied on top of an optimizer's defaults. Fields that do
/// not apply to the chosen optimizer are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrain_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_size: Option<usize>,
}

impl Overrides {
    fn apply(&self, s: &mut OptimizerSettings) {
        if let Some(tau) = self.tau {
            s.schedule.tau = tau;
        }
        if let Some(kind) = self.schedule {
            s.schedule.kind = kind;
        }
        if let Some(anchor) = self.anchor {
            s.anchor_mode = anchor;
        }
        if let Some(r) = self.r {
            s.random_chance_r = r;
        }
        if let Some(u) = self.u {
            s.weight_update_u = u;
        }
        if let Some(rho) = self.rho {
            s.rho = rho;
        }
        if let Some(k) = self.retrain_every {
            s.retrain_every = k;
        }
        if let Some(n) = self.n_init {
            s.n_init = n;
        }
    }
}

fn check_optimizer(name: &str) -> Result<()> {
    if OPTIMIZERS.contains(&name) {
        Ok(())
    } else {
        Err(Error::UnknownOptimizer(name.to_string()))
    }
}

/// Runs the optimizer called `name` on `task` for `budget` evaluations.
pub fn run_optimizer(task: &Task, name: &str, budget: usize, seed: u64, overrides: &Overrides) -> Result<RunHistory> {
    check_optimizer(name)?;
    match name {
        "hpi-parego" | "parego" => {
            let mut settings = if name == "parego" {
                OptimizerSettings::parego(budget)
            } else {
                OptimizerSettings::new(budget)
            };
            overrides.apply(&mut settings);
            optimizer::run(task, &settings, seed)
        }
        "random" => run_random_search(task, budget, seed),
        _ => {
            let mut settings = Nsga2Settings::default();
            if let Some(p) = overrides.population_size {
                settings.population_size = p;
            }
            run_nsga2(task, &settings, budget, seed)
        }
    }
}

/// `<outdir>/<task>/<label>/<seed>.jsonl`
pub fn history_path(outdir: &Path, task: &str, label: &str, seed: u64) -> PathBuf {
    outdir.join(task).join(label).join(format!("{seed}.jsonl"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default = "one")]
    pub multiplier: usize,
    /// Explicit budget, replacing the `task_budget` rule.
    #[serde(default)]
    pub trials: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub name: String,
    /// Directory name for the results; defaults to `name`.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub settings: Overrides,
}

impl OptimizerSpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub tasks: Vec<TaskSpec>,
    pub optimizers: Vec<OptimizerSpec>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl SuiteConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() || self.optimizers.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidSettings("tasks, optimizers and seeds must be non-empty".into()));
        }
        for t in &self.tasks {
            Task::by_name(&t.name, t.dimension)?;
            if t.multiplier == 0 || t.trials == Some(0) {
                return Err(Error::InvalidSettings(format!("task `{}` has a zero budget", t.name)));
            }
        }
        let mut labels = std::collections::BTreeSet::new();
        for o in &self.optimizers {
            check_optimizer(&o.name)?;
            if !labels.insert(o.label()) {
                return Err(Error::InvalidSettings(format!("duplicate optimizer label `{}`", o.label())));
            }
        }
        Ok(())
    }

    /// Every (task, optimizer, seed) cell in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for t in &self.tasks {
            for o in &self.optimizers {
                for &seed in &self.seeds {
                    cells.push(Cell {
                        task: t.clone(),
                        optimizer: o.clone(),
                        seed,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub task: TaskSpec,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
}

impl Cell {
    pub fn path(&self, outdir: &Path) -> PathBuf {
        history_path(outdir, &self.task.name, self.optimizer.label(), self.seed)
    }

    pub fn run(&self) -> Result<RunHistory> {
        let task = Task::by_name(&self.task.name, self.task.dimension)?;
        let budget = self
            .task
            .trials
            .unwrap_or_else(|| task_budget(task.dimension(), self.task.multiplier));
        run_optimizer(&task, &self.optimizer.name, budget, self.seed, &self.optimizer.settings)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteSummary {
    pub completed: usize,
    pub skipped: usize,
    pub failures: Vec<(PathBuf, String)>,
}

/// Runs every cell whose history file does not exist yet, on at most
/// `workers` threads. Failed cells are listed in `failures.csv` under the
/// output directory.
pub fn run_suite(config: &SuiteConfig, workers: usize) -> Result<SuiteSummary> {
    config.validate()?;
    let outdir = &config.output_dir;
    std::fs::create_dir_all(outdir)?;
    let (pending, done): (Vec<Cell>, Vec<Cell>) = config.cells().into_iter().partition(|c| !c.path(outdir).exists());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSettings(e.to_string()))?;
    let outcomes: Vec<(PathBuf, Result<()>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|cell| {
                let path = cell.path(outdir);
                let outcome = cell.run().and_then(|h| h.write(&path));
                (path, outcome)
            })
            .collect()
    });
    let mut summary = SuiteSummary {
        skipped: done.len(),
        ..SuiteSummary::default()
    };
    for (path, outcome) in outcomes {
        match outcome {
            Ok(()) => summary.completed += 1,
            Err(e) => summary.failures.push((path, e.to_string())),
        }
    }
    let failures_path = outdir.join("failures.csv");
    if summary.failures.is_empty() {
        if failures_path.exists() {
            std::fs::remove_file(&failures_path)?;
        }
    } else {
        let mut csv = String::from("history,error\n");
        for (path, message) in &summary.failures {
            let _ = writeln!(csv, "{},{}", csv_field(&path.display().to_string()), csv_field(message));
        }
        std::fs::write(&failures_path, csv)?;
    }
    Ok(summary)
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_optimizer_lists_names() {
        let task = Task::by_name("zdt1", Some(3)).unwrap();
        let err = run_optimizer(&task, "bogus", 20, 0, &Overrides::default()).unwrap_err();
        let msg = err.to_string();
        assert!(OPTIMIZERS.iter().all(|n| msg.contains(n)), "{msg}");
    }

    #[test]
    fn overrides_reach_settings() {
        let o: Overrides = serde_json::from_str(r#"{"tau": 0.5, "schedule": "conv_phase", "anchor": "default", "r": 0.2, "u": 3}"#).unwrap();
        let mut s = OptimizerSettings::new(100);
        o.apply(&mut s);
        assert_eq!(s.schedule.tau, 0.5);
        assert_eq!(s.schedule.kind, ScheduleKind::ConvPhase);
        assert_eq!(s.anchor_mode, AnchorMode::Default);
        assert_eq!(s.random_chance_r, 0.2);
        assert_eq!(s.weight_update_u, 3);
        assert!(serde_json::from_str::<Overrides>(r#"{"tua": 0.5}"#).is_err());
    }

    #[test]
    fn suite_config_validation() {
        let ok = r#"{"tasks":[{"name":"zdt1","dimension":2,"trials":12}],"optimizers":[{"name":"random"}],"seeds":[0],"output_dir":"x"}"#;
        let cfg = SuiteConfig::from_json_str(ok).unwrap();
        assert_eq!(cfg.cells().len(), 1);
        assert_eq!(cfg.tasks[0].multiplier, 1);
        for bad in [
            r#"{"tasks":[],"optimizers":[{"name":"random"}],"seeds":[0],"output_dir":"x"}"#,
            r#"{"tasks":[{"name":"zdt9"}],"optimizers":[{"name":"random"}],"seeds":[0],"output_dir":"x"}"#,
            r#"{"tasks":[{"name":"zdt1"}],"optimizers":[{"name":"smac"}],"seeds":[0],"output_dir":"x"}"#,
            r#"{"tasks":[{"name":"zdt1"}],"optimizers":[{"name":"random"},{"name":"random"}],"seeds":[0],"output_dir":"x"}"#,
        ] {
            assert!(SuiteConfig::from_json_str(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
