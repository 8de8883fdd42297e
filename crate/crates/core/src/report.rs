//! Convergence reports over a tree of stored histories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::harness::csv_field;
use crate::history::{Record, RunHistory};
use crate::metrics::{self, Aggregate, CurveCell};
use crate::{Error, Result};

/// Grid resolution of the aggregated curves.
pub const CURVE_RESOLUTION: usize = 200;

#[derive(Debug, Clone)]
pub struct LoadedHistory {
    pub path: PathBuf,
    /// Optimizer label, taken from the parent directory name.
    pub label: String,
    pub history: RunHistory,
}

/// Reads every `*.jsonl` file below `root`, in path order. Unreadable files
/// are skipped and reported as warnings.
pub fn load_histories(root: &Path) -> Result<(Vec<LoadedHistory>, Vec<String>)> {
    let mut loaded = Vec::new();
    let mut warnings = Vec::new();
    let walker = walkdir::WalkDir::new(root).sort_by_file_name();
    for entry in walker {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "jsonl") {
            continue;
        }
        match RunHistory::read(path) {
            Ok(history) => {
                let label = path
                    .parent()
                    .and_then(|p| p.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| history.meta.optimizer.clone());
                loaded.push(LoadedHistory {
                    path: path.to_path_buf(),
                    label,
                    history,
                });
            }
            Err(e) => warnings.push(format!("skipping {}: {e}", path.display())),
        }
    }
    Ok((loaded, warnings))
}

/// Reference point and hypervolume bounds shared by all runs on a task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskNormalization {
    pub reference: Vec<f64>,
    pub hv_min: f64,
    pub hv_max: f64,
}

/// Per task: the reference point is the componentwise maximum over every
/// recorded objective vector; the bounds are the smallest and largest
/// incumbent hypervolume reached by any run.
pub fn task_normalizations<'a, I>(histories: I) -> Result<BTreeMap<String, TaskNormalization>>
where
    I: IntoIterator<Item = &'a RunHistory> + Clone,
{
    let mut references: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for h in histories.clone() {
        let Some(r) = metrics::reference_point(h.records().iter().map(|r| &r.objectives)) else {
            continue;
        };
        references
            .entry(h.meta.task.clone())
            .and_modify(|acc| acc.iter_mut().zip(&r).for_each(|(a, b)| *a = a.max(*b)))
            .or_insert(r);
    }
    let mut out: BTreeMap<String, TaskNormalization> = BTreeMap::new();
    for h in histories {
        let Some(reference) = references.get(&h.meta.task) else {
            continue;
        };
        let trajectory = metrics::hypervolume_trajectory(&h.objectives(), reference)?;
        let lo = trajectory.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = trajectory.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let entry = out.entry(h.meta.task.clone()).or_insert_with(|| TaskNormalization {
            reference: reference.clone(),
            hv_min: f64::INFINITY,
            hv_max: f64::NEG_INFINITY,
        });
        entry.hv_min = entry.hv_min.min(lo);
        entry.hv_max = entry.hv_max.max(hi);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucRow {
    pub optimizer: String,
    pub task: String,
    pub seed: u64,
    pub auc: f64,
    pub final_regret: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub aggregate: Aggregate,
    pub auc: Vec<AucRow>,
    pub warnings: Vec<String>,
}

/// Normalised regret curves, their aggregate and per-run AUC values.
pub fn build_report(histories: &[LoadedHistory], resolution: usize) -> Result<Report> {
    if histories.is_empty() {
        return Err(Error::InvalidData("no histories found".into()));
    }
    let norms = task_normalizations(histories.iter().map(|h| &h.history))?;
    let mut cells = Vec::new();
    let mut auc = Vec::new();
    let mut warnings = Vec::new();
    for h in histories {
        let Some(norm) = norms.get(&h.history.meta.task) else {
            warnings.push(format!("{} has no records", h.path.display()));
            continue;
        };
        let curve = metrics::hv_regret_curve(&h.history, &norm.reference, (norm.hv_min, norm.hv_max))?;
        auc.push(AucRow {
            optimizer: h.label.clone(),
            task: h.history.meta.task.clone(),
            seed: h.history.meta.seed,
            auc: metrics::auc(&curve),
            final_regret: curve.last().unwrap_or(1.0),
        });
        cells.push(CurveCell {
            optimizer: h.label.clone(),
            task: h.history.meta.task.clone(),
            seed: h.history.meta.seed,
            curve,
        });
    }
    let aggregate = metrics::aggregate(&cells, resolution)?;
    for (optimizer, task, seed) in &aggregate.missing {
        warnings.push(format!("missing cell: optimizer {optimizer}, task {task}, seed {seed}"));
    }
    Ok(Report {
        aggregate,
        auc,
        warnings,
    })
}

pub fn curves_csv(aggregate: &Aggregate) -> String {
    let mut out = String::from("optimizer,x,mean,stderr\n");
    for c in &aggregate.curves {
        for k in 0..c.xs.len() {
            let _ = writeln!(out, "{},{},{},{}", csv_field(&c.optimizer), c.xs[k], c.mean[k], c.stderr[k]);
        }
    }
    out
}

pub fn auc_csv(rows: &[AucRow]) -> String {
    let mut out = String::from("optimizer,task,seed,auc,final_regret\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.optimizer),
            csv_field(&r.task),
            r.seed,
            r.auc,
            r.final_regret
        );
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Mean regret curves with one-standard-error bands.
pub fn render_svg(aggregate: &Aggregate) -> String {
    let (width, height) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 150.0, 20.0, 50.0);
    let (pw, ph) = (width - left - right, height - top - bottom);
    let px = |x: f64| left + x.clamp(0.0, 1.0) * pw;
    let py = |y: f64| top + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v}</text>"#,
            px(v),
            top + ph + 18.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v}</text>"#,
            left - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">fraction of budget</text>"#,
        left + pw / 2.0,
        height - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">normalized HV regret</text>"#,
        top + ph / 2.0
    );
    for (i, c) in aggregate.curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = c.xs.iter().zip(c.mean.iter().zip(&c.stderr)).map(|(&x, (&m, &s))| (x, m + s));
        let lower = c.xs.iter().zip(c.mean.iter().zip(&c.stderr)).rev().map(|(&x, (&m, &s))| (x, m - s));
        let band: Vec<String> = upper.chain(lower).map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = c.xs.iter().zip(&c.mean).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = top + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            left + pw + 12.0,
            left + pw + 32.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            left + pw + 38.0,
            ly + 4.0,
            xml_escape(&c.optimizer)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes `curves.csv`, `auc.csv` and `plot.svg` into `outdir`.
pub fn write_report(report: &Report, outdir: &Path) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    std::fs::write(outdir.join("curves.csv"), curves_csv(&report.aggregate))?;
    std::fs::write(outdir.join("auc.csv"), auc_csv(&report.auc))?;
    std::fs::write(outdir.join("plot.svg"), render_svg(&report.aggregate))?;
    Ok(())
}

/// Non-dominated records, sorted by the first objective.
pub fn pareto_records(history: &RunHistory) -> Vec<&Record> {
    let objectives = history.objectives();
    let mut rows: Vec<&Record> = metrics::pareto_indices(&objectives)
        .into_iter()
        .map(|i| &history.records()[i])
        .collect();
    rows.sort_by(|a, b| a.objectives[0].total_cmp(&b.objectives[0]));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::Task;
    use crate::configspace::Configuration;
    use crate::history::{HistoryMeta, Source};

    fn history(task: &Task, seed: u64, points: &[[f64; 2]]) -> RunHistory {
        let mut h = RunHistory::new(HistoryMeta {
            task: task.name().to_string(),
            optimizer: "random".into(),
            seed,
            budget: points.len(),
            objectives: 2,
            settings: serde_json::Value::Null,
            space: task.space().clone(),
            truncated: false,
        });
        let config: Configuration = task.space().default_configuration();
        for p in points {
            h.push(Record::new(0, config.clone(), p.to_vec(), Source::RandomSearch)).unwrap();
        }
        h
    }

    fn loaded(label: &str, h: RunHistory) -> LoadedHistory {
        LoadedHistory {
            path: PathBuf::from(format!("{label}/{}.jsonl", h.meta.seed)),
            label: label.to_string(),
            history: h,
        }
    }

    #[test]
    fn normalization_spans_all_runs() {
        let task = Task::by_name("zdt1", Some(2)).unwrap();
        let a = history(&task, 0, &[[1.0, 1.0], [0.5, 0.5]]);
        let b = history(&task, 1, &[[2.0, 0.0]]);
        let norms = task_normalizations([&a, &b]).unwrap();
        let n = &norms["zdt1"];
        assert_eq!(n.reference, vec![2.0, 1.0]);
        assert_eq!(n.hv_min, 0.0);
        assert_eq!(n.hv_max, 0.75);
    }

    #[test]
    fn identical_histories_give_identical_curves() {
        let task = Task::by_name("zdt1", Some(2)).unwrap();
        let pts = [[1.0, 1.0], [0.5, 0.8], [0.2, 0.9], [0.9, 0.1]];
        let report = build_report(
            &[loaded("a", history(&task, 0, &pts)), loaded("b", history(&task, 0, &pts))],
            20,
        )
        .unwrap();
        assert_eq!(report.aggregate.curves[0].mean, report.aggregate.curves[1].mean);
        assert_eq!(report.auc[0].auc, report.auc[1].auc);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn missing_cells_are_warned() {
        let task = Task::by_name("zdt1", Some(2)).unwrap();
        let other = Task::by_name("zdt2", Some(2)).unwrap();
        let report = build_report(
            &[
                loaded("a", history(&task, 0, &[[1.0, 0.0], [0.0, 1.0]])),
                loaded("a", history(&other, 0, &[[1.0, 0.0]])),
                loaded("b", history(&task, 0, &[[1.0, 0.0]])),
            ],
            10,
        )
        .unwrap();
        assert_eq!(report.warnings.len(), 1, "{:?}", report.warnings);
        assert!(build_report(&[], 10).is_err());
    }

    #[test]
    fn pareto_rows_sorted_and_filtered() {
        let task = Task::by_name("zdt1", Some(2)).unwrap();
        let h = history(&task, 0, &[[0.9, 0.1], [0.5, 0.5], [0.6, 0.6], [0.1, 0.9]]);
        let rows: Vec<Vec<f64>> = pareto_records(&h).iter().map(|r| r.objectives.clone()).collect();
        assert_eq!(rows, vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.9, 0.1]]);
    }

    #[test]
    fn svg_has_one_line_per_optimizer() {
        let task = Task::by_name("zdt1", Some(2)).unwrap();
        let report = build_report(
            &[
                loaded("a", history(&task, 0, &[[1.0, 0.0], [0.0, 1.0]])),
                loaded("b", history(&task, 0, &[[0.5, 0.5]])),
            ],
            10,
        )
        .unwrap();
        let svg = render_svg(&report.aggregate);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(curves_csv(&report.aggregate).lines().count(), 1 + 2 * 11);
    }
}
