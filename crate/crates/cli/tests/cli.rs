use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpi-parego"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn jsonl_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(jsonl_files(&path));
        } else if path.extension().is_some_and(|e| e == "jsonl") {
            out.push(path);
        }
    }
    out.sort();
    out
}

#[test]
fn run_writes_history_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = [
        "run", "--task", "zdt1", "--optimizer", "parego", "--seed", "0", "--trials", "60", "--outdir", out,
    ];
    let first = cli(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert!(stdout.contains("final hypervolume"), "{stdout}");
    assert!(stdout.contains("runtime"), "{stdout}");

    let path = dir.path().join("zdt1/parego/0.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    // One metadata line plus one line per record.
    assert_eq!(text.lines().count(), 61);

    assert!(cli(&args).status.success());
    assert_eq!(fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn run_accepts_setting_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let status = cli(&[
        "run", "--task", "zdt2", "--dimension", "3", "--optimizer", "hpi-parego", "--trials", "30", "--tau", "0.6",
        "--schedule", "constant", "--anchor", "default", "--r", "0.2", "--u", "5", "--outdir", out,
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(dir.path().join("zdt2/hpi-parego/0.jsonl")).unwrap();
    assert!(text.lines().next().unwrap().contains("\"constant\""));

    let bad = cli(&["run", "--task", "zdt1", "--optimizer", "parego", "--trials", "30", "--r", "1.5", "--outdir", out]);
    assert!(!bad.status.success());
}

#[test]
fn unknown_names_fail_with_a_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["run", "--task", "zdt1", "--optimizer", "smac", "--trials", "20", "--outdir", out]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    for name in ["hpi-parego", "parego", "random", "nsga2"] {
        assert!(stderr.contains(name), "{stderr}");
    }
    let o = cli(&["run", "--task", "zdt5", "--optimizer", "random", "--trials", "20", "--outdir", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("zdt1"));
}

fn write_suite(dir: &Path, seeds: &[u64]) -> std::path::PathBuf {
    let config = format!(
        r#"{{
  "tasks": [{{"name": "zdt1", "dimension": 3, "trials": 24}}, {{"name": "zdt2", "dimension": 3, "trials": 24}}],
  "optimizers": [{{"name": "random"}}, {{"name": "nsga2", "settings": {{"population_size": 8}}}}],
  "seeds": {seeds:?},
  "output_dir": "{}"
}}"#,
        dir.join("out").display()
    );
    let path = dir.join("suite.json");
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn suite_runs_matrix_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_suite(dir.path(), &[0, 1]);
    let config = config.to_str().unwrap();
    let o = cli(&["suite", config, "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = jsonl_files(&dir.path().join("out"));
    assert_eq!(files.len(), 8);
    let before: Vec<String> = files.iter().map(|f| fs::read_to_string(f).unwrap()).collect();

    let o = cli(&["suite", config]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("completed 0, skipped 8"));

    // Simulate an interrupted suite: only the missing cell is recomputed.
    fs::remove_file(&files[3]).unwrap();
    let o = cli(&["suite", config]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("completed 1, skipped 7"));
    let after: Vec<String> = files.iter().map(|f| fs::read_to_string(f).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn failing_cells_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        r#"{{"tasks": [{{"name": "zdt1", "dimension": 3, "trials": 5}}],
  "optimizers": [{{"name": "random"}}, {{"name": "nsga2"}}],
  "seeds": [0], "output_dir": "{}"}}"#,
        dir.path().join("out").display()
    );
    let path = dir.path().join("suite.json");
    fs::write(&path, config).unwrap();
    let o = cli(&["suite", path.to_str().unwrap()]);
    assert!(!o.status.success());
    let failures = fs::read_to_string(dir.path().join("out/failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 2, "{failures}");
    assert!(failures.contains("nsga2"));
}

#[test]
fn report_emits_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_suite(dir.path(), &[0, 1]);
    assert!(cli(&["suite", config.to_str().unwrap()]).status.success());
    let histories = dir.path().join("out");
    let before: Vec<String> = jsonl_files(&histories).iter().map(|f| fs::read_to_string(f).unwrap()).collect();
    let report_dir = dir.path().join("report");
    let o = cli(&["report", histories.to_str().unwrap(), "--outdir", report_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let curves = fs::read_to_string(report_dir.join("curves.csv")).unwrap();
    assert!(curves.starts_with("optimizer,x,mean,stderr"));
    assert!(curves.lines().any(|l| l.starts_with("nsga2,")));
    assert!(curves.lines().any(|l| l.starts_with("random,")));
    let auc = fs::read_to_string(report_dir.join("auc.csv")).unwrap();
    // 2 tasks x 2 optimizers x 2 seeds, plus header.
    assert_eq!(auc.lines().count(), 9);
    let svg = fs::read_to_string(report_dir.join("plot.svg")).unwrap();
    assert!(svg.contains("<polyline"));

    let after: Vec<String> = jsonl_files(&histories).iter().map(|f| fs::read_to_string(f).unwrap()).collect();
    assert_eq!(before, after);

    let empty = tempfile::tempdir().unwrap();
    assert!(!cli(&["report", empty.path().to_str().unwrap()]).status.success());
}

#[test]
fn pareto_prints_front_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(cli(&["run", "--task", "zdt1", "--dimension", "4", "--optimizer", "random", "--trials", "40", "--outdir", out])
        .status
        .success());
    let path = dir.path().join("zdt1/random/0.jsonl");
    let o = cli(&["pareto", path.to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "trial,x0,x1,x2,x3,f1,f2");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').rev().take(2).map(|v| v.parse().unwrap()).collect::<Vec<f64>>())
        .map(|mut v| {
            v.reverse();
            v
        })
        .collect();
    assert!(!rows.is_empty());
    // Sorted by f1 and mutually non-dominated, so f2 strictly decreases.
    for w in rows.windows(2) {
        assert!(w[0][0] <= w[1][0]);
        assert!(w[0][1] > w[1][1]);
    }

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "not json\n").unwrap();
    assert!(!cli(&["pareto", bad.to_str().unwrap()]).status.success());
}
