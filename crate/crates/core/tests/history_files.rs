use hpi_parego::benchmarks::Task;
use hpi_parego::harness::{history_path, run_optimizer, Overrides};
use hpi_parego::history::RunHistory;
use hpi_parego::report::load_histories;

#[test]
fn histories_survive_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let task = Task::by_name("mixed", Some(6)).unwrap();
    let history = run_optimizer(&task, "hpi-parego", 40, 2, &Overrides::default()).unwrap();
    let path = history_path(dir.path(), task.name(), "hpi-parego", 2);
    history.write(&path).unwrap();
    assert!(path.ends_with("mixed/hpi-parego/2.jsonl"));

    let back = RunHistory::read(&path).unwrap();
    assert_eq!(back.to_jsonl().unwrap(), history.to_jsonl().unwrap());
    assert_eq!(back.meta.space, *task.space());
    assert!(back.records().iter().all(|r| task.space().contains(&r.config)));
}

#[test]
fn loader_labels_by_directory_and_skips_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let task = Task::by_name("zdt3", Some(3)).unwrap();
    for (label, seed) in [("baseline", 0), ("baseline", 1), ("tuned", 0)] {
        let h = run_optimizer(&task, "random", 15, seed, &Overrides::default()).unwrap();
        h.write(&history_path(dir.path(), task.name(), label, seed)).unwrap();
    }
    std::fs::write(dir.path().join("zdt3/tuned/broken.jsonl"), "{}\n").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

    let (loaded, warnings) = load_histories(dir.path()).unwrap();
    let labels: Vec<&str> = loaded.iter().map(|h| h.label.as_str()).collect();
    assert_eq!(labels, ["baseline", "baseline", "tuned"]);
    assert_eq!(warnings.len(), 1, "{warnings:?}");
    assert!(warnings[0].contains("broken.jsonl"));
}
