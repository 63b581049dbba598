mod common;

use supportlab::harness::{enumerate_tasks, load_store, merge_store, run_sweep, SweepConfig, SweepOptions};
use supportlab::selection::Criterion;

const CONFIG: &str = r#"
seed = 3
p = 8
repetitions = 2
densities = [0.25, 0.5]
beta_distributions = ["uniform", "inverse-exponential"]
snrs = [2.0]
n_over_p = [4.0]
estimators = ["lasso", "mcp"]
criteria = ["aic", "bic", "eb"]

[estimator_settings.path]
n_lambdas = 25

[[covariances]]
t = 1.0
block_size = 2
block_value = 0.4
"#;

fn opts(workers: usize, resume: bool, max_tasks: Option<usize>) -> SweepOptions {
    SweepOptions {
        workers: Some(workers),
        resume,
        max_tasks,
    }
}

#[test]
fn one_row_per_estimator_and_criterion() {
    let cfg = SweepConfig::from_toml_str(CONFIG).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let summary = run_sweep(&cfg, dir.path(), &opts(1, false, None)).unwrap();
    assert_eq!((summary.total, summary.ran, summary.remaining), (8, 8, 0));
    merge_store(dir.path()).unwrap();
    let (_, records) = load_store(dir.path()).unwrap();
    assert_eq!(records.len(), 8 * 2 * 4);
    let mut keys: Vec<_> = records.iter().map(|r| (r.task_id.clone(), r.estimator, r.criterion)).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), records.len());
    assert!(records.iter().any(|r| r.criterion == Criterion::Oracle));
    assert!(records.iter().all(|r| r.ok()));
}

#[test]
fn rerun_without_resume_is_refused_and_resume_is_a_no_op() {
    let cfg = SweepConfig::from_toml_str(CONFIG).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run_sweep(&cfg, dir.path(), &opts(1, false, None)).unwrap();
    assert!(run_sweep(&cfg, dir.path(), &opts(1, false, None)).is_err());
    let again = run_sweep(&cfg, dir.path(), &opts(1, true, None)).unwrap();
    assert_eq!((again.already_done, again.ran), (8, 0));

    let mut other = cfg.clone();
    other.seed += 1;
    assert!(run_sweep(&other, dir.path(), &opts(1, true, None)).is_err());
}

#[test]
fn interrupted_and_parallel_runs_match_a_clean_run() {
    let cfg = SweepConfig::from_toml_str(CONFIG).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    run_sweep(&cfg, &clean, &opts(1, false, None)).unwrap();
    merge_store(&clean).unwrap();

    let split = dir.path().join("split");
    run_sweep(&cfg, &split, &opts(3, false, Some(3))).unwrap();
    run_sweep(&cfg, &split, &opts(3, true, Some(2))).unwrap();
    run_sweep(&cfg, &split, &opts(8, true, None)).unwrap();
    merge_store(&split).unwrap();

    let a = common::snapshot(&clean, &["timing"]);
    let b = common::snapshot(&split, &["timing"]);
    let strip = |v: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        v.into_iter().filter(|(n, _)| n != "completed.txt").collect()
    };
    assert_eq!(strip(a), strip(b));
    assert_eq!(common::sorted_ledger(&clean), common::sorted_ledger(&split));
}

#[test]
fn adding_grid_points_keeps_existing_seeds() {
    let cfg = SweepConfig::from_toml_str(CONFIG).unwrap();
    let mut wider = cfg.clone();
    wider.snrs.push(8.0);
    wider.densities.insert(0, 0.125);
    let before = enumerate_tasks(&cfg).unwrap();
    let after = enumerate_tasks(&wider).unwrap();
    assert_eq!(after.len(), 3 * 2 * 2 * 2);
    for t in &before {
        let same = after.iter().find(|u| u.id == t.id).expect("task kept");
        assert_eq!((same.seed, same.beta_seed), (t.seed, t.beta_seed));
    }
}

#[test]
fn repetitions_share_coefficients_but_not_noise() {
    let cfg = SweepConfig::from_toml_str(CONFIG).unwrap();
    let tasks = enumerate_tasks(&cfg).unwrap();
    let (a, b) = (&tasks[0], &tasks[1]);
    assert_eq!((a.rep, b.rep), (0, 1));
    let ia = a.instance(&cfg).unwrap();
    let ib = b.instance(&cfg).unwrap();
    assert_eq!(ia.beta_true, ib.beta_true);
    assert_ne!(ia.x, ib.x);
}
