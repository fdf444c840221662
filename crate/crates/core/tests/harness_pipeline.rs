use std::path::Path;

use proptest::prelude::*;
use schedbench::harness::{
    analyze, assemble_result, emit_report, optimize_jf, run_experiment, run_experiment_with,
    CellResult, CellStatus, ExperimentPlan, OptMode, Optimum, RunOptions, CELLS_FILE, RESULT_FILE,
};
use schedbench::stats::Tts;
use schedbench::topology::Machine;
use schedbench::Error;

fn small_plan(dir: &Path) -> ExperimentPlan {
    let mut plan = ExperimentPlan::defaults(Machine::D2000Q, dir.to_path_buf());
    plan.sizes = vec![7, 8];
    plan.instances_per_size = 3;
    plan.density = 2.25;
    plan.anneal_times_us = vec![1.0];
    plan.j_f_grid = vec![-0.5, -1.0];
    plan.sampler.num_reads = 40;
    plan.sampler.num_gauges = 2;
    plan.gauges = None;
    plan.bootstrap_resamples = 200;
    plan.master_seed = 17;
    plan
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn invalid_plans_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_plan(dir.path());

    let mut p = base.clone();
    p.j_f_grid.clear();
    assert!(matches!(p.validate(), Err(Error::InvalidPlan(_))));

    let mut p = ExperimentPlan::defaults(Machine::Two, dir.path().to_path_buf());
    p.anneal_times_us = vec![10.0];
    assert!(matches!(p.validate(), Err(Error::InvalidPlan(_))));
    p.anneal_times_us = vec![20.0];
    p.density = 2.25;
    p.validate().unwrap();

    let mut p = base.clone();
    p.j_f_grid = vec![-0.5, 0.5];
    assert!(matches!(p.validate(), Err(Error::InvalidPlan(_))));
    p.j_f_grid = vec![-3.0];
    assert!(matches!(p.validate(), Err(Error::InvalidPlan(_))));

    let mut p = base.clone();
    p.sizes = vec![8];
    p.density = 4.5;
    assert!(matches!(p.validate(), Err(Error::InvalidPlan(_))));

    let mut p = base;
    p.anneal_times_us = vec![1.0, 1.0];
    assert!(matches!(run_experiment(&p), Err(Error::InvalidPlan(_))));
}

#[test]
fn resumed_runs_match_a_straight_run() {
    let straight = tempfile::tempdir().unwrap();
    let plan = small_plan(straight.path());
    let first = run_experiment(&plan).unwrap();
    let bytes = read(&straight.path().join(RESULT_FILE));
    assert_eq!(first.cells.len(), 6 * 2);

    let again = run_experiment_with(&plan, &RunOptions::default()).unwrap();
    assert_eq!(again.new_cells, 0);
    assert_eq!(again.result.as_ref(), Some(&first));
    assert_eq!(read(&straight.path().join(RESULT_FILE)), bytes);

    let resumed = tempfile::tempdir().unwrap();
    let plan = small_plan(resumed.path());
    let options = RunOptions {
        max_new_cells: Some(1),
    };
    let mut rounds = 0;
    loop {
        let outcome = run_experiment_with(&plan, &options).unwrap();
        rounds += 1;
        if outcome.result.is_some() {
            break;
        }
        assert_eq!(outcome.new_cells, 1);
        if rounds == 3 {
            // A write cut short by a crash leaves a partial line behind.
            let path = resumed.path().join(CELLS_FILE);
            let mut text = std::fs::read_to_string(&path).unwrap();
            text.push_str("{\"instance_id\":\"n007_i0");
            std::fs::write(&path, text).unwrap();
        }
    }
    assert_eq!(rounds, 12);
    assert_eq!(read(&resumed.path().join(RESULT_FILE)), bytes);
}

#[test]
fn a_directory_holds_one_plan() {
    let dir = tempfile::tempdir().unwrap();
    let plan = small_plan(dir.path());
    run_experiment_with(&plan, &RunOptions { max_new_cells: Some(1) }).unwrap();
    let mut other = plan;
    other.master_seed += 1;
    assert!(matches!(run_experiment(&other), Err(Error::InvalidPlan(_))));
}

fn synthetic(rows: &[(&str, f64, Tts)]) -> schedbench::harness::SweepResult {
    let mut plan = small_plan(Path::new("unused"));
    plan.sizes = vec![8];
    let mut grid: Vec<f64> = Vec::new();
    for &(_, j, _) in rows {
        if !grid.contains(&j) {
            grid.push(j);
        }
    }
    plan.j_f_grid = grid;
    let cells = rows
        .iter()
        .map(|&(id, j_f, tts)| CellResult {
            instance_id: id.to_string(),
            n: 8,
            index: id[1..].parse().unwrap(),
            t_us: 1.0,
            j_f,
            status: CellStatus::Sampled,
            total_anneals: 100,
            ground_hits: 1,
            mean_break_fraction: 0.0,
            tts,
        })
        .collect();
    assemble_result(&plan, cells).unwrap()
}

fn u_opt(r: &schedbench::harness::SweepResult) -> f64 {
    match optimize_jf(r, OptMode::UOpt).unwrap() {
        Optimum::Uniform(v) => v[0].j_f,
        Optimum::Individual(_) => unreachable!(),
    }
}

#[test]
fn uniform_optimum_examples() {
    let f = Tts::Finite;
    let faster_weak = synthetic(&[
        ("i0", -0.5, f(10.0)),
        ("i0", -1.0, f(20.0)),
        ("i1", -0.5, f(30.0)),
        ("i1", -1.0, f(40.0)),
    ]);
    assert_eq!(u_opt(&faster_weak), -0.5);

    let single = synthetic(&[("i0", -0.5, f(50.0)), ("i0", -1.0, f(20.0))]);
    assert_eq!(u_opt(&single), -1.0);
    assert_eq!(single.i_opt[0].choices[0].j_f, -1.0);

    let infinite_column = synthetic(&[
        ("i0", -0.5, Tts::Infinite),
        ("i0", -1.0, f(1e9)),
        ("i1", -0.5, Tts::Infinite),
        ("i1", -1.0, f(2e9)),
    ]);
    assert_eq!(u_opt(&infinite_column), -1.0);

    let tie = synthetic(&[("i0", -1.0, f(5.0)), ("i0", -0.5, f(5.0))]);
    assert_eq!(u_opt(&tie), -0.5);
    assert_eq!(tie.i_opt[0].choices[0].j_f, -0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn individual_optimum_never_loses(values in prop::collection::vec(prop::option::of(1.0f64..1e4), 3 * 5)) {
        let grid = [-0.5, -0.75, -1.0];
        let rows: Vec<(String, f64, Tts)> = values
            .iter()
            .enumerate()
            .map(|(k, v)| (format!("i{}", k / 3), grid[k % 3], v.map_or(Tts::Infinite, Tts::Finite)))
            .collect();
        let borrowed: Vec<(&str, f64, Tts)> = rows.iter().map(|(a, b, c)| (a.as_str(), *b, *c)).collect();
        let r = synthetic(&borrowed);
        let u = &r.u_opt[0].summary;
        let i = &r.i_opt[0].summary;
        prop_assert!(i.median <= u.median);
        prop_assert!(i.bootstrap_mean <= u.bootstrap_mean);
    }
}

#[test]
fn reports_are_written_with_and_without_fits() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&small_plan(&dir.path().join("run"))).unwrap();
    let mut other = result.clone();
    other.machine = Machine::Advantage;

    let bare = emit_report(&[result.clone(), other.clone()], &[], &dir.path().join("bare")).unwrap();
    let series: serde_json::Value = serde_json::from_slice(&read(&bare.series_json)).unwrap();
    assert!(series.as_array().unwrap().iter().all(|s| s["label"].is_null()));
    let comparison = std::fs::read_to_string(&bare.comparison_csv).unwrap();
    assert!(comparison.lines().any(|l| l.starts_with("2000Q,")));
    assert!(comparison.lines().any(|l| l.starts_with("Advantage,")));

    let fits = analyze(&result);
    let full = emit_report(&[result], &fits, &dir.path().join("full")).unwrap();
    let series: serde_json::Value = serde_json::from_slice(&read(&full.series_json)).unwrap();
    let labelled = series
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["label"].is_string())
        .count();
    assert_eq!(labelled, fits.iter().filter(|f| f.fit.is_some()).count());
    let heat: serde_json::Value = serde_json::from_slice(&read(&full.heatmap_json)).unwrap();
    assert_eq!(heat[0]["median"].as_array().unwrap().len(), 2);
    assert!(emit_report(&[], &[], dir.path()).is_err());
}
