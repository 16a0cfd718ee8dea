mod common;

use std::time::Instant;

use kgband::harness::{
    compare_policies, read_stats_csv, run_experiment, summarize, write_plot_csv, write_results_csv,
    write_stats_csv, BeliefForm, ComparisonRow, ModelSpec, RunResult, Selector, PLOT_HEADER,
    RESULTS_HEADER,
};
use kgband::positioning::Position2D;
use kgband::Error;

fn max_error(results: &[RunResult]) -> f64 {
    results
        .iter()
        .flat_map(|r| r.error_x.iter().chain(&r.error_y))
        .fold(0.0, |a: f64, b| a.max(*b))
}

#[test]
fn noiseless_runs_recover_the_path_for_every_selector() {
    for selector in [Selector::Kg, Selector::Random, Selector::All] {
        let mut cfg = common::noiseless_config(40);
        cfg.selector = selector;
        let results = run_experiment(&cfg).unwrap();
        assert_eq!(results[0].truth.len(), 500);
        assert!(max_error(&results) <= 1e-6, "{selector:?}");
        let stats = summarize(&results).unwrap();
        assert!(stats.x.max <= 1e-6 && stats.y.max <= 1e-6);
    }
}

#[test]
fn noiseless_full_belief_and_linear_model_also_recover() {
    let mut cfg = common::noiseless_config(24);
    cfg.belief_form = BeliefForm::Full;
    cfg.model = ModelSpec::Linear;
    cfg.features = vec![kgband::harness::FeatureKind::Freq];
    assert!(max_error(&run_experiment(&cfg).unwrap()) <= 1e-6);
}

#[test]
fn runs_are_reproducible_and_ordered() {
    let mut cfg = common::small_noisy_config(40, Selector::Kg, 3);
    cfg.policy.subset_k = Some(10);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.run, y.run);
        assert_eq!(x.est_trajectory, y.est_trajectory);
        assert_eq!(x.chosen_bands, y.chosen_bands);
    }
    assert_eq!(
        a.iter().map(|r| r.seed).collect::<Vec<_>>(),
        vec![100, 101, 102]
    );
    for r in &a {
        assert_eq!(r.est_trajectory.len(), r.truth.len());
        for k in 0..r.truth.len() {
            assert_eq!(r.error_x[k], (r.truth[k].x - r.est_trajectory[k].x).abs());
            assert_eq!(r.error_y[k], (r.truth[k].y - r.est_trajectory[k].y).abs());
        }
    }
}

fn standard_error_of_mean_error(results: &[RunResult]) -> f64 {
    let means: Vec<f64> = results
        .iter()
        .map(|r| r.error_x.iter().sum::<f64>() / r.error_x.len() as f64)
        .collect();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

#[test]
fn more_runs_shrink_the_standard_error() {
    let few = run_experiment(&common::small_noisy_config(40, Selector::Random, 20)).unwrap();
    let many = run_experiment(&common::small_noisy_config(40, Selector::Random, 200)).unwrap();
    let ratio = standard_error_of_mean_error(&few) / standard_error_of_mean_error(&many);
    let expected = 10f64.sqrt();
    assert!(
        (ratio / expected - 1.0).abs() <= 0.4,
        "standard error ratio {ratio}, expected about {expected}"
    );
}

#[test]
fn selection_time_falls_with_the_period() {
    let timed = |p: usize| {
        let mut cfg = common::small_noisy_config(1000, Selector::Kg, 1);
        cfg.policy.budget_n = 2;
        cfg.periodicity_p = p;
        let r = &run_experiment(&cfg).unwrap()[0];
        (r.selection_time, r.chosen_bands.len())
    };
    // warm caches and the allocator before timing
    timed(40);
    let (fast_total, fast_epochs) = timed(5);
    let (slow_total, slow_epochs) = timed(20);
    let ratio = fast_total / slow_total;
    let epochs = fast_epochs as f64 / slow_epochs as f64;
    assert!(
        (ratio / epochs - 1.0).abs() <= 0.5,
        "time ratio {ratio} for an epoch ratio {epochs}"
    );
    let per_fast = fast_total / fast_epochs as f64;
    let per_slow = slow_total / slow_epochs as f64;
    assert!(
        per_slow <= 1.5 * per_fast,
        "per-selection {per_slow} vs {per_fast}"
    );
}

#[test]
fn comparisons_are_paired() {
    let base = common::small_noisy_config(40, Selector::Kg, 3);
    let rows = compare_policies(&[base.clone(), base.clone()]).unwrap();
    assert_eq!(rows[0].stats.x, rows[1].stats.x);
    assert_eq!(rows[0].stats.y, rows[1].stats.y);

    let mut disabled = base.clone();
    disabled.policy.subset_k = Some(40);
    let rows = compare_policies(&[base.clone(), disabled]).unwrap();
    assert_eq!(rows[0].stats.x, rows[1].stats.x);

    // the compared sweeps equal those of a standalone run
    let alone = summarize(&run_experiment(&base).unwrap()).unwrap();
    assert_eq!(alone.x, rows[0].stats.x);

    let mut other_seed = base.clone();
    other_seed.scenario.seed += 1;
    assert!(matches!(
        compare_policies(&[base, other_seed]),
        Err(Error::Config(_))
    ));
}

#[test]
fn failures_name_the_run_and_sweep() {
    let mut cfg = common::small_noisy_config(40, Selector::All, 2);
    cfg.scenario.tx_positions = (0..4)
        .map(|i| Position2D::new(50.0 * i as f64, 0.0))
        .collect();
    match run_experiment(&cfg) {
        Err(Error::Run {
            run: 0,
            sweep: 0,
            source,
        }) => {
            assert!(matches!(*source, Error::RankDeficient(_)))
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn csv_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let results_path = dir.path().join("trajectory.csv");
    write_results_csv(&results_path, &[]).unwrap();
    assert_eq!(
        std::fs::read_to_string(&results_path).unwrap(),
        format!("{RESULTS_HEADER}\n")
    );

    let results = run_experiment(&common::small_noisy_config(40, Selector::Random, 2)).unwrap();
    write_results_csv(&results_path, &results).unwrap();
    let text = std::fs::read_to_string(&results_path).unwrap();
    let steps: usize = results.iter().map(|r| r.truth.len()).sum();
    assert_eq!(text.lines().count(), steps + 1);

    let plot = dir.path().join("plot.csv");
    write_plot_csv(&plot, &results[0]).unwrap();
    let text = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(text.lines().next(), Some(PLOT_HEADER));
    let first: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first[1], results[0].truth[0].x);
    assert_eq!(first[2], results[0].est_trajectory[0].x);

    let stats_path = dir.path().join("stats.csv");
    let rows = vec![ComparisonRow {
        name: "random".into(),
        stats: summarize(&results).unwrap(),
    }];
    write_stats_csv(&stats_path, &rows).unwrap();
    let back = read_stats_csv(&stats_path).unwrap();
    assert_eq!(back[0].name, "random");
    assert_eq!(back[0].stats.x, rows[0].stats.x);
    assert_eq!(back[0].stats.y, rows[0].stats.y);

    let missing = dir.path().join("no/such/dir/stats.csv");
    assert!(matches!(
        write_stats_csv(&missing, &rows),
        Err(Error::Io { .. })
    ));
}

#[test]
fn selection_time_is_part_of_wall_time() {
    let cfg = common::small_noisy_config(40, Selector::Kg, 1);
    let started = Instant::now();
    let r = run_experiment(&cfg).unwrap();
    let outer = started.elapsed().as_secs_f64();
    assert!(r[0].selection_time <= r[0].wall_time);
    assert!(r[0].wall_time <= outer);
}
