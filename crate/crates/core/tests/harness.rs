//! Determinism, pairing and error-bar behaviour of the experiment harness.

use wiretap_core::sim::{run_experiment, ExperimentConfig, Scenario, SchemeTag, Sweep};

fn small(trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        trials,
        target_sinr_db: Sweep::Many(vec![10.0, 20.0]),
        master_seed: 77,
        ..ExperimentConfig::preset(Scenario::Fig3SinrVsTarget)
    }
}

/// Bitwise comparison that treats matching NaNs as equal.
fn same<T: std::fmt::Debug>(a: &T, b: &T) -> bool {
    format!("{a:?}") == format!("{b:?}")
}

fn on_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small(200);
    let one = on_pool(1, || run_experiment(&cfg).unwrap());
    let four = on_pool(4, || run_experiment(&cfg).unwrap());
    assert!(same(&one, &four));
    let again = on_pool(2, || run_experiment(&cfg).unwrap());
    assert!(same(&one, &again));
}

#[test]
fn seed_changes_results() {
    let a = run_experiment(&small(100)).unwrap();
    let b = run_experiment(&ExperimentConfig { master_seed: 78, ..small(100) }).unwrap();
    assert!(!same(&a.series, &b.series));
}

#[test]
fn scheme_subsets_see_the_same_draws() {
    let all = run_experiment(&small(150)).unwrap();
    let only = run_experiment(&ExperimentConfig {
        schemes: [SchemeTag::Naive].into_iter().collect(),
        ..small(150)
    })
    .unwrap();
    assert!(same(&all.series(SchemeTag::Naive), &only.series(SchemeTag::Naive)));
}

#[test]
fn sweep_points_are_paired() {
    // A point run alone equals the same point inside a sweep.
    let sweep = run_experiment(&small(150)).unwrap();
    let single = run_experiment(&ExperimentConfig { target_sinr_db: Sweep::One(20.0), ..small(150) }).unwrap();
    for tag in [SchemeTag::Perfect, SchemeTag::Naive, SchemeTag::RobustFdd, SchemeTag::RobustTdd] {
        assert!(same(&sweep.series(tag).unwrap()[1], &single.series(tag).unwrap()[0]), "{tag}");
    }
}

#[test]
fn stderr_shrinks_with_trials() {
    let few = run_experiment(&small(300)).unwrap();
    let many = run_experiment(&small(3000)).unwrap();
    for tag in [SchemeTag::Naive, SchemeTag::RobustTdd] {
        let a = few.series(tag).unwrap()[1].bob.mean_linear.stderr;
        let b = many.series(tag).unwrap()[1].bob.mean_linear.stderr;
        let ratio = a / b;
        assert!((2.0..5.0).contains(&ratio), "{tag}: stderr ratio {ratio}");
    }
}

#[test]
fn outages_are_counted_and_bounded() {
    // A 25 dB target at 10 dB total power with two antennas often cannot be met.
    let cfg = ExperimentConfig {
        na: Sweep::One(2),
        nb: Sweep::One(2),
        ne: Sweep::One(2),
        power_db: 10.0,
        target_sinr_db: Sweep::One(25.0),
        trials: 400,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&cfg).unwrap();
    let p = r.series(SchemeTag::Perfect).unwrap()[0];
    assert!(p.outages > 0 && p.outages <= p.trials);
    assert_eq!(p.trials, 400);
    assert!(p.bob.mean_linear.mean < 10f64.powf(2.5));
}
