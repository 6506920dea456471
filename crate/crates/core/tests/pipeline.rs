use magnus_gp::experiment::{
    interpolate, median_of, read_rows, run_accuracy_study, run_cost_study, run_interpolation_study, solve_trial,
    write_csv, ExperimentConfig, TrialInput, ROW_HEADER,
};
use magnus_gp::prior::{Knot, Method};
use magnus_gp::se3::{exp_map, Twist};
use magnus_gp::sim::{compute_rmse, even_times, generate_ground_truth, Metrics};
use magnus_gp::solver::{initial_guess, solve_gauss_newton, FactorGraph, InitialPrior, SolverConfig};

fn tiny_noise(profile: &str) -> ExperimentConfig {
    ExperimentConfig {
        profile: profile.into(),
        meas_sigma_trans: 1e-6,
        meas_sigma_rot: 1e-6,
        p0_pose: 1e-12,
        p0_vel: 1e-12,
        k_meas: vec![10],
        trials: 1,
        ..Default::default()
    }
}

fn solve_all(cfg: &ExperimentConfig, k: usize) -> Vec<(Method, Metrics)> {
    let truth = generate_ground_truth(&cfg.scenario(k).unwrap()).unwrap();
    let input = TrialInput::new(cfg, &truth, k, 0);
    let times = input.measurement_times();
    let truth_knots = truth.sample(&times);
    Method::ALL
        .into_iter()
        .map(|m| {
            let est = solve_trial(cfg, m, &input, &times, false).unwrap();
            (m, compute_rmse(&est.knots, &truth_knots).unwrap())
        })
        .collect()
}

#[test]
fn near_noiseless_measurements_pin_the_poses() {
    let cfg = tiny_noise("sinusoidal");
    for (m, metrics) in solve_all(&cfg, 10) {
        assert!(metrics.rmse_pose_linear < 1e-4, "{m}: {}", metrics.rmse_pose_linear);
        assert!(metrics.rmse_pose_angular < 1e-4, "{m}: {}", metrics.rmse_pose_angular);
    }
}

#[test]
fn near_noiseless_constant_motion_recovers_the_whole_state() {
    let cfg = tiny_noise("constant");
    for (m, metrics) in solve_all(&cfg, 10) {
        for (name, v) in Metrics::NAMES.iter().zip(metrics.values()) {
            assert!(v < 1e-4, "{m} {name}: {v}");
        }
    }
}

#[test]
fn prior_alone_propagates_constant_velocity() {
    let w = Twist::new(0.5, 0.1, 0.0, 0.0, 0.05, 0.2);
    let start = Knot::new(0.0, exp_map(&Twist::new(1.0, 0.0, -1.0, 0.1, 0.0, 0.0)), w);
    let times = even_times(4.0, 9);
    let truth: Vec<Knot> = times.iter().map(|&t| Knot::new(t, exp_map(&(w * t)) * start.pose, w)).collect();
    for method in Method::ALL {
        let graph = FactorGraph {
            knots: initial_guess(&times, &[]).unwrap(),
            measurements: vec![],
            meas_cov: magnus_gp::sim::Scenario::default_meas_cov(),
            initial: Some(InitialPrior { knot: start, p0: magnus_gp::linalg::Matrix12::identity() * 1e-8 }),
            method,
            qc: magnus_gp::prior::QcSpec::isotropic(0.1).unwrap(),
            noise: Default::default(),
        };
        let est = solve_gauss_newton(&graph, &SolverConfig::default()).unwrap();
        assert!(est.converged, "{method}");
        let m = compute_rmse(&est.knots, &truth).unwrap();
        assert!(m.values().iter().all(|v| *v < 1e-6), "{method}: {:?}", m.values());
    }
}

#[test]
fn knot_marginals_are_consistent_on_prior_samples() {
    let cfg = ExperimentConfig {
        profile: "sampled-prior".into(),
        k_meas: vec![10],
        trials: 50,
        methods: vec![Method::Magnus(magnus_gp::magnus::MagnusOrder::THREE), Method::Steam],
        ..Default::default()
    };
    let rows = run_accuracy_study(&cfg, false).unwrap();
    for &m in &cfg.methods {
        let nees: Vec<f64> = rows.iter().filter(|r| r.method == m.name() && r.metric == "nees").map(|r| r.value).collect();
        assert_eq!(nees.len(), 50);
        let mean = nees.iter().sum::<f64>() / nees.len() as f64;
        assert!((6.0..=24.0).contains(&mean), "{m}: mean NEES {mean}");
    }
}

#[test]
fn accuracy_study_is_deterministic() {
    let cfg = ExperimentConfig {
        k_meas: vec![5],
        trials: 1,
        methods: vec![Method::Magnus(magnus_gp::magnus::MagnusOrder::ONE)],
        ..Default::default()
    };
    let a = run_accuracy_study(&cfg, false).unwrap();
    assert_eq!(a.len(), 5);
    assert!(a.iter().all(|r| r.value.is_finite() && r.value >= 0.0));
    assert_eq!(a, run_accuracy_study(&cfg, false).unwrap());
    let other = run_accuracy_study(&ExperimentConfig { seed: 2, ..cfg }, false).unwrap();
    assert_ne!(a, other);
}

#[test]
fn interpolating_at_the_knots_returns_them() {
    let cfg = ExperimentConfig { k_meas: vec![6], ..Default::default() };
    let truth = generate_ground_truth(&cfg.scenario(6).unwrap()).unwrap();
    let input = TrialInput::new(&cfg, &truth, 6, 0);
    let times = input.measurement_times();
    for method in Method::ALL {
        let est = solve_trial(&cfg, method, &input, &times, false).unwrap();
        let m = compute_rmse(&interpolate(&est, &times).unwrap(), &est.knots).unwrap();
        assert!(m.values().iter().all(|v| *v < 1e-12), "{method}: {:?}", m.values());
    }
}

#[test]
fn interpolation_error_falls_with_more_measurements() {
    let cfg = ExperimentConfig { k_meas: vec![3, 6, 12], trials: 4, fine_factor: 5, ..Default::default() };
    let rows = run_interpolation_study(&cfg, false).unwrap();
    for m in Method::ALL {
        let med: Vec<f64> = cfg.k_meas.iter().map(|&k| median_of(&rows, m, k, "rmse_pose_linear")).collect();
        assert!(med.windows(2).all(|w| w[1] < w[0]), "{m}: {med:?}");
    }
}

#[test]
fn cost_table_reads_back() {
    let cfg = ExperimentConfig { k_meas: vec![4], trials: 2, timing_repeats: 1, fine_factor: 2, ..Default::default() };
    let rows = run_cost_study(&cfg, false).unwrap();
    assert_eq!(rows.len(), 4 * 2 * 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cost.csv");
    write_csv(&path, &rows, &ROW_HEADER).unwrap();
    assert_eq!(read_rows(&path).unwrap(), rows);
    for r in &rows {
        match r.metric.as_str() {
            "iterations" => assert!(r.value >= 1.0 && r.value.fract() == 0.0),
            _ => assert!(r.value > 0.0),
        }
    }
}

#[test]
fn measurements_need_matching_knots() {
    let cfg = ExperimentConfig::default();
    let truth = generate_ground_truth(&cfg.scenario(4).unwrap()).unwrap();
    let input = TrialInput::new(&cfg, &truth, 4, 0);
    let shifted: Vec<f64> = input.measurement_times().iter().map(|t| t + 0.01).collect();
    assert!(solve_trial(&cfg, Method::Steam, &input, &shifted, false).is_err());
}
