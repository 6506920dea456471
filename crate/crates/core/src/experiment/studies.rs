use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prior::{Knot, Method};
use crate::query::query;
use crate::se3::Pose;
use crate::sim::{
    compute_rmse, even_times, gaussian, generate_ground_truth, generate_measurements, mean_nees, trial_seed,
    GroundTruth, Metrics,
};
use crate::solver::{initial_guess, solve_gauss_newton, FactorGraph, InitialPrior, TrajectoryEstimate};

use super::config::ExperimentConfig;
use super::Row;

/// Everything random about one trial.
#[derive(Debug, Clone)]
pub struct TrialInput {
    pub k_meas: usize,
    pub trial: usize,
    pub measurements: Vec<(f64, Pose)>,
    pub initial: InitialPrior,
}

impl TrialInput {
    pub fn new(cfg: &ExperimentConfig, truth: &GroundTruth, k_meas: usize, trial: usize) -> Self {
        let seed = trial_seed(cfg.seed, k_meas, trial);
        let measurements = generate_measurements(truth, k_meas, &cfg.meas_cov(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let p0 = cfg.p0();
        let initial = InitialPrior { knot: truth.at(0.0).perturbed(&gaussian(&mut rng, &p0)), p0 };
        TrialInput { k_meas, trial, measurements, initial }
    }

    pub fn measurement_times(&self) -> Vec<f64> {
        self.measurements.iter().map(|(t, _)| *t).collect()
    }
}

/// Solves with knots at `times`; each measurement attaches to the knot with
/// the same timestamp.
pub fn solve_trial(
    cfg: &ExperimentConfig,
    method: Method,
    input: &TrialInput,
    times: &[f64],
    allow_nonconverged: bool,
) -> Result<TrajectoryEstimate> {
    let mut measurements = Vec::with_capacity(input.measurements.len());
    for (t, pose) in &input.measurements {
        let i = times
            .iter()
            .position(|s| s == t)
            .ok_or_else(|| Error::InvalidGraph(format!("no knot at measurement time {t}")))?;
        measurements.push((i, *pose));
    }
    let graph = FactorGraph {
        knots: initial_guess(times, &measurements)?,
        measurements,
        meas_cov: cfg.meas_cov(),
        initial: Some(input.initial.clone()),
        method,
        qc: cfg.qc()?,
        noise: cfg.noise(),
    };
    let est = solve_gauss_newton(&graph, &cfg.solver())?;
    if !est.converged && !allow_nonconverged {
        return Err(Error::NotConverged { iterations: est.iterations, last_step: est.last_step });
    }
    Ok(est)
}

/// Evaluation grid of the interpolation study.
pub fn interpolation_times(cfg: &ExperimentConfig, k_meas: usize) -> Vec<f64> {
    even_times(cfg.duration, cfg.fine_factor * k_meas)
}

/// Knot times of the fine reference: the evaluation grid merged with the
/// measurement times.
pub fn fine_times(cfg: &ExperimentConfig, k_meas: usize) -> Vec<f64> {
    let mut t = interpolation_times(cfg, k_meas);
    t.extend(even_times(cfg.duration, k_meas));
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

pub fn interpolate(est: &TrajectoryEstimate, times: &[f64]) -> Result<Vec<Knot>> {
    times.iter().map(|&t| query(est, t).map(|q| q.knot)).collect()
}

fn metric_rows(method: Method, k_meas: usize, trial: usize, m: &Metrics) -> Vec<Row> {
    Metrics::NAMES.iter().zip(m.values()).map(|(name, v)| Row::new(method, k_meas, trial, name, v)).collect()
}

/// Runs `f` for every (k, trial) of the sweep in parallel and concatenates
/// the rows in sweep order.
fn sweep<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<Row>>
where
    F: Fn(&GroundTruth, &TrialInput) -> Result<Vec<Row>> + Sync,
{
    let mut rows = Vec::new();
    for &k in &cfg.k_meas {
        let truth = generate_ground_truth(&cfg.scenario(k)?)?;
        let per_trial: Vec<Result<Vec<Row>>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| f(&truth, &TrialInput::new(cfg, &truth, k, trial)))
            .collect();
        for r in per_trial {
            rows.extend(r?);
        }
    }
    rows.sort_by(Row::key_cmp);
    Ok(rows)
}

/// RMSE against the ground truth at the measurement times, plus the mean
/// NEES of the knot marginals.
pub fn run_accuracy_study(cfg: &ExperimentConfig, allow_nonconverged: bool) -> Result<Vec<Row>> {
    cfg.validate()?;
    sweep(cfg, |truth, input| {
        let times = input.measurement_times();
        let truth_knots = truth.sample(&times);
        let mut rows = Vec::new();
        for &method in &cfg.methods {
            let est = solve_trial(cfg, method, input, &times, allow_nonconverged)?;
            let m = compute_rmse(&est.knots, &truth_knots)?;
            rows.extend(metric_rows(method, input.k_meas, input.trial, &m));
            let nees = mean_nees(&est.knots, &est.p, &truth_knots)?;
            rows.push(Row::new(method, input.k_meas, input.trial, "nees", nees));
        }
        Ok(rows)
    })
}

/// RMSE of each method's interpolated trajectory against the fine
/// stitched-LTI reference on the dense grid.
pub fn run_interpolation_study(cfg: &ExperimentConfig, allow_nonconverged: bool) -> Result<Vec<Row>> {
    cfg.validate()?;
    sweep(cfg, |_, input| {
        let k = input.k_meas;
        let grid = interpolation_times(cfg, k);
        let fine_t = fine_times(cfg, k);
        let fine = solve_trial(cfg, Method::Steam, input, &fine_t, allow_nonconverged)?;
        let reference = interpolate(&fine, &grid)?;
        let times = input.measurement_times();
        let mut rows = Vec::new();
        for &method in &cfg.methods {
            let est = solve_trial(cfg, method, input, &times, allow_nonconverged)?;
            let m = compute_rmse(&interpolate(&est, &grid)?, &reference)?;
            rows.extend(metric_rows(method, k, input.trial, &m));
        }
        Ok(rows)
    })
}

/// Wall-clock time of the main solve and of interpolating the whole dense
/// grid, each the best of `timing_repeats` runs. Runs serially, after one
/// untimed warm-up per sweep point, cycling through the methods within each
/// trial so that machine load affects them alike.
pub fn run_cost_study(cfg: &ExperimentConfig, allow_nonconverged: bool) -> Result<Vec<Row>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &k in &cfg.k_meas {
        let truth = generate_ground_truth(&cfg.scenario(k)?)?;
        let grid = interpolation_times(cfg, k);
        let inputs: Vec<TrialInput> = (0..cfg.trials).map(|i| TrialInput::new(cfg, &truth, k, i)).collect();
        let times = inputs[0].measurement_times();
        for &method in &cfg.methods {
            let warm = solve_trial(cfg, method, &inputs[0], &times, allow_nonconverged)?;
            interpolate(&warm, &grid)?;
        }
        for input in &inputs {
            let n = cfg.methods.len();
            let (mut solve, mut interp, mut iterations) = (vec![f64::INFINITY; n], vec![f64::INFINITY; n], vec![0; n]);
            for _ in 0..cfg.timing_repeats {
                for (i, &method) in cfg.methods.iter().enumerate() {
                    let start = Instant::now();
                    let est = solve_trial(cfg, method, input, &times, allow_nonconverged)?;
                    solve[i] = solve[i].min(start.elapsed().as_secs_f64());
                    let start = Instant::now();
                    interpolate(&est, &grid)?;
                    interp[i] = interp[i].min(start.elapsed().as_secs_f64());
                    iterations[i] = est.iterations;
                }
            }
            for (i, &method) in cfg.methods.iter().enumerate() {
                rows.push(Row::new(method, k, input.trial, "solve_time_s", solve[i]));
                rows.push(Row::new(method, k, input.trial, "interp_time_s", interp[i]));
                rows.push(Row::new(method, k, input.trial, "iterations", iterations[i] as f64));
            }
        }
    }
    rows.sort_by(Row::key_cmp);
    Ok(rows)
}
