//! Simulated ground truth, noisy pose measurements and error metrics.

use std::f64::consts::TAU;

use nalgebra::{Cholesky, Matrix6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, stack, Matrix12, Vector12};
use crate::magnus::integrate_pose;
use crate::prior::{Knot, QcSpec};
use crate::se3::{exp_map, log_map, Pose, Twist};

/// Integration steps per measurement interval for the ground truth.
pub const TRUTH_STEPS_PER_INTERVAL: usize = 1000;

/// One velocity channel `offset + amplitude * sin(2π freq t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineChannel {
    pub offset: f64,
    pub amplitude: f64,
    pub freq: f64,
}

/// Ground-truth body velocity profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// Per-channel sinusoids with phases drawn from the scenario seed.
    Sinusoidal([SineChannel; 6]),
    Constant(Twist),
    Zero,
    /// A sample path of the white-noise-on-acceleration prior itself,
    /// starting at the given velocity.
    SampledPrior(Twist),
}

impl Profile {
    /// Smoothly varying motion with linear speed under 1 m/s and angular
    /// speed under 0.5 rad/s.
    pub fn default_sinusoidal() -> Self {
        let ch = |offset, amplitude, freq| SineChannel { offset, amplitude, freq };
        Profile::Sinusoidal([
            ch(0.7, 0.2, 0.11),
            ch(0.0, 0.3, 0.07),
            ch(0.0, 0.1, 0.13),
            ch(0.0, 0.2, 0.09),
            ch(0.0, 0.2, 0.05),
            ch(0.0, 0.3, 0.08),
        ])
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Sinusoidal(_) => "sinusoidal",
            Profile::Constant(_) => "constant",
            Profile::Zero => "zero",
            Profile::SampledPrior(_) => "sampled-prior",
        }
    }
}

/// A simulated experiment: trajectory, sensor and prior settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration: f64,
    pub k_meas: usize,
    pub profile: Profile,
    pub start: Pose,
    pub meas_cov: Matrix6<f64>,
    pub qc: QcSpec,
    pub seed: u64,
}

impl Scenario {
    /// Default measurement covariance: 5 cm and 0.02 rad standard deviations.
    pub fn default_meas_cov() -> Matrix6<f64> {
        let s = Twist::new(0.05, 0.05, 0.05, 0.02, 0.02, 0.02);
        Matrix6::from_diagonal(&s.component_mul(&s))
    }

    pub fn new(k_meas: usize, seed: u64) -> Self {
        Scenario {
            duration: 10.0,
            k_meas,
            profile: Profile::default_sinusoidal(),
            start: Pose::identity(),
            meas_cov: Self::default_meas_cov(),
            qc: QcSpec::diagonal([0.1, 0.1, 0.1, 0.05, 0.05, 0.05]).expect("default Qc"),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_meas < 2 {
            return Err(Error::Config(format!("k_meas must be at least 2, got {}", self.k_meas)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if self.meas_cov.cholesky().is_none() || (self.meas_cov - self.meas_cov.transpose()).amax() > 1e-12 {
            return Err(Error::Config("measurement covariance is not symmetric positive definite".into()));
        }
        Ok(())
    }

    /// Evenly spaced measurement times, endpoints included.
    pub fn measurement_times(&self) -> Vec<f64> {
        even_times(self.duration, self.k_meas)
    }
}

/// `n` evenly spaced times over `[0, duration]`.
pub fn even_times(duration: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| duration * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone)]
enum Velocity {
    Sines { channels: [SineChannel; 6], phases: [f64; 6] },
    Constant(Twist),
    /// Piecewise-linear samples on a uniform grid.
    Samples { dt: f64, values: Vec<Twist> },
}

impl Velocity {
    fn at(&self, t: f64) -> Twist {
        match self {
            Velocity::Sines { channels, phases } => Twist::from_fn(|i, _| {
                let c = &channels[i];
                c.offset + c.amplitude * (TAU * c.freq * t + phases[i]).sin()
            }),
            Velocity::Constant(w) => *w,
            Velocity::Samples { dt, values } => {
                let s = (t / dt).clamp(0.0, (values.len() - 1) as f64);
                let i = (s.floor() as usize).min(values.len() - 2);
                let f = s - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }
}

/// Densely sampled ground truth that can be evaluated at any time.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub knots: Vec<Knot>,
    velocity: Velocity,
}

impl GroundTruth {
    /// True state at `t`, integrated from the nearest dense sample below it.
    pub fn at(&self, t: f64) -> Knot {
        let n = self.knots.len();
        let i = self.knots.partition_point(|k| k.t <= t).saturating_sub(1).min(n - 1);
        let base = &self.knots[i];
        if base.t == t {
            return *base;
        }
        let pose = integrate_pose(|s| self.velocity.at(s), base.t, t, 8, base.pose);
        Knot::new(t, pose, self.velocity.at(t))
    }

    pub fn sample(&self, times: &[f64]) -> Vec<Knot> {
        times.iter().map(|&t| self.at(t)).collect()
    }
}

/// Integrates the scenario's velocity profile at a fixed number of steps per
/// measurement interval.
pub fn generate_ground_truth(scenario: &Scenario) -> Result<GroundTruth> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let steps = TRUTH_STEPS_PER_INTERVAL * (scenario.k_meas - 1);
    let h = scenario.duration / steps as f64;
    let velocity = match &scenario.profile {
        Profile::Sinusoidal(channels) => {
            Velocity::Sines { channels: *channels, phases: std::array::from_fn(|_| rng.random_range(0.0..TAU)) }
        }
        Profile::Constant(w) => Velocity::Constant(*w),
        Profile::Zero => Velocity::Constant(Twist::zeros()),
        Profile::SampledPrior(w0) => {
            let l = scenario.qc.matrix().cholesky().expect("validated Qc").l();
            let mut values = Vec::with_capacity(steps + 1);
            let mut w = *w0;
            values.push(w);
            for _ in 0..steps {
                let z = Twist::from_fn(|_, _| rng.sample(StandardNormal));
                w += l * z * h.sqrt();
                values.push(w);
            }
            Velocity::Samples { dt: h, values }
        }
    };
    let mut knots = Vec::with_capacity(steps + 1);
    let mut pose = scenario.start;
    knots.push(Knot::new(0.0, pose, velocity.at(0.0)));
    for i in 0..steps {
        let (t0, t1) = (i as f64 * h, (i + 1) as f64 * h);
        pose = integrate_pose(|s| velocity.at(s), t0, t1, 1, pose);
        knots.push(Knot::new(t1, pose, velocity.at(t1)));
    }
    Ok(GroundTruth { knots, velocity })
}

/// Draws a zero-mean Gaussian vector with covariance `cov`.
pub fn gaussian<const N: usize>(rng: &mut impl Rng, cov: &nalgebra::SMatrix<f64, N, N>) -> nalgebra::SVector<f64, N> {
    let l = Cholesky::new(*cov).expect("covariance must be positive definite").l();
    let z = nalgebra::SVector::<f64, N>::from_fn(|_, _| rng.sample(StandardNormal));
    l * z
}

/// Noisy pose measurements `Exp(n) T_true` at evenly spaced times.
pub fn generate_measurements(truth: &GroundTruth, k_meas: usize, r: &Matrix6<f64>, seed: u64) -> Vec<(f64, Pose)> {
    let duration = truth.knots.last().map_or(0.0, |k| k.t);
    let l = Cholesky::new(*r).expect("measurement covariance must be positive definite").l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    even_times(duration, k_meas)
        .into_iter()
        .map(|t| {
            let z = Twist::from_fn(|_, _| rng.sample(StandardNormal));
            (t, exp_map(&(l * z)) * truth.at(t).pose)
        })
        .collect()
}

/// Root-mean-square errors split into translational and rotational parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub rmse_pose_linear: f64,
    pub rmse_pose_angular: f64,
    pub rmse_vel_linear: f64,
    pub rmse_vel_angular: f64,
    pub times: Vec<f64>,
}

impl Metrics {
    pub const NAMES: [&'static str; 4] = ["rmse_pose_linear", "rmse_pose_angular", "rmse_vel_linear", "rmse_vel_angular"];

    pub fn values(&self) -> [f64; 4] {
        [self.rmse_pose_linear, self.rmse_pose_angular, self.rmse_vel_linear, self.rmse_vel_angular]
    }
}

const TIME_MATCH_TOL: f64 = 1e-9;

/// Pose and velocity error of `est` relative to `truth`, in the left
/// perturbation convention of the estimator.
pub fn state_error(est: &Knot, truth: &Knot) -> Result<Vector12> {
    Ok(stack(&log_map(&(est.pose * truth.pose.inverse()))?, &(est.w - truth.w)))
}

pub fn compute_rmse(est: &[Knot], truth: &[Knot]) -> Result<Metrics> {
    if est.len() != truth.len() {
        return Err(Error::TimestampMismatch {
            index: est.len().min(truth.len()),
            a: est.get(truth.len()).map_or(f64::NAN, |k| k.t),
            b: truth.get(est.len()).map_or(f64::NAN, |k| k.t),
        });
    }
    let mut sums = [0.0; 4];
    for (i, (e, t)) in est.iter().zip(truth).enumerate() {
        if (e.t - t.t).abs() > TIME_MATCH_TOL {
            return Err(Error::TimestampMismatch { index: i, a: e.t, b: t.t });
        }
        let d = state_error(e, t)?;
        for (j, s) in sums.iter_mut().enumerate() {
            *s += d.fixed_rows::<3>(3 * j).norm_squared();
        }
    }
    let n = est.len().max(1) as f64;
    let r = sums.map(|s| (s / n).sqrt());
    Ok(Metrics {
        rmse_pose_linear: r[0],
        rmse_pose_angular: r[1],
        rmse_vel_linear: r[2],
        rmse_vel_angular: r[3],
        times: est.iter().map(|k| k.t).collect(),
    })
}

/// Mean normalized estimation error squared over a set of states.
pub fn mean_nees(est: &[Knot], cov: &[Matrix12], truth: &[Knot]) -> Result<f64> {
    let mut total = 0.0;
    for (i, ((e, p), t)) in est.iter().zip(cov).zip(truth).enumerate() {
        if (e.t - t.t).abs() > TIME_MATCH_TOL {
            return Err(Error::TimestampMismatch { index: i, a: e.t, b: t.t });
        }
        let d = state_error(e, t)?;
        let info = spd_inverse(p).ok_or(Error::NotPositiveDefinite("state covariance"))?;
        total += (d.transpose() * info * d)[0];
    }
    Ok(total / est.len().max(1) as f64)
}

/// Seed of one Monte-Carlo trial, independent across the sweep.
pub fn trial_seed(base: u64, k_meas: usize, trial: usize) -> u64 {
    base.wrapping_mul(1_000_000).wrapping_add(k_meas as u64 * 1_000).wrapping_add(trial as u64)
}
