use std::path::Path;

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix12;
use crate::prior::{Method, NoiseOptions, NoiseTerms, QcSpec};
use crate::se3::{Pose, Twist};
use crate::sim::{Profile, Scenario};
use crate::solver::SolverConfig;

/// Flat experiment configuration. Every key is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub k_meas: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub duration: f64,
    /// `sinusoidal`, `constant`, `zero` or `sampled-prior`.
    pub profile: String,
    /// Velocity of the `constant` profile and start of `sampled-prior`.
    pub velocity: [f64; 6],
    pub meas_sigma_trans: f64,
    pub meas_sigma_rot: f64,
    pub qc_linear: f64,
    pub qc_angular: f64,
    /// Variances of the prior on the first knot.
    pub p0_pose: f64,
    pub p0_vel: f64,
    pub n_sub: usize,
    pub noise_terms: NoiseTerms,
    pub max_iters: usize,
    /// The interpolation grid has `fine_factor * k` times.
    pub fine_factor: usize,
    /// Each timed trial reports the fastest of this many runs.
    pub timing_repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            k_meas: (3..=15).collect(),
            trials: 50,
            seed: 1,
            duration: 10.0,
            profile: "sinusoidal".into(),
            velocity: [0.5, 0.0, 0.0, 0.0, 0.0, 0.1],
            meas_sigma_trans: 0.05,
            meas_sigma_rot: 0.02,
            qc_linear: 0.1,
            qc_angular: 0.05,
            p0_pose: 1e-6,
            p0_vel: 1e-2,
            n_sub: 10,
            noise_terms: NoiseTerms::TwoTerm,
            max_iters: 50,
            fine_factor: 20,
            timing_repeats: 3,
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config, or the `config` object of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let inner = v.get_mut("config").map(serde_json::Value::take).unwrap_or(v);
            serde_json::from_value(inner).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.k_meas.is_empty() || self.k_meas.iter().any(|&k| k < 2) {
            return bad("k_meas must list values of at least 2".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_sub == 0 || self.fine_factor == 0 || self.max_iters == 0 || self.timing_repeats == 0 {
            return bad("n_sub, fine_factor, max_iters and timing_repeats must be positive".into());
        }
        for (name, v) in [
            ("duration", self.duration),
            ("meas_sigma_trans", self.meas_sigma_trans),
            ("meas_sigma_rot", self.meas_sigma_rot),
            ("qc_linear", self.qc_linear),
            ("qc_angular", self.qc_angular),
            ("p0_pose", self.p0_pose),
            ("p0_vel", self.p0_vel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        self.profile()?;
        Ok(())
    }

    pub fn profile(&self) -> Result<Profile> {
        let w = Twist::from_column_slice(&self.velocity);
        match self.profile.as_str() {
            "sinusoidal" => Ok(Profile::default_sinusoidal()),
            "constant" => Ok(Profile::Constant(w)),
            "zero" => Ok(Profile::Zero),
            "sampled-prior" => Ok(Profile::SampledPrior(w)),
            other => Err(Error::Config(format!("unknown profile '{other}'"))),
        }
    }

    pub fn qc(&self) -> Result<QcSpec> {
        let (l, a) = (self.qc_linear, self.qc_angular);
        QcSpec::diagonal([l, l, l, a, a, a]).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn meas_cov(&self) -> Matrix6<f64> {
        let (t, r) = (self.meas_sigma_trans.powi(2), self.meas_sigma_rot.powi(2));
        Matrix6::from_diagonal(&Twist::new(t, t, t, r, r, r))
    }

    pub fn p0(&self) -> Matrix12 {
        Matrix12::from_fn(|i, j| match (i == j, i < 6) {
            (true, true) => self.p0_pose,
            (true, false) => self.p0_vel,
            _ => 0.0,
        })
    }

    pub fn noise(&self) -> NoiseOptions {
        NoiseOptions { n_sub: self.n_sub, terms: self.noise_terms }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig { max_iters: self.max_iters, ..SolverConfig::default() }
    }

    /// Scenario for one sweep point. The ground truth depends only on the
    /// base seed, so every trial shares it.
    pub fn scenario(&self, k_meas: usize) -> Result<Scenario> {
        let s = Scenario {
            duration: self.duration,
            k_meas,
            profile: self.profile()?,
            start: Pose::identity(),
            meas_cov: self.meas_cov(),
            qc: self.qc()?,
            seed: self.seed,
        };
        s.validate()?;
        Ok(s)
    }
}
