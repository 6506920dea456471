//! Gauss-Newton over a chain of knots.
//!
//! The graph holds knots, pose measurements and an optional prior on the
//! first knot. Factors are re-linearized every iteration; the normal
//! equations are block tridiagonal with 12×12 blocks and are solved by block
//! Cholesky, which also yields the tridiagonal part of the inverse.

use nalgebra::{Matrix6, SMatrix};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, Matrix12, Vector12};
use crate::prior::{
    build_factor, build_initial_factor, build_meas_factor, InitialFactor, Knot, MeasFactor, Method,
    NoiseOptions, PriorFactor, QcSpec,
};
use crate::se3::{exp_map, log_map, Pose, Twist};

/// Prior on the full state of the first knot.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPrior {
    pub knot: Knot,
    pub p0: Matrix12,
}

/// Chain factor graph: knots joined by motion priors, plus unary factors.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    pub knots: Vec<Knot>,
    /// Pose measurements as `(knot index, measured pose)`.
    pub measurements: Vec<(usize, Pose)>,
    pub meas_cov: Matrix6<f64>,
    pub initial: Option<InitialPrior>,
    pub method: Method,
    pub qc: QcSpec,
    pub noise: NoiseOptions,
}

/// All factors linearized at one operating point.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub priors: Vec<PriorFactor>,
    pub meas: Vec<MeasFactor>,
    pub initial: Option<InitialFactor>,
}

impl Linearization {
    /// `½ Σ eᵀ W⁻¹ e` over all factors.
    pub fn cost(&self) -> f64 {
        self.cost_under(self)
    }

    /// Cost of these errors under the weights of another linearization of
    /// the same graph.
    pub fn cost_under(&self, weights: &Linearization) -> f64 {
        let mut c = 0.0;
        for (f, w) in self.priors.iter().zip(&weights.priors) {
            c += f.e_op.dot(&(w.info * f.e_op));
        }
        for (f, w) in self.meas.iter().zip(&weights.meas) {
            c += f.e_op.dot(&(w.info * f.e_op));
        }
        if let (Some(f), Some(w)) = (&self.initial, &weights.initial) {
            c += f.e_op.dot(&(w.info * f.e_op));
        }
        0.5 * c
    }
}

impl FactorGraph {
    pub fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::InvalidGraph("no knots".into()));
        }
        for (i, w) in self.knots.windows(2).enumerate() {
            if w[1].t.partial_cmp(&w[0].t) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::InvalidGraph(format!("knot times not increasing at {}", i + 1)));
            }
        }
        if let Some((i, _)) = self.measurements.iter().find(|(i, _)| *i >= self.knots.len()) {
            return Err(Error::InvalidGraph(format!("measurement on missing knot {i}")));
        }
        if self.initial.is_none() && self.measurements.is_empty() {
            return Err(Error::InvalidGraph("no unary factor anchors the chain".into()));
        }
        Ok(())
    }

    /// Builds every factor at the given operating point.
    pub fn linearize_at(&self, knots: &[Knot]) -> Result<Linearization> {
        let priors = knots
            .windows(2)
            .map(|w| build_factor(self.method, &w[0], &w[1], &self.qc, self.noise))
            .collect::<Result<Vec<_>>>()?;
        let meas = self
            .measurements
            .iter()
            .map(|(i, m)| build_meas_factor(*i, m, &knots[*i], &self.meas_cov))
            .collect::<Result<Vec<_>>>()?;
        let initial = match &self.initial {
            Some(p) => Some(build_initial_factor(0, &p.knot, &knots[0], &p.p0)?),
            None => None,
        };
        Ok(Linearization { priors, meas, initial })
    }

    pub fn linearize(&self) -> Result<Linearization> {
        self.linearize_at(&self.knots)
    }
}

/// Symmetric block-tridiagonal matrix with 12×12 blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiag {
    pub diag: Vec<Matrix12>,
    /// `sub[k]` is the block at row `k+1`, column `k`.
    pub sub: Vec<Matrix12>,
}

impl BlockTridiag {
    pub fn zeros(n: usize) -> Self {
        BlockTridiag { diag: vec![Matrix12::zeros(); n], sub: vec![Matrix12::zeros(); n.saturating_sub(1)] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.len();
        let mut m = nalgebra::DMatrix::zeros(12 * n, 12 * n);
        for (k, d) in self.diag.iter().enumerate() {
            m.view_mut((12 * k, 12 * k), (12, 12)).copy_from(d);
        }
        for (k, s) in self.sub.iter().enumerate() {
            m.view_mut((12 * (k + 1), 12 * k), (12, 12)).copy_from(s);
            m.view_mut((12 * k, 12 * (k + 1)), (12, 12)).copy_from(&s.transpose());
        }
        m
    }
}

/// Gauss-Newton system `H δ = g` with the cost at the linearization point.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub h: BlockTridiag,
    pub g: Vec<Vector12>,
    pub cost: f64,
}

/// Accumulates `Σ JᵀW⁻¹J` and `−Σ JᵀW⁻¹e_op` over all factors.
pub fn assemble_normal_equations(lin: &Linearization, n_knots: usize) -> NormalEquations {
    let mut h = BlockTridiag::zeros(n_knots);
    let mut g = vec![Vector12::zeros(); n_knots];
    for (k, f) in lin.priors.iter().enumerate() {
        let wa = f.info * f.jac_a;
        let wb = f.info * f.jac_b;
        let we = f.info * f.e_op;
        h.diag[k] += f.jac_a.transpose() * wa;
        h.diag[k + 1] += f.jac_b.transpose() * wb;
        h.sub[k] -= f.jac_b.transpose() * wa;
        g[k] -= f.jac_a.transpose() * we;
        g[k + 1] += f.jac_b.transpose() * we;
    }
    for f in &lin.meas {
        let wj = f.info * f.jac;
        h.diag[f.index] += f.jac.transpose() * wj;
        g[f.index] += wj.transpose() * f.e_op;
    }
    if let Some(f) = &lin.initial {
        let wj = f.info * f.jac;
        h.diag[f.index] += f.jac.transpose() * wj;
        g[f.index] += wj.transpose() * f.e_op;
    }
    for d in &mut h.diag {
        *d = symmetrize(d);
    }
    NormalEquations { h, g, cost: lin.cost() }
}

/// Block Cholesky factor `H = L Lᵀ` of a block-tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    /// Lower-triangular diagonal blocks `L_kk`.
    pub diag: Vec<Matrix12>,
    /// `sub[k] = L_{k+1,k}`.
    pub sub: Vec<Matrix12>,
}

impl BlockCholesky {
    pub fn factor(h: &BlockTridiag) -> Result<Self> {
        let n = h.len();
        let mut diag = Vec::with_capacity(n);
        let mut sub = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n {
            let mut pivot = h.diag[k];
            if k > 0 {
                let l: &Matrix12 = &sub[k - 1];
                pivot -= l * l.transpose();
            }
            let lkk = symmetrize(&pivot).cholesky().ok_or(Error::SingularSystem { block: k })?.l();
            if k + 1 < n {
                // L_{k+1,k} = H_{k+1,k} L_kk⁻ᵀ, i.e. L_kk X = H_{k+1,k}ᵀ and transpose.
                let x = lkk
                    .solve_lower_triangular(&h.sub[k].transpose())
                    .ok_or(Error::SingularSystem { block: k })?;
                sub.push(x.transpose());
            }
            diag.push(lkk);
        }
        Ok(BlockCholesky { diag, sub })
    }

    pub fn solve(&self, g: &[Vector12]) -> Vec<Vector12> {
        let n = self.diag.len();
        let mut y = Vec::with_capacity(n);
        for k in 0..n {
            let mut r = g[k];
            if k > 0 {
                r -= self.sub[k - 1] * y[k - 1];
            }
            y.push(self.diag[k].solve_lower_triangular(&r).expect("nonsingular pivot"));
        }
        let mut x = vec![Vector12::zeros(); n];
        for k in (0..n).rev() {
            let mut r = y[k];
            if k + 1 < n {
                r -= self.sub[k].transpose() * x[k + 1];
            }
            x[k] = self.diag[k].tr_solve_lower_triangular(&r).expect("nonsingular pivot");
        }
        x
    }

    /// Diagonal blocks of `H⁻¹` and the blocks `(H⁻¹)_{k+1,k}`.
    pub fn tridiagonal_inverse(&self) -> (Vec<Matrix12>, Vec<Matrix12>) {
        let n = self.diag.len();
        let inv_l: Vec<Matrix12> = self
            .diag
            .iter()
            .map(|l| l.solve_lower_triangular(&Matrix12::identity()).expect("nonsingular pivot"))
            .collect();
        let mut p = vec![Matrix12::zeros(); n];
        let mut cross = vec![Matrix12::zeros(); n.saturating_sub(1)];
        // With U = Lᵀ: Σ_{k,k+1} = −U_kk⁻¹ U_{k,k+1} Σ_{k+1,k+1},
        // Σ_kk = U_kk⁻¹ (U_kk⁻ᵀ − U_{k,k+1} Σ_{k+1,k}).
        p[n - 1] = symmetrize(&(inv_l[n - 1].transpose() * inv_l[n - 1]));
        for k in (0..n.saturating_sub(1)).rev() {
            let u_inv = inv_l[k].transpose();
            let u_off = self.sub[k].transpose();
            let upper = -u_inv * u_off * p[k + 1];
            cross[k] = upper.transpose();
            p[k] = symmetrize(&(u_inv * (inv_l[k] - u_off * cross[k])));
        }
        (p, cross)
    }
}

/// Marginal covariances and adjacent cross-covariances from `H`.
pub fn recover_covariances(h: &BlockTridiag) -> Result<(Vec<Matrix12>, Vec<Matrix12>)> {
    Ok(BlockCholesky::factor(h)?.tridiagonal_inverse())
}

/// Relative slack on the frozen-weight cost before a step counts as an
/// increase.
const ACCEPT_RTOL: f64 = 1e-2;

/// Gauss-Newton settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Convergence threshold on the infinity norm of the step.
    pub step_tol: f64,
    /// Initial Levenberg damping. Zero means plain Gauss-Newton until the
    /// cost increases.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_iters: 50, step_tol: 1e-10, damping: 0.0 }
    }
}

/// Converged trajectory with its Gaussian uncertainty.
#[derive(Debug, Clone)]
pub struct TrajectoryEstimate {
    pub knots: Vec<Knot>,
    pub method: Method,
    pub qc: QcSpec,
    pub noise: NoiseOptions,
    /// Marginal covariance of each knot.
    pub p: Vec<Matrix12>,
    /// `p_cross[k]` is the cross-covariance between knots `k+1` and `k`.
    pub p_cross: Vec<Matrix12>,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the last computed step.
    pub last_step: f64,
    /// Cost at every accepted operating point, starting with the initial one.
    pub cost_history: Vec<f64>,
    /// For each accepted step, the cost before it and the cost after it
    /// under the same (pre-step) weights.
    pub step_costs: Vec<(f64, f64)>,
}

impl TrajectoryEstimate {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().unwrap_or(&f64::NAN)
    }

    /// Index `k` such that `t_k ≤ t < t_{k+1}`, if `t` lies inside the span.
    pub fn bracket(&self, t: f64) -> Option<usize> {
        let n = self.knots.len();
        if n < 2 || !(t >= self.knots[0].t && t <= self.knots[n - 1].t) {
            return None;
        }
        let i = self.knots.partition_point(|k| k.t <= t);
        Some(i.saturating_sub(1).min(n - 2))
    }
}

fn apply_step(knots: &[Knot], step: &[Vector12]) -> Vec<Knot> {
    knots.iter().zip(step).map(|(k, d)| k.perturbed(d)).collect()
}

fn add_damping(h: &BlockTridiag, lambda: f64) -> BlockTridiag {
    let mut h = h.clone();
    for d in &mut h.diag {
        for i in 0..12 {
            d[(i, i)] += lambda * (1.0 + d[(i, i)]);
        }
    }
    h
}

/// Solves the MAP problem by Gauss-Newton from the graph's knots.
///
/// Non-convergence is reported through `converged`, not as an error.
pub fn solve_gauss_newton(graph: &FactorGraph, cfg: &SolverConfig) -> Result<TrajectoryEstimate> {
    graph.validate()?;
    let n = graph.knots.len();
    let mut knots = graph.knots.clone();
    let mut lin = graph.linearize_at(&knots)?;
    let mut neq = assemble_normal_equations(&lin, n);
    let mut costs = vec![neq.cost];
    let mut step_costs = Vec::new();
    let mut lambda = cfg.damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;

    while iterations < cfg.max_iters {
        iterations += 1;
        let h = if lambda > 0.0 { add_damping(&neq.h, lambda) } else { neq.h.clone() };
        let step = BlockCholesky::factor(&h)?.solve(&neq.g);
        let step_norm = step.iter().map(|s| s.amax()).fold(0.0, f64::max);
        last_step = step_norm;
        let candidate = apply_step(&knots, &step);
        let cand_lin = graph.linearize_at(&candidate)?;
        // The prior covariances depend on the operating point; the step is
        // judged under the weights it was computed with.
        let cand_cost = cand_lin.cost_under(&lin);
        let small = step_norm < cfg.step_tol;
        if small || cand_cost <= neq.cost * (1.0 + ACCEPT_RTOL) {
            step_costs.push((neq.cost, cand_cost));
            knots = candidate;
            lin = cand_lin;
            neq = assemble_normal_equations(&lin, n);
            costs.push(neq.cost);
            if lambda > 0.0 {
                lambda = if cfg.damping > 0.0 { (lambda / 10.0).max(cfg.damping) } else { lambda / 10.0 };
                if lambda < 1e-12 {
                    lambda = cfg.damping;
                }
            }
            if small {
                converged = true;
                break;
            }
        } else {
            lambda = if lambda > 0.0 { lambda * 10.0 } else { 1e-6 };
            if lambda > 1e12 {
                break;
            }
        }
    }

    let (p, p_cross) = recover_covariances(&neq.h)?;
    Ok(TrajectoryEstimate {
        knots,
        method: graph.method,
        qc: graph.qc,
        noise: graph.noise,
        p,
        p_cross,
        iterations,
        converged,
        last_step,
        cost_history: costs,
        step_costs,
    })
}

/// Initial operating point for a solve.
///
/// Knots with a measurement start at it; the others are interpolated along
/// the geodesic between the nearest measured knots (or extrapolated at
/// constant velocity past the ends). Velocities come from finite differences
/// of neighbouring measurements.
pub fn initial_guess(times: &[f64], measurements: &[(usize, Pose)]) -> Result<Vec<Knot>> {
    let mut measured: Vec<(usize, Pose)> = measurements.to_vec();
    measured.sort_by_key(|(i, _)| *i);
    measured.dedup_by_key(|(i, _)| *i);
    if measured.is_empty() {
        return Ok(times.iter().map(|&t| Knot::new(t, Pose::identity(), Twist::zeros())).collect());
    }
    let m = measured.len();
    let segment_velocity = |j: usize| -> Result<Twist> {
        let (ia, pa) = measured[j];
        let (ib, pb) = measured[j + 1];
        Ok(log_map(&(pb * pa.inverse()))? / (times[ib] - times[ia]))
    };
    let seg: Vec<Twist> = (0..m.saturating_sub(1)).map(segment_velocity).collect::<Result<_>>()?;
    let vel_at = |j: usize| -> Twist {
        match (j.checked_sub(1).and_then(|p| seg.get(p)), seg.get(j)) {
            (Some(a), Some(b)) => (a + b) * 0.5,
            (Some(a), None) => *a,
            (None, Some(b)) => *b,
            (None, None) => Twist::zeros(),
        }
    };

    let mut knots = Vec::with_capacity(times.len());
    let mut j = 0;
    for (i, &t) in times.iter().enumerate() {
        while j + 1 < m && measured[j + 1].0 <= i {
            j += 1;
        }
        let (ia, pa) = measured[j];
        let knot = if ia == i {
            Knot::new(t, pa, vel_at(j))
        } else if i < ia || j + 1 == m {
            // Before the first or after the last measurement.
            let w = vel_at(j);
            Knot::new(t, exp_map(&(w * (t - times[ia]))) * pa, w)
        } else {
            let (ib, _) = measured[j + 1];
            let alpha = (t - times[ia]) / (times[ib] - times[ia]);
            let w = seg[j];
            let w_interp = vel_at(j) * (1.0 - alpha) + vel_at(j + 1) * alpha;
            Knot::new(t, exp_map(&(w * (t - times[ia]))) * pa, w_interp)
        };
        knots.push(knot);
    }
    Ok(knots)
}

/// Jacobian of a factor's linearized error with respect to the full stacked
/// perturbation, for dense checks.
#[doc(hidden)]
pub fn dense_jacobian(lin: &Linearization, n: usize) -> (nalgebra::DMatrix<f64>, nalgebra::DVector<f64>, nalgebra::DMatrix<f64>) {
    use nalgebra::{DMatrix, DVector};
    let rows = 12 * lin.priors.len() + 6 * lin.meas.len() + if lin.initial.is_some() { 12 } else { 0 };
    let mut j = DMatrix::zeros(rows, 12 * n);
    let mut e = DVector::zeros(rows);
    let mut w = DMatrix::zeros(rows, rows);
    let mut r = 0;
    for (k, f) in lin.priors.iter().enumerate() {
        j.view_mut((r, 12 * k), (12, 12)).copy_from(&f.jac_a);
        j.view_mut((r, 12 * (k + 1)), (12, 12)).copy_from(&-f.jac_b);
        e.rows_mut(r, 12).copy_from(&f.e_op);
        w.view_mut((r, r), (12, 12)).copy_from(&f.info);
        r += 12;
    }
    for f in &lin.meas {
        let neg: SMatrix<f64, 6, 12> = -f.jac;
        j.view_mut((r, 12 * f.index), (6, 12)).copy_from(&neg);
        e.rows_mut(r, 6).copy_from(&f.e_op);
        w.view_mut((r, r), (6, 6)).copy_from(&f.info);
        r += 6;
    }
    if let Some(f) = &lin.initial {
        j.view_mut((r, 12 * f.index), (12, 12)).copy_from(&-f.jac);
        e.rows_mut(r, 12).copy_from(&f.e_op);
        w.view_mut((r, r), (12, 12)).copy_from(&f.info);
    }
    (j, e, w)
}
