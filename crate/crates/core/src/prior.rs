//! Motion-prior, measurement and initial-condition factors.
//!
//! Every factor is a linearization about the current operating point.
//! Binary motion-prior factors linearize as
//! `e ≈ e_op + jac_a·ε_a − jac_b·ε_b`, unary factors as `e ≈ e_op − jac·ε`,
//! where `ε` stacks the left pose perturbation and the velocity increment.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix6, SMatrix, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block2, spd_inverse, stack, symmetrize, upper_unit, Matrix12, Vector12};
use crate::magnus::{
    endpoint_jacobians, exp_perturbation, magnus_matrix_partial, magnus_vector,
    perturbation_system_matrix, Direction, MagnusOrder,
};
use crate::se3::{adjoint, exp_map, left_jacobian, left_jacobian_inv, left_jacobian_inv_product_derivative, log_map, Pose, Twist};

/// A stamped estimation state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub pose: Pose,
    /// Body-centric velocity.
    pub w: Twist,
}

impl Knot {
    pub fn new(t: f64, pose: Pose, w: Twist) -> Self {
        Knot { t, pose, w }
    }

    /// Applies a 12-dim perturbation: `T ← Exp(δ_T) T`, `w ← w + δ_w`.
    pub fn perturbed(&self, delta: &Vector12) -> Knot {
        let dt: Twist = delta.fixed_rows::<6>(0).into_owned();
        let dw: Twist = delta.fixed_rows::<6>(6).into_owned();
        Knot { t: self.t, pose: exp_map(&dt) * self.pose, w: self.w + dw }
    }
}

/// Power spectral density of the white-noise acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcSpec {
    qc: Matrix6<f64>,
}

impl QcSpec {
    pub fn new(qc: Matrix6<f64>) -> Result<Self> {
        if (qc - qc.transpose()).amax() > 1e-12 * (1.0 + qc.amax()) {
            return Err(Error::NotPositiveDefinite("Qc must be symmetric"));
        }
        if qc.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("Qc"));
        }
        Ok(QcSpec { qc })
    }

    pub fn isotropic(c: f64) -> Result<Self> {
        QcSpec::new(Matrix6::identity() * c)
    }

    pub fn diagonal(d: [f64; 6]) -> Result<Self> {
        QcSpec::new(Matrix6::from_diagonal(&Vector6::from(d)))
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.qc
    }
}

/// How many Taylor terms of the per-subinterval covariance to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseTerms {
    Leading,
    #[default]
    TwoTerm,
}

/// Knobs for the process-noise integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseOptions {
    pub n_sub: usize,
    pub terms: NoiseTerms,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        NoiseOptions { n_sub: 10, terms: NoiseTerms::TwoTerm }
    }
}

/// Choice of motion prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Stitched local LTI priors.
    Steam,
    /// Global LTV prior with a truncated Magnus expansion.
    Magnus(MagnusOrder),
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Steam,
        Method::Magnus(MagnusOrder::ONE),
        Method::Magnus(MagnusOrder::TWO),
        Method::Magnus(MagnusOrder::THREE),
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Steam => "steam",
            Method::Magnus(o) => match o.get() {
                1 => "magnus1",
                2 => "magnus2",
                3 => "magnus3",
                _ => "magnus4",
            },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steam" => Ok(Method::Steam),
            "magnus1" => Ok(Method::Magnus(MagnusOrder::ONE)),
            "magnus2" => Ok(Method::Magnus(MagnusOrder::TWO)),
            "magnus3" => Ok(Method::Magnus(MagnusOrder::THREE)),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Linearized binary motion-prior factor between knots `a` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorFactor {
    pub e_op: Vector12,
    /// Coefficient of `ε_b` (enters with a minus sign).
    pub jac_b: Matrix12,
    /// Coefficient of `ε_a`.
    pub jac_a: Matrix12,
    /// Covariance of the factor error.
    pub q: Matrix12,
    /// Covariance of the perturbation-state transition noise, before the
    /// change of variables into the factor error.
    pub q_pert: Matrix12,
    /// `q⁻¹`.
    pub info: Matrix12,
    pub t_a: f64,
    pub t_b: f64,
}

/// Linearized unary pose-measurement factor.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasFactor {
    pub index: usize,
    pub e_op: Twist,
    /// Coefficient of `ε` (enters with a minus sign).
    pub jac: SMatrix<f64, 6, 12>,
    pub r: Matrix6<f64>,
    pub info: Matrix6<f64>,
}

/// Linearized unary prior on the full state of one knot.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFactor {
    pub index: usize,
    pub e_op: Vector12,
    /// Coefficient of `ε` (enters with a minus sign).
    pub jac: Matrix12,
    pub p0: Matrix12,
    pub info: Matrix12,
}

fn check_interval(a: &Knot, b: &Knot) -> Result<f64> {
    let dt = b.t - a.t;
    if dt > 0.0 && dt.is_finite() {
        Ok(dt)
    } else {
        Err(Error::InvalidDt(dt))
    }
}

/// Error between two knots under the Magnus prior:
/// `(Log(T_b T_a⁻¹ Exp(−ψ)); w_b − w_a)`.
pub fn raw_error(a: &Knot, b: &Knot, order: MagnusOrder) -> Result<Vector12> {
    let dt = check_interval(a, b)?;
    let psi = magnus_vector(&a.w, &b.w, dt, order)?.psi;
    let e_t = log_map(&(b.pose * a.pose.inverse() * exp_map(&-psi)))?;
    Ok(stack(&e_t, &(b.w - a.w)))
}

/// Error between two knots under the stitched LTI prior:
/// `(γ − dt·w_a; J(γ)⁻¹ w_b − w_a)` with `γ = Log(T_b T_a⁻¹)`.
pub fn steam_error(a: &Knot, b: &Knot) -> Result<Vector12> {
    let dt = check_interval(a, b)?;
    let gamma = log_map(&(b.pose * a.pose.inverse()))?;
    let jinv = left_jacobian_inv(&gamma)?;
    Ok(stack(&(gamma - a.w * dt), &(jinv * b.w - a.w)))
}

/// Covariance accumulated over one subinterval of length `h` with constant
/// velocity `w`.
fn subinterval_noise(h: f64, w: &Twist, qc: &Matrix6<f64>, terms: NoiseTerms) -> Matrix12 {
    let (h2, h3) = (h * h, h * h * h);
    let mut tl = qc * (h3 / 3.0);
    let mut tr = qc * (h2 / 2.0);
    if terms == NoiseTerms::TwoTerm {
        let wq = crate::se3::curly_wedge(w) * qc;
        tl += (wq + wq.transpose()) * (h3 * h / 8.0);
        tr += wq * (h3 / 6.0);
    }
    block2(&tl, &tr, &tr.transpose(), &(qc * h))
}

/// Process-noise covariance of the perturbation state over `[a.t, b.t]`,
/// with the system matrix linearized about the knots' velocities.
pub fn process_noise_cov(
    a: &Knot,
    b: &Knot,
    qc: &QcSpec,
    order: MagnusOrder,
    opts: NoiseOptions,
) -> Result<Matrix12> {
    let dt = check_interval(a, b)?;
    if opts.n_sub == 0 {
        return Err(Error::Config("n_sub must be at least 1".into()));
    }
    let (a_a, a_b) = (perturbation_system_matrix(&a.w), perturbation_system_matrix(&b.w));
    let h = dt / opts.n_sub as f64;
    let mut total = Matrix12::zeros();
    for n in 0..opts.n_sub {
        let mid = (n as f64 + 0.5) / opts.n_sub as f64;
        let w_n = a.w + (b.w - a.w) * mid;
        let q_n = subinterval_noise(h, &w_n, qc.matrix(), opts.terms);
        let s_n = if n + 1 == opts.n_sub { b.t } else { a.t + (n + 1) as f64 * h };
        let phi = exp_perturbation(&magnus_matrix_partial(
            &a_a,
            &a_b,
            a.t,
            b.t,
            s_n,
            Direction::Reversed,
            order,
        )?);
        total += phi * q_n * phi.transpose();
    }
    Ok(symmetrize(&total))
}

/// State-transition matrix of the perturbation state,
/// `[[Ad(Exp ψ), J(ψ)(M_k + M_{k−1})], [0, I]]`.
pub fn transition_matrix(a: &Knot, b: &Knot, order: MagnusOrder) -> Result<Matrix12> {
    let dt = check_interval(a, b)?;
    let psi = magnus_vector(&a.w, &b.w, dt, order)?.psi;
    let m = endpoint_jacobians(&a.w, &b.w, dt, order)?;
    Ok(upper_unit(&adjoint(&exp_map(&psi)), &(left_jacobian(&psi) * m.aggregate())))
}

fn finish_covariance(q: Matrix12) -> Result<(Matrix12, Matrix12)> {
    let q = symmetrize(&q);
    let info = spd_inverse(&q).ok_or(Error::NonPositiveDefiniteQ)?;
    Ok((q, symmetrize(&info)))
}

/// Motion-prior factor under the Magnus (LTV) prior.
pub fn build_prior_factor(
    a: &Knot,
    b: &Knot,
    qc: &QcSpec,
    order: MagnusOrder,
    opts: NoiseOptions,
) -> Result<PriorFactor> {
    let order = order.for_factors()?;
    let dt = check_interval(a, b)?;
    let psi = magnus_vector(&a.w, &b.w, dt, order)?.psi;
    let m = endpoint_jacobians(&a.w, &b.w, dt, order)?;
    let e_t = log_map(&(b.pose * a.pose.inverse() * exp_map(&-psi)))?;
    let e_op = stack(&e_t, &(b.w - a.w));

    let j_psi = left_jacobian(&psi);
    let k = block2(
        &left_jacobian_inv(&e_t)?,
        &Matrix6::zeros(),
        &Matrix6::zeros(),
        &Matrix6::identity(),
    ) * upper_unit(&Matrix6::identity(), &(-j_psi * m.mk));
    let phi = upper_unit(&adjoint(&exp_map(&psi)), &(j_psi * m.aggregate()));

    let q_pert = process_noise_cov(a, b, qc, order, opts)?;
    let (q, info) = finish_covariance(k * q_pert * k.transpose())?;
    Ok(PriorFactor { e_op, jac_b: -k, jac_a: -k * phi, q, q_pert, info, t_a: a.t, t_b: b.t })
}

/// Closed-form WNOA covariance over `dt`.
pub fn wnoa_covariance(dt: f64, qc: &QcSpec) -> Matrix12 {
    let qc = qc.matrix();
    let tr = qc * (dt * dt / 2.0);
    block2(&(qc * (dt.powi(3) / 3.0)), &tr, &tr, &(qc * dt))
}

/// Motion-prior factor under the stitched local LTI prior.
pub fn build_steam_prior_factor(a: &Knot, b: &Knot, qc: &QcSpec) -> Result<PriorFactor> {
    let dt = check_interval(a, b)?;
    let gamma = log_map(&(b.pose * a.pose.inverse()))?;
    let jinv = left_jacobian_inv(&gamma)?;
    let jinv_neg = left_jacobian_inv(&-gamma)?;
    let e_op = stack(&(gamma - a.w * dt), &(jinv * b.w - a.w));
    let d = left_jacobian_inv_product_derivative(&gamma, &b.w)?;

    let id = Matrix6::identity();
    let de_db = block2(&jinv, &Matrix6::zeros(), &(d * jinv), &jinv);
    let de_da = block2(&-jinv_neg, &(-id * dt), &(-d * jinv_neg), &-id);
    let (q, info) = finish_covariance(wnoa_covariance(dt, qc))?;
    Ok(PriorFactor { e_op, jac_b: -de_db, jac_a: de_da, q_pert: q, q, info, t_a: a.t, t_b: b.t })
}

/// Builds the motion-prior factor for the chosen method.
pub fn build_factor(
    method: Method,
    a: &Knot,
    b: &Knot,
    qc: &QcSpec,
    opts: NoiseOptions,
) -> Result<PriorFactor> {
    match method {
        Method::Steam => build_steam_prior_factor(a, b, qc),
        Method::Magnus(order) => build_prior_factor(a, b, qc, order, opts),
    }
}

/// Unary pose-measurement factor, error `Log(T_meas T⁻¹)`.
pub fn build_meas_factor(index: usize, meas: &Pose, knot: &Knot, r: &Matrix6<f64>) -> Result<MeasFactor> {
    let info = spd_inverse(r).ok_or(Error::NotPositiveDefinite("measurement covariance"))?;
    let e_op = log_map(&(meas * &knot.pose.inverse()))?;
    let mut jac = SMatrix::<f64, 6, 12>::zeros();
    jac.fixed_view_mut::<6, 6>(0, 0).copy_from(&left_jacobian_inv(&-e_op)?);
    Ok(MeasFactor { index, e_op, jac, r: *r, info: symmetrize(&info) })
}

/// Unary prior on pose and velocity,
/// error `(Log(T_prior T⁻¹); w_prior − w)`.
pub fn build_initial_factor(index: usize, prior: &Knot, knot: &Knot, p0: &Matrix12) -> Result<InitialFactor> {
    let info = spd_inverse(p0).ok_or(Error::NotPositiveDefinite("initial covariance"))?;
    let e_t = log_map(&(prior.pose * knot.pose.inverse()))?;
    let e_op = stack(&e_t, &(prior.w - knot.w));
    let jac = block2(&left_jacobian_inv(&-e_t)?, &Matrix6::zeros(), &Matrix6::zeros(), &Matrix6::identity());
    Ok(InitialFactor { index, e_op, jac, p0: *p0, info: symmetrize(&info) })
}
