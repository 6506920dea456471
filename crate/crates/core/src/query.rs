//! Posterior mean and covariance at times between knots.
//!
//! Under the Magnus prior a virtual state is inserted at the query time and
//! eliminated against its two bracketing knots, which stay fixed at their
//! converged values. Under the stitched LTI prior the classical closed-form
//! interpolation in the local variables of the bracket is used.

use nalgebra::{Matrix6, SMatrix};

use crate::error::{Error, Result};
use crate::linalg::{block2, spd_inverse, stack, symmetrize, Matrix12};
use crate::magnus::MagnusOrder;
use crate::prior::{build_prior_factor, wnoa_covariance, Knot, Method, NoiseOptions, PriorFactor, QcSpec};
use crate::se3::{
    adjoint, exp_map, left_jacobian, left_jacobian_inv, left_jacobian_inv_product_derivative,
    left_jacobian_product_derivative, log_map, Twist,
};
use crate::solver::TrajectoryEstimate;

/// Maximum Gauss-Newton iterations for the query mean.
pub const QUERY_MAX_ITERS: usize = 20;
/// Step threshold for the query mean.
pub const QUERY_STEP_TOL: f64 = 1e-10;

/// Interpolated state with its marginal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub t: f64,
    pub knot: Knot,
    pub p: Matrix12,
}

/// The bracketing knots of a query and their joint posterior.
#[derive(Debug, Clone)]
pub struct QueryContext {
    pub a: Knot,
    pub b: Knot,
    pub p_a: Matrix12,
    pub p_b: Matrix12,
    /// Cross-covariance between `b` and `a`.
    pub p_ba: Matrix12,
    pub qc: QcSpec,
    pub order: MagnusOrder,
    pub noise: NoiseOptions,
}

impl QueryContext {
    /// Context for the bracket of `t` in a Magnus-prior estimate.
    pub fn from_estimate(est: &TrajectoryEstimate, t: f64) -> Result<Self> {
        let order = match est.method {
            Method::Magnus(o) => o,
            Method::Steam => return Err(Error::InvalidGraph("Magnus query on a stitched-LTI estimate".into())),
        };
        let k = bracket_or_err(est, t)?;
        Ok(QueryContext {
            a: est.knots[k],
            b: est.knots[k + 1],
            p_a: est.p[k],
            p_b: est.p[k + 1],
            p_ba: est.p_cross[k],
            qc: est.qc,
            order,
            noise: est.noise,
        })
    }

    fn joint(&self) -> SMatrix<f64, 24, 24> {
        let mut j = SMatrix::<f64, 24, 24>::zeros();
        j.fixed_view_mut::<12, 12>(0, 0).copy_from(&self.p_a);
        j.fixed_view_mut::<12, 12>(12, 12).copy_from(&self.p_b);
        j.fixed_view_mut::<12, 12>(12, 0).copy_from(&self.p_ba);
        j.fixed_view_mut::<12, 12>(0, 12).copy_from(&self.p_ba.transpose());
        j
    }

    fn check(&self, tau: f64) -> Result<()> {
        if tau > self.a.t && tau < self.b.t {
            Ok(())
        } else {
            Err(Error::TimeOutOfInterval { t: tau, start: self.a.t, end: self.b.t })
        }
    }

    fn sub_noise(&self, len: f64) -> NoiseOptions {
        let dt = self.b.t - self.a.t;
        let n_sub = ((self.noise.n_sub as f64 * len / dt).round() as usize).max(2);
        NoiseOptions { n_sub, terms: self.noise.terms }
    }

    /// The two sub-factors `a → τ` and `τ → b` linearized at `mid`.
    pub fn sub_factors(&self, mid: &Knot) -> Result<(PriorFactor, PriorFactor)> {
        let f1 = build_prior_factor(&self.a, mid, &self.qc, self.order, self.sub_noise(mid.t - self.a.t))?;
        let f2 = build_prior_factor(mid, &self.b, &self.qc, self.order, self.sub_noise(self.b.t - mid.t))?;
        Ok((f1, f2))
    }
}

fn bracket_or_err(est: &TrajectoryEstimate, t: f64) -> Result<usize> {
    est.bracket(t).ok_or_else(|| Error::TimeOutOfInterval {
        t,
        start: est.knots.first().map_or(f64::NAN, |k| k.t),
        end: est.knots.last().map_or(f64::NAN, |k| k.t),
    })
}

/// Conditional information `Σ⁻¹ = E₁ᵀQ₁⁻¹E₁ + F₂ᵀQ₂⁻¹F₂` of the query state.
fn query_information(f1: &PriorFactor, f2: &PriorFactor) -> Matrix12 {
    symmetrize(&(f1.jac_b.transpose() * f1.info * f1.jac_b + f2.jac_a.transpose() * f2.info * f2.jac_a))
}

/// Constant-velocity extrapolation from knot `a` to `tau`.
pub fn extrapolate(a: &Knot, tau: f64) -> Knot {
    Knot::new(tau, exp_map(&(a.w * (tau - a.t))) * a.pose, a.w)
}

/// Posterior mean at `tau` with the bracketing knots held fixed.
pub fn query_mean(ctx: &QueryContext, tau: f64, init: Option<Knot>) -> Result<Knot> {
    ctx.check(tau)?;
    let mut mid = init.unwrap_or_else(|| extrapolate(&ctx.a, tau));
    mid.t = tau;
    let mut last_step = f64::INFINITY;
    for _ in 0..QUERY_MAX_ITERS {
        let (f1, f2) = ctx.sub_factors(&mid)?;
        let info = query_information(&f1, &f2);
        let rhs = f1.jac_b.transpose() * f1.info * f1.e_op - f2.jac_a.transpose() * f2.info * f2.e_op;
        let step = info.cholesky().ok_or(Error::SingularSystem { block: 0 })?.solve(&rhs);
        mid = mid.perturbed(&step);
        last_step = step.amax();
        if last_step < QUERY_STEP_TOL {
            return Ok(mid);
        }
    }
    Err(Error::NotConverged { iterations: QUERY_MAX_ITERS, last_step })
}

/// Interpolation gains `(Σ, Λ, Ψ)` at a converged query mean: the query
/// perturbation is `Λ ε_a + Ψ ε_b` plus noise of covariance `Σ`.
pub fn query_gains(ctx: &QueryContext, mean: &Knot) -> Result<(Matrix12, Matrix12, Matrix12)> {
    let (f1, f2) = ctx.sub_factors(mean)?;
    let sigma = spd_inverse(&query_information(&f1, &f2)).ok_or(Error::NonPositiveDefiniteQ)?;
    let lambda = sigma * f1.jac_b.transpose() * f1.info * f1.jac_a;
    let psi = sigma * f2.jac_a.transpose() * f2.info * f2.jac_b;
    Ok((symmetrize(&sigma), lambda, psi))
}

/// Posterior covariance at a converged query mean.
pub fn query_covariance(ctx: &QueryContext, mean: &Knot) -> Result<Matrix12> {
    ctx.check(mean.t)?;
    let (sigma, lambda, psi) = query_gains(ctx, mean)?;
    let mut gain = SMatrix::<f64, 12, 24>::zeros();
    gain.fixed_view_mut::<12, 12>(0, 0).copy_from(&lambda);
    gain.fixed_view_mut::<12, 12>(0, 12).copy_from(&psi);
    Ok(symmetrize(&(sigma + gain * ctx.joint() * gain.transpose())))
}

/// Interpolated state under the stitched LTI prior.
pub fn query_steam(est: &TrajectoryEstimate, tau: f64) -> Result<QueryResult> {
    let k = bracket_or_err(est, tau)?;
    let (a, b) = (&est.knots[k], &est.knots[k + 1]);
    let qc = &est.qc;
    let dt = b.t - a.t;
    let (s1, s2) = (tau - a.t, b.t - tau);

    let gamma = log_map(&(b.pose * a.pose.inverse()))?;
    let jinv = left_jacobian_inv(&gamma)?;
    let jinv_neg = left_jacobian_inv(&-gamma)?;
    let x_a = stack(&Twist::zeros(), &a.w);
    let x_b = stack(&gamma, &(jinv * b.w));

    let i6 = Matrix6::identity();
    let transition = |s: f64| block2(&i6, &(i6 * s), &Matrix6::zeros(), &i6);
    let q_tau = wnoa_covariance(s1, qc);
    let q_ab = wnoa_covariance(dt, qc);
    let q_ab_inv = spd_inverse(&q_ab).ok_or(Error::NonPositiveDefiniteQ)?;
    let psi = q_tau * transition(s2).transpose() * q_ab_inv;
    let lambda = transition(s1) - psi * transition(dt);
    let x_tau = lambda * x_a + psi * x_b;
    let xi: Twist = x_tau.fixed_rows::<6>(0).into_owned();
    let xi_dot: Twist = x_tau.fixed_rows::<6>(6).into_owned();
    let j_xi = left_jacobian(&xi);
    let knot = Knot::new(tau, exp_map(&xi) * a.pose, j_xi * xi_dot);

    // Sensitivities of the local states to the global perturbations.
    let d_gamma = left_jacobian_inv_product_derivative(&gamma, &b.w)?;
    let z = Matrix6::zeros();
    let sel_a = block2(&z, &z, &z, &i6);
    let c_a = block2(&-jinv_neg, &z, &(-d_gamma * jinv_neg), &z);
    let c_b = block2(&jinv, &z, &(d_gamma * jinv), &jinv);
    let lift = block2(&j_xi, &z, &left_jacobian_product_derivative(&xi, &xi_dot), &j_xi);
    let carry = block2(&adjoint(&exp_map(&xi)), &z, &z, &z);
    let g_a = lift * (lambda * sel_a + psi * c_a) + carry;
    let g_b = lift * psi * c_b;

    let sigma_local = symmetrize(&(q_tau - psi * transition(s2) * q_tau));
    let mut gain = SMatrix::<f64, 12, 24>::zeros();
    gain.fixed_view_mut::<12, 12>(0, 0).copy_from(&g_a);
    gain.fixed_view_mut::<12, 12>(0, 12).copy_from(&g_b);
    let mut joint = SMatrix::<f64, 24, 24>::zeros();
    joint.fixed_view_mut::<12, 12>(0, 0).copy_from(&est.p[k]);
    joint.fixed_view_mut::<12, 12>(12, 12).copy_from(&est.p[k + 1]);
    joint.fixed_view_mut::<12, 12>(12, 0).copy_from(&est.p_cross[k]);
    joint.fixed_view_mut::<12, 12>(0, 12).copy_from(&est.p_cross[k].transpose());
    let p = symmetrize(&(lift * sigma_local * lift.transpose() + gain * joint * gain.transpose()));
    Ok(QueryResult { t: tau, knot, p })
}

/// Interpolates an estimate at `tau` with the method it was solved with.
///
/// Times that coincide with a knot return the knot and its marginal.
pub fn query(est: &TrajectoryEstimate, tau: f64) -> Result<QueryResult> {
    let k = bracket_or_err(est, tau)?;
    for i in [k, k + 1] {
        if est.knots[i].t == tau {
            return Ok(QueryResult { t: tau, knot: est.knots[i], p: est.p[i] });
        }
    }
    match est.method {
        Method::Steam => query_steam(est, tau),
        Method::Magnus(_) => {
            let ctx = QueryContext::from_estimate(est, tau)?;
            let knot = query_mean(&ctx, tau, None)?;
            let p = query_covariance(&ctx, &knot)?;
            Ok(QueryResult { t: tau, knot, p })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{min_eigenvalue, Vector12};
    use crate::prior::{raw_error, steam_error};
    use crate::solver::{solve_gauss_newton, FactorGraph, InitialPrior, SolverConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_twist(rng: &mut impl Rng, scale: f64) -> Twist {
        Twist::from_fn(|_, _| rng.random_range(-scale..scale))
    }

    fn p0() -> Matrix12 {
        let mut d = [1e-6; 12];
        d[6..].fill(1e-2);
        Matrix12::from_diagonal(&Vector12::from(d))
    }

    fn pose_gap(a: &Knot, b: &Knot) -> f64 {
        log_map(&(a.pose * b.pose.inverse())).unwrap().norm()
    }

    /// Solved graph with measurements on a curved path.
    fn solved(method: Method, times: &[f64], seed: u64) -> (FactorGraph, TrajectoryEstimate) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = |t: f64| Twist::new(0.8, 0.1 * t.sin(), 0.0, 0.1, 0.2 * t.cos(), 0.3 * (0.7 * t).sin());
        let truth: Vec<Knot> = times
            .iter()
            .map(|&t| Knot::new(t, exp_map(&(w(t) * t)), w(t)))
            .collect();
        let measurements = truth
            .iter()
            .enumerate()
            .map(|(i, k)| (i, exp_map(&random_twist(&mut rng, 0.02)) * k.pose))
            .collect();
        let g = FactorGraph {
            knots: truth.clone(),
            measurements,
            meas_cov: Matrix6::identity() * 4e-4,
            initial: Some(InitialPrior { knot: truth[0], p0: p0() }),
            method,
            qc: QcSpec::isotropic(1.0).unwrap(),
            noise: NoiseOptions::default(),
        };
        let est = solve_gauss_newton(&g, &SolverConfig::default()).unwrap();
        assert!(est.converged);
        (g, est)
    }

    #[test]
    fn prior_only_midpoint_is_on_the_mean() {
        let k0 = Knot::new(0.0, exp_map(&Twist::new(0.0, 1.0, 0.0, 0.3, 0.0, 0.0)), Twist::new(0.5, 0.0, 0.1, 0.0, 0.2, -0.1));
        for order in [MagnusOrder::ONE, MagnusOrder::TWO, MagnusOrder::THREE] {
            let g = FactorGraph {
                knots: vec![k0, Knot::new(1.0, k0.pose, k0.w)],
                measurements: vec![],
                meas_cov: Matrix6::identity(),
                initial: Some(InitialPrior { knot: k0, p0: p0() }),
                method: Method::Magnus(order),
                qc: QcSpec::isotropic(1.0).unwrap(),
                noise: NoiseOptions::default(),
            };
            let est = solve_gauss_newton(&g, &SolverConfig::default()).unwrap();
            let ctx = QueryContext::from_estimate(&est, 0.5).unwrap();
            let mid = query_mean(&ctx, 0.5, None).unwrap();
            assert!(raw_error(&ctx.a, &mid, order).unwrap().amax() < 1e-9);
            assert!(raw_error(&mid, &ctx.b, order).unwrap().amax() < 1e-9);
        }
    }

    #[test]
    fn continuity_at_the_ends() {
        let times: Vec<f64> = (0..4).map(|i| i as f64 * 0.5).collect();
        for method in Method::ALL {
            let (_, est) = solved(method, &times, 70);
            for (tau, k) in [(0.5 + 1e-6, 1), (1.0 - 1e-6, 2)] {
                let q = query(&est, tau).unwrap();
                assert!(pose_gap(&q.knot, &est.knots[k]) < 1e-4, "{method}");
                assert!((q.knot.w - est.knots[k].w).amax() < 1e-4, "{method}");
            }
            let q = query(&est, 1.0).unwrap();
            assert_eq!(q.knot, est.knots[2]);
        }
    }

    #[test]
    fn out_of_range_queries() {
        let times = [0.0, 0.5, 1.0];
        let (_, est) = solved(Method::Magnus(MagnusOrder::ONE), &times, 71);
        assert!(matches!(query(&est, 1.5), Err(Error::TimeOutOfInterval { .. })));
        let ctx = QueryContext::from_estimate(&est, 0.2).unwrap();
        assert!(matches!(query_mean(&ctx, 0.5, None), Err(Error::TimeOutOfInterval { .. })));
    }

    #[test]
    fn covariance_dominates_conditional_term() {
        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.5).collect();
        for order in [MagnusOrder::ONE, MagnusOrder::THREE] {
            let (_, est) = solved(Method::Magnus(order), &times, 72);
            for tau in [0.1, 0.75, 1.3, 1.95] {
                let ctx = QueryContext::from_estimate(&est, tau).unwrap();
                let mean = query_mean(&ctx, tau, None).unwrap();
                let p = query_covariance(&ctx, &mean).unwrap();
                let (sigma, _, _) = query_gains(&ctx, &mean).unwrap();
                assert!(min_eigenvalue(&(p - sigma)) > -1e-10);
                assert!(min_eigenvalue(&p) > 0.0);
            }
        }
    }

    #[test]
    fn vanishing_process_noise_leaves_only_interpolated_uncertainty() {
        let times = [0.0, 0.5, 1.0];
        let (mut g, _) = solved(Method::Magnus(MagnusOrder::TWO), &times, 73);
        g.qc = QcSpec::isotropic(1e-12).unwrap();
        let est = solve_gauss_newton(&g, &SolverConfig::default()).unwrap();
        let ctx = QueryContext::from_estimate(&est, 0.3).unwrap();
        let mean = query_mean(&ctx, 0.3, None).unwrap();
        let p = query_covariance(&ctx, &mean).unwrap();
        let (sigma, _, _) = query_gains(&ctx, &mean).unwrap();
        assert!(sigma.norm() < 1e-6 * p.norm());
    }

    #[test]
    fn gains_match_mean_sensitivity() {
        // Perturbing the bracketing knots moves the query mean by Λ ε_a + Ψ ε_b.
        // The bracket lies on the prior mean, so every sub-factor error vanishes.
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        for order in [MagnusOrder::ONE, MagnusOrder::THREE] {
            let a = Knot::new(0.0, exp_map(&random_twist(&mut rng, 1.0)), random_twist(&mut rng, 0.8));
            let b = Knot::new(0.6, exp_map(&(a.w * 0.6)) * a.pose, a.w);
            let ctx = QueryContext {
                a,
                b,
                p_a: Matrix12::identity(),
                p_b: Matrix12::identity(),
                p_ba: Matrix12::zeros(),
                qc: QcSpec::isotropic(1.0).unwrap(),
                order,
                noise: NoiseOptions::default(),
            };
            let tau = 0.25;
            let mean = query_mean(&ctx, tau, None).unwrap();
            let (_, lambda, psi) = query_gains(&ctx, &mean).unwrap();
            let h = 1e-5;
            for side in 0..2 {
                for i in 0..12 {
                    let mut d = Vector12::zeros();
                    d[i] = h;
                    let shifted = |s: f64| {
                        let mut c = ctx.clone();
                        if side == 0 {
                            c.a = c.a.perturbed(&(d * s));
                        } else {
                            c.b = c.b.perturbed(&(d * s));
                        }
                        let m = query_mean(&c, tau, Some(mean)).unwrap();
                        stack(&log_map(&(m.pose * mean.pose.inverse())).unwrap(), &(m.w - mean.w))
                    };
                    let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
                    let gain = if side == 0 { lambda.column(i) } else { psi.column(i) };
                    assert!((fd - gain).amax() < 1e-6, "side {side} col {i}: {}", (fd - gain).amax());
                }
            }
        }
    }

    #[test]
    fn eliminating_the_query_state_recovers_the_factor() {
        // Constant velocity keeps every factor error at zero and makes the
        // sub-interval noise grids line up with the full one.
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let qc = QcSpec::diagonal([0.5, 0.7, 0.3, 0.2, 0.4, 0.6]).unwrap();
        for order in [MagnusOrder::ONE, MagnusOrder::TWO, MagnusOrder::THREE] {
            let a = Knot::new(0.0, exp_map(&random_twist(&mut rng, 1.0)), random_twist(&mut rng, 0.8));
            let b = Knot::new(0.8, exp_map(&(a.w * 0.8)) * a.pose, a.w);
            let ctx = QueryContext {
                a,
                b,
                p_a: Matrix12::identity(),
                p_b: Matrix12::identity(),
                p_ba: Matrix12::zeros(),
                qc,
                order,
                noise: NoiseOptions::default(),
            };
            let mid = query_mean(&ctx, 0.24, None).unwrap();
            let (f1, f2) = ctx.sub_factors(&mid).unwrap();
            // Information over (a, τ, b); the factors linearize as F ε_a − E ε_b.
            let mut h = SMatrix::<f64, 36, 36>::zeros();
            for (f, ia, ib) in [(&f1, 0, 12), (&f2, 12, 24)] {
                let mut j = SMatrix::<f64, 12, 36>::zeros();
                j.fixed_view_mut::<12, 12>(0, ia).copy_from(&f.jac_a);
                j.fixed_view_mut::<12, 12>(0, ib).copy_from(&-f.jac_b);
                h += j.transpose() * f.info * j;
            }
            let idx = |i: usize| if i < 12 { i } else { i + 12 };
            let h_ab = SMatrix::<f64, 24, 24>::from_fn(|r, c| h[(idx(r), idx(c))]);
            let h_tt = h.fixed_view::<12, 12>(12, 12).into_owned();
            let h_abt = SMatrix::<f64, 24, 12>::from_fn(|r, c| h[(idx(r), 12 + c)]);
            let reduced = h_ab - h_abt * spd_inverse(&h_tt).unwrap() * h_abt.transpose();

            let f = build_prior_factor(&a, &b, &qc, order, NoiseOptions::default()).unwrap();
            let mut j = SMatrix::<f64, 12, 24>::zeros();
            j.fixed_view_mut::<12, 12>(0, 0).copy_from(&f.jac_a);
            j.fixed_view_mut::<12, 12>(0, 12).copy_from(&-f.jac_b);
            let direct = j.transpose() * f.info * j;
            assert!((reduced - direct).amax() < 1e-9 * direct.amax(), "{:e}", (reduced - direct).amax());
        }
    }

    #[test]
    fn steam_query_examples() {
        let w = Twist::new(0.6, -0.1, 0.2, 0.1, 0.3, -0.2);
        let start = exp_map(&Twist::new(0.5, 0.0, 1.0, 0.0, 0.2, 0.1));
        let knots: Vec<Knot> = (0..3).map(|i| {
            let t = i as f64 * 0.6;
            Knot::new(t, exp_map(&(w * t)) * start, w)
        }).collect();
        let g = FactorGraph {
            knots: knots.clone(),
            measurements: vec![],
            meas_cov: Matrix6::identity(),
            initial: Some(InitialPrior { knot: knots[0], p0: p0() }),
            method: Method::Steam,
            qc: QcSpec::isotropic(1.0).unwrap(),
            noise: NoiseOptions::default(),
        };
        let est = solve_gauss_newton(&g, &SolverConfig::default()).unwrap();
        for tau in [0.1, 0.6, 0.9, 1.15] {
            let q = query_steam(&est, tau).unwrap();
            let expected = exp_map(&(w * tau)) * start;
            assert!((q.knot.pose.matrix() - expected.matrix()).amax() < 1e-9);
            assert!((q.knot.w - w).amax() < 1e-9);
        }
        let q = query_steam(&est, 0.0).unwrap();
        assert!((q.knot.pose.matrix() - est.knots[0].pose.matrix()).amax() < 1e-14);
        assert!((q.knot.w - est.knots[0].w).amax() < 1e-14);
        assert!((q.p - est.p[0]).amax() < 1e-12 * est.p[0].amax());
    }

    #[test]
    fn steam_query_matches_fine_resolve() {
        let times: Vec<f64> = (0..4).map(|i| i as f64 * 0.5).collect();
        let (g, est) = solved(Method::Steam, &times, 75);
        let tau = 0.8;
        let q = query_steam(&est, tau).unwrap();
        let mut fine = g.clone();
        fine.knots.insert(2, q.knot);
        for m in &mut fine.measurements {
            if m.0 >= 2 {
                m.0 += 1;
            }
        }
        let re = solve_gauss_newton(&fine, &SolverConfig::default()).unwrap();
        assert!(pose_gap(&re.knots[2], &q.knot) < 1e-3);
        assert!(steam_error(&re.knots[1], &re.knots[2]).is_ok());
    }

    #[test]
    fn steam_query_covariance_matches_finite_differences() {
        // The covariance transport uses the exact sensitivity of the lifted
        // interpolant to the bracketing knots.
        let times: Vec<f64> = (0..3).map(|i| i as f64 * 0.5).collect();
        let (_, est) = solved(Method::Steam, &times, 76);
        let tau = 0.35;
        let base = query_steam(&est, tau).unwrap();
        let h = 1e-6;
        let mut p_only_a = est.clone();
        // Isolate the sensitivity to knot 0 by giving it unit covariance.
        for p in &mut p_only_a.p {
            *p = Matrix12::zeros();
        }
        for c in &mut p_only_a.p_cross {
            *c = Matrix12::zeros();
        }
        p_only_a.p[0] = Matrix12::identity();
        let q = query_steam(&p_only_a, tau).unwrap();
        let mut g = Matrix12::zeros();
        for i in 0..12 {
            let mut d = Vector12::zeros();
            d[i] = h;
            let eval = |s: f64| {
                let mut e = est.clone();
                e.knots[0] = e.knots[0].perturbed(&(d * s));
                let r = query_steam(&e, tau).unwrap();
                stack(&log_map(&(r.knot.pose * base.knot.pose.inverse())).unwrap(), &(r.knot.w - base.knot.w))
            };
            g.set_column(i, &((eval(1.0) - eval(-1.0)) / (2.0 * h)));
        }
        let zero_p = {
            let mut e = p_only_a.clone();
            e.p[0] = Matrix12::zeros();
            query_steam(&e, tau).unwrap().p
        };
        let transported = q.p - zero_p;
        assert!((transported - g * g.transpose()).amax() < 1e-6, "{}", (transported - g * g.transpose()).amax());
    }
}
