//! Magnus expansion for a system matrix that varies linearly in time between
//! two knots.
//!
//! Two families of objects live here: the SE(3) *Magnus vector* `psi`, whose
//! exponential carries the pose from one knot to the next, and the 12×12
//! *Magnus matrix* `Omega` of the perturbation dynamics, whose exponential is
//! the state-transition matrix. Both are truncated at a chosen order.

use nalgebra::{Matrix4, SMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block, commutator, upper_unit, Matrix12};
use crate::se3::{curly_vee, curly_wedge, exp_curly, left_jacobian, wedge, AdjMat, Pose, Twist};

/// Number of Magnus terms retained, in `1..=4`.
///
/// Factor construction accepts orders 1–3; order 4 is only available for
/// Magnus matrices (accuracy studies and oracles).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct MagnusOrder(u8);

impl MagnusOrder {
    pub const ONE: MagnusOrder = MagnusOrder(1);
    pub const TWO: MagnusOrder = MagnusOrder(2);
    pub const THREE: MagnusOrder = MagnusOrder(3);
    pub const FOUR: MagnusOrder = MagnusOrder(4);

    pub fn new(n: u8) -> Result<Self> {
        if (1..=4).contains(&n) {
            Ok(MagnusOrder(n))
        } else {
            Err(Error::OrderUnsupported(n))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Rejects order 4, which has no endpoint Jacobians.
    pub fn for_factors(self) -> Result<Self> {
        if self.0 <= 3 {
            Ok(self)
        } else {
            Err(Error::OrderUnsupported(self.0))
        }
    }
}

impl TryFrom<u8> for MagnusOrder {
    type Error = Error;
    fn try_from(n: u8) -> Result<Self> {
        MagnusOrder::new(n)
    }
}

impl From<MagnusOrder> for u8 {
    fn from(o: MagnusOrder) -> u8 {
        o.0
    }
}

/// Accumulated Magnus vector over one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnusVector {
    pub psi: Twist,
    pub order: MagnusOrder,
    pub dt: f64,
}

/// Jacobians of the Magnus vector with respect to the two endpoint velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointJacobians {
    /// `d psi / d w_k`
    pub mk: AdjMat,
    /// `d psi / d w_{k-1}`
    pub mkm1: AdjMat,
}

impl EndpointJacobians {
    /// Aggregate Jacobian `M = M_k + M_{k-1}`.
    pub fn aggregate(&self) -> AdjMat {
        self.mk + self.mkm1
    }
}

/// Which end of the interval a partial Magnus matrix is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `Omega(t, t_{k-1})`
    Forward,
    /// `Omega(t_k, t)`
    Reversed,
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDt(dt))
    }
}

/// Magnus vector between velocities `w_km1` at `t_{k-1}` and `w_k` at
/// `t_k = t_{k-1} + dt`, for orders 1–3.
pub fn magnus_vector(w_km1: &Twist, w_k: &Twist, dt: f64, order: MagnusOrder) -> Result<MagnusVector> {
    check_dt(dt)?;
    order.for_factors()?;
    let mut psi = (w_km1 + w_k) * (0.5 * dt);
    if order.get() >= 2 {
        let bracket = curly_wedge(w_k) * w_km1;
        psi += bracket * (dt * dt / 12.0);
        if order.get() >= 3 {
            psi += curly_wedge(&(w_k - w_km1)) * bracket * (dt.powi(3) / 240.0);
        }
    }
    Ok(MagnusVector { psi, order, dt })
}

/// Jacobians of [`magnus_vector`] with respect to `w_k` and `w_km1`.
pub fn endpoint_jacobians(
    w_km1: &Twist,
    w_k: &Twist,
    dt: f64,
    order: MagnusOrder,
) -> Result<EndpointJacobians> {
    check_dt(dt)?;
    order.for_factors()?;
    let half = AdjMat::identity() * (0.5 * dt);
    let (mut mk, mut mkm1) = (half, half);
    if order.get() >= 2 {
        // d(a^ b)/da = -b^,  d(a^ b)/db = a^
        let c2 = dt * dt / 12.0;
        let (ca, cb) = (curly_wedge(w_k), curly_wedge(w_km1));
        mk -= cb * c2;
        mkm1 += ca * c2;
        if order.get() >= 3 {
            // psi_3 = c3 d^ u with d = a - b, u = a^ b
            let c3 = dt.powi(3) / 240.0;
            let cd = curly_wedge(&(w_k - w_km1));
            let cu = curly_wedge(&(ca * w_km1));
            mk += (-cu - cd * cb) * c3;
            mkm1 += (cu + cd * ca) * c3;
        }
    }
    Ok(EndpointJacobians { mk, mkm1 })
}

/// Magnus matrix over a full interval, from the endpoint system matrices.
///
/// Supports orders 1–4.
pub fn magnus_matrix<const N: usize>(
    a_km1: &SMatrix<f64, N, N>,
    a_k: &SMatrix<f64, N, N>,
    dt: f64,
    order: MagnusOrder,
) -> Result<SMatrix<f64, N, N>> {
    check_dt(dt)?;
    let mut omega = (a_km1 + a_k) * (0.5 * dt);
    if order.get() >= 2 {
        let c = commutator(a_k, a_km1);
        omega += c * (dt * dt / 12.0);
        if order.get() >= 3 {
            let d = a_k - a_km1;
            let dc = commutator(&d, &c);
            omega += dc * (dt.powi(3) / 240.0);
            if order.get() >= 4 {
                let dt4 = dt.powi(4);
                omega -= commutator(&d, &dc) * (dt4 / 5040.0);
                omega -= commutator(a_k, &commutator(a_km1, &c)) * (dt4 / 720.0);
            }
        }
    }
    Ok(omega)
}

/// Magnus expansion of `A(s) = a + s b` from `s = 0` to `s = tau`.
fn magnus_linear_from<const N: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, N>,
    tau: f64,
    order: MagnusOrder,
) -> SMatrix<f64, N, N> {
    let mut omega = a * tau + b * (0.5 * tau * tau);
    if order.get() >= 2 {
        let ba = commutator(b, a);
        omega += ba * (tau.powi(3) / 12.0);
        if order.get() >= 3 {
            let bba = commutator(b, &ba);
            omega += bba * (tau.powi(5) / 240.0);
            if order.get() >= 4 {
                let aba = commutator(a, &ba);
                omega -= commutator(a, &aba) * (tau.powi(5) / 720.0);
                omega -= commutator(b, &aba) * (tau.powi(6) / 720.0);
                omega -= commutator(b, &bba) * (tau.powi(7) / 5040.0);
            }
        }
    }
    omega
}

/// Magnus matrix from one end of `[t_km1, t_k]` to an interior time `t`.
///
/// `Forward` returns `Omega(t, t_{k-1})`, `Reversed` returns `Omega(t_k, t)`.
/// Both reduce to [`magnus_matrix`] over the whole interval.
#[allow(clippy::too_many_arguments)]
pub fn magnus_matrix_partial<const N: usize>(
    a_km1: &SMatrix<f64, N, N>,
    a_k: &SMatrix<f64, N, N>,
    t_km1: f64,
    t_k: f64,
    t: f64,
    direction: Direction,
    order: MagnusOrder,
) -> Result<SMatrix<f64, N, N>> {
    let dt = t_k - t_km1;
    check_dt(dt)?;
    if !(t >= t_km1 && t <= t_k) {
        return Err(Error::TimeOutOfInterval { t, start: t_km1, end: t_k });
    }
    let slope = (a_k - a_km1) / dt;
    Ok(match direction {
        Direction::Forward => magnus_linear_from(a_km1, &slope, t - t_km1, order),
        // Omega(t_k, t) = -Omega(t, t_k), expanded about t_k.
        Direction::Reversed => -magnus_linear_from(a_k, &slope, t - t_k, order),
    })
}

/// System matrix of the linearized perturbation dynamics,
/// `[[w^curly, I], [0, 0]]`.
pub fn perturbation_system_matrix(w: &Twist) -> Matrix12 {
    let mut a = Matrix12::zeros();
    a.fixed_view_mut::<6, 6>(0, 0).copy_from(&curly_wedge(w));
    a.fixed_view_mut::<6, 6>(0, 6).copy_from(&AdjMat::identity());
    a
}

/// Matrix exponential of a Magnus matrix of the perturbation dynamics.
///
/// Every such matrix has the form `[[x^curly, Y], [0, 0]]`, whose exponential
/// is `[[exp(x^curly), J(x) Y], [0, I]]`.
pub fn exp_perturbation(omega: &Matrix12) -> Matrix12 {
    let x = curly_vee(&block::<6, 6>(omega, 0, 0));
    let y = block::<6, 6>(omega, 0, 6);
    upper_unit(&exp_curly(&x), &(left_jacobian(&x) * y))
}

/// Reference pose transition: integrates `T' = w(t)^ T` from the identity,
/// with `w` varying linearly from `w_km1` to `w_k` over `dt`.
pub fn ode_oracle_transition(w_km1: &Twist, w_k: &Twist, dt: f64, steps: usize) -> Pose {
    assert!(steps >= 100, "oracle needs at least 100 steps");
    let velocity = |t: f64| w_km1 + (w_k - w_km1) * (t / dt);
    integrate_pose(velocity, 0.0, dt, steps, Pose::identity())
}

/// Classical fourth-order integration of `T' = w(t)^ T`, renormalizing the
/// rotation after every step.
pub fn integrate_pose<F>(velocity: F, t0: f64, t1: f64, steps: usize, start: Pose) -> Pose
where
    F: Fn(f64) -> Twist,
{
    let h = (t1 - t0) / steps as f64;
    let mut x = *start.matrix();
    let f = |t: f64, x: &Matrix4<f64>| wedge(&velocity(t)) * x;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * h, &(x + k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(x + k2 * (0.5 * h)));
        let k4 = f(t + h, &(x + k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let rot = x.fixed_view::<3, 3>(0, 0).into_owned();
        let trans = x.fixed_view::<3, 1>(0, 3).into_owned();
        x = *Pose::from_parts(rot, trans).renormalize().matrix();
    }
    Pose::from_parts(x.fixed_view::<3, 3>(0, 0).into_owned(), x.fixed_view::<3, 1>(0, 3).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::{exp_map, log_map};
    use nalgebra::Matrix6;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_twist(rng: &mut impl Rng, scale: f64) -> Twist {
        Twist::from_fn(|_, _| rng.random_range(-scale..scale))
    }

    fn random_matrix<const N: usize>(rng: &mut impl Rng, scale: f64) -> SMatrix<f64, N, N> {
        SMatrix::from_fn(|_, _| rng.random_range(-scale..scale))
    }

    /// RK4 reference for X' = A(t) X with A linear in time, X(0) = I.
    fn rk4_transition<const N: usize>(
        a0: &SMatrix<f64, N, N>,
        a1: &SMatrix<f64, N, N>,
        dt: f64,
        steps: usize,
    ) -> SMatrix<f64, N, N> {
        let a = |t: f64| a0 + (a1 - a0) * (t / dt);
        let h = dt / steps as f64;
        let mut x = SMatrix::<f64, N, N>::identity();
        for i in 0..steps {
            let t = i as f64 * h;
            let k1 = a(t) * x;
            let k2 = a(t + 0.5 * h) * (x + k1 * (0.5 * h));
            let k3 = a(t + 0.5 * h) * (x + k2 * (0.5 * h));
            let k4 = a(t + h) * (x + k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        x
    }

    #[test]
    fn order_bounds() {
        assert!(MagnusOrder::new(0).is_err());
        assert!(MagnusOrder::new(5).is_err());
        assert!(MagnusOrder::FOUR.for_factors().is_err());
        let w = Twist::zeros();
        assert_eq!(
            magnus_vector(&w, &w, 1.0, MagnusOrder::FOUR),
            Err(Error::OrderUnsupported(4))
        );
        assert_eq!(magnus_vector(&w, &w, 0.0, MagnusOrder::ONE), Err(Error::InvalidDt(0.0)));
        assert!(matches!(
            endpoint_jacobians(&w, &w, 1.0, MagnusOrder::FOUR),
            Err(Error::OrderUnsupported(4))
        ));
    }

    #[test]
    fn magnus_vector_examples() {
        let e1 = Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let e2 = Twist::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        let v = magnus_vector(&e1, &e2, 2.0, MagnusOrder::ONE).unwrap();
        assert_eq!(v.psi, Twist::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0));

        let w = Twist::new(0.3, -0.1, 0.2, 0.5, -0.4, 0.1);
        for order in [MagnusOrder::ONE, MagnusOrder::TWO, MagnusOrder::THREE] {
            let v = magnus_vector(&w, &w, 0.7, order).unwrap();
            assert!((v.psi - w * 0.7).amax() < 1e-15);
        }
    }

    #[test]
    fn magnus_vector_term_by_term() {
        // Spelled out independently with explicit cross products.
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..50 {
            let b = random_twist(&mut rng, 1.0);
            let a = random_twist(&mut rng, 1.0);
            let dt = rng.random_range(0.1..1.0);
            let bracket = |x: &Twist, y: &Twist| {
                let (xr, xp) = (x.fixed_rows::<3>(0), x.fixed_rows::<3>(3));
                let (yr, yp) = (y.fixed_rows::<3>(0), y.fixed_rows::<3>(3));
                let r = xp.cross(&yr) + xr.cross(&yp);
                let p = xp.cross(&yp);
                Twist::new(r.x, r.y, r.z, p.x, p.y, p.z)
            };
            let p1 = (a + b) * dt / 2.0;
            let p2 = bracket(&a, &b) * dt * dt / 12.0;
            let p3 = bracket(&(a - b), &bracket(&a, &b)) * dt.powi(3) / 240.0;
            let v = magnus_vector(&b, &a, dt, MagnusOrder::THREE).unwrap();
            assert!((v.psi - (p1 + p2 + p3)).amax() < 1e-14);
        }
    }

    #[test]
    fn magnus_matrix_commuting_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let base: Matrix12 = random_matrix(&mut rng, 1.0);
        let a0 = base * 0.3;
        let a1 = base * -1.2;
        let om = magnus_matrix(&a0, &a1, 0.8, MagnusOrder::FOUR).unwrap();
        assert!((om - (a0 + a1) * 0.4).amax() < 1e-14);
        let om = magnus_matrix(&base, &base, 0.8, MagnusOrder::FOUR).unwrap();
        assert!((om - base * 0.8).amax() < 1e-14);
    }

    #[test]
    fn magnus_matrix_second_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a0: Matrix12 = random_matrix(&mut rng, 1.0);
        let a1: Matrix12 = random_matrix(&mut rng, 1.0);
        let dt = 0.6;
        let o1 = magnus_matrix(&a0, &a1, dt, MagnusOrder::ONE).unwrap();
        let o2 = magnus_matrix(&a0, &a1, dt, MagnusOrder::TWO).unwrap();
        let direct = (a1 * a0 - a0 * a1) * (dt * dt / 12.0);
        assert!((o2 - o1 - direct).amax() < 1e-14);
    }

    #[test]
    fn partial_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a0: Matrix6<f64> = random_matrix(&mut rng, 1.0);
        let a1: Matrix6<f64> = random_matrix(&mut rng, 1.0);
        let (t0, t1) = (2.0, 2.5);
        for n in 1..=4 {
            let order = MagnusOrder::new(n).unwrap();
            let full = magnus_matrix(&a0, &a1, t1 - t0, order).unwrap();
            let fwd = magnus_matrix_partial(&a0, &a1, t0, t1, t1, Direction::Forward, order).unwrap();
            let rev = magnus_matrix_partial(&a0, &a1, t0, t1, t0, Direction::Reversed, order).unwrap();
            assert!((fwd - full).amax() < 1e-13, "order {n}: {}", (fwd - full).amax());
            assert!((rev - full).amax() < 1e-13, "order {n}: {}", (rev - full).amax());
            let f0 = magnus_matrix_partial(&a0, &a1, t0, t1, t0, Direction::Forward, order).unwrap();
            let r1 = magnus_matrix_partial(&a0, &a1, t0, t1, t1, Direction::Reversed, order).unwrap();
            assert_eq!(f0, Matrix6::zeros());
            assert_eq!(r1, Matrix6::zeros());
        }
        assert!(matches!(
            magnus_matrix_partial(&a0, &a1, t0, t1, 3.0, Direction::Forward, MagnusOrder::ONE),
            Err(Error::TimeOutOfInterval { .. })
        ));
    }

    #[test]
    fn partial_forms_track_the_ode() {
        // Each truncation should be accurate to its order at interior times,
        // in both directions.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let a0: Matrix6<f64> = random_matrix(&mut rng, 0.5);
        let a1: Matrix6<f64> = random_matrix(&mut rng, 0.5);
        let (t0, t1) = (0.0, 0.4);
        let t = 0.25;
        let sub_fwd = |tt: f64| {
            // A restricted to [t0, t] is linear from a0 to A(t).
            let at = a0 + (a1 - a0) * ((tt - t0) / (t1 - t0));
            rk4_transition(&a0, &at, tt - t0, 2000)
        };
        let reference_fwd = sub_fwd(t);
        let at = a0 + (a1 - a0) * ((t - t0) / (t1 - t0));
        let reference_rev = rk4_transition(&at, &a1, t1 - t, 2000);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for n in 1..=4 {
            let order = MagnusOrder::new(n).unwrap();
            let f = magnus_matrix_partial(&a0, &a1, t0, t1, t, Direction::Forward, order).unwrap();
            let r = magnus_matrix_partial(&a0, &a1, t0, t1, t, Direction::Reversed, order).unwrap();
            let ef = (f.exp() - reference_fwd).amax();
            let er = (r.exp() - reference_rev).amax();
            assert!(ef < prev.0 && er < prev.1, "order {n}: {ef} {er}");
            prev = (ef, er);
        }
        assert!(prev.0 < 1e-7 && prev.1 < 1e-7);
    }

    #[test]
    fn full_matrix_convergence_rates() {
        // Fixed endpoint matrices; error of order n should scale like dt^(n+1).
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let a0: Matrix6<f64> = random_matrix(&mut rng, 1.0);
        let a1: Matrix6<f64> = random_matrix(&mut rng, 1.0);
        for n in 1..=4u8 {
            let order = MagnusOrder::new(n).unwrap();
            let errs: Vec<f64> = [0.2, 0.1]
                .iter()
                .map(|&dt| {
                    let reference = rk4_transition(&a0, &a1, dt, 4000);
                    let om = magnus_matrix(&a0, &a1, dt, order).unwrap();
                    (om.exp() - reference).amax()
                })
                .collect();
            let slope = (errs[0] / errs[1]).log2();
            assert!(slope > n as f64 + 0.5, "order {n}: slope {slope}");
        }
    }

    #[test]
    fn jacobi_merge_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..20 {
            let a: Matrix12 = random_matrix(&mut rng, 1.0);
            let b: Matrix12 = random_matrix(&mut rng, 1.0);
            let ba = commutator(&b, &a);
            let lhs = commutator(&b, &commutator(&a, &ba));
            let rhs = commutator(&a, &commutator(&b, &ba));
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn endpoint_jacobian_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let (w0, w1) = (random_twist(&mut rng, 1.0), random_twist(&mut rng, 1.0));
        let j = endpoint_jacobians(&w0, &w1, 0.5, MagnusOrder::ONE).unwrap();
        assert_eq!(j.mk, AdjMat::identity() * 0.25);
        assert_eq!(j.mkm1, AdjMat::identity() * 0.25);

        let dt = 0.8;
        let j1 = endpoint_jacobians(&w0, &w1, dt, MagnusOrder::ONE).unwrap();
        let j2 = endpoint_jacobians(&w0, &w1, dt, MagnusOrder::TWO).unwrap();
        let expected = curly_wedge(&(w1 - w0)) * (dt * dt / 12.0);
        assert!((j2.aggregate() - j1.aggregate() - expected).amax() < 1e-15);
    }

    #[test]
    fn endpoint_jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let h = 1e-6;
        for _ in 0..100 {
            let (w0, w1) = (random_twist(&mut rng, 1.5), random_twist(&mut rng, 1.5));
            let dt = rng.random_range(0.05..1.0);
            for n in 1..=3 {
                let order = MagnusOrder::new(n).unwrap();
                let j = endpoint_jacobians(&w0, &w1, dt, order).unwrap();
                for c in 0..6 {
                    let mut e = Twist::zeros();
                    e[c] = h;
                    let psi = |a: &Twist, b: &Twist| magnus_vector(a, b, dt, order).unwrap().psi;
                    let dk = (psi(&w0, &(w1 + e)) - psi(&w0, &(w1 - e))) / (2.0 * h);
                    let dkm1 = (psi(&(w0 + e), &w1) - psi(&(w0 - e), &w1)) / (2.0 * h);
                    assert!((dk - j.mk.column(c)).amax() < 1e-6);
                    assert!((dkm1 - j.mkm1.column(c)).amax() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn magnus_matrix_has_vector_structure() {
        // Omega of the perturbation system is [[psi^curly, M_k + M_{k-1}], [0, 0]].
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..500 {
            let (w0, w1) = (random_twist(&mut rng, 1.5), random_twist(&mut rng, 1.5));
            let dt = rng.random_range(0.01..1.0);
            let (a0, a1) = (perturbation_system_matrix(&w0), perturbation_system_matrix(&w1));
            for n in 1..=3 {
                let order = MagnusOrder::new(n).unwrap();
                let om = magnus_matrix(&a0, &a1, dt, order).unwrap();
                let psi = magnus_vector(&w0, &w1, dt, order).unwrap().psi;
                let m = endpoint_jacobians(&w0, &w1, dt, order).unwrap().aggregate();
                let expected = upper_unit(&curly_wedge(&psi), &m) - {
                    let mut id = Matrix12::zeros();
                    id.fixed_view_mut::<6, 6>(6, 6).copy_from(&AdjMat::identity());
                    id
                };
                assert!((om - expected).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn structured_exponential_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..50 {
            let (w0, w1) = (random_twist(&mut rng, 1.5), random_twist(&mut rng, 1.5));
            let (a0, a1) = (perturbation_system_matrix(&w0), perturbation_system_matrix(&w1));
            let om = magnus_matrix_partial(&a0, &a1, 0.0, 1.0, 0.3, Direction::Reversed, MagnusOrder::THREE)
                .unwrap();
            assert!((exp_perturbation(&om) - om.exp()).amax() < 1e-12);
        }
    }

    #[test]
    fn oracle_examples() {
        let w = Twist::new(0.3, -0.2, 0.5, 0.4, 0.1, -0.6);
        let t = ode_oracle_transition(&w, &w, 1.3, 1000);
        assert!((t.matrix() - exp_map(&(w * 1.3)).matrix()).amax() < 1e-10);
        let z = Twist::zeros();
        assert_eq!(ode_oracle_transition(&z, &z, 1.0, 100), Pose::identity());
    }

    #[test]
    fn magnus_vector_truncation_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let (w0, w1) = (random_twist(&mut rng, 1.0), random_twist(&mut rng, 1.0));
            for n in 1..=3u8 {
                let order = MagnusOrder::new(n).unwrap();
                let dts = [0.4, 0.2, 0.1, 0.05];
                let errs: Vec<f64> = dts
                    .iter()
                    .map(|&dt| {
                        let oracle = ode_oracle_transition(&w0, &w1, dt, 1000);
                        let psi = magnus_vector(&w0, &w1, dt, order).unwrap().psi;
                        log_map(&(exp_map(&psi) * oracle.inverse())).unwrap().norm()
                    })
                    .collect();
                let slope = (errs[0] / errs[3]).ln() / (dts[0] / dts[3]).ln();
                assert!(slope >= n as f64 + 0.5, "order {n}: {errs:?} slope {slope}");
            }
        }
    }
}
