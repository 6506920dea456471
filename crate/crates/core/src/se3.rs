//! SE(3) / se(3) kernel.
//!
//! Tangent vectors are ordered translational-first, `xi = (rho; phi)`, and all
//! 6×6 block formulas below are written against that ordering. Perturbations
//! are left-multiplicative: `T = Exp(eps) * T_op`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

/// se(3) tangent vector or body-centric velocity, `(rho; phi)`.
pub type Twist = Vector6<f64>;

/// 6×6 adjoint-representation matrix.
pub type AdjMat = Matrix6<f64>;

/// Below this rotation angle the trigonometric coefficients are evaluated by
/// their Taylor series instead of the closed forms, which lose digits to
/// cancellation well before the angle reaches zero.
pub const SERIES_THRESHOLD: f64 = 0.2;

/// Rotation angles at or beyond `PI - ANGLE_MARGIN` are rejected by the
/// logarithm and the inverse left Jacobian.
pub const ANGLE_MARGIN: f64 = 1e-6;

/// Builds a twist from its translational and rotational parts.
pub fn twist(rho: Vector3<f64>, phi: Vector3<f64>) -> Twist {
    Twist::new(rho.x, rho.y, rho.z, phi.x, phi.y, phi.z)
}

pub fn rho(xi: &Twist) -> Vector3<f64> {
    xi.fixed_rows::<3>(0).into_owned()
}

pub fn phi(xi: &Twist) -> Vector3<f64> {
    xi.fixed_rows::<3>(3).into_owned()
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `xi^`: 4×4 Lie-algebra matrix.
pub fn wedge(xi: &Twist) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&phi(xi)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&rho(xi));
    m
}

/// Inverse of [`wedge`]; ignores the bottom row.
pub fn vee(m: &Matrix4<f64>) -> Twist {
    let r = m.fixed_view::<3, 3>(0, 0).into_owned();
    let t = m.fixed_view::<3, 1>(0, 3).into_owned();
    twist(t, unskew(&r))
}

/// Curly wedge: `[[phi^, rho^], [0, phi^]]`, so that `curly_wedge(x) * y` is
/// the Lie bracket of `x` and `y`.
pub fn curly_wedge(xi: &Twist) -> AdjMat {
    let p = skew(&phi(xi));
    let mut m = AdjMat::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&p);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(&rho(xi)));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&p);
    m
}

/// Inverse of [`curly_wedge`], reading the upper blocks.
pub fn curly_vee(m: &AdjMat) -> Twist {
    let p = m.fixed_view::<3, 3>(0, 0).into_owned();
    let r = m.fixed_view::<3, 3>(0, 3).into_owned();
    twist(unskew(&r), unskew(&p))
}

// Trigonometric coefficient functions. Each switches to a truncated Taylor
// series below SERIES_THRESHOLD.

fn sinc(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0)))
    } else {
        theta.sin() / theta
    }
}

/// (1 - cos θ) / θ²
fn coef_one_minus_cos(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0 + t2.powi(4) / 3628800.0
    } else {
        let s = (0.5 * theta).sin();
        2.0 * s * s / (theta * theta)
    }
}

/// (θ - sin θ) / θ³
fn coef_theta_minus_sin(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0
            + t2.powi(4) / 39916800.0
    } else {
        (theta - theta.sin()) / (theta * theta * theta)
    }
}

/// (θ² + 2 cos θ - 2) / (2 θ⁴)
fn coef_q4(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0 - t2 * t2 * t2 / 3628800.0
            + t2.powi(4) / 479001600.0
    } else {
        let t2 = theta * theta;
        (t2 + 2.0 * theta.cos() - 2.0) / (2.0 * t2 * t2)
    }
}

/// (2θ - 3 sin θ + θ cos θ) / (2 θ⁵)
fn coef_q5(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0 - t2 * t2 * t2 / 9979200.0
    } else {
        (2.0 * theta - 3.0 * theta.sin() + theta * theta.cos()) / (2.0 * theta.powi(5))
    }
}

/// (1 - (θ/2) cot(θ/2)) / θ²
fn coef_jinv(theta: f64) -> f64 {
    if theta < SERIES_THRESHOLD {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 * t2 * t2 / 1209600.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half / half.tan()) / (theta * theta)
    }
}

/// SO(3) exponential.
pub fn so3_exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let p = skew(phi);
    Matrix3::identity() + p * sinc(theta) + p * p * coef_one_minus_cos(theta)
}

/// SO(3) left Jacobian.
pub fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let p = skew(phi);
    Matrix3::identity() + p * coef_one_minus_cos(theta) + p * p * coef_theta_minus_sin(theta)
}

/// SO(3) inverse left Jacobian. Valid for θ < 2π; callers enforce the
/// tighter branch-cut margin.
pub fn so3_left_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let p = skew(phi);
    Matrix3::identity() - p * 0.5 + p * p * coef_jinv(theta)
}

/// The coupling block `Q(rho, phi)` of the SE(3) left Jacobian.
fn se3_q_block(xi: &Twist) -> Matrix3<f64> {
    let ph = phi(xi);
    let theta = ph.norm();
    let r = skew(&rho(xi));
    let p = skew(&ph);
    let pr = p * r;
    let rp = r * p;
    let prp = pr * p;
    let pp = p * p;
    r * 0.5
        + (pr + rp + prp) * coef_theta_minus_sin(theta)
        + (pp * r + rp * p - prp * 3.0) * coef_q4(theta)
        + (prp * p + pp * r * p) * coef_q5(theta)
}

/// A rigid-body pose: 4×4 homogeneous transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose(Matrix4<f64>);

impl Pose {
    pub fn identity() -> Self {
        Pose(Matrix4::identity())
    }

    pub fn from_parts(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Pose(m)
    }

    /// Wraps a matrix after checking the pose invariants to `tol`.
    pub fn from_matrix(m: Matrix4<f64>, tol: f64) -> Option<Self> {
        let p = Pose(m);
        p.is_valid(tol).then_some(p)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        Pose::from_parts(rt, -(rt * self.translation()))
    }

    /// Checks orthonormality, unit determinant and the homogeneous row.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = self.rotation();
        let bottom = self.0.fixed_view::<1, 4>(3, 0);
        self.0.iter().all(|v| v.is_finite())
            && (r.transpose() * r - Matrix3::identity()).norm() <= tol
            && (r.determinant() - 1.0).abs() <= tol
            && bottom[0] == 0.0
            && bottom[1] == 0.0
            && bottom[2] == 0.0
            && bottom[3] == 1.0
    }

    /// Projects the rotation block back onto SO(3). Used after long products.
    pub fn renormalize(&self) -> Self {
        let svd = self.rotation().svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        Pose::from_parts(r, self.translation())
    }

    /// Applies the pose to a point.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        // The product of two valid poses keeps an exact homogeneous row.
        let mut m = self.0 * rhs.0;
        m.fixed_view_mut::<1, 4>(3, 0)
            .copy_from(&nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
        Pose(m)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        *self * *rhs
    }
}

/// `Exp(xi) = exp(xi^)`.
pub fn exp_map(xi: &Twist) -> Pose {
    let ph = phi(xi);
    Pose::from_parts(so3_exp(&ph), so3_left_jacobian(&ph) * rho(xi))
}

/// Rotation angle of a pose, in `[0, π]`.
pub fn rotation_angle(rot: &Matrix3<f64>) -> f64 {
    let cos = 0.5 * (rot.trace() - 1.0);
    let sin = 0.5 * unskew(&(rot - rot.transpose())).norm();
    sin.atan2(cos)
}

fn check_angle(theta: f64) -> Result<()> {
    if theta >= std::f64::consts::PI - ANGLE_MARGIN || !theta.is_finite() {
        Err(Error::AngleNearPi { angle: theta })
    } else {
        Ok(())
    }
}

/// `Log(T) = ln(T)^v`.
pub fn log_map(pose: &Pose) -> Result<Twist> {
    let rot = pose.rotation();
    let theta = rotation_angle(&rot);
    check_angle(theta)?;
    // vee(R - R^T)/2 = sin(θ) * axis
    let a = unskew(&(rot - rot.transpose())) * 0.5;
    let ph = a / sinc(theta);
    let rh = so3_left_jacobian_inv(&ph) * pose.translation();
    Ok(twist(rh, ph))
}

/// SE(3) left Jacobian `J(xi) = sum_n (xi^curly)^n / (n+1)!`.
pub fn left_jacobian(xi: &Twist) -> AdjMat {
    let j = so3_left_jacobian(&phi(xi));
    let q = se3_q_block(xi);
    let mut m = AdjMat::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&q);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&j);
    m
}

/// Inverse of the SE(3) left Jacobian.
pub fn left_jacobian_inv(xi: &Twist) -> Result<AdjMat> {
    let ph = phi(xi);
    check_angle(ph.norm())?;
    let jinv = so3_left_jacobian_inv(&ph);
    let q = se3_q_block(xi);
    let mut m = AdjMat::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&jinv);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-jinv * q * jinv));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&jinv);
    Ok(m)
}

/// Adjoint of a pose: `[[R, t^ R], [0, R]]`.
pub fn adjoint(pose: &Pose) -> AdjMat {
    let r = pose.rotation();
    let mut m = AdjMat::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(skew(&pose.translation()) * r));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    m
}

/// `exp(xi^curly)`, equal to `adjoint(exp_map(xi))`.
pub fn exp_curly(xi: &Twist) -> AdjMat {
    adjoint(&exp_map(xi))
}

/// Derivative of `J(xi) u` with respect to `xi`, for fixed `u`.
///
/// Summed from the defining series; the series is entire so a fixed number
/// of terms suffices for the angles that appear between adjacent knots.
pub fn left_jacobian_product_derivative(xi: &Twist, u: &Twist) -> AdjMat {
    let ad = curly_wedge(xi);
    let mut power_u = *u; // (xi^curly)^(n-1) u
    let mut d = AdjMat::zeros(); // d/dxi (xi^curly)^n u
    let mut sum = AdjMat::zeros();
    let mut fact = 1.0; // (n+1)!
    for n in 1..64 {
        d = ad * d - curly_wedge(&power_u);
        power_u = ad * power_u;
        fact *= (n + 1) as f64;
        let term = d / fact;
        sum += term;
        if n > 4 && term.amax() <= 1e-18 * (1.0 + sum.amax()) {
            break;
        }
    }
    sum
}

/// Derivative of `J(xi)^{-1} v` with respect to `xi`, for fixed `v`.
pub fn left_jacobian_inv_product_derivative(xi: &Twist, v: &Twist) -> Result<AdjMat> {
    let jinv = left_jacobian_inv(xi)?;
    let u = jinv * v;
    Ok(-jinv * left_jacobian_product_derivative(xi, &u))
}
