//! Exponential and logarithm maps, adjoints and the left Jacobian on SE(3).

use magnus_gp::se3::{adjoint, exp_map, left_jacobian, log_map, Twist};

fn main() -> magnus_gp::Result<()> {
    let xi = Twist::new(1.0, -0.5, 0.2, 0.3, 0.1, -0.4);
    let pose = exp_map(&xi);
    println!("pose = {}", pose.matrix());
    println!("log(exp(xi)) - xi = {:.2e}", (log_map(&pose)? - xi).norm());

    let other = exp_map(&Twist::new(0.0, 0.0, 1.0, 0.0, 0.2, 0.0));
    let ad_gap = (adjoint(&(pose * other)) - adjoint(&pose) * adjoint(&other)).amax();
    println!("Ad(T1 T2) - Ad(T1) Ad(T2) = {ad_gap:.2e}");

    // A small change of the twist is a left perturbation through J(xi).
    let d = Twist::new(1e-6, 0.0, 0.0, 0.0, 0.0, 2e-6);
    let lhs = exp_map(&(xi + d));
    let rhs = exp_map(&(left_jacobian(&xi) * d)) * pose;
    println!("left Jacobian residual = {:.2e}", log_map(&(lhs * rhs.inverse()))?.norm());
    Ok(())
}
