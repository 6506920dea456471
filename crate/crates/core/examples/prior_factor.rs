//! Builds the motion-prior factor between two knots for every method and
//! prints its error, transition and noise.

use magnus_gp::linalg::min_eigenvalue;
use magnus_gp::prior::{build_factor, build_prior_factor, Knot, Method, NoiseOptions, QcSpec};
use magnus_gp::se3::{exp_map, Pose, Twist};

fn main() -> magnus_gp::Result<()> {
    let a = Knot::new(0.0, Pose::identity(), Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.3));
    let b = Knot::new(0.8, exp_map(&Twist::new(0.8, 0.05, 0.0, 0.0, 0.02, 0.26)), Twist::new(1.0, 0.1, 0.0, 0.0, 0.05, 0.35));
    let qc = QcSpec::diagonal([0.1, 0.1, 0.1, 0.05, 0.05, 0.05])?;
    for method in Method::ALL {
        let f = build_factor(method, &a, &b, &qc, NoiseOptions::default())?;
        println!(
            "{:<8} |e| = {:.4e}  |F| = {:.4}  min eig Q = {:.3e}",
            method.name(),
            f.e_op.norm(),
            f.jac_a.norm(),
            min_eigenvalue(&f.q)
        );
    }
    println!("noise with leading terms only: min eig Q = {:.3e}", {
        let opts = NoiseOptions { terms: magnus_gp::prior::NoiseTerms::Leading, ..NoiseOptions::default() };
        min_eigenvalue(&build_prior_factor(&a, &b, &qc, magnus_gp::magnus::MagnusOrder::TWO, opts)?.q)
    });
    Ok(())
}
