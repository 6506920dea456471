//! Pose change over an interval of linearly varying body velocity: the
//! truncated Magnus expansion against numerical integration.

use magnus_gp::magnus::{magnus_vector, ode_oracle_transition, MagnusOrder};
use magnus_gp::se3::{exp_map, log_map, Twist};

fn main() -> magnus_gp::Result<()> {
    let w0 = Twist::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.5);
    let w1 = Twist::new(0.6, 0.3, 0.0, 0.4, -0.2, 0.9);
    for dt in [1.0, 0.5, 0.25] {
        let oracle = ode_oracle_transition(&w0, &w1, dt, 20_000);
        print!("dt = {dt:<5}");
        for n in 1..=3 {
            let psi = magnus_vector(&w0, &w1, dt, MagnusOrder::new(n)?)?.psi;
            let err = log_map(&(exp_map(&psi) * oracle.inverse()))?.norm();
            print!("  order {n}: {err:.3e}");
        }
        println!();
    }
    Ok(())
}
