//! Simulates noisy pose measurements of a curved trajectory and estimates
//! it with each motion prior.

use magnus_gp::experiment::{solve_trial, ExperimentConfig, TrialInput};
use magnus_gp::prior::Method;
use magnus_gp::sim::{compute_rmse, generate_ground_truth};

fn main() -> magnus_gp::Result<()> {
    let cfg = ExperimentConfig::default();
    let k = 8;
    let truth = generate_ground_truth(&cfg.scenario(k)?)?;
    let input = TrialInput::new(&cfg, &truth, k, 0);
    let times = input.measurement_times();
    let truth_knots = truth.sample(&times);
    println!("method    iters  pose(m)     rot(rad)    vel(m/s)    angvel(rad/s)");
    for method in Method::ALL {
        let est = solve_trial(&cfg, method, &input, &times, false)?;
        let m = compute_rmse(&est.knots, &truth_knots)?;
        println!(
            "{:<9} {:>5}  {:.4e}  {:.4e}  {:.4e}  {:.4e}",
            method.name(),
            est.iterations,
            m.rmse_pose_linear,
            m.rmse_pose_angular,
            m.rmse_vel_linear,
            m.rmse_vel_angular
        );
    }
    Ok(())
}
