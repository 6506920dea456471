//! Queries the estimated trajectory between knots and reports the
//! interpolated mean and its uncertainty.

use magnus_gp::experiment::{solve_trial, ExperimentConfig, TrialInput};
use magnus_gp::prior::Method;
use magnus_gp::query::query;
use magnus_gp::se3::log_map;
use magnus_gp::sim::generate_ground_truth;

fn main() -> magnus_gp::Result<()> {
    let cfg = ExperimentConfig::default();
    let k = 5;
    let truth = generate_ground_truth(&cfg.scenario(k)?)?;
    let input = TrialInput::new(&cfg, &truth, k, 0);
    let est = solve_trial(&cfg, Method::Magnus(magnus_gp::magnus::MagnusOrder::TWO), &input, &input.measurement_times(), false)?;
    println!("    t   pos error   pos sigma");
    for i in 0..=20 {
        let t = cfg.duration * i as f64 / 20.0;
        let q = query(&est, t)?;
        let err = log_map(&(q.knot.pose * truth.at(t).pose.inverse()))?;
        let sigma = (q.p[(0, 0)] + q.p[(1, 1)] + q.p[(2, 2)]).sqrt();
        println!("{t:5.2}  {:.4e}  {sigma:.4e}", err.fixed_rows::<3>(0).norm());
    }
    Ok(())
}
