//! Ground-truth trajectories and measurements for each velocity profile.

use magnus_gp::se3::{log_map, Twist};
use magnus_gp::sim::{generate_ground_truth, generate_measurements, Profile, Scenario};

fn main() -> magnus_gp::Result<()> {
    let profiles = [
        Profile::default_sinusoidal(),
        Profile::Constant(Twist::new(0.5, 0.0, 0.0, 0.0, 0.0, 0.1)),
        Profile::Zero,
        Profile::SampledPrior(Twist::new(0.5, 0.0, 0.0, 0.0, 0.0, 0.1)),
    ];
    for profile in profiles {
        let scenario = Scenario { profile, ..Scenario::new(6, 3) };
        let truth = generate_ground_truth(&scenario)?;
        let meas = generate_measurements(&truth, scenario.k_meas, &scenario.meas_cov, 4);
        println!("{}", scenario.profile.name());
        for (t, z) in &meas {
            let x = truth.at(*t);
            let noise = log_map(&(*z * x.pose.inverse()))?;
            println!(
                "  t = {t:5.2}  position = {:>8.3?}  |w| = {:.3}  |noise| = {:.3e}",
                x.pose.translation().as_slice(),
                x.w.norm(),
                noise.norm()
            );
        }
    }
    Ok(())
}
