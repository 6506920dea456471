//! Runs a small accuracy study and prints median errors per method and
//! measurement count. Pass an output directory to also write the tables.

use magnus_gp::experiment::{median_of, run_accuracy_study, ExperimentConfig, Study};

fn main() -> magnus_gp::Result<()> {
    let cfg = ExperimentConfig { k_meas: vec![3, 5, 8, 12], trials: 10, ..Default::default() };
    let rows = run_accuracy_study(&cfg, false)?;
    print!("{:<9}", "k_meas");
    for k in &cfg.k_meas {
        print!("{k:>12}");
    }
    println!();
    for &method in &cfg.methods {
        print!("{:<9}", method.name());
        for &k in &cfg.k_meas {
            print!("{:>12.4e}", median_of(&rows, method, k, "rmse_pose_linear"));
        }
        println!();
    }
    if let Some(dir) = std::env::args().nth(1) {
        let dir = std::path::Path::new(&dir);
        magnus_gp::experiment::emit_study(dir, Study::Accuracy, &rows)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
