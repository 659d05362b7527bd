//! Mean rotation and translation error against pixel noise.
//!
//!     cargo run --release --example noise_sweep -- [pairs]

use birotation::*;

fn main() -> Result<()> {
    let pairs: usize = std::env::args().nth(1).map(|s| s.parse().expect("pairs")).unwrap_or(20);
    let mut settings = SweepSettings::new(SweepKind::Noise, SceneSpec { seed: 1, ..SceneSpec::default() }, SolverConfig::default());
    settings.grid = (0..=10).map(|k| k as f64 / 5.0).collect();
    settings.pairs = pairs;
    let report = sweep(&settings)?;
    println!("{:>8} {:>12} {:>12} {:>8}", "sigma", "eps_r [deg]", "eps_t [deg]", "failed");
    for r in &report.records {
        println!("{:>8.2} {:>12.5} {:>12.5} {:>8}", r.parameter, r.mean_eps_r, r.mean_eps_t, r.failures);
    }
    Ok(())
}
