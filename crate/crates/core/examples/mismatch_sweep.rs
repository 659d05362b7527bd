//! Mean errors against the fraction of mismatched correspondences, with and
//! without the upper-fence outlier rule.

use birotation::*;

fn main() -> Result<()> {
    let scene = SceneSpec { seed: 2, ..SceneSpec::default() };
    let mut robust = SweepSettings::new(SweepKind::Mismatch, scene, SolverConfig::default());
    robust.grid = (0..=6).map(|k| k as f64 / 20.0).collect();
    robust.pairs = 20;
    let mut plain = robust.clone();
    plain.solver.outlier_rule = OutlierRule::None;

    let (a, b) = (sweep(&robust)?, sweep(&plain)?);
    println!("{:>6} {:>14} {:>14}", "rate", "fence [deg]", "none [deg]");
    for (r, p) in a.records.iter().zip(&b.records) {
        println!("{:>6.2} {:>14.4} {:>14.4}", r.parameter, r.mean_eps_r, p.mean_eps_r);
    }
    Ok(())
}
