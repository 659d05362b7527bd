//! A camera that only rotates: every model fits and the translation comes back as zero.

use birotation::*;

fn main() -> Result<()> {
    let spec = SceneSpec { seed: 11, pose_sampler: PoseSampler::PureRotation { max_deg: 10.0 }, ..SceneSpec::default() };
    let scene = generate_scene(&spec)?;
    let report = solve_detailed(&scene.set, &PriorPose::default(), &SolverConfig::default())?;

    println!("pure rotation detected: {}", report.pure_rotation);
    println!("t_dir = {:?}", report.estimate.t_dir.as_slice());
    println!("rotation error {:.2e} deg", rotation_error(&report.estimate.rotation, &scene.truth_rotation));

    // with noise the parallax test no longer holds and a direction is reported
    let noisy = apply_noise(&scene, &NoiseSpec { sigma_px: 0.1, ..NoiseSpec::default() }, 11)?;
    match solve(&noisy.set, &PriorPose::default(), &SolverConfig::default()) {
        Ok(est) => println!(
            "sigma 0.1 px: rotation error {:.4} deg, t_dir {:?}",
            rotation_error(&est.rotation, &scene.truth_rotation),
            est.t_dir.as_slice()
        ),
        Err(e) => println!("sigma 0.1 px: {e}"),
    }
    Ok(())
}
