//! Solve a noisy synthetic pair from a perturbed prior and compare with ground truth.
//!
//!     cargo run --example solve_synthetic -- [seed] [sigma_px]

use birotation::synth::{perturb_pose, stream_rng, Purpose};
use birotation::*;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(7);
    let sigma: f64 = args.next().map(|s| s.parse().expect("sigma")).unwrap_or(0.5);

    let scene = generate_scene(&SceneSpec { seed, ..SceneSpec::default() })?;
    let noisy = apply_noise(&scene, &NoiseSpec { sigma_px: sigma, mismatch_rate: 0.1, ..NoiseSpec::default() }, seed)?;
    let prior = perturb_pose(&scene.truth_rotation, &scene.truth_translation, 5.0, &mut stream_rng(seed, 0, Purpose::Prior));

    let report = solve_detailed(&noisy.set, &prior, &SolverConfig::default())?;
    for st in &report.states {
        println!(
            "model {}: d_hat/N = {:.3e}, {} inliers of {}, {} iterations{}",
            st.model.index(),
            st.d_hat / noisy.set.len() as f64,
            st.mask.count(),
            st.mask.len(),
            st.iterations,
            if st.converged { "" } else { " (not converged)" }
        );
    }
    let est = report.estimate;
    let err = PoseError::between(&est.rotation, &est.t_dir, &scene.truth_rotation, &scene.truth_translation);
    println!("selected model {}, sign {:+}", est.axis.index(), est.s_sign.value());
    println!("rotation error {:.4} deg, translation error {:.4} deg", err.eps_r, err.eps_t);
    Ok(())
}
