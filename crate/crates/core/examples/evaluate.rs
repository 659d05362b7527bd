//! Write pose files to disk, read them back and summarize the errors.

use birotation::io::{pose_paths, write_atomic, PoseFile};
use birotation::metrics::DEFAULT_THRESHOLDS;
use birotation::synth::{perturb_pose, stream_rng, Purpose};
use birotation::*;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join(format!("birotation-evaluate-{}", std::process::id()));
    let (est_dir, truth_dir) = (dir.join("est"), dir.join("truth"));
    std::fs::create_dir_all(&est_dir).map_err(|e| Error::InvalidInput(e.to_string()))?;
    std::fs::create_dir_all(&truth_dir).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let spec = SceneSpec { seed: 5, n_points: 120, ..SceneSpec::default() };
    for k in 0..10 {
        let scene = generate_pair(&spec, k)?;
        let noisy = apply_noise(&scene, &NoiseSpec { sigma_px: 1.0, ..NoiseSpec::default() }, k)?;
        let prior = perturb_pose(&scene.truth_rotation, &scene.truth_translation, 5.0, &mut stream_rng(5, k, Purpose::Prior));
        let est = solve(&noisy.set, &prior, &SolverConfig::default())?;
        write_atomic(&est_dir.join(format!("{k:03}.json")), &PoseFile::from_estimate(&est).to_json())?;
        let truth = PoseFile::from_pose(&scene.truth_rotation, &scene.truth_translation);
        write_atomic(&truth_dir.join(format!("{k:03}.json")), &truth.to_json())?;
    }

    let load = |d: &std::path::Path| -> Result<Vec<Pose>> {
        pose_paths(d)?.iter().map(|p| Ok(PoseFile::read(p)?.to_pose()?.0)).collect()
    };
    let summary = error_summary(&load(&est_dir)?, &load(&truth_dir)?, &DEFAULT_THRESHOLDS)?;
    for (k, e) in summary.per_pair.iter().enumerate() {
        println!("pair {k}: eps_r {:.4} deg, eps_t {:.4} deg", e.eps_r, e.eps_t);
    }
    for (psi, pct) in &summary.auc {
        println!("AUC@{psi}: {pct:.2}%");
    }
    println!("mean |d theta| = {:?} rad", summary.delta_theta_bar.as_slice());
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
