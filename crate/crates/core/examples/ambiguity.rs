//! The four poses that share one essential matrix, and the depth vote that picks one.

use birotation::pose::cheirality_votes;
use birotation::*;

fn main() -> Result<()> {
    let scene = generate_scene(&SceneSpec { seed: 21, ..SceneSpec::default() })?;
    let cfg = SolverConfig { disambiguate: true, tol_value: 1e-20, ..SolverConfig::default() };
    let prior = PriorPose::new(scene.truth_rotation, scene.truth_translation)?;
    let report = solve_detailed(&scene.set, &prior, &cfg)?;
    let st = report.selected_state();

    let candidates = enumerate_ambiguity(&st.r1, &st.r2, st.model);
    let e = essential_from_birotation(&st.r1, &st.r2, st.model);
    for (k, c) in candidates.iter().enumerate() {
        let ec = essential_from_pose(&c.rotation, &c.t_dir);
        // each candidate reproduces E up to sign
        let same = (ec - e).abs().max().min((ec + e).abs().max());
        println!(
            "candidate {k}: votes {:>3}/{}, |E - E_k| = {same:.1e}, rotation error {:.2e} deg",
            cheirality_votes(c, &scene.set),
            scene.set.len(),
            rotation_error(&c.rotation, &scene.truth_rotation)
        );
    }
    let chosen = report.estimate;
    println!(
        "chosen: rotation error {:.2e} deg, translation error {:.2e} deg",
        rotation_error(&chosen.rotation, &scene.truth_rotation),
        translation_error(&chosen.t_dir, &scene.truth_translation)
    );
    Ok(())
}
