//! Relative pose estimation for two calibrated views by birotation alignment.
//!
//! Three models are optimized side by side. Model `i` looks for rotations
//! `R1`, `R2` of the reference and target frames after which the two cameras
//! differ by a pure translation along basis axis `i`; the best-aligned model
//! gives the pose `R = R2^T R1`, `t ~ -s R2^T l_i`.
//!
//! ```
//! use birotation::{solve, PriorPose, SceneSpec, SolverConfig, generate_scene};
//!
//! let scene = generate_scene(&SceneSpec { seed: 3, ..Default::default() }).unwrap();
//! let prior = PriorPose::new(scene.truth_rotation, scene.truth_translation).unwrap();
//! let est = solve(&scene.set, &prior, &SolverConfig::default()).unwrap();
//! assert!(est.rotation.angle_to(&scene.truth_rotation) < 1e-6);
//! ```

pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pose;
pub mod residual;
pub mod so3;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::{auc, error_summary, rotation_error, translation_error, ErrorSummary, Pose, PoseError};
pub use pose::{
    cheirality_select, enumerate_ambiguity, essential_from_birotation, essential_from_pose, recover_pose, BasisAxis,
    Correspondence, CorrespondenceSet, Intrinsics, RelativePoseEstimate, Sign,
};
pub use residual::{discretized_metric, energy, jacobian, residual, residual_vector, InlierMask, Jacobian, ResidualVector};
pub use so3::{exp_so3, log_so3, skew, Mat3, Rotation, Vec3};
pub use solver::{
    determine_sign, initialize_models, optimize_model, select_model, solve, solve_detailed, step,
    upper_quartile_weights, BirotationModelState, OutlierRule, Preset, PriorPose, SolveReport, SolverConfig,
};
pub use synth::{
    apply_noise, generate_pair, generate_scene, sweep, LabeledPair, NoiseSpec, PoseSampler, SceneSpec, SweepKind,
    SweepReport, SweepSettings,
};
