//! Command-line front end: `solve`, `synth`, `eval` and `sweep`.
//!
//! Reports go to standard output (or `--out`), everything else to standard
//! error. Exit status: 0 success, 1 input or usage error, 2 solver failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::Error;
use crate::io::{pose_paths, write_atomic, CorrespondenceFile, PoseFile};
use crate::metrics::{error_summary, DEFAULT_THRESHOLDS};
use crate::pose::{BasisAxis, Intrinsics, Sign};
use crate::solver::{solve_detailed, OutlierRule, Preset, PriorPose, SolverConfig};
use crate::so3::Vec3;
use crate::synth::{
    apply_noise_with, generate_pair, stream_rng, sweep, NoiseSpec, PoseSampler, Purpose, SceneSpec, SweepKind,
    SweepSettings,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "birotation", version, about = "Relative pose estimation by birotation alignment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the relative pose of a correspondence file.
    Solve(SolveArgs),
    /// Generate a synthetic correspondence file and its ground-truth pose.
    Synth(SynthArgs),
    /// Compare estimated poses against ground truth.
    Eval(EvalArgs),
    /// Run a noise or mismatch sweep over synthetic scenes.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Generic,
    Stereo,
    Odometry,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Regularization weight.
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    /// Selection weights as b1,b2,b3.
    #[arg(long, value_parser = parse_tuple::<3>, conflicts_with = "preset")]
    pub beta: Option<[f64; 3]>,
    /// Named selection weights: generic (1,1,1), stereo (0.25,1,1), odometry (1,1,0.25).
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Stop when d_hat / N falls below this value.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_value: f64,
    /// Stop when the relative change of d_hat falls below this value.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_rate: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Resolve the four-fold ambiguity with a positive-depth vote.
    #[arg(long)]
    pub disambiguate: bool,
    /// Keep every correspondence instead of applying the upper-fence outlier rule.
    #[arg(long)]
    pub no_outlier_rejection: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        let beta = match (&self.beta, self.preset) {
            (Some(b), _) => *b,
            (None, Some(PresetArg::Stereo)) => Preset::Stereo.beta(),
            (None, Some(PresetArg::Odometry)) => Preset::Odometry.beta(),
            (None, _) => Preset::Generic.beta(),
        };
        SolverConfig {
            alpha: self.alpha,
            beta,
            tol_value: self.tol_value,
            tol_rate: self.tol_rate,
            max_iters: self.max_iters,
            outlier_rule: if self.no_outlier_rejection { OutlierRule::None } else { OutlierRule::TukeyUpperFence },
            disambiguate: self.disambiguate,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Correspondence file.
    #[arg(long)]
    pub input: PathBuf,
    /// Prior pose file; without it every model starts from its own axis.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the pose here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoseArg {
    Random,
    PureRotation,
    BasisAligned,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n_points: usize,
    #[arg(long, value_enum, default_value_t = PoseArg::Random)]
    pub pose: PoseArg,
    /// Largest rotation angle for random and pure-rotation poses, degrees.
    #[arg(long, default_value_t = 30.0)]
    pub max_deg: f64,
    /// Basis axis (1, 2 or 3) for basis-aligned poses.
    #[arg(long, default_value_t = 1)]
    pub axis: usize,
    /// Rotation angle of basis-aligned poses, degrees.
    #[arg(long, default_value_t = 0.0)]
    pub perturb_deg: f64,
    /// Use a negative scaling factor for basis-aligned poses.
    #[arg(long)]
    pub negative: bool,
    /// Pixel noise on correct matches.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mismatch_rate: f64,
    /// Pixel noise on mismatched correspondences.
    #[arg(long, default_value_t = 10.0)]
    pub outlier_sigma: f64,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Index of the pair within the seed's family.
    #[arg(long, default_value_t = 0)]
    pub pair_index: u64,
    /// Correspondence output (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth pose output (defaults to `<out>.truth.json` when --out is given).
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Cube center as x,y,z.
    #[arg(long, value_parser = parse_tuple::<3>, default_value = "0,0,6")]
    pub cube_center: [f64; 3],
    #[arg(long, default_value_t = 2.0)]
    pub half_extent: f64,
    #[arg(long, default_value_t = 600.0)]
    pub fx: f64,
    #[arg(long, default_value_t = 600.0)]
    pub fy: f64,
    #[arg(long, default_value_t = 320.0)]
    pub u0: f64,
    #[arg(long, default_value_t = 320.0)]
    pub v0: f64,
    /// Image bounds as width,height; points must project inside.
    #[arg(long, value_parser = parse_tuple::<2>)]
    pub image_size: Option<[f64; 2]>,
}

/// Parses exactly `N` comma-separated numbers.
fn parse_tuple<const N: usize>(text: &str) -> std::result::Result<[f64; N], String> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated values, got {}", v.len()))
}

impl SceneArgs {
    fn spec(&self, n_points: usize, pose_sampler: PoseSampler, seed: u64) -> SceneSpec {
        SceneSpec {
            n_points,
            cube_center: Vec3::new(self.cube_center[0], self.cube_center[1], self.cube_center[2]),
            cube_half_extent: self.half_extent,
            intrinsics: Intrinsics { fx: self.fx, fy: self.fy, u0: self.u0, v0: self.v0 },
            image_size: self.image_size,
            pose_sampler,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated pose file or directory of pose files.
    #[arg(long, required = true, num_args = 1..)]
    pub est: Vec<PathBuf>,
    /// Ground-truth pose file or directory, matched in order.
    #[arg(long, required = true, num_args = 1..)]
    pub truth: Vec<PathBuf>,
    /// AUC thresholds in degrees.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Noise,
    Mismatch,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Explicit grid values (comma separated).
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["grid_step", "grid_max"])]
    pub grid: Option<Vec<f64>>,
    /// Grid spacing from 0; used with --grid-max.
    #[arg(long, requires = "grid_max")]
    pub grid_step: Option<f64>,
    #[arg(long, requires = "grid_step")]
    pub grid_max: Option<f64>,
    /// Pairs per grid point.
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Points per pair.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Largest rotation angle of the random poses, degrees.
    #[arg(long, default_value_t = 30.0)]
    pub max_deg: f64,
    /// Inlier pixel noise held fixed during a mismatch sweep.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Mismatch rate held fixed during a noise sweep.
    #[arg(long, default_value_t = 0.0)]
    pub mismatch_rate: f64,
    #[arg(long, default_value_t = 10.0)]
    pub outlier_sigma: f64,
    /// Angle by which the ground truth is perturbed to form the prior, degrees.
    #[arg(long, default_value_t = 5.0)]
    pub prior_perturb_deg: f64,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Why a command failed; selects the exit status.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Solver(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateBearing { .. }
            | Error::TooFewInliers { .. }
            | Error::SingularSystem
            | Error::IndeterminateSign
            | Error::AmbiguousCheirality { .. } => Failure::Solver(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

pub type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_INPUT
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a, stdout, stderr),
        Command::Synth(a) => cmd_synth(a, stdout, stderr),
        Command::Eval(a) => cmd_eval(a, stdout, stderr),
        Command::Sweep(a) => cmd_sweep(a, stdout, stderr),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Input(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_INPUT
        }
        Err(Failure::Solver(msg)) => {
            let _ = writeln!(stderr, "solver failure: {msg}");
            EXIT_SOLVER
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    match out {
        Some(path) => Ok(write_atomic(path, text)?),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(format!("standard output: {e}"))),
    }
}

fn warn(stderr: &mut dyn Write, msg: &str) {
    let _ = writeln!(stderr, "warning: {msg}");
}

pub fn cmd_solve(args: &SolveArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let cfg = args.solver.config();
    cfg.validate()?;
    let _ = writeln!(stderr, "beta = ({}, {}, {})", cfg.beta[0], cfg.beta[1], cfg.beta[2]);
    let set = CorrespondenceFile::read(&args.input)?.to_set()?;
    let prior = match &args.prior {
        Some(path) => {
            let (pose, warning) = PoseFile::read(path)?.to_pose()?;
            if let Some(w) = warning {
                warn(stderr, &format!("{}: {w}", path.display()));
            }
            PriorPose::new(pose.rotation, pose.translation)?
        }
        None => PriorPose::default(),
    };
    let report = solve_detailed(&set, &prior, &cfg)?;
    let init = &report.initialization;
    if init.any_fallback() {
        warn(stderr, &format!("prior translation parallel to a construction axis; fallback for models {:?}", init.fallback));
    }
    let state = report.selected_state();
    let _ = writeln!(
        stderr,
        "model {} selected, {} iterations, d_hat/N = {:e}{}",
        report.selected.index(),
        state.iterations,
        report.estimate.metric,
        if report.pure_rotation { ", pure rotation" } else { "" }
    );
    let mut file = PoseFile::from_estimate(&report.estimate);
    file.converged = Some(state.converged);
    file.initialization = Some(
        if init.default_axes {
            "default-axes"
        } else if init.any_fallback() {
            "prior-with-fallback"
        } else {
            "prior"
        }
        .into(),
    );
    emit(&file.to_json(), args.out.as_deref(), stdout)
}

pub fn cmd_synth(args: &SynthArgs, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Outcome {
    let sampler = match args.pose {
        PoseArg::Random => PoseSampler::Random { max_deg: args.max_deg },
        PoseArg::PureRotation => PoseSampler::PureRotation { max_deg: args.max_deg },
        PoseArg::BasisAligned => PoseSampler::BasisAligned {
            axis: BasisAxis::from_index(args.axis)?,
            perturb_deg: args.perturb_deg,
            sign: if args.negative { Sign::Negative } else { Sign::Positive },
        },
    };
    let spec = args.scene.spec(args.n_points, sampler, args.seed);
    let noise = NoiseSpec { sigma_px: args.sigma, mismatch_rate: args.mismatch_rate, outlier_sigma_px: args.outlier_sigma };
    noise.validate()?;
    let clean = generate_pair(&spec, args.pair_index)?;
    let pair = apply_noise_with(&clean, &noise, &mut stream_rng(args.seed, args.pair_index, Purpose::Noise))?;

    let truth_path = args.truth_out.clone().or_else(|| {
        args.out.as_ref().map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            p.with_file_name(format!("{stem}.truth.json"))
        })
    });
    let truth = PoseFile::from_pose(&pair.truth_rotation, &pair.truth_translation);
    if let Some(path) = &truth_path {
        write_atomic(path, &truth.to_json())?;
    }
    emit(&CorrespondenceFile::from_set(&pair.set).to_json(), args.out.as_deref(), stdout)
}

#[derive(Serialize)]
struct PairReport {
    est: String,
    truth: String,
    eps_r_deg: f64,
    eps_t_deg: f64,
}

#[derive(Serialize)]
struct AucReport {
    threshold_deg: f64,
    auc_percent: f64,
}

#[derive(Serialize)]
struct EvalReport {
    pairs: Vec<PairReport>,
    delta_theta_bar_rad: [f64; 3],
    delta_t_bar: [f64; 3],
    rotation_only: bool,
    auc: Vec<AucReport>,
}

fn collect_poses(inputs: &[PathBuf], stderr: &mut dyn Write) -> Result<Vec<(String, crate::metrics::Pose)>, Failure> {
    let mut out = Vec::new();
    for input in inputs {
        for path in pose_paths(input)? {
            let (pose, warning) = PoseFile::read(&path)?.to_pose()?;
            if let Some(w) = warning {
                warn(stderr, &format!("{}: {w}", path.display()));
            }
            out.push((path.display().to_string(), pose));
        }
    }
    Ok(out)
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    if args.thresholds.is_empty() || !args.thresholds.iter().all(|&t| t.is_finite() && t > 0.0) {
        return Err(Failure::Input("thresholds must be positive".into()));
    }
    let est = collect_poses(&args.est, stderr)?;
    let truth = collect_poses(&args.truth, stderr)?;
    if est.len() != truth.len() {
        return Err(Failure::Input(format!("{} estimates but {} ground-truth poses", est.len(), truth.len())));
    }
    let est_poses: Vec<_> = est.iter().map(|(_, p)| *p).collect();
    let truth_poses: Vec<_> = truth.iter().map(|(_, p)| *p).collect();
    let summary = error_summary(&est_poses, &truth_poses, &args.thresholds)?;
    let report = EvalReport {
        pairs: est
            .iter()
            .zip(&truth)
            .zip(&summary.per_pair)
            .map(|(((e, _), (t, _)), err)| PairReport {
                est: e.clone(),
                truth: t.clone(),
                eps_r_deg: err.eps_r,
                eps_t_deg: err.eps_t,
            })
            .collect(),
        delta_theta_bar_rad: summary.delta_theta_bar.into(),
        delta_t_bar: summary.delta_t_bar.into(),
        rotation_only: summary.rotation_only,
        auc: summary.auc.iter().map(|&(threshold_deg, auc_percent)| AucReport { threshold_deg, auc_percent }).collect(),
    };
    emit(&crate::io::to_json(&report), args.out.as_deref(), stdout)
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Outcome {
    let kind = match args.kind {
        KindArg::Noise => SweepKind::Noise,
        KindArg::Mismatch => SweepKind::Mismatch,
    };
    let cfg = args.solver.config();
    let scene = args.scene.spec(args.points, PoseSampler::Random { max_deg: args.max_deg }, args.solver.seed);
    let mut settings = SweepSettings::new(kind, scene, cfg);
    settings.pairs = args.pairs;
    settings.prior_perturb_deg = args.prior_perturb_deg;
    settings.noise = NoiseSpec { sigma_px: args.sigma, mismatch_rate: args.mismatch_rate, outlier_sigma_px: args.outlier_sigma };
    if let Some(grid) = &args.grid {
        settings.grid = grid.clone();
    } else if let (Some(step), Some(max)) = (args.grid_step, args.grid_max) {
        if !(step > 0.0 && step.is_finite() && max >= 0.0 && max.is_finite()) {
            return Err(Failure::Input("grid step must be positive and grid max non-negative".into()));
        }
        let count = (max / step + 1e-9).floor() as usize;
        // snap the last point so `0.1 * 3` does not overshoot a 0.3 limit
        settings.grid = (0..=count)
            .map(|k| k as f64 * step)
            .map(|v| if (v - max).abs() <= 1e-9 * step { max } else { v })
            .collect();
    }
    let _ = writeln!(
        stderr,
        "{} sweep: {} points x {} pairs x {} correspondences",
        kind.parameter_name(),
        settings.grid.len(),
        settings.pairs,
        args.points
    );
    let report = sweep(&settings)?;
    let failed: usize = report.records.iter().map(|r| r.failures).sum();
    if failed > 0 {
        warn(stderr, &format!("{failed} pair solves failed"));
    }
    emit(&report.to_csv(), args.out.as_deref(), stdout)
}
