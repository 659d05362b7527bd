//! Synthetic two-view scenes: points drawn uniformly in a cube, the reference
//! camera at the world origin, a sampled target pose, pixel noise and
//! mismatches, plus the noise and mismatch sweeps built on top.
//!
//! Every random draw comes from a `ChaCha8Rng` seeded with the run seed and
//! switched to stream `3 * pair_index + purpose` (0 = scene, 1 = noise,
//! 2 = prior perturbation), so a pair's data does not depend on scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::PoseError;
use crate::pose::{BasisAxis, CorrespondenceSet, Intrinsics, Sign};
use crate::solver::{solve, PriorPose, SolverConfig};
use crate::so3::{exp_so3, Rotation, Vec3};

const MAX_POINT_ATTEMPTS: usize = 10_000;
const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Scene = 0,
    Noise = 1,
    Prior = 2,
}

/// The generator for one `(seed, pair, purpose)` stream.
pub fn stream_rng(seed: u64, pair_index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3 * pair_index + purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoseSampler {
    /// Random axis, angle uniform in `[0, max_deg]`, translation direction
    /// uniform on the sphere with length uniform in `[0.5, 2]`.
    Random { max_deg: f64 },
    /// Rotation as above, zero translation.
    PureRotation { max_deg: f64 },
    /// `t = -s * l_axis` (length uniform in `[0.5, 2]`), rotation of exactly
    /// `perturb_deg` about a random axis.
    BasisAligned { axis: BasisAxis, perturb_deg: f64, sign: Sign },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub n_points: usize,
    pub cube_center: Vec3,
    pub cube_half_extent: f64,
    pub intrinsics: Intrinsics,
    /// Optional `(width, height)` in pixels; points must project inside it.
    pub image_size: Option<[f64; 2]>,
    pub pose_sampler: PoseSampler,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n_points: 200,
            cube_center: Vec3::new(0.0, 0.0, 6.0),
            cube_half_extent: 2.0,
            intrinsics: Intrinsics { fx: 600.0, fy: 600.0, u0: 320.0, v0: 320.0 },
            image_size: None,
            pose_sampler: PoseSampler::Random { max_deg: 30.0 },
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 8 {
            return Err(Error::InvalidInput(format!("n_points must be at least 8, got {}", self.n_points)));
        }
        if !(self.cube_half_extent.is_finite() && self.cube_half_extent > 0.0) {
            return Err(Error::InvalidInput("cube half extent must be positive".into()));
        }
        if !self.cube_center.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("cube center must be finite".into()));
        }
        self.intrinsics.validate()?;
        if let Some([w, h]) = self.image_size {
            if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
                return Err(Error::InvalidInput("image size must be positive".into()));
            }
        }
        let angle = match self.pose_sampler {
            PoseSampler::Random { max_deg } | PoseSampler::PureRotation { max_deg } => max_deg,
            PoseSampler::BasisAligned { perturb_deg, .. } => perturb_deg,
        };
        if !(angle.is_finite() && (0.0..=180.0).contains(&angle)) {
            return Err(Error::InvalidInput(format!("rotation angle must lie in [0, 180] degrees, got {angle}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_px: f64,
    pub mismatch_rate: f64,
    pub outlier_sigma_px: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { sigma_px: 0.0, mismatch_rate: 0.0, outlier_sigma_px: 10.0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.sigma_px) || !ok(self.outlier_sigma_px) {
            return Err(Error::InvalidInput("noise sigmas must be non-negative".into()));
        }
        if !(0.0..=0.3).contains(&self.mismatch_rate) {
            return Err(Error::InvalidInput(format!(
                "mismatch rate must lie in [0, 0.3], got {}",
                self.mismatch_rate
            )));
        }
        Ok(())
    }

    pub fn outlier_count(&self, n: usize) -> usize {
        // guard against 0.3 * 200 = 60.000000000000007
        ((self.mismatch_rate * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// A generated correspondence set with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub set: CorrespondenceSet,
    pub truth_rotation: Rotation,
    pub truth_translation: Vec3,
    pub inlier_labels: Vec<bool>,
    /// Scene points in the reference (world) frame.
    pub points: Vec<Vec3>,
}

pub fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Rotation by `angle_deg` about a uniformly random axis.
pub fn random_rotation<R: Rng>(rng: &mut R, angle_deg: f64) -> Rotation {
    exp_so3(&(random_unit(rng) * angle_deg.to_radians()))
}

fn sample_pose<R: Rng>(sampler: &PoseSampler, rng: &mut R) -> (Rotation, Vec3) {
    match *sampler {
        PoseSampler::Random { max_deg } => {
            let angle = rng.random_range(0.0..=max_deg);
            let r = random_rotation(rng, angle);
            let t = random_unit(rng) * rng.random_range(0.5..=2.0);
            (r, t)
        }
        PoseSampler::PureRotation { max_deg } => {
            let angle = rng.random_range(0.0..=max_deg);
            (random_rotation(rng, angle), Vec3::zeros())
        }
        PoseSampler::BasisAligned { axis, perturb_deg, sign } => {
            let r = random_rotation(rng, perturb_deg);
            let t = axis.direction() * (-sign.value() * rng.random_range(0.5..=2.0));
            (r, t)
        }
    }
}

fn visible(spec: &SceneSpec, p: &Vec3) -> bool {
    if p.z <= MIN_DEPTH {
        return false;
    }
    match spec.image_size {
        None => true,
        Some([w, h]) => {
            let [u, v] = spec.intrinsics.project(p);
            (0.0..w).contains(&u) && (0.0..h).contains(&v)
        }
    }
}

/// Pair `pair_index` of the scene family described by `spec`.
pub fn generate_pair(spec: &SceneSpec, pair_index: u64) -> Result<LabeledPair> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, pair_index, Purpose::Scene);
    let (rotation, translation) = sample_pose(&spec.pose_sampler, &mut rng);
    let h = spec.cube_half_extent;
    let k = spec.intrinsics;
    let mut points = Vec::with_capacity(spec.n_points);
    let mut matches = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let offset = Vec3::new(rng.random_range(-h..=h), rng.random_range(-h..=h), rng.random_range(-h..=h));
            let p1 = spec.cube_center + offset;
            let p2 = rotation * p1 + translation;
            if visible(spec, &p1) && visible(spec, &p2) {
                let [u1, v1] = k.project(&p1);
                let [u2, v2] = k.project(&p2);
                points.push(p1);
                matches.push([u1, v1, u2, v2]);
                break;
            }
            if attempts >= MAX_POINT_ATTEMPTS {
                return Err(Error::VisibilityExhausted { attempts });
            }
        }
    }
    Ok(LabeledPair {
        set: CorrespondenceSet::from_pixels(k, k, &matches)?,
        truth_rotation: rotation,
        truth_translation: translation,
        inlier_labels: vec![true; spec.n_points],
        points,
    })
}

/// Noise-free scene, deterministic in `spec.seed`.
pub fn generate_scene(spec: &SceneSpec) -> Result<LabeledPair> {
    generate_pair(spec, 0)
}

/// Marks `ceil(rate * N)` random matches as outliers and perturbs both views'
/// pixels with Gaussian noise (inlier or outlier sigma).
///
/// The same four standard-normal draws per match are used whatever the sigmas,
/// so varying only the sigma keeps the noise pattern.
pub fn apply_noise_with<R: Rng>(pair: &LabeledPair, noise: &NoiseSpec, rng: &mut R) -> Result<LabeledPair> {
    noise.validate()?;
    let n = pair.set.len();
    let outliers = noise.outlier_count(n);
    let mut labels = vec![true; n];
    for idx in rand::seq::index::sample(rng, n, outliers) {
        labels[idx] = false;
    }
    let mut matches = pair.set.to_matches();
    for (m, &inlier) in matches.iter_mut().zip(&labels) {
        let sigma = if inlier { noise.sigma_px } else { noise.outlier_sigma_px };
        for v in m.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += sigma * z;
        }
    }
    Ok(LabeledPair {
        set: CorrespondenceSet::from_pixels(pair.set.intrinsics1, pair.set.intrinsics2, &matches)?,
        inlier_labels: labels,
        ..pair.clone()
    })
}

pub fn apply_noise(pair: &LabeledPair, noise: &NoiseSpec, seed: u64) -> Result<LabeledPair> {
    apply_noise_with(pair, noise, &mut stream_rng(seed, 0, Purpose::Noise))
}

/// Truth rotated by exactly `deg` about a random axis, translation direction
/// tilted by exactly `deg`. A zero translation stays zero.
pub fn perturb_pose<R: Rng>(rotation: &Rotation, translation: &Vec3, deg: f64, rng: &mut R) -> PriorPose {
    let r = random_rotation(rng, deg) * *rotation;
    let t = if translation.norm() > 0.0 {
        let mut axis = translation.cross(&random_unit(rng));
        while axis.norm() < 1e-9 {
            axis = translation.cross(&random_unit(rng));
        }
        exp_so3(&(axis.normalize() * deg.to_radians())) * *translation
    } else {
        Vec3::zeros()
    };
    PriorPose { rotation: r.renormalized(), translation: t }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Noise,
    Mismatch,
}

impl SweepKind {
    pub fn parameter_name(self) -> &'static str {
        match self {
            SweepKind::Noise => "sigma_px",
            SweepKind::Mismatch => "mismatch_rate",
        }
    }

    /// 101 points `0, 0.02, ..., 2` for noise, 31 points `0, 0.01, ..., 0.3` for mismatch.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::Noise => (0..=100).map(|k| k as f64 / 50.0).collect(),
            SweepKind::Mismatch => (0..=30).map(|k| k as f64 / 100.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub pairs: usize,
    pub scene: SceneSpec,
    /// Fixed noise settings; the swept field is overwritten per grid point.
    pub noise: NoiseSpec,
    pub prior_perturb_deg: f64,
    pub solver: SolverConfig,
}

impl SweepSettings {
    pub fn new(kind: SweepKind, scene: SceneSpec, solver: SolverConfig) -> Self {
        let noise = match kind {
            SweepKind::Noise => NoiseSpec::default(),
            SweepKind::Mismatch => NoiseSpec { sigma_px: 0.1, ..NoiseSpec::default() },
        };
        SweepSettings { kind, grid: kind.default_grid(), pairs: 100, scene, noise, prior_perturb_deg: 5.0, solver }
    }

    fn noise_at(&self, value: f64) -> NoiseSpec {
        match self.kind {
            SweepKind::Noise => NoiseSpec { sigma_px: value, ..self.noise },
            SweepKind::Mismatch => NoiseSpec { mismatch_rate: value, ..self.noise },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("sweep grid is empty".into()));
        }
        if self.pairs == 0 {
            return Err(Error::InvalidInput("pairs per point must be at least 1".into()));
        }
        if !(self.prior_perturb_deg.is_finite() && self.prior_perturb_deg >= 0.0) {
            return Err(Error::InvalidInput("prior perturbation must be non-negative".into()));
        }
        for &v in &self.grid {
            if !v.is_finite() {
                return Err(Error::InvalidInput("sweep grid values must be finite".into()));
            }
            self.noise_at(v).validate()?;
        }
        self.scene.validate()?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub parameter: f64,
    /// Mean over pairs the solver handled (NaN when none did).
    pub mean_eps_r: f64,
    pub mean_eps_t: f64,
    pub failures: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub records: Vec<SweepRecord>,
}

/// Solves one noisy, prior-perturbed pair.
pub fn run_pair(settings: &SweepSettings, value: f64, pair_index: u64) -> Result<PoseError> {
    let seed = settings.scene.seed;
    let scene = generate_pair(&settings.scene, pair_index)?;
    let noisy = apply_noise_with(&scene, &settings.noise_at(value), &mut stream_rng(seed, pair_index, Purpose::Noise))?;
    let prior = perturb_pose(
        &scene.truth_rotation,
        &scene.truth_translation,
        settings.prior_perturb_deg,
        &mut stream_rng(seed, pair_index, Purpose::Prior),
    );
    let est = solve(&noisy.set, &prior, &settings.solver)?;
    Ok(PoseError::between(&est.rotation, &est.t_dir, &scene.truth_rotation, &scene.truth_translation))
}

/// Runs every `(grid point, pair)` job in parallel and averages per grid point.
/// Pair `k` sees the same scene and noise draws at every grid point.
pub fn sweep(settings: &SweepSettings) -> Result<SweepReport> {
    settings.validate()?;
    let mut grid = settings.grid.clone();
    grid.sort_by(f64::total_cmp);
    let jobs: Vec<(usize, u64)> =
        (0..grid.len()).flat_map(|g| (0..settings.pairs as u64).map(move |p| (g, p))).collect();
    let outcomes: Vec<Result<PoseError>> = jobs.par_iter().map(|&(g, p)| run_pair(settings, grid[g], p)).collect();

    let mut records = Vec::with_capacity(grid.len());
    for (g, chunk) in outcomes.chunks(settings.pairs).enumerate() {
        let (mut sum_r, mut sum_t, mut ok, mut failures) = (0.0, 0.0, 0usize, 0usize);
        for outcome in chunk {
            match outcome {
                Ok(e) => {
                    sum_r += e.eps_r;
                    sum_t += e.eps_t;
                    ok += 1;
                }
                Err(Error::VisibilityExhausted { attempts }) => {
                    return Err(Error::VisibilityExhausted { attempts: *attempts });
                }
                Err(_) => failures += 1,
            }
        }
        let mean = |s: f64| if ok > 0 { s / ok as f64 } else { f64::NAN };
        records.push(SweepRecord {
            parameter: grid[g],
            mean_eps_r: mean(sum_r),
            mean_eps_t: mean(sum_t),
            failures,
            pairs: settings.pairs,
        });
    }
    Ok(SweepReport { kind: settings.kind, records })
}
