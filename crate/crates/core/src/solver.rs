//! Joint minimization of the three birotation energies, model selection,
//! sign determination and pose recovery.

use nalgebra::{Matrix6, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{
    cheirality_select, enumerate_ambiguity, recover_pose, triangulate_midpoint, BasisAxis, CorrespondenceSet,
    RelativePoseEstimate, Sign,
};
use crate::residual::{discretized_metric, linearize, regularizer, InlierMask, Linearization, ResidualVector};
use crate::so3::{exp_so3, Rotation, Vec3};

/// Minimum number of weighted rows for the 6-dof system.
pub const MIN_INLIERS: usize = 6;

/// Cross products shorter than this make an initialization fall back to the default axis.
const DEGENERATE_INIT: f64 = 1e-9;

/// Below this weighted `d_hat / N` the models are considered numerically exact;
/// selection among them then prefers the least-rotated (lowest energy) model.
const EXACT_FIT: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutlierRule {
    /// Drop residuals above `Q3 + 1.5 IQR` of `|e|`, recomputed every iteration.
    TukeyUpperFence,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: [f64; 3],
    pub tol_value: f64,
    pub tol_rate: f64,
    pub max_iters: usize,
    pub outlier_rule: OutlierRule,
    pub disambiguate: bool,
    pub seed: u64,
    /// Per-match sign evidence below this magnitude abstains from the vote.
    pub parallax_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 1e-3,
            beta: [1.0, 1.0, 1.0],
            tol_value: 1e-8,
            tol_rate: 1e-6,
            max_iters: 200,
            outlier_rule: OutlierRule::TukeyUpperFence,
            disambiguate: false,
            seed: 0,
            parallax_floor: 1e-6,
        }
    }
}

/// Named selection weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Generic,
    Stereo,
    Odometry,
}

impl Preset {
    pub fn beta(self) -> [f64; 3] {
        match self {
            Preset::Generic => [1.0, 1.0, 1.0],
            Preset::Stereo => [0.25, 1.0, 1.0],
            Preset::Odometry => [1.0, 1.0, 0.25],
        }
    }
}

impl SolverConfig {
    pub fn with_preset(preset: Preset) -> Self {
        SolverConfig { beta: preset.beta(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.alpha) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !self.beta.iter().all(|&b| positive(b)) {
            return Err(Error::InvalidInput(format!("beta components must be positive, got {:?}", self.beta)));
        }
        if !positive(self.tol_value) || !positive(self.tol_rate) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        if !(self.parallax_floor.is_finite() && self.parallax_floor >= 0.0) {
            return Err(Error::InvalidInput("parallax_floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// One birotation model during or after optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct BirotationModelState {
    pub model: BasisAxis,
    pub r1: Rotation,
    pub r2: Rotation,
    /// Metric at the current rotations (infinite before the first evaluation).
    pub d_hat: f64,
    pub mask: InlierMask,
    pub iterations: usize,
    pub converged: bool,
}

impl BirotationModelState {
    pub fn new(model: BasisAxis, r1: Rotation, r2: Rotation) -> Self {
        BirotationModelState {
            model,
            r1,
            r2,
            d_hat: f64::INFINITY,
            mask: InlierMask(Vec::new()),
            iterations: 0,
            converged: false,
        }
    }

    /// `d_hat + alpha * (||log R1||^2 + ||log R2||^2)`.
    pub fn energy(&self, alpha: f64) -> f64 {
        self.d_hat + alpha * regularizer(&self.r1, &self.r2)
    }
}

/// Prior relative pose, `p2 = R p1 + t`. A zero translation requests the
/// default-axis start for every model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorPose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Default for PriorPose {
    fn default() -> Self {
        PriorPose { rotation: Rotation::identity(), translation: Vec3::zeros() }
    }
}

impl PriorPose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Result<Self> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("prior translation is not finite".into()));
        }
        Ok(PriorPose { rotation, translation })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub states: [BirotationModelState; 3],
    /// `true` where the prior translation was (nearly) parallel to the
    /// construction axis and the model started from its default axis instead.
    pub fallback: [bool; 3],
    /// `true` when the prior had no translation.
    pub default_axes: bool,
}

impl Initialization {
    pub fn any_fallback(&self) -> bool {
        self.fallback.iter().any(|&f| f)
    }
}

/// Builds `R2` so that its row for `axis` is `-t_hat`, or `None` when the cross
/// product with the construction axis vanishes.
fn aligning_rotation(axis: BasisAxis, t: &Vec3) -> Option<Rotation> {
    let lead = -t.normalize();
    // (reference axis for the cross product, index of the row it produces)
    let (reference, next) = match axis {
        BasisAxis::X => (BasisAxis::Z, 1),
        BasisAxis::Y => (BasisAxis::X, 2),
        BasisAxis::Z => (BasisAxis::Y, 0),
    };
    let second = reference.direction().cross(&lead);
    let norm = second.norm();
    if norm.is_nan() || norm < DEGENERATE_INIT {
        return None;
    }
    let second = second / norm;
    let third = lead.cross(&second).normalize();
    let mut rows = [Vec3::zeros(); 3];
    let i = axis.position();
    rows[i] = lead;
    rows[next] = second;
    rows[3 - i - next] = third;
    Some(Rotation::from_rows_unchecked(&rows[0], &rows[1], &rows[2]).renormalized())
}

/// Starts each model at `R2` aligning the prior translation with its axis and
/// `R1 = R2 R_init`.
pub fn initialize_models(prior: &PriorPose) -> Initialization {
    let default_axes = prior.translation == Vec3::zeros();
    let mut fallback = [false; 3];
    let states = BasisAxis::ALL.map(|axis| {
        let t = if default_axes { -axis.direction() } else { prior.translation };
        let r2 = match aligning_rotation(axis, &t) {
            Some(r) => r,
            None => {
                fallback[axis.position()] = true;
                aligning_rotation(axis, &-axis.direction()).unwrap_or_default()
            }
        };
        BirotationModelState::new(axis, (r2 * prior.rotation).renormalized(), r2)
    });
    Initialization { states, fallback, default_axes }
}

/// Type-7 quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn inlier_floor(n: usize) -> usize {
    MIN_INLIERS.max(n.div_ceil(4))
}

fn weights(values: &[f64], usable: &[bool], rule: OutlierRule) -> InlierMask {
    let candidates: Vec<usize> = (0..values.len()).filter(|&n| usable[n]).collect();
    let mut mask = vec![false; values.len()];
    if candidates.is_empty() {
        return InlierMask(mask);
    }
    match rule {
        OutlierRule::None => {
            for &n in &candidates {
                mask[n] = true;
            }
        }
        OutlierRule::TukeyUpperFence => {
            let mut sorted: Vec<f64> = candidates.iter().map(|&n| values[n].abs()).collect();
            sorted.sort_by(f64::total_cmp);
            let q1 = quantile_sorted(&sorted, 0.25);
            let q3 = quantile_sorted(&sorted, 0.75);
            let fence = q3 + 1.5 * (q3 - q1);
            let mut kept = 0;
            for &n in &candidates {
                if values[n].abs() <= fence {
                    mask[n] = true;
                    kept += 1;
                }
            }
            let floor = inlier_floor(values.len()).min(candidates.len());
            if kept < floor {
                let mut order = candidates.clone();
                // stable: equal magnitudes keep index order
                order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
                mask.iter_mut().for_each(|m| *m = false);
                for &n in order.iter().take(floor) {
                    mask[n] = true;
                }
            }
        }
    }
    InlierMask(mask)
}

/// Tukey upper-fence mask on `|e|`, keeping at least `max(6, ceil(N/4))` entries.
pub fn upper_quartile_weights(e: &ResidualVector) -> InlierMask {
    weights(&e.values, &vec![true; e.len()], OutlierRule::TukeyUpperFence)
}

struct Evaluation {
    lin: Linearization,
    mask: InlierMask,
    d_hat: f64,
}

fn evaluate(state: &BirotationModelState, set: &CorrespondenceSet, cfg: &SolverConfig) -> Evaluation {
    let lin = linearize(state.model, &state.r1, &state.r2, set);
    let mask = weights(&lin.residuals.values, &lin.usable, cfg.outlier_rule);
    let d_hat = discretized_metric(&lin.residuals, &mask);
    Evaluation { lin, mask, d_hat }
}

/// Recomputes the mask and `d_hat` of `state` at its current rotations.
pub fn evaluate_state(
    state: &BirotationModelState,
    set: &CorrespondenceSet,
    cfg: &SolverConfig,
) -> BirotationModelState {
    let ev = evaluate(state, set, cfg);
    BirotationModelState { mask: ev.mask, d_hat: ev.d_hat, ..state.clone() }
}

/// Solves `(J^T L J + alpha I) d = -J^T L e`.
fn increment(lin: &Linearization, mask: &InlierMask, alpha: f64) -> Result<Vector6<f64>> {
    let found = mask.count();
    if found < MIN_INLIERS {
        return Err(Error::TooFewInliers { found, required: MIN_INLIERS });
    }
    solve_normal_equations(lin, mask, alpha)
}

fn solve_normal_equations(lin: &Linearization, mask: &InlierMask, alpha: f64) -> Result<Vector6<f64>> {
    let mut h = Matrix6::<f64>::identity() * alpha;
    let mut g = Vector6::<f64>::zeros();
    for ((row, &e), &keep) in lin.rows.iter().zip(&lin.residuals.values).zip(&mask.0) {
        if !keep {
            continue;
        }
        let j = Vector6::from_row_slice(&row.to_array());
        h += j * j.transpose();
        g += j * e;
    }
    let chol = h.cholesky().ok_or(Error::SingularSystem)?;
    let delta = chol.solve(&(-g));
    if delta.iter().all(|v| v.is_finite()) {
        Ok(delta)
    } else {
        Err(Error::SingularSystem)
    }
}

fn apply(state: &BirotationModelState, delta: &Vector6<f64>) -> (Rotation, Rotation) {
    let d1 = Vec3::new(delta[0], delta[1], delta[2]);
    let d2 = Vec3::new(delta[3], delta[4], delta[5]);
    ((exp_so3(&d1) * state.r1).renormalized(), (exp_so3(&d2) * state.r2).renormalized())
}

/// One Gauss-Newton iteration; returns the updated state and the metric
/// evaluated before the update.
fn advance(
    state: &BirotationModelState,
    set: &CorrespondenceSet,
    cfg: &SolverConfig,
) -> Result<(BirotationModelState, f64)> {
    let ev = evaluate(state, set, cfg);
    let delta = increment(&ev.lin, &ev.mask, cfg.alpha)?;
    let (r1, r2) = apply(state, &delta);
    let next = BirotationModelState {
        r1,
        r2,
        mask: ev.mask,
        d_hat: ev.d_hat,
        iterations: state.iterations + 1,
        ..state.clone()
    };
    Ok((next, ev.d_hat))
}

/// One iteration: weight, linearize, solve the normal equations, apply the
/// left update, then re-evaluate `d_hat` at the new rotations.
pub fn step(state: &BirotationModelState, set: &CorrespondenceSet, cfg: &SolverConfig) -> Result<BirotationModelState> {
    let (next, _) = advance(state, set, cfg)?;
    Ok(evaluate_state(&next, set, cfg))
}

/// Iterates until `d_hat / N` or its relative change drops below the
/// thresholds, or `max_iters` is reached (`converged = false`).
///
/// Both tests look at the metric measured at the start of an iteration; the
/// step taken in that iteration is kept.
pub fn optimize_model(
    state: &BirotationModelState,
    set: &CorrespondenceSet,
    cfg: &SolverConfig,
) -> Result<BirotationModelState> {
    cfg.validate()?;
    let n = set.len() as f64;
    let mut current = state.clone();
    let mut previous: Option<f64> = None;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let (next, d_hat) = advance(&current, set, cfg)?;
        current = next;
        let small = d_hat / n < cfg.tol_value;
        let flat = previous.is_some_and(|p| (p - d_hat).abs() / p.max(f64::EPSILON) < cfg.tol_rate);
        if small || flat {
            converged = true;
            break;
        }
        previous = Some(d_hat);
    }
    let mut done = evaluate_state(&current, set, cfg);
    done.converged = converged;
    Ok(done)
}

/// `argmin_i beta_i d_hat_i`, smallest index on ties. When the weighted
/// metrics are numerically zero the least-rotated of those models wins.
pub fn select_model(states: &[BirotationModelState; 3], cfg: &SolverConfig) -> BasisAxis {
    let weighted: Vec<f64> = states
        .iter()
        .map(|s| cfg.beta[s.model.position()] * s.d_hat / s.mask.len().max(1) as f64)
        .collect();
    let best = weighted.iter().copied().fold(f64::INFINITY, f64::min);
    let pick = if best <= EXACT_FIT {
        (0..3)
            .filter(|&k| weighted[k] <= EXACT_FIT)
            .min_by(|&a, &b| states[a].energy(cfg.alpha).total_cmp(&states[b].energy(cfg.alpha)))
    } else {
        (0..3).min_by(|&a, &b| weighted[a].total_cmp(&weighted[b]))
    };
    states[pick.unwrap_or(0)].model
}

/// Signed evidence for `s > 0` of one match in the aligned frames, or `None`
/// when a depth is not positive.
fn sign_evidence(model: BasisAxis, p1: &Vec3, p2: &Vec3) -> Option<f64> {
    if !(p1.z > 0.0 && p2.z > 0.0) {
        return None;
    }
    Some(match model {
        BasisAxis::X => p1.x / p1.z - p2.x / p2.z,
        BasisAxis::Y => p1.y / p1.z - p2.y / p2.z,
        BasisAxis::Z => (p2.x / p2.z).abs() - (p1.x / p1.z).abs(),
    })
}

/// Majority vote of the per-match sign rule over inliers, falling back to the
/// positive-depth count of the two translation signs.
pub fn determine_sign(state: &BirotationModelState, set: &CorrespondenceSet, cfg: &SolverConfig) -> Result<Sign> {
    let inlier = |n: usize| state.mask.0.get(n).copied().unwrap_or(true);
    let (mut positive, mut negative) = (0usize, 0usize);
    for (n, c) in set.iter().enumerate() {
        if !inlier(n) {
            continue;
        }
        let Some(ev) = sign_evidence(state.model, &(state.r1 * c.bar1), &(state.r2 * c.bar2)) else {
            continue;
        };
        if ev > cfg.parallax_floor {
            positive += 1;
        } else if ev < -cfg.parallax_floor {
            negative += 1;
        }
    }
    if positive != negative {
        return Ok(if positive > negative { Sign::Positive } else { Sign::Negative });
    }

    let count = |sign: Sign| {
        let cand = recover_pose(&state.r1, &state.r2, state.model, sign);
        set.iter()
            .enumerate()
            .filter(|&(n, _)| inlier(n))
            .filter_map(|(_, c)| triangulate_midpoint(&cand.rotation, &cand.t_dir, &c.bar1, &c.bar2))
            .filter(|&(z1, z2)| z1 > 0.0 && z2 > 0.0)
            .count()
    };
    let (up, down) = (count(Sign::Positive), count(Sign::Negative));
    match up.cmp(&down) {
        std::cmp::Ordering::Greater => Ok(Sign::Positive),
        std::cmp::Ordering::Less => Ok(Sign::Negative),
        std::cmp::Ordering::Equal => Err(Error::IndeterminateSign),
    }
}

/// Everything `solve` computed on the way to its estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub estimate: RelativePoseEstimate,
    pub states: [BirotationModelState; 3],
    pub selected: BasisAxis,
    pub initialization: Initialization,
    pub pure_rotation: bool,
}

impl SolveReport {
    pub fn selected_state(&self) -> &BirotationModelState {
        &self.states[self.selected.position()]
    }
}

pub fn solve(set: &CorrespondenceSet, prior: &PriorPose, cfg: &SolverConfig) -> Result<RelativePoseEstimate> {
    solve_detailed(set, prior, cfg).map(|r| r.estimate)
}

/// Runs all three models and keeps the per-model states in the report.
///
/// A model whose optimization fails is kept in the report with an infinite
/// metric; the call only fails when all three do.
pub fn solve_detailed(set: &CorrespondenceSet, prior: &PriorPose, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = set.len();
    if n < MIN_INLIERS {
        return Err(Error::TooFewInliers { found: n, required: MIN_INLIERS });
    }
    let initialization = initialize_models(prior);
    let outcomes: Vec<Result<BirotationModelState>> = initialization
        .states
        .par_iter()
        .map(|s| optimize_model(s, set, cfg))
        .collect();
    if let Some(Err(e)) = outcomes.iter().find(|o| o.is_err()).filter(|_| outcomes.iter().all(|o| o.is_err())) {
        return Err(e.clone());
    }
    let mut states = initialization.states.clone();
    for (slot, outcome) in states.iter_mut().zip(outcomes) {
        match outcome {
            Ok(s) => *slot = s,
            Err(_) => {
                slot.d_hat = f64::INFINITY;
                slot.mask = InlierMask(vec![false; n]);
            }
        }
    }

    let selected = select_model(&states, cfg);
    let chosen = &states[selected.position()];
    let metric = cfg.beta[selected.position()] * chosen.d_hat / n as f64;

    let (mut estimate, pure_rotation) = match determine_sign(chosen, set, cfg) {
        Ok(sign) => (recover_pose(&chosen.r1, &chosen.r2, selected, sign), false),
        Err(Error::IndeterminateSign) if states.iter().all(|s| s.d_hat / (n as f64) < cfg.tol_value) => {
            let mut est = recover_pose(&chosen.r1, &chosen.r2, selected, Sign::Positive);
            est.t_dir = Vec3::zeros();
            (est, true)
        }
        Err(e) => return Err(e),
    };
    if cfg.disambiguate && !pure_rotation {
        let inliers = inlier_subset(set, &chosen.mask)?;
        estimate = cheirality_select(&enumerate_ambiguity(&chosen.r1, &chosen.r2, selected), &inliers)?;
    }
    estimate.metric = metric;
    Ok(SolveReport { estimate, states, selected, initialization, pure_rotation })
}

fn inlier_subset(set: &CorrespondenceSet, mask: &InlierMask) -> Result<CorrespondenceSet> {
    let matches: Vec<[f64; 4]> = set
        .to_matches()
        .into_iter()
        .zip(&mask.0)
        .filter(|(_, &keep)| keep)
        .map(|(m, _)| m)
        .collect();
    CorrespondenceSet::from_pixels(set.intrinsics1, set.intrinsics2, &matches)
}
