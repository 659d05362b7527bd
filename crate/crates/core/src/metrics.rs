//! Pose accuracy: angular errors, AUC of the cumulative error curve and mean
//! absolute component errors.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::so3::{log_so3, Rotation, Vec3};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [1.0, 3.0, 5.0, 10.0];

/// Geodesic angle between two rotations, in degrees.
///
/// Evaluated as `atan2(sin, cos)` of the relative rotation: the plain
/// `acos((tr - 1) / 2)` loses about 1e-6 degrees of resolution near zero.
pub fn rotation_error(r_hat: &Rotation, r_star: &Rotation) -> f64 {
    r_star.angle_to(r_hat).to_degrees()
}

/// Sign-folded angle between translation directions, in degrees.
/// Two zero vectors give 0, a single zero vector gives 180.
pub fn translation_error(t_hat: &Vec3, t_star: &Vec3) -> f64 {
    let (a, b) = (t_hat.norm(), t_star.norm());
    match (a == 0.0, b == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 180.0,
        _ => t_hat.cross(t_star).norm().atan2(t_hat.dot(t_star).abs()).to_degrees(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub eps_r: f64,
    pub eps_t: f64,
}

impl PoseError {
    pub fn between(r_hat: &Rotation, t_hat: &Vec3, r_star: &Rotation, t_star: &Vec3) -> Self {
        PoseError { eps_r: rotation_error(r_hat, r_star), eps_t: translation_error(t_hat, t_star) }
    }

    pub fn max(&self) -> f64 {
        self.eps_r.max(self.eps_t)
    }
}

/// `100 / psi * integral_0^psi F(x) dx` for the empirical CDF `F`, per threshold.
pub fn auc(errors: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let m = errors.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&psi| {
            let headroom: f64 = errors.iter().map(|&e| (psi - e).max(0.0) / psi).sum();
            (psi, 100.0 * headroom / m)
        })
        .collect()
}

/// A ground-truth or estimated pose, `p2 = R p1 + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    /// Mean absolute rotation-vector difference, radians.
    pub delta_theta_bar: Vec3,
    /// Mean absolute translation difference, in the input units.
    pub delta_t_bar: Vec3,
    pub per_pair: Vec<PoseError>,
    pub auc: Vec<(f64, f64)>,
    /// `true` when every ground-truth translation is zero and AUC uses `eps_r` only.
    pub rotation_only: bool,
}

/// `log R_hat`, flipped to the antipodal representative near `pi` when that is
/// closer to `theta_star`.
fn aligned_log(r_hat: &Rotation, theta_star: &Vec3) -> Vec3 {
    let theta = log_so3(r_hat);
    let angle = theta.norm();
    if angle > 0.0 && PI - angle < 1e-6 {
        let flipped = -theta;
        if (flipped - theta_star).norm() < (theta - theta_star).norm() {
            return flipped;
        }
    }
    theta
}

pub fn error_summary(estimates: &[Pose], truths: &[Pose], thresholds: &[f64]) -> Result<ErrorSummary> {
    if estimates.len() != truths.len() {
        return Err(Error::LengthMismatch { left: estimates.len(), right: truths.len() });
    }
    if estimates.is_empty() {
        return Err(Error::InvalidInput("no poses to evaluate".into()));
    }
    let m = estimates.len() as f64;
    let mut dtheta = Vec3::zeros();
    let mut dt = Vec3::zeros();
    let mut per_pair = Vec::with_capacity(estimates.len());
    for (est, truth) in estimates.iter().zip(truths) {
        let theta_star = log_so3(&truth.rotation);
        dtheta += (aligned_log(&est.rotation, &theta_star) - theta_star).abs();
        dt += (est.translation - truth.translation).abs();
        per_pair.push(PoseError::between(&est.rotation, &est.translation, &truth.rotation, &truth.translation));
    }
    let rotation_only = truths.iter().all(|t| t.translation == Vec3::zeros());
    let errors: Vec<f64> =
        per_pair.iter().map(|p| if rotation_only { p.eps_r } else { p.max() }).collect();
    Ok(ErrorSummary {
        delta_theta_bar: dtheta / m,
        delta_t_bar: dt / m,
        auc: auc(&errors, thresholds),
        per_pair,
        rotation_only,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::exp_so3;

    #[test]
    fn rotation_error_examples() {
        let r = exp_so3(&Vec3::new(0.3, -0.2, 0.5));
        assert_eq!(rotation_error(&r, &r), 0.0);
        let turned = r * exp_so3(&Vec3::new(PI / 2.0, 0.0, 0.0));
        assert!((rotation_error(&turned, &r) - 90.0).abs() < 1e-9);
        let other = exp_so3(&Vec3::new(-0.1, 0.4, 0.2));
        let oracle = log_so3(&(r.transpose() * other)).norm().to_degrees();
        assert!((rotation_error(&other, &r) - oracle).abs() < 1e-9);
    }

    #[test]
    fn translation_error_examples() {
        let t = Vec3::new(0.3, -1.0, 0.2);
        assert!(translation_error(&(t * 2.0), &t).abs() < 1e-6);
        assert!(translation_error(&-t, &t).abs() < 1e-6);
        let e = translation_error(&Vec3::new(1.0, 0.0, 0.0), &(Vec3::new(1.0, 1.0, 0.0) / 2f64.sqrt()));
        assert!((e - 45.0).abs() < 1e-9);
        assert_eq!(translation_error(&Vec3::zeros(), &Vec3::zeros()), 0.0);
        assert_eq!(translation_error(&Vec3::zeros(), &t), 180.0);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.0], &[10.0]), vec![(10.0, 100.0)]);
        assert_eq!(auc(&[5.0], &[10.0]), vec![(10.0, 50.0)]);
        let v = auc(&[1.0, 3.0, 20.0], &[10.0])[0].1;
        assert!((v - 160.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn summary_examples() {
        let truth = Pose { rotation: exp_so3(&Vec3::new(0.1, 0.2, 0.3)), translation: Vec3::new(1.0, 0.0, 0.0) };
        let s = error_summary(&[truth], &[truth], &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(s.delta_theta_bar, Vec3::zeros());
        assert!(s.auc.iter().all(|&(_, v)| v == 100.0));

        let est = Pose { rotation: exp_so3(&Vec3::new(0.11, 0.18, 0.33)), ..truth };
        let s = error_summary(&[est], &[truth], &DEFAULT_THRESHOLDS).unwrap();
        assert!((s.delta_theta_bar - Vec3::new(0.01, 0.02, 0.03)).norm() < 1e-12);
        assert!(matches!(error_summary(&[est], &[], &[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn near_half_turn_sign_is_aligned() {
        let theta_star = Vec3::new(PI - 1e-9, 0.0, 0.0);
        let truth = Pose { rotation: exp_so3(&theta_star), translation: Vec3::zeros() };
        let est = Pose { rotation: exp_so3(&-theta_star), translation: Vec3::zeros() };
        let s = error_summary(&[est], &[truth], &[1.0]).unwrap();
        assert!(s.delta_theta_bar.norm() < 1e-6);
        assert!(s.rotation_only);
    }
}
