//! Angular residuals of the three birotation models, their Jacobians under
//! left perturbation, the masked metric `d_hat` and the regularized energy.
//!
//! For model `i` with angle rows `(j, k)` the residual of one match is
//! `atan2(r1_j.p1, r1_k.p1) - atan2(r2_j.p2, r2_k.p2)`, wrapped into `(-pi, pi]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::pose::{BasisAxis, CorrespondenceSet};
use crate::so3::{log_so3, Rotation, Vec3};

/// Both angle components below this magnitude make the model angle undefined.
pub const DEGENERATE_COMPONENT: f64 = 1e-12;

/// Floor on the squared Jacobian denominators; matches below it are masked out.
pub const JACOBIAN_FLOOR: f64 = 1e-12;

/// One residual per correspondence for a given model.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    pub model: BasisAxis,
    pub values: Vec<f64>,
}

impl ResidualVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Binary weights: `true` keeps a correspondence in the metric and the normal equations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InlierMask(pub Vec<bool>);

impl InlierMask {
    pub fn all(n: usize) -> Self {
        InlierMask(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, n: usize) -> bool {
        self.0[n]
    }
}

/// Partial derivatives of one residual with respect to the left perturbations
/// of `R1` and `R2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianRow {
    pub d_theta1: Vec3,
    pub d_theta2: Vec3,
}

impl JacobianRow {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.d_theta1.x,
            self.d_theta1.y,
            self.d_theta1.z,
            self.d_theta2.x,
            self.d_theta2.y,
            self.d_theta2.z,
        ]
    }
}

/// The N x 6 Jacobian, one row per correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub model: BasisAxis,
    pub rows: Vec<JacobianRow>,
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    } else if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Angle of a rotated bearing in the model's `(j, k)` plane.
fn model_angle(model: BasisAxis, rotated: &Vec3) -> Option<f64> {
    let (j, k) = model.angle_rows();
    let (num, den) = (rotated[j], rotated[k]);
    if num.abs() < DEGENERATE_COMPONENT && den.abs() < DEGENERATE_COMPONENT {
        None
    } else {
        Some(num.atan2(den))
    }
}

/// Squared radius in the model's angle plane (the Jacobian denominator).
fn plane_radius_sq(model: BasisAxis, p: &Vec3) -> f64 {
    let (j, k) = model.angle_rows();
    p[j] * p[j] + p[k] * p[k]
}

fn residual_rotated(model: BasisAxis, p1: &Vec3, p2: &Vec3) -> Option<f64> {
    Some(wrap_angle(model_angle(model, p1)? - model_angle(model, p2)?))
}

/// Residual of a single match.
pub fn residual(model: BasisAxis, r1: &Rotation, r2: &Rotation, bar1: &Vec3, bar2: &Vec3) -> Result<f64> {
    residual_rotated(model, &(*r1 * *bar1), &(*r2 * *bar2)).ok_or(Error::DegenerateBearing { index: 0 })
}

pub fn residual_vector(
    model: BasisAxis,
    r1: &Rotation,
    r2: &Rotation,
    set: &CorrespondenceSet,
) -> Result<ResidualVector> {
    let values = set
        .iter()
        .enumerate()
        .map(|(index, c)| {
            residual_rotated(model, &(*r1 * c.bar1), &(*r2 * c.bar2)).ok_or(Error::DegenerateBearing { index })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualVector { model, values })
}

/// Gradient of the model angle of `p` under `p -> exp([d]x) p` at `d = 0`.
fn angle_gradient(model: BasisAxis, p: &Vec3) -> Vec3 {
    let (x, y, z) = (p.x, p.y, p.z);
    match model {
        BasisAxis::X => {
            let den = y * y + z * z;
            Vec3::new(-1.0, x * y / den, x * z / den)
        }
        BasisAxis::Y => {
            let den = x * x + z * z;
            Vec3::new(-x * y / den, 1.0, -y * z / den)
        }
        BasisAxis::Z => {
            let den = x * x + y * y;
            Vec3::new(x * z / den, y * z / den, -1.0)
        }
    }
}

fn jacobian_row_rotated(model: BasisAxis, p1: &Vec3, p2: &Vec3) -> JacobianRow {
    JacobianRow { d_theta1: angle_gradient(model, p1), d_theta2: -angle_gradient(model, p2) }
}

pub fn jacobian(model: BasisAxis, r1: &Rotation, r2: &Rotation, set: &CorrespondenceSet) -> Result<Jacobian> {
    let rows = set
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let p1 = *r1 * c.bar1;
            let p2 = *r2 * c.bar2;
            if plane_radius_sq(model, &p1) < JACOBIAN_FLOOR || plane_radius_sq(model, &p2) < JACOBIAN_FLOOR {
                Err(Error::DegenerateBearing { index })
            } else {
                Ok(jacobian_row_rotated(model, &p1, &p2))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Jacobian { model, rows })
}

/// Residuals and Jacobian rows in one pass. Matches under the degeneracy floor
/// get a zero residual, a zero row and `usable = false`.
#[derive(Debug, Clone)]
pub(crate) struct Linearization {
    pub residuals: ResidualVector,
    pub rows: Vec<JacobianRow>,
    pub usable: Vec<bool>,
}

pub(crate) fn linearize(model: BasisAxis, r1: &Rotation, r2: &Rotation, set: &CorrespondenceSet) -> Linearization {
    let n = set.len();
    let mut values = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    let mut usable = Vec::with_capacity(n);
    let zero_row = JacobianRow { d_theta1: Vec3::zeros(), d_theta2: Vec3::zeros() };
    for c in set.iter() {
        let p1 = *r1 * c.bar1;
        let p2 = *r2 * c.bar2;
        let ok = plane_radius_sq(model, &p1) >= JACOBIAN_FLOOR && plane_radius_sq(model, &p2) >= JACOBIAN_FLOOR;
        match (ok, residual_rotated(model, &p1, &p2)) {
            (true, Some(e)) => {
                values.push(e);
                rows.push(jacobian_row_rotated(model, &p1, &p2));
                usable.push(true);
            }
            _ => {
                values.push(0.0);
                rows.push(zero_row);
                usable.push(false);
            }
        }
    }
    Linearization { residuals: ResidualVector { model, values }, rows, usable }
}

/// `d_hat = sum over inliers of e_n^2`, accumulated in index order.
pub fn discretized_metric(e: &ResidualVector, mask: &InlierMask) -> f64 {
    debug_assert_eq!(e.len(), mask.len());
    e.values
        .iter()
        .zip(mask.0.iter())
        .filter(|(_, &keep)| keep)
        .map(|(v, _)| v * v)
        .sum()
}

/// `||log R1||^2 + ||log R2||^2`.
pub fn regularizer(r1: &Rotation, r2: &Rotation) -> f64 {
    log_so3(r1).norm_squared() + log_so3(r2).norm_squared()
}

/// `d_hat + alpha * (||log R1||^2 + ||log R2||^2)`.
pub fn energy(e: &ResidualVector, mask: &InlierMask, r1: &Rotation, r2: &Rotation, alpha: f64) -> f64 {
    discretized_metric(e, mask) + alpha * regularizer(r1, r2)
}
