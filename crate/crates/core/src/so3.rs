//! Rotation-group algebra: the hat operator, exponential and logarithmic maps,
//! and a validated rotation-matrix type.
//!
//! Rotation vectors are axis-angle vectors in radians. Rows of a rotation are
//! addressed 0-based in code (`row(0)` is the first row).

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle the exponential and logarithm use Taylor expansions.
const SMALL_ANGLE: f64 = 1e-6;

/// Per-entry tolerance of the orthonormality and determinant checks.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// The cross-product matrix: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`.
fn vee_antisymmetric(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

/// Largest absolute deviation of `m` from orthonormality with unit determinant.
pub fn rotation_deviation(m: &Mat3) -> f64 {
    let ortho = (m.transpose() * m - Mat3::identity()).abs().max();
    let det = (m.determinant() - 1.0).abs();
    if ortho.is_nan() || det.is_nan() {
        return f64::INFINITY;
    }
    ortho.max(det)
}

/// A 3x3 orthonormal matrix with determinant +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates `m` against [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        Self::from_matrix_with_tolerance(m, ROTATION_TOLERANCE)
    }

    pub fn from_matrix_with_tolerance(m: Mat3, tolerance: f64) -> Result<Self> {
        let deviation = rotation_deviation(&m);
        if deviation <= tolerance {
            Ok(Rotation(m))
        } else {
            Err(Error::InvalidRotation { deviation })
        }
    }

    /// Builds a rotation from its three rows without validation.
    pub(crate) fn from_rows_unchecked(r0: &Vec3, r1: &Vec3, r2: &Vec3) -> Self {
        Rotation(Mat3::from_rows(&[r0.transpose(), r1.transpose(), r2.transpose()]))
    }

    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Nearest rotation in the Frobenius sense (polar decomposition).
    pub fn nearest(m: &Mat3) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation { deviation: f64::INFINITY });
        }
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::InvalidRotation { deviation: f64::INFINITY }),
        };
        let mut d = Mat3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Ok(Rotation(u * d * v_t))
    }

    /// Re-projects onto SO(3) when round-off has drifted past the tolerance.
    pub fn renormalized(self) -> Self {
        if rotation_deviation(&self.0) <= ROTATION_TOLERANCE {
            self
        } else {
            Rotation::nearest(&self.0).unwrap_or(self)
        }
    }

    /// Rotation by angle `pi` about one of the coordinate axes (0 = X, 1 = Y, 2 = Z).
    pub fn half_turn(axis: usize) -> Self {
        let mut m = Mat3::from_element(0.0);
        for k in 0..3 {
            m[(k, k)] = if k == axis { 1.0 } else { -1.0 };
        }
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn row(&self, i: usize) -> Vec3 {
        self.0.row(i).transpose()
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn exp(theta: &Vec3) -> Self {
        exp_so3(theta)
    }

    pub fn log(&self) -> Vec3 {
        log_so3(self)
    }

    /// Geodesic distance to `other` in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        log_so3(&(self.transpose() * *other)).norm()
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Rodrigues' formula. A zero vector maps to the identity exactly.
pub fn exp_so3(theta: &Vec3) -> Rotation {
    let angle = theta.norm();
    let k = skew(theta);
    let k2 = k * k;
    let (a, b) = if angle < SMALL_ANGLE {
        let t2 = angle * angle;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (angle.sin() / angle, (1.0 - angle.cos()) / (angle * angle))
    };
    Rotation(Mat3::identity() + k * a + k2 * b)
}

/// Principal logarithm; the returned vector has norm in `[0, pi]`.
pub fn log_so3(r: &Rotation) -> Vec3 {
    let m = r.matrix();
    let v = vee_antisymmetric(m);
    let sin_angle = 0.5 * v.norm();
    let cos_angle = 0.5 * (m.trace() - 1.0);
    let angle = sin_angle.atan2(cos_angle);

    if angle < SMALL_ANGLE {
        // vee(R - R^T) / 2 = sin(angle) * axis
        return v * (0.5 * (1.0 + angle * angle / 6.0));
    }
    if PI - angle > SMALL_ANGLE {
        return v * (angle / (2.0 * angle.sin()));
    }

    // Near pi: (R + R^T)/2 = cos I + (1 - cos) a a^T, read the axis off the
    // column with the largest diagonal entry.
    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Mat3::identity() * cos_angle) / (1.0 - cos_angle);
    let k = (0..3)
        .max_by(|&a, &b| outer[(a, a)].total_cmp(&outer[(b, b)]))
        .unwrap_or(0);
    let mut axis: Vec3 = outer.column(k) / outer[(k, k)].max(0.0).sqrt();
    axis /= axis.norm();
    if axis.dot(&v) < 0.0 {
        axis = -axis;
    }
    axis * angle
}
