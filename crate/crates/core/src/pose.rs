//! Correspondences, basis axes, and recovery of the relative pose (and the
//! essential matrix) from a birotation solution.
//!
//! Pose convention: a point `p1` in the reference camera frame maps to the
//! target frame as `p2 = R p1 + t`. A birotation solution `(R1, R2, axis, s)`
//! satisfies `R1 p1 = R2 p2 + s * l_axis`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{skew, Mat3, Rotation, Vec3};

/// Pinhole intrinsics without skew or distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub u0: f64,
    pub v0: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, u0: f64, v0: f64) -> Result<Self> {
        let k = Intrinsics { fx, fy, u0, v0 };
        k.validate()?;
        Ok(k)
    }

    /// Unit focal lengths and a zero principal point: pixels are bearings.
    pub fn unit() -> Self {
        Intrinsics { fx: 1.0, fy: 1.0, u0: 0.0, v0: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.u0, self.v0].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "intrinsics need finite values and positive focal lengths, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Depth-normalized coordinates `K^-1 (u, v, 1)`.
    pub fn normalize(&self, pixel: [f64; 2]) -> Vec3 {
        Vec3::new((pixel[0] - self.u0) / self.fx, (pixel[1] - self.v0) / self.fy, 1.0)
    }

    /// Pixel coordinates of a camera-frame point with positive depth.
    pub fn project(&self, p: &Vec3) -> [f64; 2] {
        [self.fx * (p.x / p.z) + self.u0, self.fy * (p.y / p.z) + self.v0]
    }
}

/// Free-function form of [`Intrinsics::normalize`].
pub fn normalize(pixel: [f64; 2], k: &Intrinsics) -> Vec3 {
    k.normalize(pixel)
}

/// One pixel match together with its depth-normalized bearings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub bar1: Vec3,
    pub bar2: Vec3,
}

impl Correspondence {
    pub fn from_pixels(p1: [f64; 2], p2: [f64; 2], k1: &Intrinsics, k2: &Intrinsics) -> Self {
        Correspondence { p1, p2, bar1: k1.normalize(p1), bar2: k2.normalize(p2) }
    }
}

/// Matches between a reference and a target image, normalized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub intrinsics1: Intrinsics,
    pub intrinsics2: Intrinsics,
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    /// Builds a set from `[u1, v1, u2, v2]` pixel quadruples.
    pub fn from_pixels(
        intrinsics1: Intrinsics,
        intrinsics2: Intrinsics,
        matches: &[[f64; 4]],
    ) -> Result<Self> {
        intrinsics1.validate()?;
        intrinsics2.validate()?;
        if matches.is_empty() {
            return Err(Error::InvalidInput("correspondence set is empty".into()));
        }
        let mut items = Vec::with_capacity(matches.len());
        for (n, m) in matches.iter().enumerate() {
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidInput(format!("match {n} has a non-finite coordinate")));
            }
            items.push(Correspondence::from_pixels(
                [m[0], m[1]],
                [m[2], m[3]],
                &intrinsics1,
                &intrinsics2,
            ));
        }
        Ok(CorrespondenceSet { intrinsics1, intrinsics2, items })
    }

    /// Builds a set directly from bearing pairs `(x1, y1) <-> (x2, y2)` (unit intrinsics).
    pub fn from_bearings(pairs: &[(Vec3, Vec3)]) -> Result<Self> {
        let matches: Vec<[f64; 4]> = pairs
            .iter()
            .map(|(a, b)| [a.x / a.z, a.y / a.z, b.x / b.z, b.y / b.z])
            .collect();
        Self::from_pixels(Intrinsics::unit(), Intrinsics::unit(), &matches)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn iter(&self) -> impl Iterator<Item = &Correspondence> {
        self.items.iter()
    }

    pub fn to_matches(&self) -> Vec<[f64; 4]> {
        self.items.iter().map(|c| [c.p1[0], c.p1[1], c.p2[0], c.p2[1]]).collect()
    }
}

/// Direction of one of the three basis translations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisAxis {
    X,
    Y,
    Z,
}

impl BasisAxis {
    pub const ALL: [BasisAxis; 3] = [BasisAxis::X, BasisAxis::Y, BasisAxis::Z];

    /// 1-based model index.
    pub fn index(self) -> usize {
        self.position() + 1
    }

    /// 0-based position, used to address rotation rows.
    pub fn position(self) -> usize {
        match self {
            BasisAxis::X => 0,
            BasisAxis::Y => 1,
            BasisAxis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(BasisAxis::X),
            2 => Ok(BasisAxis::Y),
            3 => Ok(BasisAxis::Z),
            _ => Err(Error::InvalidInput(format!("basis axis index must be 1, 2 or 3, got {i}"))),
        }
    }

    pub fn direction(self) -> Vec3 {
        let mut v = Vec3::zeros();
        v[self.position()] = 1.0;
        v
    }

    /// 0-based rows `(j, k)` whose ratio defines the model angle: the
    /// permutation `(i j k)` is even for X and Z and odd for Y.
    pub fn angle_rows(self) -> (usize, usize) {
        match self {
            BasisAxis::X => (1, 2),
            BasisAxis::Y => (0, 2),
            BasisAxis::Z => (0, 1),
        }
    }

    /// The `pi` rotation about this axis.
    pub fn half_turn(self) -> Rotation {
        Rotation::half_turn(self.position())
    }
}

/// Sign of the scaling factor along the basis axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

/// A recovered relative pose with the birotation that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePoseEstimate {
    pub rotation: Rotation,
    /// Unit translation direction, or zero for a pure rotation.
    pub t_dir: Vec3,
    pub axis: BasisAxis,
    pub s_sign: Sign,
    /// Selection-weighted `d_hat / N` of the chosen model.
    pub metric: f64,
    pub r1: Rotation,
    pub r2: Rotation,
}

impl RelativePoseEstimate {
    pub fn is_pure_rotation(&self) -> bool {
        self.t_dir == Vec3::zeros()
    }
}

/// `R = R2^T R1`, `t = -s R2^T l_axis` (unit length).
pub fn recover_pose(r1: &Rotation, r2: &Rotation, axis: BasisAxis, s_sign: Sign) -> RelativePoseEstimate {
    let rotation = (r2.transpose() * *r1).renormalized();
    let t_dir = (r2.row(axis.position()) * -s_sign.value()).normalize();
    RelativePoseEstimate { rotation, t_dir, axis, s_sign, metric: 0.0, r1: *r1, r2: *r2 }
}

/// Essential matrix as the axis-specific outer-product form
/// (e.g. for X: `r2_z r1_y^T - r2_y r1_z^T`, with `r1_*`, `r2_*` rows of `R1`, `R2`).
///
/// This equals `[r2_axis]x R2^T R1`, so `p2^T E p1 = 0` for matches consistent
/// with the birotation.
pub fn essential_from_birotation(r1: &Rotation, r2: &Rotation, axis: BasisAxis) -> Mat3 {
    let (a, b) = match axis {
        BasisAxis::X => (2, 1),
        BasisAxis::Y => (0, 2),
        BasisAxis::Z => (1, 0),
    };
    // E = r2_a r1_b^T - r2_b r1_a^T
    r2.row(a) * r1.row(b).transpose() - r2.row(b) * r1.row(a).transpose()
}

/// `[t]x R` for a pose written `p2 = R p1 + t`.
pub fn essential_from_pose(rotation: &Rotation, t: &Vec3) -> Mat3 {
    skew(t) * rotation.matrix()
}

/// The four poses sharing the epipolar geometry of a birotation solution, in
/// the order `(R, -l), (R, +l), (R', -l), (R', +l)` where `R' = R2^T H R1`,
/// `H` is the half turn about the axis and `l = R2^T l_axis`.
pub fn enumerate_ambiguity(r1: &Rotation, r2: &Rotation, axis: BasisAxis) -> [RelativePoseEstimate; 4] {
    let twisted = axis.half_turn() * *r1;
    [
        recover_pose(r1, r2, axis, Sign::Positive),
        recover_pose(r1, r2, axis, Sign::Negative),
        recover_pose(&twisted, r2, axis, Sign::Positive),
        recover_pose(&twisted, r2, axis, Sign::Negative),
    ]
}

/// Rays whose angle has squared sine below this are treated as parallel.
const PARALLEL_RAYS: f64 = 1e-12;

/// Midpoint triangulation of one correspondence under `p2 = R p1 + t`.
///
/// Returns the depths `(z1, z2)` of the closest points along both rays, or
/// `None` when the rays are parallel.
pub fn triangulate_midpoint(rotation: &Rotation, t: &Vec3, bar1: &Vec3, bar2: &Vec3) -> Option<(f64, f64)> {
    let rt = rotation.transpose();
    let d1 = *bar1;
    let d2 = rt * *bar2;
    let origin2 = -(rt * *t);

    let a = d1.dot(&d1);
    let b = d1.dot(&d2);
    let c = d2.dot(&d2);
    let cross = a * c - b * b;
    if cross <= PARALLEL_RAYS * a * c {
        return None;
    }
    let e = d1.dot(&origin2);
    let f = d2.dot(&origin2);
    // [a -b; b -c] [s1; s2] = [e; f]
    let det = -cross;
    let s1 = (b * f - e * c) / det;
    let s2 = (a * f - b * e) / det;
    Some((s1 * bar1.z, s2 * bar2.z))
}

/// Number of correspondences triangulated in front of both cameras.
pub fn cheirality_votes(candidate: &RelativePoseEstimate, set: &CorrespondenceSet) -> usize {
    set.iter()
        .filter_map(|c| triangulate_midpoint(&candidate.rotation, &candidate.t_dir, &c.bar1, &c.bar2))
        .filter(|&(z1, z2)| z1 > 0.0 && z2 > 0.0)
        .count()
}

/// Combined rotation and translation-direction distance in radians.
fn pose_distance(a: &RelativePoseEstimate, b: &RelativePoseEstimate) -> f64 {
    let rot = a.rotation.angle_to(&b.rotation);
    let dir = (a.t_dir - b.t_dir).norm();
    rot + dir
}

/// Picks the candidate with the most positive-depth votes (lowest index on ties
/// between identical poses).
pub fn cheirality_select(
    candidates: &[RelativePoseEstimate],
    set: &CorrespondenceSet,
) -> Result<RelativePoseEstimate> {
    match candidates {
        [] => return Err(Error::InvalidInput("no pose candidates".into())),
        [only] => return Ok(*only),
        _ => {}
    }
    let votes: Vec<usize> = candidates.iter().map(|c| cheirality_votes(c, set)).collect();
    let best = *votes.iter().max().unwrap_or(&0);
    let winner = votes.iter().position(|&v| v == best).unwrap_or(0);
    for (idx, &v) in votes.iter().enumerate().skip(winner + 1) {
        if v == best && pose_distance(&candidates[winner], &candidates[idx]) > 1e-6 {
            return Err(Error::AmbiguousCheirality { count: best });
        }
    }
    Ok(candidates[winner])
}
