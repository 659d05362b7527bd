use thiserror::Error;

/// Errors produced by the estimation pipeline and its file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Both angle components of a rotated bearing vanish, so the model angle is undefined.
    #[error("degenerate bearing at correspondence {index}")]
    DegenerateBearing { index: usize },

    #[error("too few inliers: {found} available, {required} required")]
    TooFewInliers { found: usize, required: usize },

    /// The 6x6 normal equations could not be factorized.
    #[error("normal equations are not positive definite")]
    SingularSystem,

    /// The sign vote and the depth fallback both tied; the translation is unobservable.
    #[error("sign of the scaling factor is indeterminate")]
    IndeterminateSign,

    #[error("cheirality check is ambiguous: {count} positive-depth votes shared by distinct candidates")]
    AmbiguousCheirality { count: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("could not place a visible point after {attempts} attempts")]
    VisibilityExhausted { attempts: usize },

    #[error("matrix is not a rotation (orthonormality/determinant error {deviation:e})")]
    InvalidRotation { deviation: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
