//! Error taxonomy shared by every analysis stage.
//!
//! A *fail verdict* (a condition that is checked and found violated, like a
//! Lopatinski scan coming back negative) is reported inside the corresponding
//! report type, not as an error. Errors are reserved for states in which the
//! requested computation itself is undefined or ill-posed.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Matrix shapes or list lengths disagree with the declared dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The boundary-normal matrix is numerically singular, so the
    /// noncharacteristic hypothesis fails.
    #[error("characteristic boundary: smallest singular value of A_d is {sigma_min:.3e} (tolerance {tol:.3e})")]
    CharacteristicBoundary { sigma_min: f64, tol: f64 },

    /// A document does not conform to the input schema.
    #[error("schema error: {0}")]
    SchemaError(String),

    /// A numeric entry could not be decoded.
    #[error("value error: {0}")]
    ValueError(String),

    /// The frequency parameter lies outside the admissible set (gamma must be > 0).
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    /// No positive definite symmetrizer exists within tolerance.
    #[error("no symmetrizer found: best attainable minimal eigenvalue {best_lambda_min:.3e}")]
    Infeasible { best_lambda_min: f64 },

    /// A boundary matrix does not have full row rank.
    #[error("rank deficient boundary matrix: numerical rank {rank} < {k}")]
    RankDeficient { rank: usize, k: usize },

    /// The number of boundary rows disagrees with the unstable dimension.
    #[error("wrong boundary count: k = {k} but the unstable dimension is {n_plus}")]
    WrongBoundaryCount { k: usize, n_plus: usize },

    /// The three counts entering the Lopatinski condition disagree.
    #[error("rank mismatch: k = {k}, rank Gamma = {rank_gamma}, dim E_- = {stable_dim}")]
    RankMismatch {
        k: usize,
        rank_gamma: usize,
        stable_dim: usize,
    },

    /// The symmetrized normal matrix is not negative definite on the kernel
    /// of the boundary matrix.
    #[error("not negative definite on the kernel: max quadratic value {max_value:.6e} >= 0")]
    NotNegativeOnKernel { max_value: f64 },

    /// The symmetrized normal matrix has an eigenvalue too close to zero to
    /// split its positive and negative eigenspaces.
    #[error("degenerate splitting: eigenvalue of S*A_d within {tol:.3e} of zero")]
    DegenerateSplitting { tol: f64 },

    /// A forcing rate coincides with an eigenvalue of the resolvent matrix.
    #[error("resonant mode: forcing rate {mu} is within {dist:.3e} of the spectrum")]
    ResonantMode { mu: String, dist: f64 },

    /// The boundary matrix restricted to the stable subspace is singular:
    /// the Lopatinski condition fails at this frequency and the resolvent
    /// problem has no unique solution.
    #[error("Lopatinski singular at this frequency: sigma_min(Gamma*V) = {sigma:.3e}")]
    LopatinskiSingular { sigma: f64 },

    /// The stable/unstable splitting is ill conditioned because an eigenvalue
    /// sits numerically on the imaginary axis.
    #[error("near-imaginary eigenvalue {eig}: |Re| = {re_abs:.3e} below tolerance {tol:.3e}")]
    NearImaginaryEigenvalue { eig: String, re_abs: f64, tol: f64 },

    /// The stable dimension disagrees with the unstable dimension of A_d for
    /// a validated symmetrizable system; this signals numerical breakdown.
    #[error("dimension anomaly: dim E_- = {stable_dim} but n_+ = {n_plus}")]
    DimensionAnomaly { stable_dim: usize, n_plus: usize },

    /// An inequality of the constant-tracking chain came out negative beyond
    /// tolerance; this signals an implementation bug, never a legitimate state.
    #[error("chain violation in {inequality}: residual {residual:.6e}")]
    ChainViolation { inequality: String, residual: f64 },

    /// The declared parabolic ellipticity fails on a sampled direction.
    #[error("ellipticity failure: measured theta {measured:.6e} below declared {declared:.6e}")]
    EllipticityFailure { measured: f64, declared: f64 },

    /// The hyperbolic block of the normal matrix is singular, which the
    /// first-order reduction cannot tolerate.
    #[error("hyperbolic block of A_d is characteristic: sigma_min = {sigma_min:.3e}")]
    HyperbolicBlockCharacteristic { sigma_min: f64 },

    /// An empty or malformed frequency set was supplied for a scan.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Weight configuration is not strictly positive.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

pub type Result<T> = std::result::Result<T, Error>;
