//! Numerical verification of uniform Lopatinski/Evans conditions and
//! strong L2 stability estimates for constant-coefficient hyperbolic and
//! partially parabolic boundary value problems on a half-space.
//!
//! The library works in the Laplace-Fourier picture: a boundary value
//! problem becomes, at each frequency `Lambda = (tau, eta, gamma)` with
//! `gamma > 0`, an ODE `u' - G(Lambda) u = f` on the half-line with
//! boundary condition `Gamma(Lambda) u(0) = g`. Everything the tool
//! measures reduces to exact linear algebra on `G(Lambda)`:
//!
//! - [`system`] defines first-order systems, frequencies and boundary
//!   symbols, and checks hyperbolicity by deterministic direction sweeps;
//! - [`symmetrizer`] finds Friedrichs symmetrizers, certifies maximally
//!   dissipative boundary conditions and constructs adjoint problems;
//! - [`resolvent`] builds `G(Lambda)`, splits its stable and unstable
//!   invariant subspaces by an ordered Schur form, and solves the
//!   half-line problem exactly inside the exponential-profile algebra
//!   ([`profile`]);
//! - [`lopatinski`] evaluates `sigma_min(Gamma V)` pointwise and as a
//!   uniform hemisphere scan;
//! - [`stability`] measures Kreiss-type constants and re-enacts the
//!   two-step auxiliary/residual construction with explicit constants,
//!   inequality by inequality;
//! - [`viscous`] covers partially parabolic systems through the
//!   first-order reduction of the second-order resolvent, with
//!   bounded-frequency Evans scans and weighted stability ratios;
//! - [`catalog`] ships reference systems with known verdicts;
//! - [`oracle`] is an independent Green's-function reference solver used
//!   by the validation suites.

pub mod catalog;
pub mod document;
pub mod error;
pub mod linalg;
pub mod lopatinski;
pub mod oracle;
pub mod profile;
pub mod resolvent;
pub mod stability;
pub mod symmetrizer;
pub mod system;
pub mod viscous;

pub use error::{Error, Result};
pub use linalg::C64;
pub use profile::{ExponentialProfile, ProfileTerm};
pub use resolvent::{
    check_hersch, propagate, resolvent_matrix, solve_resolvent, stable_subspace, ResolventMatrix,
    ResolventSolver,
};
pub use symmetrizer::{
    adjoint_bc, adjoint_forward_form, build_dissipative_bc, check_maximal_dissipativity,
    find_symmetrizer, Symmetrizer,
};
pub use system::{
    check_hyperbolicity, validate_system, BoundarySymbol, FirstOrderSystem, Frequency,
    TangentialDirection,
};
