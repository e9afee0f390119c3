//! First-order systems, frequencies, directions and boundary symbols.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, singular_values_desc, spectral_norm, spectral_norm_real, sphere, to_complex, C64,
};

/// Relative tolerance shared by the rank and splitting decisions.
pub const RANK_TOL: f64 = 1e-10;

/// A constant-coefficient first-order operator `d/dt + sum_j A^j d/dx_j` on
/// the half-space `x_d >= 0`. The last coefficient is the boundary-normal
/// matrix `A_d` and must be invertible for the problem to be
/// noncharacteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderSystem {
    n: usize,
    d: usize,
    a: Vec<DMatrix<f64>>,
}

impl FirstOrderSystem {
    pub fn new(n: usize, d: usize, a: Vec<DMatrix<f64>>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::DimensionMismatch("n and d must be positive".into()));
        }
        if a.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficient matrices, got {}",
                d,
                a.len()
            )));
        }
        for (j, m) in a.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "A[{}] is {}x{}, expected {}x{}",
                    j + 1,
                    m.nrows(),
                    m.ncols(),
                    n,
                    n
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::ValueError(format!(
                    "A[{}] contains a non-finite entry",
                    j + 1
                )));
            }
        }
        Ok(FirstOrderSystem { n, d, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coefficients(&self) -> &[DMatrix<f64>] {
        &self.a
    }

    pub fn coefficient(&self, j: usize) -> &DMatrix<f64> {
        &self.a[j]
    }

    /// The boundary-normal matrix `A_d`.
    pub fn normal(&self) -> &DMatrix<f64> {
        &self.a[self.d - 1]
    }

    /// Full spatial symbol `sum_j xi_j A^j`.
    pub fn symbol(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(xi.len(), self.d);
        let mut m = DMatrix::zeros(self.n, self.n);
        for (j, a) in self.a.iter().enumerate() {
            m += a.scale(xi[j]);
        }
        m
    }

    /// Number of eigenvalues of `A_d` with positive real part (the unstable
    /// dimension that pins `dim E_-` for every `gamma > 0`).
    pub fn n_plus(&self) -> usize {
        self.normal()
            .clone()
            .complex_eigenvalues()
            .iter()
            .filter(|e| e.re > 0.0)
            .count()
    }

    /// Largest coefficient norm, used to scale tolerances.
    pub fn coefficient_scale(&self) -> f64 {
        self.a.iter().map(spectral_norm_real).fold(0.0f64, f64::max)
    }
}

/// A Laplace-Fourier frequency `(tau, eta, gamma)` with `gamma > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequency {
    tau: f64,
    eta: DVector<f64>,
    gamma: f64,
}

impl Frequency {
    pub fn new(tau: f64, eta: DVector<f64>, gamma: f64) -> Result<Self> {
        if gamma <= 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidFrequency(format!(
                "gamma = {gamma} must be finite and > 0"
            )));
        }
        if !tau.is_finite() || eta.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidFrequency("tau and eta must be finite".into()));
        }
        Ok(Frequency { tau, eta, gamma })
    }

    /// Convenience constructor for one space dimension (`eta` empty).
    pub fn one_d(tau: f64, gamma: f64) -> Result<Self> {
        Self::new(tau, DVector::zeros(0), gamma)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `lambda = gamma + i tau`.
    pub fn lambda(&self) -> C64 {
        C64::new(self.gamma, self.tau)
    }

    /// Euclidean norm of `(tau, eta, gamma)`.
    pub fn radius(&self) -> f64 {
        (self.tau * self.tau + self.eta.norm_squared() + self.gamma * self.gamma).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.tau * s, self.eta.scale(s), self.gamma * s)
    }

    /// Stable 64-bit key of the coordinate bits; used to attach
    /// reproducible per-frequency randomness independent of grid layout.
    pub fn bit_key(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100000001b3);
        };
        mix(self.tau.to_bits());
        for x in self.eta.iter() {
            mix(x.to_bits());
        }
        mix(self.gamma.to_bits());
        h
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let eta: Vec<f64> = self.eta.iter().copied().collect();
        write!(
            f,
            "(tau={:.6e}, eta={:?}, gamma={:.6e})",
            self.tau, eta, self.gamma
        )
    }
}

/// A unit direction in full frequency space, for hyperbolicity sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialDirection {
    xi: DVector<f64>,
}

impl TangentialDirection {
    pub fn new(xi: DVector<f64>) -> Result<Self> {
        let nrm = xi.norm();
        if nrm < 1e-300 || !nrm.is_finite() {
            return Err(Error::ValueError(
                "direction must be a nonzero finite vector".into(),
            ));
        }
        Ok(TangentialDirection { xi: xi / nrm })
    }

    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }
}

/// A boundary symbol: a `k x n` matrix-valued function of the frequency,
/// constant in the simplest case, with a declared uniform norm bound.
#[derive(Debug, Clone)]
pub struct BoundarySymbol {
    k: usize,
    n: usize,
    bound: f64,
    kind: SymbolKind,
}

#[derive(Debug, Clone)]
enum SymbolKind {
    Constant(DMatrix<C64>),
    /// `Gamma(Lambda) = (rho^2/(1+rho^2) + floor) * base` with `rho = |Lambda|`.
    ScaledDirichlet {
        base: DMatrix<C64>,
        floor: f64,
    },
}

impl BoundarySymbol {
    /// A frequency-independent boundary matrix; the bound is its 2-norm.
    pub fn constant(matrix: DMatrix<C64>) -> Self {
        let bound = spectral_norm(&matrix);
        BoundarySymbol {
            k: matrix.nrows(),
            n: matrix.ncols(),
            bound,
            kind: SymbolKind::Constant(matrix),
        }
    }

    pub fn constant_real(matrix: DMatrix<f64>) -> Self {
        Self::constant(to_complex(&matrix))
    }

    /// Resolve a named built-in frequency-dependent symbol.
    pub fn named(
        name: &str,
        base: DMatrix<C64>,
        params: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<Self> {
        match name {
            "scaled-dirichlet" => {
                let floor = match params.get("floor") {
                    None => 0.1,
                    Some(v) => v
                        .as_f64()
                        .ok_or_else(|| Error::ValueError("\"floor\" must be a number".into()))?,
                };
                if floor < 0.0 || floor.is_nan() {
                    return Err(Error::ValueError("\"floor\" must be nonnegative".into()));
                }
                let bound = (1.0 + floor) * spectral_norm(&base);
                Ok(BoundarySymbol {
                    k: base.nrows(),
                    n: base.ncols(),
                    bound,
                    kind: SymbolKind::ScaledDirichlet { base, floor },
                })
            }
            other => Err(Error::SchemaError(format!(
                "unknown boundary symbol \"{other}\""
            ))),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SymbolKind::Constant(_))
    }

    /// Declared supremum of the matrix norm over all frequencies.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn evaluate(&self, freq: &Frequency) -> DMatrix<C64> {
        match &self.kind {
            SymbolKind::Constant(m) => m.clone(),
            SymbolKind::ScaledDirichlet { base, floor } => {
                let rho2 = freq.radius().powi(2);
                let s = rho2 / (1.0 + rho2) + floor;
                base.scale(s)
            }
        }
    }

    /// Name of the symbol family, for report echoes.
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SymbolKind::Constant(_) => "constant",
            SymbolKind::ScaledDirichlet { .. } => "scaled-dirichlet",
        }
    }

    /// Spot-check the declared bound on sampled frequencies.
    pub fn check_bound(&self, freqs: &[Frequency], slack: f64) -> bool {
        freqs
            .iter()
            .all(|f| spectral_norm(&self.evaluate(f)) <= self.bound * (1.0 + slack) + slack)
    }
}

/// Outcome of [`validate_system`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub verdict: bool,
    pub n: usize,
    pub d: usize,
    pub sigma_min_normal: f64,
    pub tol_used: f64,
}

/// Check the noncharacteristic hypothesis: shapes are enforced at
/// construction, so what remains is invertibility of `A_d` measured by its
/// smallest singular value relative to its norm.
pub fn validate_system(sys: &FirstOrderSystem) -> Result<ValidationReport> {
    validate_system_with_tol(sys, RANK_TOL)
}

pub fn validate_system_with_tol(sys: &FirstOrderSystem, tol: f64) -> Result<ValidationReport> {
    let sv = singular_values_desc(&to_complex(sys.normal()));
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    let threshold = tol * smax.max(1e-300);
    if smin <= threshold {
        return Err(Error::CharacteristicBoundary {
            sigma_min: smin,
            tol: threshold,
        });
    }
    Ok(ValidationReport {
        verdict: true,
        n: sys.n(),
        d: sys.d(),
        sigma_min_normal: smin,
        tol_used: threshold,
    })
}

/// Outcome of [`check_hyperbolicity`].
#[derive(Debug, Clone, Serialize)]
pub struct HyperbolicityReport {
    pub pass: bool,
    pub samples: usize,
    pub tol: f64,
    /// Worst relative imaginary part of any symbol eigenvalue.
    pub worst_imag_defect: f64,
    /// Worst algebraic-minus-geometric multiplicity gap.
    pub worst_multiplicity_defect: usize,
    pub worst_xi: Vec<f64>,
}

/// Defects of a single direction: (relative imaginary part, multiplicity gap).
pub fn direction_defects(sys: &FirstOrderSystem, xi: &TangentialDirection) -> (f64, usize) {
    let m = sys.symbol(xi.xi());
    let scale = spectral_norm_real(&m);
    if scale == 0.0 {
        return (0.0, 0);
    }
    let mc = to_complex(&m);
    let eigs = linalg::eigenvalues(&mc);
    let imag_defect = eigs.iter().map(|e| e.im.abs()).fold(0.0f64, f64::max) / scale;

    // Cluster eigenvalues, then compare each cluster size with the nullity
    // of (M - mean I) at matching relative tolerance.
    let cluster_tol = 1e-8 * scale;
    let mut remaining: Vec<C64> = eigs;
    let mut mult_defect = 0usize;
    while let Some(seed) = remaining.pop() {
        let mut cluster = vec![seed];
        remaining.retain(|e| {
            if (e - seed).norm() <= cluster_tol {
                cluster.push(*e);
                false
            } else {
                true
            }
        });
        let mean = cluster.iter().sum::<C64>() / C64::new(cluster.len() as f64, 0.0);
        let shifted = &mc - DMatrix::<C64>::identity(sys.n(), sys.n()) * mean;
        let sv = singular_values_desc(&shifted);
        let nullity = sv.iter().filter(|&&s| s <= 1e-8 * scale).count();
        mult_defect = mult_defect.max(cluster.len().saturating_sub(nullity));
    }
    (imag_defect, mult_defect)
}

/// Sweep deterministic unit directions and verify that every sampled symbol
/// has real, semisimple eigenvalues within tolerance.
pub fn check_hyperbolicity(
    sys: &FirstOrderSystem,
    sphere_samples: usize,
    tol: f64,
) -> HyperbolicityReport {
    let dirs = sphere::unit_directions(sys.d(), sphere_samples.max(1));
    let results: Vec<(f64, usize, &DVector<f64>)> = dirs
        .par_iter()
        .map(|xi| {
            let dir = TangentialDirection::new(xi.clone()).expect("sampled direction is unit");
            let (imag, mult) = direction_defects(sys, &dir);
            (imag, mult, xi)
        })
        .collect();
    let mut worst_imag = 0.0f64;
    let mut worst_mult = 0usize;
    let mut worst_xi = dirs[0].clone();
    let mut worst_score = f64::NEG_INFINITY;
    for (imag, mult, xi) in results {
        // multiplicity defects dominate the worst-direction choice
        let score = mult as f64 + imag;
        if score > worst_score {
            worst_score = score;
            worst_xi = xi.clone();
        }
        worst_imag = worst_imag.max(imag);
        worst_mult = worst_mult.max(mult);
    }
    HyperbolicityReport {
        pass: worst_imag <= tol && worst_mult == 0,
        samples: dirs.len(),
        tol,
        worst_imag_defect: worst_imag,
        worst_multiplicity_defect: worst_mult,
        worst_xi: worst_xi.iter().copied().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave() -> FirstOrderSystem {
        FirstOrderSystem::new(
            2,
            1,
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn validate_wave_passes_with_unit_sigma() {
        let rep = validate_system(&wave()).unwrap();
        assert!(rep.verdict);
        assert!((rep.sigma_min_normal - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_normal_is_characteristic() {
        let sys = FirstOrderSystem::new(
            2,
            1,
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])],
        )
        .unwrap();
        match validate_system(&sys) {
            Err(Error::CharacteristicBoundary { .. }) => {}
            other => panic!("expected CharacteristicBoundary, got {other:?}"),
        }
    }

    #[test]
    fn two_d_symmetric_passes_validation() {
        let sys = FirstOrderSystem::new(
            2,
            2,
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            ],
        )
        .unwrap();
        assert!(validate_system(&sys).unwrap().verdict);
    }

    #[test]
    fn wrong_matrix_count_is_dimension_mismatch() {
        let err = FirstOrderSystem::new(
            2,
            1,
            vec![
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            ],
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn symmetric_symbol_is_hyperbolic() {
        let rep = check_hyperbolicity(&wave(), 8, 1e-10);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn jordan_block_fails_semisimplicity() {
        let sys = FirstOrderSystem::new(
            2,
            1,
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])],
        )
        .unwrap();
        let rep = check_hyperbolicity(&sys, 4, 1e-10);
        assert!(!rep.pass);
        assert_eq!(rep.worst_multiplicity_defect, 1);
    }

    #[test]
    fn two_d_pencil_from_hand_computation() {
        // tangential diag(2,-1), normal [[0,3],[3,0]]: both symmetric, so every
        // sampled direction must give real semisimple eigenvalues.
        let sys = FirstOrderSystem::new(
            2,
            2,
            vec![
                DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 3.0, 3.0, 0.0]),
            ],
        )
        .unwrap();
        let rep = check_hyperbolicity(&sys, 32, 1e-10);
        assert!(rep.pass, "{rep:?}");
        // hand check at xi = (1, 0): eigenvalues 2 and -1
        let dir = TangentialDirection::new(DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let m = sys.symbol(dir.xi());
        let mut eigs: Vec<f64> = m.complex_eigenvalues().iter().map(|e| e.re).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eigs[0] + 1.0).abs() < 1e-12 && (eigs[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn defects_invariant_under_sign_flip_and_scaling() {
        let sys = wave();
        let xi = TangentialDirection::new(DVector::from_vec(vec![1.0])).unwrap();
        let minus_xi = TangentialDirection::new(DVector::from_vec(vec![-1.0])).unwrap();
        let (i1, m1) = direction_defects(&sys, &xi);
        let (i2, m2) = direction_defects(&sys, &minus_xi);
        assert!((i1 - i2).abs() < 1e-14);
        assert_eq!(m1, m2);

        let scaled = FirstOrderSystem::new(2, 1, vec![sys.normal().scale(7.5)]).unwrap();
        let (i3, m3) = direction_defects(&scaled, &xi);
        assert!((i1 - i3).abs() < 1e-14);
        assert_eq!(m1, m3);
    }

    #[test]
    fn frequency_requires_positive_gamma() {
        assert!(Frequency::one_d(0.0, 0.0).is_err());
        assert!(Frequency::one_d(0.0, -1.0).is_err());
        let f = Frequency::one_d(2.0, 1.0).unwrap();
        assert_eq!(f.lambda(), C64::new(1.0, 2.0));
    }

    #[test]
    fn scaled_dirichlet_symbol_is_bounded() {
        let base = to_complex(&DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let sym = BoundarySymbol::named("scaled-dirichlet", base, &serde_json::Map::new()).unwrap();
        assert!(!sym.is_constant());
        let freqs: Vec<Frequency> = (1..20)
            .map(|i| Frequency::one_d(i as f64 * 3.0, 0.5 * i as f64).unwrap())
            .collect();
        assert!(sym.check_bound(&freqs, 1e-12));
    }
}
