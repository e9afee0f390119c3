//! Partially parabolic systems: validation, the first-order reduction of
//! the second-order resolvent, dissipative boundary conditions on the
//! extended variable, and bounded-frequency Evans scans.
//!
//! The second-order resolvent acting on `u = (u1, u2)` is
//!
//! ```text
//! lambda A0 u + A_d u' + i sum_{j<d} eta_j A^j u
//!   - B^{dd} u''  - i sum_{j<d} eta_j (B^{jd} + B^{dj}) u'
//!   + sum_{j,k<d} eta_j eta_k B^{jk} u = f,
//! ```
//!
//! with the normal-tangential coupling carried by the `(B^{jd} + B^{dj})`
//! blocks. Eliminating `u1'` through `A_d_11` and `u2''` through `B^{dd}_22`
//! rewrites it as `U' = GG U + F` in `U = (u1, u2, u2')`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sigma_min, spectral_norm_real, sphere, to_complex, C64};
use crate::lopatinski::{scan_explicit, LopatinskiValue, ScanResult};
use crate::profile::ExponentialProfile;
use crate::resolvent::{ResolventMatrix, ResolventSolver};
use crate::stability::{measure_ratios, EnergyWeights, StabilityReport, TrialProtocol, WeightFn};
use crate::symmetrizer::{check_maximal_dissipativity, Symmetrizer};
use crate::system::{FirstOrderSystem, Frequency, RANK_TOL};

/// A symmetric second-order system with hyperbolic block `u1` (size `n1`)
/// and parabolic block `u2` (size `n2`).
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderSystem {
    n1: usize,
    n2: usize,
    d: usize,
    a0: DMatrix<f64>,
    a: Vec<DMatrix<f64>>,
    b: Vec<Vec<DMatrix<f64>>>,
    theta: f64,
}

impl SecondOrderSystem {
    pub fn new(
        n1: usize,
        n2: usize,
        d: usize,
        a0: DMatrix<f64>,
        a: Vec<DMatrix<f64>>,
        b: Vec<Vec<DMatrix<f64>>>,
        theta: f64,
    ) -> Result<Self> {
        let n = n1 + n2;
        if n2 == 0 {
            return Err(Error::DimensionMismatch(
                "a parabolic block is required (n2 >= 1); purely hyperbolic systems use the first-order path".into(),
            ));
        }
        if d == 0 {
            return Err(Error::DimensionMismatch("d must be positive".into()));
        }
        let shape_ok = |m: &DMatrix<f64>| m.nrows() == n && m.ncols() == n;
        if !shape_ok(&a0) {
            return Err(Error::DimensionMismatch(format!("A0 must be {n}x{n}")));
        }
        if a.len() != d || !a.iter().all(shape_ok) {
            return Err(Error::DimensionMismatch(format!(
                "A must hold d = {d} matrices of size {n}x{n}"
            )));
        }
        if b.len() != d
            || b.iter()
                .any(|row| row.len() != d || !row.iter().all(shape_ok))
        {
            return Err(Error::DimensionMismatch(format!(
                "B must be a {d}x{d} array of {n}x{n} matrices"
            )));
        }
        if theta <= 0.0 || !theta.is_finite() {
            return Err(Error::ValueError("theta must be finite and > 0".into()));
        }
        Ok(SecondOrderSystem {
            n1,
            n2,
            d,
            a0,
            a,
            b,
            theta,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn a(&self) -> &[DMatrix<f64>] {
        &self.a
    }

    pub fn b(&self) -> &[Vec<DMatrix<f64>>] {
        &self.b
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn block11(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.view((0, 0), (self.n1, self.n1)).into_owned()
    }

    fn block22(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        m.view((self.n1, self.n1), (self.n2, self.n2)).into_owned()
    }

    /// Hyperbolic sub-system `{A^j_11}` of the upper-left blocks.
    pub fn hyperbolic_subsystem(&self) -> Result<FirstOrderSystem> {
        FirstOrderSystem::new(
            self.n1,
            self.d,
            self.a.iter().map(|m| self.block11(m)).collect(),
        )
    }
}

/// Validation outcome with the measured ellipticity constant.
#[derive(Debug, Clone, Serialize)]
pub struct ViscousValidation {
    pub verdict: bool,
    pub measured_theta: f64,
    pub declared_theta: f64,
    pub sigma_min_normal: f64,
    pub sigma_min_normal_11: f64,
    pub sphere_samples: usize,
}

/// Check all structural invariants: symmetry, positivity of `A0`, the zero
/// pattern of `B`, invertibility of `A_d` and of its hyperbolic block, and
/// the declared ellipticity on sampled unit directions.
pub fn validate_second_order(
    sys: &SecondOrderSystem,
    sphere_samples: usize,
) -> Result<ViscousValidation> {
    let n = sys.n();
    let scale_b = sys
        .b
        .iter()
        .flatten()
        .map(spectral_norm_real)
        .fold(0.0f64, f64::max);

    // A0 symmetric positive definite
    if spectral_norm_real(&(&sys.a0 - sys.a0.transpose())) > 1e-10 * spectral_norm_real(&sys.a0) {
        return Err(Error::ValueError("A0 must be symmetric".into()));
    }
    let (a0_vals, _) = crate::linalg::symmetric_eigen_sorted(&sys.a0);
    if a0_vals.first().copied().unwrap_or(0.0) <= 0.0 {
        return Err(Error::ValueError("A0 must be positive definite".into()));
    }
    // A^j symmetric
    for (j, aj) in sys.a.iter().enumerate() {
        if spectral_norm_real(&(aj - aj.transpose())) > 1e-10 * spectral_norm_real(aj).max(1e-300) {
            return Err(Error::ValueError(format!("A[{}] must be symmetric", j + 1)));
        }
    }
    // B structure: only the (2,2) block may be nonzero
    for (j, row) in sys.b.iter().enumerate() {
        for (k, bjk) in row.iter().enumerate() {
            let mut off = 0.0f64;
            for r in 0..n {
                for c in 0..n {
                    if r < sys.n1 || c < sys.n1 {
                        off = off.max(bjk[(r, c)].abs());
                    }
                }
            }
            if off > 1e-12 * scale_b.max(1.0) {
                return Err(Error::ValueError(format!(
                    "B[{}][{}] has nonzero entries outside the (2,2) block",
                    j + 1,
                    k + 1
                )));
            }
        }
    }
    // noncharacteristic boundary, full and hyperbolic block
    let ad = &sys.a[sys.d - 1];
    let sv = crate::linalg::singular_values_desc(&to_complex(ad));
    let sigma_min_normal = sv.last().copied().unwrap_or(0.0);
    if sigma_min_normal <= RANK_TOL * sv.first().copied().unwrap_or(0.0).max(1e-300) {
        return Err(Error::CharacteristicBoundary {
            sigma_min: sigma_min_normal,
            tol: RANK_TOL,
        });
    }
    let sigma_min_normal_11 = if sys.n1 == 0 {
        f64::INFINITY
    } else {
        let ad11 = sys.block11(ad);
        let sv11 = crate::linalg::singular_values_desc(&to_complex(&ad11));
        let smin = sv11.last().copied().unwrap_or(0.0);
        if smin <= RANK_TOL * sv11.first().copied().unwrap_or(0.0).max(1e-300) {
            return Err(Error::HyperbolicBlockCharacteristic { sigma_min: smin });
        }
        smin
    };
    // ellipticity of the (2,2) second-order symbol on sampled directions
    let samples = sphere_samples.max(8);
    let mut measured = f64::INFINITY;
    for xi in sphere::unit_directions(sys.d, samples) {
        let mut sym = DMatrix::zeros(sys.n2, sys.n2);
        for j in 0..sys.d {
            for k in 0..sys.d {
                sym += sys.block22(&sys.b[j][k]).scale(xi[j] * xi[k]);
            }
        }
        let sym = (&sym + sym.transpose()).scale(0.5);
        let (vals, _) = crate::linalg::symmetric_eigen_sorted(&sym);
        measured = measured.min(vals.first().copied().unwrap_or(0.0));
    }
    if measured < sys.theta * (1.0 - 1e-8) - 1e-12 {
        return Err(Error::EllipticityFailure {
            measured,
            declared: sys.theta,
        });
    }
    Ok(ViscousValidation {
        verdict: true,
        measured_theta: measured,
        declared_theta: sys.theta,
        sigma_min_normal,
        sigma_min_normal_11,
        sphere_samples: samples,
    })
}

/// The reduced first-order operator on `U = (u1, u2, u2')` at one
/// frequency, with the forcing map `f -> F`.
#[derive(Debug, Clone)]
pub struct ReducedResolvent {
    gm: ResolventMatrix,
    /// `F = f_map_1 f` stacked over the three block rows, as one matrix
    /// applied to the n-dimensional forcing.
    f_map: DMatrix<C64>,
    n1: usize,
    n2: usize,
}

impl ReducedResolvent {
    pub fn matrix(&self) -> &DMatrix<C64> {
        self.gm.matrix()
    }

    pub fn resolvent(&self) -> &ResolventMatrix {
        &self.gm
    }

    pub fn dim(&self) -> usize {
        self.n1 + 2 * self.n2
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Map a forcing profile on `u`-space (dimension n) to the reduced
    /// forcing on `U`-space.
    pub fn map_forcing(&self, f: &ExponentialProfile) -> ExponentialProfile {
        f.apply_matrix(&self.f_map)
    }

    /// Lift a boundary matrix acting on `u = (u1, u2)` to `U` by zero
    /// columns on the derivative coordinates.
    pub fn lift_boundary(&self, gamma: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.n1 + self.n2;
        assert_eq!(gamma.ncols(), n);
        let mut out = DMatrix::from_element(gamma.nrows(), self.dim(), C64::new(0.0, 0.0));
        out.view_mut((0, 0), (gamma.nrows(), n)).copy_from(gamma);
        out
    }

    pub fn solver(&self) -> Result<ResolventSolver> {
        ResolventSolver::new(self.gm.clone())
    }
}

/// Assemble the reduction at a frequency.
pub fn reduce(sys: &SecondOrderSystem, freq: &Frequency) -> Result<ReducedResolvent> {
    if freq.eta().len() != sys.d - 1 {
        return Err(Error::DimensionMismatch(format!(
            "eta has {} components, expected d - 1 = {}",
            freq.eta().len(),
            sys.d - 1
        )));
    }
    let (n1, n2, d) = (sys.n1, sys.n2, sys.d);
    let n = n1 + n2;
    let dim = n1 + 2 * n2;
    let lambda = freq.lambda();
    let ad = &sys.a[d - 1];

    // lambda A0 + i sum eta_j A^j + sum eta_j eta_k B^{jk} acting on u
    let mut zero_order = to_complex(&sys.a0) * lambda;
    for (j, eta_j) in freq.eta().iter().enumerate() {
        zero_order += to_complex(&sys.a[j]) * C64::new(0.0, *eta_j);
        for (k, eta_k) in freq.eta().iter().enumerate() {
            zero_order += to_complex(&sys.b[j][k]) * C64::new(eta_j * eta_k, 0.0);
        }
    }
    // coefficient of u2' inside the second-order part:
    // -i sum_{j<d} eta_j (B^{jd} + B^{dj})_22
    let mut cross_22 = DMatrix::<C64>::zeros(n2, n2);
    for (j, eta_j) in freq.eta().iter().enumerate() {
        let sum = sys.block22(&sys.b[j][d - 1]) + sys.block22(&sys.b[d - 1][j]);
        cross_22 += to_complex(&sum) * C64::new(0.0, -*eta_j);
    }

    let ad11 = to_complex(&sys.block11(ad));
    let ad11_lu = ad11.clone().lu();
    let ad12 = to_complex(&ad.view((0, n1), (n1, n2)).into_owned());
    let ad21 = to_complex(&ad.view((n1, 0), (n2, n1)).into_owned());
    let ad22 = to_complex(&sys.block22(ad));
    let bdd = to_complex(&sys.block22(&sys.b[d - 1][d - 1]));
    let bdd_lu = bdd.clone().lu();

    let z11 = zero_order.view((0, 0), (n1, n1)).into_owned();
    let z12 = zero_order.view((0, n1), (n1, n2)).into_owned();
    let z21 = zero_order.view((n1, 0), (n2, n1)).into_owned();
    let z22 = zero_order.view((n1, n1), (n2, n2)).into_owned();

    let solve11 = |rhs: &DMatrix<C64>| -> Result<DMatrix<C64>> {
        ad11_lu
            .solve(rhs)
            .ok_or(Error::HyperbolicBlockCharacteristic { sigma_min: 0.0 })
    };
    let solve22 = |rhs: &DMatrix<C64>| -> Result<DMatrix<C64>> {
        bdd_lu.solve(rhs).ok_or(Error::EllipticityFailure {
            measured: 0.0,
            declared: sys.theta,
        })
    };

    // Row 1 (u1'): A_d11 u1' = f1 - z11 u1 - z12 u2 - A_d12 u2'
    let (r1_u1, r1_u2, r1_du2, f1_map) = if n1 > 0 {
        (
            -solve11(&z11)?,
            -solve11(&z12)?,
            -solve11(&ad12)?,
            solve11(&DMatrix::identity(n1, n1))?,
        )
    } else {
        (
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, n2),
            DMatrix::zeros(0, n2),
            DMatrix::zeros(0, 0),
        )
    };

    // Row 3 (u2''):
    // B^{dd} u2'' = z21 u1 + z22 u2 + A_d21 u1' + A_d22 u2' + cross u2' - f2
    // substitute u1' from row 1.
    let mut g31 = z21.clone();
    let mut g32 = z22.clone();
    let mut g33 = ad22 + cross_22;
    let mut f_row3_from_f1 = DMatrix::<C64>::zeros(n2, n1);
    if n1 > 0 {
        g31 += &ad21 * &r1_u1;
        g32 += &ad21 * &r1_u2;
        g33 += &ad21 * &r1_du2;
        f_row3_from_f1 = &ad21 * &f1_map;
    }
    let g31 = solve22(&g31)?;
    let g32 = solve22(&g32)?;
    let g33 = solve22(&g33)?;
    let f_row3_from_f1 = if n1 > 0 {
        solve22(&f_row3_from_f1)?
    } else {
        f_row3_from_f1
    };
    let f_row3_from_f2 = -solve22(&DMatrix::identity(n2, n2))?;

    // assemble GG on (u1, u2, u2')
    let mut gg = DMatrix::<C64>::zeros(dim, dim);
    if n1 > 0 {
        gg.view_mut((0, 0), (n1, n1)).copy_from(&r1_u1);
        gg.view_mut((0, n1), (n1, n2)).copy_from(&r1_u2);
        gg.view_mut((0, n1 + n2), (n1, n2)).copy_from(&r1_du2);
    }
    for i in 0..n2 {
        gg[(n1 + i, n1 + n2 + i)] = C64::new(1.0, 0.0);
    }
    gg.view_mut((n1 + n2, 0), (n2, n1)).copy_from(&g31);
    gg.view_mut((n1 + n2, n1), (n2, n2)).copy_from(&g32);
    gg.view_mut((n1 + n2, n1 + n2), (n2, n2)).copy_from(&g33);

    // forcing map: F = (A_d11^{-1} f1, 0, B^{-1}(A_d21 A_d11^{-1} f1 - f2))
    let mut f_map = DMatrix::<C64>::zeros(dim, n);
    if n1 > 0 {
        f_map.view_mut((0, 0), (n1, n1)).copy_from(&f1_map);
        f_map
            .view_mut((n1 + n2, 0), (n2, n1))
            .copy_from(&f_row3_from_f1);
    }
    f_map
        .view_mut((n1 + n2, n1), (n2, n2))
        .copy_from(&f_row3_from_f2);

    let gm = ResolventMatrix::from_matrix(gg, freq.clone(), None);
    Ok(ReducedResolvent { gm, f_map, n1, n2 })
}

/// Apply the second-order operator to a profile on `u`-space and subtract
/// the forcing: the residual of (the transformed) equation, exact in the
/// algebra. Used to cross-check the reduction.
pub fn second_order_residual(
    sys: &SecondOrderSystem,
    freq: &Frequency,
    u: &ExponentialProfile,
    f: &ExponentialProfile,
) -> ExponentialProfile {
    let (n1, n2, d) = (sys.n1, sys.n2, sys.d);
    let n = n1 + n2;
    assert_eq!(u.dim(), n);
    let lambda = freq.lambda();

    let mut zero_order = to_complex(&sys.a0) * lambda;
    for (j, eta_j) in freq.eta().iter().enumerate() {
        zero_order += to_complex(&sys.a[j]) * C64::new(0.0, *eta_j);
        for (k, eta_k) in freq.eta().iter().enumerate() {
            zero_order += to_complex(&sys.b[j][k]) * C64::new(eta_j * eta_k, 0.0);
        }
    }
    let du = u.derivative();
    let ddu = du.derivative();
    let mut cross = DMatrix::<C64>::zeros(n, n);
    for (j, eta_j) in freq.eta().iter().enumerate() {
        let sum = &sys.b[j][d - 1] + &sys.b[d - 1][j];
        cross += to_complex(&sum) * C64::new(0.0, -*eta_j);
    }
    let bdd_full = to_complex(&sys.b[d - 1][d - 1]);

    u.apply_matrix(&zero_order)
        .add(&du.apply_matrix(&to_complex(&sys.a[d - 1])))
        .add(&du.apply_matrix(&cross))
        .sub(&ddu.apply_matrix(&bdd_full))
        .sub(f)
}

/// Residual of the reduced system `U' - GG U - F` for the same data; the
/// two residuals vanish together.
pub fn reduced_residual(
    red: &ReducedResolvent,
    u: &ExponentialProfile,
    f: &ExponentialProfile,
) -> ExponentialProfile {
    let (n1, n2) = (red.n1, red.n2);
    let n = n1 + n2;
    assert_eq!(u.dim(), n);
    // U = (u1, u2, u2')
    let du = u.derivative();
    let mut lift_u = DMatrix::<C64>::zeros(red.dim(), n);
    for i in 0..n {
        lift_u[(i, i)] = C64::new(1.0, 0.0);
    }
    let mut lift_du2 = DMatrix::<C64>::zeros(red.dim(), n);
    for i in 0..n2 {
        lift_du2[(n + i, n1 + i)] = C64::new(1.0, 0.0);
    }
    let big_u = u.apply_matrix(&lift_u).add(&du.apply_matrix(&lift_du2));
    let big_f = red.map_forcing(f);
    big_u
        .derivative()
        .sub(&big_u.apply_matrix(red.matrix()))
        .sub(&big_f)
}

/// Build the boundary matrix on `U` selecting `(Gamma_1 u1, u2)`, checking
/// that `Gamma_1` is maximally dissipative for the hyperbolic sub-system.
pub fn rousset_bc(sys: &SecondOrderSystem, gamma1: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (n1, n2) = (sys.n1, sys.n2);
    if gamma1.ncols() != n1 {
        return Err(Error::DimensionMismatch(format!(
            "Gamma_1 must have {n1} columns"
        )));
    }
    if n1 > 0 {
        let sub = sys.hyperbolic_subsystem()?;
        // every A^j_11 is symmetric here, so the identity symmetrizes the block
        let s = Symmetrizer::from_matrix(DMatrix::identity(n1, n1), &sub)?;
        check_maximal_dissipativity(&s, &sub, gamma1)?;
    } else if gamma1.nrows() != 0 {
        return Err(Error::DimensionMismatch(
            "n1 = 0 admits no hyperbolic boundary rows".into(),
        ));
    }
    let k = gamma1.nrows() + n2;
    let dim = n1 + 2 * n2;
    let mut out = DMatrix::from_element(k, dim, C64::new(0.0, 0.0));
    out.view_mut((0, 0), (gamma1.nrows(), n1)).copy_from(gamma1);
    for i in 0..n2 {
        out[(gamma1.nrows() + i, n1 + i)] = C64::new(1.0, 0.0);
    }
    Ok(out)
}

/// Evans quantity at one frequency for the reduced operator.
pub fn evans_value(
    sys: &SecondOrderSystem,
    gamma_u: &DMatrix<C64>,
    freq: &Frequency,
) -> Result<LopatinskiValue> {
    let red = reduce(sys, freq)?;
    let solver = red.solver()?;
    let stable_dim = solver.stable_dim();
    let k = gamma_u.nrows();
    let sv = crate::linalg::singular_values_desc(gamma_u);
    let rank_gamma = sv
        .iter()
        .filter(|&&s| s > RANK_TOL * sv.first().copied().unwrap_or(0.0))
        .count();
    if k != rank_gamma || k != stable_dim {
        return Err(Error::RankMismatch {
            k,
            rank_gamma,
            stable_dim,
        });
    }
    let sigma = if k == 0 {
        f64::INFINITY
    } else {
        sigma_min(&(gamma_u * solver.stable_basis()))
    };
    Ok(LopatinskiValue {
        tau: freq.tau(),
        eta: freq.eta().iter().copied().collect(),
        gamma: freq.gamma(),
        sigma,
        rank_ok: true,
        k,
        rank_gamma,
        stable_dim,
        trace_constant: 1.0 / sigma,
    })
}

/// Scan the Evans quantity over a user-declared bounded frequency set. The
/// verdict applies to that set only; no homogeneity is available to extend
/// it.
pub fn evans_scan(
    sys: &SecondOrderSystem,
    gamma_u: &DMatrix<C64>,
    freqs: &[Frequency],
    sigma_tol: f64,
) -> Result<ScanResult> {
    scan_explicit(freqs, |f| evans_value(sys, gamma_u, f), sigma_tol)
}

/// Weight configuration for the viscous energy: `w_u` on the `(u1, u2)`
/// coordinates and `w_der` on `u2'`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ViscousWeights {
    pub u: WeightFn,
    pub du: WeightFn,
}

impl Default for ViscousWeights {
    fn default() -> Self {
        ViscousWeights {
            u: WeightFn::Gamma,
            du: WeightFn::Const(1.0),
        }
    }
}

/// Kreiss-type ratio measurement for the reduced system under the
/// configured weights; forcing trials act on the full `U`-space.
pub fn viscous_stability_check(
    sys: &SecondOrderSystem,
    gamma_u: &DMatrix<C64>,
    freqs: &[Frequency],
    protocol: &TrialProtocol,
    weights: &ViscousWeights,
    cap: f64,
) -> Result<StabilityReport> {
    weights.u.validate()?;
    weights.du.validate()?;
    let n = sys.n();
    let n2 = sys.n2();
    let energy = EnergyWeights::blocks(vec![(0, n, weights.u), (n, n2, weights.du)])?;
    measure_ratios(
        freqs,
        |freq| reduce(sys, freq)?.solver(),
        |_| gamma_u.clone(),
        &energy,
        protocol,
        cap,
        None,
    )
}
