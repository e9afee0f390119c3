//! The resolvent matrix `G(Lambda)`, its stable/unstable splitting, and the
//! exact half-line solve inside the exponential-profile algebra.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::schur::{block_diagonalize, ordered_schur, ClusterBlock, OrderedSchur};
use crate::linalg::{
    self, sigma_min, singular_values_desc, spectral_norm, to_complex, vec_norm, C64,
};
use crate::profile::{ExponentialProfile, ProfileTerm};
use crate::system::{FirstOrderSystem, Frequency, RANK_TOL};

/// `G(Lambda) = -A_d^{-1} ((gamma + i tau) I + i sum_j eta_j A^j)` together
/// with its spectral summary.
#[derive(Debug, Clone)]
pub struct ResolventMatrix {
    g: DMatrix<C64>,
    freq: Frequency,
    norm: f64,
    eigenvalues: Vec<C64>,
    spectral_gap: f64,
    /// Expected stable dimension (`n_+` of the source system); `None` for
    /// matrices that did not come from a hyperbolic system.
    expected_stable_dim: Option<usize>,
}

impl ResolventMatrix {
    /// Wrap an arbitrary first-order coefficient matrix (used by the
    /// partially parabolic reduction, where no `n_+` count applies).
    pub fn from_matrix(
        g: DMatrix<C64>,
        freq: Frequency,
        expected_stable_dim: Option<usize>,
    ) -> Self {
        let norm = spectral_norm(&g);
        let eigenvalues = if g.nrows() == 0 {
            Vec::new()
        } else {
            linalg::eigenvalues(&g)
        };
        let spectral_gap = eigenvalues
            .iter()
            .map(|e| e.re.abs())
            .fold(f64::INFINITY, f64::min);
        ResolventMatrix {
            g,
            freq,
            norm,
            eigenvalues,
            spectral_gap,
            expected_stable_dim,
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.g
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn frequency(&self) -> &Frequency {
        &self.freq
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    /// min over eigenvalues of `|Re mu|`.
    pub fn spectral_gap(&self) -> f64 {
        self.spectral_gap
    }

    pub fn expected_stable_dim(&self) -> Option<usize> {
        self.expected_stable_dim
    }
}

/// Assemble `G(Lambda)` for a validated system.
pub fn resolvent_matrix(sys: &FirstOrderSystem, freq: &Frequency) -> Result<ResolventMatrix> {
    if freq.eta().len() != sys.d() - 1 {
        return Err(Error::DimensionMismatch(format!(
            "eta has {} components, expected d - 1 = {}",
            freq.eta().len(),
            sys.d() - 1
        )));
    }
    let n = sys.n();
    let ad = to_complex(sys.normal());
    let sv = singular_values_desc(&ad);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin <= RANK_TOL * smax.max(1e-300) {
        return Err(Error::CharacteristicBoundary {
            sigma_min: smin,
            tol: RANK_TOL * smax,
        });
    }
    let mut rhs = DMatrix::<C64>::identity(n, n) * freq.lambda();
    for (j, eta_j) in freq.eta().iter().enumerate() {
        rhs += to_complex(sys.coefficient(j)) * C64::new(0.0, *eta_j);
    }
    let lu = ad.lu();
    let solved = lu.solve(&rhs).ok_or(Error::CharacteristicBoundary {
        sigma_min: smin,
        tol: RANK_TOL * smax,
    })?;
    let g = -solved;
    Ok(ResolventMatrix::from_matrix(
        g,
        freq.clone(),
        Some(sys.n_plus()),
    ))
}

/// Outcome of the spectral-gap check.
#[derive(Debug, Clone, Serialize)]
pub struct HerschReport {
    pub pass: bool,
    pub spectral_gap: f64,
    pub threshold: f64,
    /// Offending eigenvalue when the check fails, as `[re, im]`.
    pub offending: Option<[f64; 2]>,
}

/// Check that `G` has no eigenvalue within `tol * (1 + |G|)` of the
/// imaginary axis.
pub fn check_hersch(gm: &ResolventMatrix, tol: f64) -> HerschReport {
    let threshold = tol * (1.0 + gm.norm());
    let mut offending = None;
    for e in gm.eigenvalues() {
        if e.re.abs() <= threshold {
            offending = Some([e.re, e.im]);
            break;
        }
    }
    HerschReport {
        pass: offending.is_none(),
        spectral_gap: gm.spectral_gap(),
        threshold,
        offending,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SubspaceKind {
    Stable,
    Unstable,
}

/// An orthonormal basis of an invariant subspace.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    pub v: DMatrix<C64>,
    pub kind: SubspaceKind,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.v.ncols()
    }
}

/// Shared relative tolerance for declaring an eigenvalue "on the axis".
pub const AXIS_TOL: f64 = RANK_TOL;

/// Solver state at a fixed frequency: the ordered Schur form plus the
/// cluster block-diagonalization of the stable block needed to expand
/// homogeneous solutions in the profile algebra.
#[derive(Debug, Clone)]
pub struct ResolventSolver {
    gm: ResolventMatrix,
    schur: OrderedSchur,
    /// Basis columns of `Q1 * R` (not orthonormal) grouped by cluster.
    chain_basis: DMatrix<C64>,
    /// Unit upper triangular change of basis within the stable block.
    r: DMatrix<C64>,
    blocks: Vec<ClusterBlock>,
}

impl ResolventSolver {
    pub fn new(gm: ResolventMatrix) -> Result<Self> {
        let threshold = AXIS_TOL * (1.0 + gm.norm());
        if let Some(e) = gm.eigenvalues().iter().find(|e| e.re.abs() <= threshold) {
            return Err(Error::NearImaginaryEigenvalue {
                eig: format!("{e}"),
                re_abs: e.re.abs(),
                tol: threshold,
            });
        }
        let cluster_tol = RANK_TOL * (1.0 + gm.norm());
        let schur = ordered_schur(gm.matrix(), cluster_tol)?;
        if let Some(expected) = gm.expected_stable_dim() {
            if schur.stable_dim != expected {
                return Err(Error::DimensionAnomaly {
                    stable_dim: schur.stable_dim,
                    n_plus: expected,
                });
            }
        }
        let m = schur.stable_dim;
        let t_stable = schur.t.view((0, 0), (m, m)).into_owned();
        let stable_clusters: Vec<std::ops::Range<usize>> = schur
            .clusters
            .iter()
            .filter(|c| c.stable)
            .map(|c| c.range.clone())
            .collect();
        let (r, blocks) = block_diagonalize(&t_stable, &stable_clusters);
        let chain_basis = schur.q.columns(0, m).into_owned() * &r;
        Ok(ResolventSolver {
            gm,
            schur,
            chain_basis,
            r,
            blocks,
        })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        self.gm.matrix()
    }

    pub fn frequency(&self) -> &Frequency {
        self.gm.frequency()
    }

    pub fn resolvent(&self) -> &ResolventMatrix {
        &self.gm
    }

    pub fn stable_dim(&self) -> usize {
        self.schur.stable_dim
    }

    /// Orthonormal stable basis (leading Schur vectors).
    pub fn stable_basis(&self) -> DMatrix<C64> {
        self.schur.q.columns(0, self.schur.stable_dim).into_owned()
    }

    pub fn unstable_basis(&self) -> DMatrix<C64> {
        let m = self.schur.stable_dim;
        self.schur.q.columns(m, self.gm.dim() - m).into_owned()
    }

    pub fn split(&self) -> (SubspaceBasis, SubspaceBasis) {
        (
            SubspaceBasis {
                v: self.stable_basis(),
                kind: SubspaceKind::Stable,
            },
            SubspaceBasis {
                v: self.unstable_basis(),
                kind: SubspaceKind::Unstable,
            },
        )
    }

    /// Decay rate of the stable block: `min |Re mu|` over stable eigenvalues.
    pub fn stable_gap(&self) -> f64 {
        (0..self.schur.stable_dim)
            .map(|i| self.schur.t[(i, i)].re.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `e^{x G} V c` computed through the stable block only; the unstable
    /// part of the space is never exponentiated.
    pub fn propagate_coeffs(&self, coeffs: &DVector<C64>, x: f64) -> DVector<C64> {
        let m = self.schur.stable_dim;
        assert_eq!(coeffs.len(), m, "coefficients live in the stable subspace");
        if m == 0 {
            return DVector::from_element(self.gm.dim(), C64::new(0.0, 0.0));
        }
        let t_stable = self.schur.t.view((0, 0), (m, m)).into_owned();
        let e = (t_stable * C64::new(x, 0.0)).exp();
        self.stable_basis() * (e * coeffs)
    }

    /// Exact profile representation of `x -> e^{x G} V c`.
    pub fn homogeneous_profile(&self, coeffs: &DVector<C64>) -> ExponentialProfile {
        let m = self.schur.stable_dim;
        assert_eq!(coeffs.len(), m);
        let n = self.gm.dim();
        if m == 0 {
            return ExponentialProfile::zero(n);
        }
        // coordinates in the block-diagonal frame
        let b = self
            .r
            .clone()
            .solve_upper_triangular(coeffs)
            .expect("unit upper triangular change of basis");
        let drop_tol = 1e-14 * vec_norm(&b).max(1e-300);
        let mut terms: Vec<ProfileTerm> = Vec::new();
        for blk in &self.blocks {
            let cols = self.chain_basis.columns(blk.range.start, blk.range.len());
            let mut w = b.rows(blk.range.start, blk.range.len()).into_owned();
            let mut factorial = 1.0f64;
            for j in 0..blk.range.len() as u32 {
                if j > 0 {
                    factorial *= j as f64;
                }
                let coeff = (cols * &w).map(|z| z / C64::new(factorial, 0.0));
                if vec_norm(&coeff) > drop_tol {
                    terms.push(ProfileTerm {
                        coeff,
                        rate: blk.mean,
                        power: j,
                    });
                }
                if (j as usize) + 1 < blk.range.len() {
                    w = &blk.nilpotent * w;
                    if vec_norm(&w) <= drop_tol {
                        break;
                    }
                } else {
                    break;
                }
            }
        }
        ExponentialProfile::new(n, terms).expect("stable rates decay")
    }

    /// Particular decaying solution of `u' - G u = f` built per rate group
    /// by the block-triangular chain of shifted solves.
    pub fn particular_profile(&self, f: &ExponentialProfile) -> Result<ExponentialProfile> {
        let n = self.gm.dim();
        assert_eq!(f.dim(), n, "forcing dimension must match the operator");
        if f.is_zero() {
            return Ok(ExponentialProfile::zero(n));
        }
        // group term indices by rate bits
        use std::collections::BTreeMap;
        let mut groups: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
        for (i, t) in f.terms().iter().enumerate() {
            groups
                .entry((t.rate.re.to_bits(), t.rate.im.to_bits()))
                .or_default()
                .push(i);
        }
        let res_tol = 1e-8 * (1.0 + self.gm.norm());
        let mut out: Vec<ProfileTerm> = Vec::new();
        for ((re_bits, im_bits), idxs) in groups {
            let mu = C64::new(f64::from_bits(re_bits), f64::from_bits(im_bits));
            let dist = self
                .gm
                .eigenvalues()
                .iter()
                .map(|e| (e - mu).norm())
                .fold(f64::INFINITY, f64::min);
            if dist <= res_tol {
                return Err(Error::ResonantMode {
                    mu: format!("{mu}"),
                    dist,
                });
            }
            let shifted = DMatrix::<C64>::identity(n, n) * mu - self.gm.matrix();
            let lu = shifted.lu();
            let m_max = idxs.iter().map(|&i| f.terms()[i].power).max().unwrap_or(0);
            let mut rhs_by_power: Vec<DVector<C64>> =
                vec![DVector::from_element(n, C64::new(0.0, 0.0)); (m_max + 1) as usize];
            for &i in &idxs {
                let t = &f.terms()[i];
                rhs_by_power[t.power as usize] += &t.coeff;
            }
            // chain: (mu I - G) w_i = v_i - (i+1) w_{i+1}
            let mut w_next: Option<DVector<C64>> = None;
            for i in (0..=m_max).rev() {
                let mut rhs = rhs_by_power[i as usize].clone();
                if let Some(w) = &w_next {
                    rhs -= w.map(|z| z * C64::new((i + 1) as f64, 0.0));
                }
                let w = lu.solve(&rhs).ok_or(Error::ResonantMode {
                    mu: format!("{mu}"),
                    dist,
                })?;
                out.push(ProfileTerm {
                    coeff: w.clone(),
                    rate: mu,
                    power: i,
                });
                w_next = Some(w);
            }
        }
        ExponentialProfile::new(n, out)
    }

    /// Solve `u' - G u = f`, `Gamma u(0) = g` in L2.
    pub fn solve(
        &self,
        gamma: &DMatrix<C64>,
        f: &ExponentialProfile,
        g: &DVector<C64>,
    ) -> Result<ResolventSolution> {
        let n = self.gm.dim();
        if gamma.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "boundary matrix must have {n} columns"
            )));
        }
        if g.len() != gamma.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "boundary datum has length {}, expected {}",
                g.len(),
                gamma.nrows()
            )));
        }
        let up = self.particular_profile(f)?;
        let m = self.stable_dim();
        let v = self.stable_basis();
        let mm = gamma * &v;
        let sigma = if gamma.nrows() == 0 && m == 0 {
            f64::INFINITY
        } else {
            sigma_min(&mm)
        };
        if gamma.nrows() != m {
            return Err(Error::LopatinskiSingular {
                sigma: if sigma.is_finite() { sigma } else { 0.0 },
            });
        }
        let coeffs = if m == 0 {
            DVector::from_element(0, C64::new(0.0, 0.0))
        } else {
            let smax = singular_values_desc(&mm).first().copied().unwrap_or(0.0);
            if sigma <= 1e-13 * smax.max(1.0) {
                return Err(Error::LopatinskiSingular { sigma });
            }
            let rhs = g - gamma * up.trace0();
            mm.clone()
                .lu()
                .solve(&rhs)
                .ok_or(Error::LopatinskiSingular { sigma })?
        };
        let uh = self.homogeneous_profile(&coeffs);
        let profile = up.add(&uh);
        let boundary_residual = if gamma.nrows() == 0 {
            0.0
        } else {
            vec_norm(&(gamma * profile.trace0() - g))
        };
        Ok(ResolventSolution {
            profile,
            coeffs,
            sigma,
            boundary_residual,
        })
    }

    /// Residual profile `u' - G u - f`, exact in the algebra.
    pub fn residual(&self, u: &ExponentialProfile, f: &ExponentialProfile) -> ExponentialProfile {
        u.derivative().sub(&u.apply_matrix(self.gm.matrix())).sub(f)
    }
}

/// Solution of the half-line resolvent problem with diagnostics.
#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub profile: ExponentialProfile,
    /// Stable-basis coordinates of the homogeneous part.
    pub coeffs: DVector<C64>,
    /// `sigma_min(Gamma V)` encountered by the boundary solve.
    pub sigma: f64,
    pub boundary_residual: f64,
}

/// Stable and unstable invariant subspaces of `G(Lambda)`; checks the
/// dimension count against `n_+` when the matrix came from a hyperbolic
/// system.
pub fn stable_subspace(gm: &ResolventMatrix) -> Result<(SubspaceBasis, SubspaceBasis)> {
    ResolventSolver::new(gm.clone()).map(|s| s.split())
}

/// Free-function form of the stable-block propagator.
pub fn propagate(gm: &ResolventMatrix, coeffs: &DVector<C64>, x: f64) -> Result<DVector<C64>> {
    Ok(ResolventSolver::new(gm.clone())?.propagate_coeffs(coeffs, x))
}

/// Convenience wrapper constructing the solver and solving once.
pub fn solve_resolvent(
    gm: &ResolventMatrix,
    gamma: &DMatrix<C64>,
    f: &ExponentialProfile,
    g: &DVector<C64>,
) -> Result<ResolventSolution> {
    ResolventSolver::new(gm.clone())?.solve(gamma, f, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn wave() -> FirstOrderSystem {
        FirstOrderSystem::new(
            2,
            1,
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
        )
        .unwrap()
    }

    #[test]
    fn scalar_resolvent_value() {
        let sys = FirstOrderSystem::new(1, 1, vec![DMatrix::from_row_slice(1, 1, &[2.0])]).unwrap();
        let gm = resolvent_matrix(&sys, &Frequency::one_d(0.0, 1.0).unwrap()).unwrap();
        assert!((gm.matrix()[(0, 0)] - c(-0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn wave_resolvent_is_minus_lambda_times_a() {
        let sys = wave();
        let freq = Frequency::one_d(0.7, 0.3).unwrap();
        let gm = resolvent_matrix(&sys, &freq).unwrap();
        let lambda = freq.lambda();
        let expected = to_complex(sys.normal()) * (-lambda);
        assert!((gm.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn two_d_resolvent_hand_value() {
        // tangential = I, normal = diag(1,-1), tau=1, eta=1, gamma=1:
        // G = -diag(1,-1)((1+i) I + i I) = [[-1-2i, 0], [0, 1+2i]]
        let sys = FirstOrderSystem::new(
            2,
            2,
            vec![
                DMatrix::identity(2, 2),
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            ],
        )
        .unwrap();
        let freq = Frequency::new(1.0, DVector::from_vec(vec![1.0]), 1.0).unwrap();
        let gm = resolvent_matrix(&sys, &freq).unwrap();
        assert!((gm.matrix()[(0, 0)] - c(-1.0, -2.0)).norm() < 1e-14);
        assert!((gm.matrix()[(1, 1)] - c(1.0, 2.0)).norm() < 1e-14);
        assert!(gm.matrix()[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn hersch_passes_for_wave_and_fails_on_axis() {
        let sys = wave();
        let gm = resolvent_matrix(&sys, &Frequency::one_d(0.0, 1.0).unwrap()).unwrap();
        assert!(check_hersch(&gm, 1e-8).pass);

        let axis = ResolventMatrix::from_matrix(
            DMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
            Frequency::one_d(0.0, 1.0).unwrap(),
            None,
        );
        let rep = check_hersch(&axis, 1e-8);
        assert!(!rep.pass);
        assert_eq!(rep.offending, Some([0.0, 1.0]));
    }

    #[test]
    fn stable_subspace_of_diagonal() {
        let gm = ResolventMatrix::from_matrix(
            DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]),
            Frequency::one_d(0.0, 1.0).unwrap(),
            None,
        );
        let (stable, unstable) = stable_subspace(&gm).unwrap();
        assert_eq!(stable.dim(), 1);
        assert_eq!(unstable.dim(), 1);
        assert!((stable.v[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(stable.v[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn wave_stable_direction_and_dimension() {
        let sys = wave();
        let gm = resolvent_matrix(&sys, &Frequency::one_d(0.0, 1.0).unwrap()).unwrap();
        let (stable, _) = stable_subspace(&gm).unwrap();
        assert_eq!(stable.dim(), 1);
        assert!((stable.v[(0, 0)] - stable.v[(1, 0)]).norm() < 1e-12);
    }

    #[test]
    fn near_imaginary_is_an_error() {
        let gm = ResolventMatrix::from_matrix(
            DMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
            Frequency::one_d(0.0, 1.0).unwrap(),
            None,
        );
        assert!(matches!(
            stable_subspace(&gm),
            Err(Error::NearImaginaryEigenvalue { .. })
        ));
    }

    #[test]
    fn propagation_decays_along_stable_mode() {
        let gm = ResolventMatrix::from_matrix(
            DMatrix::from_row_slice(2, 2, &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]),
            Frequency::one_d(0.0, 1.0).unwrap(),
            None,
        );
        let solver = ResolventSolver::new(gm).unwrap();
        let coeffs = DVector::from_vec(vec![c(1.0, 0.0)]);
        let u1 = solver.propagate_coeffs(&coeffs, 1.0);
        assert!((u1[0] - c((-1.0f64).exp(), 0.0)).norm() < 1e-12);
        assert!(u1[1].norm() < 1e-14);
        // x = 0 is the identity
        let u0 = solver.propagate_coeffs(&coeffs, 0.0);
        assert!((u0[0] - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn wave_eigenvector_propagation() {
        let sys = wave();
        let gm = resolvent_matrix(&sys, &Frequency::one_d(0.0, 1.0).unwrap()).unwrap();
        let solver = ResolventSolver::new(gm).unwrap();
        // u0 = (1,1)/sqrt2 is the stable eigenvector with eigenvalue -1
        let u0 = DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]).scale(1.0 / 2.0f64.sqrt());
        let coeffs = solver.stable_basis().adjoint() * &u0;
        let u2 = solver.propagate_coeffs(&coeffs, 2.0);
        let expected = u0.scale((-2.0f64).exp());
        assert!((u2 - expected).norm() < 1e-12);
    }

    #[test]
    fn semigroup_property() {
        let sys = wave();
        let gm = resolvent_matrix(&sys, &Frequency::one_d(0.4, 0.9).unwrap()).unwrap();
        let solver = ResolventSolver::new(gm).unwrap();
        let coeffs = DVector::from_vec(vec![c(0.3, -0.7)]);
        let direct = solver.propagate_coeffs(&coeffs, 1.7);
        let mid = solver.propagate_coeffs(&coeffs, 0.9);
        let coeffs_mid = solver.stable_basis().adjoint() * mid;
        let two_step = solver.propagate_coeffs(&coeffs_mid, 0.8);
        assert!((direct - two_step).norm() < 1e-10);
    }

    #[test]
    fn scalar_solve_hand_example() {
        // G = [-1], f = e^{-2x}, Gamma = [1], g = 0:
        // u_p = -e^{-2x}, c solves (-1 + c) = 0, u = -e^{-2x} + e^{-x}
        let gm = ResolventMatrix::from_matrix(
            DMatrix::from_row_slice(1, 1, &[c(-1.0, 0.0)]),
            Frequency::one_d(0.0, 1.0).unwrap(),
            None,
        );
        let solver = ResolventSolver::new(gm).unwrap();
        let f = ExponentialProfile::single(DVector::from_vec(vec![c(1.0, 0.0)]), c(-2.0, 0.0), 0)
            .unwrap();
        let g = DVector::from_vec(vec![c(0.0, 0.0)]);
        let gamma = DMatrix::from_row_slice(1, 1, &[c(1.0, 0.0)]);
        let sol = solver.solve(&gamma, &f, &g).unwrap();
        for x in [0.0, 0.3, 1.1, 2.7] {
            let expected = -(-2.0f64 * x).exp() + (-x).exp();
            assert!((sol.profile.eval(x)[0] - c(expected, 0.0)).norm() < 1e-12);
        }
        // residual is zero in the algebra
        let resid = solver.residual(&sol.profile, &f);
        assert!(resid.norm() < 1e-13);
        // check u' + u = f at a point as well
        assert!(sol.boundary_residual < 1e-13);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let sys = wave();
        let gm = resolvent_matrix(&sys, &Frequency::one_d(0.2, 0.5).unwrap()).unwrap();
        let solver = ResolventSolver::new(gm).unwrap();
        let gamma = DMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let sol = solver
            .solve(
                &gamma,
                &ExponentialProfile::zero(2),
                &DVector::from_vec(vec![c(0.0, 0.0)]),
            )
            .unwrap();
        assert!(sol.profile.is_zero());
    }

    #[test]
    fn resonant_rate_is_rejected() {
        let gm = ResolventMatrix::from_matrix(
            DMatrix::from_row_slice(1, 1, &[c(-1.0, 0.0)]),
            Frequency::one_d(0.0, 1.0).unwrap(),
            None,
        );
        let solver = ResolventSolver::new(gm).unwrap();
        let f = ExponentialProfile::single(DVector::from_vec(vec![c(1.0, 0.0)]), c(-1.0, 0.0), 0)
            .unwrap();
        assert!(matches!(
            solver.particular_profile(&f),
            Err(Error::ResonantMode { .. })
        ));
    }

    #[test]
    fn annihilating_boundary_is_lopatinski_singular() {
        let sys = wave();
        let gm = resolvent_matrix(&sys, &Frequency::one_d(0.0, 1.0).unwrap()).unwrap();
        let solver = ResolventSolver::new(gm).unwrap();
        let gamma = DMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(-1.0, 0.0)]);
        let g = DVector::from_vec(vec![c(1.0, 0.0)]);
        match solver.solve(&gamma, &ExponentialProfile::zero(2), &g) {
            Err(Error::LopatinskiSingular { sigma }) => assert!(sigma < 1e-10),
            other => panic!("expected LopatinskiSingular, got {other:?}"),
        }
    }

    #[test]
    fn polynomial_forcing_chain() {
        // forcing x e^{-2x} against G = [[-1, 1], [0, -3]]
        let g_mat = DMatrix::from_row_slice(
            2,
            2,
            &[c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-3.0, 0.0)],
        );
        let gm = ResolventMatrix::from_matrix(g_mat, Frequency::one_d(0.0, 1.0).unwrap(), None);
        let solver = ResolventSolver::new(gm).unwrap();
        let f = ExponentialProfile::single(
            DVector::from_vec(vec![c(1.0, 0.0), c(-0.5, 0.3)]),
            c(-2.0, 0.4),
            1,
        )
        .unwrap();
        let up = solver.particular_profile(&f).unwrap();
        let resid = solver.residual(&up, &f);
        assert!(resid.norm() < 1e-12, "residual {}", resid.norm());
    }

    #[test]
    fn homogeneous_profile_matches_propagator_with_multiple_eigenvalue() {
        // defective-free double eigenvalue: G = diag(-1, -1, -2) rotated
        let w = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(0.5, 0.1),
                c(0.0, 0.2),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(0.7, 0.0),
                c(0.3, 0.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
            ],
        );
        let d = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(-1.0, 0.5),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(-1.0, 0.5),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(-2.0, 0.0),
            ],
        );
        let g_mat = &w * d * w.clone().try_inverse().unwrap();
        let gm = ResolventMatrix::from_matrix(g_mat, Frequency::one_d(0.0, 1.0).unwrap(), None);
        let solver = ResolventSolver::new(gm).unwrap();
        assert_eq!(solver.stable_dim(), 3);
        let coeffs = DVector::from_vec(vec![c(1.0, 0.0), c(-0.3, 0.8), c(0.2, 0.2)]);
        let p = solver.homogeneous_profile(&coeffs);
        for x in [0.0, 0.5, 1.9] {
            let via_exp = solver.propagate_coeffs(&coeffs, x);
            let via_profile = p.eval(x);
            assert!((via_exp - via_profile).norm() < 1e-10, "mismatch at x={x}");
        }
        // termwise residual of the homogeneous equation
        let resid = p.derivative().sub(&p.apply_matrix(solver.matrix()));
        assert!(resid.norm() < 1e-9, "residual {}", resid.norm());
    }

    #[test]
    fn truly_defective_stable_block() {
        // exact Jordan block with Re < 0: profile needs an x e^{mu x} term
        let g_mat = DMatrix::from_row_slice(
            2,
            2,
            &[c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        );
        let gm = ResolventMatrix::from_matrix(g_mat, Frequency::one_d(0.0, 1.0).unwrap(), None);
        let solver = ResolventSolver::new(gm).unwrap();
        assert_eq!(solver.stable_dim(), 2);
        let coeffs = DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let u0 = solver.stable_basis() * &coeffs;
        let p = solver.homogeneous_profile(&coeffs);
        assert!(
            p.terms().iter().any(|t| t.power == 1),
            "expected a polynomial term"
        );
        for x in [0.0, 0.4, 1.3] {
            // e^{xJ} (a, b) = e^{-x} (a + xb, b)
            let expected = DVector::from_vec(vec![
                (u0[0] + u0[1] * c(x, 0.0)) * c((-x).exp(), 0.0),
                u0[1] * c((-x).exp(), 0.0),
            ]);
            assert!((p.eval(x) - expected).norm() < 1e-10);
        }
    }

    #[test]
    fn homogeneity_in_frequency() {
        let sys = wave();
        let f1 = Frequency::one_d(0.8, 0.6).unwrap();
        let f2 = f1.scaled(3.0).unwrap();
        let g1 = resolvent_matrix(&sys, &f1).unwrap();
        let g2 = resolvent_matrix(&sys, &f2).unwrap();
        assert!((g1.matrix().scale(3.0) - g2.matrix()).norm() < 1e-12);
    }
}
