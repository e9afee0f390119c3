//! Independent reference solver for the half-line resolvent problem.
//!
//! Used by the validation suites to cross-check the profile-algebra solver
//! through a completely different route: spectral projectors from the
//! matrix sign iteration, the Green's-function representation
//!
//! ```text
//! u(x) = int_0^x e^{(x-y)G} P- f(y) dy - int_x^inf e^{(x-y)G} P+ f(y) dy
//!        + e^{xG} P- (homogeneous part),
//! ```
//!
//! and adaptive Simpson quadrature. Nothing here shares code with the
//! ordered-Schur splitting or the chain solves it validates; exponentials
//! are only ever taken of the projected blocks, so nothing grows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, vec_norm, C64};
use crate::profile::ExponentialProfile;

/// Spectral data extracted from the contour-integral projectors.
pub struct GreensOracle {
    /// Orthonormal basis of the stable invariant subspace (range of P-).
    u_minus: DMatrix<C64>,
    /// Compression of G to the stable subspace.
    m_minus: DMatrix<C64>,
    /// `C- = U-^H P-`, so that `e^{xG} P- = U- e^{x M-} C-`.
    c_minus: DMatrix<C64>,
    u_plus: DMatrix<C64>,
    m_plus: DMatrix<C64>,
    c_plus: DMatrix<C64>,
    stable_dim: usize,
    /// Largest eigenvalue magnitude; sets the feature scale of the
    /// quadrature panels.
    rho: f64,
}

impl GreensOracle {
    pub fn new(g: &DMatrix<C64>) -> Result<Self> {
        let n = g.nrows();
        let eigs = eigenvalues(g);
        let gap = eigs
            .iter()
            .map(|e| e.re.abs())
            .fold(f64::INFINITY, f64::min);
        if gap <= 0.0 || gap.is_nan() {
            return Err(Error::NearImaginaryEigenvalue {
                eig: "oracle input".into(),
                re_abs: gap,
                tol: 0.0,
            });
        }
        let stable_dim = eigs.iter().filter(|e| e.re < 0.0).count();
        let p_minus = if stable_dim == 0 {
            DMatrix::zeros(n, n)
        } else if stable_dim == n {
            DMatrix::identity(n, n)
        } else {
            stable_projector(g)
        };
        let p_plus = DMatrix::<C64>::identity(n, n) - &p_minus;

        let (u_minus, m_minus, c_minus) = projected_block(g, &p_minus, stable_dim);
        let (u_plus, m_plus, c_plus) = projected_block(g, &p_plus, n - stable_dim);
        let rho = eigs.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
        Ok(GreensOracle {
            u_minus,
            m_minus,
            c_minus,
            u_plus,
            m_plus,
            c_plus,
            stable_dim,
            rho,
        })
    }

    pub fn stable_dim(&self) -> usize {
        self.stable_dim
    }

    /// `e^{xG} P- v` for `x >= 0`.
    fn prop_minus(&self, x: f64, v: &DVector<C64>) -> DVector<C64> {
        if self.stable_dim == 0 {
            return DVector::from_element(v.len(), C64::new(0.0, 0.0));
        }
        let e = (self.m_minus.clone() * C64::new(x, 0.0)).exp();
        &self.u_minus * (e * (&self.c_minus * v))
    }

    /// `e^{xG} P+ v` for `x <= 0`.
    fn prop_plus(&self, x: f64, v: &DVector<C64>) -> DVector<C64> {
        if self.u_plus.ncols() == 0 {
            return DVector::from_element(v.len(), C64::new(0.0, 0.0));
        }
        let e = (self.m_plus.clone() * C64::new(x, 0.0)).exp();
        &self.u_plus * (e * (&self.c_plus * v))
    }

    /// Solve `u' - G u = f`, `Gamma u(0) = g` on a grid of sample points,
    /// entirely by projector quadrature.
    pub fn solve_on_grid(
        &self,
        gamma: &DMatrix<C64>,
        f: &ExponentialProfile,
        g: &DVector<C64>,
        xs: &[f64],
        quad_tol: f64,
    ) -> Result<Vec<DVector<C64>>> {
        let n = self.u_minus.nrows();
        // truncation horizon for the decaying forcing
        let delta = f.decay_margin();
        let x_max = xs.iter().copied().fold(0.0f64, f64::max);
        let horizon = if f.is_zero() {
            x_max
        } else {
            x_max + (35.0 + 8.0 * f.max_power() as f64) / delta
        };

        // panel width resolving both the forcing decay and the operator scale
        let feature = (delta.min(1e6) + self.rho).max(1e-6);

        // u_p(0) = -int_0^inf e^{-yG} P+ f(y) dy
        let up0 = if f.is_zero() {
            DVector::from_element(n, C64::new(0.0, 0.0))
        } else {
            -composite_adaptive(
                &|y: f64| self.prop_plus(-y, &f.eval(y)),
                0.0,
                horizon,
                quad_tol,
                n,
                feature,
            )
        };

        // boundary solve against the stable basis
        let m = gamma * &self.u_minus;
        let rhs = g - gamma * &up0;
        let coeffs = if self.stable_dim == 0 {
            if vec_norm(&rhs) > 1e-8 * (1.0 + vec_norm(g)) {
                return Err(Error::LopatinskiSingular { sigma: 0.0 });
            }
            DVector::from_element(0, C64::new(0.0, 0.0))
        } else {
            m.clone()
                .lu()
                .solve(&rhs)
                .ok_or(Error::LopatinskiSingular {
                    sigma: crate::linalg::sigma_min(&m),
                })?
        };

        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            let mut u = if self.stable_dim == 0 {
                DVector::from_element(n, C64::new(0.0, 0.0))
            } else {
                let e = (self.m_minus.clone() * C64::new(x, 0.0)).exp();
                &self.u_minus * (e * &coeffs)
            };
            if !f.is_zero() {
                if x > 0.0 {
                    u += composite_adaptive(
                        &|y: f64| self.prop_minus(x - y, &f.eval(y)),
                        0.0,
                        x,
                        quad_tol,
                        n,
                        feature,
                    );
                }
                u -= composite_adaptive(
                    &|y: f64| self.prop_plus(x - y, &f.eval(y)),
                    x,
                    horizon,
                    quad_tol,
                    n,
                    feature,
                );
            }
            out.push(u);
        }
        Ok(out)
    }
}

/// Spectral projector onto the stable invariant subspace via the scaled
/// Newton iteration for the matrix sign function: `P- = (I - sign(G)) / 2`.
/// Quadratically convergent whenever no eigenvalue sits on the imaginary
/// axis.
fn stable_projector(g: &DMatrix<C64>) -> DMatrix<C64> {
    let n = g.nrows();
    let eye = DMatrix::<C64>::identity(n, n);
    let mut x = g.clone();
    for _ in 0..100 {
        let lu = x.clone().lu();
        let xinv = lu
            .solve(&eye)
            .expect("sign iteration stays invertible off the axis");
        // determinant scaling
        let det_mag = lu.determinant().norm();
        let mu = if det_mag.is_finite() && det_mag > 0.0 {
            det_mag.powf(-1.0 / n as f64).clamp(1e-8, 1e8)
        } else {
            1.0
        };
        let next = (x.scale(mu) + xinv.scale(1.0 / mu)).scale(0.5);
        let diff = (&next - &x).norm();
        x = next;
        if diff <= 1e-14 * (1.0 + x.norm()) {
            break;
        }
    }
    (eye - x).scale(0.5)
}

/// Orthonormal range basis `U`, compression `M = U^H G U` and coordinate
/// map `C = U^H P` of a spectral projector.
fn projected_block(
    g: &DMatrix<C64>,
    p: &DMatrix<C64>,
    rank: usize,
) -> (DMatrix<C64>, DMatrix<C64>, DMatrix<C64>) {
    let n = g.nrows();
    if rank == 0 {
        return (
            DMatrix::zeros(n, 0),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, n),
        );
    }
    let svd = crate::linalg::jacobi_svd(p);
    let mut u = DMatrix::zeros(n, rank);
    for c in 0..rank {
        u.set_column(c, &svd.u.column(c));
    }
    let m = u.adjoint() * g * &u;
    let c = u.adjoint() * p;
    (u, m, c)
}

/// Composite adaptive Simpson quadrature for vector-valued integrands.
///
/// The interval is pre-split into panels no wider than a few feature
/// lengths before the adaptive recursion runs; a bare whole-interval
/// estimate can silently miss a localized peak when the endpoint samples
/// all sit in the tails.
fn composite_adaptive(
    f: &dyn Fn(f64) -> DVector<C64>,
    a: f64,
    b: f64,
    tol: f64,
    dim: usize,
    feature_scale: f64,
) -> DVector<C64> {
    if b <= a {
        return DVector::from_element(dim, C64::new(0.0, 0.0));
    }
    let panels = (((b - a) * feature_scale / 3.0).ceil() as usize).clamp(8, 512);
    let mut acc = DVector::from_element(dim, C64::new(0.0, 0.0));
    let h = (b - a) / panels as f64;
    let panel_tol = tol / panels as f64;
    for i in 0..panels {
        let pa = a + i as f64 * h;
        let pb = if i + 1 == panels {
            b
        } else {
            a + (i + 1) as f64 * h
        };
        let fa = f(pa);
        let fm = f(0.5 * (pa + pb));
        let fb = f(pb);
        let whole = simpson(&fa, &fm, &fb, pb - pa);
        acc += recurse(f, pa, pb, &fa, &fm, &fb, &whole, panel_tol, 20);
    }
    acc
}

fn simpson(fa: &DVector<C64>, fm: &DVector<C64>, fb: &DVector<C64>, h: f64) -> DVector<C64> {
    (fa + fm.scale(4.0) + fb).scale(h / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &dyn Fn(f64) -> DVector<C64>,
    a: f64,
    b: f64,
    fa: &DVector<C64>,
    fm: &DVector<C64>,
    fb: &DVector<C64>,
    whole: &DVector<C64>,
    tol: f64,
    depth: u32,
) -> DVector<C64> {
    let m = 0.5 * (a + b);
    let flm = f(0.5 * (a + m));
    let frm = f(0.5 * (m + b));
    let left = simpson(fa, &flm, fm, m - a);
    let right = simpson(fm, &frm, fb, b - m);
    let better = &left + &right;
    let err = (&better - whole).norm();
    if depth == 0 || err <= 15.0 * tol {
        let correction = (&better - whole).scale(1.0 / 15.0);
        return better + correction;
    }
    let half_tol = 0.5 * tol;
    recurse(f, a, m, fa, &flm, fm, &left, half_tol, depth - 1)
        + recurse(f, m, b, fm, &frm, fb, &right, half_tol, depth - 1)
}
