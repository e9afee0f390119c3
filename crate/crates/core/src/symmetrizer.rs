//! Friedrichs symmetrizers and maximally dissipative boundary conditions.
//!
//! The feasible symmetrizers form the positive definite slice of a linear
//! subspace of symmetric matrices (the null space of `S -> {S A^j - A^j^T S}`).
//! The search computes that null space exactly and then maximizes the
//! concave objective `lambda_min` over its trace-normalized slice by
//! projected subgradient ascent. Whatever the optimizer does, the returned
//! witness is certified directly by its eigenvalues and residuals.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen_sorted, kernel_basis, singular_values_desc, spectral_norm, spectral_norm_real,
    symmetric_eigen_sorted, to_complex, vec_norm, C64,
};
use crate::system::{FirstOrderSystem, RANK_TOL};

/// A positive symmetric matrix making every `S A^j` symmetric.
#[derive(Debug, Clone, Serialize)]
pub struct Symmetrizer {
    #[serde(skip)]
    s: DMatrix<f64>,
    /// max_j of the asymmetry of `S A^j`, relative check at 1e-6.
    pub residual: f64,
    pub lambda_min: f64,
}

impl Symmetrizer {
    /// Wrap an explicit symmetrizer candidate, storing its symmetric part
    /// and certifying positivity and the symmetry residuals.
    pub fn from_matrix(s: DMatrix<f64>, sys: &FirstOrderSystem) -> Result<Self> {
        let n = sys.n();
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "symmetrizer must be {n}x{n}"
            )));
        }
        let sym = (&s + s.transpose()).scale(0.5);
        let residual = feasibility_residual(&sym, sys);
        let (vals, _) = symmetric_eigen_sorted(&sym);
        let lambda_min = vals.first().copied().unwrap_or(0.0);
        if lambda_min <= 0.0 {
            return Err(Error::Infeasible {
                best_lambda_min: lambda_min,
            });
        }
        let scale = spectral_norm_real(&sym) * sys.coefficient_scale();
        if residual > 1e-6 * scale.max(1e-300) {
            return Err(Error::ValueError(format!(
                "candidate is not a symmetrizer: residual {residual:.3e} exceeds 1e-6 * scale"
            )));
        }
        Ok(Symmetrizer {
            s: sym,
            residual,
            lambda_min,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Symmetric part of `S A_d`, the quadratic form behind every boundary
    /// dissipativity statement.
    pub fn normal_form(&self, sys: &FirstOrderSystem) -> DMatrix<f64> {
        let m = &self.s * sys.normal();
        (&m + m.transpose()).scale(0.5)
    }
}

fn feasibility_residual(s: &DMatrix<f64>, sys: &FirstOrderSystem) -> f64 {
    sys.coefficients()
        .iter()
        .map(|a| {
            let m = s * a;
            spectral_norm_real(&(&m - m.transpose()))
        })
        .fold(0.0f64, f64::max)
}

// --- svec parametrization: Frobenius-isometric coordinates on symmetric matrices

fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(svec_len(n));
    let mut idx = 0;
    let s2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in i..n {
            v[idx] = if i == j { m[(i, i)] } else { s2 * m[(i, j)] };
            idx += 1;
        }
    }
    v
}

fn unsvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    let s2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        for j in i..n {
            if i == j {
                m[(i, i)] = v[idx];
            } else {
                m[(i, j)] = v[idx] / s2;
                m[(j, i)] = v[idx] / s2;
            }
            idx += 1;
        }
    }
    m
}

/// Orthonormal basis (in Frobenius geometry) of the symmetric solutions of
/// `S A^j = A^j^T S` for all j.
fn symmetrizer_nullspace(sys: &FirstOrderSystem) -> Vec<DMatrix<f64>> {
    let n = sys.n();
    let p = svec_len(n);
    let rows_per = n * (n - 1) / 2;
    let mut k = DMatrix::<f64>::zeros(rows_per * sys.d(), p);
    for col in 0..p {
        let mut e = DVector::zeros(p);
        e[col] = 1.0;
        let s = unsvec(&e, n);
        for (jm, a) in sys.coefficients().iter().enumerate() {
            let m = &s * a;
            let anti = &m - m.transpose();
            let mut r = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    k[(jm * rows_per + r, col)] = anti[(i, j)];
                    r += 1;
                }
            }
        }
    }
    if k.nrows() == 0 {
        // n = 1: every 1x1 matrix works
        return vec![DMatrix::from_element(1, 1, 1.0)];
    }
    let kc = to_complex(&k);
    let basis = kernel_basis(&kc, RANK_TOL);
    (0..basis.ncols())
        .map(|c| {
            let col = DVector::from_iterator(p, (0..p).map(|r| basis[(r, c)].re));
            unsvec(&col, n)
        })
        .collect()
}

/// Options for the symmetrizer search.
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub iterations: usize,
    pub step0: f64,
    pub success_threshold: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            iterations: 500,
            step0: 0.5,
            success_threshold: 1e-6,
        }
    }
}

/// Find a Friedrichs symmetrizer, normalized to trace `n`, or report
/// infeasibility with the best attained minimal eigenvalue.
pub fn find_symmetrizer(sys: &FirstOrderSystem) -> Result<Symmetrizer> {
    find_symmetrizer_with(sys, &SearchOptions::default())
}

pub fn find_symmetrizer_with(sys: &FirstOrderSystem, opts: &SearchOptions) -> Result<Symmetrizer> {
    let n = sys.n();
    let basis = symmetrizer_nullspace(sys);
    if basis.is_empty() {
        return Err(Error::Infeasible {
            best_lambda_min: f64::NEG_INFINITY,
        });
    }
    let r = basis.len();
    let traces = DVector::from_iterator(r, basis.iter().map(|b| b.trace()));
    let t_norm2 = traces.norm_squared();
    if t_norm2 <= 1e-20 {
        // only traceless solutions exist; no positive definite element
        return Err(Error::Infeasible {
            best_lambda_min: f64::NEG_INFINITY,
        });
    }

    let assemble = |c: &DVector<f64>| -> DMatrix<f64> {
        let mut s = DMatrix::zeros(n, n);
        for (ci, b) in c.iter().zip(basis.iter()) {
            s += b.scale(*ci);
        }
        s
    };
    let project_trace = |c: &mut DVector<f64>| {
        let defect = n as f64 - traces.dot(c);
        *c += traces.scale(defect / t_norm2);
    };
    let lambda_min_of = |c: &DVector<f64>| -> (f64, DVector<f64>) {
        let s = assemble(c);
        let (vals, vecs) = symmetric_eigen_sorted(&s);
        (vals[0], vecs.column(0).into_owned())
    };

    // Two starts: the projection of the identity, and the minimum-norm
    // point of the trace slice.
    let id_coords = DVector::from_iterator(
        r,
        basis
            .iter()
            .map(|b| svec(b).dot(&svec(&DMatrix::identity(n, n)))),
    );
    let min_norm = traces.scale(n as f64 / t_norm2);
    let mut best_val = f64::NEG_INFINITY;
    let mut best_c = min_norm.clone();
    for start in [id_coords, min_norm] {
        let mut c = start;
        project_trace(&mut c);
        let (v0, _) = lambda_min_of(&c);
        if v0 > best_val {
            best_val = v0;
            best_c = c.clone();
        }
        for k in 1..=opts.iterations {
            let (_, v) = lambda_min_of(&c);
            // supergradient of lambda_min at the current point
            let mut g =
                DVector::from_iterator(r, basis.iter().map(|b| (v.transpose() * b * &v)[(0, 0)]));
            let along = traces.dot(&g) / t_norm2;
            g -= traces.scale(along);
            let gn = g.norm();
            if gn < 1e-14 {
                break;
            }
            c += g.scale(opts.step0 / (k as f64 * gn));
            project_trace(&mut c);
            let (val, _) = lambda_min_of(&c);
            if val > best_val {
                best_val = val;
                best_c = c.clone();
            }
        }
    }

    if best_val <= opts.success_threshold {
        return Err(Error::Infeasible {
            best_lambda_min: best_val,
        });
    }
    let mut s = assemble(&best_c);
    s = (&s + s.transpose()).scale(0.5);
    let tr = s.trace();
    s *= n as f64 / tr;
    Symmetrizer::from_matrix(s, sys)
}

// ---------------------------------------------------------------------------
// Maximal dissipativity

/// Certificate for `-(S A_d h, h) >= c |h|^2 - C |Gamma h|^2`.
#[derive(Debug, Clone, Serialize)]
pub struct DissipativityCertificate {
    /// Kernel coercivity constant.
    pub c: f64,
    /// Boundary control constant (smallest verified value at this `c`).
    pub big_c: f64,
    /// max of `(S A_d h, h)` over unit `h` in ker Gamma.
    pub kernel_max: f64,
    /// The closed-form candidate `2 (lambda_max+ + c) / sigma_row^2`,
    /// reported for reference; `big_c` never exceeds a verified value.
    pub formula_big_c: f64,
    /// Smallest nonzero singular value of Gamma (its restriction to the
    /// orthocomplement of the kernel).
    pub sigma_row: f64,
    /// True when `c` had to be reduced below the kernel coercivity to make
    /// a finite `big_c` exist.
    pub c_reduced: bool,
    /// Minimum of the verification residual over the sampled unit vectors.
    pub min_sample_residual: f64,
    pub samples: usize,
}

/// Check that `Gamma` is maximally dissipative for `(S, A_d)`: full row
/// rank, row count matching the unstable dimension of `S A_d`, and negative
/// definiteness on the kernel. On success returns constants `(c, C)`
/// verified against the quadratic form.
pub fn check_maximal_dissipativity(
    s: &Symmetrizer,
    sys: &FirstOrderSystem,
    gamma: &DMatrix<C64>,
) -> Result<DissipativityCertificate> {
    let n = sys.n();
    let k = gamma.nrows();
    if gamma.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "boundary matrix must have {n} columns"
        )));
    }
    let m = to_complex(&s.normal_form(sys));
    let m_norm = spectral_norm(&m);
    let (m_vals, _) = hermitian_eigen_sorted(&m);
    let n_plus = m_vals.iter().filter(|&&v| v > 0.0).count();

    let sv = singular_values_desc(gamma);
    let rank = sv
        .iter()
        .filter(|&&x| x > RANK_TOL * sv.first().copied().unwrap_or(0.0))
        .count();
    if rank < k {
        return Err(Error::RankDeficient { rank, k });
    }
    if k != n_plus {
        return Err(Error::WrongBoundaryCount { k, n_plus });
    }

    // Compression of S A_d to ker Gamma.
    let kernel = kernel_basis(gamma, RANK_TOL);
    debug_assert_eq!(kernel.ncols(), n - k);
    let kernel_max = if kernel.ncols() == 0 {
        f64::NEG_INFINITY
    } else {
        let comp = kernel.adjoint() * &m * &kernel;
        let (vals, _) = hermitian_eigen_sorted(&comp);
        *vals.last().expect("nonempty compression")
    };
    if kernel.ncols() > 0 && kernel_max >= 0.0 {
        return Err(Error::NotNegativeOnKernel {
            max_value: kernel_max,
        });
    }

    let c0 = if kernel.ncols() == 0 {
        // empty kernel: any coercivity constant works; use a scale-appropriate one
        m_vals
            .iter()
            .cloned()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
            .min(m_norm.max(1.0))
    } else {
        -kernel_max
    };

    let sigma_row = if k == 0 { f64::INFINITY } else { sv[k - 1] };
    let lambda_max_plus = m_vals.last().copied().unwrap_or(0.0).max(0.0);

    if k == 0 {
        // no boundary rows: the inequality is pure negative definiteness
        let (min_sample_residual, samples) = verify_certificate(&m, gamma, c0, 0.0, &kernel);
        return Ok(DissipativityCertificate {
            c: c0,
            big_c: 0.0,
            kernel_max,
            formula_big_c: 0.0,
            sigma_row: 0.0,
            c_reduced: false,
            min_sample_residual,
            samples,
        });
    }

    let formula_big_c = 2.0 * (lambda_max_plus + c0) / (sigma_row * sigma_row);
    let scale = m_norm.max(c0).max(1.0);
    let tol_psd = 1e-10 * scale;
    let gtg = gamma.adjoint() * gamma;
    let lambda_min_at = |c: f64, big: f64| -> f64 {
        let mat =
            &gtg * C64::new(big, 0.0) - DMatrix::<C64>::identity(n, n) * C64::new(c, 0.0) - &m;
        hermitian_eigen_sorted(&mat).0[0]
    };

    let cap = 1e12 * scale / (sigma_row * sigma_row).max(1e-300);
    let mut c = c0;
    let mut c_reduced = false;
    let big_c = loop {
        // expand the bracket from the closed-form candidate
        let mut hi = formula_big_c.max(1.0);
        let mut found = lambda_min_at(c, hi) >= -tol_psd;
        while !found && hi < cap {
            hi *= 2.0;
            found = lambda_min_at(c, hi) >= -tol_psd;
        }
        if found {
            let mut lo = 0.0f64;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if lambda_min_at(c, mid) >= -tol_psd {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-12 * hi.max(1.0) {
                    break;
                }
            }
            break hi;
        }
        c *= 0.5;
        c_reduced = true;
        if c < 1e-14 * scale {
            break cap;
        }
    };

    let (min_sample_residual, samples) = verify_certificate(&m, gamma, c, big_c, &kernel);
    Ok(DissipativityCertificate {
        c,
        big_c,
        kernel_max,
        formula_big_c,
        sigma_row,
        c_reduced,
        min_sample_residual,
        samples,
    })
}

/// Evaluate `-(M h, h) - c|h|^2 + C|Gamma h|^2` over a structured sample of
/// unit vectors; returns the minimum residual and the sample count.
fn verify_certificate(
    m: &DMatrix<C64>,
    gamma: &DMatrix<C64>,
    c: f64,
    big_c: f64,
    kernel: &DMatrix<C64>,
) -> (f64, usize) {
    let n = m.nrows();
    let mut hs: Vec<DVector<C64>> = Vec::new();
    let (_, evecs) = hermitian_eigen_sorted(m);
    for i in 0..n {
        hs.push(evecs.column(i).into_owned());
    }
    for i in 0..kernel.ncols() {
        hs.push(kernel.column(i).into_owned());
    }
    // deterministic mixtures
    let base: Vec<DVector<C64>> = hs.clone();
    for (i, a) in base.iter().enumerate() {
        for b in base.iter().skip(i + 1) {
            hs.push((a + b).scale(0.5));
            hs.push((a - b).scale(0.5));
            hs.push(a + b.map(|z| z * C64::new(0.0, 0.7)));
        }
    }
    let mut min_res = f64::INFINITY;
    let mut count = 0usize;
    for h in hs {
        let nrm = vec_norm(&h);
        if nrm < 1e-12 {
            continue;
        }
        let h = h.map(|z| z / C64::new(nrm, 0.0));
        let quad = (h.adjoint() * m * &h)[(0, 0)].re;
        let bc = if gamma.nrows() == 0 {
            0.0
        } else {
            vec_norm(&(gamma * &h)).powi(2)
        };
        let res = -quad - c + big_c * bc;
        min_res = min_res.min(res);
        count += 1;
    }
    (min_res, count)
}

/// Build the canonical maximally dissipative boundary matrix from the
/// positive eigenspace of `S A_d`: rows are the transposed orthonormal
/// eigenvectors, ordered by descending eigenvalue.
pub fn build_dissipative_bc(s: &Symmetrizer, sys: &FirstOrderSystem) -> Result<DMatrix<f64>> {
    let m = s.normal_form(sys);
    let m_norm = spectral_norm_real(&m);
    let (vals, vecs) = symmetric_eigen_sorted(&m);
    let tol = RANK_TOL * m_norm.max(1e-300);
    if vals.iter().any(|v| v.abs() <= tol) {
        return Err(Error::DegenerateSplitting { tol });
    }
    let pos: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.0).collect();
    let mut rows: Vec<(f64, DVector<f64>)> = pos
        .into_iter()
        .map(|i| (vals[i], vecs.column(i).into_owned()))
        .collect();
    rows.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let n = sys.n();
    let mut g = DMatrix::zeros(rows.len(), n);
    for (r, (_, v)) in rows.iter().enumerate() {
        // sign fixed by the largest-magnitude entry
        let mut best = 0usize;
        for i in 1..n {
            if v[i].abs() > v[best].abs() {
                best = i;
            }
        }
        let sgn = if v[best] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            g[(r, i)] = sgn * v[i];
        }
    }
    Ok(g)
}

/// Adjoint boundary matrix: rows are conjugate transposes of an orthonormal
/// basis of `A_d ker Gamma`, so that `ker Gamma* = (A_d ker Gamma)^perp`.
pub fn adjoint_bc(sys: &FirstOrderSystem, gamma: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = sys.n();
    let k = gamma.nrows();
    if gamma.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "boundary matrix must have {n} columns"
        )));
    }
    let sv = singular_values_desc(gamma);
    let rank = sv
        .iter()
        .filter(|&&x| x > RANK_TOL * sv.first().copied().unwrap_or(0.0))
        .count();
    if k > 0 && rank < k {
        return Err(Error::RankDeficient { rank, k });
    }
    if k >= n {
        return Ok(DMatrix::from_element(0, n, C64::new(0.0, 0.0)));
    }
    let kernel = kernel_basis(gamma, RANK_TOL);
    let image = to_complex(sys.normal()) * kernel;
    let basis = crate::linalg::orthonormal_columns(&image);
    Ok(basis.adjoint())
}

/// Time-reversed forward form of the adjoint problem: coefficients
/// `-A^j^T` with the adjoint boundary matrix, so that every forward-problem
/// operation applies verbatim. If `S` symmetrizes the original operator,
/// `S^{-1}` symmetrizes the reversed one.
pub fn adjoint_forward_form(
    sys: &FirstOrderSystem,
    gamma: &DMatrix<C64>,
) -> Result<(FirstOrderSystem, DMatrix<C64>)> {
    let gstar = adjoint_bc(sys, gamma)?;
    let a = sys.coefficients().iter().map(|m| -m.transpose()).collect();
    let rev = FirstOrderSystem::new(sys.n(), sys.d(), a)?;
    Ok((rev, gstar))
}
