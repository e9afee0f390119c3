//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here works on `nalgebra` dynamic matrices over `f64` or
//! `Complex<f64>`. The problem sizes are tiny (state dimensions in the
//! single digits), so clarity wins over blocking or allocation tricks.

pub mod schur;
pub mod sphere;
pub mod svd;

use nalgebra::{Complex, DMatrix, DVector};

pub use svd::{jacobi_svd, JacobiSvd};

pub type C64 = Complex<f64>;

/// Lift a real matrix into the complex field.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Real part, entrywise.
pub fn real_part(m: &DMatrix<C64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    singular_values_desc(m).first().copied().unwrap_or(0.0)
}

pub fn spectral_norm_real(m: &DMatrix<f64>) -> f64 {
    spectral_norm(&to_complex(m))
}

/// Singular values sorted in descending order.
pub fn singular_values_desc(m: &DMatrix<C64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    jacobi_svd(m).singular_values
}

/// Smallest singular value (of a possibly rectangular matrix).
pub fn sigma_min(m: &DMatrix<C64>) -> f64 {
    singular_values_desc(m).last().copied().unwrap_or(0.0)
}

/// Numerical rank at a relative tolerance: count of singular values
/// exceeding `rel_tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<C64>, rel_tol: f64) -> usize {
    let sv = singular_values_desc(m);
    match sv.first() {
        None | Some(&0.0) => 0,
        Some(&s0) => sv.iter().filter(|&&s| s > rel_tol * s0).count(),
    }
}

/// Orthonormal basis of the kernel of `m`, as matrix columns.
///
/// The Jacobi SVD carries a full unitary right factor, so the kernel is
/// exactly the set of trailing right singular vectors. Columns are
/// phase-fixed for reproducibility.
pub fn kernel_basis(m: &DMatrix<C64>, rel_tol: f64) -> DMatrix<C64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return fix_phases(DMatrix::identity(n, n));
    }
    let svd = jacobi_svd(m);
    let s0 = svd.singular_values.first().copied().unwrap_or(0.0);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s0 > 0.0 && s > rel_tol * s0)
        .count();
    let mut k = DMatrix::zeros(n, n - rank);
    for col in rank..n {
        k.set_column(col - rank, &svd.v.column(col));
    }
    fix_phases(k)
}

/// Orthonormalize the columns of `m` (assumed linearly independent) by a
/// thin QR factorization, then phase-fix.
pub fn orthonormal_columns(m: &DMatrix<C64>) -> DMatrix<C64> {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    fix_phases(qr.q())
}

/// Multiply each column by a unit phase so its largest-magnitude entry is
/// positive real. Makes basis outputs reproducible across runs and platforms.
pub fn fix_phases(mut m: DMatrix<C64>) -> DMatrix<C64> {
    for c in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_norm = 0.0f64;
        for r in 0..m.nrows() {
            let a = m[(r, c)].norm();
            if a > best_norm {
                best_norm = a;
                best = r;
            }
        }
        if best_norm > 0.0 {
            let phase = m[(best, c)] / C64::new(best_norm, 0.0);
            let corr = phase.conj();
            for r in 0..m.nrows() {
                m[(r, c)] *= corr;
            }
        }
    }
    m
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// ascending order; eigenvector columns follow the sort.
pub fn hermitian_eigen_sorted(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), m.clone());
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let se = nalgebra::SymmetricEigen::new(herm);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &se.eigenvectors.column(i));
    }
    (vals, fix_phases(vecs))
}

/// Same as [`hermitian_eigen_sorted`] for a real symmetric matrix.
pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (vals, vecs) = hermitian_eigen_sorted(&to_complex(&((m + m.transpose()).scale(0.5))));
    (vals, real_part(&vecs))
}

/// Eigenvalues of a general complex matrix, from its (unordered) Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let t = m
        .clone()
        .try_schur(1e-14, 0)
        .expect("Schur iteration failed to converge")
        .unpack()
        .1;
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Integer power of a complex number by binary exponentiation.
pub fn cpow(z: C64, k: u32) -> C64 {
    let mut base = z;
    let mut e = k;
    let mut acc = C64::new(1.0, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

pub fn factorial_f64(k: u32) -> f64 {
    (1..=k as u64).fold(1.0f64, |a, i| a * i as f64)
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &DVector<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_row_vector() {
        let g = DMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let k = kernel_basis(&g, 1e-10);
        assert_eq!(k.ncols(), 1);
        assert!((k[(0, 0)].norm()) < 1e-12);
        assert!((k[(1, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rank_and_sigma_min() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(2.0, 0.0),
                C64::new(2.0, 0.0),
                C64::new(4.0, 0.0),
            ],
        );
        assert_eq!(numerical_rank(&m, 1e-10), 1);
        assert!(sigma_min(&m) < 1e-12);
    }

    #[test]
    fn hermitian_eigen_sorted_ascending() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
                C64::new(3.0, 0.0),
            ],
        );
        let (vals, vecs) = hermitian_eigen_sorted(&m);
        assert!(vals[0] <= vals[1]);
        let resid = &m * vecs.column(0) - vecs.column(0).scale(vals[0]);
        assert!(resid.norm() < 1e-10);
    }

    #[test]
    fn cpow_matches_repeated_multiplication() {
        let z = C64::new(0.3, -1.2);
        let mut acc = C64::new(1.0, 0.0);
        for k in 0..8u32 {
            assert!((cpow(z, k) - acc).norm() < 1e-12 * acc.norm().max(1.0));
            acc *= z;
        }
    }
}
