//! One-sided Jacobi singular value decomposition for complex matrices.
//!
//! The stock bidiagonalization SVD can silently lose accuracy on
//! rank-deficient complex inputs, and this crate leans on singular values
//! precisely in the nearly singular regime (rank decisions, kernel bases,
//! Lopatinski sigma). One-sided Jacobi orthogonalizes the columns of the
//! working matrix by unitary plane rotations; it converges unconditionally
//! on these tiny problems and computes small singular values with high
//! relative accuracy. `V` is unitary by construction, which also gives
//! exact kernel bases for free.

use nalgebra::DMatrix;

use super::C64;

#[derive(Debug, Clone)]
pub struct JacobiSvd {
    /// Full m x m unitary left factor (completed on the kernel).
    pub u: DMatrix<C64>,
    /// Singular values in descending order, length min(m, n).
    pub singular_values: Vec<f64>,
    /// Full n x n unitary right factor.
    pub v: DMatrix<C64>,
}

impl JacobiSvd {
    /// Reconstruction `U diag(sigma) V^H` for validation.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let m = self.u.nrows();
        let n = self.v.nrows();
        let mut s = DMatrix::<C64>::zeros(m, n);
        for (i, &sv) in self.singular_values.iter().enumerate() {
            s[(i, i)] = C64::new(sv, 0.0);
        }
        &self.u * s * self.v.adjoint()
    }
}

/// Compute the full SVD `A = U diag(sigma) V^H`.
pub fn jacobi_svd(a: &DMatrix<C64>) -> JacobiSvd {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return JacobiSvd {
            u: DMatrix::identity(m, m),
            singular_values: Vec::new(),
            v: DMatrix::identity(n, n),
        };
    }
    if m < n {
        // factor the adjoint and swap roles
        let t = jacobi_svd(&a.adjoint());
        return JacobiSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }

    let mut w = a.clone();
    let mut v: DMatrix<C64> = DMatrix::identity(n, n);

    // Columns whose norm has collapsed to rounding junk relative to the
    // input never become "orthogonal enough" in the relative sense (their
    // junk stays almost parallel), so they would be re-rotated forever,
    // shrinking into the subnormal range. Freeze them instead.
    let scale0 = (0..n).map(|j| w.column(j).norm()).fold(0.0f64, f64::max);
    let col_floor = (1e-3 * f64::EPSILON * scale0).powi(2);

    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                // exact norms per pair; incremental updates drift and stall
                // the skip criterion
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                if alpha <= col_floor || beta <= col_floor {
                    continue;
                }
                let mut gamma = C64::new(0.0, 0.0);
                for r in 0..m {
                    gamma += w[(r, p)].conj() * w[(r, q)];
                }
                let gn = gamma.norm();
                if gn <= 1e-15 * (alpha * beta).sqrt() + 1e-300 {
                    continue;
                }
                rotated = true;
                // componentwise division; the full complex quotient
                // underflows its denominator for subnormal-range gn
                let phase = C64::new(gamma.re / gn, gamma.im / gn);
                let zeta = (beta - alpha) / (2.0 * gn);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // column rotation [w_p, w_q] <- [w_p, w_q] R with
                // R = [[c, s*phase], [-s*conj(phase), c]]
                let cs = C64::new(c, 0.0);
                let sp = phase * C64::new(s, 0.0);
                for r in 0..m {
                    let wp = w[(r, p)];
                    let wq = w[(r, q)];
                    w[(r, p)] = wp * cs - wq * sp.conj();
                    w[(r, q)] = wp * sp + wq * cs;
                }
                for r in 0..n {
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * cs - vq * sp.conj();
                    v[(r, q)] = vp * sp + vq * cs;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // exact column norms after convergence
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut singular_values = Vec::with_capacity(n);
    let mut u = DMatrix::<C64>::zeros(m, m);
    let mut v_sorted = DMatrix::<C64>::zeros(n, n);
    let scale = norms.iter().copied().fold(0.0f64, f64::max);
    let mut filled = 0usize;
    for (slot, &j) in order.iter().enumerate() {
        singular_values.push(norms[j]);
        v_sorted.set_column(slot, &v.column(j));
        if norms[j] > 1e-300 + 1e-18 * scale {
            let col = w.column(j) / C64::new(norms[j], 0.0);
            u.set_column(slot, &col);
            filled = slot + 1;
        }
    }
    complete_unitary(&mut u, filled);
    JacobiSvd {
        u,
        singular_values,
        v: v_sorted,
    }
}

/// Fill columns `filled..` of `u` with an orthonormal completion built from
/// coordinate vectors by repeated Gram-Schmidt.
fn complete_unitary(u: &mut DMatrix<C64>, filled: usize) {
    let m = u.nrows();
    let mut have = filled;
    let mut candidate = 0usize;
    while have < m && candidate < m + have {
        let mut col = nalgebra::DVector::from_element(m, C64::new(0.0, 0.0));
        col[candidate % m] = C64::new(1.0, 0.0);
        candidate += 1;
        for _ in 0..2 {
            for j in 0..have {
                let proj = u.column(j).adjoint() * &col;
                let coeff = proj[(0, 0)];
                let base = u.column(j).into_owned();
                col -= base.map(|z| z * coeff);
            }
        }
        let nrm = col.norm();
        if nrm > 1e-8 {
            col /= C64::new(nrm, 0.0);
            u.set_column(have, &col);
            have += 1;
        }
    }
    debug_assert_eq!(have, m, "unitary completion exhausted its candidates");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn check(a: &DMatrix<C64>) {
        let svd = jacobi_svd(a);
        let n = a.ncols().min(a.nrows());
        assert_eq!(svd.singular_values.len(), n);
        for w in svd.singular_values.windows(2) {
            assert!(w[0] >= w[1], "not sorted: {:?}", svd.singular_values);
        }
        let eye_u = DMatrix::<C64>::identity(a.nrows(), a.nrows());
        let eye_v = DMatrix::<C64>::identity(a.ncols(), a.ncols());
        assert!((svd.u.adjoint() * &svd.u - eye_u).norm() < 1e-12);
        assert!((svd.v.adjoint() * &svd.v - eye_v).norm() < 1e-12);
        let resid = (svd.reconstruct() - a).norm();
        assert!(
            resid <= 1e-13 * (1.0 + a.norm()),
            "reconstruction residual {resid}"
        );
    }

    #[test]
    fn identity_and_zero() {
        check(&DMatrix::<C64>::identity(3, 3));
        check(&DMatrix::<C64>::zeros(3, 2));
    }

    #[test]
    fn rectangular_both_ways() {
        let a = DMatrix::from_row_slice(
            2,
            3,
            &[
                c(1.0, 0.5),
                c(0.0, -1.0),
                c(2.0, 0.0),
                c(-0.5, 0.2),
                c(1.0, 1.0),
                c(0.0, 0.0),
            ],
        );
        check(&a);
        check(&a.transpose());
    }

    #[test]
    fn rank_deficient_projector_case() {
        // rank-1 with a tiny second direction, the regime that trips the
        // bidiagonalization path
        let u = nalgebra::DVector::from_vec(vec![c(0.139, 0.0), c(0.50, 0.26), c(-0.74, 0.33)])
            .normalize();
        let v =
            nalgebra::DVector::from_vec(vec![c(0.3, -0.9), c(0.5, 0.1), c(0.0, 0.7)]).normalize();
        let mut a = DMatrix::from_fn(3, 3, |i, j| u[i] * v[j].conj() * c(1.04, 0.0));
        a[(2, 2)] += c(1e-16, 0.0);
        let svd = jacobi_svd(&a);
        assert!((svd.singular_values[0] - 1.04).abs() < 1e-12);
        assert!(svd.singular_values[1] < 1e-14);
        // left vector spans the range
        let overlap = (svd.u.column(0).adjoint() * &u)[(0, 0)].norm();
        assert!((overlap - 1.0).abs() < 1e-12, "overlap {overlap}");
    }

    #[test]
    fn random_stress_against_reconstruction() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let m = 1 + trial % 6;
            let n = 1 + (trial / 2) % 6;
            let r = 1 + trial % m.min(n);
            let a: DMatrix<C64> = DMatrix::from_fn(m, r, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let b: DMatrix<C64> = DMatrix::from_fn(r, n, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            check(&(&a * &b));
        }
    }

    #[test]
    fn cancellation_junk_antisymmetric_residual() {
        // tiny antisymmetric matrix whose junk columns are exactly parallel;
        // the sweep loop must freeze them instead of grinding into NaN
        let a = 4.857225732735e-17;
        let b = 4.163336342344e-17;
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.0, 0.0),
                c(a, 0.0),
                c(b, 0.0),
                c(-a, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                c(-b, 0.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        let svd = jacobi_svd(&m);
        assert!(svd.singular_values.iter().all(|s| s.is_finite()));
        assert!((svd.reconstruct() - &m).norm() <= 1e-15);
    }

    #[test]
    fn tiny_singular_values_resolved() {
        // diag(1, 1e-13) hidden by a rotation: sigma_min must come back accurate
        let q =
            DMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(-0.8, 0.0), c(0.8, 0.0), c(0.6, 0.0)]);
        let d = DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1e-13, 0.0)],
        );
        let a = &q * d * q.adjoint();
        let svd = jacobi_svd(&a);
        // forming Q D Q^H already perturbs sigma_min by ~eps * sigma_max,
        // so accuracy beyond that is not observable
        assert!(
            (svd.singular_values[1] - 1e-13).abs() < 5e-16,
            "sigma = {:?}",
            svd.singular_values
        );
    }
}
