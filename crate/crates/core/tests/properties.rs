//! Property-based invariants of the core algebra.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use lopa_core::document;
use lopa_core::linalg::{to_complex, vec_norm, C64};
use lopa_core::profile::{ExponentialProfile, ProfileTerm};
use lopa_core::resolvent::{resolvent_matrix, ResolventSolver};
use lopa_core::system::{check_hyperbolicity, Frequency};
use lopa_core::FirstOrderSystem;

fn small_real() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|x| (x * 1024.0).round() / 1024.0)
}

fn matrix2(entries: [f64; 4]) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &entries)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // serialize -> parse reproduces the matrices bit-exactly
    #[test]
    fn document_round_trip(a in prop::array::uniform4(small_real()), b0 in small_real(), b1 in small_real()) {
        let m = matrix2(a);
        // keep the normal matrix invertible
        prop_assume!(m.determinant().abs() > 1e-3);
        let sys = FirstOrderSystem::new(2, 1, vec![m]).unwrap();
        let boundary = lopa_core::BoundarySymbol::constant_real(DMatrix::from_row_slice(1, 2, &[b0, b1]));
        let doc = document::system_document(&sys, &boundary);
        let text = serde_json::to_string(&doc).unwrap();
        let parsed = document::parse_system(&text).unwrap();
        prop_assert_eq!(parsed.system.coefficients()[0].clone(), sys.coefficients()[0].clone());
    }

    // symmetric coefficients always pass the hyperbolicity sweep
    #[test]
    fn symmetric_systems_are_hyperbolic(
        a in prop::array::uniform4(small_real()),
        b in prop::array::uniform4(small_real()),
    ) {
        let sym = |e: [f64; 4]| {
            let m = matrix2(e);
            (&m + m.transpose()).scale(0.5)
        };
        let a1 = sym(a);
        let a2 = sym(b) + DMatrix::identity(2, 2).scale(3.0);
        prop_assume!(a2.determinant().abs() > 1e-3);
        let sys = FirstOrderSystem::new(2, 2, vec![a1, a2]).unwrap();
        let rep = check_hyperbolicity(&sys, 24, 1e-8);
        prop_assert!(rep.pass, "{:?}", rep);
    }

    // the profile Gram form is a genuine norm: nonnegative, zero only at zero
    #[test]
    fn profile_norm_positive(
        re in -3.0f64..-0.05,
        im in small_real(),
        vre in small_real(),
        vim in small_real(),
        m in 0u32..3,
    ) {
        let coeff = DVector::from_vec(vec![C64::new(vre, vim)]);
        let p = ExponentialProfile::single(coeff.clone(), C64::new(re, im), m).unwrap();
        let n2 = p.norm_sqr();
        prop_assert!(n2 >= 0.0);
        if vec_norm(&coeff) > 0.0 {
            prop_assert!(n2 > 0.0);
        }
        // scaling is quadratic in the norm
        let p3 = p.scale(C64::new(3.0, 0.0));
        prop_assert!((p3.norm_sqr() - 9.0 * n2).abs() <= 1e-9 * (1.0 + 9.0 * n2));
    }

    // differentiating then evaluating matches finite differences
    #[test]
    fn derivative_is_consistent(
        re in -2.0f64..-0.2,
        im in small_real(),
        m in 0u32..3,
        x in 0.1f64..4.0,
    ) {
        let p = ExponentialProfile::single(DVector::from_vec(vec![C64::new(1.0, -0.3)]), C64::new(re, im), m).unwrap();
        let d = p.derivative();
        let h = 1e-6;
        let fd = (p.eval(x + h)[0] - p.eval(x - h)[0]) / C64::new(2.0 * h, 0.0);
        prop_assert!((fd - d.eval(x)[0]).norm() < 1e-6);
    }

    // G(s Lambda) = s G(Lambda) and the stable space is unchanged
    #[test]
    fn resolvent_homogeneity(tau in small_real(), gamma in 0.05f64..2.0, s in 0.1f64..10.0) {
        let sys = FirstOrderSystem::new(2, 1, vec![matrix2([0.0, 1.0, 1.0, 0.0])]).unwrap();
        let f1 = Frequency::one_d(tau, gamma).unwrap();
        let f2 = f1.scaled(s).unwrap();
        let g1 = resolvent_matrix(&sys, &f1).unwrap();
        let g2 = resolvent_matrix(&sys, &f2).unwrap();
        prop_assert!((g1.matrix().scale(s) - g2.matrix()).norm() <= 1e-10 * g2.norm());
        // principal angle between the stable bases is ~0
        let s1 = ResolventSolver::new(g1).unwrap();
        let s2 = ResolventSolver::new(g2).unwrap();
        let v1 = s1.stable_basis();
        let v2 = s2.stable_basis();
        let overlap = lopa_core::linalg::singular_values_desc(&(v1.adjoint() * v2));
        let min_cos = overlap.last().copied().unwrap_or(1.0);
        prop_assert!(min_cos > 1.0 - 1e-8, "stable spaces drifted: cos = {min_cos}");
    }

    // sigma is invariant under re-randomized orthonormal bases of E_-
    #[test]
    fn sigma_basis_invariance(theta in 0.0f64..std::f64::consts::TAU, tau in small_real(), gamma in 0.1f64..2.0) {
        let a1 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let a2 = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 1.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.5]);
        let sys = FirstOrderSystem::new(3, 2, vec![a1, a2]).unwrap();
        let freq = Frequency::new(tau, DVector::from_vec(vec![0.3]), gamma).unwrap();
        let solver = ResolventSolver::new(resolvent_matrix(&sys, &freq).unwrap()).unwrap();
        let r = 1.0 / 2.0f64.sqrt();
        let gamma_m = to_complex(&DMatrix::from_row_slice(2, 3, &[r, 0.0, r, 0.0, 1.0, 0.0]));
        let v = solver.stable_basis();
        let sigma0 = lopa_core::linalg::sigma_min(&(&gamma_m * &v));
        // rotate the basis by a unitary 2x2 factor
        let (cs, sn) = (theta.cos(), theta.sin());
        let u = DMatrix::from_row_slice(2, 2, &[
            C64::new(cs, 0.0), C64::new(-sn, 0.2 * sn),
            C64::new(sn, 0.2 * sn), C64::new(cs, 0.0),
        ]);
        // orthonormalize the perturbed factor to get a genuine unitary
        let uq = u.qr().q();
        let v_rot = &v * uq;
        let sigma1 = lopa_core::linalg::sigma_min(&(&gamma_m * v_rot));
        prop_assert!((sigma0 - sigma1).abs() <= 1e-9 * (1.0 + sigma0));
    }

    // propagate is a semigroup on the stable subspace
    #[test]
    fn propagate_semigroup(x1 in 0.0f64..3.0, x2 in 0.0f64..3.0, tau in small_real(), gamma in 0.1f64..2.0) {
        let sys = FirstOrderSystem::new(2, 1, vec![matrix2([0.0, 1.0, 1.0, 0.0])]).unwrap();
        let freq = Frequency::one_d(tau, gamma).unwrap();
        let solver = ResolventSolver::new(resolvent_matrix(&sys, &freq).unwrap()).unwrap();
        let coeffs = DVector::from_vec(vec![C64::new(0.8, -0.4)]);
        let direct = solver.propagate_coeffs(&coeffs, x1 + x2);
        let mid = solver.propagate_coeffs(&coeffs, x1);
        let coeffs_mid = solver.stable_basis().adjoint() * mid;
        let stepped = solver.propagate_coeffs(&coeffs_mid, x2);
        prop_assert!((direct - stepped).norm() <= 1e-10);
    }

    // canonical form merges duplicate terms and drops cancellations
    #[test]
    fn profile_cancellation(re in -2.0f64..-0.1, im in small_real(), m in 0u32..3) {
        let coeff = DVector::from_vec(vec![C64::new(1.0, 1.0), C64::new(-0.5, 2.0)]);
        let t = ProfileTerm { coeff, rate: C64::new(re, im), power: m };
        let p = ExponentialProfile::new(2, vec![t.clone(), t.clone()]).unwrap();
        prop_assert_eq!(p.terms().len(), 1);
        let q = p.sub(&p);
        prop_assert!(q.is_zero());
    }
}
