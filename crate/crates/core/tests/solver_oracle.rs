//! Cross-validation of the profile-algebra solver against the independent
//! Green's-function oracle, on a grid of sample points.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lopa_core::linalg::{to_complex, vec_norm, C64};
use lopa_core::oracle::GreensOracle;
use lopa_core::profile::{ExponentialProfile, ProfileTerm};
use lopa_core::resolvent::{resolvent_matrix, ResolventSolver};
use lopa_core::system::Frequency;
use lopa_core::{catalog, FirstOrderSystem};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn complex_gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let r = (-2.0 * u1.ln()).sqrt();
        C64::new(
            r * (std::f64::consts::TAU * u2).cos(),
            r * (std::f64::consts::TAU * u2).sin(),
        )
    })
}

/// Relative L2 grid error between the profile solution and the oracle.
fn grid_error(
    solver: &ResolventSolver,
    gamma: &DMatrix<C64>,
    f: &ExponentialProfile,
    g: &DVector<C64>,
    xs: &[f64],
) -> f64 {
    let sol = solver.solve(gamma, f, g).expect("profile solve");
    let oracle = GreensOracle::new(solver.matrix()).expect("oracle construction");
    let reference = oracle
        .solve_on_grid(gamma, f, g, xs, 1e-10)
        .expect("oracle solve");
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, r) in xs.iter().zip(&reference) {
        let mine = sol.profile.eval(*x);
        num += vec_norm(&(&mine - r)).powi(2);
        den += vec_norm(r).powi(2);
    }
    (num / den.max(1e-300)).sqrt()
}

#[test]
fn wave_system_matches_oracle() {
    let sys = FirstOrderSystem::new(
        2,
        1,
        vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
    )
    .unwrap();
    let freq = Frequency::one_d(0.6, 0.8).unwrap();
    let solver = ResolventSolver::new(resolvent_matrix(&sys, &freq).unwrap()).unwrap();
    let gamma = to_complex(&DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    let f = ExponentialProfile::new(
        2,
        vec![
            ProfileTerm {
                coeff: DVector::from_vec(vec![c(1.0, 0.2), c(-0.4, 0.9)]),
                rate: c(-1.3, 0.5),
                power: 0,
            },
            ProfileTerm {
                coeff: DVector::from_vec(vec![c(0.1, 0.0), c(0.7, -0.3)]),
                rate: c(-2.1, -1.0),
                power: 1,
            },
        ],
    )
    .unwrap();
    let g = DVector::from_vec(vec![c(0.5, -0.1)]);
    let xs: Vec<f64> = (0..21).map(|i| 10.0 * i as f64 / 20.0).collect();
    let err = grid_error(&solver, &gamma, &f, &g, &xs);
    assert!(err <= 1e-6, "relative grid error {err}");
}

#[test]
fn random_symmetrizable_instances_match_oracle() {
    let xs: Vec<f64> = (0..21).map(|i| 10.0 * i as f64 / 20.0).collect();
    let mut worst = 0.0f64;
    let mut count = 0usize;
    let mut seed = 0u64;
    while count < 25 {
        seed += 1;
        let n = 2 + (seed as usize % 3);
        let d = 1 + (seed as usize % 2);
        let sys = catalog::random_symmetrizable(seed, n, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        let eta = DVector::from_fn(d - 1, |_, _| rng.gen_range(-1.0..1.0));
        let freq = Frequency::new(rng.gen_range(-1.0..1.0), eta, rng.gen_range(0.2..2.0)).unwrap();
        let gm = match resolvent_matrix(&sys, &freq) {
            Ok(gm) => gm,
            Err(_) => continue,
        };
        let solver = match ResolventSolver::new(gm) {
            Ok(s) => s,
            Err(_) => continue,
        };
        // dissipative boundary so the solve is well posed
        let s = match lopa_core::find_symmetrizer(&sys) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let gamma = to_complex(&lopa_core::build_dissipative_bc(&s, &sys).unwrap());
        let gap = solver.resolvent().spectral_gap();
        let norm = solver.resolvent().norm();
        let rate = c(-(0.3 * gap + 0.2 * norm), rng.gen_range(-1.0..1.0));
        let dist = solver
            .resolvent()
            .eigenvalues()
            .iter()
            .map(|e| (e - rate).norm())
            .fold(f64::INFINITY, f64::min);
        if dist < 0.1 * gap {
            continue;
        }
        let f = ExponentialProfile::single(complex_gaussian(&mut rng, n), rate, (count % 2) as u32)
            .unwrap();
        let g = complex_gaussian(&mut rng, gamma.nrows());
        let err = grid_error(&solver, &gamma, &f, &g, &xs);
        worst = worst.max(err);
        assert!(err <= 1e-6, "seed {seed}: relative grid error {err}");
        count += 1;
    }
    println!("oracle cross-check worst relative error over {count} instances: {worst:.3e}");
}

#[test]
fn forcing_only_no_boundary_rows() {
    // fully outgoing system: empty boundary, decaying particular solution
    let sys = FirstOrderSystem::new(
        2,
        1,
        vec![DMatrix::from_row_slice(2, 2, &[-1.0, 0.2, 0.0, -2.0])],
    )
    .unwrap();
    let freq = Frequency::one_d(0.3, 1.1).unwrap();
    let solver = ResolventSolver::new(resolvent_matrix(&sys, &freq).unwrap()).unwrap();
    assert_eq!(solver.stable_dim(), 0);
    let gamma = DMatrix::from_element(0, 2, c(0.0, 0.0));
    let f = ExponentialProfile::single(
        DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]),
        c(-0.9, 0.4),
        0,
    )
    .unwrap();
    let g = DVector::from_element(0, c(0.0, 0.0));
    let xs: Vec<f64> = (0..11).map(|i| i as f64).collect();
    let err = grid_error(&solver, &gamma, &f, &g, &xs);
    assert!(err <= 1e-6, "relative grid error {err}");
}
