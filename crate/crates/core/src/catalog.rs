//! Built-in example systems with reference boundary conditions and
//! expected verdicts, plus the seeded random-symmetrizable generator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::document;
use crate::error::Result;
use crate::linalg::{to_complex, C64};
use crate::resolvent::{resolvent_matrix, ResolventSolver};
use crate::symmetrizer::{build_dissipative_bc, find_symmetrizer};
use crate::system::{BoundarySymbol, FirstOrderSystem, Frequency};
use crate::viscous::SecondOrderSystem;

/// What a catalog entry promises about itself; enforced as tests.
#[derive(Debug, Clone, Copy)]
pub struct ExpectedVerdicts {
    pub validates: bool,
    pub hyperbolic: bool,
    pub symmetrizable: bool,
    pub good_scan_holds: bool,
    pub bad_scan_holds: bool,
}

#[derive(Debug, Clone)]
pub enum CatalogSystem {
    Hyperbolic {
        system: FirstOrderSystem,
        good: DMatrix<C64>,
        bad: DMatrix<C64>,
        expected: ExpectedVerdicts,
    },
    Viscous {
        system: SecondOrderSystem,
        gamma1: DMatrix<C64>,
        expected_theta: f64,
    },
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: CatalogSystem,
}

fn c64(m: DMatrix<f64>) -> DMatrix<C64> {
    to_complex(&m)
}

fn scalar_transport() -> CatalogEntry {
    let system = FirstOrderSystem::new(1, 1, vec![DMatrix::from_row_slice(1, 1, &[2.0])]).unwrap();
    CatalogEntry {
        name: "scalar-transport",
        description: "one incoming transport mode, a = 2; the zero row is the failing condition",
        kind: CatalogSystem::Hyperbolic {
            system,
            good: c64(DMatrix::from_row_slice(1, 1, &[1.0])),
            bad: c64(DMatrix::from_row_slice(1, 1, &[0.0])),
            expected: ExpectedVerdicts {
                validates: true,
                hyperbolic: true,
                symmetrizable: true,
                good_scan_holds: true,
                bad_scan_holds: false,
            },
        },
    }
}

fn wave_1d() -> CatalogEntry {
    let system = FirstOrderSystem::new(
        2,
        1,
        vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
    )
    .unwrap();
    CatalogEntry {
        name: "wave-1d",
        description:
            "first-order wave system; [1,0] controls the incoming mode, [1,-1] annihilates it",
        kind: CatalogSystem::Hyperbolic {
            system,
            good: c64(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
            bad: c64(DMatrix::from_row_slice(1, 2, &[1.0, -1.0])),
            expected: ExpectedVerdicts {
                validates: true,
                hyperbolic: true,
                symmetrizable: true,
                good_scan_holds: true,
                bad_scan_holds: false,
            },
        },
    }
}

fn acoustics_2d() -> CatalogEntry {
    // subsonic acoustics-type symmetric system with noncharacteristic boundary:
    // tangential A1 couples (p, v1), normal A2 = [[1/2,0,1],[0,1/2,0],[1,0,1/2]]
    // has eigenvalues {3/2, 1/2, -1/2}, so two boundary rows are needed.
    let a1 = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let a2 = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 1.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.5]);
    let system = FirstOrderSystem::new(3, 2, vec![a1, a2]).unwrap();
    let r = 1.0 / 2.0f64.sqrt();
    let good = c64(DMatrix::from_row_slice(2, 3, &[r, 0.0, r, 0.0, 1.0, 0.0]));
    let bad = c64(DMatrix::from_row_slice(2, 3, &[r, 0.0, -r, 0.0, 1.0, 0.0]));
    CatalogEntry {
        name: "acoustics-2d",
        description: "3x3 symmetric acoustics-type system in two space dimensions with subsonic normal advection",
        kind: CatalogSystem::Hyperbolic {
            system,
            good,
            bad,
            expected: ExpectedVerdicts {
                validates: true,
                hyperbolic: true,
                symmetrizable: true,
                good_scan_holds: true,
                bad_scan_holds: false,
            },
        },
    }
}

fn jordan_block() -> CatalogEntry {
    let system = FirstOrderSystem::new(
        2,
        1,
        vec![DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])],
    )
    .unwrap();
    CatalogEntry {
        name: "jordan-block",
        description: "nondiagonalizable normal matrix: noncharacteristic but not symmetrizable",
        kind: CatalogSystem::Hyperbolic {
            system,
            good: c64(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0])),
            bad: c64(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.0])),
            expected: ExpectedVerdicts {
                validates: true,
                hyperbolic: false,
                symmetrizable: false,
                good_scan_holds: true,
                bad_scan_holds: false,
            },
        },
    }
}

fn scalar_viscous() -> CatalogEntry {
    let system = SecondOrderSystem::new(
        0,
        1,
        1,
        DMatrix::from_row_slice(1, 1, &[1.0]),
        vec![DMatrix::from_row_slice(1, 1, &[1.0])],
        vec![vec![DMatrix::from_row_slice(1, 1, &[1.0])]],
        1.0,
    )
    .unwrap();
    CatalogEntry {
        name: "scalar-viscous",
        description: "scalar convection-diffusion model (a = 1, b = 1) with Dirichlet data",
        kind: CatalogSystem::Viscous {
            system,
            gamma1: DMatrix::from_element(0, 0, C64::new(0.0, 0.0)),
            expected_theta: 1.0,
        },
    }
}

/// Deterministic random Friedrichs-symmetrizable system: coefficients
/// `S^{-1} B_j` with `S` a seeded well-conditioned SPD matrix and `B_j`
/// seeded symmetric matrices; the normal matrix is resampled until it is
/// decently invertible.
pub fn random_symmetrizable(seed: u64, n: usize, d: usize) -> FirstOrderSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(n as u64 * 31 + d as u64),
    );
    let gaussian = |rng: &mut ChaCha8Rng| {
        let u1: f64 = rng.gen_range(1e-12..1.0f64);
        let u2: f64 = rng.gen_range(0.0..1.0f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    // SPD S with eigenvalues in [0.5, 2]
    let raw = DMatrix::from_fn(n, n, |_, _| gaussian(&mut rng));
    let q = raw.qr().q();
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
        rng.gen_range(0.5..2.0f64)
    }));
    let s = &q * diag * q.transpose();
    let s_lu = s.clone().lu();

    let mut coeffs = Vec::with_capacity(d);
    for j in 0..d {
        let is_normal = j == d - 1;
        loop {
            let raw = DMatrix::from_fn(n, n, |_, _| gaussian(&mut rng));
            let sym = (&raw + raw.transpose()).scale(0.5);
            let a = s_lu.solve(&sym).expect("S is invertible");
            if !is_normal {
                coeffs.push(a);
                break;
            }
            let sv = crate::linalg::singular_values_desc(&to_complex(&a));
            let smin = sv.last().copied().unwrap_or(0.0);
            let smax = sv.first().copied().unwrap_or(0.0);
            if smin > 1e-3 * smax {
                coeffs.push(a);
                break;
            }
        }
    }
    FirstOrderSystem::new(n, d, coeffs).expect("generated shapes are consistent")
}

/// Good/bad boundary pair for a generated system: the dissipative
/// construction and a variant whose first row annihilates the stable space
/// at the base frequency (0, 0, 1).
pub fn random_symmetrizable_boundaries(
    sys: &FirstOrderSystem,
) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let s = find_symmetrizer(sys)?;
    let good = to_complex(&build_dissipative_bc(&s, sys)?);
    let base = Frequency::new(0.0, nalgebra::DVector::zeros(sys.d() - 1), 1.0)?;
    let solver = ResolventSolver::new(resolvent_matrix(sys, &base)?)?;
    let mut bad = good.clone();
    if bad.nrows() > 0 {
        // replace the first row by a direction orthogonal to E_-(base);
        // when every mode is incoming no such direction exists, and a rank
        // failure is the only way to break the condition
        let q_perp = solver.unstable_basis();
        if q_perp.ncols() > 0 {
            let row = q_perp.column(0).adjoint();
            bad.view_mut((0, 0), (1, sys.n())).copy_from(&row);
        } else {
            bad.view_mut((0, 0), (1, sys.n())).fill(C64::new(0.0, 0.0));
        }
    }
    Ok((good, bad))
}

/// All built-in entries, including one instance of the random generator.
pub fn catalog() -> Vec<CatalogEntry> {
    let mut entries = vec![
        scalar_transport(),
        wave_1d(),
        acoustics_2d(),
        jordan_block(),
        scalar_viscous(),
    ];
    let system = random_symmetrizable(0, 4, 2);
    let (good, bad) =
        random_symmetrizable_boundaries(&system).expect("generator yields symmetrizable systems");
    entries.push(CatalogEntry {
        name: "random-symmetrizable",
        description:
            "seeded random symmetrizable system (seed 0, n 4, d 2); regenerable with any seed",
        kind: CatalogSystem::Hyperbolic {
            system,
            good,
            bad,
            expected: ExpectedVerdicts {
                validates: true,
                hyperbolic: true,
                symmetrizable: true,
                good_scan_holds: true,
                bad_scan_holds: false,
            },
        },
    });
    entries
}

pub fn find(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}

/// Emit an entry as a parseable system document. Hyperbolic entries carry
/// their good boundary condition; the failing one is available under
/// [`bad_document`].
pub fn entry_document(entry: &CatalogEntry) -> Value {
    match &entry.kind {
        CatalogSystem::Hyperbolic { system, good, .. } => {
            document::system_document(system, &BoundarySymbol::constant(good.clone()))
        }
        CatalogSystem::Viscous { system, gamma1, .. } => {
            document::viscous_document(system, Some(gamma1))
        }
    }
}

pub fn bad_document(entry: &CatalogEntry) -> Option<Value> {
    match &entry.kind {
        CatalogSystem::Hyperbolic { system, bad, .. } => Some(document::system_document(
            system,
            &BoundarySymbol::constant(bad.clone()),
        )),
        CatalogSystem::Viscous { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lopatinski::{uniform_scan, ScanConfig, ScanVerdict};
    use crate::symmetrizer::find_symmetrizer;
    use crate::system::{check_hyperbolicity, validate_system};
    use crate::viscous::validate_second_order;

    #[test]
    fn generator_is_deterministic() {
        let a = random_symmetrizable(7, 5, 2);
        let b = random_symmetrizable(7, 5, 2);
        assert_eq!(a, b);
        let c = random_symmetrizable(8, 5, 2);
        assert_ne!(a, c);
    }

    #[test]
    fn generated_systems_are_symmetrizable() {
        for seed in 0..5 {
            let sys = random_symmetrizable(seed, 4, 2);
            let s = find_symmetrizer(&sys).unwrap();
            assert!(
                s.lambda_min > 1e-6,
                "seed {seed}: lambda_min {}",
                s.lambda_min
            );
        }
    }

    #[test]
    fn every_expected_verdict_holds() {
        let scan_cfg = ScanConfig {
            gamma_min: 1e-2,
            resolution: 8,
            ..Default::default()
        };
        for entry in catalog() {
            match &entry.kind {
                CatalogSystem::Hyperbolic {
                    system,
                    good,
                    bad,
                    expected,
                } => {
                    assert_eq!(
                        validate_system(system).is_ok(),
                        expected.validates,
                        "{}",
                        entry.name
                    );
                    let hyp = check_hyperbolicity(system, 16, 1e-8);
                    assert_eq!(hyp.pass, expected.hyperbolic, "{}: {hyp:?}", entry.name);
                    assert_eq!(
                        find_symmetrizer(system).is_ok(),
                        expected.symmetrizable,
                        "{}",
                        entry.name
                    );
                    if expected.symmetrizable {
                        let good_scan = uniform_scan(
                            system,
                            &BoundarySymbol::constant(good.clone()),
                            &scan_cfg,
                        )
                        .unwrap();
                        assert_eq!(
                            good_scan.verdict == ScanVerdict::Holds
                                || good_scan.verdict == ScanVerdict::VacuouslyHolds,
                            expected.good_scan_holds,
                            "{}: {:?}",
                            entry.name,
                            good_scan
                        );
                        let bad_scan =
                            uniform_scan(system, &BoundarySymbol::constant(bad.clone()), &scan_cfg)
                                .unwrap();
                        assert_eq!(
                            bad_scan.verdict == ScanVerdict::Holds,
                            expected.bad_scan_holds,
                            "{}: {:?}",
                            entry.name,
                            bad_scan
                        );
                    }
                }
                CatalogSystem::Viscous {
                    system,
                    expected_theta,
                    ..
                } => {
                    let rep = validate_second_order(system, 8).unwrap();
                    assert!(
                        (rep.measured_theta - expected_theta).abs() < 1e-9,
                        "{}",
                        entry.name
                    );
                }
            }
        }
    }

    #[test]
    fn documents_parse_back() {
        for entry in catalog() {
            let doc = entry_document(&entry);
            let text = serde_json::to_string(&doc).unwrap();
            match entry.kind {
                CatalogSystem::Hyperbolic { .. } => {
                    document::parse_system(&text).unwrap();
                }
                CatalogSystem::Viscous { .. } => {
                    document::parse_viscous(&text).unwrap();
                }
            }
        }
    }
}
