//! Pointwise and uniform evaluation of the Lopatinski condition.
//!
//! The primitive is `sigma = sigma_min(Gamma(Lambda) V(Lambda))` with `V` an
//! orthonormal basis of the stable subspace: it is invariant under the
//! choice of basis and `1/sigma` is exactly the best constant in the trace
//! estimate `|v| <= C |Gamma(Lambda) v|` on `E_-(Lambda)`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sigma_min, singular_values_desc, sphere};
use crate::resolvent::{resolvent_matrix, ResolventSolver};
use crate::system::{BoundarySymbol, FirstOrderSystem, Frequency, RANK_TOL};

/// The Lopatinski quantity at one frequency.
#[derive(Debug, Clone, Serialize)]
pub struct LopatinskiValue {
    pub tau: f64,
    pub eta: Vec<f64>,
    pub gamma: f64,
    /// Smallest singular value of `Gamma(Lambda) V(Lambda)`.
    pub sigma: f64,
    /// `k = rank Gamma(Lambda) = dim E_-` held.
    pub rank_ok: bool,
    pub k: usize,
    pub rank_gamma: usize,
    pub stable_dim: usize,
    /// Best constant of the trace estimate, `1 / sigma`.
    pub trace_constant: f64,
}

/// Compute the Lopatinski value at a frequency; rank disagreements are
/// errors carrying the three counts.
pub fn lopatinski_value(
    sys: &FirstOrderSystem,
    symbol: &BoundarySymbol,
    freq: &Frequency,
) -> Result<LopatinskiValue> {
    let gm = resolvent_matrix(sys, freq)?;
    let solver = ResolventSolver::new(gm)?;
    lopatinski_value_with(&solver, symbol, freq)
}

/// Same, reusing an existing solver at the frequency.
pub fn lopatinski_value_with(
    solver: &ResolventSolver,
    symbol: &BoundarySymbol,
    freq: &Frequency,
) -> Result<LopatinskiValue> {
    let gamma = symbol.evaluate(freq);
    let stable_dim = solver.stable_dim();
    let k = gamma.nrows();
    let sv = singular_values_desc(&gamma);
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
        sigma_min(&(&gamma * solver.stable_basis()))
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScanVerdict {
    Holds,
    Fails,
    RankFailure,
    VacuouslyHolds,
}

/// Configuration of the uniform frequency scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanConfig {
    pub gamma_min: f64,
    pub resolution: usize,
    /// Radial samples for frequency-dependent symbols.
    pub radial_cutoff: f64,
    pub radial_count: usize,
    /// Verdict threshold on the scanned infimum.
    pub sigma_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            gamma_min: 1e-3,
            resolution: 24,
            radial_cutoff: 100.0,
            radial_count: 7,
            sigma_tol: 1e-8,
        }
    }
}

/// Result of a uniform scan over the frequency grid.
#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub verdict: ScanVerdict,
    /// None encodes the vacuous (+infinity) case of an empty boundary.
    pub inf_sigma: Option<f64>,
    pub worst: Option<WorstPoint>,
    pub grid: GridDescription,
    pub points_scanned: usize,
    /// Frequencies at which the splitting stayed ill conditioned after
    /// jitter retries.
    pub persistent_failures: Vec<[f64; 3]>,
    /// Rank failures encountered, as (tau, eta..., gamma) triples-of-summary.
    pub rank_failures: usize,
    /// Set when sigma drops steeply approaching the gamma floor; the scan
    /// cannot tell whether the infimum survives the limit.
    pub caution_near_gamma_min: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstPoint {
    pub tau: f64,
    pub eta: Vec<f64>,
    pub gamma: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridDescription {
    pub gamma_min: f64,
    pub resolution: usize,
    pub hemisphere_points: usize,
    pub radial_levels: usize,
    pub radial_cutoff: Option<f64>,
    /// Smallest gamma actually visited (radial levels below 1 push the
    /// hemisphere floor down).
    pub effective_gamma_floor: f64,
}

/// Deterministic hemisphere grid: unit frequencies `|(tau, eta, gamma)| = 1`
/// with `gamma in [gamma_min, 1]`, stratified in arc angle.
pub fn hemisphere_grid(d: usize, gamma_min: f64, resolution: usize) -> Vec<Frequency> {
    let levels = resolution.max(2);
    let phi_min = gamma_min.min(1.0).asin();
    let phi_max = std::f64::consts::FRAC_PI_2;
    let mut points = Vec::new();
    for l in 0..levels {
        let phi = phi_min + (phi_max - phi_min) * l as f64 / (levels - 1) as f64;
        let gamma = phi.sin();
        let r = phi.cos();
        if r < 1e-14 {
            points.push(Frequency::new(0.0, DVector::zeros(d - 1), gamma).expect("gamma positive"));
            continue;
        }
        let count = ((resolution as f64 * r).ceil() as usize).max(1) * 2 * d.max(1);
        for dir in sphere::unit_directions(d, count) {
            let tau = r * dir[0];
            let eta = DVector::from_iterator(d - 1, (1..d).map(|i| r * dir[i]));
            points.push(Frequency::new(tau, eta, gamma).expect("gamma positive"));
        }
    }
    points
}

enum PointOutcome {
    Value(LopatinskiValue),
    RankFailure(Frequency),
    Persistent(Frequency),
}

fn scan_point<F>(freq: &Frequency, eval: &F) -> PointOutcome
where
    F: Fn(&Frequency) -> Result<LopatinskiValue>,
{
    let mut attempt = freq.clone();
    for retry in 0..3 {
        match eval(&attempt) {
            Ok(v) => return PointOutcome::Value(v),
            Err(Error::RankMismatch { .. }) => return PointOutcome::RankFailure(attempt),
            Err(Error::NearImaginaryEigenvalue { .. }) if retry < 2 => {
                // jitter and retry
                let s = attempt.radius();
                let tau = attempt.tau() + 1e-6 * s * (retry + 1) as f64;
                let gamma = attempt.gamma() * (1.0 + 1e-6 * (retry + 1) as f64);
                attempt = Frequency::new(tau, attempt.eta().clone(), gamma)
                    .expect("gamma stays positive");
            }
            Err(_) => return PointOutcome::Persistent(attempt),
        }
    }
    PointOutcome::Persistent(attempt)
}

/// Scan the Lopatinski quantity over the parameter hemisphere (times radial
/// levels when the symbol is frequency dependent) and report the infimum.
pub fn uniform_scan(
    sys: &FirstOrderSystem,
    symbol: &BoundarySymbol,
    config: &ScanConfig,
) -> Result<ScanResult> {
    if config.gamma_min <= 0.0 || config.gamma_min.is_nan() {
        return Err(Error::InvalidGrid("gamma_min must be > 0".into()));
    }
    if config.resolution < 2 {
        return Err(Error::InvalidGrid("resolution must be at least 2".into()));
    }

    // The empty-boundary case is legal and vacuous.
    if symbol.k() == 0 && sys.n_plus() == 0 {
        return Ok(ScanResult {
            verdict: ScanVerdict::VacuouslyHolds,
            inf_sigma: None,
            worst: None,
            grid: GridDescription {
                gamma_min: config.gamma_min,
                resolution: config.resolution,
                hemisphere_points: 0,
                radial_levels: 1,
                radial_cutoff: None,
                effective_gamma_floor: config.gamma_min,
            },
            points_scanned: 0,
            persistent_failures: Vec::new(),
            rank_failures: 0,
            caution_near_gamma_min: false,
        });
    }

    let hemisphere = hemisphere_grid(sys.d(), config.gamma_min, config.resolution);
    let hemisphere_len = hemisphere.len();
    let radial: Vec<f64> = if symbol.is_constant() {
        vec![1.0]
    } else {
        // log-spaced radii up to the declared cutoff
        let count = config.radial_count.max(2);
        let lo = 0.1f64.min(config.radial_cutoff / 10.0);
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                lo * (config.radial_cutoff / lo).powf(t)
            })
            .collect()
    };
    let mut points = Vec::with_capacity(hemisphere.len() * radial.len());
    for r in &radial {
        for p in &hemisphere {
            points.push(p.scaled(*r).expect("positive scaling"));
        }
    }

    let eval = |freq: &Frequency| -> Result<LopatinskiValue> {
        let gm = resolvent_matrix(sys, freq)?;
        let solver = ResolventSolver::new(gm)?;
        lopatinski_value_with(&solver, symbol, freq)
    };
    let outcomes: Vec<PointOutcome> = points.par_iter().map(|f| scan_point(f, &eval)).collect();

    let mut inf_sigma = f64::INFINITY;
    let mut worst: Option<WorstPoint> = None;
    let mut rank_failures = 0usize;
    let mut persistent = Vec::new();
    let mut values = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        match outcome {
            PointOutcome::Value(v) => {
                if v.sigma < inf_sigma {
                    inf_sigma = v.sigma;
                    worst = Some(WorstPoint {
                        tau: v.tau,
                        eta: v.eta.clone(),
                        gamma: v.gamma,
                        sigma: v.sigma,
                    });
                }
                values.push(v);
            }
            PointOutcome::RankFailure(f) => {
                rank_failures += 1;
                if worst.is_none() {
                    worst = Some(WorstPoint {
                        tau: f.tau(),
                        eta: f.eta().iter().copied().collect(),
                        gamma: f.gamma(),
                        sigma: 0.0,
                    });
                }
            }
            PointOutcome::Persistent(f) => {
                persistent.push([
                    f.tau(),
                    f.eta().iter().map(|x| x * x).sum::<f64>().sqrt(),
                    f.gamma(),
                ]);
            }
        }
    }

    // Steep-gradient caution: compare the worst sigma on the two lowest
    // gamma strata of the unit hemisphere.
    let caution = {
        let gammas: Vec<f64> = {
            let mut g: Vec<f64> = hemisphere.iter().map(|f| f.gamma()).collect();
            g.sort_by(|a, b| a.partial_cmp(b).unwrap());
            g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            g
        };
        if gammas.len() >= 2 && !values.is_empty() {
            let worst_at = |g: f64| -> f64 {
                values
                    .iter()
                    .filter(|v| {
                        let unit_gamma = v.gamma
                            / (v.tau * v.tau
                                + v.eta.iter().map(|x| x * x).sum::<f64>()
                                + v.gamma * v.gamma)
                                .sqrt();
                        (unit_gamma - g).abs() < 1e-9
                    })
                    .map(|v| v.sigma)
                    .fold(f64::INFINITY, f64::min)
            };
            let w0 = worst_at(gammas[0]);
            let w1 = worst_at(gammas[1]);
            w0.is_finite() && w1.is_finite() && w0 < 0.5 * w1
        } else {
            false
        }
    };

    let verdict = if rank_failures > 0 {
        ScanVerdict::RankFailure
    } else if values.is_empty() {
        ScanVerdict::Fails
    } else if inf_sigma > config.sigma_tol {
        ScanVerdict::Holds
    } else {
        ScanVerdict::Fails
    };

    Ok(ScanResult {
        verdict,
        inf_sigma: if inf_sigma.is_finite() {
            Some(inf_sigma)
        } else {
            None
        },
        worst,
        grid: GridDescription {
            gamma_min: config.gamma_min,
            resolution: config.resolution,
            hemisphere_points: hemisphere_len,
            radial_levels: radial.len(),
            radial_cutoff: if symbol.is_constant() {
                None
            } else {
                Some(config.radial_cutoff)
            },
            effective_gamma_floor: points
                .iter()
                .map(|f| f.gamma())
                .fold(f64::INFINITY, f64::min),
        },
        points_scanned: points.len(),
        persistent_failures: persistent,
        rank_failures,
        caution_near_gamma_min: caution,
    })
}

/// Generic scan over an explicit list of frequencies with a caller-supplied
/// pointwise evaluator; used by the viscous Evans scan.
pub fn scan_explicit<F>(points: &[Frequency], eval: F, sigma_tol: f64) -> Result<ScanResult>
where
    F: Fn(&Frequency) -> Result<LopatinskiValue> + Sync,
{
    if points.is_empty() {
        return Err(Error::InvalidGrid("the frequency set is empty".into()));
    }
    let outcomes: Vec<PointOutcome> = points.par_iter().map(|f| scan_point(f, &eval)).collect();
    let mut inf_sigma = f64::INFINITY;
    let mut worst: Option<WorstPoint> = None;
    let mut rank_failures = 0usize;
    let mut persistent = Vec::new();
    let mut any_value = false;
    for outcome in outcomes {
        match outcome {
            PointOutcome::Value(v) => {
                any_value = true;
                if v.sigma < inf_sigma {
                    inf_sigma = v.sigma;
                    worst = Some(WorstPoint {
                        tau: v.tau,
                        eta: v.eta.clone(),
                        gamma: v.gamma,
                        sigma: v.sigma,
                    });
                }
            }
            PointOutcome::RankFailure(f) => {
                rank_failures += 1;
                if worst.is_none() {
                    worst = Some(WorstPoint {
                        tau: f.tau(),
                        eta: f.eta().iter().copied().collect(),
                        gamma: f.gamma(),
                        sigma: 0.0,
                    });
                }
            }
            PointOutcome::Persistent(f) => {
                persistent.push([
                    f.tau(),
                    f.eta().iter().map(|x| x * x).sum::<f64>().sqrt(),
                    f.gamma(),
                ]);
            }
        }
    }
    let verdict = if rank_failures > 0 {
        ScanVerdict::RankFailure
    } else if !any_value {
        ScanVerdict::Fails
    } else if inf_sigma > sigma_tol {
        ScanVerdict::Holds
    } else {
        ScanVerdict::Fails
    };
    Ok(ScanResult {
        verdict,
        inf_sigma: if inf_sigma.is_finite() {
            Some(inf_sigma)
        } else {
            None
        },
        worst,
        grid: GridDescription {
            gamma_min: points
                .iter()
                .map(|f| f.gamma())
                .fold(f64::INFINITY, f64::min),
            resolution: points.len(),
            hemisphere_points: points.len(),
            radial_levels: 1,
            radial_cutoff: None,
            effective_gamma_floor: points
                .iter()
                .map(|f| f.gamma())
                .fold(f64::INFINITY, f64::min),
        },
        points_scanned: points.len(),
        persistent_failures: persistent,
        rank_failures,
        caution_near_gamma_min: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn wave() -> FirstOrderSystem {
        FirstOrderSystem::new(
            2,
            1,
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
        )
        .unwrap()
    }

    fn row(vals: &[f64]) -> BoundarySymbol {
        BoundarySymbol::constant_real(DMatrix::from_row_slice(1, vals.len(), vals))
    }

    #[test]
    fn scalar_sigma_is_one() {
        let sys = FirstOrderSystem::new(1, 1, vec![DMatrix::from_row_slice(1, 1, &[1.5])]).unwrap();
        let v = lopatinski_value(&sys, &row(&[1.0]), &Frequency::one_d(0.3, 0.8).unwrap()).unwrap();
        assert!((v.sigma - 1.0).abs() < 1e-12);
        assert!(v.rank_ok);
    }

    #[test]
    fn wave_sigma_is_inv_sqrt2() {
        let v = lopatinski_value(
            &wave(),
            &row(&[1.0, 0.0]),
            &Frequency::one_d(0.0, 0.7).unwrap(),
        )
        .unwrap();
        assert!((v.sigma - 1.0 / 2.0f64.sqrt()).abs() < 1e-12);
        assert!((v.trace_constant - 2.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn annihilating_row_gives_zero_sigma() {
        let v = lopatinski_value(
            &wave(),
            &row(&[1.0, -1.0]),
            &Frequency::one_d(0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(v.sigma < 1e-12);
    }

    #[test]
    fn wave_scan_holds_with_constant_sigma() {
        let res = uniform_scan(
            &wave(),
            &row(&[1.0, 0.0]),
            &ScanConfig {
                gamma_min: 1e-3,
                resolution: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(res.verdict, ScanVerdict::Holds);
        let inf = res.inf_sigma.unwrap();
        assert!((inf - 1.0 / 2.0f64.sqrt()).abs() < 1e-6, "inf sigma {inf}");
        assert_eq!(res.rank_failures, 0);
    }

    #[test]
    fn bad_wave_scan_fails() {
        let res = uniform_scan(
            &wave(),
            &row(&[1.0, -1.0]),
            &ScanConfig {
                gamma_min: 1e-3,
                resolution: 12,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(res.verdict, ScanVerdict::Fails);
        assert!(res.inf_sigma.unwrap() <= 1e-8);
    }

    #[test]
    fn empty_boundary_is_vacuous() {
        let sys = FirstOrderSystem::new(
            2,
            1,
            vec![DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0])],
        )
        .unwrap();
        let sym = BoundarySymbol::constant_real(DMatrix::zeros(0, 2));
        let res = uniform_scan(&sys, &sym, &ScanConfig::default()).unwrap();
        assert_eq!(res.verdict, ScanVerdict::VacuouslyHolds);
        assert!(res.inf_sigma.is_none());
    }

    #[test]
    fn sigma_scaling_invariance() {
        let sys = wave();
        let sym = row(&[1.0, 0.0]);
        let base = Frequency::one_d(0.37, 0.21).unwrap();
        let v0 = lopatinski_value(&sys, &sym, &base).unwrap();
        for s in [0.1, 10.0] {
            let v = lopatinski_value(&sys, &sym, &base.scaled(s).unwrap()).unwrap();
            assert!(
                (v.sigma - v0.sigma).abs() <= 1e-8,
                "sigma changed under scaling"
            );
        }
    }

    #[test]
    fn rank_mismatch_is_error() {
        // two boundary rows against a one-dimensional stable space
        let sym =
            BoundarySymbol::constant_real(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let err = lopatinski_value(&wave(), &sym, &Frequency::one_d(0.0, 1.0).unwrap());
        assert!(matches!(err, Err(Error::RankMismatch { .. })));
    }

    #[test]
    fn hemisphere_grid_respects_gamma_floor() {
        for d in 1..=3 {
            let pts = hemisphere_grid(d, 1e-2, 8);
            assert!(!pts.is_empty());
            for p in &pts {
                assert!(p.gamma() >= 1e-2 * (1.0 - 1e-12));
                assert!((p.radius() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scan_of_scaled_dirichlet_uses_radial_levels() {
        let base = crate::linalg::to_complex(&DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let sym = BoundarySymbol::named("scaled-dirichlet", base, &serde_json::Map::new()).unwrap();
        let res = uniform_scan(
            &wave(),
            &sym,
            &ScanConfig {
                resolution: 6,
                radial_count: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.grid.radial_levels > 1);
        assert_eq!(res.verdict, ScanVerdict::Holds);
    }
}
