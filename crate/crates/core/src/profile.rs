//! The exponential-profile algebra on the half-line.
//!
//! A profile is a finite sum of terms `x^m e^{mu x} v` with `Re mu < 0`.
//! The class is closed under differentiation, matrix multiplication and the
//! half-line resolvent solve, and its L2 inner products have closed forms:
//!
//! ```text
//! int_0^inf x^a e^{-z x} dx = a! / z^(a+1),   Re z > 0.
//! ```
//!
//! Norms, traces and equation residuals computed here therefore carry no
//! discretization error, only rounding.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cpow, factorial_f64, vec_norm, C64};

/// One term `x^power * e^(rate * x) * coeff`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTerm {
    pub coeff: DVector<C64>,
    pub rate: C64,
    pub power: u32,
}

/// A finite sum of exponential-polynomial terms, kept in canonical form:
/// terms with identical `(rate, power)` merged, zero coefficients dropped,
/// deterministic ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialProfile {
    dim: usize,
    terms: Vec<ProfileTerm>,
}

impl ExponentialProfile {
    pub fn zero(dim: usize) -> Self {
        ExponentialProfile {
            dim,
            terms: Vec::new(),
        }
    }

    /// Build a profile, validating decay (`Re rate < 0`) and coefficient
    /// dimensions, and reducing to canonical form.
    pub fn new(dim: usize, terms: Vec<ProfileTerm>) -> Result<Self> {
        for t in &terms {
            if t.coeff.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "profile term coefficient has length {} but the profile dimension is {}",
                    t.coeff.len(),
                    dim
                )));
            }
            if t.rate.re >= 0.0 || !t.rate.re.is_finite() || !t.rate.im.is_finite() {
                return Err(Error::ValueError(format!(
                    "profile rate {} must have negative finite real part",
                    t.rate
                )));
            }
        }
        let mut p = ExponentialProfile { dim, terms };
        p.canonicalize();
        Ok(p)
    }

    pub fn single(coeff: DVector<C64>, rate: C64, power: u32) -> Result<Self> {
        let dim = coeff.len();
        Self::new(dim, vec![ProfileTerm { coeff, rate, power }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[ProfileTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Slowest decay rate `delta > 0` such that every term decays at least
    /// like `e^{-delta x}`; infinite for the zero profile.
    pub fn decay_margin(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| -t.rate.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest polynomial power appearing in any term.
    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }

    fn canonicalize(&mut self) {
        use std::collections::BTreeMap;
        let mut merged: BTreeMap<(u64, u64, u32), DVector<C64>> = BTreeMap::new();
        for t in self.terms.drain(..) {
            let key = (t.rate.re.to_bits(), t.rate.im.to_bits(), t.power);
            match merged.get_mut(&key) {
                Some(v) => *v += &t.coeff,
                None => {
                    merged.insert(key, t.coeff);
                }
            }
        }
        self.terms = merged
            .into_iter()
            .filter(|(_, v)| vec_norm(v) > 0.0)
            .map(|((re, im, power), coeff)| ProfileTerm {
                coeff,
                rate: C64::new(f64::from_bits(re), f64::from_bits(im)),
                power,
            })
            .collect();
    }

    /// Pointwise value at `x >= 0`.
    pub fn eval(&self, x: f64) -> DVector<C64> {
        let mut out = DVector::from_element(self.dim, C64::new(0.0, 0.0));
        for t in &self.terms {
            let scalar = (t.rate * C64::new(x, 0.0)).exp() * C64::new(x.powi(t.power as i32), 0.0);
            out += t.coeff.map(|c| c * scalar);
        }
        out
    }

    /// Boundary trace `p(0)`: the sum of the power-zero coefficients.
    pub fn trace0(&self) -> DVector<C64> {
        let mut out = DVector::from_element(self.dim, C64::new(0.0, 0.0));
        for t in self.terms.iter().filter(|t| t.power == 0) {
            out += &t.coeff;
        }
        out
    }

    /// Termwise derivative; stays inside the algebra.
    pub fn derivative(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            terms.push(ProfileTerm {
                coeff: t.coeff.map(|c| c * t.rate),
                rate: t.rate,
                power: t.power,
            });
            if t.power > 0 {
                terms.push(ProfileTerm {
                    coeff: t.coeff.map(|c| c * C64::new(t.power as f64, 0.0)),
                    rate: t.rate,
                    power: t.power - 1,
                });
            }
        }
        let mut p = ExponentialProfile {
            dim: self.dim,
            terms,
        };
        p.canonicalize();
        p
    }

    /// Apply a (possibly rectangular) matrix to every coefficient. The
    /// result lives in the matrix's row dimension.
    pub fn apply_matrix(&self, m: &DMatrix<C64>) -> Self {
        assert_eq!(
            m.ncols(),
            self.dim,
            "matrix columns must match the profile dimension"
        );
        let terms = self
            .terms
            .iter()
            .map(|t| ProfileTerm {
                coeff: m * &t.coeff,
                rate: t.rate,
                power: t.power,
            })
            .collect();
        let mut p = ExponentialProfile {
            dim: m.nrows(),
            terms,
        };
        p.canonicalize();
        p
    }

    /// Restrict to a contiguous coordinate range.
    pub fn rows(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.dim);
        let terms = self
            .terms
            .iter()
            .map(|t| ProfileTerm {
                coeff: t.coeff.rows(start, len).into_owned(),
                rate: t.rate,
                power: t.power,
            })
            .collect();
        let mut p = ExponentialProfile { dim: len, terms };
        p.canonicalize();
        p
    }

    /// L2(0, inf) inner product `<self, other>` computed exactly from the
    /// Gamma-integral formula.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim, other.dim, "profiles must share a dimension");
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            for s in &other.terms {
                let z = -(t.rate + s.rate.conj());
                let a = t.power + s.power;
                let weight = factorial_f64(a) / cpow(z, a + 1);
                let dot: C64 = s
                    .coeff
                    .iter()
                    .zip(t.coeff.iter())
                    .map(|(b, a)| b.conj() * a)
                    .sum();
                acc += dot * weight;
            }
        }
        acc
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner(self).re.max(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| ProfileTerm {
                coeff: t.coeff.map(|c| c * s),
                rate: t.rate,
                power: t.power,
            })
            .collect();
        let mut p = ExponentialProfile {
            dim: self.dim,
            terms,
        };
        p.canonicalize();
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "profiles must share a dimension");
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut p = ExponentialProfile {
            dim: self.dim,
            terms,
        };
        p.canonicalize();
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }
}
