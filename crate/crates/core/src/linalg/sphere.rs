//! Deterministic low-discrepancy sampling of unit spheres.
//!
//! Used for hyperbolicity sweeps over directions and for frequency
//! hemisphere grids. Everything here is a pure function of its arguments,
//! so repeated runs produce identical samples.

use nalgebra::DVector;

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse of `index` in the given base.
pub fn halton(index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= b;
        r += f * (i % base as u64) as f64;
        i /= base as u64;
    }
    r
}

/// `count` unit vectors in dimension `dim`, deterministically spread.
///
/// Dimension 1 alternates the two signs; dimension 2 walks the circle with
/// the golden angle; higher dimensions map Halton points through Box-Muller
/// and normalize.
pub fn unit_directions(dim: usize, count: usize) -> Vec<DVector<f64>> {
    assert!(dim >= 1, "direction dimension must be positive");
    let mut out = Vec::with_capacity(count);
    match dim {
        1 => {
            for k in 0..count {
                out.push(DVector::from_element(
                    1,
                    if k % 2 == 0 { 1.0 } else { -1.0 },
                ));
            }
        }
        2 => {
            let golden = 0.618_033_988_749_894_9_f64;
            for k in 0..count {
                let theta =
                    std::f64::consts::TAU * ((k as f64 * golden + 0.5 / count as f64) % 1.0);
                out.push(DVector::from_vec(vec![theta.cos(), theta.sin()]));
            }
        }
        _ => {
            let pairs = dim.div_ceil(2);
            for k in 0..count {
                let mut coords = Vec::with_capacity(2 * pairs);
                for p in 0..pairs {
                    let u1 = halton(k as u64 + 1, PRIMES[(2 * p) % PRIMES.len()]).max(1e-12);
                    let u2 = halton(k as u64 + 1, PRIMES[(2 * p + 1) % PRIMES.len()]);
                    let r = (-2.0 * u1.ln()).sqrt();
                    coords.push(r * (std::f64::consts::TAU * u2).cos());
                    coords.push(r * (std::f64::consts::TAU * u2).sin());
                }
                coords.truncate(dim);
                let mut v = DVector::from_vec(coords);
                let nrm = v.norm();
                if nrm < 1e-12 {
                    v = DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 0.0 });
                } else {
                    v /= nrm;
                }
                out.push(v);
            }
        }
    }
    out
}
