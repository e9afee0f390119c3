//! Ordered complex Schur decomposition and cluster block-diagonalization.
//!
//! The Schur form `G = Q T Q^H` (T upper triangular) is reordered by unitary
//! swaps of adjacent diagonal entries so that all eigenvalues with negative
//! real part come first, grouped into contiguous clusters of numerically
//! equal eigenvalues. The leading `stable_dim` columns of `Q` are then an
//! orthonormal basis of the stable invariant subspace.

use std::ops::Range;

use nalgebra::DMatrix;

use super::C64;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Cluster {
    pub range: Range<usize>,
    pub mean: C64,
    pub stable: bool,
}

#[derive(Debug, Clone)]
pub struct OrderedSchur {
    /// Unitary factor; columns `0..stable_dim` span the stable subspace.
    pub q: DMatrix<C64>,
    /// Upper triangular factor with reordered diagonal.
    pub t: DMatrix<C64>,
    pub stable_dim: usize,
    /// Contiguous clusters of numerically equal eigenvalues, stable first.
    pub clusters: Vec<Cluster>,
}

/// Compute the Schur form of `m` and reorder it stable-first with
/// clusters of eigenvalues closer than `cluster_tol` kept contiguous.
pub fn ordered_schur(m: &DMatrix<C64>, cluster_tol: f64) -> Result<OrderedSchur> {
    let n = m.nrows();
    if n == 0 {
        return Ok(OrderedSchur {
            q: m.clone(),
            t: m.clone(),
            stable_dim: 0,
            clusters: Vec::new(),
        });
    }
    let schur = m
        .clone()
        .try_schur(1e-14, 0)
        .ok_or_else(|| Error::ValueError("Schur iteration failed to converge".into()))?;
    let (mut q, mut t) = schur.unpack();

    let eigs: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();

    // Union-find clustering of the diagonal.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut c = i;
        while parent[c] != r {
            let next = parent[c];
            parent[c] = r;
            c = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (eigs[i] - eigs[j]).norm() <= cluster_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    {
        let mut label: Vec<Option<usize>> = vec![None; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            match label[r] {
                Some(g) => groups[g].push(i),
                None => {
                    label[r] = Some(groups.len());
                    groups.push(vec![i]);
                }
            }
        }
    }
    // Order clusters: stable before unstable, then lexicographically by mean.
    let mut keyed: Vec<(bool, f64, f64, Vec<usize>)> = groups
        .into_iter()
        .map(|g| {
            let mean = g.iter().map(|&i| eigs[i]).sum::<C64>() / C64::new(g.len() as f64, 0.0);
            (mean.re < 0.0, mean.re, mean.im, g)
        })
        .collect();
    keyed.sort_by(|a, b| {
        let ka = (!a.0, a.1, a.2);
        let kb = (!b.0, b.1, b.2);
        ka.partial_cmp(&kb).unwrap()
    });

    // Desired sequence of original positions.
    let target: Vec<usize> = keyed
        .iter()
        .flat_map(|(_, _, _, g)| g.iter().copied())
        .collect();

    // Realize the permutation with adjacent unitary swaps. `order[p]` tracks
    // which original position currently sits at slot p.
    let mut order: Vec<usize> = (0..n).collect();
    for (p, &want) in target.iter().enumerate() {
        let mut cur = order
            .iter()
            .position(|&o| o == want)
            .expect("position present");
        while cur > p {
            swap_adjacent(&mut t, &mut q, cur - 1);
            order.swap(cur - 1, cur);
            cur -= 1;
        }
    }

    // Rebuild cluster ranges over the now-contiguous layout.
    let mut clusters = Vec::with_capacity(keyed.len());
    let mut start = 0usize;
    for (_, _, _, g) in &keyed {
        let range = start..start + g.len();
        let mean = range.clone().map(|i| t[(i, i)]).sum::<C64>() / C64::new(g.len() as f64, 0.0);
        clusters.push(Cluster {
            range: range.clone(),
            mean,
            stable: mean.re < 0.0,
        });
        start += g.len();
    }
    let stable_dim = clusters
        .iter()
        .filter(|c| c.stable)
        .map(|c| c.range.len())
        .sum();

    Ok(OrderedSchur {
        q,
        t,
        stable_dim,
        clusters,
    })
}

/// Swap the diagonal entries at positions `i`, `i + 1` of an upper
/// triangular `t` by a unitary similarity, updating `q` accordingly.
fn swap_adjacent(t: &mut DMatrix<C64>, q: &mut DMatrix<C64>, i: usize) {
    let n = t.nrows();
    let a = t[(i, i)];
    let b = t[(i, i + 1)];
    let c = t[(i + 1, i + 1)];
    // Eigenvector of [[a, b], [0, c]] for eigenvalue c.
    let vx = b;
    let vy = c - a;
    let nrm = (vx.norm_sqr() + vy.norm_sqr()).sqrt();
    if nrm < 1e-300 {
        return; // coincident eigenvalues with no coupling
    }
    let u00 = vx / nrm;
    let u10 = vy / nrm;
    let u01 = -u10.conj();
    let u11 = u00.conj();
    // Rows i, i+1.
    for col in i..n {
        let t0 = t[(i, col)];
        let t1 = t[(i + 1, col)];
        t[(i, col)] = u00.conj() * t0 + u10.conj() * t1;
        t[(i + 1, col)] = u01.conj() * t0 + u11.conj() * t1;
    }
    // Columns i, i+1.
    for row in 0..(i + 2).min(n) {
        let t0 = t[(row, i)];
        let t1 = t[(row, i + 1)];
        t[(row, i)] = t0 * u00 + t1 * u10;
        t[(row, i + 1)] = t0 * u01 + t1 * u11;
    }
    for row in 0..n {
        let q0 = q[(row, i)];
        let q1 = q[(row, i + 1)];
        q[(row, i)] = q0 * u00 + q1 * u10;
        q[(row, i + 1)] = q0 * u01 + q1 * u11;
    }
    // The similarity swaps the eigenvalues exactly; pin them to kill drift.
    t[(i + 1, i)] = C64::new(0.0, 0.0);
    t[(i, i)] = c;
    t[(i + 1, i + 1)] = a;
}

/// One diagonal block of a cluster block-diagonalization.
#[derive(Debug, Clone)]
pub struct ClusterBlock {
    pub range: Range<usize>,
    pub mean: C64,
    /// Cluster block minus its mean; nilpotent up to the cluster spread.
    pub nilpotent: DMatrix<C64>,
}

/// Block-diagonalize an upper triangular matrix whose diagonal is already
/// arranged into the given contiguous clusters.
///
/// Returns the (unit upper triangular) similarity `R` with
/// `T R = R diag(T_1, ..., T_k)` and the per-cluster blocks. Couplings are
/// removed by Sylvester solves, which are well conditioned as long as the
/// clusters are separated.
pub fn block_diagonalize(
    t: &DMatrix<C64>,
    clusters: &[Range<usize>],
) -> (DMatrix<C64>, Vec<ClusterBlock>) {
    let m = t.nrows();
    let mut work = t.clone();
    let mut r_total: DMatrix<C64> = DMatrix::identity(m, m);
    for cluster in clusters {
        let head = cluster.clone();
        if head.end >= m {
            break;
        }
        let tail = head.end..m;
        let a = work
            .view((head.start, head.start), (head.len(), head.len()))
            .into_owned();
        let b = work
            .view((tail.start, tail.start), (tail.len(), tail.len()))
            .into_owned();
        let coupling = work
            .view((head.start, tail.start), (head.len(), tail.len()))
            .into_owned();
        let x = sylvester_upper(&a, &b, &(-&coupling));
        // R_step = I with X placed in the (head, tail) block.
        let mut r_step: DMatrix<C64> = DMatrix::identity(m, m);
        r_step
            .view_mut((head.start, tail.start), (head.len(), tail.len()))
            .copy_from(&x);
        // work <- R_step^{-1} * work * R_step zeroes the coupling block.
        work.view_mut((head.start, tail.start), (head.len(), tail.len()))
            .fill(C64::new(0.0, 0.0));
        r_total *= r_step;
    }
    let blocks = clusters
        .iter()
        .map(|range| {
            let sub = work
                .view((range.start, range.start), (range.len(), range.len()))
                .into_owned();
            let mean = (0..range.len()).map(|i| sub[(i, i)]).sum::<C64>()
                / C64::new(range.len() as f64, 0.0);
            let nilpotent =
                &sub - DMatrix::identity(range.len(), range.len()).map(|x: f64| mean * x);
            ClusterBlock {
                range: range.clone(),
                mean,
                nilpotent,
            }
        })
        .collect();
    (r_total, blocks)
}

/// Solve `A X - X B = C` for upper triangular `A`, `B` by forward
/// column substitution. Requires the spectra of `A` and `B` to be disjoint.
pub fn sylvester_upper(a: &DMatrix<C64>, b: &DMatrix<C64>, c: &DMatrix<C64>) -> DMatrix<C64> {
    let p = a.nrows();
    let q = b.nrows();
    let mut x = DMatrix::zeros(p, q);
    for j in 0..q {
        let mut rhs = c.column(j).into_owned();
        for k in 0..j {
            let bkj = b[(k, j)];
            for r in 0..p {
                rhs[r] += x[(r, k)] * bkj;
            }
        }
        let shifted = a - DMatrix::identity(p, p).map(|e: f64| b[(j, j)] * e);
        let col = shifted
            .solve_upper_triangular(&rhs)
            .expect("Sylvester pivot vanished; clusters not separated");
        x.set_column(j, &col);
    }
    x
}
