//! Doubly stochastic couplings and their decomposition into permutations.
//!
//! A measure-preserving relabeling of equal blocks induces a doubly
//! stochastic matrix of block-overlap masses. Decomposing that matrix into a
//! convex combination of permutation matrices turns the L2 distance under the
//! relabeling into an expectation over independent pairs of permutations,
//! which is how the two-permutation metric lower-bounds the graphon distance.

use serde::Serialize;
use thiserror::Error;

use crate::align::Permutation;
use crate::block::SquareMatrix;

/// Entries below this are treated as zero when peeling.
pub const ZERO_TOL: f64 = 1e-12;
/// Allowed deviation of row/column sums from 1.
pub const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("not doubly stochastic: {msg}")]
    NotDoublyStochastic { msg: String },
    #[error("numerical breakdown while decomposing: {msg}")]
    NumericalBreakdown { msg: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// A nonnegative `k x k` matrix whose rows and columns all sum to 1.
///
/// Convention: the permutation matrix of `sigma` has `P[sigma(j)][j] = 1`, so
/// that coupling by it reproduces `||A_{sigma,sigma} - B||_2^2` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublyStochastic {
    k: usize,
    p: Vec<f64>,
}

impl DoublyStochastic {
    pub fn new(k: usize, entries: Vec<f64>) -> Result<Self, TransportError> {
        assert_eq!(entries.len(), k * k);
        let mut p = entries;
        for (idx, v) in p.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -ZERO_TOL {
                    return Err(TransportError::NotDoublyStochastic {
                        msg: format!("negative entry {v} at index {idx}"),
                    });
                }
                *v = 0.0;
            }
        }
        for i in 0..k {
            let row: f64 = p[i * k..(i + 1) * k].iter().sum();
            if (row - 1.0).abs() > SUM_TOL {
                return Err(TransportError::NotDoublyStochastic {
                    msg: format!("row {i} sums to {row}"),
                });
            }
        }
        for j in 0..k {
            let col: f64 = (0..k).map(|i| p[i * k + j]).sum();
            if (col - 1.0).abs() > SUM_TOL {
                return Err(TransportError::NotDoublyStochastic {
                    msg: format!("column {j} sums to {col}"),
                });
            }
        }
        Ok(Self { k, p })
    }

    pub fn identity(k: usize) -> Self {
        Self::from_permutation(&Permutation::identity(k))
    }

    pub fn from_permutation(sigma: &Permutation) -> Self {
        let k = sigma.k();
        let mut p = vec![0.0; k * k];
        for j in 0..k {
            p[sigma.apply(j) * k + j] = 1.0;
        }
        Self { k, p }
    }

    /// Explicit convex combination of permutations; weights are normalized to
    /// sum to 1. This is the only generator the tests use, so ground-truth
    /// decomposability is always available.
    pub fn from_convex_combination(terms: &[(f64, Permutation)]) -> Result<Self, TransportError> {
        assert!(!terms.is_empty());
        let k = terms[0].1.k();
        let total: f64 = terms.iter().map(|(w, _)| *w).sum();
        if total <= 0.0 {
            return Err(TransportError::NotDoublyStochastic {
                msg: "nonpositive total weight".into(),
            });
        }
        let mut p = vec![0.0; k * k];
        for (w, sigma) in terms {
            if sigma.k() != k {
                return Err(TransportError::DimensionMismatch {
                    left: k,
                    right: sigma.k(),
                });
            }
            for j in 0..k {
                p[sigma.apply(j) * k + j] += w / total;
            }
        }
        Self::new(k, p)
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.k + j]
    }
}

/// Convex combination of permutation matrices reconstructing a doubly
/// stochastic matrix. Serializes as a JSON list of `{weight, perm}` objects
/// with 1-based permutation images.
#[derive(Debug, Clone)]
pub struct BirkhoffDecomposition {
    terms: Vec<(f64, Permutation)>,
}

impl Serialize for BirkhoffDecomposition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term {
            weight: f64,
            perm: Vec<usize>,
        }
        serializer.collect_seq(self.terms.iter().map(|(w, p)| Term {
            weight: *w,
            perm: p.one_based(),
        }))
    }
}

impl BirkhoffDecomposition {
    pub fn terms(&self) -> &[(f64, Permutation)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|(w, _)| *w).sum()
    }

    /// Entrywise reconstruction `sum_t w_t P_{sigma_t}`.
    pub fn reconstruct(&self, k: usize) -> SquareMatrix {
        let mut m = SquareMatrix::zeros(k);
        for (w, sigma) in &self.terms {
            for j in 0..k {
                let i = sigma.apply(j);
                m.set(i, j, m.get(i, j) + w);
            }
        }
        m
    }
}

/// Perfect matching of columns to rows on the strictly-positive support,
/// by augmenting paths in ascending column order. Returns `sigma` with
/// `sigma(j) = matched row of column j`.
fn positive_support_matching(p: &DoublyStochastic) -> Option<Vec<usize>> {
    let k = p.k();
    let mut col_of_row: Vec<Option<usize>> = vec![None; k];
    fn try_augment(
        p: &DoublyStochastic,
        j: usize,
        visited: &mut [bool],
        col_of_row: &mut [Option<usize>],
    ) -> bool {
        let k = p.k();
        for i in 0..k {
            if p.get(i, j) > ZERO_TOL && !visited[i] {
                visited[i] = true;
                let free = match col_of_row[i] {
                    None => true,
                    Some(j2) => try_augment(p, j2, visited, col_of_row),
                };
                if free {
                    col_of_row[i] = Some(j);
                    return true;
                }
            }
        }
        false
    }
    for j in 0..k {
        let mut visited = vec![false; k];
        if !try_augment(p, j, &mut visited, &mut col_of_row) {
            return None;
        }
    }
    let mut sigma = vec![0usize; k];
    for (i, cj) in col_of_row.iter().enumerate() {
        sigma[cj.expect("perfect matching")] = i;
    }
    Some(sigma)
}

/// Greedy peeling: find a permutation on the positive support, subtract its
/// minimal entry along the matching, repeat. Each peel zeroes at least one
/// entry, so the term count stays within `(k-1)^2 + 1`. Residual mass below
/// `k * 1e-10` at termination is folded into the last weight.
pub fn birkhoff_decompose(p: &DoublyStochastic) -> Result<BirkhoffDecomposition, TransportError> {
    let k = p.k();
    let mut residual = p.clone();
    let mut terms: Vec<(f64, Permutation)> = Vec::new();
    let mut peeled = 0.0f64;
    let stop_mass = (k as f64) * 1e-10;
    while 1.0 - peeled > stop_mass {
        let sigma = match positive_support_matching(&residual) {
            Some(s) => s,
            None => {
                return Err(TransportError::NumericalBreakdown {
                    msg: format!(
                        "no perfect matching on positive support with {} mass left",
                        1.0 - peeled
                    ),
                })
            }
        };
        let w = (0..k)
            .map(|j| residual.get(sigma[j], j))
            .fold(f64::INFINITY, f64::min);
        if w <= 0.0 {
            return Err(TransportError::NumericalBreakdown {
                msg: "matching with nonpositive minimum entry".into(),
            });
        }
        for j in 0..k {
            let i = sigma[j];
            let v = residual.get(i, j) - w;
            residual.p[i * k + j] = if v < ZERO_TOL { 0.0 } else { v };
        }
        peeled += w;
        terms.push((w, Permutation::new(sigma).expect("matching is a bijection")));
        if terms.len() > (k - 1) * (k - 1) + 1 {
            return Err(TransportError::NumericalBreakdown {
                msg: format!("exceeded {} terms", (k - 1) * (k - 1) + 1),
            });
        }
    }
    let leftover = 1.0 - peeled;
    if let Some(last) = terms.last_mut() {
        last.0 += leftover;
    } else {
        return Err(TransportError::NumericalBreakdown {
            msg: "empty decomposition".into(),
        });
    }
    Ok(BirkhoffDecomposition { terms })
}

/// Squared L2 discrepancy of `A` and `B` under the coupling `P`:
/// `sum_{i,i',j,j'} p_{ii'} p_{jj'} (A[i][j] - B[i'][j'])^2` with
/// `p = P / k`. For a permutation matrix this is `||A_{sigma,sigma} - B||_2^2`.
pub fn coupling_distance_sq(
    a: &SquareMatrix,
    b: &SquareMatrix,
    p: &DoublyStochastic,
) -> Result<f64, TransportError> {
    let k = a.k();
    if b.k() != k || p.k() != k {
        return Err(TransportError::DimensionMismatch {
            left: k,
            right: b.k().max(p.k()),
        });
    }
    let kf = k as f64;
    let mut sum = 0.0;
    for i in 0..k {
        for ip in 0..k {
            let pii = p.get(i, ip) / kf;
            if pii == 0.0 {
                continue;
            }
            for j in 0..k {
                for jp in 0..k {
                    let pjj = p.get(j, jp) / kf;
                    if pjj == 0.0 {
                        continue;
                    }
                    let d = a.get(i, j) - b.get(ip, jp);
                    sum += pii * pjj * d * d;
                }
            }
        }
    }
    Ok(sum)
}

/// Minimum of `||A_{sigma,tau} - B||_2` over all ordered pairs of
/// permutations appearing in the decomposition of `P`. Never exceeds
/// `sqrt(coupling_distance_sq)`, since a minimum is at most an expectation.
pub fn coupling_min_lower(
    a: &SquareMatrix,
    b: &SquareMatrix,
    p: &DoublyStochastic,
) -> Result<f64, TransportError> {
    let k = a.k();
    if b.k() != k || p.k() != k {
        return Err(TransportError::DimensionMismatch {
            left: k,
            right: b.k().max(p.k()),
        });
    }
    let decomp = birkhoff_decompose(p)?;
    let mut best = f64::INFINITY;
    for (_, sigma) in decomp.terms() {
        for (_, tau) in decomp.terms() {
            let mut sum = 0.0;
            for i in 0..k {
                for j in 0..k {
                    let d = a.get(sigma.apply(i), tau.apply(j)) - b.get(i, j);
                    sum += d * d;
                }
            }
            best = best.min((sum / (k * k) as f64).sqrt());
        }
    }
    Ok(best)
}
