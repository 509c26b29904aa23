//! Families of binary patterns that stay far apart under every row/column
//! relabeling, and their image as two-valued block matrices.
//!
//! Rejection sampling does the construction: draw uniform symmetric binary
//! matrices and keep those whose permuted Hamming distance to everything kept
//! so far clears the target. Within the exact-alignment cap the set is
//! certified by exhaustive re-verification; beyond it only a heuristic filter
//! is available and the set is explicitly marked uncertified.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::align::{
    permuted_hamming_min_capped, permuted_hamming_upper, AlignError, DEFAULT_PAIR_EXACT_CAP,
};
use crate::block::{q_matrix, BinarySymMatrix, BlockError, BlockMatrix, HardInstanceParams};
use crate::sampler::RngSeed;

/// Restarts used by the heuristic filter beyond the exact cap.
const HEURISTIC_FILTER_RESTARTS: usize = 8;

#[derive(Debug, Error)]
pub enum PackError {
    #[error("exhausted {attempts} attempts with {achieved} of {requested} members")]
    ExhaustedAttempts {
        achieved: usize,
        requested: usize,
        attempts: usize,
    },
    #[error("bad parameters: {msg}")]
    BadParameters { msg: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Block(#[from] BlockError),
}

/// A set of symmetric binary matrices with (when certified) a verified lower
/// bound on every pairwise permuted Hamming distance.
#[derive(Debug, Clone)]
pub struct PackingSet {
    pub k: usize,
    pub members: Vec<BinarySymMatrix>,
    /// Exact minimum over all pairs when `k` is within the exact cap,
    /// `None` when only the heuristic filter ran.
    pub certified_min_distance: Option<usize>,
    pub target: usize,
}

/// Serializable form: members as row-major bitstrings plus the certification
/// record.
#[derive(Debug, Serialize)]
pub struct PackingRecord {
    pub k: usize,
    pub count: usize,
    pub target: usize,
    pub certified: bool,
    pub certified_min_distance: Option<usize>,
    pub members: Vec<String>,
}

impl PackingSet {
    pub fn record(&self) -> PackingRecord {
        PackingRecord {
            k: self.k,
            count: self.members.len(),
            target: self.target,
            certified: self.certified_min_distance.is_some(),
            certified_min_distance: self.certified_min_distance,
            members: self.members.iter().map(|m| m.to_bitstring()).collect(),
        }
    }
}

/// Uniform symmetric binary matrix: independent fair bits on the upper
/// triangle including the diagonal.
pub fn random_symmetric_binary(k: usize, rng: &mut impl Rng) -> BinarySymMatrix {
    let upper: Vec<u8> = (0..k * (k + 1) / 2).map(|_| rng.gen_range(0..=1u8)).collect();
    BinarySymMatrix::from_upper_bits(k, &upper).expect("bits are 0/1")
}

/// Rejection-sample up to `count` symmetric binary matrices pairwise at
/// permuted Hamming distance at least `target` (counted over all k^2
/// positions). Deterministic given the seed.
pub fn sample_packing_set(
    k: usize,
    count: usize,
    target: usize,
    max_attempts: usize,
    seed: RngSeed,
) -> Result<PackingSet, PackError> {
    if count < 2 {
        return Err(PackError::BadParameters {
            msg: format!("count = {count} must be at least 2"),
        });
    }
    if target > k * k {
        return Err(PackError::BadParameters {
            msg: format!("target = {target} exceeds k^2 = {}", k * k),
        });
    }
    let exact = k <= DEFAULT_PAIR_EXACT_CAP;
    let mut rng = seed.rng();
    let mut members: Vec<BinarySymMatrix> = Vec::new();
    let mut attempts = 0usize;
    while members.len() < count {
        if attempts >= max_attempts {
            return Err(PackError::ExhaustedAttempts {
                achieved: members.len(),
                requested: count,
                attempts,
            });
        }
        attempts += 1;
        let candidate = random_symmetric_binary(k, &mut rng);
        let mut ok = true;
        for m in &members {
            let dist = if exact {
                permuted_hamming_min_capped(&candidate, m, DEFAULT_PAIR_EXACT_CAP)?
            } else {
                // Upper bound on the true minimum: can only reject candidates
                // that genuinely fail, but may admit ones that should fail.
                permuted_hamming_upper(&candidate, m, HEURISTIC_FILTER_RESTARTS, &mut rng)
            };
            if dist < target {
                ok = false;
                break;
            }
        }
        if ok {
            members.push(candidate);
        }
    }
    let certified_min_distance = if exact {
        let mut min_dist = usize::MAX;
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                min_dist = min_dist.min(permuted_hamming_min_capped(
                    &members[i],
                    &members[j],
                    DEFAULT_PAIR_EXACT_CAP,
                )?);
            }
        }
        Some(min_dist)
    } else {
        None
    };
    Ok(PackingSet {
        k,
        members,
        certified_min_distance,
        target,
    })
}

/// Map every member through the two-valued construction. For a certified set
/// the images are pairwise at two-permutation distance at least
/// `2 rho c eta sqrt(target) / k`.
pub fn packing_to_graphons(
    s: &PackingSet,
    params: &HardInstanceParams,
) -> Result<Vec<BlockMatrix>, PackError> {
    if s.k != params.k() {
        return Err(PackError::DimensionMismatch {
            left: s.k,
            right: params.k(),
        });
    }
    s.members
        .iter()
        .map(|b| q_matrix(b, params).map_err(PackError::from))
        .collect()
}

/// Union bound for the probability that two uniform symmetric draws admit an
/// alignment with fewer than `threshold` disagreements among the
/// `C = k(k-1)/2` strict-upper-triangle positions:
/// `exp(-2 (threshold - C/2)^2 / C) * (k!)^2`.
///
/// Note the counting convention: [`crate::align::permuted_hamming_min`]
/// counts all `k^2` positions, so an upper-triangle disagreement count of
/// `t` corresponds to an all-positions distance of `2t` plus however many
/// diagonal entries disagree. Vacuous (can exceed 1) until `k` is far beyond
/// desk scale.
pub fn chernoff_collision_bound(k: usize, threshold: usize) -> f64 {
    assert!(k >= 2, "need k >= 2");
    let c = (k * (k - 1) / 2) as f64;
    assert!(threshold as f64 <= c, "threshold must be at most C(k,2)");
    let dev = threshold as f64 - 0.5 * c;
    let factorial_sq = {
        let mut f = 1.0f64;
        for i in 2..=k {
            f *= i as f64;
        }
        f * f
    };
    (-2.0 * dev * dev / c).exp() * factorial_sq
}
