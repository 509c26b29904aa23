//! Closed-form minimax rate curves for k-block, rho-bounded graphon
//! estimation, with all hidden constants set to 1. These are unit-constant
//! shape curves for comparing regimes and orderings, never absolute error
//! predictions.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RateError {
    #[error("invalid rate query: need 2 <= k <= n and 0 < rho <= 1, got n = {n}, k = {k}, rho = {rho}")]
    InvalidQuery { n: usize, k: usize, rho: f64 },
}

/// A point on the `(n, k, rho)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateQuery {
    n: usize,
    k: usize,
    rho: f64,
}

impl RateQuery {
    pub fn new(n: usize, k: usize, rho: f64) -> Result<Self, RateError> {
        if !(k >= 2 && k <= n && rho > 0.0 && rho <= 1.0) {
            return Err(RateError::InvalidQuery { n, k, rho });
        }
        Ok(Self { n, k, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// The lower rate and its three summands. The total is
/// `min(rho, quarter_root + block_count + log_term)`; whenever
/// `rho <= k^2/n^2` the block-count term alone reaches `rho` and the total
/// clamps there, the regime where the constant-zero estimator is already
/// optimal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LowerRate {
    pub total: f64,
    /// The clamp `rho`: no estimator can be forced to err by more than the
    /// densest possible signal.
    pub sparse_floor: f64,
    /// `rho * (k/n)^(1/4)`.
    pub quarter_root_term: f64,
    /// `sqrt(rho * k^2 / n^2)`.
    pub block_count_term: f64,
    /// `sqrt(rho * ln(min(k, rho*n + 2)) / n)`.
    pub log_term: f64,
}

pub fn lower_rate(q: &RateQuery) -> LowerRate {
    let n = q.n as f64;
    let k = q.k as f64;
    let rho = q.rho;
    let quarter_root_term = rho * (k / n).powf(0.25);
    let block_count_term = (rho * k * k / (n * n)).sqrt();
    let log_arg = k.min(rho * n + 2.0);
    let log_term = (rho * log_arg.ln() / n).sqrt();
    let total = rho.min(quarter_root_term + block_count_term + log_term);
    LowerRate {
        total,
        sparse_floor: rho,
        quarter_root_term,
        block_count_term,
        log_term,
    }
}

/// The matching upper rate: identical except the log factor is `ln k`.
pub fn upper_rate(q: &RateQuery) -> f64 {
    let n = q.n as f64;
    let k = q.k as f64;
    let rho = q.rho;
    let sum = rho * (k / n).powf(0.25)
        + (rho * k * k / (n * n)).sqrt()
        + (rho * k.ln() / n).sqrt();
    rho.min(sum)
}

/// The worst-case multiplicative gap between the two curves:
/// `max(ln k / ln(rho*n + 2), 1)`.
pub fn rate_gap_factor(q: &RateQuery) -> f64 {
    let k = q.k as f64;
    let n = q.n as f64;
    (k.ln() / (q.rho * n + 2.0).ln()).max(1.0)
}
