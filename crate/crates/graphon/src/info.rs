//! KL divergence machinery, the Fano evaluator, and the contiguity-condition
//! checker for planted partitions.
//!
//! All divergences are in nats (natural log throughout). Exact computations
//! enumerate the full graph distribution and are guarded to tiny `n`.

use serde::Serialize;
use thiserror::Error;

use crate::block::{common_refinement, BlockMatrix, HardInstanceParams};

/// Hard caps on exact enumeration: `n <= 5` and `k^n <= 10^6` keep the tables
/// in memory and the runtime in seconds.
pub const MAX_EXACT_N: usize = 5;
pub const MAX_LABEL_ASSIGNMENTS: u128 = 1_000_000;

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("too large to enumerate: n = {n}, k = {k}")]
    TooLargeToEnumerate { n: usize, k: usize },
    #[error("KL divergence is infinite: first distribution has mass where second has none")]
    InfiniteDivergence,
    #[error("hypothesis violated: all entries must lie in [1/2, 3/4], found {value}")]
    HypothesisViolated { value: f64 },
    #[error("packing count {0} must be at least 2")]
    PackingTooSmall(f64),
    #[error("degenerate parameters: {msg}")]
    DegenerateParameters { msg: String },
}

/// The exact distribution over all `2^C(n,2)` labeled graphs induced by a
/// block matrix. Graphs are indexed by an edge bitmask; bit `e` is pair `e`
/// in lexicographic `(i, j)` order with `i < j`.
#[derive(Debug, Clone)]
pub struct GraphDistribution {
    n: usize,
    log_probs: Vec<f64>,
}

impl GraphDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_pairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn support_size(&self) -> usize {
        self.log_probs.len()
    }

    pub fn log_prob(&self, mask: usize) -> f64 {
        self.log_probs[mask]
    }

    pub fn prob(&self, mask: usize) -> f64 {
        self.log_probs[mask].exp()
    }

    pub fn total_mass(&self) -> f64 {
        self.log_probs.iter().map(|lp| lp.exp()).sum()
    }
}

/// Mixture over uniform labels: `P(G) = k^{-n} sum_labels prod_pairs
/// p^edge (1-p)^(1-edge)`. Enumerates all `k^n` label vectors; per vector the
/// conditional factorizes over pairs and is expanded by iterative doubling.
pub fn exact_graph_distribution(w: &BlockMatrix, n: usize) -> Result<GraphDistribution, InfoError> {
    let k = w.k();
    if n > MAX_EXACT_N || (k as u128).checked_pow(n as u32).is_none_or(|v| v > MAX_LABEL_ASSIGNMENTS) {
        return Err(InfoError::TooLargeToEnumerate { n, k });
    }
    assert!(n >= 1);
    let m = n * (n - 1) / 2;
    let masks = 1usize << m;
    let mut acc = vec![0.0f64; masks];
    let label_weight = (k as f64).powi(-(n as i32));
    let mut labels = vec![0usize; n];
    loop {
        // per-pair probabilities for this label vector, lexicographic (i, j)
        let mut pair_probs = Vec::with_capacity(m);
        for i in 0..n {
            for j in (i + 1)..n {
                pair_probs.push(w.get(labels[i], labels[j]));
            }
        }
        let mut cond = vec![1.0f64; 1];
        for &p in &pair_probs {
            let mut next = vec![0.0f64; cond.len() * 2];
            for (mask, &c) in cond.iter().enumerate() {
                next[mask] = c * (1.0 - p);
                next[mask | cond.len()] = c * p;
            }
            cond = next;
        }
        for (mask, &c) in cond.iter().enumerate() {
            acc[mask] += label_weight * c;
        }
        // odometer over label vectors
        let mut pos = 0;
        loop {
            if pos == n {
                break;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
        if pos == n {
            break;
        }
    }
    debug_assert!(
        (acc.iter().sum::<f64>() - 1.0).abs() < 1e-9,
        "enumerated mass drifted from 1"
    );
    let log_probs = acc.iter().map(|&p| p.ln()).collect();
    Ok(GraphDistribution { n, log_probs })
}

/// Exact KL divergence `D(G_n(W) || G_n(W'))` in nats by full enumeration.
/// Errors with [`InfoError::InfiniteDivergence`] when `W` puts mass on a
/// graph that `W'` cannot produce; [`exact_kl_lenient`] returns infinity
/// instead.
pub fn exact_kl(w: &BlockMatrix, wp: &BlockMatrix, n: usize) -> Result<f64, InfoError> {
    let v = exact_kl_lenient(w, wp, n)?;
    if v.is_infinite() {
        return Err(InfoError::InfiniteDivergence);
    }
    Ok(v)
}

pub fn exact_kl_lenient(w: &BlockMatrix, wp: &BlockMatrix, n: usize) -> Result<f64, InfoError> {
    let dp = exact_graph_distribution(w, n)?;
    let dq = exact_graph_distribution(wp, n)?;
    let mut kl = 0.0f64;
    for mask in 0..dp.support_size() {
        let p = dp.prob(mask);
        if p <= 0.0 {
            continue;
        }
        let lq = dq.log_prob(mask);
        if lq == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        kl += p * (dp.log_prob(mask) - lq);
    }
    Ok(kl.max(0.0))
}

/// The KL upper bound `8 n^2 ||W - W'||_2^2`, valid for graphons with all
/// values in `[1/2, 3/4]`. Inputs with different block counts are compared on
/// their common refinement.
pub fn kl_upper_bound(w: &BlockMatrix, wp: &BlockMatrix, n: usize) -> Result<f64, InfoError> {
    for m in [w, wp] {
        let lo = m.matrix().min_entry();
        let hi = m.matrix().max_entry();
        if lo < 0.5 - 1e-12 {
            return Err(InfoError::HypothesisViolated { value: lo });
        }
        if hi > 0.75 + 1e-12 {
            return Err(InfoError::HypothesisViolated { value: hi });
        }
    }
    let (a, b) = common_refinement(w, wp).expect("blow-up cannot fail");
    let diff = a
        .matrix()
        .sub(b.matrix())
        .expect("common refinement gives equal dimensions");
    let l2 = diff.normalized_l2();
    Ok(8.0 * (n * n) as f64 * l2 * l2)
}

/// KL-diameter bound for the two-valued hard family.
///
/// Both fields are direct formula evaluations; unlike [`kl_upper_bound`] no
/// value-range hypothesis is checked here, since the family's entries
/// `rho*(1/2 +- c*eta)` generally sit below the `[1/2, 3/4]` window the
/// quadratic bound is proved on.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QFamilyKlBound {
    /// `8 n^2 (2 c rho eta)^2`.
    pub raw: f64,
    /// `32 c^2 k^2 rho`; equals `raw` when `eta < 1` and dominates it when
    /// `eta = 1`.
    pub simplified: f64,
}

pub fn kl_diameter_qfamily(params: &HardInstanceParams) -> QFamilyKlBound {
    let n = params.n() as f64;
    let k = params.k() as f64;
    let rho = params.rho();
    let c = params.c();
    let eta = params.eta();
    let gap = 2.0 * c * rho * eta;
    QFamilyKlBound {
        raw: 8.0 * n * n * gap * gap,
        simplified: 32.0 * c * c * k * k * rho,
    }
}

/// Inputs to the Fano evaluator: a KL diameter in nats, a packing count (real
/// valued, at least 2), and the packing radius the count was certified at.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FanoInput {
    pub kl_diameter: f64,
    pub packing_count: f64,
    pub epsilon: f64,
}

/// Fano's inequality: a minimax error-probability lower bound
/// `1 - (kl_diameter + 1) / ln(packing_count)`. May be negative (vacuous);
/// callers clamp at 0 for interpretation.
pub fn fano_bound(input: &FanoInput) -> Result<f64, InfoError> {
    if input.packing_count < 2.0 || input.packing_count.is_nan() {
        return Err(InfoError::PackingTooSmall(input.packing_count));
    }
    assert!(input.kl_diameter >= 0.0, "KL diameter must be nonnegative");
    Ok(1.0 - (input.kl_diameter + 1.0) / input.packing_count.ln())
}

/// Parameters and verdict of the planted-partition-vs-Erdos-Renyi contiguity
/// condition at a given `(n, k, rho)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContiguityReport {
    pub epsilon: f64,
    pub q: f64,
    pub p: f64,
    /// Expected degree of the planted-partition model.
    pub d: f64,
    pub lambda: f64,
    /// Whether `d * lambda^2 * (k-1) / 2 <= ln(k-1)` holds, the regime in
    /// which the two models cannot be told apart by any test.
    pub condition_holds: bool,
    /// The distance scale `epsilon / sqrt(k)` separating the two models.
    pub separation: f64,
}

/// Evaluate the contiguity condition: with `eps = min(sqrt(rho k ln k / n),
/// rho)`, `q = (k-1)/(2 k^2) * n eps^2 / ln(k-1)` and `p = eps + q`, the
/// planted partition with within/between probabilities `(p, q)` is compared
/// against the Erdos-Renyi model with the same expected degree `d`.
pub fn contiguity_report(n: usize, k: usize, rho: f64) -> Result<ContiguityReport, InfoError> {
    if k < 3 {
        return Err(InfoError::DegenerateParameters {
            msg: format!("k = {k} but the condition needs ln(k-1) > 0, so k >= 3"),
        });
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(InfoError::DegenerateParameters {
            msg: format!("rho = {rho} outside (0, 1]"),
        });
    }
    let nf = n as f64;
    let kf = k as f64;
    let epsilon = (rho * kf * kf.ln() / nf).sqrt().min(rho);
    let q = 0.5 * (kf - 1.0) / (kf * kf) * nf * epsilon * epsilon / (kf - 1.0).ln();
    let p = epsilon + q;
    if p > 1.0 {
        return Err(InfoError::DegenerateParameters {
            msg: format!("p = {p} exceeds 1"),
        });
    }
    let d = nf * (p + (kf - 1.0) * q) / kf;
    if d <= 0.0 {
        return Err(InfoError::DegenerateParameters {
            msg: "expected degree is zero".into(),
        });
    }
    let lambda = nf * (p - q) / (d * kf);
    let condition_holds = d * lambda * lambda * (kf - 1.0) / 2.0 <= (kf - 1.0).ln();
    Ok(ContiguityReport {
        epsilon,
        q,
        p,
        d,
        lambda,
        condition_holds,
        separation: epsilon / kf.sqrt(),
    })
}
