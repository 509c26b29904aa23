//! Baseline graphon estimators and the Monte-Carlo risk harness.
//!
//! The graphon distance itself has no finite algorithm, so risk is reported
//! as a bracket: a lower proxy (two-permutation metric on the common
//! refinement) and an upper proxy (joint-permutation bound on blow-ups).
//! The true distance lies between them for exact computations; when block
//! counts exceed the exact caps the lower proxy is the alternating heuristic
//! warm-started from the upper proxy's permutation, which keeps
//! `lower <= upper` by construction.

use rayon::prelude::*;
use thiserror::Error;

use crate::align::{
    delta2_upper_via_blowup_result, delta_hathat2_exact, delta_hathat2_heuristic_seeded,
    AlignError, DEFAULT_PAIR_EXACT_CAP,
};
use crate::block::{lcm, BlockError, BlockMatrix, SquareMatrix};
use crate::sampler::{empirical_edge_density, sample_graph, RngSeed, SampledGraph, SamplerError};

#[derive(Debug, Error)]
pub enum EstimError {
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error("k = {0} must be between 1 and n = {1}")]
    BadBlockCount(usize, usize),
}

/// Fitting diagnostics attached to every estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    /// Squared error between the adjacency matrix and the fitted block
    /// values, summed over unordered pairs. Zero for closed-form estimators.
    pub objective: f64,
    pub iterations: usize,
    pub restarts_used: usize,
}

impl FitDiagnostics {
    fn closed_form() -> Self {
        Self {
            objective: 0.0,
            iterations: 0,
            restarts_used: 0,
        }
    }
}

/// A fitted block-model estimate.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub matrix: BlockMatrix,
    pub k_hat: usize,
    pub meta: FitDiagnostics,
}

/// The estimators the harness knows by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// The constant-zero one-block estimate; ignores the input entirely.
    Trivial,
    /// The constant estimate at the empirical edge density.
    Density,
    /// Alternating least-squares block-model fit with `k` groups.
    BlockLsq { k: usize, restarts: usize },
    /// Returns the truth; for testing the risk pipeline.
    Oracle,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Trivial => "trivial",
            EstimatorKind::Density => "density",
            EstimatorKind::BlockLsq { .. } => "blocklsq",
            EstimatorKind::Oracle => "oracle",
        }
    }

    pub fn k_fit(&self, truth_k: usize) -> usize {
        match self {
            EstimatorKind::Trivial | EstimatorKind::Density => 1,
            EstimatorKind::BlockLsq { k, .. } => *k,
            EstimatorKind::Oracle => truth_k,
        }
    }
}

pub fn trivial_estimator(_g: &SampledGraph) -> Estimate {
    Estimate {
        matrix: BlockMatrix::constant(1, 0.0, 1.0).expect("constant zero is valid"),
        k_hat: 1,
        meta: FitDiagnostics::closed_form(),
    }
}

pub fn density_estimator(g: &SampledGraph) -> Result<Estimate, EstimError> {
    let d = empirical_edge_density(g)?;
    Ok(Estimate {
        matrix: BlockMatrix::constant(1, d, 1.0).expect("density lies in [0,1]"),
        k_hat: 1,
        meta: FitDiagnostics::closed_form(),
    })
}

pub fn oracle_estimator(truth: &BlockMatrix) -> Estimate {
    Estimate {
        matrix: truth.clone(),
        k_hat: truth.k(),
        meta: FitDiagnostics::closed_form(),
    }
}

struct LsqState {
    n: usize,
    k: usize,
    adj: Vec<f64>, // row-major n x n, symmetric 0/1, zero diagonal
}

impl LsqState {
    /// Block means over ordered pairs excluding the diagonal; empty
    /// group pairs get 0.
    fn block_means(&self, groups: &[usize]) -> SquareMatrix {
        let k = self.k;
        let mut sums = vec![0.0f64; k * k];
        let mut counts = vec![0usize; k * k];
        for i in 0..self.n {
            let gi = groups[i];
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let gj = groups[j];
                sums[gi * k + gj] += self.adj[i * self.n + j];
                counts[gi * k + gj] += 1;
            }
        }
        let data = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect();
        SquareMatrix::new(k, data)
    }

    /// Squared error over unordered pairs.
    fn objective(&self, groups: &[usize], means: &SquareMatrix) -> f64 {
        let mut obj = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let d = self.adj[i * self.n + j] - means.get(groups[i], groups[j]);
                obj += d * d;
            }
        }
        obj
    }

    /// One greedy pass of node reassignments against fixed block values.
    /// Ties break toward the current group, then the lowest group index.
    fn reassign_pass(&self, groups: &mut [usize], means: &SquareMatrix) -> bool {
        let mut changed = false;
        for i in 0..self.n {
            let cost = |c: usize, groups: &[usize]| -> f64 {
                let mut s = 0.0;
                for j in 0..self.n {
                    if j == i {
                        continue;
                    }
                    let d = self.adj[i * self.n + j] - means.get(c, groups[j]);
                    s += d * d;
                }
                s
            };
            let mut best_c = groups[i];
            let mut best_cost = cost(best_c, groups);
            for c in 0..self.k {
                if c == groups[i] {
                    continue;
                }
                let cc = cost(c, groups);
                if cc < best_cost {
                    best_cost = cc;
                    best_c = c;
                }
            }
            if best_c != groups[i] {
                groups[i] = best_c;
                changed = true;
            }
        }
        changed
    }
}

/// Alternating least-squares block-model fit: random group assignment, then
/// alternate computing block means with greedy one-pass reassignment until a
/// pass changes nothing or 100 iterations elapse; best of `restarts` random
/// initializations. The objective is nonincreasing across iterations (checked
/// each iteration).
pub fn block_least_squares(
    g: &SampledGraph,
    k: usize,
    restarts: usize,
    seed: RngSeed,
) -> Result<Estimate, EstimError> {
    use rand::Rng;
    let n = g.n();
    if k < 1 || k > n {
        return Err(EstimError::BadBlockCount(k, n));
    }
    let mut adj = vec![0.0f64; n * n];
    for &(i, j) in g.edges() {
        adj[i as usize * n + j as usize] = 1.0;
        adj[j as usize * n + i as usize] = 1.0;
    }
    let state = LsqState { n, k, adj };
    let mut rng = seed.rng();

    let mut best: Option<(f64, Vec<usize>, usize)> = None;
    let restarts = restarts.max(1);
    for _ in 0..restarts {
        let mut groups: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let mut iters = 0usize;
        let mut prev_obj = f64::INFINITY;
        loop {
            let means = state.block_means(&groups);
            let obj = state.objective(&groups, &means);
            assert!(
                obj <= prev_obj + 1e-9,
                "objective increased: {prev_obj} -> {obj}"
            );
            prev_obj = obj;
            iters += 1;
            let changed = state.reassign_pass(&mut groups, &means);
            if !changed || iters >= 100 {
                break;
            }
        }
        let means = state.block_means(&groups);
        let obj = state.objective(&groups, &means);
        match &best {
            Some((b, _, _)) if obj >= *b => {}
            _ => best = Some((obj, groups, iters)),
        }
    }
    let (objective, groups, iterations) = best.expect("restarts >= 1");
    let means = state.block_means(&groups);
    let entries: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| means.get(a, b).clamp(0.0, 1.0)).collect())
        .collect();
    Ok(Estimate {
        matrix: BlockMatrix::new(&entries, 1.0)?,
        k_hat: k,
        meta: FitDiagnostics {
            objective,
            iterations,
            restarts_used: restarts,
        },
    })
}

/// Run the named estimator. The truth is consulted only by the oracle.
pub fn estimate(
    kind: EstimatorKind,
    g: &SampledGraph,
    truth: &BlockMatrix,
    seed: RngSeed,
) -> Result<Estimate, EstimError> {
    match kind {
        EstimatorKind::Trivial => Ok(trivial_estimator(g)),
        EstimatorKind::Density => density_estimator(g),
        EstimatorKind::BlockLsq { k, restarts } => block_least_squares(g, k, restarts, seed),
        EstimatorKind::Oracle => Ok(oracle_estimator(truth)),
    }
}

/// Knobs for the proxy computation inside the risk loop.
#[derive(Debug, Clone, Copy)]
pub struct RiskOptions {
    /// Blow-up factor for the upper proxy.
    pub blowup_m: usize,
    /// Random restarts for heuristic searches.
    pub heuristic_restarts: usize,
}

impl Default for RiskOptions {
    fn default() -> Self {
        Self {
            blowup_m: 1,
            heuristic_restarts: 10,
        }
    }
}

/// Risk measurements for one `(estimator, truth, n)` point.
#[derive(Debug, Clone)]
pub struct RiskSummary {
    pub trials: usize,
    pub mean_lower: f64,
    pub se_lower: f64,
    pub mean_upper: f64,
    pub se_upper: f64,
    pub per_trial_lower: Vec<f64>,
    pub per_trial_upper: Vec<f64>,
    /// True when every trial's lower proxy came from the exact solver.
    pub lower_exact: bool,
}

/// Distance bracket between an estimate and the truth after putting both on
/// their common refinement.
pub fn risk_bracket(
    estimate: &BlockMatrix,
    truth: &BlockMatrix,
    opts: &RiskOptions,
    seed: RngSeed,
) -> Result<(f64, f64, bool), EstimError> {
    let l = lcm(estimate.k(), truth.k());
    let a = estimate.blow_up(l / estimate.k())?;
    let b = truth.blow_up(l / truth.k())?;
    let upper = delta2_upper_via_blowup_result(
        a.matrix(),
        b.matrix(),
        opts.blowup_m,
        opts.heuristic_restarts,
        seed,
    )?;
    if l <= DEFAULT_PAIR_EXACT_CAP {
        let lower = delta_hathat2_exact(a.matrix(), b.matrix())?;
        Ok((lower.distance, upper.distance, true))
    } else {
        // Heuristic two-permutation search on the same refinement the upper
        // proxy used, warm-started from its permutation so the bracket cannot
        // invert.
        let am = a.matrix().blow_up(opts.blowup_m)?;
        let bm = b.matrix().blow_up(opts.blowup_m)?;
        let mut rng = seed.with_stream(seed.stream ^ 0x9e37_79b9_7f4a_7c15).rng();
        let lower = delta_hathat2_heuristic_seeded(
            &am,
            &bm,
            &[&upper.row_perm],
            opts.heuristic_restarts,
            &mut rng,
        );
        Ok((lower.distance, upper.distance, false))
    }
}

/// Monte-Carlo risk: sample `trials` graphs, fit, and bracket each fit's
/// distance to the truth. Trial `t` uses streams `base + 3t` (sampling),
/// `base + 3t + 1` (fitting) and `base + 3t + 2` (proxies); trials run in
/// parallel and aggregate in trial order, so results are independent of the
/// thread count.
pub fn empirical_risk(
    kind: EstimatorKind,
    truth: &BlockMatrix,
    n: usize,
    trials: usize,
    seed: RngSeed,
    opts: &RiskOptions,
) -> Result<RiskSummary, EstimError> {
    assert!(trials >= 1);
    let results: Result<Vec<(f64, f64, bool)>, EstimError> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let base = seed.stream + 3 * t as u64;
            let g = sample_graph(truth, n, seed.with_stream(base), false);
            let est = estimate(kind, &g, truth, seed.with_stream(base + 1))?;
            risk_bracket(&est.matrix, truth, opts, seed.with_stream(base + 2))
        })
        .collect();
    let results = results?;
    let lower: Vec<f64> = results.iter().map(|r| r.0).collect();
    let upper: Vec<f64> = results.iter().map(|r| r.1).collect();
    let lower_exact = results.iter().all(|r| r.2);
    let (mean_lower, se_lower) = mean_se(&lower);
    let (mean_upper, se_upper) = mean_se(&upper);
    Ok(RiskSummary {
        trials,
        mean_lower,
        se_lower,
        mean_upper,
        se_upper,
        per_trial_lower: lower,
        per_trial_upper: upper,
        lower_exact,
    })
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::q_matrix;
    use crate::block::{BinarySymMatrix, HardInstanceParams};
    use crate::packing::random_symmetric_binary;

    fn complete_graph(n: usize) -> SampledGraph {
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                edges.push((i, j));
            }
        }
        SampledGraph::new(n, edges)
    }

    #[test]
    fn trivial_is_constant_zero() {
        let g = complete_graph(5);
        let e = trivial_estimator(&g);
        assert_eq!(e.k_hat, 1);
        assert_eq!(e.matrix.get(0, 0), 0.0);
    }

    #[test]
    fn density_extremes() {
        let empty = SampledGraph::new(6, vec![]);
        assert_eq!(density_estimator(&empty).unwrap().matrix.get(0, 0), 0.0);
        let full = complete_graph(6);
        assert_eq!(density_estimator(&full).unwrap().matrix.get(0, 0), 1.0);
        let tiny = SampledGraph::new(1, vec![]);
        assert!(density_estimator(&tiny).is_err());
    }

    #[test]
    fn density_tracks_edge_probability() {
        let w = BlockMatrix::constant(1, 0.3, 1.0).unwrap();
        let n = 2000;
        let g = sample_graph(&w, n, RngSeed::new(21, 0), false);
        let d = density_estimator(&g).unwrap().matrix.get(0, 0);
        let trials = (n * (n - 1) / 2) as f64;
        let sd = (0.3 * 0.7 / trials).sqrt();
        assert!((d - 0.3).abs() <= 4.0 * sd);
    }

    #[test]
    fn lsq_complete_graph_single_block() {
        let g = complete_graph(8);
        let e = block_least_squares(&g, 1, 1, RngSeed::new(0, 0)).unwrap();
        assert_eq!(e.matrix.get(0, 0), 1.0);
        assert_eq!(e.meta.objective, 0.0);
    }

    #[test]
    fn lsq_empty_graph_any_k() {
        let g = SampledGraph::new(10, vec![]);
        for k in [1, 2, 3] {
            let e = block_least_squares(&g, k, 2, RngSeed::new(1, 0)).unwrap();
            for a in 0..k {
                for b in 0..k {
                    assert_eq!(e.matrix.get(a, b), 0.0);
                }
            }
        }
    }

    #[test]
    fn lsq_rejects_bad_k() {
        let g = complete_graph(4);
        assert!(block_least_squares(&g, 5, 1, RngSeed::new(0, 0)).is_err());
        assert!(block_least_squares(&g, 0, 1, RngSeed::new(0, 0)).is_err());
    }

    #[test]
    fn lsq_matches_exhaustive_partition_search_mostly() {
        // Exhaustive over all 2^n two-group assignments.
        let n = 8usize;
        let trials = 100;
        let mut matched = 0;
        for t in 0..trials {
            let w = BlockMatrix::new(&[vec![0.9, 0.1], vec![0.1, 0.8]], 1.0).unwrap();
            let g = sample_graph(&w, n, RngSeed::new(3000 + t, 0), false);
            let fit = block_least_squares(&g, 2, 16, RngSeed::new(4000 + t, 0)).unwrap();

            let mut adj = vec![0.0f64; n * n];
            for &(i, j) in g.edges() {
                adj[i as usize * n + j as usize] = 1.0;
                adj[j as usize * n + i as usize] = 1.0;
            }
            let state = LsqState { n, k: 2, adj };
            let mut best = f64::INFINITY;
            for mask in 0..(1u32 << n) {
                let groups: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
                let means = state.block_means(&groups);
                best = best.min(state.objective(&groups, &means));
            }
            assert!(
                fit.meta.objective >= best - 1e-9,
                "alternation beat exhaustive: {} < {best}",
                fit.meta.objective
            );
            if fit.meta.objective <= best + 1e-9 {
                matched += 1;
            }
        }
        assert!(matched >= 80, "matched only {matched}/100");
    }

    #[test]
    fn oracle_risk_is_zero() {
        let truth = BlockMatrix::new(&[vec![0.6, 0.2], vec![0.2, 0.5]], 1.0).unwrap();
        let s = empirical_risk(
            EstimatorKind::Oracle,
            &truth,
            30,
            5,
            RngSeed::new(7, 0),
            &RiskOptions::default(),
        )
        .unwrap();
        assert_eq!(s.mean_lower, 0.0);
        assert_eq!(s.mean_upper, 0.0);
        assert!(s.lower_exact);
    }

    #[test]
    fn trivial_risk_against_constant_truth_is_rho() {
        let rho = 0.35;
        let truth = BlockMatrix::constant(3, rho, rho).unwrap();
        let s = empirical_risk(
            EstimatorKind::Trivial,
            &truth,
            20,
            4,
            RngSeed::new(8, 0),
            &RiskOptions::default(),
        )
        .unwrap();
        for t in 0..4 {
            assert!((s.per_trial_lower[t] - rho).abs() < 1e-12);
            assert!((s.per_trial_upper[t] - rho).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_risk_against_two_valued_truth_is_its_norm() {
        // Alignment cannot help against a constant estimate: every
        // permutation gives the same distance, the norm of the truth.
        let b = BinarySymMatrix::new(&[
            vec![1, 0, 1, 0],
            vec![0, 1, 1, 1],
            vec![1, 1, 0, 0],
            vec![0, 1, 0, 1],
        ])
        .unwrap();
        let params = HardInstanceParams::new(1, 4, 1.0, 0.25).unwrap();
        let truth = q_matrix(&b, &params).unwrap();
        let want = truth.normalized_l2();
        // bounded by the larger of the two values, hence by rho
        assert!(want <= params.rho() * (0.5 + params.c() * params.eta()));
        let s = empirical_risk(
            EstimatorKind::Trivial,
            &truth,
            16,
            3,
            RngSeed::new(9, 0),
            &RiskOptions::default(),
        )
        .unwrap();
        for t in 0..3 {
            assert!((s.per_trial_lower[t] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bracket_never_inverts() {
        let mut rng = RngSeed::new(31, 0).rng();
        for trial in 0..10 {
            // k = 8 exceeds the exact pair cap, exercising the warm-started
            // heuristic branch.
            let b = random_symmetric_binary(8, &mut rng);
            let params = HardInstanceParams::new(64, 8, 0.1, 0.25).unwrap();
            let truth = q_matrix(&b, &params).unwrap();
            let g = sample_graph(&truth, 40, RngSeed::new(100 + trial, 0), false);
            let est = block_least_squares(&g, 8, 2, RngSeed::new(200 + trial, 0)).unwrap();
            let (lo, hi, exact) = risk_bracket(
                &est.matrix,
                &truth,
                &RiskOptions::default(),
                RngSeed::new(300 + trial, 0),
            )
            .unwrap();
            assert!(!exact);
            assert!(lo <= hi + 1e-9, "bracket inverted: {lo} > {hi}");
        }
    }

    #[test]
    fn common_refinement_keeps_zero_distance() {
        // Estimate equals the truth but at a different block count: blowing
        // both to the lcm must keep both proxies at zero.
        let truth = BlockMatrix::constant(3, 0.4, 1.0).unwrap();
        let est = BlockMatrix::constant(2, 0.4, 1.0).unwrap();
        let (lo, hi, _) = risk_bracket(
            &est,
            &truth,
            &RiskOptions::default(),
            RngSeed::new(1, 0),
        )
        .unwrap();
        assert!(lo < 1e-12 && hi < 1e-12);
    }

    #[test]
    fn risk_is_deterministic_across_thread_counts() {
        let truth = BlockMatrix::new(&[vec![0.7, 0.1], vec![0.1, 0.6]], 1.0).unwrap();
        let run = || {
            empirical_risk(
                EstimatorKind::BlockLsq { k: 2, restarts: 2 },
                &truth,
                24,
                6,
                RngSeed::new(55, 0),
                &RiskOptions::default(),
            )
            .unwrap()
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a.per_trial_lower, b.per_trial_lower);
        assert_eq!(a.per_trial_upper, b.per_trial_upper);
    }
}
