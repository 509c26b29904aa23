//! A laboratory for block-graphon (stochastic block model) estimation.
//!
//! The crate provides, end to end, the pieces needed to probe how well
//! graphons can be estimated from a single sampled graph:
//!
//! * [`block`]: validated block matrices, two-valued hard-instance
//!   constructions, planted partitions, blow-ups, and matrix file I/O.
//! * [`sampler`]: seeded W-random graph sampling with dense and sparse paths.
//! * [`align`]: the permutation-alignment metrics (joint and independent
//!   row/column relabelings), exact within configurable caps and heuristic
//!   beyond them, plus permuted Hamming distance and a certified upper bound
//!   on the graphon distance via blow-ups.
//! * [`transport`]: doubly stochastic couplings, their decomposition into
//!   permutations, and the coupling identity linking the two.
//! * [`info`]: exact KL divergence at tiny sizes, the quadratic KL upper
//!   bound, the Fano evaluator, and the planted-partition contiguity check.
//! * [`packing`]: rejection-sampled families of binary patterns far apart
//!   under every alignment, certified exhaustively at small `k`.
//! * [`estimators`]: baseline estimators and a Monte-Carlo risk harness that
//!   brackets the (uncomputable) graphon-distance risk between a certified
//!   lower and upper proxy.
//!
//! Everything is deterministic given an [`sampler::RngSeed`]; concurrent
//! work uses disjoint streams and order-stable reductions.

pub mod align;
pub mod block;
pub mod estimators;
pub mod info;
pub mod packing;
pub mod sampler;
pub mod transport;

pub use align::{
    apply_perms, delta2_upper_via_blowup, delta2_upper_via_blowup_result, delta_hat2_exact,
    delta_hat2_exact_capped, delta_hathat2_exact, delta_hathat2_exact_capped,
    delta_hathat2_heuristic, permuted_hamming_min, permuted_hamming_min_capped, AlignError,
    AlignResult, Permutation, DEFAULT_JOINT_EXACT_CAP, DEFAULT_PAIR_EXACT_CAP,
};
pub use block::{
    common_refinement, l2_distance, lcm, matrix_from_csv, matrix_from_json, matrix_from_path,
    matrix_to_csv, matrix_to_json, matrix_to_path, planted_partition, q_matrix, BinarySymMatrix,
    BlockError, BlockMatrix, HardInstanceParams, MatrixIoError, SquareMatrix,
};
pub use estimators::{
    block_least_squares, density_estimator, empirical_risk, estimate, oracle_estimator,
    risk_bracket, trivial_estimator, EstimError, Estimate, EstimatorKind, FitDiagnostics,
    RiskOptions, RiskSummary,
};
pub use info::{
    contiguity_report, exact_graph_distribution, exact_kl, exact_kl_lenient, fano_bound,
    kl_diameter_qfamily, kl_upper_bound, ContiguityReport, FanoInput, GraphDistribution,
    InfoError, QFamilyKlBound,
};
pub use packing::{
    chernoff_collision_bound, packing_to_graphons, random_symmetric_binary, sample_packing_set,
    PackError, PackingRecord, PackingSet,
};
pub use sampler::{
    empirical_edge_density, sample_graph, sample_graph_mode, sample_labels, GraphSidecar,
    RngSeed, SampleMode, SampledGraph, SamplerError,
};
pub use transport::{
    birkhoff_decompose, coupling_distance_sq, coupling_min_lower, BirkhoffDecomposition,
    DoublyStochastic, TransportError,
};
