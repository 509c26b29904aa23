//! The experiment harness: a JSON config describing a truth family, a set of
//! estimators, and an `(n, k, rho)` grid is expanded into Monte-Carlo risk
//! measurements written as CSV, together with a manifest recording the config
//! hash, code version, and runtime.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use graphon::{
    empirical_risk, matrix_from_path, q_matrix, sample_packing_set, BlockMatrix, EstimatorKind,
    HardInstanceParams, RiskOptions, RngSeed,
};

use crate::rates::{lower_rate, upper_rate, RateQuery};
use crate::CliError;

/// Stream reserved for drawing the binary pattern of a two-valued truth; it
/// depends only on `(seed, k)`, so the pattern is fixed across an
/// `(n, rho)` sweep.
const PACKING_STREAM_BASE: u64 = 1 << 32;
/// Risk records allocate stream blocks above this base, spaced by the number
/// of streams one record consumes.
const RECORD_STREAM_BASE: u64 = 1 << 34;

pub const CSV_SCHEMA_COMMENT: &str = "# graphon-risk-csv v1";
pub const CSV_HEADER: &str = "estimator,n,k_true,k_fit,rho,trials,mean_lower_proxy,se_lower,mean_upper_proxy,se_upper,lower_rate_value,upper_rate_value,seed";

/// Truth family, built per grid point.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSpec {
    /// Two-valued matrix from a packing-set member: entries
    /// `rho*(1/2 +- c*eta)` on a binary pattern drawn once per `(seed, k)`.
    QMatrix {
        #[serde(default = "default_c")]
        c: f64,
        /// How many members to sample; the packing target defaults to
        /// `floor(k^2/8)`.
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default)]
        target: Option<usize>,
        #[serde(default = "default_max_attempts")]
        max_attempts: usize,
        /// Which member to use as the truth pattern.
        #[serde(default)]
        member: usize,
    },
    /// Planted partition with probabilities scaled by the grid `rho`:
    /// within-group `rho * p_scale`, between-group `rho * q_scale`.
    Planted { p_scale: f64, q_scale: f64 },
    /// A fixed matrix from disk; the grid supplies only `n`.
    File { path: PathBuf },
}

fn default_c() -> f64 {
    0.25
}
fn default_count() -> usize {
    2
}
fn default_max_attempts() -> usize {
    200_000
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub name: String,
    #[serde(default)]
    pub k_fit: Option<usize>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    3
}

impl EstimatorSpec {
    pub fn kind(&self, k_true: usize) -> Result<EstimatorKind, CliError> {
        match self.name.as_str() {
            "trivial" => Ok(EstimatorKind::Trivial),
            "density" => Ok(EstimatorKind::Density),
            "blocklsq" => Ok(EstimatorKind::BlockLsq {
                k: self.k_fit.unwrap_or(k_true),
                restarts: self.restarts,
            }),
            "oracle" => Ok(EstimatorKind::Oracle),
            other => Err(CliError::Config(format!(
                "unknown estimator {other:?}; expected trivial, density, blocklsq, or oracle"
            ))),
        }
    }
}

/// A grid `rho` entry: an absolute value or a multiple of `k^2/n^2`.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Abs(f64),
    RelK2N2 { k2_over_n2: f64 },
}

impl RhoSpec {
    pub fn resolve(&self, n: usize, k: usize) -> f64 {
        match *self {
            RhoSpec::Abs(v) => v,
            RhoSpec::RelK2N2 { k2_over_n2 } => k2_over_n2 * (k * k) as f64 / (n * n) as f64,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub rho: Vec<RhoSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub truth: TruthSpec,
    pub estimators: Vec<EstimatorSpec>,
    pub grid: GridSpec,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_blowup_m")]
    pub blowup_m: usize,
    #[serde(default = "default_heuristic_restarts")]
    pub heuristic_restarts: usize,
}

fn default_blowup_m() -> usize {
    1
}
fn default_heuristic_restarts() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials < 1 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.blowup_m < 1 {
            return Err(CliError::Config("blowup_m must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(CliError::Config("estimators must be nonempty".into()));
        }
        for e in &self.estimators {
            e.kind(2)?;
        }
        if self.grid.n.is_empty() {
            return Err(CliError::Config("grid.n must be nonempty".into()));
        }
        match &self.truth {
            TruthSpec::File { .. } => {
                if !self.grid.k.is_empty() || !self.grid.rho.is_empty() {
                    return Err(CliError::Config(
                        "a file truth fixes k and rho; leave grid.k and grid.rho empty".into(),
                    ));
                }
            }
            TruthSpec::QMatrix { c, count, .. } => {
                if self.grid.k.is_empty() || self.grid.rho.is_empty() {
                    return Err(CliError::Config("grid.k and grid.rho must be nonempty".into()));
                }
                if *c <= 0.0 || *c > 0.5 {
                    return Err(CliError::Config(format!(
                        "amplitude c = {c} must lie in (0, 0.5]"
                    )));
                }
                if *count < 2 {
                    return Err(CliError::Config("packing count must be at least 2".into()));
                }
            }
            TruthSpec::Planted { p_scale, q_scale } => {
                if self.grid.k.is_empty() || self.grid.rho.is_empty() {
                    return Err(CliError::Config("grid.k and grid.rho must be nonempty".into()));
                }
                if !(0.0 <= *q_scale && q_scale <= p_scale && *p_scale <= 1.0) {
                    return Err(CliError::Config(format!(
                        "need 0 <= q_scale <= p_scale <= 1, got p_scale = {p_scale}, q_scale = {q_scale}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn streams_per_record(&self) -> u64 {
        3 * self.trials as u64 + 8
    }
}

/// One output row; fields appear in the CSV in declaration order.
#[derive(Debug, Clone, Serialize)]
pub struct RiskRecord {
    pub estimator: String,
    pub n: usize,
    pub k_true: usize,
    pub k_fit: usize,
    pub rho: f64,
    pub trials: usize,
    pub mean_lower_proxy: f64,
    pub se_lower: f64,
    pub mean_upper_proxy: f64,
    pub se_upper: f64,
    pub lower_rate_value: f64,
    pub upper_rate_value: f64,
    pub seed: u64,
}

impl RiskRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.estimator,
            self.n,
            self.k_true,
            self.k_fit,
            self.rho,
            self.trials,
            self.mean_lower_proxy,
            self.se_lower,
            self.mean_upper_proxy,
            self.se_upper,
            self.lower_rate_value,
            self.upper_rate_value,
            self.seed
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub version: String,
    pub complete: bool,
    pub rows: usize,
    /// Wall-clock seconds; the one field that varies between replays.
    pub runtime_seconds: f64,
}

/// Build the truth matrix for one grid point.
pub fn build_truth(
    spec: &TruthSpec,
    n: usize,
    k: usize,
    rho: f64,
    seed: u64,
) -> Result<BlockMatrix, CliError> {
    match spec {
        TruthSpec::QMatrix {
            c,
            count,
            target,
            max_attempts,
            member,
        } => {
            let target = target.unwrap_or(k * k / 8);
            let set = sample_packing_set(
                k,
                *count,
                target,
                *max_attempts,
                RngSeed::new(seed, PACKING_STREAM_BASE + k as u64),
            )
            .map_err(|e| CliError::Numerical(format!("packing construction failed: {e}")))?;
            let params = HardInstanceParams::new(n, k, rho, *c)
                .map_err(|e| CliError::Config(format!("bad hard-instance parameters: {e}")))?;
            let b = set
                .members
                .get(*member)
                .ok_or_else(|| CliError::Config(format!("member index {member} out of range")))?;
            q_matrix(b, &params).map_err(|e| CliError::Numerical(e.to_string()))
        }
        TruthSpec::Planted { p_scale, q_scale } => {
            graphon::planted_partition(k, rho * p_scale, rho * q_scale)
                .map_err(|e| CliError::Config(format!("bad planted partition: {e}")))
        }
        TruthSpec::File { path } => {
            matrix_from_path(path).map_err(|e| CliError::Config(format!("cannot load truth: {e}")))
        }
    }
}

/// Rate curve values for a record; NaN when the query is outside the curves'
/// domain (k < 2).
fn rate_values(n: usize, k: usize, rho: f64) -> (f64, f64) {
    match RateQuery::new(n, k, rho) {
        Ok(q) => (lower_rate(&q).total, upper_rate(&q)),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

pub struct ExperimentOutcome {
    pub rows: usize,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Expand the grid in declaration order (n, then k, then rho, then
/// estimator), run every record, and write `risk.csv` plus `manifest.json`
/// under `out_dir`. Rows are flushed as they complete, so an interrupted run
/// leaves partial results and a manifest still marked incomplete.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    config_bytes: &[u8],
    out_dir: &Path,
) -> Result<ExperimentOutcome, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("risk.csv");
    let manifest_path = out_dir.join("manifest.json");
    let config_sha256 = hex_digest(config_bytes);

    write_manifest(
        &manifest_path,
        &Manifest {
            config_sha256: config_sha256.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            complete: false,
            rows: 0,
            runtime_seconds: 0.0,
        },
    )?;

    let mut csv = std::fs::File::create(&csv_path)?;
    writeln!(csv, "{CSV_SCHEMA_COMMENT}")?;
    writeln!(csv, "{CSV_HEADER}")?;

    // A file truth has no k/rho grid; represent it as a single pseudo-point.
    let (k_grid, rho_grid): (Vec<usize>, Vec<RhoSpec>) = match &cfg.truth {
        TruthSpec::File { .. } => (vec![0], vec![RhoSpec::Abs(f64::NAN)]),
        _ => (cfg.grid.k.clone(), cfg.grid.rho.clone()),
    };

    let opts = RiskOptions {
        blowup_m: cfg.blowup_m,
        heuristic_restarts: cfg.heuristic_restarts,
    };
    let mut record_index: u64 = 0;
    let mut rows = 0usize;
    for &n in &cfg.grid.n {
        for &k in &k_grid {
            for rho_spec in &rho_grid {
                let truth = match &cfg.truth {
                    TruthSpec::File { .. } => build_truth(&cfg.truth, n, 0, f64::NAN, cfg.seed)?,
                    _ => {
                        let rho = rho_spec.resolve(n, k);
                        if !(rho > 0.0 && rho <= 1.0) {
                            return Err(CliError::Config(format!(
                                "grid point (n = {n}, k = {k}) resolves to rho = {rho} outside (0, 1]"
                            )));
                        }
                        build_truth(&cfg.truth, n, k, rho, cfg.seed)?
                    }
                };
                let k_true = truth.k();
                let rho = truth.rho();
                let (lower_rate_value, upper_rate_value) = rate_values(n, k_true, rho);
                for est in &cfg.estimators {
                    let kind = est.kind(k_true)?;
                    let base_stream =
                        RECORD_STREAM_BASE + record_index * cfg.streams_per_record();
                    record_index += 1;
                    let summary = empirical_risk(
                        kind,
                        &truth,
                        n,
                        cfg.trials,
                        RngSeed::new(cfg.seed, base_stream),
                        &opts,
                    )
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                    let record = RiskRecord {
                        estimator: est.name.clone(),
                        n,
                        k_true,
                        k_fit: kind.k_fit(k_true),
                        rho,
                        trials: cfg.trials,
                        mean_lower_proxy: summary.mean_lower,
                        se_lower: summary.se_lower,
                        mean_upper_proxy: summary.mean_upper,
                        se_upper: summary.se_upper,
                        lower_rate_value,
                        upper_rate_value,
                        seed: cfg.seed,
                    };
                    writeln!(csv, "{}", record.to_csv_row())?;
                    csv.flush()?;
                    rows += 1;
                }
            }
        }
    }
    drop(csv);

    write_manifest(
        &manifest_path,
        &Manifest {
            config_sha256,
            version: env!("CARGO_PKG_VERSION").to_string(),
            complete: true,
            rows,
            runtime_seconds: start.elapsed().as_secs_f64(),
        },
    )?;
    Ok(ExperimentOutcome {
        rows,
        csv_path,
        manifest_path,
    })
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| CliError::Numerical(format!("manifest serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config(truth: &str) -> String {
        format!(
            r#"{{
  "truth": {truth},
  "estimators": [{{"name": "oracle"}}],
  "grid": {{"n": [12], "k": [3], "rho": [0.5]}},
  "trials": 2,
  "seed": 1
}}"#
        )
    }

    #[test]
    fn parse_and_validate_qmatrix_config() {
        let cfg = ExperimentConfig::from_json(&minimal_config(r#"{"type": "q_matrix"}"#)).unwrap();
        assert_eq!(cfg.trials, 2);
        assert_eq!(cfg.blowup_m, 1);
        match cfg.truth {
            TruthSpec::QMatrix { c, count, .. } => {
                assert_eq!(c, 0.25);
                assert_eq!(count, 2);
            }
            _ => panic!("wrong truth"),
        }
    }

    #[test]
    fn rejects_unknown_estimator() {
        let bad = r#"{
  "truth": {"type": "q_matrix"},
  "estimators": [{"name": "magic"}],
  "grid": {"n": [8], "k": [2], "rho": [0.5]},
  "trials": 1,
  "seed": 0
}"#;
        assert!(matches!(
            ExperimentConfig::from_json(bad),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn rejects_empty_grid() {
        let bad = r#"{
  "truth": {"type": "planted", "p_scale": 0.8, "q_scale": 0.2},
  "estimators": [{"name": "trivial"}],
  "grid": {"n": [], "k": [2], "rho": [0.5]},
  "trials": 1,
  "seed": 0
}"#;
        assert!(matches!(
            ExperimentConfig::from_json(bad),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn relative_rho_resolves_against_k2_n2() {
        let spec = RhoSpec::RelK2N2 { k2_over_n2: 4.0 };
        assert!((spec.resolve(64, 8) - 4.0 * 64.0 / 4096.0).abs() < 1e-15);
    }

    #[test]
    fn rho_sweep_has_monotone_lower_rate_column() {
        let dir = std::env::temp_dir().join(format!("graphon-sweep-test-{}", std::process::id()));
        let text = r#"{
  "truth": {"type": "q_matrix"},
  "estimators": [{"name": "oracle"}],
  "grid": {"n": [64], "k": [8], "rho": [
    {"k2_over_n2": 0.25}, {"k2_over_n2": 0.5}, {"k2_over_n2": 1.0},
    {"k2_over_n2": 2.0}, {"k2_over_n2": 4.0}, {"k2_over_n2": 8.0},
    {"k2_over_n2": 16.0}
  ]},
  "trials": 1,
  "seed": 2
}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let out = run_experiment(&cfg, text.as_bytes(), &dir).unwrap();
        assert_eq!(out.rows, 7);
        let csv = std::fs::read_to_string(&out.csv_path).unwrap();
        let rates: Vec<f64> = csv
            .lines()
            .skip(2)
            .map(|row| row.split(',').nth(10).unwrap().parse().unwrap())
            .collect();
        assert_eq!(rates.len(), 7);
        for w in rates.windows(2) {
            assert!(w[0] <= w[1], "lower_rate_value not monotone: {rates:?}");
        }
        // independent check of the clamped points: rho <= k^2/n^2 gives rho itself
        let rhos: Vec<f64> = csv
            .lines()
            .skip(2)
            .map(|row| row.split(',').nth(4).unwrap().parse().unwrap())
            .collect();
        for (r, lr) in rhos.iter().zip(&rates) {
            if *r <= 64.0 / 4096.0 {
                assert_eq!(r, lr);
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn replay_is_byte_identical() {
        let base = std::env::temp_dir().join(format!("graphon-replay-test-{}", std::process::id()));
        let text = r#"{
  "truth": {"type": "q_matrix"},
  "estimators": [{"name": "trivial"}, {"name": "blocklsq", "k_fit": 2, "restarts": 2}],
  "grid": {"n": [24], "k": [4], "rho": [0.2]},
  "trials": 4,
  "seed": 9
}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let out1 = run_experiment(&cfg, text.as_bytes(), &base.join("a")).unwrap();
        let out2 = run_experiment(&cfg, text.as_bytes(), &base.join("b")).unwrap();
        let a = std::fs::read(&out1.csv_path).unwrap();
        let b = std::fs::read(&out2.csv_path).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(&base).ok();
    }

    #[test]
    fn oracle_experiment_produces_zero_risk_rows() {
        let dir = std::env::temp_dir().join(format!("graphon-exp-test-{}", std::process::id()));
        let text = minimal_config(r#"{"type": "planted", "p_scale": 1.0, "q_scale": 0.2}"#);
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let out = run_experiment(&cfg, text.as_bytes(), &dir).unwrap();
        assert_eq!(out.rows, 1);
        let csv = std::fs::read_to_string(&out.csv_path).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_SCHEMA_COMMENT);
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], "oracle");
        assert_eq!(fields[6], "0"); // mean_lower_proxy
        assert_eq!(fields[8], "0"); // mean_upper_proxy
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(&out.manifest_path).unwrap()).unwrap();
        assert!(manifest.complete);
        assert_eq!(manifest.rows, 1);
        std::fs::remove_dir_all(&dir).ok();
    }
}
