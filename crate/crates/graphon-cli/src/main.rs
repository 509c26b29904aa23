//! Command-line front end for the graphon laboratory.
//!
//! Subcommands: `sample`, `dist`, `pack`, `kl`, `fano`, `rates`, `risk`,
//! `experiment`. Every command is deterministic given `--seed`/`--stream`.
//! Exit codes: 0 on success, 2 for configuration/usage errors, 3 for
//! numerical failures.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use graphon::{
    delta2_upper_via_blowup_result, delta_hat2_exact, delta_hathat2_exact,
    delta_hathat2_heuristic, empirical_risk, exact_kl_lenient, fano_bound, kl_upper_bound,
    matrix_from_path, permuted_hamming_min, sample_graph_mode, sample_packing_set,
    BinarySymMatrix, BlockMatrix, EstimatorKind, FanoInput, GraphSidecar, RiskOptions, RngSeed,
    SampleMode,
};
use graphon_cli::experiment::{run_experiment, ExperimentConfig, RiskRecord, CSV_HEADER, CSV_SCHEMA_COMMENT};
use graphon_cli::rates::{lower_rate, rate_gap_factor, upper_rate, RateQuery};
use graphon_cli::CliError;

#[derive(Parser)]
#[command(name = "graphon-cli", version, about = "Block-graphon estimation laboratory")]
struct Cli {
    /// RNG seed shared by all randomized commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// RNG stream; distinct streams give independent draws for one seed.
    #[arg(long, global = true, default_value_t = 0)]
    stream: u64,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a W-random graph from a matrix file.
    Sample(SampleArgs),
    /// Alignment distance between two matrix files.
    Dist(DistArgs),
    /// Rejection-sample a far-apart family of binary patterns.
    Pack(PackArgs),
    /// KL divergence between the graph distributions of two matrices.
    Kl(KlArgs),
    /// Evaluate the Fano error-probability bound.
    Fano(FanoArgs),
    /// Unit-constant minimax rate curves at one grid point.
    Rates(RatesArgs),
    /// Monte-Carlo risk of one estimator against a truth matrix.
    Risk(RiskArgs),
    /// Run a full experiment config; writes risk.csv and manifest.json.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Matrix file (.json or .csv).
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    n: usize,
    /// Retain labels and the probability matrix; writes a sidecar JSON.
    #[arg(long)]
    keep_latents: bool,
    /// Output graph file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sidecar path for provenance (requires --keep-latents).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Edge sampling path.
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Auto,
    Dense,
    Sparse,
}

impl From<ModeArg> for SampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => SampleMode::Auto,
            ModeArg::Dense => SampleMode::Dense,
            ModeArg::Sparse => SampleMode::Sparse,
        }
    }
}

#[derive(Args)]
struct DistArgs {
    matrix_a: PathBuf,
    matrix_b: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Force the exhaustive solver (errors above the exact cap).
    #[arg(long, conflicts_with = "heuristic")]
    exact: bool,
    /// Force the heuristic solver.
    #[arg(long)]
    heuristic: bool,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Blow-up factor for the blowup metric.
    #[arg(long, default_value_t = 1)]
    m: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum MetricArg {
    Hat2,
    Hathat2,
    Hamming,
    Blowup,
}

#[derive(Args)]
struct PackArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    target: usize,
    #[arg(long, default_value_t = 200_000)]
    max_attempts: usize,
}

#[derive(Args)]
struct KlArgs {
    matrix_a: PathBuf,
    matrix_b: PathBuf,
    #[arg(long)]
    n: usize,
    /// Exact enumeration (the default).
    #[arg(long, conflicts_with = "bound")]
    exact: bool,
    /// The quadratic upper bound instead of exact enumeration.
    #[arg(long)]
    bound: bool,
}

#[derive(Args)]
struct FanoArgs {
    /// KL diameter in nats.
    #[arg(long)]
    kl: f64,
    /// Packing count (real-valued, at least 2).
    #[arg(long)]
    m: f64,
    /// Packing radius the count was certified at (echoed into the output).
    #[arg(long)]
    epsilon: f64,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    rho: f64,
}

#[derive(Args)]
struct RiskArgs {
    #[arg(long, value_enum)]
    estimator: EstimatorArg,
    /// Truth matrix file.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    trials: usize,
    /// Block count for blocklsq (default: the truth's).
    #[arg(long)]
    k_fit: Option<usize>,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    blowup_m: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum EstimatorArg {
    Trivial,
    Density,
    Blocklsq,
    Oracle,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Serialize)]
struct DistOutput {
    distance: f64,
    row_perm: Option<Vec<usize>>,
    col_perm: Option<Vec<usize>>,
    exact: bool,
}

#[derive(Serialize)]
struct KlOutput {
    mode: &'static str,
    n: usize,
    kl_nats: Option<f64>,
    infinite: bool,
}

#[derive(Serialize)]
struct FanoOutput {
    bound: f64,
    clamped: f64,
    kl_diameter: f64,
    packing_count: f64,
    epsilon: f64,
}

#[derive(Serialize)]
struct RatesOutput {
    n: usize,
    k: usize,
    rho: f64,
    lower: graphon_cli::rates::LowerRate,
    upper: f64,
    gap_factor: f64,
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .ok();
    }
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let seed = RngSeed::new(cli.seed, cli.stream);
    match &cli.command {
        Command::Sample(args) => cmd_sample(args, seed, &cli.out_dir),
        Command::Dist(args) => cmd_dist(args, seed),
        Command::Pack(args) => cmd_pack(args, seed),
        Command::Kl(args) => cmd_kl(args),
        Command::Fano(args) => cmd_fano(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Risk(args) => cmd_risk(args, seed),
        Command::Experiment(args) => cmd_experiment(args, &cli.out_dir),
    }
}

fn load_matrix(path: &Path) -> Result<BlockMatrix, CliError> {
    matrix_from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))?;
    println!("{text}");
    Ok(())
}

fn resolve_out(out_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    }
}

fn cmd_sample(args: &SampleArgs, seed: RngSeed, out_dir: &Path) -> Result<(), CliError> {
    let w = load_matrix(&args.matrix)?;
    if args.n < 1 {
        return Err(CliError::Config("n must be at least 1".into()));
    }
    let g = sample_graph_mode(&w, args.n, seed, args.keep_latents, args.mode.into());
    let text = g.to_text();
    match &args.out {
        Some(path) => std::fs::write(resolve_out(out_dir, path), &text)?,
        None => print!("{text}"),
    }
    if let Some(sidecar) = &args.sidecar {
        let labels = g.labels().ok_or_else(|| {
            CliError::Config("--sidecar requires --keep-latents".into())
        })?;
        let meta = GraphSidecar::new(seed, labels);
        let json = serde_json::to_string_pretty(&meta)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        std::fs::write(resolve_out(out_dir, sidecar), json)?;
    }
    Ok(())
}

fn to_binary(m: &BlockMatrix) -> Result<BinarySymMatrix, CliError> {
    let k = m.k();
    let rows: Vec<Vec<u8>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let v = m.get(i, j);
                    if v == 0.0 {
                        Ok(0u8)
                    } else if v == 1.0 {
                        Ok(1u8)
                    } else {
                        Err(CliError::Config(format!(
                            "hamming metric needs 0/1 entries, found {v}"
                        )))
                    }
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    BinarySymMatrix::new(&rows).map_err(|e| CliError::Config(e.to_string()))
}

fn cmd_dist(args: &DistArgs, seed: RngSeed) -> Result<(), CliError> {
    let a = load_matrix(&args.matrix_a)?;
    let b = load_matrix(&args.matrix_b)?;
    let num = |e: graphon::AlignError| match e {
        graphon::AlignError::TooLargeForExact { .. } => CliError::Config(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    };
    if args.heuristic && matches!(args.metric, MetricArg::Hat2 | MetricArg::Hamming) {
        return Err(CliError::Config(
            "hat2 and hamming are exact-only; use blowup or hathat2 --heuristic".into(),
        ));
    }
    let out = match args.metric {
        MetricArg::Hat2 => {
            let r = delta_hat2_exact(a.matrix(), b.matrix()).map_err(num)?;
            DistOutput {
                distance: r.distance,
                row_perm: Some(r.row_perm.one_based()),
                col_perm: Some(r.col_perm.one_based()),
                exact: r.exact,
            }
        }
        MetricArg::Hathat2 => {
            let r = if args.heuristic {
                delta_hathat2_heuristic(a.matrix(), b.matrix(), args.restarts, seed).map_err(num)?
            } else {
                delta_hathat2_exact(a.matrix(), b.matrix()).map_err(num)?
            };
            DistOutput {
                distance: r.distance,
                row_perm: Some(r.row_perm.one_based()),
                col_perm: Some(r.col_perm.one_based()),
                exact: r.exact,
            }
        }
        MetricArg::Hamming => {
            let ba = to_binary(&a)?;
            let bb = to_binary(&b)?;
            let d = permuted_hamming_min(&ba, &bb).map_err(num)?;
            DistOutput {
                distance: d as f64,
                row_perm: None,
                col_perm: None,
                exact: true,
            }
        }
        MetricArg::Blowup => {
            let r = delta2_upper_via_blowup_result(a.matrix(), b.matrix(), args.m, args.restarts, seed)
                .map_err(num)?;
            DistOutput {
                distance: r.distance,
                row_perm: Some(r.row_perm.one_based()),
                col_perm: Some(r.col_perm.one_based()),
                exact: r.exact,
            }
        }
    };
    print_json(&out)
}

fn cmd_pack(args: &PackArgs, seed: RngSeed) -> Result<(), CliError> {
    let set = sample_packing_set(args.k, args.count, args.target, args.max_attempts, seed)
        .map_err(|e| match e {
            graphon::PackError::BadParameters { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        })?;
    print_json(&set.record())
}

fn cmd_kl(args: &KlArgs) -> Result<(), CliError> {
    let a = load_matrix(&args.matrix_a)?;
    let b = load_matrix(&args.matrix_b)?;
    let out = if args.bound {
        let v = kl_upper_bound(&a, &b, args.n).map_err(|e| CliError::Config(e.to_string()))?;
        KlOutput {
            mode: "bound",
            n: args.n,
            kl_nats: Some(v),
            infinite: false,
        }
    } else {
        let v = exact_kl_lenient(&a, &b, args.n).map_err(|e| match e {
            graphon::InfoError::TooLargeToEnumerate { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        })?;
        KlOutput {
            mode: "exact",
            n: args.n,
            kl_nats: if v.is_finite() { Some(v) } else { None },
            infinite: v.is_infinite(),
        }
    };
    print_json(&out)
}

fn cmd_fano(args: &FanoArgs) -> Result<(), CliError> {
    let input = FanoInput {
        kl_diameter: args.kl,
        packing_count: args.m,
        epsilon: args.epsilon,
    };
    if args.kl < 0.0 {
        return Err(CliError::Config("KL diameter must be nonnegative".into()));
    }
    let bound = fano_bound(&input).map_err(|e| CliError::Config(e.to_string()))?;
    print_json(&FanoOutput {
        bound,
        clamped: bound.max(0.0),
        kl_diameter: args.kl,
        packing_count: args.m,
        epsilon: args.epsilon,
    })
}

fn cmd_rates(args: &RatesArgs) -> Result<(), CliError> {
    let q = RateQuery::new(args.n, args.k, args.rho)
        .map_err(|e| CliError::Config(e.to_string()))?;
    print_json(&RatesOutput {
        n: args.n,
        k: args.k,
        rho: args.rho,
        lower: lower_rate(&q),
        upper: upper_rate(&q),
        gap_factor: rate_gap_factor(&q),
    })
}

fn cmd_risk(args: &RiskArgs, seed: RngSeed) -> Result<(), CliError> {
    let truth = load_matrix(&args.truth)?;
    if args.trials < 1 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    let kind = match args.estimator {
        EstimatorArg::Trivial => EstimatorKind::Trivial,
        EstimatorArg::Density => EstimatorKind::Density,
        EstimatorArg::Blocklsq => EstimatorKind::BlockLsq {
            k: args.k_fit.unwrap_or(truth.k()),
            restarts: args.restarts,
        },
        EstimatorArg::Oracle => EstimatorKind::Oracle,
    };
    let opts = RiskOptions {
        blowup_m: args.blowup_m,
        heuristic_restarts: 10,
    };
    let summary = empirical_risk(kind, &truth, args.n, args.trials, seed, &opts)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let (lo, up) = match RateQuery::new(args.n, truth.k(), truth.rho()) {
        Ok(q) => (lower_rate(&q).total, upper_rate(&q)),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let record = RiskRecord {
        estimator: kind.name().to_string(),
        n: args.n,
        k_true: truth.k(),
        k_fit: kind.k_fit(truth.k()),
        rho: truth.rho(),
        trials: args.trials,
        mean_lower_proxy: summary.mean_lower,
        se_lower: summary.se_lower,
        mean_upper_proxy: summary.mean_upper,
        se_upper: summary.se_upper,
        lower_rate_value: lo,
        upper_rate_value: up,
        seed: seed.seed,
    };
    println!("{CSV_SCHEMA_COMMENT}");
    println!("{CSV_HEADER}");
    println!("{}", record.to_csv_row());
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs, out_dir: &Path) -> Result<(), CliError> {
    let bytes = std::fs::read(&args.config)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let outcome = run_experiment(&cfg, &bytes, out_dir)?;
    println!(
        "wrote {} rows to {} (manifest: {})",
        outcome.rows,
        outcome.csv_path.display(),
        outcome.manifest_path.display()
    );
    Ok(())
}
