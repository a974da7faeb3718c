//! Command-line surface: subcommands, flags, and their documented defaults.

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Sparse causal-structure estimation for linear non-Gaussian models.
#[derive(Debug, Parser)]
#[command(name = "sparse-lingam", version, about, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a random ground-truth model and a dataset from it.
    Simulate(SimulateArgs),
    /// Estimate a weighted acyclic adjacency from a data CSV.
    Fit(FitArgs),
    /// Run replicated simulate→fit→evaluate rounds and summarize metrics.
    Benchmark(BenchmarkArgs),
    /// Render an adjacency CSV as a diverging-color portable pixmap.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphArg {
    Er,
    Sf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Mixed,
    Laplace,
    Uniform,
    Exponential,
}

/// Flags shared by every command that runs the solver.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Overall penalty level λ.
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,

    /// Fix the sparsity mix α and skip cross-validation.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Candidate α grid as lo:hi:count (log-spaced, ascending).
    #[arg(long, value_name = "LO:HI:COUNT", default_value = "0.001:0.31622776601683794:50")]
    pub alpha_grid: String,

    /// Cross-validation fold count K.
    #[arg(long, default_value_t = 10)]
    pub k_folds: usize,

    /// Escalation stops once the acyclicity cutoff is at most ω₁.
    #[arg(long, default_value_t = 0.05)]
    pub omega1: f64,

    /// Final truncation threshold ω₂.
    #[arg(long, default_value_t = 0.05)]
    pub omega2: f64,

    /// Adaptive-weight exponent γ.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// Augmented-Lagrangian parameter ρ.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,

    /// Gradient step size η.
    #[arg(long, default_value_t = 0.005)]
    pub eta: f64,

    /// Inner gradient steps per outer iteration.
    #[arg(long, default_value_t = 10)]
    pub u_max: usize,

    /// Outer iteration budget per fit.
    #[arg(long, default_value_t = 2000)]
    pub max_outer: usize,

    /// Worker threads for fold-parallel cross-validation.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of variables.
    #[arg(long, default_value_t = 10)]
    pub d: usize,

    /// Number of samples.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Random-graph family for the skeleton.
    #[arg(long, value_enum, default_value_t = GraphArg::Er)]
    pub graph: GraphArg,

    /// Expected edge count (Erdős–Rényi family only).
    #[arg(long)]
    pub edges: Option<f64>,

    /// Edges attached per new node (scale-free family only).
    #[arg(long, default_value_t = 1)]
    pub sf_m: usize,

    /// Noise family menu.
    #[arg(long, value_enum, default_value_t = NoiseArg::Mixed)]
    pub noise: NoiseArg,

    /// Master seed; falls back to SPARSE_LINGAM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Directory receiving data.csv and truth.json.
    #[arg(long, value_name = "DIR")]
    pub output_dir: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input data CSV (rows = samples, columns = variables).
    #[arg(long, value_name = "FILE")]
    pub input: String,

    /// Directory receiving b_hat.csv, causal_order.txt, diagnostics.json.
    #[arg(long, value_name = "DIR")]
    pub output_dir: String,

    /// Field delimiter of the input CSV.
    #[arg(long, default_value = ",")]
    pub delimiter: char,

    /// Input has no header row.
    #[arg(long)]
    pub no_header: bool,

    /// Treat the input as a single series: cut consecutive windows of
    /// this length and use them as rows.
    #[arg(long, value_name = "LEN")]
    pub window: Option<usize>,

    /// Apply log(1 + x) to series values before windowing.
    #[arg(long)]
    pub log1p: bool,

    /// Master seed; falls back to SPARSE_LINGAM_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,

    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Number of variables.
    #[arg(long, default_value_t = 10)]
    pub d: usize,

    /// Number of samples per replicate.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Random-graph family for the skeletons.
    #[arg(long, value_enum, default_value_t = GraphArg::Er)]
    pub graph: GraphArg,

    /// Expected edge count (Erdős–Rényi family only).
    #[arg(long)]
    pub edges: Option<f64>,

    /// Edges attached per new node (scale-free family only).
    #[arg(long, default_value_t = 1)]
    pub sf_m: usize,

    /// Noise family menu.
    #[arg(long, value_enum, default_value_t = NoiseArg::Mixed)]
    pub noise: NoiseArg,

    /// Number of replicates.
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,

    /// Master seed; replicate r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Directory receiving metrics.csv and summary.json.
    #[arg(long, value_name = "DIR")]
    pub output_dir: String,

    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Square adjacency CSV (no header).
    #[arg(long, value_name = "FILE")]
    pub input: String,

    /// Directory receiving heatmap.ppm.
    #[arg(long, value_name = "DIR")]
    pub output_dir: String,

    /// Field delimiter of the input CSV.
    #[arg(long, default_value = ",")]
    pub delimiter: char,

    /// Pixels per matrix cell.
    #[arg(long, default_value_t = 16)]
    pub cell_size: usize,
}

/// Seed resolution: explicit flag, then SPARSE_LINGAM_SEED, then 0.
pub fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SPARSE_LINGAM_SEED").ok().and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

/// Parses `lo:hi:count` into grid parameters.
pub fn parse_alpha_grid(text: &str) -> Option<(f64, f64, usize)> {
    let mut parts = text.split(':');
    let lo = parts.next()?.parse().ok()?;
    let hi = parts.next()?.parse().ok()?;
    let count = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((lo, hi, count))
}
