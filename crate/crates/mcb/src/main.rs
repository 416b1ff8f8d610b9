use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mcb::config::RunConfig;
use mcb::core::analysis::screen::ScreenConfig;
use mcb::core::engine::Outcome;
use mcb::core::simctest::Spending;
use mcb::core::Method;
use mcb::error::McbError;
use mcb::{commands, formats};

#[derive(Parser)]
#[command(
    name = "mcb",
    about = "Sequential bucket decisions for Monte Carlo p-values with bounded resampling risk",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide which bucket contains a stream's success rate.
    Decide(DecideArgs),
    /// Export a stopping-boundary table as CSV.
    Boundaries(BoundariesArgs),
    /// Exact expected-effort curve (or decision probabilities) on a p grid.
    Effort(EffortArgs),
    /// Effort floors from the sequential testing bound on a p grid.
    Lowerbound(LowerboundArgs),
    /// Integrated effort of both methods under the reference densities.
    Table2(Table2Args),
    /// Screen many simulated hypotheses and report bucket allocations.
    Screen(ScreenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMethod {
    Rl,
    Simctest,
}

impl From<CliMethod> for Method {
    fn from(m: CliMethod) -> Self {
        match m {
            CliMethod::Rl => Method::Rl,
            CliMethod::Simctest => Method::Simctest,
        }
    }
}

/// Flags shared by the run-shaped subcommands. Unset flags fall back to
/// the `--config` file when given, then to the built-in defaults.
#[derive(Args)]
struct RunArgs {
    /// Bucket family: single, J0, Jstar, Js, or a JSON file path [default: Jstar]
    #[arg(long)]
    buckets: Option<String>,
    /// Decision rule [default: simctest]
    #[arg(long, value_enum)]
    method: Option<CliMethod>,
    /// Total risk budget [default: 1e-3]
    #[arg(long)]
    eps: Option<f64>,
    /// Spending shape k in eps_n = rho n / (n + k) [default: 1000]
    #[arg(long)]
    spending_k: Option<f64>,
    /// First evaluation after this many samples [default: 10]
    #[arg(long = "batch-b")]
    batch_b: Option<u64>,
    /// Geometric growth between evaluations [default: 1.1]
    #[arg(long = "batch-a")]
    batch_a: Option<f64>,
    /// Stream seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Sample cap before truncation [default: 10000000]
    #[arg(long = "n-cap")]
    n_cap: Option<u64>,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RunConfig JSON file supplying defaults for the flags above
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, McbError> {
        let mut run = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.buckets {
            run.buckets = v.clone();
        }
        if let Some(v) = self.method {
            run.method = v.into();
        }
        if let Some(v) = self.eps {
            run.eps = v;
        }
        if let Some(v) = self.spending_k {
            run.spending_k = v;
        }
        if let Some(v) = self.batch_b {
            run.batch_initial = v;
        }
        if let Some(v) = self.batch_a {
            run.batch_growth = v;
        }
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.n_cap {
            run.n_cap = v;
        }
        if let Some(v) = &self.out {
            run.out = Some(v.clone());
        }
        Ok(run)
    }
}

#[derive(Args)]
struct DecideArgs {
    #[command(flatten)]
    run: RunArgs,
    /// True success rate of a simulated seeded stream
    #[arg(long)]
    p: Option<f64>,
    /// Recorded stream file (`size,ones` per line) instead of --p
    #[arg(long)]
    stream: Option<PathBuf>,
}

#[derive(Args)]
struct BoundariesArgs {
    /// Threshold the boundary table tests against
    #[arg(long)]
    alpha: f64,
    /// Per-threshold resampling risk
    #[arg(long)]
    rho: f64,
    /// Spending shape k in eps_n = rho n / (n + k)
    #[arg(long, default_value_t = 1000.0)]
    spending_k: f64,
    /// Number of rows to emit
    #[arg(long, default_value_t = 1000)]
    n: u64,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EffortArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of interior grid points
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Emit per-rating decision probabilities for --method instead of
    /// the two-method effort curve
    #[arg(long)]
    probs: bool,
}

#[derive(Args)]
struct LowerboundArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of interior grid points
    #[arg(long, default_value_t = 200)]
    grid: usize,
}

#[derive(Args)]
struct Table2Args {
    #[command(flatten)]
    run: RunArgs,
    /// Quadrature relative tolerance
    #[arg(long, default_value_t = 5e-3)]
    rel_tol: f64,
}

#[derive(Args)]
struct ScreenArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Total hypotheses
    #[arg(long, default_value_t = 10_000)]
    hypotheses: u64,
    /// Leading hypotheses drawn from the signal model
    #[arg(long, default_value_t = 100)]
    alternatives: u64,
    /// Noncentrality range of the signal statistic
    #[arg(long, default_value_t = 2.0)]
    delta_lo: f64,
    #[arg(long, default_value_t = 6.0)]
    delta_hi: f64,
    /// Degrees of freedom of the t statistic
    #[arg(long, default_value_t = 100)]
    df: u32,
    /// Drop per-hypothesis rows from the JSON report
    #[arg(long)]
    summary_only: bool,
}

fn open_out(path: Option<&PathBuf>) -> Result<Box<dyn Write>, McbError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| McbError::io(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn run(cli: Cli) -> Result<u8, McbError> {
    match cli.cmd {
        Cmd::Decide(args) => {
            let run = args.run.resolve()?;
            let report = commands::decide(&run, args.p, args.stream.as_deref())?;
            let mut out = open_out(run.out.as_ref())?;
            formats::write_json(&mut out, &report)?;
            Ok(if report.outcome == Outcome::Decided { 0 } else { 2 })
        }
        Cmd::Boundaries(args) => {
            let spending = Spending::rational(args.rho, args.spending_k)?;
            let mut out = open_out(args.out.as_ref())?;
            formats::write_boundary_csv(&mut out, args.alpha, spending, args.n)?;
            Ok(0)
        }
        Cmd::Effort(args) => {
            let run = args.run.resolve()?;
            let set = run.bucket_set()?;
            let mut out = open_out(run.out.as_ref())?;
            if args.probs {
                let set2 = set.clone();
                let (eps, k, method) = (run.eps, run.spending_k, run.method);
                let mk = move || -> Result<
                    Box<dyn mcb::core::analysis::effort::DecisionPolicy + Send>,
                    McbError,
                > {
                    Ok(match method {
                        Method::Rl => Box::new(mcb::core::analysis::RlPolicy::new(
                            set2.clone(),
                            eps,
                        )?),
                        Method::Simctest => Box::new(mcb::core::analysis::TablePolicy::new(
                            set2.clone(),
                            eps,
                            k,
                        )?),
                    })
                };
                let rows = commands::prob_rows(&mk, run.n_cap, args.grid)?;
                formats::write_probs_csv(&mut out, &set, &rows)?;
            } else {
                let rows =
                    commands::effort_rows(&set, run.eps, run.spending_k, run.n_cap, args.grid)?;
                formats::write_effort_csv(&mut out, &rows)?;
            }
            Ok(0)
        }
        Cmd::Lowerbound(args) => {
            let run = args.run.resolve()?;
            let set = run.bucket_set()?;
            let rows = commands::lowerbound_rows(&set, run.eps, args.grid)?;
            let mut out = open_out(run.out.as_ref())?;
            let mut go = || -> std::io::Result<()> {
                writeln!(out, "p,lower_basic,lower_improved")?;
                for (p, basic, improved) in &rows {
                    writeln!(out, "{p},{basic},{improved}")?;
                }
                Ok(())
            };
            go().map_err(|e| McbError::io("<output>", e))?;
            Ok(0)
        }
        Cmd::Table2(args) => {
            let run = args.run.resolve()?;
            let set = run.bucket_set()?;
            let rows =
                commands::table2(&set, run.eps, run.spending_k, run.n_cap, args.rel_tol)?;
            let mut out = open_out(run.out.as_ref())?;
            formats::write_table2_csv(&mut out, &rows)?;
            Ok(0)
        }
        Cmd::Screen(args) => {
            let mut run_defaults = args.run.resolve()?;
            // Screening chases very small rates; allow deeper streams
            // than the single-decision default unless overridden.
            if args.run.n_cap.is_none() && args.run.config.is_none() {
                run_defaults.n_cap = 100_000_000;
            }
            if args.run.buckets.is_none() && args.run.config.is_none() {
                run_defaults.buckets = "Js".into();
            }
            let cfg = ScreenConfig {
                hypotheses: args.hypotheses,
                alternatives: args.alternatives,
                delta_lo: args.delta_lo,
                delta_hi: args.delta_hi,
                df: args.df,
                seed: run_defaults.seed,
            };
            let set = run_defaults.bucket_set()?;
            let mut report =
                commands::run_screen(set, run_defaults.engine_config()?, &cfg)?;
            if args.summary_only {
                report.rows.clear();
            }
            let mut out = open_out(run_defaults.out.as_ref())?;
            formats::write_json(&mut out, &report)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    commands::configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
