use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rare_switch::analysis::SearchMode;
use rare_switch::config::{ConfigError, RunConfig, VerifyConfig};
use rare_switch::experiment::{self, ExperimentError, Formats};

const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rswitch",
    version,
    about = "Rare-switching linear bandits under a noisy design matrix"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run bandit simulations and write trace, regret and summary artifacts.
    Simulate(RunArgs),
    /// Replay every rule on shared action streams and compare update counts.
    Compare(RunArgs),
    /// Run the numerical verification suites.
    Verify(VerifyArgs),
    /// Search for a determinant-rule counterexample.
    Counterexample(CounterexampleArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of seeds, overriding the config.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite configuration; the default suites run without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Mode::Analytic)]
    mode: Mode,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for Formats {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => Formats { csv: true, json: false },
            Format::Json => Formats { csv: false, json: true },
            Format::Both => Formats::BOTH,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Analytic,
    Grid,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => Failure::Invalid(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let common = match &cli.command {
        Command::Simulate(a) | Command::Compare(a) => &a.common,
        Command::Verify(a) => &a.common,
        Command::Counterexample(a) => &a.common,
    };
    let pool = thread_pool(common.threads)?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Verify(a) => verify(a),
        Command::Counterexample(a) => counterexample(a),
    })
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    match threads {
        Some(0) => return Err(Failure::Invalid("--threads must be at least 1".into())),
        Some(n) => b = b.num_threads(n),
        None => {}
    }
    b.build()
        .map_err(|e| Failure::Runtime(format!("cannot start thread pool: {e}")))
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var("RSWITCH_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Invalid(format!("RSWITCH_SEED must be an unsigned 64-bit integer (got {v:?})"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Failure::Invalid(format!("RSWITCH_SEED: {e}"))),
    }
}

fn load_run_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    if let Some(n) = args.seeds {
        cfg.seeds = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn simulate(args: RunArgs) -> Result<u8, Failure> {
    let cfg = load_run_config(&args)?;
    let sim = experiment::simulate(&cfg)?;
    report_written(&experiment::write_simulation(
        &sim,
        &args.common.out,
        args.format.into(),
    )?);
    for r in &sim.runs {
        println!(
            "{} alpha={} {} seed={}: m={} regret={:.4}",
            r.run.rule.kind.as_str(),
            r.run.rule.alpha,
            r.policy.as_str(),
            r.seed,
            r.m(),
            r.run.total_regret()
        );
    }
    if cfg.assert_bound {
        let failures = sim.bound_failures();
        if let Some(r) = failures.first() {
            return Err(Failure::Runtime(format!(
                "{} runs exceed bound + 1 (first: seed {}, m = {}, bound = {:?})",
                failures.len(),
                r.seed,
                r.m(),
                r.bound
            )));
        }
    }
    Ok(0)
}

fn compare(args: RunArgs) -> Result<u8, Failure> {
    let cfg = load_run_config(&args)?;
    let cmp = experiment::compare(&cfg)?;
    report_written(&experiment::write_comparison(
        &cmp,
        &args.common.out,
        args.format.into(),
    )?);
    for s in &cmp.seeds {
        for r in &s.rows {
            println!(
                "seed={} {} alpha={}: m={} shared_m={} regret={:.4}",
                s.seed,
                r.rule.as_str(),
                r.alpha,
                r.m,
                r.shared_m,
                r.cumulative_regret
            );
        }
    }
    if cmp.ordering_holds {
        Ok(0)
    } else {
        eprintln!("update-count ordering m_rayleigh <= m_determinant failed on a shared stream");
        Ok(EXIT_CHECK_FAILED)
    }
}

fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    let mut cfg = match &args.config {
        Some(p) => VerifyConfig::load(p)?,
        None => VerifyConfig::default(),
    };
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    let report = experiment::verify(&cfg)?;
    let path = experiment::write_verify(&report, &args.common.out)?;
    report_written(&[path]);
    for s in &report.suites {
        let name = match s {
            experiment::SuiteReport::Claim1 { .. } => "claim1",
            experiment::SuiteReport::Lemma12 { .. } => "lemma12",
            experiment::SuiteReport::Theorem { .. } => "theorem",
        };
        println!("{name}: {} violations", s.violations());
    }
    if report.total_violations == 0 {
        Ok(0)
    } else {
        eprintln!("{} violations found", report.total_violations);
        Ok(EXIT_CHECK_FAILED)
    }
}

fn counterexample(args: CounterexampleArgs) -> Result<u8, Failure> {
    let mode = match args.mode {
        Mode::Analytic => SearchMode::Analytic,
        Mode::Grid => SearchMode::Grid,
    };
    let outcome = experiment::counterexample(args.alpha, args.eta, args.lambda, mode)?;
    let paths = experiment::write_counterexample(&outcome, &args.common.out)?;
    print!("{}", outcome.to_text());
    report_written(&paths);
    Ok(0)
}
