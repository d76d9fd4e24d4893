//! `pica` command-line front end.
//!
//! Exit codes: 0 success or positive verdict, 1 usage error, 2 I/O or format
//! error, 3 negative verdict. `PICA_THREADS` caps the worker pool.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pica_core::groups::{conjecture_probe, BlockStructure};
use pica_core::io;
use pica_core::recovery::{verify_identifiability, DEFAULT_RESIDUAL_THRESHOLD};
use pica_core::{
    estimate_unmixing, is_member, mix, patterns::POPULATION_TOL, random_orthogonal, sample_cumulant, seed,
    PatternKind, RecoveryOptions, RecoveryReport, SourceSpec, SquareMatrix, ZeroPattern,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

/// Seed stream used for the mixing matrix written by `simulate --mixing-out`.
pub const MIXING_STREAM: u64 = 0x006d_6978;

#[derive(Parser, Debug)]
#[command(name = "pica", version, about = "Cumulant-based partitioned ICA toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate source samples from a JSON source description.
    Simulate(SimulateArgs),
    /// Estimate the order-r sample cumulant tensor of a CSV data file.
    Cumulants(CumulantsArgs),
    /// Test whether a tensor lies in a zero-pattern.
    Check(CheckArgs),
    /// Estimate an unmixing matrix under a zero-pattern.
    Recover(RecoverArgs),
    /// Score a recovery report against the true mixing matrix.
    Verify(VerifyArgs),
    /// Compare pattern-preserving signed permutations with graph automorphisms.
    Probe(ProbeArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Mix the sources by a random orthogonal matrix and write it here.
    #[arg(long)]
    mixing_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CumulantsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long, default_value_t = POPULATION_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 1e-12)]
    sweep_tol: f64,
    /// Optional true mixing matrix to score the result against.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Block sizes for scoring, e.g. "2,2". Defaults to the pattern's blocks.
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_THRESHOLD)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    blocks: String,
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_THRESHOLD)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(pica_core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(msg) => write!(f, "usage error: {msg}"),
            Self::Data(err) => write!(f, "{err}"),
        }
    }
}

impl From<pica_core::Error> for CliError {
    fn from(err: pica_core::Error) -> Self {
        Self::Data(err)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_IO,
        }
    }
}

type CliResult = Result<i32, CliError>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = err.print();
            return code;
        }
    };
    if let Err(err) = configure_threads() {
        eprintln!("pica: {err}");
        return err.exit_code();
    }
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Cumulants(a) => cumulants(a),
        Command::Check(a) => check(a),
        Command::Recover(a) => recover(a),
        Command::Verify(a) => verify(a),
        Command::Probe(a) => probe(a),
    };
    outcome.unwrap_or_else(|err| {
        eprintln!("pica: {err}");
        err.exit_code()
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PICA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("PICA_THREADS must be a positive integer, got '{raw}'")))?;
    // A pool may already exist when `run` is called repeatedly in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// `data.csv` → `data.spec.json`.
pub fn provenance_path(out: &Path) -> PathBuf {
    out.with_extension("spec.json")
}

fn simulate(a: SimulateArgs) -> CliResult {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mut spec: SourceSpec = io::read_json(&a.spec)?;
    spec.validate()?;
    let mut data = spec.generate(a.n, a.seed)?;
    if let Some(path) = &a.mixing_out {
        let mixing = random_orthogonal(spec.d, seed::split(a.seed, MIXING_STREAM));
        data = mix(&data, &mixing)?;
        io::write_json(path, &mixing)?;
    }
    io::write_csv_file(&a.out, &data)?;
    spec.seed = Some(a.seed);
    io::write_json(&provenance_path(&a.out), &spec)?;
    println!("wrote {} x {} samples to {}", data.n(), data.d(), a.out.display());
    Ok(EXIT_OK)
}

fn cumulants(a: CumulantsArgs) -> CliResult {
    let data = io::read_csv_file(&a.input)?;
    let kappa = sample_cumulant(&data, a.order).map_err(order_as_usage)?;
    io::write_text(&a.out, &io::tensor_to_json(&kappa)?)?;
    println!("wrote order-{} cumulant over {} variables to {}", a.order, data.d(), a.out.display());
    Ok(EXIT_OK)
}

fn order_as_usage(err: pica_core::Error) -> CliError {
    match err {
        pica_core::Error::OrderOutOfRange { .. } => CliError::Usage(err.to_string()),
        other => CliError::Data(other),
    }
}

fn check(a: CheckArgs) -> CliResult {
    if a.tol.is_nan() || a.tol < 0.0 {
        return Err(CliError::Usage("--tol must be non-negative".into()));
    }
    let tensor = io::tensor_from_json(&io::read_text(&a.tensor)?)?;
    let pattern = io::pattern_from_json(&io::read_text(&a.pattern)?)?;
    let m = is_member(&tensor, &pattern, a.tol)?;
    let worst = m.worst_index.as_ref().map_or_else(|| "-".to_string(), |i| i.to_string());
    println!(
        "{} max_violation={:e} worst={worst}",
        if m.member { "member" } else { "non-member" },
        m.max_violation
    );
    Ok(if m.member { EXIT_OK } else { EXIT_NEGATIVE })
}

fn scoring_blocks(pattern: &ZeroPattern) -> Option<BlockStructure> {
    match pattern.kind() {
        PatternKind::Partition(spec) => BlockStructure::from_partition(spec).ok(),
        PatternKind::Diagonal => BlockStructure::singletons(pattern.dim()).ok(),
        _ => None,
    }
}

fn parse_blocks(text: &str) -> Result<BlockStructure, CliError> {
    BlockStructure::parse(text).map_err(|e| CliError::Usage(format!("--blocks: {e}")))
}

fn recover(a: RecoverArgs) -> CliResult {
    let pattern = io::pattern_from_json(&io::read_text(&a.pattern)?)?;
    if pattern.order() != a.order {
        return Err(CliError::Usage(format!(
            "--order {} does not match the pattern order {}",
            a.order,
            pattern.order()
        )));
    }
    let opts = RecoveryOptions {
        order: a.order,
        max_sweeps: a.max_sweeps,
        tol: a.sweep_tol,
        restarts: a.restarts,
        seed: a.seed,
        residual_threshold: a.threshold,
    };
    opts.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let blocks = match &a.blocks {
        Some(text) => Some(parse_blocks(text)?),
        None => None,
    };
    let data = io::read_csv_file(&a.input)?;
    let mut report = estimate_unmixing(&data, &pattern, &opts)?;
    if let Some(truth) = &a.truth {
        let a_true: SquareMatrix = io::read_json(truth)?;
        let blocks = blocks.or_else(|| scoring_blocks(&pattern)).ok_or_else(|| {
            CliError::Usage("--truth with this pattern kind needs --blocks".into())
        })?;
        report.attach_truth(&a_true, &blocks, a.threshold)?;
    }
    io::write_json(&a.out, &report)?;
    print!("objective={:e} best_restart={}", report.objective, report.best_restart);
    if let Some(id) = &report.identifiability {
        print!(" residual={:e}", id.residual);
    }
    println!();
    Ok(EXIT_OK)
}

fn verify(a: VerifyArgs) -> CliResult {
    let blocks = parse_blocks(&a.blocks)?;
    let report: RecoveryReport = io::read_json(&a.report)?;
    let a_true: SquareMatrix = io::read_json(&a.truth)?;
    let id = verify_identifiability(&report.unmixing, &a_true, &blocks, a.threshold)?;
    let assignment: Vec<String> = id.assignment.iter().map(|b| (b + 1).to_string()).collect();
    println!(
        "residual={:e} assignment={} {}",
        id.residual,
        assignment.join(","),
        if id.identified { "identified" } else { "not identified" }
    );
    Ok(if id.identified { EXIT_OK } else { EXIT_NEGATIVE })
}

fn probe(a: ProbeArgs) -> CliResult {
    let graph = io::graph_from_json(&io::read_text(&a.graph)?)?;
    let report = conjecture_probe(&graph, a.order, a.trials, a.seed).map_err(|e| match e {
        pica_core::Error::InvalidInput(msg) => CliError::Usage(msg),
        other => CliError::Data(other),
    })?;
    if let Some(out) = &a.out {
        io::write_json(out, &report)?;
    }
    let preserving = report.candidates.iter().filter(|c| c.preserves).count();
    println!(
        "candidates={} preserving={} disagreements={}",
        report.candidates.len(),
        preserving,
        report.disagreements
    );
    Ok(if report.disagreements == 0 { EXIT_OK } else { EXIT_NEGATIVE })
}
