//! The `tdigest` command-line tool. Every subcommand is a thin shell over
//! the library: numbers it prints are the library's results verbatim.
//!
//! Exit codes: 0 success, 1 audit or proof failure, 2 bad input,
//! 3 empty input, 4 scale mismatch.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::digest::Digest;
use crate::error::Error;
use crate::io::{self, FileError};
use crate::scale::{ScaleKind, ScaleSpec};
use crate::verify::{self, AccuracyRow, AuditEntry, SortedSamples};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

pub const DEFAULT_Q_GRID: [f64; 9] = [0.001, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 0.999];

#[derive(Debug, Parser)]
#[command(name = "tdigest", version, about = "Build, query, merge and audit t-digests")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a digest from one number per line.
    Build(BuildArgs),
    /// Estimate quantiles from a digest file.
    Quantile(QuantileArgs),
    /// Merge digest files with identical scale and delta.
    Merge(MergeArgs),
    /// Audit a digest file, or run the perturbation suite with --proofs.
    Check(CheckArgs),
    /// Compare estimates against exact quantiles of the input.
    Accuracy(AccuracyArgs),
    /// Print a digest file as JSON.
    Dump(DumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    #[arg(long, default_value = "k1", value_parser = parse_kind)]
    scale: ScaleKind,
    #[arg(long, default_value_t = 100.0)]
    delta: f64,
    /// Samples buffered between compactions [default: 10 * ceil(delta)].
    #[arg(long)]
    buffer: Option<usize>,
}

impl ScaleArgs {
    fn spec(&self) -> Result<ScaleSpec, CliError> {
        Ok(ScaleSpec::new(self.scale, self.delta)?)
    }

    fn digest(&self) -> Result<Digest, CliError> {
        let spec = self.spec()?;
        let cap = self.buffer.unwrap_or_else(|| Digest::default_capacity(&spec));
        Ok(Digest::with_capacity(spec, cap)?)
    }
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    scale: ScaleArgs,
    /// Input file; standard input when absent or `-`.
    input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct QuantileArgs {
    digest: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_Q_GRID)]
    q: Vec<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct MergeArgs {
    #[arg(required = true, num_args = 2..)]
    digests: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Digest file to audit.
    digest: Option<PathBuf>,
    /// Run the perturbation suite instead of auditing a file.
    #[arg(long)]
    proofs: bool,
    #[arg(long, default_value = "k1", value_parser = parse_kind)]
    scale: ScaleKind,
    #[arg(long, default_value_t = 100.0)]
    delta: f64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct AccuracyArgs {
    #[command(flatten)]
    scale: ScaleArgs,
    input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_Q_GRID)]
    q: Vec<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct DumpArgs {
    digest: PathBuf,
}

fn parse_kind(s: &str) -> Result<ScaleKind, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    BadInput(String),
    #[error("input contains no samples")]
    Empty,
    #[error(transparent)]
    Library(#[from] Error),
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Empty => EXIT_EMPTY,
            CliError::Library(Error::SpecMismatch { .. }) | CliError::File(FileError::Digest(Error::SpecMismatch { .. })) => {
                EXIT_MISMATCH
            }
            _ => EXIT_BAD_INPUT,
        }
    }
}

/// Reads one decimal number per line, skipping blank lines.
pub fn parse_samples<R: BufRead>(reader: R) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        match text.parse::<f64>() {
            Ok(x) if x.is_finite() => out.push(x),
            _ => return Err(CliError::BadInput(format!("line {}: cannot parse `{text}` as a finite number", i + 1))),
        }
    }
    if out.is_empty() {
        return Err(CliError::Empty);
    }
    Ok(out)
}

fn read_samples(input: Option<&Path>, stdin: &mut dyn Read) -> Result<Vec<f64>, CliError> {
    match input {
        Some(p) if p != Path::new("-") => {
            let f = File::open(p).map_err(|e| CliError::BadInput(format!("{}: {e}", p.display())))?;
            parse_samples(BufReader::new(f))
        }
        _ => parse_samples(BufReader::new(stdin)),
    }
}

fn write_digest(out: Option<&Path>, digest: &Digest, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => io::write_file(path, digest)?,
        None => stdout.write_all(&io::serialize(digest)?)?,
    }
    Ok(())
}

fn check_qs(qs: &[f64]) -> Result<(), CliError> {
    match qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        Some(q) => Err(CliError::BadInput(format!("q = {q} is outside [0, 1]"))),
        None => Ok(()),
    }
}

fn emit_json<T: Serialize>(value: &T, stdout: &mut dyn Write) -> Result<(), CliError> {
    serde_json::to_writer(&mut *stdout, value).map_err(std::io::Error::from)?;
    writeln!(stdout)?;
    Ok(())
}

#[derive(Serialize)]
struct QuantileRow {
    q: f64,
    estimate: f64,
}

#[derive(Serialize)]
struct AuditSummary<'a> {
    mode: &'static str,
    scale: ScaleKind,
    delta: f64,
    total_weight: u64,
    centroids: usize,
    passed: bool,
    worst_excess: f64,
    failures: Vec<&'a AuditEntry>,
}

fn build(args: &BuildArgs, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let samples = read_samples(args.input.as_deref(), stdin)?;
    let mut digest = args.scale.digest()?;
    digest.extend(samples)?;
    digest.compact();
    write_digest(args.out.as_deref(), &digest, stdout)?;
    writeln!(stderr, "n={} centroids={}", digest.total_weight(), digest.centroids().len())?;
    Ok(EXIT_OK)
}

fn quantile(args: &QuantileArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    check_qs(&args.q)?;
    let digest = io::read_file(&args.digest)?;
    let rows = args
        .q
        .iter()
        .map(|&q| Ok(QuantileRow { q, estimate: digest.quantile(q)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    match args.format {
        Format::Json => emit_json(&rows, stdout)?,
        Format::Csv => {
            writeln!(stdout, "q,estimate")?;
            for r in &rows {
                writeln!(stdout, "{},{}", r.q, r.estimate)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn merge(args: &MergeArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let digests = args.digests.iter().map(io::read_file).collect::<Result<Vec<_>, _>>()?;
    let merged = Digest::merge_all(&digests)?.expect("clap enforces at least two inputs");
    write_digest(args.out.as_deref(), &merged, stdout)?;
    writeln!(stderr, "n={} centroids={}", merged.total_weight(), merged.centroids().len())?;
    Ok(EXIT_OK)
}

fn check(args: &CheckArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    if args.proofs {
        let spec = ScaleSpec::new(args.scale, args.delta)?;
        let report = verify::proof_property_suite(&spec, args.trials, args.seed);
        match args.format {
            Format::Json => emit_json(&report, stdout)?,
            Format::Csv => {
                writeln!(stdout, "family,trials,violations,strict_eligible,strict_decreases,worst_excess")?;
                for f in &report.families {
                    writeln!(
                        stdout,
                        "{},{},{},{},{},{}",
                        f.family, f.trials, f.violations, f.strict_eligible, f.strict_decreases, f.worst_excess
                    )?;
                }
            }
        }
        return Ok(if report.passed { EXIT_OK } else { EXIT_FAILED });
    }

    let Some(path) = &args.digest else {
        return Err(CliError::BadInput("check needs a digest file or --proofs".into()));
    };
    let digest = io::read_file(path)?;
    let report = verify::audit(&digest)?;
    match args.format {
        Format::Json => emit_json(
            &AuditSummary {
                mode: "audit",
                scale: digest.spec().kind(),
                delta: digest.spec().delta(),
                total_weight: digest.total_weight(),
                centroids: digest.centroids().len(),
                passed: report.passed,
                worst_excess: report.worst_excess,
                failures: report.failures().collect(),
            },
            stdout,
        )?,
        Format::Csv => {
            writeln!(stdout, "index,q1,q2,weight,k_size,exempt,pass")?;
            for e in &report.entries {
                writeln!(stdout, "{},{},{},{},{},{},{}", e.index, e.q1, e.q2, e.weight, e.k_size, e.exempt, e.pass)?;
            }
        }
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
}

fn accuracy(args: &AccuracyArgs, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<i32, CliError> {
    check_qs(&args.q)?;
    let samples = read_samples(args.input.as_deref(), stdin)?;
    let mut digest = args.scale.digest()?;
    digest.extend(samples.iter().copied())?;
    digest.compact();
    let oracle = SortedSamples::new(samples)?;
    let rows: Vec<AccuracyRow> = verify::accuracy_table(&digest, &oracle, &args.q)?;
    match args.format {
        Format::Json => emit_json(&rows, stdout)?,
        Format::Csv => {
            writeln!(stdout, "q,estimate,oracle,error")?;
            for r in &rows {
                writeln!(stdout, "{},{},{},{}", r.q, r.estimate, r.oracle, r.error)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn dump(args: &DumpArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let digest = io::read_file(&args.digest)?;
    emit_json(&io::to_json(&digest)?, stdout)?;
    Ok(EXIT_OK)
}

/// Parses `args` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Build(a) => build(a, stdin, stdout, stderr),
        Command::Quantile(a) => quantile(a, stdout),
        Command::Merge(a) => merge(a, stdout, stderr),
        Command::Check(a) => check(a, stdout),
        Command::Accuracy(a) => accuracy(a, stdin, stdout),
        Command::Dump(a) => dump(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        let got = parse_samples("1\n\n 2.5 \n-3e2\n".as_bytes()).unwrap();
        assert_eq!(got, vec![1.0, 2.5, -300.0]);
        match parse_samples("1\n2\nabc\n".as_bytes()) {
            Err(CliError::BadInput(msg)) => assert!(msg.starts_with("line 3"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_samples("nan\n".as_bytes()), Err(CliError::BadInput(_))));
        assert!(matches!(parse_samples("\n  \n".as_bytes()), Err(CliError::Empty)));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Empty.exit_code(), EXIT_EMPTY);
        assert_eq!(CliError::BadInput(String::new()).exit_code(), EXIT_BAD_INPUT);
        let a = ScaleSpec::new(ScaleKind::K0, 1.0).unwrap();
        let b = ScaleSpec::new(ScaleKind::K1, 1.0).unwrap();
        assert_eq!(
            CliError::Library(Error::SpecMismatch { left: a, right: b }).exit_code(),
            EXIT_MISMATCH
        );
    }
}
