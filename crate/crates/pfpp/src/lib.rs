//! Command-line front end for `pfpp-core`.
//!
//! Every command reads one JSON document and writes a CSV table or a JSON
//! report, each carrying a header with the library version and tolerances.
//! With `--out`, a run manifest is written to `<out>.manifest.json`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
pub mod error;
pub mod output;
pub mod schema;

pub use error::{exit, CliError};
pub use output::Format;

/// Default pass threshold for check commands.
pub const DEFAULT_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "pfpp",
    version,
    about = "Pfaffian point processes from fermionic covariance operators"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Seed for stochastic commands (ChaCha20 stream).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pass threshold for reported deviations.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Half-integer window `a+1/2, ..., b-1/2`.
    #[arg(long, global = true, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub window: Option<Vec<i64>>,
    /// Partition size cap.
    #[arg(long, global = true)]
    pub trunc: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the covariance axioms (or kernel positivity) and report flags.
    Validate { input: PathBuf },
    /// Convert a covariance document to its Pfaffian kernel.
    Kernel { input: PathBuf },
    /// Correlation functions rho(x_1, ..., x_k).
    Correlate {
        input: PathBuf,
        /// One comma-separated set of site labels.
        #[arg(long, allow_hyphen_values = true)]
        points: Option<String>,
        /// Largest set size when `--points` is absent.
        #[arg(long, default_value_t = 3)]
        max_size: usize,
    },
    /// Configuration weights by enumeration.
    Weights { input: PathBuf },
    /// E[prod alpha(x)] over occupied x (alpha >= 1), by Fredholm Pfaffian.
    ExpectMult {
        input: PathBuf,
        /// One value per site, comma-separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        alpha: Vec<f64>,
    },
    /// Exact samples, one bitstring per draw.
    Sample {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        draws: usize,
        /// Worker threads; shard i uses seed ^ i.
        #[arg(long, default_value_t = 1)]
        shards: usize,
    },
    /// Condition on occupied and vacated sites.
    Condition {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        occupied: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        vacated: Vec<String>,
    },
    /// Compare correlations with the Fock-space oracle.
    OracleCheck {
        input: PathBuf,
        /// Largest set size compared.
        #[arg(long, default_value_t = 3)]
        points: usize,
    },
    /// Check the Koopman intertwiner on an operator, OPE or Schur document.
    PerfectnessCheck { input: PathBuf },
    /// Quasi-free KMS family of a two-level Hamiltonian.
    Kms {
        input: PathBuf,
        /// Emit the Hilbert-Schmidt partial sums instead of the kernel.
        #[arg(long)]
        hs: bool,
    },
    /// Orthogonal-polynomial ensemble weights.
    Ope { input: PathBuf },
    /// Schur measure weights.
    Schur { input: PathBuf },
    /// Shifted Schur measure weights.
    ShiftedSchur { input: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Kernel { .. } => "kernel",
            Command::Correlate { .. } => "correlate",
            Command::Weights { .. } => "weights",
            Command::ExpectMult { .. } => "expect-mult",
            Command::Sample { .. } => "sample",
            Command::Condition { .. } => "condition",
            Command::OracleCheck { .. } => "oracle-check",
            Command::PerfectnessCheck { .. } => "perfectness-check",
            Command::Kms { .. } => "kms",
            Command::Ope { .. } => "ope",
            Command::Schur { .. } => "schur",
            Command::ShiftedSchur { .. } => "shifted-schur",
        }
    }

    fn stochastic(&self) -> bool {
        matches!(self, Command::Sample { .. })
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Validate { .. }
            | Command::Kernel { .. }
            | Command::Condition { .. }
            | Command::OracleCheck { .. }
            | Command::PerfectnessCheck { .. } => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    exit::OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    exit::USAGE
                }
            };
        }
    };
    let args: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, &args, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "pfpp: {e}");
            e.code()
        }
    }
}

fn execute(
    cli: &Cli,
    args: &[String],
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<u8, CliError> {
    let g = &cli.global;
    let seed = if cli.command.stochastic() {
        Some(g.seed.ok_or_else(|| {
            CliError::Usage(format!(
                "{} is stochastic and needs --seed",
                cli.command.name()
            ))
        })?)
    } else {
        if g.seed.is_some() {
            let _ = writeln!(
                stderr,
                "warning: --seed is ignored by {}",
                cli.command.name()
            );
        }
        None
    };
    let check = g.tol.unwrap_or(DEFAULT_CHECK_TOL);
    if check.is_nan() || check < 0.0 {
        return Err(CliError::Usage(
            "--tol must be a non-negative number".into(),
        ));
    }
    let window = match &g.window {
        Some(w) if w[0] >= w[1] => return Err(CliError::Usage("--window needs a < b".into())),
        Some(w) => Some((w[0], w[1])),
        None => None,
    };
    let format = g.format.unwrap_or(cli.command.default_format());
    let ctx = commands::Context {
        check,
        window,
        trunc: g.trunc,
        seed,
        format,
    };
    let outcome = commands::dispatch(&cli.command, &ctx)?;
    for w in &outcome.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let header = output::Header {
        tool: "pfpp",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        seed,
        tolerances: output::Tolerances::new(check),
        meta: outcome.meta,
    };
    let bytes = output::render(&header, &outcome.output, format)?;
    match &g.out {
        None => stdout.write_all(&bytes).map_err(|source| CliError::Write {
            path: "<stdout>".into(),
            source,
        })?,
        Some(path) => {
            let write = |p: &PathBuf, b: &[u8]| {
                std::fs::write(p, b).map_err(|source| CliError::Write {
                    path: p.display().to_string(),
                    source,
                })
            };
            write(path, &bytes)?;
            let manifest = output::Manifest {
                header: &header,
                args: args.to_vec(),
                format: match format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                },
                outputs: vec![path.display().to_string()],
                status: outcome.status,
            };
            let mut m = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
            m.push(b'\n');
            let mut mpath = path.clone().into_os_string();
            mpath.push(".manifest.json");
            write(&PathBuf::from(mpath), &m)?;
        }
    }
    if let Some(msg) = &outcome.failure {
        let _ = writeln!(stderr, "pfpp: {msg}");
    }
    Ok(outcome.status)
}
