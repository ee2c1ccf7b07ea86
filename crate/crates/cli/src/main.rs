use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use distkit::DType;
use distkit_cli::{commands, selfcheck, CliError, CliResult};

#[derive(Parser)]
#[command(name = "distkit", version, about = "Sample, score and compare probability distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

impl From<Precision> for DType {
    fn from(p: Precision) -> DType {
        match p {
            Precision::F32 => DType::F32,
            Precision::F64 => DType::F64,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples and write them as NDJSON records.
    Sample {
        /// Model spec file, or inline JSON.
        #[arg(long)]
        model: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Score NDJSON records under a model.
    Logprob {
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form KL(p || q); pass `--model` twice, p first.
    Kl {
        #[arg(long, num_args = 1, required = true)]
        model: Vec<String>,
        /// Also report a Monte Carlo estimate from this many draws of p.
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Kernel density estimate over the points in `--data`; `--model` is the
    /// kernel template. Scores the points, or samples with `--n`.
    Kde {
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Run the KS, moment, Jacobian and reference checks.
    Selfcheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: "stdout".into(),
            source,
        }),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sample { model, n, seed, common } => {
            emit(&common.out, &commands::sample(&model, n, seed, common.precision.into())?)
        }
        Command::Logprob { model, data, common } => {
            emit(&common.out, &commands::logprob(&model, &data, common.precision.into())?)
        }
        Command::Kl { model, mc, seed, common } => {
            let [p, q] = model.as_slice() else {
                return Err(CliError::parse("--model", format!("kl takes exactly two models, got {}", model.len())));
            };
            emit(&common.out, &commands::kl(p, q, mc, seed, common.precision.into())?)
        }
        Command::Kde { model, data, n, seed, common } => {
            emit(&common.out, &commands::kde(&model, &data, n, seed, common.precision.into())?)
        }
        Command::Selfcheck { out } => {
            let checks = selfcheck::run();
            let failed = checks.iter().filter(|c| !c.passed).count();
            let mut text: String = checks.iter().map(|c| format!("{c}\n")).collect();
            text.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
            emit(&out, &text)?;
            if failed > 0 {
                return Err(CliError::SelfCheck(failed));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
