use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ptcrystal::commands::{run_command, Command, CommandError};
use ptcrystal::config::parse_config;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Bands,
    AlphaScan,
    Quasienergy,
    DlScan,
    Propagate,
    Cascade,
    CompareStaircase,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Bands => Command::Bands,
            Cmd::AlphaScan => Command::AlphaScan,
            Cmd::Quasienergy => Command::Quasienergy,
            Cmd::DlScan => Command::DlScan,
            Cmd::Propagate => Command::Propagate,
            Cmd::Cascade => Command::Cascade,
            Cmd::CompareStaircase => Command::CompareStaircase,
        }
    }
}

/// Band structures, quasienergies, beam propagation and Bragg cascades of
/// driven PT-symmetric photonic lattices.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// INI run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides run.output)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Turn physics-validity warnings into exit code 4
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = parse_config(&cli.config)
        .map_err(CommandError::from)
        .and_then(|cfg| run_command(cli.command.into(), &cfg, cli.out.as_deref()));
    match result {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for path in &report.artifacts {
                println!("wrote {}", path.display());
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(report.exit_code(cli.strict) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
