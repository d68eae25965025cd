mod demo;
mod verify;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use exclusim_core::numerics::Rational;
use exclusim_core::protocol::{safety_cap_from_env, trace_jsonl};
use exclusim_core::scenario::load_scenario;

#[derive(Parser, Debug)]
#[command(name = "exclusim", version, about = "Exclusivity-attack protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario file and emit its trace as JSON lines.
    Run {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the canonical paired scenario for one attack.
    AttackDemo(demo::DemoArgs),
    /// Run a harness suite and emit a JSON report.
    Verify(verify::VerifyArgs),
}

pub(crate) fn parse_rational(s: &str) -> Result<Rational, String> {
    s.parse::<Rational>().map_err(|e| e.to_string())
}

fn write_output(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_run(file: &PathBuf, out: Option<&PathBuf>) -> anyhow::Result<ExitCode> {
    let scenario = load_scenario(file).with_context(|| format!("loading {}", file.display()))?;
    let run = scenario.run(safety_cap_from_env())?;
    write_output(out, &trace_jsonl(&run))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { file, out } => cmd_run(file, out.as_ref()),
        Command::AttackDemo(args) => demo::cmd_attack_demo(args),
        Command::Verify(args) => verify::cmd_verify(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
