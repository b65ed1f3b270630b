use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod analyze;
mod gen;
mod scan;
mod simulate;
mod util;

#[derive(Parser)]
#[command(name = "srascan", version, about = "Subnet-Router anycast probing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate SRA probe targets from BGP, Route(6) or hitlist data.
    GenTargets(gen::GenArgs),
    /// Probe a target list and record replies.
    Scan(scan::ScanArgs),
    /// Reports over recorded replies.
    #[command(subcommand)]
    Analyze(analyze::AnalyzeCommand),
    /// Run probes through a simulated topology and write a transcript.
    Simulate(simulate::SimulateArgs),
    /// Re-hash the files listed in a scan manifest.
    VerifyManifest { manifest: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool> = match cli.command {
        Command::GenTargets(a) => gen::run(a).map(|_| true),
        Command::Scan(a) => scan::run(a).map(|_| true),
        Command::Analyze(a) => analyze::run(a).map(|_| true),
        Command::Simulate(a) => simulate::run(a).map(|_| true),
        Command::VerifyManifest { manifest } => scan::verify(&manifest),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
