//! `heisenfrac` command-line driver.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heisenfrac_core::lattice::Lattice;
use heisenfrac_core::multipliers::{multiplier_csv, multiplier_table};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "heisenfrac",
    version,
    about = "Fractional calculus studies on discrete Heisenberg lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the size, spacings and cell volume of a lattice.
    LatticeInfo {
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Horizontal period; even and at least 4.
        #[arg(long)]
        m: usize,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the studies listed in a config file and write a report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json and per-study CSV files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the two spectral multipliers as CSV.
    MultiplierTable {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 10)]
        kmax: u64,
        /// Comma-separated central frequencies.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "1"
        )]
        lambdas: Vec<f64>,
    },
}

const EXIT_USAGE: u8 = 2;

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn strip(msg: String) -> String {
    msg.strip_prefix("usage error: ")
        .map(String::from)
        .unwrap_or(msg)
}

fn lattice_info(n: usize, m: usize, json: bool) -> ExitCode {
    let lat = match Lattice::with_default_spacing(n, m) {
        Ok(l) => l,
        Err(e) => return usage_error(strip(e.to_string())),
    };
    let d = lat.descriptor();
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&d).expect("descriptor serializes")
        );
    } else {
        println!("n = {}", d.n);
        println!("M = {}", d.m);
        println!("N = {}", d.node_count);
        println!("h = {:.17e}", d.h);
        println!("h_t = {:.17e}", d.h_t);
        println!("M_t = {}", d.m_t);
        println!("cell_volume = {:.17e}", d.cell_volume);
    }
    ExitCode::SUCCESS
}

fn verify(config: PathBuf, out: PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return usage_error(format!("cannot read {}: {e}", config.display())),
    };
    let cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    match report::run(&cfg, &text, &out) {
        Ok(status) => {
            println!(
                "{}: {}",
                status.label(),
                out.join(report::REPORT_FILE).display()
            );
            ExitCode::from(status.code())
        }
        Err(report::RunError::Study(e)) => usage_error(strip(e.to_string())),
        Err(report::RunError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn table(n: usize, alpha: f64, kmax: u64, lambdas: &[f64]) -> ExitCode {
    match multiplier_table(n, alpha, kmax, lambdas) {
        Ok(rows) => {
            print!("{}", multiplier_csv(&rows));
            ExitCode::SUCCESS
        }
        Err(e) => usage_error(strip(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::LatticeInfo { n, m, json } => lattice_info(n, m, json),
        Command::Verify { config, out } => verify(config, out),
        Command::MultiplierTable {
            n,
            alpha,
            kmax,
            lambdas,
        } => table(n, alpha, kmax, &lambdas),
    }
}
