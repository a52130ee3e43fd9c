//! Command-line front end: `run|eigen|check <config> [--out DIR] [--quiet]`.
//!
//! Exit codes: 0 success, 1 convergence or check failure, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::LoadedConfig;
use crate::error::Error;
use crate::export::{RunManifest, RunStamp};
use crate::pipeline::{execute_check, execute_eigen, execute_run};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "shallow-vacuum", version, about = "Lagrangian vacuum free-boundary shallow-water solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Nonlinear Picard run with energy, snapshot and boundary exports
    Run(Common),
    /// Eigenvalues and mode snapshots of the weighted operator
    Eigen(Common),
    /// Weighted inequality and kinematics property suites
    Check(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file
    config: PathBuf,
    /// Output directory, overriding `[output] dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary on standard output
    #[arg(long)]
    quiet: bool,
}

fn summarize(out: &mut dyn Write, manifest: &RunManifest, dir: &std::path::Path) -> std::io::Result<()> {
    writeln!(out, "{}: {} ({})", manifest.command, manifest.status, dir.display())?;
    if let Some(c) = &manifest.convergence {
        writeln!(
            out,
            "  picard: converged={} iterations={} halvings={} T={} modes={}",
            c.converged, c.iterations, c.halvings, c.t_final, c.n_modes
        )?;
    }
    for c in &manifest.checks {
        let mark = if c.pass { "pass" } else { "FAIL" };
        writeln!(out, "  [{mark}] {} = {:.4e} (threshold {:.4e})", c.name, c.value, c.threshold)?;
    }
    Ok(())
}

/// Runs the CLI, writing the summary to `out` and diagnostics to stderr.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let (name, common) = match &cli.command {
        Command::Run(c) => ("run", c),
        Command::Eigen(c) => ("eigen", c),
        Command::Check(c) => ("check", c),
    };
    let loaded = match LoadedConfig::load(&common.config) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let dir = common.out.clone().unwrap_or_else(|| loaded.output_dir().to_path_buf());
    let stamp = RunStamp::from_env();
    let result = match name {
        "run" => execute_run(&loaded, &dir, stamp).map(|o| (o.manifest.clone(), o.converged())),
        "eigen" => execute_eigen(&loaded, &dir, stamp).map(|m| (m, true)),
        _ => execute_check(&loaded, &dir, stamp).map(|m| (m, true)),
    };
    match result {
        Ok((manifest, converged)) => {
            if !common.quiet {
                let _ = summarize(out, &manifest, &dir);
            }
            if !converged || (name != "run" && !manifest.all_checks_pass()) {
                EXIT_FAILURE
            } else {
                EXIT_OK
            }
        }
        Err(e @ (Error::Config(_) | Error::Profile(_) | Error::Grid(_))) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(args, &mut std::io::stdout().lock())
}
