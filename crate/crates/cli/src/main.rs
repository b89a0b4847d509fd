use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wcstab_core::config::ExperimentConfig;
use wcstab_core::runner::{run_solve, run_subsuper, run_sweep, run_verify, SweepParam};
use wcstab_core::Error;

/// Stability experiments for warped compactifications on flat tori.
#[derive(Parser)]
#[command(name = "wcstab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured scenario; write field dumps and reports.
    Solve {
        /// Path to a JSON experiment config.
        config: PathBuf,
        /// Output directory for u.bin, v.bin, report.json, residuals.json.
        #[arg(short, long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the identity suite on the configured scenario.
    Verify {
        /// Path to a JSON experiment config.
        config: PathBuf,
    },
    /// Continue the solution branch over one parameter; write it as CSV.
    Sweep {
        /// Path to a JSON experiment config.
        config: PathBuf,
        /// Swept entry: alpha, beta, flux_amp, or pert_amp.
        #[arg(long)]
        param: String,
        /// Parameter value at the branch start.
        #[arg(long)]
        from: f64,
        /// Parameter value at the branch end.
        #[arg(long)]
        to: f64,
        /// Number of continuation steps (>= 1).
        #[arg(long)]
        steps: usize,
        /// Output CSV path.
        #[arg(short, long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Monotone sub/supersolution study of the reduced equation.
    Subsuper {
        /// Path to a JSON experiment config.
        config: PathBuf,
        /// Output directory for v_star.bin and subsuper.json.
        #[arg(short, long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests land here too; only genuine usage
            // errors exit nonzero.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": err.to_string(), "kind": err.kind() })
            );
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Solve { config, out } => {
            let config = ExperimentConfig::from_path(&config)?;
            let artifacts = run_solve(&config, &out)?;
            println!(
                "solved in {} iterations: mass = {:.6e}, residual = {:.3e}, stable = {}",
                artifacts.residuals.iterations,
                artifacts.report.mass,
                artifacts.residuals.max,
                artifacts.report.stable,
            );
            println!("wrote {}", out.join("report.json").display());
            Ok(())
        }
        Command::Verify { config } => {
            let config = ExperimentConfig::from_path(&config)?;
            let report = run_verify(&config)?;
            for row in &report.rows {
                println!(
                    "{} {:<28} {:>13.6e}  (threshold {:.1e})",
                    if row.pass { "PASS" } else { "FAIL" },
                    row.name,
                    row.value,
                    row.threshold,
                );
            }
            match report.rows.iter().find(|row| !row.pass) {
                None => {
                    println!("all {} checks passed", report.rows.len());
                    Ok(())
                }
                Some(row) => Err(Error::IdentityFailed {
                    name: row.name.clone(),
                    deviation: row.value,
                    tolerance: row.threshold,
                }),
            }
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            steps,
            out,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let param: SweepParam = param.parse()?;
            let summary = run_sweep(&config, param, from, to, steps, &out)?;
            println!("wrote {} rows to {}", summary.rows, out.display());
            if let Some(lambda) = summary.failed_at {
                println!(
                    "branch stopped at lambda = {lambda}: {}",
                    summary.failure.as_deref().unwrap_or("unknown failure"),
                );
            }
            Ok(())
        }
        Command::Subsuper { config, out } => {
            let config = ExperimentConfig::from_path(&config)?;
            let study = run_subsuper(&config, &out)?;
            println!(
                "bracket [{:.6}, {:.6}] (ratio {:.4}), {} iterations, residual = {:.3e}",
                study.v_minus, study.v_plus, study.ratio, study.iterations, study.residual,
            );
            println!(
                "certificate: source = {:.6e}, gradient = {:.6e} (gap {:.3e}), embedded mass = {:.6e}",
                study.certificate_source,
                study.certificate_gradient,
                study.certificate_gap,
                study.embedded_mass,
            );
            println!("wrote {}", out.join("subsuper.json").display());
            Ok(())
        }
    }
}
