use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tubeot_cli::config::{DENSITIES, KEYS};
use tubeot_cli::error::exit;
use tubeot_cli::presets::PRESETS;
use tubeot_cli::{parse_with_overrides, run_plan, CliError, OutputBundle, RunPlan};

#[derive(Parser)]
#[command(name = "tubeot", version, about = "Optimal transport on surfaces via a narrowband Cartesian grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` overrides, applied after the file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a stored experiment.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List stored experiments, configuration keys and density names.
    ListPresets,
    /// Parse and validate a configuration file without running it.
    Validate { config: PathBuf },
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn plan(text: &str, out: Option<PathBuf>, mut set: Vec<String>) -> Result<RunPlan, CliError> {
    if let Some(dir) = out {
        set.push(format!("output_dir = {}", dir.display()));
    }
    parse_with_overrides(text, &set)
}

fn execute(plan: RunPlan) -> Result<i32, CliError> {
    let bundles = run_plan(&plan, |b: &OutputBundle| {
        let err = b.linf_error.map(|e| format!(" linf_error={e:.5}")).unwrap_or_default();
        let status = if b.diverged {
            "diverged"
        } else if b.converged {
            "converged"
        } else {
            "not converged"
        };
        eprintln!(
            "{}: {status} after {} iterations ({} nodes, {:.1}s){err} -> {}",
            b.name,
            b.iterations,
            b.nodes,
            b.wall_time,
            b.dir.display()
        );
    })?;
    Ok(bundles.iter().map(OutputBundle::exit_code).max().unwrap_or(exit::OK))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, set } => read(&config).and_then(|t| plan(&t, out, set)).and_then(execute),
        Command::Preset { name, out, set } => plan(&format!("preset = {name}\n"), out, set).and_then(execute),
        Command::ListPresets => {
            println!("presets:");
            for p in PRESETS {
                let runs = if p.sweep.is_empty() { String::new() } else { format!(" [{} runs]", p.sweep.len()) };
                println!("  {:<24}{}{runs}", p.name, p.description);
            }
            println!("\nkeys:");
            for (k, d) in KEYS {
                println!("  {k:<18}{d}");
            }
            println!("\ndensities:");
            for (k, d) in DENSITIES {
                println!("  {k:<22}{d}");
            }
            Ok(exit::OK)
        }
        Command::Validate { config } => read(&config).and_then(|t| plan(&t, None, Vec::new())).map(|p| {
            for r in &p.runs {
                println!(
                    "{}: {:?} {} sigma={} h={} epsilon={} dt={:e} -> {}",
                    r.name,
                    r.surface,
                    r.cost.name(),
                    r.sigma,
                    r.h,
                    r.epsilon,
                    r.solver.dt,
                    r.output_dir.display()
                );
            }
            exit::OK
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
