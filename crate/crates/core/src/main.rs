use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pfc_c0ip::app::{self, RunConfig};
use pfc_c0ip::Error;

#[derive(Parser)]
#[command(name = "pfc", version, about = "C0 interior penalty solver for the phase field crystal equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convergence study against a reference at twice the finest level.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64])]
        levels: Vec<usize>,
    },
    /// Validate a configuration file.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Check { config } => {
            let cfg = RunConfig::load(&config)?;
            println!(
                "ok: {} x {} cells, tau = {}, {} steps",
                cfg.nx,
                cfg.ny,
                cfg.resolved_tau()?,
                cfg.n_steps()?
            );
        }
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let dir = cfg.resolved_output_dir();
            let s = app::run_experiment(&cfg, &dir)?;
            println!("steps            {}", s.steps);
            println!("energy           {:.10e} -> {:.10e}", s.initial_energy, s.final_energy);
            println!("max mass drift   {:.3e}", s.max_mass_drift);
            println!("max energy law   {:.3e}", s.max_energy_law_residual);
            println!("max Newton iters {}", s.max_newton_iters);
            println!("output           {}", s.output_dir.display());
        }
        Command::Study { config, levels } => {
            let cfg = RunConfig::load(&config)?;
            let dir = cfg.resolved_output_dir();
            let table = app::run_convergence_study(&cfg, &levels)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("config.json"), cfg.to_json())?;
            std::fs::write(dir.join("rates.csv"), table.to_csv()?)?;
            std::fs::write(dir.join("rates.txt"), table.to_text())?;
            print!("{}", table.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(app::exit_code(&e) as u8)
        }
    }
}
