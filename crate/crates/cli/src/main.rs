use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spacemap_cli::commands;
use spacemap_cli::{ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "spacemap", version, about = "Space-mapping parameter estimation for the 1D heat equation")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, default_value = "configs/standard.json")]
    config: PathBuf,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the training dataset.
    Generate,
    /// Train the coarse network on the dataset.
    Train,
    /// Run the space-mapping loop from the trained network.
    Run,
    /// Retrain and rerun for several hidden-layer counts.
    SweepLayers {
        /// Comma-separated hidden-layer counts.
        #[arg(long, value_delimiter = ',', required = true)]
        layers: Vec<usize>,
    },
    /// Compare conjugate gradient and Nelder–Mead on one trained network.
    BenchOptimizers,
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Generate => {
            let data = commands::cmd_generate(&cfg)?;
            println!("wrote {} rows to {}", data.count(), cfg.paths.dataset.display());
        }
        Command::Train => {
            let (net, losses) = commands::cmd_train(&cfg)?;
            println!(
                "trained {:?} for {} epochs, loss {:.6e} -> {:.6e}",
                net.layer_sizes(),
                losses.len(),
                losses.first().copied().unwrap_or(f64::NAN),
                losses.last().copied().unwrap_or(f64::NAN)
            );
            println!("checkpoint {}, losses {}", cfg.paths.checkpoint.display(), cfg.loss_path().display());
        }
        Command::Run => {
            let state = commands::cmd_run(&cfg)?;
            let s = commands::summary(&state);
            let p = state.x_current;
            println!(
                "estimate alpha={} s0={} k_cond={} h_coef={} t_inf={}",
                p.alpha, p.s0, p.k_cond, p.h_coef, p.t_inf
            );
            println!("converged,iterations,final_accuracy_pct");
            println!("{},{},{}", s.converged, s.iterations, s.final_accuracy_pct);
        }
        Command::SweepLayers { layers } => {
            for r in commands::cmd_sweep_layers(&cfg, &layers)? {
                println!(
                    "layers {:>2}: accuracy {:.2}% converged {} after {} iterations",
                    r.hidden_layers, r.final_accuracy_pct, r.converged, r.iterations
                );
            }
            println!("report {}", cfg.sweep_path().display());
        }
        Command::BenchOptimizers => {
            for r in commands::cmd_bench_optimizers(&cfg)? {
                println!(
                    "{:<11}: accuracy {:.2}% after {} iterations, {} fine evaluations",
                    r.optimizer, r.final_accuracy_pct, r.iterations, r.fine_evals
                );
            }
            println!("report {}", cfg.bench_path().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
