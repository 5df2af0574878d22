//! The five verbs. Each reads only the config (plus the files earlier verbs
//! wrote) and is deterministic in the config seed.

use rayon::prelude::*;
use spacemap_core::coarse_net::{self, MlpNetwork};
use spacemap_core::fine_solver::simulate;
use spacemap_core::heat_model::generate_dataset;
use spacemap_core::smo::{run_smo, NetSurrogate, OptimizerKind, ParameterMapping, SmoState};
use spacemap_core::Dataset;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io::{self, BenchRow, HistoryRow, LossRow, SummaryRow, SweepRow, TraceRow};

/// Training set described by `cfg.data`.
pub fn generate(cfg: &ExperimentConfig) -> Result<Dataset> {
    Ok(generate_dataset(
        &cfg.bounds()?,
        cfg.data.n_samples,
        cfg.data.noise_sigma,
        cfg.seed,
        cfg.source(),
        &cfg.grid()?,
    )?)
}

/// Fresh network with `hidden_layers` hidden layers trained on `data`.
pub fn train_network(cfg: &ExperimentConfig, data: &Dataset, hidden_layers: usize) -> Result<(MlpNetwork, Vec<f64>)> {
    let net = MlpNetwork::for_dataset(hidden_layers, cfg.train.hidden_width, data, cfg.seed)?;
    Ok(coarse_net::train(&net, data, &cfg.train_config())?)
}

/// Space-mapping run from a trained network. `data` is copied, not modified.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    net: MlpNetwork,
    data: &Dataset,
    optimizer: OptimizerKind,
) -> Result<SmoState> {
    let smo = cfg.smo_config(optimizer)?;
    let mut model = NetSurrogate { net, train: cfg.retrain_config() };
    let mut data = data.clone();
    let fine = cfg.fine_model()?;
    Ok(run_smo(&smo, &mut model, &mut data, ParameterMapping::Identity, &*fine, &cfg.probes()?, &cfg.bounds()?)?)
}

pub fn summary(state: &SmoState) -> SummaryRow {
    SummaryRow { converged: state.converged, iterations: state.iteration, final_accuracy_pct: state.accuracy_pct }
}

/// Writes the dataset file.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Dataset> {
    let data = generate(cfg)?;
    io::write_dataset(&cfg.paths.dataset, &data)?;
    Ok(data)
}

/// Trains on the dataset file; writes the checkpoint and `loss.csv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(MlpNetwork, Vec<f64>)> {
    let data = io::read_dataset(&cfg.paths.dataset)?;
    let (net, losses) = train_network(cfg, &data, cfg.train.hidden_layers)?;
    io::write_checkpoint(&cfg.paths.checkpoint, &net)?;
    io::write_csv(&cfg.loss_path(), losses.iter().enumerate().map(|(e, &loss)| LossRow { epoch: e + 1, loss }))?;
    Ok((net, losses))
}

/// Runs the loop from the checkpoint and dataset files; writes `history.csv`,
/// `summary.csv`, `trace.csv` and the fine field at the estimate (`field.csv`).
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<SmoState> {
    let data = io::read_dataset(&cfg.paths.dataset)?;
    let net = io::read_checkpoint(&cfg.paths.checkpoint)?;
    let state = run_pipeline(cfg, net, &data, cfg.smo.optimizer.kind())?;
    io::write_csv(&cfg.history_path(), state.history.iter().map(HistoryRow::from))?;
    io::write_csv(&cfg.summary_path(), [summary(&state)])?;
    io::write_csv(&cfg.trace_path(), state.trace.iter().map(TraceRow::from))?;
    io::write_field(&cfg.field_path(), &simulate(&state.x_current, &cfg.grid()?)?.field)?;
    Ok(state)
}

/// One row per layer count, in input order. Every row trains a fresh network
/// on the same data with the same seed. A failing row is reported as
/// unconverged with zero accuracy and the sweep continues.
pub fn cmd_sweep_layers(cfg: &ExperimentConfig, layers: &[usize]) -> Result<Vec<SweepRow>> {
    if layers.is_empty() {
        return Err(crate::error::CliError::Config("--layers needs at least one count".into()));
    }
    let data = generate(cfg)?;
    let rows: Vec<SweepRow> = layers
        .par_iter()
        .map(|&hidden_layers| {
            let outcome = train_network(cfg, &data, hidden_layers)
                .and_then(|(net, _)| run_pipeline(cfg, net, &data, cfg.smo.optimizer.kind()));
            match outcome {
                Ok(s) => SweepRow {
                    hidden_layers,
                    final_accuracy_pct: s.accuracy_pct,
                    converged: s.converged,
                    iterations: s.iteration,
                },
                Err(e) => {
                    eprintln!("sweep row {hidden_layers}: {e}");
                    SweepRow { hidden_layers, final_accuracy_pct: 0.0, converged: false, iterations: 0 }
                }
            }
        })
        .collect();
    io::write_csv(&cfg.sweep_path(), &rows)?;
    Ok(rows)
}

/// The same trained network and data driven once by conjugate gradient and
/// once by Nelder–Mead, in that order.
pub fn cmd_bench_optimizers(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>> {
    let data = generate(cfg)?;
    let (net, _) = train_network(cfg, &data, cfg.train.hidden_layers)?;
    let kinds = [("cg", OptimizerKind::ConjugateGradient), ("nelder_mead", OptimizerKind::NelderMead)];
    let rows: Vec<BenchRow> = kinds
        .par_iter()
        .map(|&(name, kind)| match run_pipeline(cfg, net.clone(), &data, kind) {
            Ok(s) => BenchRow {
                optimizer: name.into(),
                final_accuracy_pct: s.accuracy_pct,
                iterations: s.iteration,
                fine_evals: s.fine_evals,
            },
            Err(e) => {
                eprintln!("bench row {name}: {e}");
                BenchRow { optimizer: name.into(), final_accuracy_pct: 0.0, iterations: 0, fine_evals: 0 }
            }
        })
        .collect();
    io::write_csv(&cfg.bench_path(), &rows)?;
    Ok(rows)
}
