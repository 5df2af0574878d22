//! CSV and JSON persistence.
//!
//! Floats are written in the shortest decimal form that parses back to the
//! same `f64`, so every file here round-trips bit for bit.

use std::fs::{self, File};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spacemap_core::coarse_net::{InputNorm, MlpNetwork};
use spacemap_core::optim::TraceEntry;
use spacemap_core::smo::IterationRecord;
use spacemap_core::{DataRecord, Dataset, HeatParams, TemperatureField};

use crate::error::{CliError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.to_path_buf(), source }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

/// Writes `rows` under the header derived from `T`'s field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads every row of a CSV written by [`write_csv`]. The header must match
/// `expected` exactly.
pub fn read_csv<T: DeserializeOwned>(path: &Path, expected: &[&str]) -> Result<Vec<T>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(csv_err(path))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(CliError::Config(format!(
            "{}: expected header `{}`, found `{}`",
            path.display(),
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub alpha: f64,
    pub s0: f64,
    pub k_cond: f64,
    pub h_coef: f64,
    pub t_inf: f64,
    pub x: f64,
    pub t: f64,
    pub temperature: f64,
}

pub const DATASET_HEADER: [&str; 8] = ["alpha", "s0", "k_cond", "h_coef", "t_inf", "x", "t", "temperature"];

impl From<&DataRecord> for DatasetRow {
    fn from(r: &DataRecord) -> Self {
        let p = r.params;
        Self {
            alpha: p.alpha,
            s0: p.s0,
            k_cond: p.k_cond,
            h_coef: p.h_coef,
            t_inf: p.t_inf,
            x: r.x,
            t: r.t,
            temperature: r.temperature,
        }
    }
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_csv(path, data.records.iter().map(DatasetRow::from))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(CliError::MissingDataset(path.to_path_buf()));
    }
    let rows: Vec<DatasetRow> = read_csv(path, &DATASET_HEADER)?;
    let mut records = Vec::with_capacity(rows.len());
    for r in rows {
        let params = HeatParams::new(r.alpha, r.s0, r.k_cond, r.h_coef, r.t_inf)?;
        if !r.temperature.is_finite() {
            return Err(CliError::Config(format!("{}: non-finite temperature", path.display())));
        }
        records.push(DataRecord { params, x: r.x, t: r.t, temperature: r.temperature });
    }
    Ok(Dataset::new(records))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub t: f64,
    pub temperature: f64,
}

/// Row-major over time steps, then nodes.
pub fn write_field(path: &Path, field: &TemperatureField) -> Result<()> {
    let g = *field.grid();
    let rows =
        (0..=g.nt).flat_map(|n| (0..g.nx).map(move |i| FieldRow { x: g.x(i), t: g.t(n), temperature: field.at(i, n) }));
    write_csv(path, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub f_best: f64,
    pub evals: usize,
}

impl From<&TraceEntry> for TraceRow {
    fn from(e: &TraceEntry) -> Self {
        Self { iteration: e.iteration, f_best: e.f_best, evals: e.evals }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub alpha: f64,
    pub s0: f64,
    pub k_cond: f64,
    pub h_coef: f64,
    pub t_inf: f64,
    pub residual_norm: f64,
    pub accuracy_pct: f64,
}

pub const HISTORY_HEADER: [&str; 8] =
    ["iteration", "alpha", "s0", "k_cond", "h_coef", "t_inf", "residual_norm", "accuracy_pct"];

impl From<&IterationRecord> for HistoryRow {
    fn from(r: &IterationRecord) -> Self {
        let p = r.params;
        Self {
            iteration: r.iteration,
            alpha: p.alpha,
            s0: p.s0,
            k_cond: p.k_cond,
            h_coef: p.h_coef,
            t_inf: p.t_inf,
            residual_norm: r.residual_norm,
            accuracy_pct: r.accuracy_pct,
        }
    }
}

impl HistoryRow {
    pub fn params(&self) -> HeatParams {
        HeatParams::from_array([self.alpha, self.s0, self.k_cond, self.h_coef, self.t_inf])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub converged: bool,
    pub iterations: usize,
    pub final_accuracy_pct: f64,
}

pub const SUMMARY_HEADER: [&str; 3] = ["converged", "iterations", "final_accuracy_pct"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub hidden_layers: usize,
    pub final_accuracy_pct: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub const SWEEP_HEADER: [&str; 4] = ["hidden_layers", "final_accuracy_pct", "converged", "iterations"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub optimizer: String,
    pub final_accuracy_pct: f64,
    pub iterations: usize,
    pub fine_evals: usize,
}

pub const BENCH_HEADER: [&str; 4] = ["optimizer", "final_accuracy_pct", "iterations", "fine_evals"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub loss: f64,
}

/// On-disk form of an [`MlpNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input_norm: NormJson,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormJson {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl From<&MlpNetwork> for Checkpoint {
    fn from(net: &MlpNetwork) -> Self {
        let norm = net.input_norm();
        Self {
            layer_sizes: net.layer_sizes().to_vec(),
            weights: net.weights().to_vec(),
            biases: net.biases().to_vec(),
            input_norm: NormJson { means: norm.means.clone(), stds: norm.stds.clone() },
            seed: net.seed(),
        }
    }
}

impl Checkpoint {
    pub fn into_network(self) -> Result<MlpNetwork> {
        let norm = InputNorm { means: self.input_norm.means, stds: self.input_norm.stds };
        Ok(MlpNetwork::from_parts(self.layer_sizes, self.weights, self.biases, norm, self.seed)?)
    }
}

pub fn write_checkpoint(path: &Path, net: &MlpNetwork) -> Result<()> {
    ensure_parent(path)?;
    let json = serde_json::to_string(&Checkpoint::from(net))
        .map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    fs::write(path, json + "\n").map_err(io_err(path))
}

pub fn read_checkpoint(path: &Path) -> Result<MlpNetwork> {
    if !path.exists() {
        return Err(CliError::MissingCheckpoint(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    ck.into_network()
}
