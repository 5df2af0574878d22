//! The space-mapping loop: optimize the coarse model against a target
//! response, evaluate the fine model at the candidate, and retrain the coarse
//! model on the fine evaluations until both responses agree.

use alloc::vec;
use alloc::vec::Vec;

use crate::coarse_net::{self, residual, residual_norm, MlpNetwork, TrainConfig};
use crate::error::{Error, Result};
use crate::fine_solver;
use crate::heat_model::{
    analytic_temperature, DataRecord, Dataset, Grid1D, HeatParams, ParamBounds, ProbeSet, N_PARAMS,
};
use crate::linalg::solve_dense;
use crate::math;
use crate::optim::{self, Bounds, CgOptions, NelderMeadOptions, Objective, OptResult, TraceEntry};

/// Lower limit applied to `alpha`, `k_cond` and `h_coef` after an affine map.
pub const POSITIVE_FLOOR: f64 = 1e-6;
/// Ridge weight pulling a fitted affine map towards the identity.
pub const AFFINE_LAMBDA: f64 = 1e-2;
/// Offset in the accuracy denominator.
pub const ACCURACY_DELTA: f64 = 1e-8;

/// Map from fine-model parameters to coarse-model parameters.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ParameterMapping {
    Identity,
    /// `x_c = b * x_f + c`, `b` row-major.
    Affine {
        b: [[f64; N_PARAMS]; N_PARAMS],
        c: [f64; N_PARAMS],
    },
}

impl ParameterMapping {
    fn matrix(&self) -> Option<&[[f64; N_PARAMS]; N_PARAMS]> {
        match self {
            ParameterMapping::Identity => None,
            ParameterMapping::Affine { b, .. } => Some(b),
        }
    }
}

fn affine_raw(b: &[[f64; N_PARAMS]; N_PARAMS], c: &[f64; N_PARAMS], x: &[f64; N_PARAMS]) -> [f64; N_PARAMS] {
    core::array::from_fn(|r| c[r] + (0..N_PARAMS).map(|k| b[r][k] * x[k]).sum::<f64>())
}

// alpha, k_cond, h_coef
const POSITIVE: [usize; 3] = [0, 2, 3];

/// Applies `p` to `x_f`. Affine results have `alpha`, `k_cond` and `h_coef`
/// raised to [`POSITIVE_FLOOR`] if needed.
pub fn apply_mapping(p: &ParameterMapping, x_f: &HeatParams) -> HeatParams {
    match p {
        ParameterMapping::Identity => *x_f,
        ParameterMapping::Affine { b, c } => {
            let mut v = affine_raw(b, c, &x_f.to_array());
            for k in POSITIVE {
                v[k] = v[k].max(POSITIVE_FLOOR);
            }
            HeatParams::from_array(v)
        }
    }
}

/// [`fit_affine_mapping_with`] using [`AFFINE_LAMBDA`].
pub fn fit_affine_mapping(pairs: &[(HeatParams, HeatParams)]) -> Result<ParameterMapping> {
    fit_affine_mapping_with(pairs, AFFINE_LAMBDA)
}

/// Least-squares affine map through `(x_f, x_c)` pairs,
/// minimizing `sum ||b x_f + c - x_c||^2 + lambda ||b - I||^2`.
///
/// With `lambda > 0` the problem is well posed from a single pair.
pub fn fit_affine_mapping_with(pairs: &[(HeatParams, HeatParams)], lambda: f64) -> Result<ParameterMapping> {
    if pairs.is_empty() {
        return Err(Error::InsufficientPairs { got: 0, need: 1 });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidConfig("affine regularization must be finite and non-negative"));
    }
    const M: usize = N_PARAMS + 1;
    let mut gram = [0.0; M * M];
    for (xf, _) in pairs {
        let z = augmented(xf);
        for i in 0..M {
            for j in 0..M {
                gram[i * M + j] += z[i] * z[j];
            }
        }
    }
    for i in 0..N_PARAMS {
        gram[i * M + i] += lambda;
    }
    let mut b = [[0.0; N_PARAMS]; N_PARAMS];
    let mut c = [0.0; N_PARAMS];
    for r in 0..N_PARAMS {
        let mut rhs = [0.0; M];
        for (xf, xc) in pairs {
            let z = augmented(xf);
            let y = xc.to_array()[r];
            for i in 0..M {
                rhs[i] += z[i] * y;
            }
        }
        rhs[r] += lambda;
        let sol = solve_dense(M, &gram, &rhs)?;
        b[r].copy_from_slice(&sol[..N_PARAMS]);
        c[r] = sol[N_PARAMS];
    }
    Ok(ParameterMapping::Affine { b, c })
}

fn augmented(x: &HeatParams) -> [f64; N_PARAMS + 1] {
    let v = x.to_array();
    [v[0], v[1], v[2], v[3], v[4], 1.0]
}

/// Agreement between responses in percent:
/// `100 (1 - mean |a_i - b_i| / (|a_i| + 1e-8))`, floored at 0.
pub fn accuracy(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Ok(100.0);
    }
    let mean =
        a.iter().zip(b).map(|(x, y)| math::abs(x - y) / (math::abs(*x) + ACCURACY_DELTA)).sum::<f64>() / a.len() as f64;
    Ok((100.0 * (1.0 - mean)).max(0.0))
}

/// `||a - b|| <= epsilon`.
pub fn converged(a: &[f64], b: &[f64], epsilon: f64) -> Result<bool> {
    Ok(residual_norm(&residual(a, b)?) <= epsilon)
}

/// The expensive model evaluated at candidates.
pub trait FineModel {
    fn response(&self, params: &HeatParams, probes: &ProbeSet) -> Result<Vec<f64>>;
}

/// Crank–Nicolson solve on a fixed grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifferenceModel {
    pub grid: Grid1D,
}

impl FineModel for FiniteDifferenceModel {
    fn response(&self, params: &HeatParams, probes: &ProbeSet) -> Result<Vec<f64>> {
        fine_solver::fine_response(params, &self.grid, probes)
    }
}

/// Closed-form reference temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AnalyticModel;

impl FineModel for AnalyticModel {
    fn response(&self, params: &HeatParams, probes: &ProbeSet) -> Result<Vec<f64>> {
        params.validate()?;
        probes.iter().map(|p| analytic_temperature(params, p.x, p.t)).collect()
    }
}

/// Fine-model response at `x_star` on `grid`.
pub fn refine_with_fine(x_star: &HeatParams, grid: &Grid1D, probes: &ProbeSet) -> Result<Vec<f64>> {
    fine_solver::fine_response(x_star, grid, probes)
}

/// The cheap model optimized in the inner loop.
pub trait CoarseModel {
    fn response(&self, params: &HeatParams, probes: &ProbeSet) -> Vec<f64>;

    /// Response plus its derivative with respect to the five parameters.
    fn response_jacobian(&self, _params: &HeatParams, _probes: &ProbeSet) -> Option<(Vec<f64>, Vec<[f64; N_PARAMS]>)> {
        None
    }

    /// Fine-tunes on `data` for `epochs` passes.
    fn retrain(&mut self, data: &Dataset, epochs: usize, seed: u64) -> Result<()>;
}

/// An [`MlpNetwork`] together with the settings used to retrain it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSurrogate {
    pub net: MlpNetwork,
    pub train: TrainConfig,
}

impl CoarseModel for NetSurrogate {
    fn response(&self, params: &HeatParams, probes: &ProbeSet) -> Vec<f64> {
        coarse_net::coarse_response(&self.net, params, probes)
    }

    fn response_jacobian(&self, params: &HeatParams, probes: &ProbeSet) -> Option<(Vec<f64>, Vec<[f64; N_PARAMS]>)> {
        Some(coarse_net::coarse_response_jacobian(&self.net, params, probes))
    }

    fn retrain(&mut self, data: &Dataset, epochs: usize, seed: u64) -> Result<()> {
        if epochs == 0 {
            return Ok(());
        }
        let cfg = TrainConfig { epochs, seed, ..self.train };
        self.net = coarse_net::train(&self.net, data, &cfg)?.0;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    NelderMead,
    ConjugateGradient,
}

/// Settings of the coarse-model optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub nelder_mead: NelderMeadOptions,
    pub cg: CgOptions,
    /// Extra starts taken from a Halton sequence over the bounds; the best
    /// result wins, ties going to the earlier start.
    pub restarts: usize,
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        Self { kind, nelder_mead: NelderMeadOptions::default(), cg: CgOptions::default(), restarts: 0 }
    }
}

/// Minimizes `||R_c(P(x)) - target||^2` over `bounds`, starting at `start`.
///
/// Returns the best point found (also when the optimizer did not converge)
/// and the optimizer's report.
pub fn optimize_coarse(
    model: &dyn CoarseModel,
    mapping: &ParameterMapping,
    target: &[f64],
    probes: &ProbeSet,
    optimizer: &OptimizerConfig,
    bounds: &ParamBounds,
    start: &HeatParams,
) -> Result<(HeatParams, OptResult)> {
    if target.len() != probes.len() {
        return Err(Error::LengthMismatch { left: target.len(), right: probes.len() });
    }
    bounds.validate()?;
    let value = |x: &[f64]| {
        let xc = apply_mapping(mapping, &HeatParams::from_slice(x));
        model.response(&xc, probes).iter().zip(target).map(|(b, t)| (b - t) * (b - t)).sum::<f64>()
    };
    let box_ = Bounds::new(bounds.lower().to_vec(), bounds.upper().to_vec())?;
    let lo = bounds.lower();
    let hi = bounds.upper();
    let starts = core::iter::once(bounds.project(start).to_array()).chain(
        (1..=optimizer.restarts)
            .map(|i| core::array::from_fn(|k| lo[k] + halton(i, HALTON_BASES[k]) * (hi[k] - lo[k]))),
    );

    let has_jac = model.response_jacobian(start, probes).is_some();
    let mut best: Option<OptResult> = None;
    for x0 in starts {
        let result = match optimizer.kind {
            OptimizerKind::NelderMead => {
                let obj = Objective::new(value).with_bounds(box_.clone());
                optim::nelder_mead(&obj, &x0, &optimizer.nelder_mead)?
            }
            OptimizerKind::ConjugateGradient => {
                let grad = |x: &[f64]| mapped_gradient(model, mapping, target, probes, x);
                let obj = if has_jac { Objective::new(value).with_gradient(grad) } else { Objective::new(value) };
                optim::conjugate_gradient(&obj.with_bounds(box_.clone()), &x0, &optimizer.cg)?
            }
        };
        if best.as_ref().is_none_or(|b| result.f_best < b.f_best) {
            best = Some(result);
        }
    }
    let best = best.expect("at least one start");
    Ok((HeatParams::from_slice(&best.x_best), best))
}

const HALTON_BASES: [usize; N_PARAMS] = [2, 3, 5, 7, 11];

// Radical inverse of `i` in `base`.
fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

// d/dx_f ||R_c(P(x_f)) - target||^2, chained through the mapping.
fn mapped_gradient(
    model: &dyn CoarseModel,
    mapping: &ParameterMapping,
    target: &[f64],
    probes: &ProbeSet,
    x: &[f64],
) -> Vec<f64> {
    let xf = HeatParams::from_slice(x);
    let xc = apply_mapping(mapping, &xf);
    let Some((values, jac)) = model.response_jacobian(&xc, probes) else {
        return vec![0.0; N_PARAMS];
    };
    let mut gc = [0.0; N_PARAMS];
    for ((v, t), row) in values.iter().zip(target).zip(&jac) {
        for k in 0..N_PARAMS {
            gc[k] += 2.0 * (v - t) * row[k];
        }
    }
    match (mapping, mapping.matrix()) {
        (ParameterMapping::Affine { b, c }, Some(_)) => {
            let raw = affine_raw(b, c, &xf.to_array());
            for k in POSITIVE {
                if raw[k] < POSITIVE_FLOOR {
                    gc[k] = 0.0;
                }
            }
            (0..N_PARAMS).map(|j| (0..N_PARAMS).map(|r| b[r][j] * gc[r]).sum()).collect()
        }
        _ => gc.to_vec(),
    }
}

/// Appends one record per probe at `x_star` with the fine values, then
/// fine-tunes `model` on the grown dataset for `retrain_epochs`.
pub fn augment_and_retrain(
    model: &mut dyn CoarseModel,
    data: &mut Dataset,
    x_star: &HeatParams,
    fine_vals: &[f64],
    probes: &ProbeSet,
    retrain_epochs: usize,
    seed: u64,
) -> Result<()> {
    if fine_vals.len() != probes.len() {
        return Err(Error::LengthMismatch { left: fine_vals.len(), right: probes.len() });
    }
    for (p, v) in probes.iter().zip(fine_vals) {
        data.push(DataRecord { params: *x_star, x: p.x, t: p.t, temperature: *v });
    }
    model.retrain(data, retrain_epochs, seed)
}

/// Settings of [`run_smo`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmoConfig {
    /// Agreement threshold on `||a - b||`, in temperature units.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub retrain_epochs: usize,
    pub optimizer: OptimizerConfig,
    /// Observed temperatures at the probes.
    pub target: Vec<f64>,
    /// First optimizer start; the centre of the bounds when `None`.
    pub start: Option<HeatParams>,
    /// Refit an affine mapping from matched pairs after every fine evaluation.
    pub fit_mapping: bool,
    /// Base seed for retraining.
    pub seed: u64,
}

impl SmoConfig {
    pub fn new(target: Vec<f64>) -> Self {
        Self {
            epsilon: 1e-3,
            max_iterations: 25,
            retrain_epochs: 200,
            optimizer: OptimizerConfig::new(OptimizerKind::NelderMead),
            target,
            start: None,
            fit_mapping: false,
            seed: 0,
        }
    }

    pub fn validate(&self, probes: &ProbeSet) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1"));
        }
        if self.target.len() != probes.len() {
            return Err(Error::LengthMismatch { left: self.target.len(), right: probes.len() });
        }
        if self.target.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("target must be finite"));
        }
        Ok(())
    }
}

/// One pass of the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub params: HeatParams,
    pub residual_norm: f64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoState {
    pub iteration: usize,
    pub x_current: HeatParams,
    /// Fine response at `x_current`.
    pub a: Vec<f64>,
    /// Coarse response at the mapped `x_current`.
    pub b: Vec<f64>,
    pub residual_norm_value: f64,
    pub accuracy_pct: f64,
    pub converged: bool,
    pub fine_evals: usize,
    pub mapping: ParameterMapping,
    pub history: Vec<IterationRecord>,
    /// Optimizer trace of the final coarse optimization.
    pub trace: Vec<TraceEntry>,
}

/// Seed for the retraining pass after `iteration`.
pub fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the space-mapping loop until the fine and coarse responses at the
/// candidate agree within `cfg.epsilon` or `cfg.max_iterations` passes are
/// used. Every pass but the last that does not converge grows `data` by one
/// record per probe and retrains `model`.
#[allow(clippy::too_many_arguments)]
pub fn run_smo(
    cfg: &SmoConfig,
    model: &mut dyn CoarseModel,
    data: &mut Dataset,
    mapping: ParameterMapping,
    fine: &dyn FineModel,
    probes: &ProbeSet,
    bounds: &ParamBounds,
) -> Result<SmoState> {
    cfg.validate(probes)?;
    bounds.validate()?;
    let mut mapping = mapping;
    let mut pairs: Vec<(HeatParams, HeatParams)> = Vec::new();
    let mut x_current = bounds.project(&cfg.start.unwrap_or_else(|| bounds.center()));
    let mut history = Vec::new();
    let mut last = None;
    let mut trace = Vec::new();

    for iteration in 1..=cfg.max_iterations {
        let (x_star, opt) =
            optimize_coarse(&*model, &mapping, &cfg.target, probes, &cfg.optimizer, bounds, &x_current)?;
        trace = opt.trace;
        let a = fine.response(&x_star, probes)?;
        let b = model.response(&apply_mapping(&mapping, &x_star), probes);
        let norm = residual_norm(&residual(&a, &b)?);
        let acc = accuracy(&a, &b)?;
        let done = norm <= cfg.epsilon;
        history.push(IterationRecord { iteration, params: x_star, residual_norm: norm, accuracy_pct: acc });
        x_current = x_star;
        last = Some((a, b, norm, acc, done));
        if done || iteration == cfg.max_iterations {
            break;
        }
        let (a, _, _, _, _) = last.as_ref().unwrap();
        // New records go where the coarse model is queried: at the candidate
        // itself, or at its matched coarse point when a mapping is fitted.
        let mut record_at = x_star;
        if cfg.fit_mapping {
            let (matched, _) = optimize_coarse(
                &*model,
                &ParameterMapping::Identity,
                a,
                probes,
                &cfg.optimizer,
                bounds,
                &apply_mapping(&mapping, &x_star),
            )?;
            pairs.push((x_star, matched));
            mapping = fit_affine_mapping(&pairs)?;
            record_at = matched;
        }
        augment_and_retrain(
            model,
            data,
            &record_at,
            a,
            probes,
            cfg.retrain_epochs,
            iteration_seed(cfg.seed, iteration),
        )?;
    }

    let (a, b, norm, acc, done) = last.expect("max_iterations >= 1");
    Ok(SmoState {
        iteration: history.len(),
        x_current,
        a,
        b,
        residual_norm_value: norm,
        accuracy_pct: acc,
        converged: done,
        fine_evals: history.len(),
        mapping,
        history,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse_net::InputNorm;
    use crate::heat_model::{generate_dataset, DataSource, Probe};
    use proptest::prelude::*;

    fn probes() -> ProbeSet {
        let mut v = Vec::new();
        for &x in &[0.25, 0.5, 0.75] {
            for &t in &[0.05, 0.2, 0.5] {
                v.push(Probe { x, t });
            }
        }
        ProbeSet::new(v).unwrap()
    }

    fn p(a: f64, s: f64, k: f64, h: f64, ti: f64) -> HeatParams {
        HeatParams::new(a, s, k, h, ti).unwrap()
    }

    /// Coarse model equal to the closed form.
    struct Clone_;

    impl CoarseModel for Clone_ {
        fn response(&self, params: &HeatParams, probes: &ProbeSet) -> Vec<f64> {
            AnalyticModel.response(params, probes).unwrap()
        }
        fn retrain(&mut self, _: &Dataset, _: usize, _: u64) -> Result<()> {
            Ok(())
        }
    }

    /// Output is a fixed constant.
    struct Flat(f64);

    impl CoarseModel for Flat {
        fn response(&self, _: &HeatParams, probes: &ProbeSet) -> Vec<f64> {
            vec![self.0; probes.len()]
        }
        fn retrain(&mut self, _: &Dataset, _: usize, _: u64) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn identity_and_affine_mapping() {
        let x = p(0.3, -1.0, 0.7, 1.2, 0.4);
        assert_eq!(apply_mapping(&ParameterMapping::Identity, &x), x);
        let mut b = [[0.0; 5]; 5];
        for (i, row) in b.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        assert_eq!(apply_mapping(&ParameterMapping::Affine { b, c: [0.0; 5] }, &x), x);
        let two = ParameterMapping::Affine { b: b.map(|r| r.map(|v| 2.0 * v)), c: [0.0; 5] };
        assert_eq!(apply_mapping(&two, &p(1.0, 1.0, 1.0, 1.0, 1.0)).to_array(), [2.0; 5]);
    }

    #[test]
    fn affine_mapping_clamps_positive_parameters() {
        let neg = ParameterMapping::Affine { b: [[0.0; 5]; 5], c: [-1.0; 5] };
        let y = apply_mapping(&neg, &p(1.0, 1.0, 1.0, 1.0, 1.0));
        assert_eq!(y.to_array(), [POSITIVE_FLOOR, -1.0, POSITIVE_FLOOR, POSITIVE_FLOOR, -1.0]);
    }

    fn sample_pairs(shift: [f64; 5]) -> Vec<(HeatParams, HeatParams)> {
        let xs = [
            [1.0, 0.5, 1.0, 1.0, 0.0],
            [0.5, -1.0, 1.5, 0.7, 0.3],
            [1.7, 1.2, 0.4, 1.9, -0.6],
            [0.2, 0.0, 0.9, 0.3, 0.9],
            [1.1, -1.8, 1.2, 1.4, -0.2],
            [0.8, 1.9, 0.2, 0.6, 0.5],
            [1.4, -0.3, 1.8, 1.1, -0.9],
        ];
        xs.iter()
            .map(|x| (HeatParams::from_array(*x), HeatParams::from_array(core::array::from_fn(|k| x[k] + shift[k]))))
            .collect()
    }

    fn assert_affine(m: &ParameterMapping, c_expected: [f64; 5], tol: f64) {
        let ParameterMapping::Affine { b, c } = m else { panic!("expected affine") };
        for r in 0..5 {
            for k in 0..5 {
                let e = if r == k { 1.0 } else { 0.0 };
                assert!((b[r][k] - e).abs() < tol, "b[{r}][{k}] = {}", b[r][k]);
            }
            assert!((c[r] - c_expected[r]).abs() < tol, "c[{r}] = {}", c[r]);
        }
    }

    #[test]
    fn affine_fit_identity_and_translation() {
        assert_affine(&fit_affine_mapping_with(&sample_pairs([0.0; 5]), 0.0).unwrap(), [0.0; 5], 1e-10);
        assert_affine(&fit_affine_mapping(&sample_pairs([0.0; 5])).unwrap(), [0.0; 5], 1e-10);
        let d = [0.1, -0.3, 0.05, 0.2, -0.4];
        assert_affine(&fit_affine_mapping(&sample_pairs(d)).unwrap(), d, 1e-10);
    }

    #[test]
    fn single_pair_fit_stays_near_identity() {
        let pair = (p(1.0, 0.5, 1.0, 1.0, 0.0), p(1.0, 0.5, 1.0, 1.0, 0.0));
        assert_affine(&fit_affine_mapping(&[pair]).unwrap(), [0.0; 5], 1e-12);
        // A lone shift is carried by the unpenalized offset.
        let moved = (p(1.0, 0.5, 1.0, 1.0, 0.0), p(1.2, 0.5, 1.0, 1.0, 0.0));
        assert_affine(&fit_affine_mapping(&[moved]).unwrap(), [0.2, 0.0, 0.0, 0.0, 0.0], 1e-10);
        assert_eq!(fit_affine_mapping(&[]), Err(Error::InsufficientPairs { got: 0, need: 1 }));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 100.0);
        assert!(accuracy(&[1.0], &[0.0]).unwrap() < 1e-6);
        assert!((accuracy(&[2.0, 2.0], &[1.8, 2.2]).unwrap() - 90.0).abs() < 1e-6);
        assert_eq!(accuracy(&[1.0], &[5.0]).unwrap(), 0.0);
        assert!(accuracy(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn convergence_examples() {
        assert!(converged(&[1.0, 2.0], &[1.0, 2.0], 1e-12).unwrap());
        assert!(!converged(&[1.0], &[0.0], 0.5).unwrap());
        assert!(converged(&[0.5], &[0.0], 0.5).unwrap());
        assert!(converged(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn optimize_from_the_answer_stays_there() {
        let x = p(1.0, 0.5, 1.2, 1.1, 0.2);
        let target = Clone_.response(&x, &probes());
        for kind in [OptimizerKind::NelderMead, OptimizerKind::ConjugateGradient] {
            let (found, r) = optimize_coarse(
                &Clone_,
                &ParameterMapping::Identity,
                &target,
                &probes(),
                &OptimizerConfig::new(kind),
                &ParamBounds::default(),
                &x,
            )
            .unwrap();
            assert_eq!(r.f_best, 0.0);
            assert_eq!(found, x);
        }
    }

    #[test]
    fn flat_model_returns_start() {
        let start = p(0.5, 0.1, 0.9, 1.3, -0.2);
        let (found, r) = optimize_coarse(
            &Flat(0.7),
            &ParameterMapping::Identity,
            &[1.0; 9],
            &probes(),
            &OptimizerConfig::new(OptimizerKind::NelderMead),
            &ParamBounds::default(),
            &start,
        )
        .unwrap();
        assert!(r.converged);
        assert_eq!(found, start);
    }

    // Output = 2 s0 + 1 through a single ReLU unit kept in its linear range.
    fn linear_in_s0() -> NetSurrogate {
        let mut w1 = vec![0.0; 7];
        w1[1] = 2.0;
        let net = MlpNetwork::from_parts(
            vec![7, 1, 1],
            vec![w1, vec![1.0]],
            vec![vec![5.0], vec![-4.0]],
            InputNorm::identity(7),
            0,
        )
        .unwrap();
        NetSurrogate { net, train: TrainConfig::default() }
    }

    #[test]
    fn linear_toy_is_inverted() {
        let model = linear_in_s0();
        let truth = 0.7;
        let target = vec![2.0 * truth + 1.0; probes().len()];
        for kind in [OptimizerKind::NelderMead, OptimizerKind::ConjugateGradient] {
            let (found, _) = optimize_coarse(
                &model,
                &ParameterMapping::Identity,
                &target,
                &probes(),
                &OptimizerConfig::new(kind),
                &ParamBounds::default(),
                &ParamBounds::default().center(),
            )
            .unwrap();
            assert!((found.s0 - truth).abs() < 1e-4, "{kind:?}: {}", found.s0);
        }
    }

    #[test]
    fn mapped_gradient_matches_differences() {
        let model = linear_in_s0();
        let mut b = [[0.0; 5]; 5];
        for (i, row) in b.iter_mut().enumerate() {
            row[i] = 1.0 + 0.1 * i as f64;
        }
        b[1][3] = 0.4;
        let mapping = ParameterMapping::Affine { b, c: [0.1; 5] };
        let target = vec![1.3; 9];
        let x = [1.0, 0.2, 1.1, 0.9, 0.1];
        let g = mapped_gradient(&model, &mapping, &target, &probes(), &x);
        let f = |v: &[f64]| {
            let xc = apply_mapping(&mapping, &HeatParams::from_slice(v));
            model.response(&xc, &probes()).iter().zip(&target).map(|(b, t)| (b - t).powi(2)).sum::<f64>()
        };
        let fd = optim::finite_diff_gradient(f, &x, 1e-6);
        for (a, e) in g.iter().zip(&fd) {
            assert!((a - e).abs() < 1e-6, "{g:?} vs {fd:?}");
        }
    }

    #[test]
    fn refine_is_repeatable_and_matches_closed_form() {
        let grid = Grid1D::new(161, 800, 1.0, 0.5).unwrap();
        // s0 = 0, k/h^2 = alpha and h/k = 100: the PDE decays at the closed-form
        // rate and the convective ends are close to holding t_inf.
        let x = p(1.0, 0.0, 1e-4, 1e-2, 0.25);
        let a = refine_with_fine(&x, &grid, &probes()).unwrap();
        assert_eq!(a, refine_with_fine(&x, &grid, &probes()).unwrap());
        let exact = AnalyticModel.response(&x, &probes()).unwrap();
        let gap = a.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        // Measured 1.04e-2, mostly from the finite h/k at the ends.
        assert!(gap < 1.5e-2, "{gap}");
    }

    #[test]
    fn equilibrium_is_preserved_by_the_fine_model() {
        let grid = Grid1D::new(41, 200, 1.0, 0.5).unwrap();
        let x = p(1.0, 0.0, 1.0, 1.0, 0.35);
        let report = fine_solver::simulate_with(&x, &grid, &vec![0.35; grid.nx], &fine_solver::ParamSource).unwrap();
        for pr in probes().iter() {
            assert!((report.field.interpolate(pr.x, pr.t) - 0.35).abs() < 1e-12);
        }
    }

    fn small_data() -> Dataset {
        let grid = Grid1D::new(11, 10, 1.0, 1.0).unwrap();
        generate_dataset(&ParamBounds::default(), 64, 0.0, 3, DataSource::Oracle, &grid).unwrap()
    }

    #[test]
    fn augment_with_zero_epochs_only_grows_data() {
        let mut data = small_data();
        let net = MlpNetwork::for_dataset(1, 4, &data, 1).unwrap();
        let mut model = NetSurrogate { net: net.clone(), train: TrainConfig::default() };
        let n0 = data.count();
        augment_and_retrain(&mut model, &mut data, &p(1.0, 0.0, 1.0, 1.0, 0.0), &[0.5; 9], &probes(), 0, 0).unwrap();
        assert_eq!(data.count(), n0 + 9);
        assert_eq!(model.net, net);
        assert!(augment_and_retrain(&mut model, &mut data, &p(1.0, 0.0, 1.0, 1.0, 0.0), &[0.5; 3], &probes(), 0, 0)
            .is_err());
    }

    #[test]
    fn augment_with_fitted_records_keeps_zero_loss() {
        let model0 = linear_in_s0();
        let x = p(1.0, 0.3, 1.0, 1.0, 0.0);
        let vals = model0.response(&x, &probes());
        let mut data = Dataset::new(Vec::new());
        let mut model = model0.clone();
        augment_and_retrain(&mut model, &mut data, &x, &vals, &probes(), 50, 1).unwrap();
        assert_eq!(model.net, model0.net);
    }

    #[test]
    fn retraining_at_candidate_reduces_its_residual() {
        let mut data = small_data();
        let net = MlpNetwork::for_dataset(2, 8, &data, 4).unwrap();
        let train = TrainConfig { learning_rate: 1e-2, epochs: 200, batch_size: 16, seed: 4, l2_penalty: 0.0 };
        let net = coarse_net::train(&net, &data, &train).unwrap().0;
        let mut model = NetSurrogate { net, train };
        let x = p(1.0, 0.8, 1.3, 0.9, -0.3);
        let fine = AnalyticModel.response(&x, &probes()).unwrap();
        let before = residual_norm(&residual(&model.response(&x, &probes()), &fine).unwrap());
        augment_and_retrain(&mut model, &mut data, &x, &fine, &probes(), 100, 9).unwrap();
        let after = residual_norm(&residual(&model.response(&x, &probes()), &fine).unwrap());
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn clone_coarse_model_converges_at_once() {
        let truth = p(1.0, 0.5, 1.0, 1.5, 0.5);
        let target = AnalyticModel.response(&truth, &probes()).unwrap();
        let mut data = Dataset::new(Vec::new());
        let cfg = SmoConfig::new(target);
        let s = run_smo(
            &cfg,
            &mut Clone_,
            &mut data,
            ParameterMapping::Identity,
            &AnalyticModel,
            &probes(),
            &ParamBounds::default(),
        )
        .unwrap();
        assert!(s.converged);
        assert_eq!(s.iteration, 1);
        assert_eq!(s.residual_norm_value, 0.0);
        assert_eq!(s.accuracy_pct, 100.0);
        assert_eq!(data.count(), 0);
    }

    #[test]
    fn huge_epsilon_converges_at_once() {
        let mut cfg = SmoConfig::new(vec![0.0; 9]);
        cfg.epsilon = f64::INFINITY;
        let mut data = Dataset::new(Vec::new());
        let s = run_smo(
            &cfg,
            &mut Flat(3.0),
            &mut data,
            ParameterMapping::Identity,
            &AnalyticModel,
            &probes(),
            &ParamBounds::default(),
        )
        .unwrap();
        assert!(s.converged);
        assert_eq!(s.history.len(), 1);
    }

    #[test]
    fn unconverged_run_keeps_history_and_grows_data() {
        let mut cfg = SmoConfig::new(vec![0.0; 9]);
        cfg.max_iterations = 4;
        let mut data = Dataset::new(Vec::new());
        let s = run_smo(
            &cfg,
            &mut Flat(30.0),
            &mut data,
            ParameterMapping::Identity,
            &AnalyticModel,
            &probes(),
            &ParamBounds::default(),
        )
        .unwrap();
        assert!(!s.converged);
        assert_eq!(s.iteration, 4);
        assert_eq!(s.history.len(), 4);
        assert_eq!(s.fine_evals, 4);
        assert_eq!(data.count(), 3 * 9);
        assert!(s.history.iter().enumerate().all(|(i, r)| r.iteration == i + 1));
    }

    #[test]
    fn affine_mode_fits_a_mapping() {
        let mut cfg = SmoConfig::new(vec![0.0; 9]);
        cfg.max_iterations = 2;
        cfg.fit_mapping = true;
        let mut data = Dataset::new(Vec::new());
        let s = run_smo(
            &cfg,
            &mut Clone_,
            &mut data,
            ParameterMapping::Identity,
            &Flat2,
            &probes(),
            &ParamBounds::default(),
        )
        .unwrap();
        assert!(matches!(s.mapping, ParameterMapping::Affine { .. }));
    }

    struct Flat2;

    impl FineModel for Flat2 {
        fn response(&self, _: &HeatParams, probes: &ProbeSet) -> Result<Vec<f64>> {
            Ok(vec![0.4; probes.len()])
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SmoConfig::new(vec![0.0; 9]);
        assert!(cfg.validate(&probes()).is_ok());
        cfg.epsilon = 0.0;
        assert!(cfg.validate(&probes()).is_err());
        cfg.epsilon = f64::NAN;
        assert!(cfg.validate(&probes()).is_err());
        let mut cfg = SmoConfig::new(vec![0.0; 9]);
        cfg.max_iterations = 0;
        assert!(cfg.validate(&probes()).is_err());
        assert!(SmoConfig::new(vec![0.0; 2]).validate(&probes()).is_err());
    }

    proptest! {
        #[test]
        fn self_accuracy_is_100(a in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
            prop_assert_eq!(accuracy(&a, &a).unwrap(), 100.0);
        }

        #[test]
        fn accuracy_bounded(a in proptest::collection::vec(-10f64..10.0, 1..20), s in -5f64..5.0) {
            let b: Vec<f64> = a.iter().map(|v| v + s).collect();
            let acc = accuracy(&a, &b).unwrap();
            prop_assert!((0.0..=100.0).contains(&acc));
        }

        #[test]
        fn convergence_monotone_in_epsilon(
            a in proptest::collection::vec(-10f64..10.0, 3),
            b in proptest::collection::vec(-10f64..10.0, 3),
            e1 in 0.0f64..20.0,
            extra in 0.0f64..20.0,
        ) {
            if converged(&a, &b, e1).unwrap() {
                prop_assert!(converged(&a, &b, e1 + extra).unwrap());
            }
        }

        #[test]
        fn identity_mapping_is_identity(v in proptest::array::uniform5(-10f64..10.0)) {
            let x = HeatParams::from_array(v);
            prop_assert_eq!(apply_mapping(&ParameterMapping::Identity, &x), x);
        }
    }
}
