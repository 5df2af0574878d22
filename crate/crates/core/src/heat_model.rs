//! Physical problem definition: parameters, space-time grid, probe locations,
//! the closed-form reference temperature and training-set generation.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fine_solver;
use crate::math;

/// Number of optimizable physical parameters.
pub const N_PARAMS: usize = 5;

/// Parameter names in vector order.
pub const PARAM_NAMES: [&str; N_PARAMS] = ["alpha", "s0", "k_cond", "h_coef", "t_inf"];

/// Physical parameters shared by the fine and the coarse model.
///
/// `s0` is the amplitude of a source that is constant in space and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    /// Thermal diffusivity.
    pub alpha: f64,
    /// Source amplitude (temperature per unit time).
    pub s0: f64,
    /// Thermal conductivity.
    pub k_cond: f64,
    /// Heat transfer coefficient.
    pub h_coef: f64,
    /// Ambient temperature.
    pub t_inf: f64,
}

impl HeatParams {
    /// Builds a validated parameter set.
    pub fn new(alpha: f64, s0: f64, k_cond: f64, h_coef: f64, t_inf: f64) -> Result<Self> {
        let p = Self { alpha, s0, k_cond, h_coef, t_inf };
        p.validate()?;
        Ok(p)
    }

    /// Checks finiteness and positivity of `alpha`, `k_cond` and `h_coef`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in PARAM_NAMES.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(Error::InvalidParams { name, reason: "must be finite" });
            }
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParams { name: "alpha", reason: "must be positive" });
        }
        if self.k_cond <= 0.0 {
            return Err(Error::InvalidParams { name: "k_cond", reason: "must be positive" });
        }
        if self.h_coef <= 0.0 {
            return Err(Error::InvalidParams { name: "h_coef", reason: "must be positive" });
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [self.alpha, self.s0, self.k_cond, self.h_coef, self.t_inf]
    }

    /// Unvalidated conversion from vector order.
    pub fn from_array(v: [f64; N_PARAMS]) -> Self {
        Self { alpha: v[0], s0: v[1], k_cond: v[2], h_coef: v[3], t_inf: v[4] }
    }

    /// Unvalidated conversion from a slice in vector order.
    ///
    /// # Panics
    /// If `v.len() != 5`.
    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), N_PARAMS, "parameter vector must have 5 entries");
        Self::from_array([v[0], v[1], v[2], v[3], v[4]])
    }
}

/// Uniform space-time discretization of `[0, x_max] x [0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub nx: usize,
    pub nt: usize,
    pub x_max: f64,
    pub t_max: f64,
}

impl Grid1D {
    pub fn new(nx: usize, nt: usize, x_max: f64, t_max: f64) -> Result<Self> {
        let g = Self { nx, nt, x_max, t_max };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 {
            return Err(Error::TooFewNodes { nx: self.nx });
        }
        if self.nt < 1 {
            return Err(Error::InvalidGrid("nt must be at least 1"));
        }
        if !(self.x_max.is_finite() && self.x_max > 0.0) {
            return Err(Error::InvalidGrid("x_max must be positive and finite"));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidGrid("t_max must be positive and finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.x_max / (self.nx - 1) as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_max / self.nt as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        (0.0..=self.x_max).contains(&x) && (0.0..=self.t_max).contains(&t)
    }
}

/// A space-time sampling location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub x: f64,
    pub t: f64,
}

/// Ordered probe locations; the order fixes the response-vector layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    probes: Vec<Probe>,
}

impl ProbeSet {
    pub fn new(probes: Vec<Probe>) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::EmptyProbeSet);
        }
        for (index, p) in probes.iter().enumerate() {
            if !(p.x.is_finite() && p.t.is_finite()) || p.x < 0.0 || p.t < 0.0 {
                return Err(Error::ProbeOutsideDomain { index, x: p.x, t: p.t });
            }
        }
        Ok(Self { probes })
    }

    /// Rejects probes outside `[0, x_max] x [0, t_max]`.
    pub fn check_domain(&self, x_max: f64, t_max: f64) -> Result<()> {
        for (index, p) in self.probes.iter().enumerate() {
            if p.x > x_max || p.t > t_max {
                return Err(Error::ProbeOutsideDomain { index, x: p.x, t: p.t });
            }
        }
        Ok(())
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Probe> {
        self.probes.iter()
    }
}

/// One training example: parameters, location and temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataRecord {
    pub params: HeatParams,
    pub x: f64,
    pub t: f64,
    pub temperature: f64,
}

impl DataRecord {
    /// Network input layout: `[alpha, s0, k_cond, h_coef, t_inf, x, t]`.
    pub fn input(&self) -> [f64; 7] {
        network_input(&self.params, self.x, self.t)
    }
}

/// Network input layout shared by training and inference.
pub fn network_input(params: &HeatParams, x: f64, t: f64) -> [f64; 7] {
    [params.alpha, params.s0, params.k_cond, params.h_coef, params.t_inf, x, t]
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<DataRecord>,
}

impl Dataset {
    pub fn new(records: Vec<DataRecord>) -> Self {
        Self { records }
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: DataRecord) {
        self.records.push(record);
    }

    /// Checks domain membership and finiteness of every record.
    pub fn validate(&self, x_max: f64, t_max: f64) -> Result<()> {
        for (index, r) in self.records.iter().enumerate() {
            if !(0.0..=x_max).contains(&r.x) || !(0.0..=t_max).contains(&r.t) {
                return Err(Error::ProbeOutsideDomain { index, x: r.x, t: r.t });
            }
            if !r.temperature.is_finite() {
                return Err(Error::InvalidConfig("dataset temperature is not finite"));
            }
        }
        Ok(())
    }
}

/// Temperatures `T(x_i, t_n)` on a grid, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureField {
    values: Vec<f64>,
    grid: Grid1D,
}

impl TemperatureField {
    pub(crate) fn from_rows(values: Vec<f64>, grid: Grid1D) -> Self {
        debug_assert_eq!(values.len(), grid.nx * (grid.nt + 1));
        Self { values, grid }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Entry `(i, n)`: node `i` at time step `n`.
    #[inline]
    pub fn at(&self, i: usize, n: usize) -> f64 {
        self.values[n * self.grid.nx + i]
    }

    /// Spatial profile at step `n`.
    pub fn row(&self, n: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[n * nx..(n + 1) * nx]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bilinear interpolation in `(x, t)`; coordinates within `1e-9` cells of a
    /// node snap to it so node probes return stored values exactly.
    pub fn interpolate(&self, x: f64, t: f64) -> f64 {
        let (i, fx) = locate(x / self.grid.dx(), self.grid.nx - 1);
        let (n, ft) = locate(t / self.grid.dt(), self.grid.nt);
        let v00 = self.at(i, n);
        if fx == 0.0 && ft == 0.0 {
            return v00;
        }
        let v10 = if fx == 0.0 { v00 } else { self.at(i + 1, n) };
        let v01 = if ft == 0.0 { v00 } else { self.at(i, n + 1) };
        let v11 = if fx == 0.0 || ft == 0.0 { 0.0 } else { self.at(i + 1, n + 1) };
        if ft == 0.0 {
            return (1.0 - fx) * v00 + fx * v10;
        }
        if fx == 0.0 {
            return (1.0 - ft) * v00 + ft * v01;
        }
        (1.0 - fx) * (1.0 - ft) * v00 + fx * (1.0 - ft) * v10 + (1.0 - fx) * ft * v01 + fx * ft * v11
    }
}

// Cell index and fractional offset of a scaled coordinate on `0..=last`.
fn locate(s: f64, last: usize) -> (usize, f64) {
    let r = math::round(s);
    if math::abs(s - r) <= 1e-9 * (1.0 + math::abs(r)) {
        let idx = (r.max(0.0) as usize).min(last);
        return (idx, 0.0);
    }
    let cell = (math::floor(s).max(0.0) as usize).min(last - 1);
    (cell, s - cell as f64)
}

/// Source term `S(x, t)`; a constant amplitude.
#[inline]
pub fn source_eval(params: &HeatParams, _x: f64, _t: f64) -> f64 {
    params.s0
}

/// Closed-form reference temperature
///
/// `T = sin(pi x) e^{-(k/h^2) pi^2 t} + T_inf + (s0/k)(1 - e^{-(k/h^2) pi^2 t})`.
///
/// The decay rate is `(k/h^2) pi^2`, independent of `alpha`. It is kept as the
/// reference even though the PDE itself would decay at `alpha pi^2`.
pub fn analytic_temperature(params: &HeatParams, x: f64, t: f64) -> Result<f64> {
    if params.k_cond == 0.0 {
        return Err(Error::DivisionByZero("k_cond"));
    }
    if params.h_coef == 0.0 {
        return Err(Error::DivisionByZero("h_coef"));
    }
    let rate = params.k_cond / (params.h_coef * params.h_coef) * PI * PI;
    let decay = math::exp(-rate * t);
    Ok(math::sin(PI * x) * decay + params.t_inf + params.s0 / params.k_cond * (1.0 - decay))
}

/// `T(x_i, 0) = sin(pi x_i) + t_inf`.
pub fn initial_condition(params: &HeatParams, grid: &Grid1D) -> Vec<f64> {
    (0..grid.nx).map(|i| math::sin(PI * grid.x(i)) + params.t_inf).collect()
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Per-parameter boxes in `[alpha, s0, k_cond, h_coef, t_inf]` order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub intervals: [Interval; N_PARAMS],
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            intervals: [
                Interval::new(0.1, 2.0),
                Interval::new(-2.0, 2.0),
                Interval::new(0.1, 2.0),
                Interval::new(0.1, 2.0),
                Interval::new(-1.0, 1.0),
            ],
        }
    }
}

impl ParamBounds {
    pub fn new(intervals: [Interval; N_PARAMS]) -> Result<Self> {
        let b = Self { intervals };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, (name, iv)) in PARAM_NAMES.iter().zip(self.intervals.iter()).enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) {
                return Err(Error::InvalidBounds { name, reason: "bounds must be finite" });
            }
            if iv.lo >= iv.hi {
                return Err(Error::InvalidBounds { name, reason: "lower bound must be below upper bound" });
            }
            // alpha, k_cond, h_coef
            if matches!(k, 0 | 2 | 3) && iv.lo <= 0.0 {
                return Err(Error::InvalidBounds { name, reason: "lower bound must be positive" });
            }
        }
        Ok(())
    }

    pub fn lower(&self) -> [f64; N_PARAMS] {
        self.intervals.map(|iv| iv.lo)
    }

    pub fn upper(&self) -> [f64; N_PARAMS] {
        self.intervals.map(|iv| iv.hi)
    }

    pub fn center(&self) -> HeatParams {
        HeatParams::from_array(self.intervals.map(|iv| iv.mid()))
    }

    pub fn project(&self, p: &HeatParams) -> HeatParams {
        let v = p.to_array();
        HeatParams::from_array(core::array::from_fn(|k| self.intervals[k].clamp(v[k])))
    }

    pub fn contains(&self, p: &HeatParams) -> bool {
        p.to_array().iter().zip(self.intervals.iter()).all(|(v, iv)| (iv.lo..=iv.hi).contains(v))
    }
}

/// Where training temperatures come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    /// Closed-form reference.
    Oracle,
    /// Finite-difference solve on the given grid.
    Fine,
}

/// Draws `n_samples` records: parameters uniform in `bounds`, `(x, t)` uniform
/// over the grid's domain, temperature from `source` plus `N(0, noise_sigma^2)`.
///
/// Deterministic in `seed`.
pub fn generate_dataset(
    bounds: &ParamBounds,
    n_samples: usize,
    noise_sigma: f64,
    seed: u64,
    source: DataSource,
    grid: &Grid1D,
) -> Result<Dataset> {
    bounds.validate()?;
    grid.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1"));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig("noise_sigma must be finite and non-negative"));
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|_| Error::InvalidConfig("noise_sigma"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let params = HeatParams::from_array(core::array::from_fn(|k| {
            let iv = bounds.intervals[k];
            rng.random_range(iv.lo..iv.hi)
        }));
        let x = rng.random_range(0.0..=grid.x_max);
        let t = rng.random_range(0.0..=grid.t_max);
        let clean = match source {
            DataSource::Oracle => analytic_temperature(&params, x, t)?,
            DataSource::Fine => fine_solver::simulate(&params, grid)?.field.interpolate(x, t),
        };
        let eps = if noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        records.push(DataRecord { params, x, t, temperature: clean + eps });
    }
    Ok(Dataset { records })
}
