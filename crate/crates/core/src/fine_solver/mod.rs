//! Finite-difference fine model.
//!
//! Central differences in space, trapezoidal (Crank–Nicolson) integration in
//! time, Robin boundaries eliminated through ghost nodes. The Robin law is
//! applied with the normal pointing into the rod,
//!
//! ```text
//! k dT/dn = h (T - T_inf)
//! ```
//!
//! so a boundary hotter than ambient loses heat. Internally the solver advances
//! the excess temperature `T - T_inf`, which keeps the ambient equilibrium
//! exact in floating point.

mod stencil;
mod tridiagonal;

use alloc::vec::Vec;

pub use stencil::{fd_first_difference, laplacian_1d, FdScheme};
pub use tridiagonal::{solve_tridiagonal, TridiagonalSystem, PIVOT_EPS};

use crate::error::{Error, Result};
use crate::heat_model::{initial_condition, source_eval, Grid1D, HeatParams, ProbeSet, TemperatureField};
use crate::math;

/// Rod end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Volumetric source and boundary-flux forcing seen by the solver.
///
/// The default forcing is [`ParamSource`]. Other implementations exist to
/// inject manufactured solutions.
pub trait Forcing {
    fn source(&self, params: &HeatParams, x: f64, t: f64) -> f64;

    /// Extra flux `q` in `k dT/dn = h (T - T_inf) + q` at the given end.
    fn boundary_flux(&self, _params: &HeatParams, _side: Side, _t: f64) -> f64 {
        0.0
    }
}

/// The constant source `s0` from the parameters, no extra boundary flux.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParamSource;

impl Forcing for ParamSource {
    #[inline]
    fn source(&self, params: &HeatParams, x: f64, t: f64) -> f64 {
        source_eval(params, x, t)
    }
}

/// Result of a full time integration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub field: TemperatureField,
    pub max_abs_value: f64,
    pub steps_taken: usize,
}

/// Ghost-node temperature outside the given end.
///
/// Left: `T_{-1} = T_1 - (2 dx h / k)(T_0 - T_inf)`; the right end mirrors it.
pub fn apply_robin_ghost(params: &HeatParams, row: &[f64], grid: &Grid1D, side: Side) -> f64 {
    ghost_with_flux(params, row, grid.dx(), side, 0.0)
}

fn ghost_with_flux(params: &HeatParams, row: &[f64], dx: f64, side: Side, q: f64) -> f64 {
    let (boundary, neighbour) = match side {
        Side::Left => (row[0], row[1]),
        Side::Right => (row[row.len() - 1], row[row.len() - 2]),
    };
    neighbour - 2.0 * dx / params.k_cond * (params.h_coef * (boundary - params.t_inf) + q)
}

/// Semi-discrete right-hand side `dT/dt` at every node.
pub fn heat_rhs(params: &HeatParams, row: &[f64], grid: &Grid1D, t: f64) -> Result<Vec<f64>> {
    heat_rhs_with(params, row, grid, t, &ParamSource)
}

pub fn heat_rhs_with(
    params: &HeatParams,
    row: &[f64],
    grid: &Grid1D,
    t: f64,
    forcing: &dyn Forcing,
) -> Result<Vec<f64>> {
    let nx = row.len();
    if nx != grid.nx {
        return Err(Error::LengthMismatch { left: grid.nx, right: nx });
    }
    let dx = grid.dx();
    let lap = laplacian_1d(row, dx)?;
    let inv = 1.0 / (dx * dx);
    let gl = ghost_with_flux(params, row, dx, Side::Left, forcing.boundary_flux(params, Side::Left, t));
    let gr = ghost_with_flux(params, row, dx, Side::Right, forcing.boundary_flux(params, Side::Right, t));

    let mut out = Vec::with_capacity(nx);
    out.push(params.alpha * ((row[1] - row[0]) - (row[0] - gl)) * inv + forcing.source(params, 0.0, t));
    for (j, l) in lap.iter().enumerate() {
        out.push(params.alpha * l + forcing.source(params, grid.x(j + 1), t));
    }
    out.push(
        params.alpha * ((gr - row[nx - 1]) - (row[nx - 1] - row[nx - 2])) * inv
            + forcing.source(params, grid.x(nx - 1), t),
    );
    Ok(out)
}

/// Crank–Nicolson system for one step from `t_n` to `t_n + dt`.
///
/// The unknowns are the excess temperatures `T^{n+1} - T_inf`:
/// `(I - dt/2 A) u^{n+1} = (I + dt/2 A) u^n + dt * S_avg`, with `A` the
/// Robin-adjusted central Laplacian scaled by `alpha` and `S_avg` the
/// trapezoidal average of the source over the step.
pub fn assemble_crank_nicolson(
    params: &HeatParams,
    grid: &Grid1D,
    current_row: &[f64],
    t_n: f64,
) -> Result<TridiagonalSystem> {
    if current_row.len() != grid.nx {
        return Err(Error::LengthMismatch { left: grid.nx, right: current_row.len() });
    }
    let excess: Vec<f64> = current_row.iter().map(|v| v - params.t_inf).collect();
    assemble_excess(params, grid, &excess, t_n, &ParamSource)
}

fn assemble_excess(
    params: &HeatParams,
    grid: &Grid1D,
    u: &[f64],
    t_n: f64,
    forcing: &dyn Forcing,
) -> Result<TridiagonalSystem> {
    grid.validate()?;
    let nx = grid.nx;
    let last = nx - 1;
    let (dx, dt) = (grid.dx(), grid.dt());
    let t_next = t_n + dt;
    let lam = 0.5 * params.alpha * dt / (dx * dx);
    let beta = 2.0 * dx * params.h_coef / params.k_cond;
    let flux_gain = lam * 2.0 * dx / params.k_cond;

    let mut lower = Vec::with_capacity(last);
    let mut diag = Vec::with_capacity(nx);
    let mut upper = Vec::with_capacity(last);
    let mut rhs = Vec::with_capacity(nx);

    let src = |x: f64| 0.5 * dt * (forcing.source(params, x, t_n) + forcing.source(params, x, t_next));
    let flux = |side| forcing.boundary_flux(params, side, t_n) + forcing.boundary_flux(params, side, t_next);

    diag.push(1.0 + lam * (2.0 + beta));
    upper.push(-2.0 * lam);
    rhs.push(u[0] + lam * (2.0 * (u[1] - u[0]) - beta * u[0]) - flux_gain * flux(Side::Left) + src(0.0));

    for i in 1..last {
        lower.push(-lam);
        diag.push(1.0 + 2.0 * lam);
        upper.push(-lam);
        rhs.push(u[i] + lam * ((u[i + 1] - u[i]) - (u[i] - u[i - 1])) + src(grid.x(i)));
    }

    lower.push(-2.0 * lam);
    diag.push(1.0 + lam * (2.0 + beta));
    rhs.push(
        u[last] + lam * (2.0 * (u[last - 1] - u[last]) - beta * u[last]) - flux_gain * flux(Side::Right)
            + src(grid.x(last)),
    );

    TridiagonalSystem::new(lower, diag, upper, rhs)
}

/// Integrates `nt` Crank–Nicolson steps from the closed-form initial profile.
pub fn simulate(params: &HeatParams, grid: &Grid1D) -> Result<SolverReport> {
    let initial = initial_condition(params, grid);
    simulate_with(params, grid, &initial, &ParamSource)
}

/// [`simulate`] with an explicit initial row and forcing.
pub fn simulate_with(
    params: &HeatParams,
    grid: &Grid1D,
    initial: &[f64],
    forcing: &dyn Forcing,
) -> Result<SolverReport> {
    grid.validate()?;
    if initial.len() != grid.nx {
        return Err(Error::LengthMismatch { left: grid.nx, right: initial.len() });
    }
    let nx = grid.nx;
    let mut values = Vec::with_capacity(nx * (grid.nt + 1));
    values.extend_from_slice(initial);
    let mut u: Vec<f64> = initial.iter().map(|v| v - params.t_inf).collect();
    let mut max_abs = initial.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    for n in 0..grid.nt {
        let system = assemble_excess(params, grid, &u, grid.t(n), forcing)?;
        u = solve_tridiagonal(&system)?;
        for &e in &u {
            let v = e + params.t_inf;
            if !v.is_finite() {
                return Err(Error::NonFinite { step: n + 1 });
            }
            max_abs = max_abs.max(math::abs(v));
            values.push(v);
        }
    }
    Ok(SolverReport { field: TemperatureField::from_rows(values, *grid), max_abs_value: max_abs, steps_taken: grid.nt })
}

/// Fine-model response: the simulated field sampled at each probe.
pub fn fine_response(params: &HeatParams, grid: &Grid1D, probes: &ProbeSet) -> Result<Vec<f64>> {
    probes.check_domain(grid.x_max, grid.t_max)?;
    let report = simulate(params, grid)?;
    Ok(probes.iter().map(|p| report.field.interpolate(p.x, p.t)).collect())
}
