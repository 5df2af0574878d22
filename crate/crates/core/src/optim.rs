//! Nelder–Mead simplex and Polak–Ribière+ nonlinear conjugate gradient, both
//! with box constraints handled by projecting trial points.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::error::{Error, Result};
use crate::math;

/// Box `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::LengthMismatch { left: lower.len(), right: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidBounds { name: "box", reason: "lower bound must not exceed upper bound" });
        }
        Ok(Self { lower, upper })
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(*l).min(*u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| *l <= *v && *v <= *u)
    }
}

type EvalFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;
type GradFn<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;

/// Function to minimize, with an optional gradient and box.
pub struct Objective<'a> {
    eval: EvalFn<'a>,
    grad: Option<GradFn<'a>>,
    bounds: Option<Bounds>,
}

impl<'a> Objective<'a> {
    pub fn new(eval: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Self { eval: Box::new(eval), grad: None, bounds: None }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64]) -> Vec<f64> + 'a) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// Analytic gradient when available, otherwise central differences.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => finite_diff_gradient(|p| self.eval(p), x, FD_STEP),
        }
    }

    pub fn bounds(&self) -> Option<&Bounds> {
        self.bounds.as_ref()
    }

    fn project(&self, x: &mut [f64]) {
        if let Some(b) = &self.bounds {
            b.project(x);
        }
    }
}

const FD_STEP: f64 = 1e-6;

/// One entry of an optimizer trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub f_best: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub iterations: usize,
    /// Objective evaluations (gradients not included).
    pub evals: usize,
    pub converged: bool,
    /// Set when a conjugate-gradient line search gave up.
    pub line_search_failed: bool,
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadOptions {
    pub ftol: f64,
    pub xtol: f64,
    pub max_iter: usize,
    /// Initial edge length per coordinate. Defaults to 5% of the box width when
    /// bounded, else 5% of `|x0_i|` (or 2.5e-4 at zero).
    pub initial_step: Option<Vec<f64>>,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { ftol: 1e-10, xtol: 1e-10, max_iter: 2000, initial_step: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub gtol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { gtol: 1e-8, max_iter: 2000 }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Nelder–Mead simplex search.
///
/// Stops when the spread of simplex values drops below `ftol`, when the
/// simplex diameter (max-norm distance from the best vertex) drops below
/// `xtol`, or after `max_iter` iterations with `converged = false`. A small
/// spread is confirmed by evaluating the simplex mean; if that point improves
/// on the best vertex by more than `ftol` it replaces the worst vertex and the
/// search goes on.
pub fn nelder_mead(obj: &Objective<'_>, x0: &[f64], opts: &NelderMeadOptions) -> Result<OptResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidConfig("nelder_mead needs at least one coordinate"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("initial point must be finite"));
    }
    if let Some(b) = obj.bounds() {
        if b.lower.len() != n {
            return Err(Error::LengthMismatch { left: n, right: b.lower.len() });
        }
    }

    let evals = Cell::new(0usize);
    let f = |x: &[f64]| {
        evals.set(evals.get() + 1);
        obj.eval(x)
    };

    let mut start = x0.to_vec();
    obj.project(&mut start);
    let mut simplex = vec![start.clone()];
    for i in 0..n {
        let step = match &opts.initial_step {
            Some(s) => s[i],
            None => match obj.bounds() {
                Some(b) => 0.05 * (b.upper[i] - b.lower[i]),
                None if start[i] != 0.0 => 0.05 * math::abs(start[i]),
                None => 2.5e-4,
            },
        };
        let mut v = start.clone();
        v[i] += step;
        obj.project(&mut v);
        if v[i] == start[i] {
            v[i] -= step;
            obj.project(&mut v);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        order.iter_mut().enumerate().for_each(|(k, o)| *o = k);

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| math::abs(a - b)))
            .fold(0.0, f64::max);
        if iterations >= opts.max_iter && !(spread < opts.ftol || diameter < opts.xtol) {
            break;
        }
        if diameter < opts.xtol {
            converged = true;
            break;
        }
        if spread < opts.ftol {
            // Equal values can come from a simplex straddling the minimum;
            // only stop if the simplex mean is no better than the best vertex.
            let mut mean = vec![0.0; n];
            for v in &simplex {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x / (n + 1) as f64;
                }
            }
            obj.project(&mut mean);
            let fm = f(&mean);
            if !(fm < values[0] - opts.ftol) || iterations >= opts.max_iter {
                converged = true;
                break;
            }
            iterations += 1;
            simplex[n] = mean;
            values[n] = fm;
            trace.push(TraceEntry { iteration: iterations, f_best: fm, evals: evals.get() });
            continue;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |coef: f64, towards: &[f64]| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(towards).map(|(c, w)| c + coef * (w - c)).collect();
            obj.project(&mut p);
            p
        };

        let worst = simplex[n].clone();
        let xr = along(-REFLECT, &worst);
        let fr = f(&xr);
        let mut shrink = false;
        if fr < values[0] {
            let xe = along(-EXPAND, &worst);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else if fr < values[n] {
            let xc = along(CONTRACT, &xr);
            let fc = f(&xc);
            if fc <= fr {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                shrink = true;
            }
        } else {
            let xc = along(CONTRACT, &worst);
            let fc = f(&xc);
            if fc < values[n] {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                shrink = true;
            }
        }
        if shrink {
            let best = simplex[0].clone();
            for k in 1..=n {
                let mut p: Vec<f64> = best.iter().zip(&simplex[k]).map(|(b, v)| b + SHRINK * (v - b)).collect();
                obj.project(&mut p);
                values[k] = f(&p);
                simplex[k] = p;
            }
        }
        let f_best = values.iter().cloned().fold(f64::INFINITY, f64::min);
        trace.push(TraceEntry { iteration: iterations, f_best, evals: evals.get() });
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Ok(OptResult {
        x_best: simplex[best].clone(),
        f_best: values[best],
        iterations,
        evals: evals.get(),
        converged,
        line_search_failed: false,
        trace,
    })
}

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// Nonlinear conjugate gradient with the Polak–Ribière+ update.
///
/// Each line search starts from a secant estimate of the exact step along the
/// search direction (exact on quadratics) and backtracks by halving until the
/// Armijo condition with `c = 1e-4` holds. The direction resets to steepest
/// descent every `n` iterations and whenever it stops being a descent
/// direction. With bounds, the stopping test uses the projected gradient.
pub fn conjugate_gradient(obj: &Objective<'_>, x0: &[f64], opts: &CgOptions) -> Result<OptResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidConfig("conjugate_gradient needs at least one coordinate"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("initial point must be finite"));
    }
    let mut evals = 0usize;
    let mut x = x0.to_vec();
    obj.project(&mut x);
    let mut fx = obj.eval(&x);
    evals += 1;
    let mut g = obj.gradient(&x);
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = projected_grad_norm(obj, &x, &g) < opts.gtol;
    let mut line_search_failed = false;
    let mut last_step = 1.0;
    let mut since_restart = 0;

    while !converged && iterations < opts.max_iter {
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            since_restart = 0;
        }

        let step0 = secant_step(obj, &x, &g, &d, slope).unwrap_or(last_step);
        let mut alpha = step0;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            obj.project(&mut trial);
            let ft = obj.eval(&trial);
            evals += 1;
            let moved: f64 = trial.iter().zip(&x).zip(&g).map(|((t, xi), gi)| gi * (t - xi)).sum();
            if ft.is_finite() && ft <= fx + ARMIJO_C * moved && trial != x {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= BACKTRACK;
        }
        iterations += 1;
        let Some((x_new, f_new)) = accepted else {
            line_search_failed = true;
            trace.push(TraceEntry { iteration: iterations, f_best: fx, evals });
            break;
        };
        last_step = alpha;
        let g_new = obj.gradient(&x_new);
        since_restart += 1;
        let beta = if since_restart >= n {
            since_restart = 0;
            0.0
        } else {
            let gg = dot(&g, &g);
            if gg > 0.0 {
                (g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum::<f64>() / gg).max(0.0)
            } else {
                0.0
            }
        };
        for (di, gi) in d.iter_mut().zip(&g_new) {
            *di = -gi + beta * *di;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(TraceEntry { iteration: iterations, f_best: fx, evals });
        converged = projected_grad_norm(obj, &x, &g) < opts.gtol;
    }

    Ok(OptResult { x_best: x, f_best: fx, iterations, evals, converged, line_search_failed, trace })
}

// Step along `d` that zeroes the directional derivative, from a gradient probe.
fn secant_step(obj: &Objective<'_>, x: &[f64], g: &[f64], d: &[f64], slope: f64) -> Option<f64> {
    let dn = math::sqrt(dot(d, d));
    if dn == 0.0 {
        return None;
    }
    let sigma = 1e-4 * (1.0 + math::sqrt(dot(x, x))) / dn;
    let mut probe: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + sigma * di).collect();
    obj.project(&mut probe);
    let s: Vec<f64> = probe.iter().zip(x).map(|(p, xi)| p - xi).collect();
    let ss = dot(&s, &s);
    if ss == 0.0 {
        return None;
    }
    let gp = obj.gradient(&probe);
    let curvature: f64 = gp.iter().zip(g).zip(&s).map(|((a, b), si)| (a - b) * si).sum::<f64>() / ss;
    let step = -slope / (curvature * dot(d, d));
    (curvature > 0.0 && step.is_finite() && step > 0.0).then_some(step)
}

fn projected_grad_norm(obj: &Objective<'_>, x: &[f64], g: &[f64]) -> f64 {
    match obj.bounds() {
        None => math::sqrt(dot(g, g)),
        Some(b) => {
            let mut p: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - gi).collect();
            b.project(&mut p);
            math::sqrt(p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum())
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central-difference gradient with step `h` in every coordinate.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
