//! Local plus global externalities with two-dimensional conjectures.
//!
//! Agent `i` earns `alpha a_i - a_i^2 / 2 + a_i x_i + y_i` where
//! `y_i = beta * sum_{j != i} a_j`. It observes only its payoff and holds a
//! fixed perceived centrality `c_i = x_hat_i / y_hat_i`, which pins down how
//! it splits the payoff surprise between the local and global terms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve_linear, SCE_TOL};
use crate::error::{invalid, Error, Result};
use crate::game::{aggregate, aggregates, best_reply, payoff, GameSpec};
use crate::net::WeightedNetwork;
use crate::par;

/// Damping factor used outside the guaranteed-convergence region.
pub const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalGameSpec {
    base: GameSpec,
    beta: f64,
    c: Vec<f64>,
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
}

impl GlobalGameSpec {
    /// `Y_i` defaults to `[0, beta * sum_{j != i} a_max_j]`.
    pub fn new(base: GameSpec, beta: f64, c: Vec<f64>) -> Result<Self> {
        let n = base.n();
        if c.len() != n {
            return Err(invalid(format!("c has {} entries, expected {n}", c.len())));
        }
        if !beta.is_finite() {
            return Err(invalid("beta is not finite"));
        }
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("c[{i}] is not finite")));
        }
        let total: f64 = base.a_max().iter().sum();
        let (y_lo, y_hi) = (0..n)
            .map(|i| {
                let span = beta * (total - base.a_max()[i]);
                (span.min(0.0), span.max(0.0))
            })
            .unzip();
        Ok(Self { base, beta, c, y_lo, y_hi })
    }

    pub fn with_y_bounds(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let n = self.n();
        if lo.len() != n || hi.len() != n {
            return Err(invalid(format!("y_bounds must have {n} entries")));
        }
        if let Some(i) = (0..n).find(|&i| !(lo[i] <= hi[i])) {
            return Err(invalid(format!("y_bounds[{i}] = [{}, {}] is empty", lo[i], hi[i])));
        }
        self.y_lo = lo;
        self.y_hi = hi;
        Ok(self)
    }

    pub fn with_c(&self, c: Vec<f64>) -> Result<Self> {
        let mut g = Self::new(self.base.clone(), self.beta, c)?;
        g.y_lo = self.y_lo.clone();
        g.y_hi = self.y_hi.clone();
        Ok(g)
    }

    pub fn base(&self) -> &GameSpec {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn y_lo(&self) -> &[f64] {
        &self.y_lo
    }

    pub fn y_hi(&self) -> &[f64] {
        &self.y_hi
    }

    /// The common intercept.
    pub fn alpha(&self) -> f64 {
        self.base.alpha()[0]
    }

    /// Upper end of the admissible range of `c_i`: `sum_{j != i} z_ij / beta`.
    pub fn c_max(&self, i: usize) -> f64 {
        self.base.net().row_sum(i) / self.beta
    }

    /// Common `alpha > 0`, nonnegative `Z` and `0 < c_i <= c_max(i)`.
    pub fn check_learning_preconditions(&self) -> Result<()> {
        let alpha = self.base.alpha();
        if !(alpha[0] > 0.0) || alpha.iter().any(|&a| a != alpha[0]) {
            return Err(Error::NotApplicable("global learning needs a common alpha > 0".into()));
        }
        if !self.base.net().is_nonnegative() {
            return Err(Error::NotApplicable("global learning needs a nonnegative Z".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::NotApplicable(format!("global learning needs beta > 0, got {}", self.beta)));
        }
        for i in 0..self.n() {
            let hi = self.c_max(i);
            // Accept the upper boundary up to rounding in z / beta.
            if !(self.c[i] > 0.0 && self.c[i] <= hi * (1.0 + 1e-12)) {
                return Err(Error::NotApplicable(format!(
                    "c[{i}] = {} is outside the admissible range (0, {hi}]",
                    self.c[i]
                )));
            }
        }
        Ok(())
    }
}

/// `y_i = beta * sum_{j != i} a_j`.
pub fn global_state(g: &GlobalGameSpec, actions: &[f64], i: usize) -> f64 {
    let total: f64 = actions.iter().sum();
    g.beta * (total - actions[i])
}

pub fn global_states(g: &GlobalGameSpec, actions: &[f64]) -> Vec<f64> {
    (0..g.n()).map(|i| global_state(g, actions, i)).collect()
}

pub fn global_payoff(g: &GlobalGameSpec, actions: &[f64], i: usize) -> f64 {
    payoff(&g.base, actions, i) + global_state(g, actions, i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalConjecture {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalViolation {
    pub agent: usize,
    pub detail: String,
}

/// Checks best replies and feedback consistency of `(x_hat, y_hat)`:
/// inactive agents need `x_hat <= -alpha` and `y_hat = y`; active ones need
/// `a = alpha + x_hat` and `y_hat = y + a (x - x_hat)`.
pub fn check_global_sce(g: &GlobalGameSpec, actions: &[f64], conj: &GlobalConjecture) -> Result<Vec<GlobalViolation>> {
    let n = g.n();
    g.base.check_actions(actions)?;
    if conj.x_hat.len() != n || conj.y_hat.len() != n {
        return Err(crate::error::usage(format!("conjectures must have {n} entries")));
    }
    let mut out = Vec::new();
    for i in 0..n {
        let (a, xh, yh) = (actions[i], conj.x_hat[i], conj.y_hat[i]);
        let alpha = g.base.alpha()[i];
        let x = aggregate(g.base.net(), actions, i);
        let y = global_state(g, actions, i);
        let br = best_reply(alpha, g.base.a_max()[i], xh);
        if (br - a).abs() > SCE_TOL {
            out.push(GlobalViolation { agent: i, detail: format!("a = {a} but best reply to x_hat = {xh} is {br}") });
        }
        let expected_y = if a > 0.0 { y + a * (x - xh) } else { y };
        if (yh - expected_y).abs() > SCE_TOL * expected_y.abs().max(1.0) {
            out.push(GlobalViolation {
                agent: i,
                detail: format!("y_hat = {yh} but the payoff implies {expected_y}"),
            });
        }
    }
    Ok(out)
}

/// `b = (I - Z)^{-1} alpha`.
pub fn bonacich(net: &WeightedNetwork, alpha: &[f64]) -> Result<Vec<f64>> {
    let n = net.n();
    if alpha.len() != n {
        return Err(invalid(format!("alpha has {} entries, expected {n}", alpha.len())));
    }
    let m = DMatrix::identity(n, n) - net.matrix();
    let b = solve_linear(m, DVector::from_column_slice(alpha), "I - Z (Bonacich system)")?;
    Ok(b.iter().copied().collect())
}

/// `c'_i = x_i / y_i`.
pub fn true_centrality(g: &GlobalGameSpec, actions: &[f64], i: usize) -> Result<f64> {
    let y = global_state(g, actions, i);
    if y == 0.0 {
        return Err(Error::NotApplicable(format!("true centrality of agent {i} is undefined at y = 0")));
    }
    Ok(aggregate(g.base.net(), actions, i) / y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStep {
    pub actions: Vec<f64>,
    pub next_x_hat: Vec<f64>,
    /// `y_hat` implied by the payoff message and `next_x_hat`.
    pub y_hat: Vec<f64>,
}

fn step_unchecked(g: &GlobalGameSpec, x_hat: &[f64]) -> GlobalStep {
    let alpha = g.alpha();
    let actions: Vec<f64> = x_hat.iter().map(|x| alpha + x).collect();
    let x = aggregates(g.base.net(), &actions);
    let y = global_states(g, &actions);
    let mut next_x_hat = Vec::with_capacity(g.n());
    let mut y_hat = Vec::with_capacity(g.n());
    for i in 0..g.n() {
        let (a, c) = (actions[i], g.c[i]);
        let nx = c * (a * x[i] + y[i]) / (1.0 + c * a);
        let m = global_payoff(g, &actions, i);
        next_x_hat.push(nx);
        y_hat.push(m - alpha * a + 0.5 * a * a - a * nx);
    }
    GlobalStep { actions, next_x_hat, y_hat }
}

/// One synchronous update `x_hat' = c (a x + y) / (1 + c a)` with `a = alpha + x_hat`.
pub fn global_learn_step(g: &GlobalGameSpec, x_hat: &[f64]) -> Result<GlobalStep> {
    g.check_learning_preconditions()?;
    if x_hat.len() != g.n() {
        return Err(crate::error::usage(format!("x_hat must have {} entries", g.n())));
    }
    Ok(step_unchecked(g, x_hat))
}

/// `H_i(a) = alpha + c_i (a_i x_i + y_i) / (a_i c_i + 1) - a_i`.
pub fn fixed_point_residuals(g: &GlobalGameSpec, actions: &[f64]) -> Vec<f64> {
    let alpha = g.alpha();
    let x = aggregates(g.base.net(), actions);
    let y = global_states(g, actions);
    (0..g.n())
        .map(|i| {
            let (a, c) = (actions[i], g.c[i]);
            alpha + c * (a * x[i] + y[i]) / (a * c + 1.0) - a
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlobalMethod {
    /// Plain iteration if the convergence condition holds, else damped then Gauss–Seidel.
    Auto,
    Plain,
    Damped,
    GaussSeidel,
}

impl GlobalMethod {
    pub fn label(self) -> &'static str {
        match self {
            GlobalMethod::Auto => "auto",
            GlobalMethod::Plain => "plain",
            GlobalMethod::Damped => "damped",
            GlobalMethod::GaussSeidel => "gauss-seidel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSolution {
    pub actions: Vec<f64>,
    pub conjectures: GlobalConjecture,
    /// `max_i |H_i|` at `actions`.
    pub residual: f64,
    pub iterations: usize,
    /// The method that produced the answer (never `Auto`).
    pub method: GlobalMethod,
}

fn run_iteration(g: &GlobalGameSpec, method: GlobalMethod, start: Vec<f64>, tol: f64, max_iter: usize) -> (Vec<f64>, f64, usize) {
    let alpha = g.alpha();
    let mut a = start;
    let mut best = (a.clone(), max_abs(&fixed_point_residuals(g, &a)));
    for it in 0..max_iter {
        if best.1 < tol {
            return (best.0, best.1, it);
        }
        match method {
            GlobalMethod::Plain | GlobalMethod::Damped => {
                let x_hat: Vec<f64> = a.iter().map(|v| v - alpha).collect();
                let s = step_unchecked(g, &x_hat);
                let eta = if method == GlobalMethod::Plain { 1.0 } else { DAMPING };
                for i in 0..g.n() {
                    a[i] = (1.0 - eta) * a[i] + eta * (alpha + s.next_x_hat[i]);
                }
            }
            GlobalMethod::GaussSeidel => {
                for i in 0..g.n() {
                    let x = aggregate(g.base.net(), &a, i);
                    let y = global_state(g, &a, i);
                    a[i] = quadratic_root(alpha, g.c[i], x, y);
                }
            }
            GlobalMethod::Auto => unreachable!("auto is resolved by the caller"),
        }
        if a.iter().any(|v| !v.is_finite()) {
            break;
        }
        let r = max_abs(&fixed_point_residuals(g, &a));
        if r < best.1 {
            best = (a.clone(), r);
        }
    }
    let iters = max_iter;
    (best.0, best.1, iters)
}

/// Positive root of `c a^2 + (1 - alpha c - c x) a - (alpha + c y) = 0`,
/// which is `H_i = 0` solved for `a_i` with the others fixed.
pub fn quadratic_root(alpha: f64, c: f64, x: f64, y: f64) -> f64 {
    let b = 1.0 - alpha * c - c * x;
    let k = alpha + c * y;
    let disc = (b * b + 4.0 * c * k).sqrt();
    // Rationalised form avoids cancellation when b > 0.
    if b >= 0.0 {
        2.0 * k / (b + disc)
    } else {
        (disc - b) / (2.0 * c)
    }
}

/// Solves `H(a) = 0` starting from `a = alpha` (that is, `x_hat = 0`).
pub fn solve_global_sce(g: &GlobalGameSpec, method: GlobalMethod, tol: f64, max_iter: usize) -> Result<GlobalSolution> {
    g.check_learning_preconditions()?;
    let alpha = g.alpha();
    let start = vec![alpha; g.n()];
    let plan: Vec<GlobalMethod> = match method {
        GlobalMethod::Auto if check_homeo2(g).all => vec![GlobalMethod::Plain],
        GlobalMethod::Auto => vec![GlobalMethod::Damped, GlobalMethod::GaussSeidel],
        m => vec![m],
    };
    let mut best: Option<(Vec<f64>, f64, usize, GlobalMethod)> = None;
    let mut used = 0usize;
    for m in plan {
        let (a, r, it) = run_iteration(g, m, start.clone(), tol, max_iter);
        used += it;
        let better = best.as_ref().map_or(true, |b| r < b.1);
        if better {
            best = Some((a, r, used, m));
        }
        if r < tol {
            break;
        }
    }
    let (actions, residual, iterations, method) = best.expect("at least one method ran");
    if !(residual < tol) {
        return Err(Error::NoConvergence { iterations: used, best_residual: residual });
    }
    let x_hat: Vec<f64> = actions.iter().map(|a| a - alpha).collect();
    // ŷ read off the realized payoff, so confirmation holds exactly.
    let y_hat: Vec<f64> = (0..g.n())
        .map(|i| {
            let a = actions[i];
            global_payoff(g, &actions, i) - alpha * a + 0.5 * a * a - a * x_hat[i]
        })
        .collect();
    Ok(GlobalSolution { actions, conjectures: GlobalConjecture { x_hat, y_hat }, residual, iterations, method })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Homeo2Report {
    pub per_agent: Vec<bool>,
    pub all: bool,
}

/// `0 < c_i beta (n - 1) < sum_{j != i} z_ij < 2` for each agent.
pub fn check_homeo2(g: &GlobalGameSpec) -> Homeo2Report {
    let n = g.n();
    let per_agent: Vec<bool> = (0..n)
        .map(|i| {
            let lhs = g.c[i] * g.beta * (n as f64 - 1.0);
            let row = g.base.net().row_sum(i);
            0.0 < lhs && lhs < row && row < 2.0
        })
        .collect();
    let all = per_agent.iter().all(|&b| b);
    Homeo2Report { per_agent, all }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiPoint {
    pub c: Vec<f64>,
    pub solution: Result<GlobalSolution>,
}

/// Solves the fixed-point system at every perceived-centrality vector in `grid`.
pub fn phi_map(g: &GlobalGameSpec, grid: Vec<Vec<f64>>, tol: f64, max_iter: usize) -> Vec<PhiPoint> {
    par::map(grid, |c| {
        let solution = g.with_c(c.clone()).and_then(|gc| solve_global_sce(&gc, GlobalMethod::Auto, tol, max_iter));
        PhiPoint { c, solution }
    })
}

/// Regular grid over the admissible box: `steps` points per axis in `(0, c_max(i)]`.
pub fn admissible_grid(g: &GlobalGameSpec, steps: usize) -> Vec<Vec<f64>> {
    let n = g.n();
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| (1..=steps).map(|k| g.c_max(i) * k as f64 / steps as f64).collect())
        .collect();
    let mut grid = vec![Vec::new()];
    for axis in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    grid
}
