//! Linear-quadratic game primitives: aggregator, best reply, payoff, feedback.
//!
//! Agent `i` earns `v_i = alpha_i a_i - a_i^2 / 2 + a_i x_i` with payoff state
//! `x_i = sum_{j != i} z_ij a_j`, and observes its realized payoff as feedback.

use serde::{Deserialize, Serialize};

use crate::agents::AgentSet;
use crate::error::{invalid, usage, Error, Result};
use crate::net::WeightedNetwork;

/// Action cap used when none is given.
pub const DEFAULT_A_MAX: f64 = 1e6;

/// Distance to the cap below which a profile counts as cap-binding.
pub const CAP_MARGIN: f64 = 1e-6;

/// Games hold at most this many agents so that agent sets fit a bitmask.
pub const MAX_AGENTS: usize = 64;

/// A network game: weights, bliss points, action caps and state intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    net: WeightedNetwork,
    alpha: Vec<f64>,
    a_max: Vec<f64>,
    x_lo: Vec<f64>,
    x_hi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GameSpecBuilder {
    net: WeightedNetwork,
    alpha: Vec<f64>,
    a_max: Option<Vec<f64>>,
    x_bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl GameSpecBuilder {
    pub fn a_max(mut self, a_max: Vec<f64>) -> Self {
        self.a_max = Some(a_max);
        self
    }

    pub fn x_bounds(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.x_bounds = Some((lo, hi));
        self
    }

    pub fn build(self) -> Result<GameSpec> {
        let n = self.net.n();
        if n == 0 {
            return Err(invalid("a game needs at least one agent"));
        }
        if n > MAX_AGENTS {
            return Err(Error::TooLarge { n, limit: MAX_AGENTS });
        }
        check_len("alpha", &self.alpha, n)?;
        if let Some(i) = self.alpha.iter().position(|a| !a.is_finite()) {
            return Err(invalid(format!("alpha[{i}] is not finite")));
        }
        let a_max = self.a_max.unwrap_or_else(|| vec![DEFAULT_A_MAX; n]);
        check_len("a_max", &a_max, n)?;
        if let Some(i) = a_max.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(invalid(format!("a_max[{i}] must be a positive finite number")));
        }
        let (x_lo, x_hi) = match self.x_bounds {
            Some(b) => b,
            None => {
                let b = default_state_bound(&self.net, &self.alpha, &a_max);
                (vec![-b; n], vec![b; n])
            }
        };
        check_len("x_lo", &x_lo, n)?;
        check_len("x_hi", &x_hi, n)?;
        for i in 0..n {
            if !(x_lo[i] <= x_hi[i]) {
                return Err(invalid(format!("x_bounds[{i}] = [{}, {}] is empty", x_lo[i], x_hi[i])));
            }
            // X_i must contain every attainable state.
            let (mut reach_lo, mut reach_hi) = (0.0, 0.0);
            for j in 0..n {
                let w = self.net.weight(i, j);
                if w < 0.0 {
                    reach_lo += w * a_max[j];
                } else {
                    reach_hi += w * a_max[j];
                }
            }
            if x_lo[i] > reach_lo || x_hi[i] < reach_hi {
                return Err(invalid(format!(
                    "x_bounds[{i}] = [{}, {}] must contain the attainable range [{reach_lo}, {reach_hi}]",
                    x_lo[i], x_hi[i]
                )));
            }
        }
        Ok(GameSpec { net: self.net, alpha: self.alpha, a_max, x_lo, x_hi })
    }
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(invalid(format!("{name} has {} entries, expected {n}", v.len())));
    }
    Ok(())
}

/// Half-width `B` of the default interval `X_i = [-B, B]`.
///
/// Large enough to contain every attainable state and to make inactivity
/// justifiable for every agent.
pub fn default_state_bound(net: &WeightedNetwork, alpha: &[f64], a_max: &[f64]) -> f64 {
    let n = net.n();
    let reach = match net.bounds() {
        Some(b) => (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| b.max_abs() * a_max[j]).sum::<f64>())
            .fold(0.0, f64::max),
        None => {
            2.0 * (0..n)
                .map(|i| (0..n).map(|j| net.weight(i, j).abs() * a_max[j]).sum::<f64>())
                .fold(0.0, f64::max)
        }
    };
    let alpha_max = alpha.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    reach.max(2.0 * alpha_max)
}

impl GameSpec {
    pub fn builder(net: WeightedNetwork, alpha: Vec<f64>) -> GameSpecBuilder {
        GameSpecBuilder { net, alpha, a_max: None, x_bounds: None }
    }

    /// Common `alpha` for every agent, default caps and intervals.
    pub fn uniform(net: WeightedNetwork, alpha: f64) -> Result<Self> {
        let n = net.n();
        Self::builder(net, vec![alpha; n]).build()
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn net(&self) -> &WeightedNetwork {
        &self.net
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn a_max(&self) -> &[f64] {
        &self.a_max
    }

    pub fn x_lo(&self) -> &[f64] {
        &self.x_lo
    }

    pub fn x_hi(&self) -> &[f64] {
        &self.x_hi
    }

    pub fn all_agents(&self) -> AgentSet {
        AgentSet::full(self.n())
    }

    pub fn check_actions(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.n() {
            return Err(usage(format!("action profile has {} entries, expected {}", a.len(), self.n())));
        }
        for (i, &ai) in a.iter().enumerate() {
            if !(0.0..=self.a_max[i]).contains(&ai) {
                return Err(usage(format!("a[{i}] = {ai} outside [0, {}]", self.a_max[i])));
            }
        }
        Ok(())
    }

    pub fn check_conjectures(&self, x_hat: &[f64]) -> Result<()> {
        if x_hat.len() != self.n() {
            return Err(usage(format!("conjecture profile has {} entries, expected {}", x_hat.len(), self.n())));
        }
        for (i, &x) in x_hat.iter().enumerate() {
            if !(self.x_lo[i]..=self.x_hi[i]).contains(&x) {
                return Err(usage(format!("x_hat[{i}] = {x} outside [{}, {}]", self.x_lo[i], self.x_hi[i])));
            }
        }
        Ok(())
    }

    pub fn best_reply(&self, i: usize, x_hat: f64) -> f64 {
        best_reply(self.alpha[i], self.a_max[i], x_hat)
    }

    /// Best replies to a whole conjecture profile.
    pub fn best_replies(&self, x_hat: &[f64]) -> Vec<f64> {
        x_hat.iter().enumerate().map(|(i, &x)| self.best_reply(i, x)).collect()
    }

    /// `v_i` evaluated at an arbitrary state `x`.
    pub fn payoff_at(&self, i: usize, a_i: f64, x: f64) -> f64 {
        self.alpha[i] * a_i - 0.5 * a_i * a_i + a_i * x
    }

    /// Agents who sit within [`CAP_MARGIN`] of their cap; logs a warning if any.
    pub fn cap_binding(&self, a: &[f64]) -> Vec<usize> {
        let hits: Vec<usize> = (0..self.n()).filter(|&i| a[i] >= self.a_max[i] - CAP_MARGIN).collect();
        if !hits.is_empty() {
            log::warn!(
                "action cap binds for agents {:?}; results assume the cap never binds",
                hits.iter().map(|i| i + 1).collect::<Vec<_>>()
            );
        }
        hits
    }
}

/// `x_i = sum_{j != i} z_ij a_j`.
pub fn aggregate(net: &WeightedNetwork, actions: &[f64], i: usize) -> f64 {
    (0..net.n()).map(|j| net.weight(i, j) * actions[j]).sum()
}

/// Every agent's payoff state, `Z a`.
pub fn aggregates(net: &WeightedNetwork, actions: &[f64]) -> Vec<f64> {
    (0..net.n()).map(|i| aggregate(net, actions, i)).collect()
}

/// `0` if `x_hat <= -alpha`, `alpha + x_hat` in between, `a_max` above.
pub fn best_reply(alpha: f64, a_max: f64, x_hat: f64) -> f64 {
    (alpha + x_hat).clamp(0.0, a_max)
}

pub fn payoff(spec: &GameSpec, actions: &[f64], i: usize) -> f64 {
    spec.payoff_at(i, actions[i], aggregate(spec.net(), actions, i))
}

pub fn payoffs(spec: &GameSpec, actions: &[f64]) -> Vec<f64> {
    (0..spec.n()).map(|i| payoff(spec, actions, i)).collect()
}

/// The feedback an agent receives: its realized payoff.
pub fn feedback_message(spec: &GameSpec, actions: &[f64], i: usize) -> f64 {
    payoff(spec, actions, i)
}

/// Recovers the payoff state from a message `m` sent after playing `a_i > 0`.
pub fn invert_message(alpha: f64, a_i: f64, m: f64) -> f64 {
    m / a_i - alpha + 0.5 * a_i
}

/// States consistent with what agent `i` observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfoSet {
    /// No information: the whole interval `X_i`.
    Full { lo: f64, hi: f64 },
    Singleton(f64),
}

impl InfoSet {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        match *self {
            InfoSet::Full { lo, hi } => x >= lo - tol && x <= hi + tol,
            InfoSet::Singleton(s) => (x - s).abs() <= tol,
        }
    }
}

pub fn expost_info_set(spec: &GameSpec, i: usize, a_i: f64, x_i: f64) -> InfoSet {
    if a_i > 0.0 {
        InfoSet::Singleton(x_i)
    } else {
        InfoSet::Full { lo: spec.x_lo[i], hi: spec.x_hi[i] }
    }
}

/// `I_0 = {i : x_lo_i <= -alpha_i}`: agents for whom zero is a best reply to some state.
pub fn justifiable_inactivity_set(spec: &GameSpec) -> AgentSet {
    AgentSet::from_indices((0..spec.n()).filter(|&i| spec.x_lo[i] <= -spec.alpha[i]))
}
