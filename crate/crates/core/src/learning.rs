//! Belief-learning dynamics and local stability of selfconfirming equilibria.
//!
//! Each period agents best reply to their conjectures. An active agent infers
//! the realized payoff state from its payoff and adopts it as the next
//! conjecture; an inactive agent learns nothing and keeps its conjecture.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::AgentSet;
use crate::equilibrium::{
    interior_conditions, is_sce, solve_interior, EquilibriumRecord, SceCheck, ACTIVE_TOL,
};
use crate::error::{invalid, Error, Result};
use crate::game::{feedback_message, invert_message, GameSpec, CAP_MARGIN};
use crate::par;

/// Tolerance for a perturbed run to count as having returned.
pub const RETURN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    /// Sup-norm change below which a step counts as still.
    pub tol: f64,
    /// Consecutive still steps required for convergence.
    pub window: usize,
    pub max_iter: usize,
    /// Any action above this in absolute value means divergence.
    pub divergence_cap: f64,
    /// How many past states the cycle detector remembers.
    pub history: usize,
    /// Distance at which two states count as the same.
    pub recurrence_tol: f64,
    /// Treat clamping a conjecture into `X_i` as an error.
    pub strict: bool,
    /// Keep every step; otherwise only the last one is stored.
    pub keep_steps: bool,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            window: 3,
            max_iter: 100_000,
            divergence_cap: 1e9,
            history: 64,
            recurrence_tol: 1e-9,
            strict: false,
            keep_steps: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub actions: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub next: Vec<f64>,
    /// Agents whose next conjecture had to be clamped into `X_i`.
    pub clamped: Vec<usize>,
}

/// One synchronous round of play and belief revision.
pub fn learn_step(spec: &GameSpec, conjectures: &[f64]) -> Result<StepOutcome> {
    spec.check_conjectures(conjectures)?;
    Ok(step_unchecked(spec, conjectures))
}

fn step_unchecked(spec: &GameSpec, x_hat: &[f64]) -> StepOutcome {
    let n = spec.n();
    let actions = spec.best_replies(x_hat);
    let payoffs: Vec<f64> = (0..n).map(|i| feedback_message(spec, &actions, i)).collect();
    let mut clamped = Vec::new();
    let next = (0..n)
        .map(|i| {
            if actions[i] > 0.0 {
                let x = invert_message(spec.alpha()[i], actions[i], payoffs[i]);
                let c = x.clamp(spec.x_lo()[i], spec.x_hi()[i]);
                if c != x {
                    clamped.push(i);
                }
                c
            } else {
                x_hat[i]
            }
        })
        .collect();
    StepOutcome { actions, payoffs, next, clamped }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: usize,
    pub conjectures: Vec<f64>,
    pub actions: Vec<f64>,
    pub payoffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Classification {
    Converged,
    /// The state, or (when `drifting`) the per-step increment, recurs with
    /// this period. `agents` are those whose values vary within the cycle.
    Oscillating { period: usize, agents: Vec<usize>, drifting: bool },
    Diverged,
    MaxIter,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Converged => "converged",
            Classification::Oscillating { .. } => "oscillating",
            Classification::Diverged => "diverged",
            Classification::MaxIter => "max-iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub iterations: usize,
    pub classification: Classification,
    /// Limit record, present when converged.
    pub limit: Option<EquilibriumRecord>,
    /// `is_sce` verdict on the limit.
    pub limit_check: Option<SceCheck>,
    pub clamp_events: usize,
    /// Final conjectures.
    pub final_conjectures: Vec<f64>,
}

impl Trajectory {
    pub fn final_actions(&self) -> Option<&[f64]> {
        self.steps.last().map(|s| s.actions.as_slice())
    }

    pub fn converged(&self) -> bool {
        self.classification == Classification::Converged
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sup_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Cycle detection over the recent history of states and increments.
struct CycleDetector {
    capacity: usize,
    tol: f64,
    states: VecDeque<Vec<f64>>,
    increments: VecDeque<Vec<f64>>,
}

/// Cycles whose values move less than this are treated as slow convergence.
const MIN_CYCLE_AMPLITUDE: f64 = 1e-7;
/// Smallest increment norm for a drifting cycle.
const MIN_DRIFT: f64 = 1e-8;

impl CycleDetector {
    fn new(capacity: usize, tol: f64) -> Self {
        Self { capacity, tol, states: VecDeque::new(), increments: VecDeque::new() }
    }

    /// Agents whose component varies by more than `MIN_CYCLE_AMPLITUDE` across the last `p` entries.
    fn varying(buf: &VecDeque<Vec<f64>>, p: usize) -> Vec<usize> {
        let n = buf.back().map_or(0, Vec::len);
        let tail: Vec<&Vec<f64>> = buf.iter().rev().take(p).collect();
        (0..n)
            .filter(|&i| {
                let lo = tail.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                let hi = tail.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo > MIN_CYCLE_AMPLITUDE
            })
            .collect()
    }

    fn push(&mut self, state: &[f64]) -> Option<Classification> {
        if let Some(prev) = self.states.back() {
            let d: Vec<f64> = state.iter().zip(prev).map(|(a, b)| a - b).collect();
            self.increments.push_back(d);
            if self.increments.len() > self.capacity {
                self.increments.pop_front();
            }
        }
        self.states.push_back(state.to_vec());
        if self.states.len() > self.capacity {
            self.states.pop_front();
        }

        let len = self.states.len();
        for p in 2..len {
            let past = &self.states[len - 1 - p];
            if sup_dist(state, past) <= self.tol {
                let agents = Self::varying(&self.states, p);
                if !agents.is_empty() {
                    return Some(Classification::Oscillating { period: p, agents, drifting: false });
                }
            }
        }

        let m = self.increments.len();
        if let Some(d) = self.increments.back() {
            let scale = sup_norm(d);
            if scale >= MIN_DRIFT {
                for p in 2..m {
                    let past = &self.increments[m - 1 - p];
                    if sup_dist(d, past) <= self.tol * scale.max(1.0) {
                        let agents = Self::varying(&self.increments, p);
                        if !agents.is_empty() {
                            return Some(Classification::Oscillating { period: p, agents, drifting: true });
                        }
                    }
                }
            }
        }
        None
    }
}

/// Iterates [`learn_step`] until convergence, a detected cycle, divergence, or `max_iter`.
pub fn run_learning(spec: &GameSpec, initial: &[f64], config: &LearningConfig) -> Result<Trajectory> {
    spec.check_conjectures(initial)?;
    if config.window == 0 {
        return Err(invalid("window must be at least 1"));
    }
    let mut x_hat = initial.to_vec();
    let mut steps: Vec<Step> = Vec::new();
    let mut detector = CycleDetector::new(config.history, config.recurrence_tol);
    let mut prev_actions: Option<Vec<f64>> = None;
    let mut still = 0usize;
    let mut clamp_events = 0usize;
    let mut classification = Classification::MaxIter;
    let mut iterations = 0usize;

    for t in 0..config.max_iter {
        iterations = t + 1;
        let out = step_unchecked(spec, &x_hat);
        if !out.clamped.is_empty() {
            clamp_events += out.clamped.len();
            log::warn!("conjectures of agents {:?} clamped into X at t = {t}", out.clamped.iter().map(|i| i + 1).collect::<Vec<_>>());
            if config.strict {
                return Err(invalid(format!("conjecture clamped into X at t = {t}; X is too narrow")));
            }
        }
        if let Some(prev) = &prev_actions {
            debug_assert!(
                (0..spec.n()).all(|i| prev[i] > 0.0 || out.actions[i] == 0.0),
                "inactive agents never reactivate"
            );
        }
        let dx = sup_dist(&out.next, &x_hat);
        let da = prev_actions.as_ref().map_or(f64::INFINITY, |p| sup_dist(p, &out.actions));
        let diverged = out.actions.iter().any(|a| a.abs() > config.divergence_cap);

        let step = Step { t, conjectures: x_hat.clone(), actions: out.actions.clone(), payoffs: out.payoffs };
        if config.keep_steps || steps.is_empty() {
            steps.push(step);
        } else {
            steps[0] = step;
        }

        if diverged {
            classification = Classification::Diverged;
            break;
        }
        if dx < config.tol && da < config.tol {
            still += 1;
            if still >= config.window {
                classification = Classification::Converged;
                prev_actions = Some(out.actions);
                x_hat = out.next;
                break;
            }
        } else {
            still = 0;
        }
        if let Some(c) = detector.push(&out.next) {
            classification = c;
            prev_actions = Some(out.actions);
            x_hat = out.next;
            break;
        }
        prev_actions = Some(out.actions);
        x_hat = out.next;
    }

    let (limit, limit_check) = if classification == Classification::Converged {
        let actions = prev_actions.clone().expect("at least one step ran");
        spec.cap_binding(&actions);
        let inactive = AgentSet::from_indices((0..spec.n()).filter(|&i| actions[i] <= ACTIVE_TOL));
        let mut record = EquilibriumRecord::new(spec, actions, inactive);
        record.conjectures = x_hat.clone();
        record.strict_witness = (0..spec.n())
            .filter(|&i| !record.active_set.contains(i))
            .all(|i| spec.alpha()[i] + x_hat[i] < 0.0);
        let check = is_sce(spec, &record.actions, &record.conjectures)?;
        (Some(record), Some(check))
    } else {
        (None, None)
    };

    Ok(Trajectory { steps, iterations, classification, limit, limit_check, clamp_events, final_conjectures: x_hat })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticVerdict {
    Stable,
    /// The sufficient conditions fail; stability is not decided.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticStability {
    pub verdict: AnalyticVerdict,
    /// `rho(Z_{I_a})`.
    pub rho_active: f64,
    /// `alpha_i + x_lo_i < 0` for every inactive agent.
    pub strict_at_x_lo: bool,
    /// Agents for which `[x_lo_i, -alpha_i)` is empty, so no strict witness exists.
    pub no_strict_witness: Vec<usize>,
}

fn require_sce(spec: &GameSpec, record: &EquilibriumRecord) -> Result<()> {
    let check = is_sce(spec, &record.actions, &record.conjectures)?;
    if !check.holds() {
        return Err(Error::NotApplicable(format!(
            "record with active set {} is not a selfconfirming equilibrium: {:?}",
            record.active_set, check.violations
        )));
    }
    Ok(())
}

/// Sufficient conditions for local stability: `rho(Z_{I_a}) < 1` and strictly
/// pessimistic conjectures for every inactive agent.
pub fn analytic_stability(spec: &GameSpec, record: &EquilibriumRecord) -> Result<AnalyticStability> {
    require_sce(spec, record)?;
    let active = record.active_set.to_vec();
    let rho_active = spec.net().submatrix(&active)?.spectral_radius()?;
    let inactive: Vec<usize> = (0..spec.n()).filter(|i| !record.active_set.contains(*i)).collect();
    let strict_at_x_lo = inactive.iter().all(|&i| spec.alpha()[i] + spec.x_lo()[i] < 0.0);
    let no_strict_witness = inactive.iter().copied().filter(|&i| spec.x_lo()[i] >= -spec.alpha()[i]).collect();
    let verdict = if rho_active < 1.0 && strict_at_x_lo {
        AnalyticVerdict::Stable
    } else {
        AnalyticVerdict::Inconclusive
    };
    Ok(AnalyticStability { verdict, rho_active, strict_at_x_lo, no_strict_witness })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStability {
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
    /// Probes whose limit actions came back to the record's actions.
    pub action_returns: usize,
    /// Probes whose limit conjectures came back to the record's conjectures.
    pub conjecture_returns: usize,
    /// Probes that did not converge at all.
    pub unconverged: usize,
}

impl EmpiricalStability {
    pub fn action_fraction(&self) -> f64 {
        self.action_returns as f64 / self.samples.max(1) as f64
    }

    pub fn conjecture_fraction(&self) -> f64 {
        self.conjecture_returns as f64 / self.samples.max(1) as f64
    }
}

/// Seed of probe `k`, independent of scheduling.
pub fn probe_seed(master: u64, k: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Restarts learning from `samples` random points of the sup-norm
/// `epsilon`-ball around the record's witness conjectures.
pub fn probe_stability(
    spec: &GameSpec,
    record: &EquilibriumRecord,
    epsilon: f64,
    samples: usize,
    seed: u64,
    config: &LearningConfig,
) -> Result<EmpiricalStability> {
    require_sce(spec, record)?;
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    let config = LearningConfig { keep_steps: false, ..*config };
    let probes: Vec<u64> = (0..samples as u64).collect();
    let results = par::map(probes, |k| -> Result<(bool, bool, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(probe_seed(seed, k));
        let start: Vec<f64> = (0..spec.n())
            .map(|i| {
                let x = record.conjectures[i] + rng.gen_range(-epsilon..epsilon);
                x.clamp(spec.x_lo()[i], spec.x_hi()[i])
            })
            .collect();
        let traj = run_learning(spec, &start, &config)?;
        if !traj.converged() {
            return Ok((false, false, true));
        }
        let a = traj.final_actions().expect("converged runs have steps");
        let back_a = sup_dist(a, &record.actions) <= RETURN_TOL;
        let back_x = sup_dist(&traj.final_conjectures, &record.conjectures) <= RETURN_TOL;
        Ok((back_a, back_x, false))
    });
    let mut report = EmpiricalStability {
        epsilon,
        samples,
        seed,
        action_returns: 0,
        conjecture_returns: 0,
        unconverged: 0,
    };
    for r in results {
        let (a, x, u) = r?;
        report.action_returns += a as usize;
        report.conjecture_returns += x as usize;
        report.unconverged += u as usize;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableFamily {
    pub records: Vec<EquilibriumRecord>,
    /// Subsets `J` whose clamped solve was not interior or not analytically stable.
    pub exceptions: Vec<AgentSet>,
}

/// For every `J` inside the record's active set, the interior auxiliary
/// equilibrium on `J` extended by zeros.
pub fn stable_sce_family(spec: &GameSpec, record: &EquilibriumRecord) -> Result<StableFamily> {
    let active = record.active_set;
    let sub = spec.net().submatrix(&active.to_vec())?;
    let report = interior_conditions(&sub)?;
    if !report.any_condition() {
        return Err(Error::NotApplicable(format!(
            "Z restricted to {active} is neither bounded, negative and limited, nor symmetrizable-limited"
        )));
    }
    let n = spec.n();
    let mut family = StableFamily { records: Vec::new(), exceptions: Vec::new() };
    for j in active.subsets() {
        let accepted = solve_interior(spec, j).ok().and_then(|a| {
            let interior = j.iter().all(|i| a[i] > ACTIVE_TOL && a[i] <= spec.a_max()[i] - CAP_MARGIN);
            if !interior {
                return None;
            }
            let rec = EquilibriumRecord::new(spec, a, j.complement(n));
            match analytic_stability(spec, &rec) {
                Ok(s) if s.verdict == AnalyticVerdict::Stable => Some(rec),
                _ => None,
            }
        });
        match accepted {
            Some(rec) => family.records.push(rec),
            None => family.exceptions.push(j),
        }
    }
    Ok(family)
}
