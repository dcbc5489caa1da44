//! Nash equilibria of the full and auxiliary games, SCE enumeration, and the
//! sufficient conditions for interior solutions.
//!
//! Every SCE action profile is a Nash equilibrium of an auxiliary game in
//! which a justifiably inactive group is clamped to zero, so both searches
//! reduce to one linear solve `(I - Z_K) a_K = alpha_K` per candidate active
//! set `K`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::agents::{AgentSet, MAX_ENUMERATION_AGENTS};
use crate::error::{Error, Result};
use crate::game::{aggregate, aggregates, best_reply, justifiable_inactivity_set, GameSpec, CAP_MARGIN};
use crate::net::{Assumption, AssumptionReport, WeightedNetwork};
use crate::par;

/// An agent is active when its action exceeds this.
pub const ACTIVE_TOL: f64 = 1e-9;
/// Slack on `alpha_i + x_i <= 0` for inactive agents at a Nash equilibrium.
pub const NE_TOL: f64 = 1e-9;
/// Slack for the rationality and confirmation checks.
pub const SCE_TOL: f64 = 1e-9;
/// Pivots below this make a linear system singular.
const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumKind {
    #[serde(rename = "NE")]
    Ne,
    #[serde(rename = "SCE")]
    SceNonNe,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EquilibriumKind::Ne => "NE",
            EquilibriumKind::SceNonNe => "SCE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRecord {
    pub actions: Vec<f64>,
    /// Witness conjectures.
    pub conjectures: Vec<f64>,
    pub active_set: AgentSet,
    pub kind: EquilibriumKind,
    /// Agents clamped to zero when the record was generated.
    pub declared_inactive: AgentSet,
    /// Every inactive agent has `alpha_i + x_hat_i < 0` strictly.
    pub strict_witness: bool,
}

impl EquilibriumRecord {
    /// Builds a record for `actions`, choosing witness conjectures: the true
    /// state for active agents, `x_lo` for declared-inactive ones and
    /// `min(x_i, -alpha_i)` for other inactive agents.
    pub fn new(spec: &GameSpec, actions: Vec<f64>, declared_inactive: AgentSet) -> Self {
        let n = spec.n();
        let x = aggregates(spec.net(), &actions);
        let active_set = AgentSet::from_indices((0..n).filter(|&i| actions[i] > ACTIVE_TOL));
        let conjectures: Vec<f64> = (0..n)
            .map(|i| {
                if active_set.contains(i) {
                    x[i]
                } else if declared_inactive.contains(i) {
                    spec.x_lo()[i]
                } else {
                    x[i].min(-spec.alpha()[i])
                }
            })
            .collect();
        let strict_witness = (0..n)
            .filter(|&i| !active_set.contains(i))
            .all(|i| spec.alpha()[i] + conjectures[i] < 0.0);
        let kind = classify_kind(spec, &actions);
        Self { actions, conjectures, active_set, kind, declared_inactive, strict_witness }
    }
}

/// `Ne` iff every inactive agent's best reply to the true state is zero.
pub fn classify_kind(spec: &GameSpec, actions: &[f64]) -> EquilibriumKind {
    let boundary_ok = (0..spec.n())
        .filter(|&i| actions[i] <= ACTIVE_TOL)
        .all(|i| spec.alpha()[i] + aggregate(spec.net(), actions, i) <= NE_TOL);
    if boundary_ok {
        EquilibriumKind::Ne
    } else {
        EquilibriumKind::SceNonNe
    }
}

/// Records plus the candidate active sets whose linear system was singular.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub records: Vec<EquilibriumRecord>,
    pub degenerate: Vec<AgentSet>,
}

impl EquilibriumSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn nash(&self) -> impl Iterator<Item = &EquilibriumRecord> {
        self.records.iter().filter(|r| r.kind == EquilibriumKind::Ne)
    }

    pub fn by_active_set(&self, set: AgentSet) -> Option<&EquilibriumRecord> {
        self.records.iter().find(|r| r.active_set == set)
    }

    fn dedup(&mut self) {
        let mut kept: Vec<EquilibriumRecord> = Vec::with_capacity(self.records.len());
        for r in self.records.drain(..) {
            let dup = kept.iter().any(|k| {
                k.actions.iter().zip(&r.actions).all(|(a, b)| (a - b).abs() <= 1e-12)
            });
            if !dup {
                kept.push(r);
            }
        }
        self.records = kept;
    }
}

/// Solves `m x = b` by LU, reporting near-zero pivots as singular.
pub(crate) fn solve_linear(m: DMatrix<f64>, b: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    if m.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let lu = m.lu();
    let u = lu.u();
    let scale = u.amax().max(1.0);
    if u.diagonal().iter().any(|p| p.abs() <= PIVOT_TOL * scale) {
        return Err(Error::Singular(what.to_string()));
    }
    lu.solve(&b).ok_or_else(|| Error::Singular(what.to_string()))
}

/// `(I - Z_K) a_K = alpha_K`, returned as a full-length profile with zeros off `K`.
pub fn solve_interior(spec: &GameSpec, k: AgentSet) -> Result<Vec<f64>> {
    let idx = k.to_vec();
    let sub = spec.net().submatrix(&idx)?;
    let m = DMatrix::identity(idx.len(), idx.len()) - sub.matrix();
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| spec.alpha()[i]));
    let sol = solve_linear(m, rhs, &format!("I - Z_K for K = {k}"))?;
    let mut a = vec![0.0; spec.n()];
    for (pos, &i) in idx.iter().enumerate() {
        a[i] = sol[pos];
    }
    Ok(a)
}

fn check_enumerable(spec: &GameSpec) -> Result<()> {
    if spec.n() > MAX_ENUMERATION_AGENTS {
        return Err(Error::TooLarge { n: spec.n(), limit: MAX_ENUMERATION_AGENTS });
    }
    Ok(())
}

enum Candidate {
    Accepted(Vec<f64>),
    Rejected,
    Singular,
}

fn interior_candidate(spec: &GameSpec, k: AgentSet) -> Candidate {
    match solve_interior(spec, k) {
        Ok(a) => {
            let ok = k.iter().all(|i| a[i] > ACTIVE_TOL && a[i] <= spec.a_max()[i] - CAP_MARGIN);
            if ok {
                Candidate::Accepted(a)
            } else {
                Candidate::Rejected
            }
        }
        Err(_) => Candidate::Singular,
    }
}

fn collect(spec: &GameSpec, masks: Vec<AgentSet>, declared_inactive: impl Fn(AgentSet) -> AgentSet + Sync + Send, accept: impl Fn(AgentSet, &[f64]) -> bool + Sync + Send) -> EquilibriumSet {
    let outcomes = par::map(masks, |k| (k, interior_candidate(spec, k)));
    let mut set = EquilibriumSet::default();
    for (k, outcome) in outcomes {
        match outcome {
            Candidate::Accepted(a) if accept(k, &a) => {
                set.records.push(EquilibriumRecord::new(spec, a, declared_inactive(k)));
            }
            Candidate::Accepted(_) | Candidate::Rejected => {}
            Candidate::Singular => set.degenerate.push(k),
        }
    }
    set.dedup();
    if !set.degenerate.is_empty() {
        log::warn!(
            "singular active-set systems skipped: {}",
            set.degenerate.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" ")
        );
    }
    set
}

/// Nash equilibria of the game where agents outside `j` are clamped to zero.
pub fn solve_auxiliary_ne(spec: &GameSpec, j: AgentSet) -> Result<EquilibriumSet> {
    check_enumerable(spec)?;
    if !j.is_subset_of(spec.all_agents()) {
        return Err(crate::error::usage(format!("player set {j} is not a subset of the {} agents", spec.n())));
    }
    let clamped = j.complement(spec.n());
    let masks: Vec<AgentSet> = j.subsets().collect();
    Ok(collect(
        spec,
        masks,
        |_| clamped,
        |k, a| {
            j.difference(k)
                .iter()
                .all(|i| spec.alpha()[i] + aggregate(spec.net(), a, i) <= NE_TOL)
        },
    ))
}

pub fn solve_full_ne(spec: &GameSpec) -> Result<EquilibriumSet> {
    solve_auxiliary_ne(spec, spec.all_agents())
}

/// Every selfconfirming action profile: for each `J` whose complement is
/// justifiably inactive, the fully active auxiliary equilibrium on `J`.
pub fn enumerate_sce(spec: &GameSpec) -> Result<EquilibriumSet> {
    check_enumerable(spec)?;
    let n = spec.n();
    let i0 = justifiable_inactivity_set(spec);
    let forced = i0.complement(n);
    let masks: Vec<AgentSet> = i0.subsets().map(|s| forced.union(s)).collect();
    let mut set = collect(spec, masks, |j| j.complement(n), |_, _| true);
    set.records.sort_by_key(|r| r.active_set);
    Ok(set)
}

/// The three sufficient conditions for `(I - Z)^{-1} 1 >> 0`, and the direct check.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorReport {
    pub bounded: AssumptionReport,
    pub negative: AssumptionReport,
    pub limited: AssumptionReport,
    pub symmetrizable_limited: AssumptionReport,
    /// `(I - Z)^{-1} 1`, or `None` when `I - Z` is singular.
    pub solution: Option<Vec<f64>>,
}

impl InteriorReport {
    pub fn negative_limited(&self) -> bool {
        self.negative.holds && self.limited.holds
    }

    pub fn any_condition(&self) -> bool {
        self.bounded.holds || self.negative_limited() || self.symmetrizable_limited.holds
    }

    pub fn degenerate(&self) -> bool {
        self.solution.is_none()
    }

    /// Whether the direct solve is strictly positive.
    pub fn positive(&self) -> Option<bool> {
        self.solution.as_ref().map(|s| s.iter().all(|&v| v > 0.0))
    }
}

pub fn interior_conditions(net: &WeightedNetwork) -> Result<InteriorReport> {
    let n = net.n();
    let solution = match solve_linear(
        DMatrix::identity(n, n) - net.matrix(),
        DVector::from_element(n, 1.0),
        "I - Z",
    ) {
        Ok(v) => Some(v.iter().copied().collect()),
        Err(Error::Singular(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(InteriorReport {
        bounded: net.check_assumption(Assumption::Bounded)?,
        negative: net.check_assumption(Assumption::Negative)?,
        limited: net.check_assumption(Assumption::Limited)?,
        symmetrizable_limited: net.check_assumption(Assumption::SymmetrizableLimited)?,
        solution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceCondition {
    /// The action is not a best reply to the conjecture.
    Rationality,
    /// Feedback refutes the conjecture.
    Confirmation,
    /// The conjecture lies outside `X_i`.
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceViolation {
    pub agent: usize,
    pub condition: SceCondition,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceCheck {
    pub violations: Vec<SceViolation>,
}

impl SceCheck {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks subjective rationality and confirmation for every agent.
pub fn is_sce(spec: &GameSpec, actions: &[f64], conjectures: &[f64]) -> Result<SceCheck> {
    spec.check_actions(actions)?;
    if conjectures.len() != spec.n() {
        return Err(crate::error::usage(format!(
            "conjecture profile has {} entries, expected {}",
            conjectures.len(),
            spec.n()
        )));
    }
    let mut check = SceCheck::default();
    for i in 0..spec.n() {
        let (a, xh) = (actions[i], conjectures[i]);
        if xh < spec.x_lo()[i] - SCE_TOL || xh > spec.x_hi()[i] + SCE_TOL {
            check.violations.push(SceViolation {
                agent: i,
                condition: SceCondition::OutOfRange,
                detail: format!("x_hat = {xh} outside [{}, {}]", spec.x_lo()[i], spec.x_hi()[i]),
            });
        }
        let br = best_reply(spec.alpha()[i], spec.a_max()[i], xh);
        if (br - a).abs() > SCE_TOL {
            check.violations.push(SceViolation {
                agent: i,
                condition: SceCondition::Rationality,
                detail: format!("a = {a} but best reply to x_hat = {xh} is {br}"),
            });
        }
        if a > 0.0 {
            // Observed payoff under the conjecture must match the realized one.
            let x = aggregate(spec.net(), actions, i);
            let gap = (spec.payoff_at(i, a, xh) - spec.payoff_at(i, a, x)).abs();
            if gap > SCE_TOL * a.max(1.0) || (xh - x).abs() > SCE_TOL {
                check.violations.push(SceViolation {
                    agent: i,
                    condition: SceCondition::Confirmation,
                    detail: format!("x_hat = {xh} but realized state is {x}"),
                });
            }
        }
    }
    Ok(check)
}

/// Total welfare including the global term `beta * sum_{j != i} a_j` for each agent.
pub fn welfare(spec: &GameSpec, beta: f64, actions: &[f64]) -> f64 {
    let total: f64 = actions.iter().sum();
    (0..spec.n())
        .map(|i| crate::game::payoff(spec, actions, i) + beta * (total - actions[i]))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialOptimum {
    /// Stationary point of total welfare.
    pub actions: Vec<f64>,
    /// Some component is negative or above its cap, so the unconstrained
    /// stationary point is not an admissible profile.
    pub out_of_range: bool,
}

/// Solves `(I - (Z + Z^T)) a = alpha + (n - 1) beta`.
pub fn social_optimum(spec: &GameSpec, beta: f64) -> Result<SocialOptimum> {
    let n = spec.n();
    let z = spec.net().matrix();
    let m = DMatrix::identity(n, n) - (z + z.transpose());
    let rhs = DVector::from_iterator(n, spec.alpha().iter().map(|&a| a + (n as f64 - 1.0) * beta));
    let sol = solve_linear(m, rhs, "welfare first-order system")?;
    let actions: Vec<f64> = sol.iter().copied().collect();
    let out_of_range = (0..n).any(|i| actions[i] < 0.0 || actions[i] > spec.a_max()[i]);
    Ok(SocialOptimum { actions, out_of_range })
}
