//! The externality matrix `Z` and its structural and spectral tests.
//!
//! Row `i` of `Z` holds the weights agent `i` receives from its peers:
//! `z[i][j] != 0` means `j`'s action enters `i`'s payoff state. The diagonal
//! is always zero.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, usage, Error, Result};

/// Relative tolerance when checking `gamma_j / gamma_i = z_ji / z_ij` around cycles.
pub const RATIO_TOLERANCE: f64 = 1e-9;

const SCHUR_MAX_ITER: usize = 10_000;

/// Known bounds `[w_lo, w_hi]` on every off-diagonal weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    pub lo: f64,
    pub hi: f64,
}

impl WeightBounds {
    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    z: DMatrix<f64>,
    bounds: Option<WeightBounds>,
    /// Original agent index of each row, kept through `submatrix`.
    labels: Vec<usize>,
}

impl WeightedNetwork {
    /// Wraps a square matrix, rejecting non-zero diagonals and non-finite weights.
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        if z.nrows() != z.ncols() {
            return Err(invalid(format!("z must be square, got {}x{}", z.nrows(), z.ncols())));
        }
        for i in 0..z.nrows() {
            if z[(i, i)] != 0.0 {
                return Err(invalid(format!("z[{i}][{i}] must be 0")));
            }
            for j in 0..z.ncols() {
                if !z[(i, j)].is_finite() {
                    return Err(invalid(format!("z[{i}][{j}] is not finite")));
                }
            }
        }
        let labels = (0..z.nrows()).collect();
        Ok(Self { z, bounds: None, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(invalid(format!("z[{i}] has {} entries, expected {n}", r.len())));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// `n x n` matrix with `weight` on every listed `(receiver, source)` pair.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], weight: f64) -> Result<Self> {
        let mut z = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(usage(format!("edge ({i},{j}) out of range for n = {n}")));
            }
            z[(i, j)] = weight;
        }
        Self::new(z)
    }

    pub fn empty() -> Self {
        Self { z: DMatrix::zeros(0, 0), bounds: None, labels: Vec::new() }
    }

    /// Attaches weight bounds, checking every off-diagonal entry against them.
    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Result<Self> {
        if lo > hi {
            return Err(invalid(format!("weight bounds [{lo}, {hi}] are empty")));
        }
        for i in 0..self.n() {
            for j in 0..self.n() {
                let w = self.z[(i, j)];
                if i != j && (w < lo || w > hi) {
                    return Err(invalid(format!("z[{i}][{j}] = {w} outside bounds [{lo}, {hi}]")));
                }
            }
        }
        self.bounds = Some(WeightBounds { lo, hi });
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.z[(i, j)]
    }

    pub fn bounds(&self) -> Option<WeightBounds> {
        self.bounds
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.z.row(i).iter().copied().collect()).collect()
    }

    /// `sum_{j != i} z_ij`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.z.row(i).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.z.iter().all(|&w| w >= 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { z: &self.z * factor, bounds: None, labels: self.labels.clone() }
    }

    /// Largest eigenvalue modulus, `rho(Z)`.
    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius_of(&self.z)
    }

    /// Restriction to the rows and columns in `subset` (kept in the given order).
    pub fn submatrix(&self, subset: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        for &i in subset {
            if i >= n {
                return Err(usage(format!("agent {i} out of range for n = {n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(usage(format!("agent {i} listed twice")));
            }
        }
        let k = subset.len();
        let z = DMatrix::from_fn(k, k, |a, b| self.z[(subset[a], subset[b])]);
        let labels = subset.iter().map(|&i| self.labels[i]).collect();
        Ok(Self { z, bounds: self.bounds, labels })
    }

    pub fn neighbor_sets(&self, i: usize) -> Result<NeighborSets> {
        if i >= self.n() {
            return Err(usage(format!("agent {i} out of range for n = {}", self.n())));
        }
        let mut sets = NeighborSets::default();
        for j in 0..self.n() {
            let w = self.z[(i, j)];
            if w != 0.0 {
                sets.all.push(j);
                if w > 0.0 {
                    sets.positive.push(j);
                } else {
                    sets.negative.push(j);
                }
            }
        }
        Ok(sets)
    }

    pub fn check_assumption(&self, which: Assumption) -> Result<AssumptionReport> {
        let n = self.n();
        let off_diagonal = || (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
        let report = match which {
            Assumption::Bounded => {
                let limit = 1.0 / n.max(1) as f64;
                match off_diagonal().find(|&(i, j)| self.z[(i, j)].abs() >= limit) {
                    Some(pair) => AssumptionReport::fails(which, Witness::Pair(pair)),
                    None => AssumptionReport::holds(which, Witness::MaxAbs(self.z.amax())),
                }
            }
            Assumption::SameSign => {
                let mismatch = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .find(|&(i, j)| sign(self.z[(i, j)]) != sign(self.z[(j, i)]));
                match mismatch {
                    Some(pair) => AssumptionReport::fails(which, Witness::Pair(pair)),
                    None => AssumptionReport::holds(which, Witness::None),
                }
            }
            Assumption::Negative => match off_diagonal().find(|&(i, j)| self.z[(i, j)] > 0.0) {
                Some(pair) => AssumptionReport::fails(which, Witness::Pair(pair)),
                None => AssumptionReport::holds(which, Witness::None),
            },
            Assumption::Limited => {
                let rho = self.spectral_radius()?;
                AssumptionReport { which, holds: rho < 1.0, witness: Witness::SpectralRadius(rho) }
            }
            Assumption::Symmetrizable => match symmetrize_decompose(self) {
                Ok(d) => AssumptionReport::holds(which, Witness::Decomposition(d)),
                Err(o) => AssumptionReport::fails(which, Witness::Obstruction(o)),
            },
            Assumption::SymmetrizableLimited => match symmetrize_decompose(self) {
                Ok(d) => {
                    let (lambda_max, rho) = d.symmetrized_extremes()?;
                    AssumptionReport {
                        which,
                        holds: rho < 1.0,
                        witness: Witness::SymmetrizedSpectrum { lambda_max, rho },
                    }
                }
                Err(o) => AssumptionReport::fails(which, Witness::Obstruction(o)),
            },
        };
        Ok(report)
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// `N_i`, split into positive and negative influences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighborSets {
    pub all: Vec<usize>,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

/// Spectral radius of an arbitrary square matrix.
///
/// The spectrum is the union of the spectra of the diagonal blocks of the
/// strongly connected components, so acyclic parts contribute their diagonal
/// exactly instead of the `eps^(1/k)` noise a dense solve gives on nilpotent
/// blocks.
pub fn spectral_radius_of(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] != 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut rho = 0.0f64;
    for comp in tarjan_scc(&g) {
        let idx: Vec<usize> = comp.iter().map(|v| v.index()).collect();
        let r = if let [i] = idx[..] {
            m[(i, i)].abs()
        } else {
            schur_radius(&m.select_rows(&idx).select_columns(&idx))?
        };
        rho = rho.max(r);
    }
    Ok(rho)
}

/// Dense spectral radius via the real Schur form.
///
/// The QR iteration can stall on matrices with symmetric spectra such as
/// `[[0, a], [-b, 0]]`; on failure the matrix is shifted by a multiple of the
/// identity and the shift is subtracted from the eigenvalues.
fn schur_radius(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let scale = m.amax();
    if scale == 0.0 {
        return Ok(0.0);
    }
    for shift in [0.0, 0.137, -0.291, 0.613] {
        let s = shift * scale;
        let shifted = m + DMatrix::identity(m.nrows(), m.ncols()) * s;
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, SCHUR_MAX_ITER) {
            let rho = schur.complex_eigenvalues().iter().map(|e| (e - s).norm()).fold(0.0, f64::max);
            return Ok(rho);
        }
    }
    Err(Error::NumericFailure {
        routine: "spectral_radius",
        detail: format!("Schur iteration did not converge on {}x{} matrix {:?}", m.nrows(), m.ncols(), m.as_slice()),
    })
}

/// `(lambda_min, lambda_max)` of a symmetric matrix.
pub fn symmetric_extremes(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    if m.nrows() == 0 {
        return Ok((0.0, 0.0));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or_else(|| Error::NumericFailure {
        routine: "symmetric_eigen",
        detail: format!("no convergence on {}x{} matrix", m.nrows(), m.ncols()),
    })?;
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// The six network properties used as sufficient conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assumption {
    /// `|z_ij| < 1/n`.
    Bounded,
    /// `sign(z_ij) = sign(z_ji)`.
    SameSign,
    /// Every off-diagonal weight is `<= 0`.
    Negative,
    /// `rho(Z) < 1`.
    Limited,
    /// `Z = Gamma Z0`, `Gamma` positive diagonal, `Z0` symmetric.
    Symmetrizable,
    /// Symmetrizable with `rho(Z~) < 1`, `z~_ij = z0_ij sqrt(gamma_i gamma_j)`.
    SymmetrizableLimited,
}

impl Assumption {
    pub const ALL: [Assumption; 6] = [
        Assumption::Bounded,
        Assumption::SameSign,
        Assumption::Negative,
        Assumption::Limited,
        Assumption::Symmetrizable,
        Assumption::SymmetrizableLimited,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Assumption::Bounded => "bounded",
            Assumption::SameSign => "same-sign",
            Assumption::Negative => "negative",
            Assumption::Limited => "limited",
            Assumption::Symmetrizable => "symmetrizable",
            Assumption::SymmetrizableLimited => "symmetrizable-limited",
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Assumption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Assumption::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| usage(format!("unknown assumption id '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    None,
    /// Offending `(i, j)` pair (0-based).
    Pair((usize, usize)),
    MaxAbs(f64),
    SpectralRadius(f64),
    Decomposition(Decomposition),
    Obstruction(Obstruction),
    SymmetrizedSpectrum { lambda_max: f64, rho: f64 },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::None => Ok(()),
            Witness::Pair((i, j)) => write!(f, "pair ({},{})", i + 1, j + 1),
            Witness::MaxAbs(m) => write!(f, "max|z| = {m}"),
            Witness::SpectralRadius(r) => write!(f, "rho = {r}"),
            Witness::Decomposition(d) => write!(f, "gamma = {:?}", d.gamma),
            Witness::Obstruction(o) => write!(f, "{o}"),
            Witness::SymmetrizedSpectrum { lambda_max, rho } => {
                write!(f, "lambda_max = {lambda_max}; rho = {rho}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub which: Assumption,
    pub holds: bool,
    pub witness: Witness,
}

impl AssumptionReport {
    fn holds(which: Assumption, witness: Witness) -> Self {
        Self { which, holds: true, witness }
    }

    fn fails(which: Assumption, witness: Witness) -> Self {
        Self { which, holds: false, witness }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionKind {
    /// `gamma * Z0`, `Z0` in `{0,1}`.
    Uniform,
    /// `Gamma * Z0`.
    Diagonal,
    /// `S ⊙ Z0` with `S` in `{-gamma, gamma}`.
    Signed,
    General,
}

/// A factorisation of `Z`. For `Diagonal`, `gamma` is the diagonal of `Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub kind: DecompositionKind,
    pub gamma: Vec<f64>,
    pub z0: DMatrix<f64>,
}

impl Decomposition {
    /// Rebuilds `Z` from the factors.
    pub fn recompose(&self) -> DMatrix<f64> {
        match self.kind {
            DecompositionKind::Uniform | DecompositionKind::Signed => &self.z0 * self.gamma[0],
            DecompositionKind::Diagonal => {
                DMatrix::from_fn(self.z0.nrows(), self.z0.ncols(), |i, j| self.gamma[i] * self.z0[(i, j)])
            }
            DecompositionKind::General => self.z0.clone(),
        }
    }

    /// `z~_ij = z0_ij sqrt(gamma_i gamma_j)`; symmetric and similar to `Z`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        assert_eq!(self.kind, DecompositionKind::Diagonal, "only Gamma Z0 decompositions symmetrize");
        let n = self.z0.nrows();
        DMatrix::from_fn(n, n, |i, j| self.z0[(i, j)] * (self.gamma[i] * self.gamma[j]).sqrt())
    }

    /// `(lambda_max(Z~), rho(Z~))`.
    pub fn symmetrized_extremes(&self) -> Result<(f64, f64)> {
        let (lo, hi) = symmetric_extremes(&self.symmetrized())?;
        Ok((hi, lo.abs().max(hi.abs())))
    }

    /// Most specific of the uniform / signed / diagonal forms that fits `net`.
    pub fn classify(net: &WeightedNetwork) -> Decomposition {
        let z = net.matrix();
        let nonzero: Vec<f64> = z.iter().copied().filter(|&w| w != 0.0).collect();
        let support = z.map(|w| if w != 0.0 { 1.0 } else { 0.0 });
        if let Some(&first) = nonzero.first() {
            if nonzero.iter().all(|&w| w == first) {
                return Decomposition { kind: DecompositionKind::Uniform, gamma: vec![first], z0: support };
            }
            if nonzero.iter().all(|&w| w.abs() == first.abs()) {
                let g = first.abs();
                return Decomposition { kind: DecompositionKind::Signed, gamma: vec![g], z0: z / g };
            }
        } else {
            return Decomposition { kind: DecompositionKind::Uniform, gamma: vec![0.0], z0: support };
        }
        if let Ok(d) = symmetrize_decompose(net) {
            return d;
        }
        Decomposition { kind: DecompositionKind::General, gamma: Vec::new(), z0: z.clone() }
    }
}

/// Why no `Gamma Z0` factorisation exists.
#[derive(Debug, Clone, PartialEq)]
pub enum Obstruction {
    /// `z_ij` and `z_ji` differ in sign (or exactly one is zero).
    SignMismatch { i: usize, j: usize },
    /// Ratio propagation around a cycle disagrees on `gamma_j / gamma_i`.
    InconsistentCycle { i: usize, j: usize, propagated: f64, required: f64 },
}

impl fmt::Display for Obstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Obstruction::SignMismatch { i, j } => write!(f, "sign mismatch at ({},{})", i + 1, j + 1),
            Obstruction::InconsistentCycle { i, j, propagated, required } => write!(
                f,
                "inconsistent ratio cycle at ({},{}): gamma ratio {propagated} vs required {required}",
                i + 1,
                j + 1
            ),
        }
    }
}

/// Finds `Z = Gamma Z0` with positive `Gamma` and symmetric `Z0`, normalised
/// so the first agent of every connected component has `gamma = 1`.
pub fn symmetrize_decompose(net: &WeightedNetwork) -> std::result::Result<Decomposition, Obstruction> {
    let n = net.n();
    let z = net.matrix();
    for i in 0..n {
        for j in i + 1..n {
            if sign(z[(i, j)]) != sign(z[(j, i)]) {
                return Err(Obstruction::SignMismatch { i, j });
            }
        }
    }

    // z_ij = gamma_i z0_ij and z_ji = gamma_j z0_ij give gamma_j / gamma_i = z_ji / z_ij.
    let mut gamma: Vec<Option<f64>> = vec![None; n];
    for root in 0..n {
        if gamma[root].is_some() {
            continue;
        }
        gamma[root] = Some(1.0);
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            let gi = gamma[i].expect("queued agents are labelled");
            for j in 0..n {
                if j == i || z[(i, j)] == 0.0 {
                    continue;
                }
                let required = z[(j, i)] / z[(i, j)];
                match gamma[j] {
                    None => {
                        gamma[j] = Some(gi * required);
                        queue.push_back(j);
                    }
                    Some(gj) => {
                        let propagated = gj / gi;
                        if (propagated - required).abs() > RATIO_TOLERANCE * required.abs().max(propagated.abs()) {
                            return Err(Obstruction::InconsistentCycle { i, j, propagated, required });
                        }
                    }
                }
            }
        }
    }
    let gamma: Vec<f64> = gamma.into_iter().map(|g| g.expect("every agent labelled")).collect();
    let z0 = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (z[(i, j)] / gamma[i] + z[(j, i)] / gamma[j])
        }
    });
    Ok(Decomposition { kind: DecompositionKind::Diagonal, gamma, z0 })
}
