//! Scenario documents: parsing, validation and normalization.

use std::collections::BTreeSet;

use sce_core::game::DEFAULT_A_MAX;
use sce_core::global::GlobalGameSpec;
use sce_core::learning::LearningConfig;
use sce_core::{GameSpec, WeightedNetwork};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Local,
    Global,
}

/// A scalar shared by every agent, or one value per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAgent {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerAgent {
    fn expand(&self, field: &str, n: usize) -> Result<Vec<f64>, CliError> {
        match self {
            PerAgent::Scalar(v) => Ok(vec![*v; n]),
            PerAgent::Vector(v) if v.len() == n => Ok(v.clone()),
            PerAgent::Vector(v) => Err(CliError::Usage(format!("{field} has {} entries, expected {n}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub n: usize,
    pub alpha: PerAgent,
    pub z: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_max: Option<PerAgent>,
    /// `[lo, hi]` per agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<PerAgent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_conjectures: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOverrides>,
}

/// Parses a scenario document. Unknown keys are an error unless `lenient`,
/// in which case they are logged and ignored.
pub fn parse_scenario(text: &str, lenient: bool) -> Result<Scenario, CliError> {
    let mut unknown = BTreeSet::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut record = |path: serde_ignored::Path<'_>| {
        unknown.insert(render_path(&path));
    };
    let tracked = serde_ignored::Deserializer::new(de, &mut record);
    let scenario: Scenario = serde_path_to_error::deserialize(tracked).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path == "?" {
            CliError::Usage(format!("malformed scenario: {inner}"))
        } else {
            CliError::Usage(format!("{path}: {inner}"))
        }
    })?;
    if !unknown.is_empty() {
        let list = unknown.into_iter().collect::<Vec<_>>().join(", ");
        if lenient {
            log::warn!("ignoring unknown keys: {list}");
        } else {
            return Err(CliError::Usage(format!("unknown keys: {list} (use --lenient to ignore)")));
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

/// `a.b[2]` style, without the markers serde_ignored adds for `Option`s.
fn render_path(path: &serde_ignored::Path<'_>) -> String {
    use serde_ignored::Path;
    match path {
        Path::Root => String::new(),
        Path::Seq { parent, index } => format!("{}[{index}]", render_path(parent)),
        Path::Map { parent, key } => match render_path(parent) {
            p if p.is_empty() => key.clone(),
            p => format!("{p}.{key}"),
        },
        Path::Some { parent } | Path::NewtypeStruct { parent } | Path::NewtypeVariant { parent } => {
            render_path(parent)
        }
    }
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

impl Scenario {
    /// Shape and mode checks with path-qualified messages.
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.n;
        if n == 0 {
            return Err(usage("n must be at least 1".into()));
        }
        if n > sce_core::game::MAX_AGENTS {
            return Err(usage(format!("n = {n} exceeds the limit of {}", sce_core::game::MAX_AGENTS)));
        }
        if self.z.len() != n {
            return Err(usage(format!("z has {} rows, expected {n}", self.z.len())));
        }
        for (i, row) in self.z.iter().enumerate() {
            if row.len() != n {
                return Err(usage(format!("z[{i}] has {} entries, expected {n}", row.len())));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() {
                    return Err(usage(format!("z[{i}][{j}] must be finite")));
                }
            }
            if row[i] != 0.0 {
                return Err(usage(format!("z[{i}][{i}] must be 0")));
            }
        }
        let alpha = self.alpha.expand("alpha", n)?;
        if let Some(i) = alpha.iter().position(|a| !a.is_finite()) {
            return Err(usage(format!("alpha[{i}] must be finite")));
        }
        if let Some(a_max) = &self.a_max {
            let a_max = a_max.expand("a_max", n)?;
            if let Some(i) = a_max.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
                return Err(usage(format!("a_max[{i}] must be positive and finite")));
            }
        }
        if let Some(xb) = &self.x_bounds {
            if xb.len() != n {
                return Err(usage(format!("x_bounds has {} entries, expected {n}", xb.len())));
            }
            if let Some(i) = xb.iter().position(|[lo, hi]| !(lo <= hi)) {
                return Err(usage(format!("x_bounds[{i}]: lower bound exceeds upper bound")));
            }
        }
        if let Some(x0) = &self.initial_conjectures {
            if x0.len() != n {
                return Err(usage(format!("initial_conjectures has {} entries, expected {n}", x0.len())));
            }
        }
        match self.mode {
            Mode::Global => {
                if self.beta.is_none() {
                    return Err(usage("beta is required when mode = global".into()));
                }
                match &self.c {
                    None => return Err(usage("c is required when mode = global".into())),
                    Some(c) => {
                        c.expand("c", n)?;
                    }
                }
            }
            Mode::Local => {
                if self.beta.is_some() {
                    return Err(usage("beta is only allowed when mode = global".into()));
                }
                if self.c.is_some() {
                    return Err(usage("c is only allowed when mode = global".into()));
                }
            }
        }
        if let Some(s) = &self.solver {
            if let Some(t) = s.tol {
                if !(t > 0.0) {
                    return Err(usage("solver.tol must be positive".into()));
                }
            }
            if let Some(e) = s.epsilon {
                if !(e > 0.0) {
                    return Err(usage("solver.epsilon must be positive".into()));
                }
            }
            if s.window == Some(0) {
                return Err(usage("solver.window must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn alpha_vec(&self) -> Vec<f64> {
        self.alpha.expand("alpha", self.n).expect("validated")
    }

    pub fn a_max_vec(&self) -> Vec<f64> {
        match &self.a_max {
            Some(a) => a.expand("a_max", self.n).expect("validated"),
            None => vec![DEFAULT_A_MAX; self.n],
        }
    }

    pub fn network(&self) -> Result<WeightedNetwork, CliError> {
        Ok(WeightedNetwork::from_rows(&self.z)?)
    }

    pub fn game(&self) -> Result<GameSpec, CliError> {
        let mut b = GameSpec::builder(self.network()?, self.alpha_vec()).a_max(self.a_max_vec());
        if let Some(xb) = &self.x_bounds {
            b = b.x_bounds(xb.iter().map(|p| p[0]).collect(), xb.iter().map(|p| p[1]).collect());
        }
        Ok(b.build()?)
    }

    pub fn global_game(&self) -> Result<GlobalGameSpec, CliError> {
        if self.mode != Mode::Global {
            return Err(usage("this command needs a scenario with mode = global".into()));
        }
        let beta = self.beta.expect("validated");
        let c = self.c.as_ref().expect("validated").expand("c", self.n)?;
        Ok(GlobalGameSpec::new(self.game()?, beta, c)?)
    }

    pub fn initial(&self) -> Vec<f64> {
        self.initial_conjectures.clone().unwrap_or_else(|| vec![0.0; self.n])
    }

    pub fn solver_or_default(&self) -> SolverOverrides {
        self.solver.clone().unwrap_or_default()
    }

    /// Canonical form: per-agent vectors everywhere, `a_max`, seed and solver
    /// settings filled with their defaults.
    pub fn normalized(&self) -> Scenario {
        let s = self.solver_or_default();
        Scenario {
            description: self.description.clone(),
            mode: self.mode,
            n: self.n,
            alpha: PerAgent::Vector(self.alpha_vec()),
            z: self.z.clone(),
            a_max: Some(PerAgent::Vector(self.a_max_vec())),
            x_bounds: self.x_bounds.clone(),
            beta: self.beta,
            c: self.c.as_ref().map(|c| PerAgent::Vector(c.expand("c", self.n).expect("validated"))),
            initial_conjectures: self.initial_conjectures.clone(),
            seed: Some(self.seed.unwrap_or(DEFAULT_SEED)),
            solver: Some(SolverOverrides {
                tol: Some(s.tol.unwrap_or(DEFAULT_TOL)),
                max_iter: Some(s.max_iter.unwrap_or(DEFAULT_MAX_ITER)),
                window: Some(s.window.unwrap_or(DEFAULT_WINDOW)),
                epsilon: Some(s.epsilon.unwrap_or(DEFAULT_EPSILON)),
                samples: Some(s.samples.unwrap_or(DEFAULT_SAMPLES)),
            }),
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }
}

/// Solver settings after applying scenario overrides and then command-line flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub tol: f64,
    pub max_iter: usize,
    pub window: usize,
    pub epsilon: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Settings {
    pub fn learning(&self) -> LearningConfig {
        LearningConfig { tol: self.tol, window: self.window, max_iter: self.max_iter, ..LearningConfig::default() }
    }
}
