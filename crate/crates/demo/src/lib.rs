//! Browser bindings. Each export takes the network as JSON rows and returns
//! a JSON string; errors come back as strings.

use sce_core::equilibrium::enumerate_sce;
use sce_core::global::{solve_global_sce, GlobalGameSpec, GlobalMethod};
use sce_core::learning::{run_learning, Classification, LearningConfig};
use sce_core::{GameSpec, WeightedNetwork};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest network the page accepts.
pub const MAX_DEMO_AGENTS: usize = 12;

fn game(rows_json: &str, alpha: f64) -> Result<GameSpec, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(rows_json).map_err(|e| format!("weights: {e}"))?;
    if rows.len() > MAX_DEMO_AGENTS {
        return Err(format!("at most {MAX_DEMO_AGENTS} agents"));
    }
    let net = WeightedNetwork::from_rows(&rows).map_err(|e| e.to_string())?;
    GameSpec::uniform(net, alpha).map_err(|e| e.to_string())
}

pub fn sce_json(rows_json: &str, alpha: f64) -> Result<String, String> {
    let spec = game(rows_json, alpha)?;
    let set = enumerate_sce(&spec).map_err(|e| e.to_string())?;
    let records: Vec<Value> = set
        .records
        .iter()
        .map(|r| {
            json!({
                "active_set": r.active_set.to_string(),
                "kind": r.kind.to_string(),
                "actions": r.actions,
                "conjectures": r.conjectures,
            })
        })
        .collect();
    Ok(json!({ "records": records, "degenerate": set.degenerate.len() }).to_string())
}

pub fn learn_json(rows_json: &str, alpha: f64, initial_json: &str, max_iter: usize) -> Result<String, String> {
    let spec = game(rows_json, alpha)?;
    let x0: Vec<f64> = serde_json::from_str(initial_json).map_err(|e| format!("initial conjectures: {e}"))?;
    let cfg = LearningConfig { max_iter, ..LearningConfig::default() };
    let traj = run_learning(&spec, &x0, &cfg).map_err(|e| e.to_string())?;
    let agents = match &traj.classification {
        Classification::Oscillating { agents, .. } => agents.iter().map(|i| i + 1).collect(),
        _ => Vec::new(),
    };
    // The page only plots the first few hundred rounds.
    let actions: Vec<&Vec<f64>> = traj.steps.iter().take(400).map(|s| &s.actions).collect();
    Ok(json!({
        "status": traj.classification.label(),
        "cycle_agents": agents,
        "iterations": traj.iterations,
        "actions": actions,
        "limit_kind": traj.limit.as_ref().map(|r| r.kind.to_string()),
        "limit_is_sce": traj.limit_check.as_ref().map(|c| c.holds()),
    })
    .to_string())
}

pub fn global_json(rows_json: &str, alpha: f64, beta: f64, c: f64) -> Result<String, String> {
    let spec = game(rows_json, alpha)?;
    let n = spec.n();
    let g = GlobalGameSpec::new(spec, beta, vec![c; n]).map_err(|e| e.to_string())?;
    let sol = solve_global_sce(&g, GlobalMethod::Auto, 1e-10, 100_000).map_err(|e| e.to_string())?;
    Ok(json!({
        "actions": sol.actions,
        "x_hat": sol.conjectures.x_hat,
        "y_hat": sol.conjectures.y_hat,
        "residual": sol.residual,
        "method": sol.method.label(),
        "iterations": sol.iterations,
    })
    .to_string())
}

/// Every selfconfirming equilibrium, Nash ones marked.
#[wasm_bindgen]
pub fn enumerate(rows_json: &str, alpha: f64) -> Result<String, JsValue> {
    sce_json(rows_json, alpha).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn learn(rows_json: &str, alpha: f64, initial_json: &str, max_iter: usize) -> Result<String, JsValue> {
    learn_json(rows_json, alpha, initial_json, max_iter).map_err(|e| JsValue::from_str(&e))
}

/// Global-externality fixed point with a common perceived centrality `c`.
#[wasm_bindgen]
pub fn global_sce(rows_json: &str, alpha: f64, beta: f64, c: f64) -> Result<String, JsValue> {
    global_json(rows_json, alpha, beta, c).map_err(|e| JsValue::from_str(&e))
}
