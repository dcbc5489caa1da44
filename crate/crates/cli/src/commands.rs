//! One function per subcommand. Each writes its table into a buffer that is
//! flushed to `--output` or stdout at the end.

use std::io::Write;
use std::path::Path;

use sce_core::equilibrium::{enumerate_sce, interior_conditions, solve_full_ne, EquilibriumSet};
use sce_core::game::justifiable_inactivity_set;
use sce_core::global::{
    admissible_grid, check_homeo2, fixed_point_residuals, phi_map, solve_global_sce, GlobalMethod,
};
use sce_core::learning::{analytic_stability, probe_stability, run_learning, AnalyticVerdict, Classification};
use sce_core::net::{Assumption, Witness};
use sce_core::GameSpec;
use serde_json::json;

use crate::output::{fmt_num, indexed, nums, Table};
use crate::scenario::{
    parse_scenario, Scenario, Settings, DEFAULT_EPSILON, DEFAULT_MAX_ITER, DEFAULT_SAMPLES, DEFAULT_SEED,
    DEFAULT_TOL, DEFAULT_WINDOW,
};
use crate::{Cli, CliError, Command, Opts};

/// Upper limit on phi-map grid points.
const MAX_GRID_POINTS: usize = 1_000_000;

pub fn load(opts: &Opts) -> Result<Scenario, CliError> {
    let path = opts.input.as_ref().ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, opts.lenient)
}

/// Flags override scenario settings, which override defaults.
pub fn settings(opts: &Opts, s: &Scenario) -> Result<Settings, CliError> {
    let o = s.solver_or_default();
    let settings = Settings {
        tol: opts.tol.or(o.tol).unwrap_or(DEFAULT_TOL),
        max_iter: opts.max_iter.or(o.max_iter).unwrap_or(DEFAULT_MAX_ITER),
        window: o.window.unwrap_or(DEFAULT_WINDOW),
        epsilon: opts.epsilon.or(o.epsilon).unwrap_or(DEFAULT_EPSILON),
        samples: opts.samples.or(o.samples).unwrap_or(DEFAULT_SAMPLES),
        seed: opts.seed.or(s.seed).unwrap_or(DEFAULT_SEED),
    };
    if !(settings.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    if !(settings.epsilon > 0.0) {
        return Err(CliError::Usage("--epsilon must be positive".into()));
    }
    Ok(settings)
}

pub fn dispatch(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let scenario = load(&cli.opts)?;
    let cfg = settings(&cli.opts, &scenario)?;
    let mut buf = Vec::new();
    let code = match cli.command {
        Command::Check => check(&scenario, &mut buf)?,
        Command::Ne => ne(&scenario, &mut buf, stderr)?,
        Command::Sce => sce(&scenario, &mut buf, stderr)?,
        Command::Learn => learn(&scenario, &cfg, cli.opts.output.as_deref(), &mut buf, stderr)?,
        Command::Stability => stability(&scenario, &cfg, &mut buf)?,
        Command::GlobalSce => global_sce(&scenario, &cfg, &mut buf, stderr)?,
        Command::PhiMap { grid } => phi(&scenario, &cfg, grid, &mut buf, stderr)?,
        Command::Normalize => {
            buf.extend_from_slice(scenario.normalized().to_json().as_bytes());
            0
        }
    };
    match &cli.opts.output {
        Some(path) => std::fs::write(path, &buf)?,
        None => stdout.write_all(&buf)?,
    }
    Ok(code)
}

/// Values for JSON output, rounded to the same 12 significant digits as the CSV.
fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| fmt_num(x).parse().unwrap_or(x)).collect()
}

fn witness_detail(w: &Witness) -> String {
    match w {
        Witness::None => String::new(),
        Witness::Pair((i, j)) => format!("pair ({},{})", i + 1, j + 1),
        Witness::MaxAbs(m) => format!("max|z| = {}", fmt_num(*m)),
        Witness::SpectralRadius(r) => format!("rho = {}", fmt_num(*r)),
        Witness::Decomposition(d) => format!("gamma = [{}]", nums(&d.gamma).join(" ")),
        Witness::Obstruction(o) => o.to_string(),
        Witness::SymmetrizedSpectrum { lambda_max, rho } => {
            format!("lambda_max = {}; rho = {}", fmt_num(*lambda_max), fmt_num(*rho))
        }
    }
}

fn check(s: &Scenario, out: &mut Vec<u8>) -> Result<i32, CliError> {
    let spec = s.game()?;
    let net = spec.net();
    let mut t = Table::new(out, &["property", "holds", "detail"])?;
    for a in Assumption::ALL {
        let r = net.check_assumption(a)?;
        t.row(&[a.id().to_string(), r.holds.to_string(), witness_detail(&r.witness)])?;
    }
    let interior = interior_conditions(net)?;
    match &interior.solution {
        Some(v) => t.row(&[
            "interior-positive".to_string(),
            interior.positive().unwrap_or(false).to_string(),
            format!("(I - Z)^-1 1 = [{}]", nums(v).join(" ")),
        ])?,
        None => t.row(&["interior-positive", "false", "I - Z is singular"])?,
    }
    t.row(&["justifiable-inactivity".to_string(), String::new(), justifiable_inactivity_set(&spec).to_string()])?;
    t.finish()?;
    Ok(0)
}

fn equilibrium_table(spec: &GameSpec, set: &EquilibriumSet, out: &mut Vec<u8>) -> Result<(), CliError> {
    let n = spec.n();
    let mut header = vec!["active_set".to_string(), "kind".to_string(), "strict_witness".to_string()];
    header.extend(indexed("a", n));
    header.extend(indexed("x_hat", n));
    let mut t = Table::new(out, &header)?;
    for r in &set.records {
        let mut row = vec![r.active_set.to_string(), r.kind.to_string(), r.strict_witness.to_string()];
        row.extend(nums(&r.actions));
        row.extend(nums(&r.conjectures));
        t.row(&row)?;
    }
    t.finish()
}

fn report_degenerate(set: &EquilibriumSet, stderr: &mut dyn Write) -> Result<(), CliError> {
    for j in &set.degenerate {
        writeln!(stderr, "warning: singular system on active set {j}; skipped")?;
    }
    Ok(())
}

fn ne(s: &Scenario, out: &mut Vec<u8>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let spec = s.game()?;
    let set = solve_full_ne(&spec)?;
    report_degenerate(&set, stderr)?;
    equilibrium_table(&spec, &set, out)?;
    Ok(0)
}

fn sce(s: &Scenario, out: &mut Vec<u8>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let spec = s.game()?;
    let set = enumerate_sce(&spec)?;
    report_degenerate(&set, stderr)?;
    equilibrium_table(&spec, &set, out)?;
    Ok(0)
}

fn learn(
    s: &Scenario,
    cfg: &Settings,
    output: Option<&Path>,
    out: &mut Vec<u8>,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let spec = s.game()?;
    let traj = run_learning(&spec, &s.initial(), &cfg.learning())?;
    let mut t = Table::new(&mut *out, &["t", "agent", "conjecture", "action", "payoff"])?;
    for step in &traj.steps {
        for i in 0..spec.n() {
            t.row(&[
                step.t.to_string(),
                (i + 1).to_string(),
                fmt_num(step.conjectures[i]),
                fmt_num(step.actions[i]),
                fmt_num(step.payoffs[i]),
            ])?;
        }
    }
    t.finish()?;

    let classification = match &traj.classification {
        Classification::Oscillating { period, agents, drifting } => json!({
            "status": "oscillating",
            "period": period,
            "agents": agents.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "drifting": drifting,
        }),
        c => json!({ "status": c.label() }),
    };
    let limit = traj.limit.as_ref().map(|r| {
        json!({
            "active_set": r.active_set.to_string(),
            "kind": r.kind.to_string(),
            "actions": rounded(&r.actions),
            "conjectures": rounded(&r.conjectures),
        })
    });
    let summary = json!({
        "classification": classification,
        "iterations": traj.iterations,
        "clamp_events": traj.clamp_events,
        "limit": limit,
        "limit_is_sce": traj.limit_check.as_ref().map(|c| c.holds()),
        "final_conjectures": rounded(&traj.final_conjectures),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    match output {
        Some(path) => std::fs::write(path.with_extension("summary.json"), text)?,
        None => stderr.write_all(text.as_bytes())?,
    }
    if traj.converged() {
        Ok(0)
    } else {
        writeln!(stderr, "learning did not converge: {}", traj.classification.label())?;
        Ok(2)
    }
}

fn stability(s: &Scenario, cfg: &Settings, out: &mut Vec<u8>) -> Result<i32, CliError> {
    let spec = s.game()?;
    let set = enumerate_sce(&spec)?;
    let header = [
        "active_set",
        "kind",
        "analytic",
        "rho_active",
        "strict_at_x_lo",
        "epsilon",
        "samples",
        "action_returns",
        "conjecture_returns",
        "unconverged",
    ];
    let mut t = Table::new(out, &header)?;
    let learning = cfg.learning();
    for r in &set.records {
        let a = analytic_stability(&spec, r)?;
        let p = probe_stability(&spec, r, cfg.epsilon, cfg.samples, cfg.seed, &learning)?;
        let verdict = match a.verdict {
            AnalyticVerdict::Stable => "stable",
            AnalyticVerdict::Inconclusive => "inconclusive",
        };
        t.row(&[
            r.active_set.to_string(),
            r.kind.to_string(),
            verdict.to_string(),
            fmt_num(a.rho_active),
            a.strict_at_x_lo.to_string(),
            fmt_num(p.epsilon),
            p.samples.to_string(),
            p.action_returns.to_string(),
            p.conjecture_returns.to_string(),
            p.unconverged.to_string(),
        ])?;
    }
    t.finish()?;
    Ok(0)
}

fn global_sce(s: &Scenario, cfg: &Settings, out: &mut Vec<u8>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let g = s.global_game()?;
    let homeo = check_homeo2(&g);
    let sol = solve_global_sce(&g, GlobalMethod::Auto, cfg.tol, cfg.max_iter)?;
    let h = fixed_point_residuals(&g, &sol.actions);
    let mut t = Table::new(out, &["agent", "action", "x_hat", "y_hat", "residual", "homeo2"])?;
    for i in 0..g.n() {
        t.row(&[
            (i + 1).to_string(),
            fmt_num(sol.actions[i]),
            fmt_num(sol.conjectures.x_hat[i]),
            fmt_num(sol.conjectures.y_hat[i]),
            fmt_num(h[i]),
            homeo.per_agent[i].to_string(),
        ])?;
    }
    t.finish()?;
    writeln!(
        stderr,
        "method = {}, iterations = {}, max residual = {}",
        sol.method.label(),
        sol.iterations,
        fmt_num(sol.residual)
    )?;
    Ok(0)
}

fn phi(s: &Scenario, cfg: &Settings, steps: usize, out: &mut Vec<u8>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let g = s.global_game()?;
    let n = g.n();
    if steps == 0 {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }
    let points = (steps as f64).powi(n as i32);
    if points > MAX_GRID_POINTS as f64 {
        return Err(CliError::Usage(format!("--grid {steps} gives {points} points for n = {n}, limit {MAX_GRID_POINTS}")));
    }
    g.check_learning_preconditions()?;
    let table = phi_map(&g, admissible_grid(&g, steps), cfg.tol, cfg.max_iter);
    let mut header = indexed("c", n);
    header.extend(indexed("a", n));
    header.extend(["residual".to_string(), "method".to_string(), "status".to_string()]);
    let mut t = Table::new(out, &header)?;
    let mut failures = 0;
    for p in &table {
        let mut row = nums(&p.c);
        match &p.solution {
            Ok(sol) => {
                row.extend(nums(&sol.actions));
                row.extend([fmt_num(sol.residual), sol.method.label().to_string(), "ok".to_string()]);
            }
            Err(e) => {
                failures += 1;
                row.extend(vec![String::new(); n]);
                let residual = match e {
                    sce_core::Error::NoConvergence { best_residual, .. } => fmt_num(*best_residual),
                    _ => String::new(),
                };
                row.extend([residual, String::new(), "failed".to_string()]);
            }
        }
        t.row(&row)?;
    }
    t.finish()?;
    if failures > 0 {
        writeln!(stderr, "{failures} of {} grid points did not converge", table.len())?;
        return Ok(2);
    }
    Ok(0)
}
