//! Execution of a validated [`Scenario`] and its on-disk artifacts.
//!
//! Every CSV starts with a `# config_sha256=<hex>` line followed by a header
//! row; numbers are written with 17 significant digits. `summary.json` is a
//! pure function of the config and seed, wall time goes to `timing.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use super::{ModeConfig, Scenario, ScenarioError};
use crate::error::{Error, Result};
use crate::evolve::{propagate_with, steady_state_with, EvolutionResult, PropagateOptions};
use crate::fock::{expect, variance, Operator};
use crate::generators::lindblad_form_check;
use crate::langevin::{
    build_linear_model, inloop_commutator_factor, output_spectrum, pfunction_diffusion_eigenvalues,
    steady_variance_analytic, transfer_function_spectrum,
};
use crate::policy::NumericPolicy;
use crate::trajectories::{ensemble_average, trajectory_seed, TrajectoryConfig};

/// Where to write and how many worker threads were used.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Recorded in `timing.json` only.
    pub threads: usize,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            threads: rayon::current_num_threads(),
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    /// Contents of `summary.json`.
    pub summary: Value,
    /// Paths of all files written, in write order.
    pub files: Vec<PathBuf>,
    pub wall_seconds: f64,
}

/// Per-time trace distance between a source state and a reduced model.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub mean_distance: f64,
}

impl CompareReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_distance <= threshold
    }
}

/// Compare `full` (a two-mode run, reduced to its source mode, or a
/// single-mode run) with `reduced` sample by sample. Both must keep states
/// on the same time grid.
pub fn compare_report(full: &EvolutionResult, reduced: &EvolutionResult) -> Result<CompareReport> {
    if full.times.len() != reduced.times.len() {
        return Err(Error::GridMismatch(format!(
            "{} samples vs {}",
            full.times.len(),
            reduced.times.len()
        )));
    }
    for (k, (a, b)) in full.times.iter().zip(&reduced.times).enumerate() {
        if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("sample {k}: t = {a} vs {b}")));
        }
    }
    if full.states.len() != full.times.len() || reduced.states.len() != reduced.times.len() {
        return Err(Error::InvalidArgument(
            "compare_report needs evolutions that kept their states".into(),
        ));
    }
    let mut distances = Vec::with_capacity(full.times.len());
    for (f, r) in full.states.iter().zip(&reduced.states) {
        let d = if f.space().factors().len() > 1 && r.space().is_atomic() {
            f.partial_trace(0)?.trace_distance(r)?
        } else {
            f.trace_distance(r)?
        };
        distances.push(d);
    }
    let max_distance = distances.iter().cloned().fold(0.0, f64::max);
    let mean_distance = distances.iter().sum::<f64>() / distances.len().max(1) as f64;
    Ok(CompareReport {
        times: full.times.clone(),
        distances,
        max_distance,
        mean_distance,
    })
}

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// A CSV file with the hash line, a header and numeric rows.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(first: &str) -> Self {
        Table {
            header: vec![first.to_string()],
            rows: Vec::new(),
        }
    }

    fn render(&self, hash: &str) -> String {
        let mut out = format!("# config_sha256={hash}\n");
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn numerical(e: Error) -> ScenarioError {
    ScenarioError::at("mode", e)
}

struct Output {
    results: Value,
    tables: Vec<(String, Table)>,
    diagnostics: Value,
    seeds: Value,
    threshold: Option<(f64, f64)>,
}

impl Output {
    fn new(results: Value) -> Self {
        Output {
            results,
            tables: Vec::new(),
            diagnostics: json!({}),
            seeds: Value::Null,
            threshold: None,
        }
    }
}

fn is_hermitian(op: &Operator) -> bool {
    op.is_hermitian(1e-12)
}

fn evolution_table(res: &EvolutionResult, obs: &[(String, Operator)], vars: &[(String, Operator)]) -> Result<Table> {
    let mut t = Table::new("time");
    for (name, op) in obs {
        if is_hermitian(op) {
            t.header.push(name.clone());
        } else {
            t.header.push(format!("re({name})"));
            t.header.push(format!("im({name})"));
        }
    }
    for (name, _) in vars {
        t.header.push(format!("var({name})"));
    }
    for (k, &time) in res.times.iter().enumerate() {
        let mut row = vec![time];
        for ((_, op), (_, series)) in obs.iter().zip(&res.observables) {
            row.push(series[k].re);
            if !is_hermitian(op) {
                row.push(series[k].im);
            }
        }
        for (_, op) in vars {
            row.push(variance(op, &res.states[k])?);
        }
        t.rows.push(row);
    }
    Ok(t)
}

fn options(s: &Scenario, obs: &[(String, Operator)]) -> PropagateOptions {
    let sc = &s.config.solver;
    let mut o = PropagateOptions::new(sc.t_final, sc.dt)
        .stride(sc.stride)
        .keep_states(true);
    for (n, op) in obs {
        o = o.observe(n.clone(), op.clone());
    }
    o
}

fn run_master(s: &Scenario) -> Result<Output> {
    let res = propagate_with(&s.generator, &s.initial, &options(s, &s.observables))?;
    let table = evolution_table(&res, &s.observables, &s.variances)?;
    let last = table.rows.last().cloned().unwrap_or_default();
    let mut finals = Map::new();
    for (name, v) in table.header.iter().zip(&last).skip(1) {
        finals.insert(name.clone(), json!(v));
    }
    let mut out = Output::new(json!({
        "samples": res.times.len(),
        "final": finals,
    }));
    out.diagnostics = json!({
        "boundary_leakage": res.boundary_leakage,
        "leakage_flagged": res.leakage_flagged,
        "max_trace_drift": res.max_trace_drift,
    });
    out.tables.push(("master.csv".into(), table));
    Ok(out)
}

fn run_steady(s: &Scenario) -> Result<Output> {
    let policy = NumericPolicy::DEFAULT;
    let ss = steady_state_with(&s.generator, &policy)?;
    let mut obs = Map::new();
    for (name, op) in &s.observables {
        let v = expect(op, &ss.state)?;
        if is_hermitian(op) {
            obs.insert(name.clone(), json!(v.re));
        } else {
            obs.insert(name.clone(), json!([v.re, v.im]));
        }
    }
    let mut vars = Map::new();
    for (name, op) in &s.variances {
        vars.insert(name.clone(), json!(variance(op, &ss.state)?));
    }
    let mut results = json!({
        "observables": obs,
        "variances": vars,
        "singular_gap": ss.singular_gap,
        "residual": ss.residual,
    });
    if let Some((lambda, mu)) = s.linear {
        let (vx, vy) = steady_variance_analytic(lambda, mu)?;
        results["linearized"] = json!({ "lambda": lambda, "mu": mu, "vx": vx, "vy": vy });
    }
    let mut out = Output::new(results);
    out.diagnostics = json!({
        "boundary_leakage": ss.boundary_leakage,
        "leakage_flagged": ss.boundary_leakage > policy.leakage_warn,
    });
    Ok(out)
}

fn run_trajectories(s: &Scenario, n: usize, seed: u64, check_master: bool) -> Result<Output> {
    let (unraveling, unmonitored) = s
        .unraveling
        .clone()
        .ok_or_else(|| Error::Unsupported("scheme has no trajectory unraveling".into()))?;
    let sc = &s.config.solver;
    let mut cfg = TrajectoryConfig::new(unraveling, s.initial_source.clone(), sc.t_final, sc.dt).stride(sc.stride);
    for (name, op) in &s.source_observables {
        cfg = cfg.observe(name.clone(), op.clone());
    }
    for (name, op) in &s.source_variances {
        cfg = cfg.observe_variance(name.clone(), op.clone());
    }
    for op in unmonitored {
        cfg = cfg.unmonitored(op);
    }
    let ens = ensemble_average(&cfg, n, seed)?;

    let mut t = Table::new("time");
    let mut series = Vec::new();
    for st in &ens.observables {
        series.push((st.name.clone(), st));
    }
    for st in &ens.variances {
        series.push((format!("var({})", st.name), st));
    }
    let current_names = ["I_x", "I_y"];
    for (k, st) in ens.currents.iter().enumerate() {
        series.push((current_names[k.min(1)].to_string(), st));
    }
    for (name, _) in &series {
        t.header.push(name.clone());
        t.header.push(format!("{name}_se"));
    }
    for (k, &time) in ens.times.iter().enumerate() {
        let mut row = vec![time];
        for (_, st) in &series {
            row.push(st.mean[k]);
            row.push(st.std_error[k]);
        }
        t.rows.push(row);
    }

    let mut results = json!({
        "trajectories": ens.count,
        "unraveling": cfg.unraveling.name(),
        "mean_jumps": ens.mean_jumps,
    });
    let mut diagnostics = json!({});
    if check_master {
        let res = propagate_with(&s.generator, &s.initial_source, &options(s, &s.source_observables))?;
        let mut z = Map::new();
        let mut worst: f64 = 0.0;
        for (st, (_, op)) in ens.observables.iter().zip(&s.source_observables) {
            let me: Vec<f64> = res
                .states
                .iter()
                .map(|r| expect(op, r).map(|v| v.re))
                .collect::<Result<_>>()?;
            let m = max_z(&st.mean, &st.std_error, &me);
            worst = worst.max(m);
            z.insert(st.name.clone(), json!(m));
        }
        for (st, (_, op)) in ens.variances.iter().zip(&s.source_variances) {
            let me: Vec<f64> = res.states.iter().map(|r| variance(op, r)).collect::<Result<_>>()?;
            let m = max_z(&st.mean, &st.std_error, &me);
            worst = worst.max(m);
            z.insert(format!("var({})", st.name), json!(m));
        }
        results["master_equation_check"] = json!({ "max_abs_z": z, "worst": worst });
        diagnostics = json!({
            "boundary_leakage": res.boundary_leakage,
            "leakage_flagged": res.leakage_flagged,
        });
    }
    let mut out = Output::new(results);
    out.diagnostics = diagnostics;
    out.seeds = json!({
        "base_seed": seed,
        "derivation": "trajectory i uses splitmix64(base + i * 0x9E3779B97F4A7C15); noise channel k is ChaCha8 stream k",
        "first_trajectory_seeds": (0..n.min(4) as u64).map(|i| trajectory_seed(seed, i)).collect::<Vec<_>>(),
    });
    out.tables.push(("trajectories.csv".into(), t));
    Ok(out)
}

/// Largest `|mean − reference| / se`, skipping samples where the ensemble
/// has not spread yet.
fn max_z(mean: &[f64], se: &[f64], reference: &[f64]) -> f64 {
    mean.iter()
        .zip(se)
        .zip(reference)
        .filter(|((m, &e), _)| e > 1e-9 * m.abs().max(1.0))
        .map(|((m, e), r)| ((m - r) / e).abs())
        .fold(0.0, f64::max)
}

fn run_spectrum(s: &Scenario, omega_min: f64, omega_max: f64, points: usize, tau: f64) -> Result<Output> {
    let (lambda, mu) = s
        .linear
        .ok_or_else(|| Error::Unsupported("scheme has no linearized model".into()))?;
    let model = build_linear_model(lambda, mu, tau)?;
    let omegas: Vec<f64> = if points == 1 {
        vec![omega_min]
    } else {
        (0..points)
            .map(|k| omega_min + (omega_max - omega_min) * k as f64 / (points - 1) as f64)
            .collect()
    };
    let closed = output_spectrum(&model, &omegas)?;
    let transfer = transfer_function_spectrum(&model, &omegas)?;
    let quadrature = mu == -1.0;
    let mut t = Table::new("omega");
    t.header
        .extend(["sx", "sy", "sx_transfer", "sy_transfer"].map(String::from));
    if quadrature {
        t.header.extend(["inloop_re", "inloop_im"].map(String::from));
    }
    let mut max_dev: f64 = 0.0;
    for (k, &w) in omegas.iter().enumerate() {
        let mut row = vec![w, closed.sx[k], closed.sy[k], transfer.sx[k], transfer.sy[k]];
        max_dev = max_dev
            .max((closed.sx[k] - transfer.sx[k]).abs())
            .max((closed.sy[k] - transfer.sy[k]).abs());
        if quadrature {
            let f = inloop_commutator_factor(lambda, w, tau)?;
            row.extend([f.re, f.im]);
        }
        t.rows.push(row);
    }
    let min_of = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let (vx, vy) = steady_variance_analytic(lambda, mu)?;
    let p = pfunction_diffusion_eigenvalues(lambda, mu)?;
    let mut out = Output::new(json!({
        "lambda": lambda,
        "mu": mu,
        "tau": tau,
        "min_sx": min_of(&closed.sx),
        "min_sy": min_of(&closed.sy),
        "max_closed_form_vs_transfer": max_dev,
        "intracavity_vx": vx,
        "intracavity_vy": vy,
        "pfunction_diffusion": { "e_plus": p.e_plus, "e_minus": p.e_minus, "nonclassical": p.nonclassical },
    }));
    out.tables.push(("spectrum.csv".into(), t));
    Ok(out)
}

fn run_compare(s: &Scenario, threshold: f64) -> Result<Output> {
    let reduced_l = s
        .reduced
        .as_ref()
        .ok_or_else(|| Error::Unsupported("compare mode needs a two-mode scheme".into()))?;
    let full = propagate_with(&s.generator, &s.initial, &options(s, &[]))?;
    let reduced = propagate_with(reduced_l, &s.initial_source, &options(s, &[]))?;
    let report = compare_report(&full, &reduced)?;
    let mut t = Table::new("time");
    t.header.push("trace_distance".into());
    for (time, d) in report.times.iter().zip(&report.distances) {
        t.rows.push(vec![*time, *d]);
    }
    let passed = report.passes(threshold);
    let mut out = Output::new(json!({
        "max_trace_distance": report.max_distance,
        "mean_trace_distance": report.mean_distance,
        "threshold": threshold,
        "passed": passed,
    }));
    out.diagnostics = json!({
        "full_boundary_leakage": full.boundary_leakage,
        "full_leakage_flagged": full.leakage_flagged,
        "reduced_boundary_leakage": reduced.boundary_leakage,
        "reduced_leakage_flagged": reduced.leakage_flagged,
    });
    out.threshold = Some((report.max_distance, threshold));
    out.tables.push(("compare.csv".into(), t));
    Ok(out)
}

fn run_lindblad(s: &Scenario) -> Result<Output> {
    let mut results = Map::new();
    for (label, l) in &s.lindblad_targets {
        let chk = lindblad_form_check(l)?;
        results.insert(
            label.clone(),
            json!({
                "valid": chk.valid,
                "min_kossakowski_eigenvalue": chk.min_kossakowski_eigenvalue,
            }),
        );
    }
    Ok(Output::new(Value::Object(results)))
}

fn write(path: &Path, contents: &str, files: &mut Vec<PathBuf>) -> std::io::Result<()> {
    fs::write(path, contents)?;
    files.push(path.to_path_buf());
    Ok(())
}

/// Execute the scenario's mode and write its artifacts into `opts.out_dir`.
///
/// Artifacts are written once the computation has finished. A compare run
/// that exceeds its threshold still writes them, then returns
/// [`ScenarioError::Threshold`].
pub fn run(s: &Scenario, opts: &RunOptions) -> std::result::Result<RunSummary, ScenarioError> {
    let start = Instant::now();
    let out = match s.mode() {
        ModeConfig::Master => run_master(s),
        ModeConfig::Steady => run_steady(s),
        ModeConfig::Trajectories { n, seed, check_master } => run_trajectories(s, n, seed, check_master),
        ModeConfig::Spectrum {
            omega_min,
            omega_max,
            points,
            tau,
        } => run_spectrum(s, omega_min, omega_max, points, tau),
        ModeConfig::Compare { threshold } => run_compare(s, threshold),
        ModeConfig::LindbladCheck => run_lindblad(s),
    }
    .map_err(numerical)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    fs::create_dir_all(&opts.out_dir)?;
    let mut files = Vec::new();
    let mut names = Vec::new();
    for (name, table) in &out.tables {
        write(&opts.out_dir.join(name), &table.render(&s.config_sha256), &mut files)?;
        names.push(name.clone());
    }
    names.push("summary.json".into());
    let summary = json!({
        "config_sha256": s.config_sha256,
        "version": env!("CARGO_PKG_VERSION"),
        "mode": s.mode().kind(),
        "scheme": s.config.scheme.kind(),
        "inputs": serde_json::to_value(&s.config).expect("config serializes"),
        "results": out.results,
        "diagnostics": out.diagnostics,
        "seed_provenance": out.seeds,
        "files": names,
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write(&opts.out_dir.join("summary.json"), &text, &mut files)?;
    let timing = json!({
        "config_sha256": s.config_sha256,
        "wall_seconds": wall_seconds,
        "threads": opts.threads,
    });
    let mut text = serde_json::to_string_pretty(&timing).expect("timing serializes");
    text.push('\n');
    write(&opts.out_dir.join("timing.json"), &text, &mut files)?;

    if let Some((max_distance, threshold)) = out.threshold {
        if max_distance > threshold {
            return Err(ScenarioError::Threshold {
                max_distance,
                threshold,
            });
        }
    }
    Ok(RunSummary {
        summary,
        files,
        wall_seconds,
    })
}
