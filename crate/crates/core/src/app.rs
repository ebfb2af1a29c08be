//! Command-line front end: argument parsing, experiment orchestration and
//! the output directory layout.
//!
//! Every command writes `metadata.json` and a copy of the config into the
//! output directory, whatever the outcome. Sweeps write the rows that
//! finished before reporting the first failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ConvergenceMode, RunConfig};
use crate::diagnostics::DiagnosticsSeries;
use crate::error::{Error, Result};
use crate::field::snapshot::{save_snapshot, SnapshotHeader};
use crate::potential::audit_potential_bounds;
use crate::propagator::{solve, Solution};
use crate::sweep::{self, Element};
use crate::wkb::{
    b_trend, compare_to_direct, instability_experiment, random_symmetrizer_check, reconstruct, symmetrizer_check,
    wkb_solve, CompareConfig, CompareRow, InstabilityConfig, InstabilityRow, TimeStep, WkbConfig, WkbStatus,
};

/// Sampling box of the random symmetrizer states.
const SYMMETRIZER_AMPLITUDE: f64 = 2.0;
const SYMMETRIZER_SPEED: f64 = 5.0;

#[derive(Debug, Parser)]
#[command(name = "magnls", version, about = "Magnetic NLS solver and WKB experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// INI run configuration.
    #[arg(long, global = true, default_value = "run.ini")]
    pub config: PathBuf,
    #[arg(long, global = true, default_value = "out")]
    pub output_dir: PathBuf,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Direct solve with diagnostics and snapshots.
    Solve,
    /// WKB system and reconstruction at the configured b.
    Wkb,
    /// Direct solve against WKB reconstruction over a b sweep.
    Compare {
        /// Comma-separated b values (overrides [wkb] b_list).
        #[arg(long, value_delimiter = ',')]
        b_list: Option<Vec<f64>>,
    },
    /// Separation of nearby initial data over a b sweep.
    Instability {
        #[arg(long, value_delimiter = ',')]
        b_list: Option<Vec<f64>>,
    },
    /// Truncation, piecewise-A or time-step convergence sweep.
    Convergence {
        /// truncation, piecewise or resolution (overrides [convergence] mode).
        #[arg(long)]
        mode: Option<String>,
    },
    /// Sampled bounds of the magnetic potential.
    Audit,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Wkb => "wkb",
            Command::Compare { .. } => "compare",
            Command::Instability { .. } => "instability",
            Command::Convergence { .. } => "convergence",
            Command::Audit => "audit",
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli.global, &cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(global: &GlobalArgs, command: &Command) -> Result<()> {
    match global.threads {
        Some(0) => Err(Error::config("cli", "threads", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("cli", "threads", e.to_string()))?
            .install(|| run_in_pool(global, command)),
        None => run_in_pool(global, command),
    }
}

fn run_in_pool(global: &GlobalArgs, command: &Command) -> Result<()> {
    let text = fs::read_to_string(&global.config)
        .map_err(|e| Error::config("cli", "config", format!("cannot read {}: {e}", global.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    let mode = match command {
        Command::Convergence { mode: Some(m) } => Some(m.parse::<ConvergenceMode>()?),
        _ => None,
    };
    let out = &global.output_dir;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.ini"), &text)?;

    let mut meta = base_metadata(command, global, &cfg)?;
    let mut results = Map::new();
    let outcome = match command {
        Command::Solve => cmd_solve(&cfg, out, &mut results),
        Command::Wkb => cmd_wkb(&cfg, out, global.seed, &mut results),
        Command::Compare { b_list } => cmd_compare(&cfg, out, b_list.as_deref(), &mut results),
        Command::Instability { b_list } => cmd_instability(&cfg, out, b_list.as_deref(), &mut results),
        Command::Convergence { .. } => cmd_convergence(&cfg, out, mode.unwrap_or(cfg.convergence.mode), &mut results),
        Command::Audit => cmd_audit(&cfg, out, &mut results),
    };
    meta.insert("results".into(), Value::Object(results));
    let (status, error, abort) = match &outcome {
        Ok(()) => ("completed", Value::Null, Value::Null),
        Err(Error::Aborted { reason, .. }) => ("aborted", json!(reason.to_string()), json!(reason)),
        Err(e) => ("failed", json!(e.to_string()), Value::Null),
    };
    meta.insert("status".into(), json!(status));
    meta.insert("exit_code".into(), json!(outcome.as_ref().map_or_else(|e| e.exit_code(), |_| 0)));
    meta.insert("error".into(), error);
    meta.insert("abort_reason".into(), abort);
    write_json(&out.join("metadata.json"), &Value::Object(meta))?;
    outcome
}

fn base_metadata(command: &Command, global: &GlobalArgs, cfg: &RunConfig) -> Result<Map<String, Value>> {
    let g = &cfg.grid;
    let audit = audit_potential_bounds(
        &cfg.potential,
        g,
        cfg.audit.window,
        cfg.audit.time_samples,
        cfg.audit.order,
        &cfg.audit.bounds,
    )?;
    let mut m = Map::new();
    m.insert("command".into(), json!(command.name()));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("seed".into(), json!(global.seed));
    m.insert("threads".into(), json!(global.threads));
    m.insert("config_file".into(), json!("config.ini"));
    m.insert("config".into(), serde_json::to_value(&cfg.echo)?);
    m.insert(
        "grid".into(),
        json!({ "dim": g.dim(), "n": g.points_per_axis(), "length": g.length(), "spacing": g.spacing() }),
    );
    m.insert("nonlinearity".into(), serde_json::to_value(cfg.nonlinearity.summary())?);
    m.insert(
        "conventions".into(),
        json!({
            "coupling": "sign * b^gamma multiplies u g(|u|^2)",
            "energy": "energy = kinetic + nl_energy, nl_energy = sign * b^gamma * G(u) (signed)",
            "kinetic": "0.5 * sum over links of |exp(i b theta) u(x + e) - u(x)|^2 / dx^2 * dV",
            "links": "U = exp(+i b theta), theta = integral of A along the edge",
            "gauge": "A -> A + grad chi, u -> exp(-i b chi) u",
            "energy_law_residual": "E(t) - E(0) + correction_integral, trapezoid rule in time",
            "wkb": "t = b s, h = 1/b, u = alpha exp(i b (S - Phi))",
        }),
    );
    m.insert("potential_audit".into(), serde_json::to_value(&audit)?);
    m.insert("potential_audit_pass".into(), json!(audit.pass()));
    Ok(m)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_rows<R: Serialize>(path: &Path, columns: &[&str], rows: &[R]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(File::create(path)?));
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_diagnostics(path: &Path, series: &DiagnosticsSeries) -> Result<()> {
    series.write_csv(BufWriter::new(File::create(path)?))
}

fn write_solution(dir: &Path, sol: &Solution, b: f64, snapshots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_diagnostics(&dir.join("diagnostics.csv"), &sol.diagnostics)?;
    if snapshots {
        let sdir = dir.join("snapshots");
        fs::create_dir_all(&sdir)?;
        for s in &sol.snapshots {
            let header = SnapshotHeader::new(&sol.grid, s.time, b).with("step", s.step as u64);
            save_snapshot(&sdir.join(format!("u_{:06}.bin", s.step)), &header, &s.field)?;
        }
    }
    Ok(())
}

fn solution_summary(sol: &Solution) -> Value {
    json!({
        "steps_planned": sol.steps_planned,
        "last_step": sol.final_state.step,
        "last_time": sol.final_state.time,
        "run_status": sol.status,
        "relative_mass_drift": sol.diagnostics.relative_mass_drift(),
        "max_abs_energy_law_residual": sol.diagnostics.max_abs_residual(),
        "solver_stats": sol.stats,
        "piecewise": sol.piecewise,
    })
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, results: &mut Map<String, Value>) -> Result<()> {
    let u0 = cfg.initial.field(&cfg.grid, cfg.solver.b)?;
    results.insert("solver".into(), serde_json::to_value(&cfg.solver)?);
    match solve(&u0, &cfg.potential, &cfg.nonlinearity, &cfg.solver) {
        Ok(sol) => {
            write_solution(out, &sol, cfg.solver.b, cfg.output.write_snapshots)?;
            results.insert("run".into(), solution_summary(&sol));
            Ok(())
        }
        Err(Error::Aborted { reason, partial }) => {
            write_solution(out, &partial, cfg.solver.b, cfg.output.write_snapshots)?;
            results.insert("run".into(), solution_summary(&partial));
            Err(Error::Aborted { reason, partial })
        }
        Err(e) => Err(e),
    }
}

fn wkb_config(cfg: &RunConfig, b: f64) -> WkbConfig {
    let w = &cfg.wkb;
    WkbConfig {
        time_step: w.time_step,
        dealias: w.dealias,
        shock_ceiling: w.shock_ceiling,
        frame_stride: w.frame_stride,
        ..WkbConfig::new(b, w.t_end, cfg.initial.amplitude.sample(&cfg.grid), cfg.initial.phase.clone())
    }
}

pub fn cmd_wkb(cfg: &RunConfig, out: &Path, seed: u64, results: &mut Map<String, Value>) -> Result<()> {
    let b = cfg.solver.b;
    let wcfg = wkb_config(cfg, b);
    let nl = &cfg.nonlinearity;
    if !nl.is_linear() {
        let reports = random_symmetrizer_check(
            nl,
            cfg.grid.dim(),
            cfg.wkb.symmetrizer_samples,
            SYMMETRIZER_AMPLITUDE,
            SYMMETRIZER_SPEED,
            seed,
        )?;
        results.insert("symmetrizer_random".into(), serde_json::to_value(&reports)?);
    }
    let traj = wkb_solve(&wcfg, &cfg.potential, nl)?;
    write_rows(&out.join("wkb_records.csv"), &["step", "t", "dt", "mass", "max_velocity_gradient"], &traj.records)?;

    let fdir = out.join("frames");
    fs::create_dir_all(&fdir)?;
    for f in &traj.frames {
        let header = SnapshotHeader::new(&traj.grid, f.state.t, b)
            .with("h", traj.h)
            .with("rescaled_time", f.state.t)
            .with("step", f.step as u64)
            .with("content", "alpha");
        save_snapshot(&fdir.join(format!("alpha_{:06}.bin", f.step)), &header, &f.state.alpha())?;
    }
    if !nl.is_linear() {
        let end = &traj.final_frame().state;
        let reports = (0..cfg.grid.dim()).map(|d| symmetrizer_check(end, nl, d)).collect::<Result<Vec<_>>>()?;
        results.insert("symmetrizer_final_state".into(), serde_json::to_value(&reports)?);
    }
    if traj.h > 0.0 {
        let rec = reconstruct(&traj, &cfg.initial.phase, &cfg.potential, b)?;
        for (f, r) in traj.frames.iter().zip(&rec.frames) {
            let header = SnapshotHeader::new(&traj.grid, r.time, b)
                .with("h", traj.h)
                .with("rescaled_time", r.rescaled_time)
                .with("step", f.step as u64)
                .with("content", "reconstruction")
                .with("defect", r.defect);
            save_snapshot(&fdir.join(format!("u_{:06}.bin", f.step)), &header, &r.field)?;
        }
        if let Some(w) = &rec.warning {
            eprintln!("warning: {w}");
        }
        results.insert("reconstruction".into(), serde_json::to_value(rec.summary())?);
    }
    results.insert("h".into(), json!(traj.h));
    results.insert("wkb_status".into(), serde_json::to_value(traj.status)?);
    results.insert("steps".into(), json!(traj.records.len() - 1));
    results.insert("relative_mass_drift".into(), json!(traj.relative_mass_drift()));
    if let WkbStatus::ShockAborted { t, .. } = traj.status {
        eprintln!("note: WKB integration stopped at rescaled time {t}: velocity gradient exceeded the shock ceiling");
    }
    Ok(())
}

fn compare_config(cfg: &RunConfig, b_list: Vec<f64>) -> CompareConfig {
    let w = &cfg.wkb;
    CompareConfig {
        b_list,
        t_end: w.t_end,
        dim: cfg.grid.dim(),
        length: cfg.grid.length(),
        initial: cfg.initial.clone(),
        reference_b: cfg.solver.b,
        reference_n: w.reference_n,
        n_exponent: w.n_exponent,
        reference_dt: w.reference_dt,
        dt_exponent: w.dt_exponent,
        wkb_safety: match w.time_step {
            TimeStep::Cfl { safety } => safety,
            TimeStep::Fixed { .. } => 0.5,
        },
        cn_tolerance: cfg.solver.cn_tolerance,
        refinement_check: w.refinement_check,
    }
}

/// Splits per-element results into finished rows and the first failure.
fn partition<R>(results: Vec<Result<R>>) -> (Vec<R>, Option<Error>) {
    let mut rows = Vec::new();
    let mut first = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                if first.is_none() {
                    first = Some(e);
                }
            }
        }
    }
    (rows, first)
}

fn finish(failure: Option<Error>) -> Result<()> {
    failure.map_or(Ok(()), Err)
}

fn b_label(b: f64) -> String {
    format!("b_{b}")
}

pub fn cmd_compare(
    cfg: &RunConfig,
    out: &Path,
    b_list: Option<&[f64]>,
    results: &mut Map<String, Value>,
) -> Result<()> {
    let bs = b_list.map_or_else(|| cfg.wkb.b_list.clone(), <[f64]>::to_vec);
    let ccfg = compare_config(cfg, bs.clone());
    ccfg.validate()?;
    let per_b: Vec<Result<CompareRow>> = bs
        .par_iter()
        .map(|&b| {
            let one = CompareConfig { b_list: vec![b], ..ccfg.clone() };
            let row = compare_to_direct(&one, &cfg.potential, &cfg.nonlinearity)?.remove(0);
            let dir = out.join(b_label(b));
            fs::create_dir_all(&dir)?;
            write_json(&dir.join("row.json"), &row)?;
            Ok(row)
        })
        .collect();
    let (rows, failure) = partition(per_b);
    write_rows(&out.join("compare.csv"), &crate::wkb::COMPARE_COLUMNS, &rows)?;
    let summary = json!({
        "rows": rows.len(),
        "requested": bs.len(),
        "max_discrepancy": rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max),
        "b_trend": if rows.len() >= 2 { json!(b_trend(&rows)) } else { Value::Null },
    });
    write_json(&out.join("summary.json"), &summary)?;
    results.insert("summary".into(), summary);
    results.insert("compare".into(), serde_json::to_value(ccfg_echo(&ccfg))?);
    finish(failure)
}

fn ccfg_echo(c: &CompareConfig) -> Value {
    json!({
        "b_list": c.b_list,
        "t_end": c.t_end,
        "reference_b": c.reference_b,
        "reference_n": c.reference_n,
        "n_exponent": c.n_exponent,
        "reference_dt": c.reference_dt,
        "dt_exponent": c.dt_exponent,
        "points": c.b_list.iter().map(|b| c.points_for(*b)).collect::<Vec<_>>(),
        "dt": c.b_list.iter().map(|b| c.dt_for(*b)).collect::<Vec<_>>(),
    })
}

pub fn cmd_instability(
    cfg: &RunConfig,
    out: &Path,
    b_list: Option<&[f64]>,
    results: &mut Map<String, Value>,
) -> Result<()> {
    let bs = b_list.map_or_else(|| cfg.wkb.b_list.clone(), <[f64]>::to_vec);
    let icfg = InstabilityConfig {
        b_list: bs.clone(),
        delta: cfg.wkb.delta,
        threshold: cfg.wkb.threshold,
        t_end: cfg.wkb.t_end,
        grid: cfg.grid,
        initial: cfg.initial.clone(),
        rotation_fraction: cfg.wkb.rotation_fraction,
        cn_tolerance: cfg.solver.cn_tolerance,
        leakage: cfg.solver.leakage,
    };
    icfg.validate()?;
    let per_b: Vec<Result<InstabilityRow>> = bs
        .par_iter()
        .map(|&b| {
            let one = InstabilityConfig { b_list: vec![b], ..icfg.clone() };
            let row = instability_experiment(&one, &cfg.potential, &cfg.nonlinearity)?.remove(0);
            let dir = out.join(b_label(b));
            fs::create_dir_all(&dir)?;
            write_json(&dir.join("row.json"), &row)?;
            Ok(row)
        })
        .collect();
    let (rows, failure) = partition(per_b);
    write_rows(&out.join("instability.csv"), &crate::wkb::INSTABILITY_COLUMNS, &rows)?;
    let products: Vec<f64> = rows.iter().map(|r| r.t_sep_times_b).collect();
    let summary = json!({
        "rows": rows.len(),
        "requested": bs.len(),
        "all_separated": rows.iter().all(InstabilityRow::separated),
        "max_t_sep_times_b": products.iter().copied().fold(f64::NAN, f64::max),
        "min_t_sep_times_b": products.iter().copied().fold(f64::NAN, f64::min),
    });
    write_json(&out.join("summary.json"), &summary)?;
    results.insert("summary".into(), summary);
    finish(failure)
}

fn write_elements<R: Serialize + Clone>(
    out: &Path,
    csv_name: &str,
    columns: &[&str],
    label: impl Fn(&R) -> String,
    b: f64,
    elements: Vec<Result<Element<R>>>,
) -> Result<(Vec<R>, usize, Option<Error>)> {
    let total = elements.len();
    let (done, failure) = partition(elements);
    for e in &done {
        let dir = out.join(label(&e.row));
        fs::create_dir_all(&dir)?;
        write_diagnostics(&dir.join("diagnostics.csv"), &e.diagnostics)?;
        let f = &e.final_state;
        let header = SnapshotHeader::new(f.field.grid(), f.time, b).with("step", f.step as u64);
        save_snapshot(&dir.join("final.bin"), &header, &f.field)?;
    }
    let rows: Vec<R> = done.into_iter().map(|e| e.row).collect();
    write_rows(&out.join(csv_name), columns, &rows)?;
    Ok((rows, total, failure))
}

pub fn cmd_convergence(
    cfg: &RunConfig,
    out: &Path,
    mode: ConvergenceMode,
    results: &mut Map<String, Value>,
) -> Result<()> {
    let u0 = cfg.initial.field(&cfg.grid, cfg.solver.b)?;
    let (pot, nl, scfg, conv) = (&cfg.potential, &cfg.nonlinearity, &cfg.solver, &cfg.convergence);
    let b = scfg.b;
    let (summary, failure) = match mode {
        ConvergenceMode::Truncation => {
            let elements = sweep::truncation_sweep(&u0, pot, nl, scfg, &conv.m_list)?;
            let (rows, total, failure) = write_elements(
                out,
                "truncation.csv",
                &sweep::TRUNCATION_COLUMNS,
                |r: &sweep::TruncationRow| format!("m_{}", r.m),
                b,
                elements,
            )?;
            (sweep::summarize_truncation(&rows, total, 5.0 * scfg.cn_tolerance), failure)
        }
        ConvergenceMode::Piecewise => {
            let elements = sweep::piecewise_sweep(&u0, pot, nl, scfg, &conv.pieces_list)?;
            let (rows, total, failure) = write_elements(
                out,
                "piecewise.csv",
                &sweep::PIECEWISE_COLUMNS,
                |r: &sweep::PiecewiseRow| format!("pieces_{}", r.pieces),
                b,
                elements,
            )?;
            (sweep::summarize_piecewise(&rows, total), failure)
        }
        ConvergenceMode::Resolution => {
            let elements = sweep::resolution_sweep(&u0, pot, nl, scfg, conv.refinements)?;
            let (rows, total, failure) = write_elements(
                out,
                "resolution.csv",
                &sweep::RESOLUTION_COLUMNS,
                |r: &sweep::ResolutionRow| format!("steps_{}", r.steps),
                b,
                elements,
            )?;
            (sweep::summarize_resolution(&rows, total), failure)
        }
    };
    write_json(&out.join("summary.json"), &summary)?;
    results.insert("summary".into(), serde_json::to_value(&summary)?);
    finish(failure)
}

pub fn cmd_audit(cfg: &RunConfig, out: &Path, results: &mut Map<String, Value>) -> Result<()> {
    let a = &cfg.audit;
    let audit = audit_potential_bounds(&cfg.potential, &cfg.grid, a.window, a.time_samples, a.order, &a.bounds)?;
    let rows = [
        ("dt_a", audit.sup_dta, a.bounds.dta, audit.pass_dta),
        ("dx_dt_a_1", audit.sup_dx_dta[0], f64::NAN, true),
        ("dx_dt_a_2", audit.sup_dx_dta[1], f64::NAN, true),
        ("dx_a_1", audit.sup_dxa[0], a.bounds.dxa, audit.pass_dxa),
        ("dx_a_2", audit.sup_dxa[1], a.bounds.dxa, audit.pass_dxa),
        ("weighted_dx_b", audit.sup_weighted_dxb, a.bounds.weighted_dxb, audit.pass_weighted_dxb),
    ];
    write_rows(&out.join("audit.csv"), &["quantity", "sup", "bound", "pass"], &rows)?;
    write_json(&out.join("audit.json"), &audit)?;
    results.insert("pass".into(), json!(audit.pass()));
    Ok(())
}
