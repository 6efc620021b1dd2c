//! The four subcommands and their exit-code contract.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{build_problem, load, LoadedConfig, Problem};
use super::sweep::run_cells;
use crate::barriers::{
    barrier_trajectory, check_concavity, check_linear_barrier, check_slope_bound, verify_comparison,
    BarrierState, ComparisonCoefficients, ComparisonStatus,
};
use crate::blowup::BlowupCertificate;
use crate::error::Error;
use crate::io::{read_trajectory, write_json, write_trajectory};
use crate::model::{check_bounds, check_mass_conservation, check_signal_gradient_bound, nodal_mass_drift};
use crate::solver::{epsilon_continuation, simulate, StepControls, Termination, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_BLOWUP: i32 = 10;
pub const EXIT_STEP_COLLAPSE: i32 = 11;
pub const EXIT_MONOTONICITY: i32 = 12;

/// A failed command: message for stderr plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::Csv(c) if c.is_io_error() => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(e: Error) -> Failure {
    Failure { code: EXIT_IO, message: e.to_string() }
}

pub type Outcome = std::result::Result<i32, Failure>;

pub fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::HorizonReached => EXIT_OK,
        Termination::BlowupDeclared => EXIT_BLOWUP,
        Termination::StepCollapse => EXIT_STEP_COLLAPSE,
        Termination::MonotonicityFailure => EXIT_MONOTONICITY,
    }
}

fn output_dir(loaded: &LoadedConfig, out: Option<&Path>) -> Option<PathBuf> {
    out.map(Path::to_path_buf)
        .or_else(|| loaded.config.output.as_ref().map(|o| loaded.base.join(&o.dir)))
}

fn require_output_dir(loaded: &LoadedConfig, out: Option<&Path>) -> std::result::Result<PathBuf, Failure> {
    output_dir(loaded, out).ok_or_else(|| Failure {
        code: EXIT_CONFIG,
        message: "no output directory: pass --out or set output.dir".into(),
    })
}

fn save_config(dir: &Path, loaded: &LoadedConfig) -> std::result::Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(e.into()))?;
    write_json(&dir.join("config.json"), &loaded.raw).map_err(io_failure)
}

pub fn run_simulate(config: &Path, out: Option<&Path>) -> Outcome {
    let loaded = load(config)?;
    let dir = require_output_dir(&loaded, out)?;
    let prob = build_problem(&loaded.config, &loaded.base)?;
    let traj = simulate(&prob.params, &prob.w0, prob.epsilon, &loaded.config.controls)?;
    save_config(&dir, &loaded)?;
    write_trajectory(&dir, &traj).map_err(io_failure)?;
    println!(
        "{} at t = {:.6e} after {} steps ({} snapshots) -> {}",
        traj.termination.as_str(),
        traj.final_time(),
        traj.diagnostics.len(),
        traj.snapshots().len(),
        dir.display()
    );
    Ok(termination_code(traj.termination))
}

fn certificate(prob: &Problem, loaded: &LoadedConfig) -> Result<BlowupCertificate, Failure> {
    let (m0, c4, gamma) = prob.blowup_inputs(loaded.config.blowup.as_ref())?;
    let cert = BlowupCertificate::new(&prob.params, m0, c4, gamma)?.with_initial(&prob.w0_full, &prob.params)?;
    Ok(cert)
}

pub fn run_threshold(config: &Path, out: Option<&Path>) -> Outcome {
    let loaded = load(config)?;
    let prob = build_problem(&loaded.config, &loaded.base)?;
    let cert = certificate(&prob, &loaded)?;
    let p = &prob.params;
    println!("n = {}, R = {}, beta = {}, alpha = {}, m = {:.12e}", p.n, p.radius, p.beta, p.alpha, p.mass);
    println!("m0     = {:.12e}", cert.m0);
    println!("C4     = {:.12e}", cert.c4);
    println!("gamma  = {:.12e}", cert.gamma);
    println!("c1     = {:.12e}", cert.c1);
    println!("c2     = {:.12e}", cert.c2);
    println!("c3     = {:.12e}", cert.c3);
    println!("s1     = {:.12e}  (binding: {:?})", cert.s1, cert.binding);
    println!("s0     = {:.12e}", cert.s0);
    println!("r0     = {:.12e}", cert.r0);
    println!("predicate at lower bound = {:.12e}", cert.predicate_at_lower_bound);
    if let (Some(y0), Some(pred), Some(met)) = (cert.y0_moment, cert.predicate_at_initial, cert.concentration_met) {
        println!("initial moment = {y0:.12e}, predicate = {pred:.12e}, concentration met: {met}");
        match cert.riccati_t {
            Some(t) => println!("subsolution blow-up time = {t:.12e}"),
            None => println!("subsolution blow-up time = infinite"),
        }
    }
    if let Some(dir) = output_dir(&loaded, out) {
        save_config(&dir, &loaded)?;
        write_json(&dir.join("certificate.json"), &cert).map_err(io_failure)?;
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct CheckEntry {
    name: &'static str,
    /// `pass`, `fail`, or `not_applicable` (hypothesis not met; reported only).
    status: &'static str,
    detail: Value,
}

impl CheckEntry {
    fn new(name: &'static str, pass: bool, detail: Value) -> Self {
        CheckEntry { name, status: if pass { "pass" } else { "fail" }, detail }
    }

    fn skipped(name: &'static str, detail: Value) -> Self {
        CheckEntry { name, status: "not_applicable", detail }
    }
}

fn before(traj: &Trajectory, t_max: f64) -> Trajectory {
    let snapshots = traj.snapshots().iter().filter(|s| s.time() < t_max).cloned().collect();
    Trajectory { snapshots, ..traj.clone() }
}

fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn verify_trajectory(traj: &Trajectory, loaded: &LoadedConfig, prob: Option<&Problem>) -> Result<Vec<CheckEntry>, Failure> {
    let checks = &loaded.config.checks;
    let p = &traj.params;
    let total = p.w_total();
    let mut out = Vec::new();

    if checks.bounds {
        let b = check_bounds(traj, p);
        let pass = b.range_excess <= 1e-12 && b.worst_decrease <= traj.controls.tol_mono;
        out.push(CheckEntry::new("bounds", pass, value(&b)));
    }
    if checks.mass {
        let drift = check_mass_conservation(traj, p);
        let nodal = nodal_mass_drift(traj, p).ok();
        out.push(CheckEntry::new(
            "mass",
            drift <= checks.tol_mass,
            json!({"drift": drift, "nodal_trapezoid_drift": nodal, "tol": checks.tol_mass}),
        ));
    }
    let barrier = BarrierState::from_initial(traj.initial(), p)?;
    let early = before(traj, barrier.t_star);
    if checks.barrier {
        let b = check_linear_barrier(&early, p)?;
        let mut detail = value(&b);
        detail["snapshots_checked"] = json!(early.snapshots().len());
        out.push(CheckEntry::new("barrier", b.relative_violation <= checks.tol_barrier, detail));
    }
    if checks.concavity {
        match check_concavity(traj) {
            Ok(c) => out.push(CheckEntry::new("concavity", c.relative <= checks.tol_concavity, value(&c))),
            Err(Error::Precondition(msg)) => out.push(CheckEntry::skipped("concavity", json!({"reason": msg}))),
            Err(e) => return Err(e.into()),
        }
    }
    if checks.slope {
        match check_slope_bound(&early) {
            Ok(s) => {
                let worst = s
                    .samples
                    .iter()
                    .map(|x| (x.sup_ws - x.barrier) / x.barrier.max(1.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                let detail = json!({
                    "max_excess": s.max_excess,
                    "relative_excess": worst,
                    "attained_at_left": s.attained_at_left,
                    "snapshots_checked": s.samples.len(),
                });
                out.push(CheckEntry::new("slope", worst <= checks.tol_slope, detail));
            }
            Err(Error::Precondition(msg)) => out.push(CheckEntry::skipped("slope", json!({"reason": msg}))),
            Err(e) => return Err(e.into()),
        }
    }
    if checks.vr_bound {
        let v = check_signal_gradient_bound(traj, p)?;
        let pass = v.max_excess <= checks.tol_vr && v.boundary_value <= 1e-12 * total.max(1.0);
        out.push(CheckEntry::new("vr_bound", pass, value(&v)));
    }
    if checks.comparison {
        match per_step(traj, &early, prob)? {
            Some(lower) => {
                let coeffs = ComparisonCoefficients::regularized(p, traj.epsilon);
                let upper = barrier_trajectory(&lower)?;
                let rep = verify_comparison(&lower, &upper, &coeffs, checks.tol_comparison)?;
                out.push(CheckEntry::new("comparison", rep.status == ComparisonStatus::Ordered, value(&rep)));
            }
            None => out.push(CheckEntry::skipped(
                "comparison",
                json!({"reason": "residuals need one snapshot per step: unset snapshot_interval or give initial data"}),
            )),
        }
    }
    if checks.epsilon_monotonicity {
        match (prob, &loaded.config.grid.eps_list) {
            (Some(prob), Some(list)) => {
                let controls = continuation_controls(&loaded.config.controls);
                let ec = epsilon_continuation(&prob.params, &prob.w0_full, list, &controls)?;
                let margin = ec.min_margin();
                let pass = margin >= -checks.tol_eps * total;
                out.push(CheckEntry::new("epsilon_monotonicity", pass, json!({"min_margin": margin, "pairs": ec.pairs})));
            }
            _ => out.push(CheckEntry::skipped(
                "epsilon_monotonicity",
                json!({"reason": "needs grid.eps_list and initial data in the config"}),
            )),
        }
    }
    if checks.odi {
        match prob {
            Some(prob) => {
                let cert = certificate(prob, loaded)?;
                let odi = crate::blowup::odi_residual(traj, &cert, p)?;
                let pass = odi.min_residual >= -checks.tol_odi * odi.moments[0];
                let detail = json!({
                    "min_residual": odi.min_residual,
                    "y0": odi.moments[0],
                    "samples": odi.times.len(),
                    "s1": cert.s1,
                    "gamma": cert.gamma,
                });
                out.push(CheckEntry::new("odi", pass, detail));
            }
            None => out.push(CheckEntry::skipped("odi", json!({"reason": "needs initial data in the config"}))),
        }
    }
    Ok(out)
}

/// The part of the run before `t*` with one snapshot per accepted step, as
/// the comparison residuals are taken step by step. Thinned trajectories
/// are recomputed from the initial data when available.
fn per_step(traj: &Trajectory, early: &Trajectory, prob: Option<&Problem>) -> Result<Option<Trajectory>, Failure> {
    if traj.controls.snapshot_interval.is_none() {
        return Ok(Some(early.clone()));
    }
    let Some(prob) = prob else { return Ok(None) };
    let t_max = early.final_time();
    let controls = StepControls { snapshot_interval: None, t_end: t_max, ..traj.controls.clone() };
    let dense = simulate(&prob.params, &prob.w0, prob.epsilon, &controls)?;
    Ok(Some(dense))
}

/// Continuation runs compare snapshots at common times; without an
/// explicit interval twenty evenly spaced times are used.
fn continuation_controls(c: &StepControls) -> StepControls {
    let mut c = c.clone();
    if c.snapshot_interval.is_none() {
        c.snapshot_interval = Some(c.t_end / 20.0);
    }
    c
}

pub fn run_verify(config: &Path, out: Option<&Path>) -> Outcome {
    let loaded = load(config)?;
    let (traj, prob, report_dir) = match &loaded.config.trajectory {
        Some(rel) => {
            let dir = loaded.base.join(rel);
            let traj = read_trajectory(&dir).map_err(io_failure)?;
            let prob = build_problem(&loaded.config, &loaded.base).ok();
            (traj, prob, output_dir(&loaded, out).unwrap_or(dir))
        }
        None => {
            let dir = require_output_dir(&loaded, out)?;
            let prob = build_problem(&loaded.config, &loaded.base)?;
            let traj = simulate(&prob.params, &prob.w0, prob.epsilon, &loaded.config.controls)?;
            save_config(&dir, &loaded)?;
            write_trajectory(&dir, &traj).map_err(io_failure)?;
            (traj, Some(prob), dir)
        }
    };
    let entries = verify_trajectory(&traj, &loaded, prob.as_ref())?;
    let all_pass = entries.iter().all(|e| e.status != "fail");
    for e in &entries {
        println!("{:<22} {}", e.name, e.status);
    }
    let report = json!({
        "termination": traj.termination,
        "final_time": traj.final_time(),
        "passed": all_pass,
        "checks": entries,
    });
    fs::create_dir_all(&report_dir).map_err(|e| io_failure(e.into()))?;
    write_json(&report_dir.join("report.json"), &report).map_err(io_failure)?;
    Ok(if all_pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

pub fn run_sweep(config: &Path, out: Option<&Path>, workers: Option<usize>) -> Outcome {
    let loaded = load(config)?;
    let dir = require_output_dir(&loaded, out)?;
    let csv = run_cells(&loaded, workers)?;
    save_config(&dir, &loaded)?;
    fs::write(dir.join("sweep.csv"), csv).map_err(|e| io_failure(e.into()))?;
    println!("sweep written to {}", dir.join("sweep.csv").display());
    Ok(EXIT_OK)
}
