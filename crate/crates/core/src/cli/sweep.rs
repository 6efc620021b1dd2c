//! Parameter sweeps: the Cartesian product of axis values, one independent
//! simulation per cell, merged in cell order.

use rayon::prelude::*;
use serde_json::Value;

use super::commands::{Failure, EXIT_CONFIG};
use super::config::{build_problem, from_value, set_pointer, LoadedConfig, Problem};
use crate::blowup::BlowupCertificate;
use crate::error::Error;
use crate::solver::{simulate, Termination};

pub const MAX_CELLS: usize = 10_000;

/// Relative distance to the linear steady state below which a finished run
/// counts as steady-like.
pub const STEADY_TOL: f64 = 1e-3;

struct Cell {
    values: Vec<Value>,
    loaded: LoadedConfig,
    problem: Problem,
}

struct Row {
    outcome: &'static str,
    final_time: f64,
    blowup_time: Option<f64>,
    sup_u_initial: f64,
    sup_u_final: f64,
    cert: Option<BlowupCertificate>,
}

fn config_failure(msg: String) -> Failure {
    Failure { code: EXIT_CONFIG, message: msg }
}

fn expand(loaded: &LoadedConfig) -> Result<Vec<Cell>, Failure> {
    let axes = match &loaded.config.sweep {
        Some(s) if !s.axes.is_empty() => s.axes.clone(),
        _ => return Err(config_failure("sweep needs a sweep.axes list".into())),
    };
    let mut count: usize = 1;
    for a in &axes {
        if a.values.is_empty() {
            return Err(config_failure(format!("sweep axis {} has no values", a.key)));
        }
        count = count.saturating_mul(a.values.len());
    }
    if count > MAX_CELLS {
        return Err(config_failure(format!("sweep has {count} cells, more than {MAX_CELLS}")));
    }
    let mut base = loaded.raw.clone();
    if let Value::Object(map) = &mut base {
        map.remove("sweep");
    }
    let mut cells = Vec::with_capacity(count);
    for index in 0..count {
        // Last axis varies fastest.
        let mut rest = index;
        let mut picks = vec![Value::Null; axes.len()];
        for (k, a) in axes.iter().enumerate().rev() {
            picks[k] = a.values[rest % a.values.len()].clone();
            rest /= a.values.len();
        }
        let mut doc = base.clone();
        for (a, v) in axes.iter().zip(&picks) {
            set_pointer(&mut doc, &a.key, v.clone())?;
        }
        let cell_loaded = from_value(doc, loaded.base.clone())
            .map_err(|e| config_failure(format!("sweep cell {index}: {e}")))?;
        let problem = build_problem(&cell_loaded.config, &cell_loaded.base)
            .map_err(|e| config_failure(format!("sweep cell {index}: {e}")))?;
        cells.push(Cell { values: picks, loaded: cell_loaded, problem });
    }
    Ok(cells)
}

fn run_cell(cell: &Cell) -> Result<Row, Error> {
    let prob = &cell.problem;
    let p = &prob.params;
    let controls = &cell.loaded.config.controls;
    let traj = simulate(p, &prob.w0, prob.epsilon, controls)?;
    let cert = prob
        .blowup_inputs(cell.loaded.config.blowup.as_ref())
        .and_then(|(m0, c4, gamma)| BlowupCertificate::new(p, m0, c4, gamma))
        .and_then(|c| c.with_initial(&prob.w0_full, p))
        .ok();
    let sup_u_initial = p.nf() * traj.initial().max_slope();
    let last = traj.last();
    let sup_u_final = p.nf() * last.max_slope();
    let outcome = match traj.termination {
        Termination::HorizonReached => {
            let dist = last
                .s()
                .iter()
                .zip(last.w())
                .map(|(s, w)| (w - p.steady_profile(*s)).abs())
                .fold(0.0, f64::max);
            if dist <= STEADY_TOL * p.w_total() {
                "steady_like"
            } else if sup_u_final <= sup_u_initial {
                "decayed"
            } else {
                "growing"
            }
        }
        t => t.as_str(),
    };
    let blowup_time = match traj.termination {
        Termination::BlowupDeclared | Termination::StepCollapse => Some(traj.final_time()),
        _ => None,
    };
    Ok(Row { outcome, final_time: traj.final_time(), blowup_time, sup_u_initial, sup_u_final, cert })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn axis_value(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs every cell on a pool of `workers` threads (default: rayon's choice)
/// and returns the CSV text.
pub fn run_cells(loaded: &LoadedConfig, workers: Option<usize>) -> Result<String, Failure> {
    let cells = expand(loaded)?;
    let axes = loaded.config.sweep.as_ref().map(|s| s.axes.clone()).unwrap_or_default();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = workers {
        builder = builder.num_threads(k.max(1));
    }
    let pool = builder.build().map_err(|e| config_failure(format!("worker pool: {e}")))?;
    let rows: Vec<Result<Row, Error>> = pool.install(|| cells.par_iter().map(run_cell).collect());

    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    header.extend(
        [
            "outcome",
            "final_time",
            "blowup_time",
            "sup_u_initial",
            "sup_u_final",
            "s0",
            "concentration_met",
            "predicate",
            "riccati_T",
            "error",
        ]
        .map(String::from),
    );
    let io = |e: csv::Error| Failure { code: super::commands::EXIT_IO, message: e.to_string() };
    wtr.write_record(&header).map_err(io)?;
    for (index, (cell, row)) in cells.iter().zip(rows).enumerate() {
        let mut rec: Vec<String> = vec![index.to_string()];
        rec.extend(cell.values.iter().map(axis_value));
        match row {
            Ok(r) => {
                let c = r.cert.as_ref();
                rec.extend([
                    r.outcome.to_string(),
                    num(r.final_time),
                    opt(r.blowup_time),
                    num(r.sup_u_initial),
                    num(r.sup_u_final),
                    opt(c.map(|c| c.s0)),
                    c.and_then(|c| c.concentration_met).map(|b| b.to_string()).unwrap_or_default(),
                    opt(c.and_then(|c| c.predicate_at_initial)),
                    c.map(|c| c.riccati_t.map(num).unwrap_or_else(|| "inf".into())).unwrap_or_default(),
                    String::new(),
                ]);
            }
            Err(e) => {
                rec.push("error".into());
                rec.extend(std::iter::repeat_n(String::new(), 8));
                rec.push(e.to_string());
            }
        }
        wtr.write_record(&rec).map_err(io)?;
    }
    let bytes = wtr.into_inner().map_err(|e| config_failure(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
