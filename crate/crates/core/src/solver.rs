//! Time integration of the ε-regularized problem
//! `w_t = n² s^θ w_ss + (nᵅ w − n^{α-1} μ (s − ε)) (w_s)ᵅ` on `[ε, Rⁿ]`
//! with `w(ε) = 0`, `w(Rⁿ) = m/ω_n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::model::{MassProfile, Params};

/// Graded nodes `s_i = ε + (Rⁿ − ε)(i/(N−1))^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    q: f64,
    epsilon: f64,
}

impl Grid {
    pub fn graded(p: &Params, n_nodes: usize, q: f64, epsilon: f64) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::GridTooCoarse { needed: 3, got: n_nodes });
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("grading exponent q = {q} must be at least 1")));
        }
        let top = p.s_max();
        if !(0.0..top).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside [0, R^n)")));
        }
        let last = (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes)
            .map(|i| epsilon + (top - epsilon) * (i as f64 / last).powf(q))
            .collect();
        nodes[n_nodes - 1] = top;
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(format!(
                "{n_nodes} nodes with q = {q} collapse in floating point"
            )));
        }
        Ok(Grid { nodes, q, epsilon })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn default_cfl() -> f64 {
    0.4
}
fn default_dt_init() -> f64 {
    1e-4
}
fn default_dt_min() -> f64 {
    1e-14
}
fn default_dt_max() -> f64 {
    1e-2
}
fn default_u_cap() -> f64 {
    1e8
}
fn default_t_end() -> f64 {
    1.0
}
fn default_tol_mono() -> f64 {
    1e-10
}
fn default_max_steps() -> usize {
    5_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepControls {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_u_cap")]
    pub u_cap: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Relative to `m/ω_n`: a node increment below `-tol_mono · m/ω_n`
    /// counts as lost monotonicity.
    #[serde(default = "default_tol_mono")]
    pub tol_mono: f64,
    /// Store snapshots at multiples of this interval (and at termination);
    /// `None` stores every accepted step.
    #[serde(default)]
    pub snapshot_interval: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for StepControls {
    fn default() -> Self {
        StepControls {
            cfl: default_cfl(),
            dt_init: default_dt_init(),
            dt_min: default_dt_min(),
            dt_max: default_dt_max(),
            u_cap: default_u_cap(),
            t_end: default_t_end(),
            tol_mono: default_tol_mono(),
            snapshot_interval: None,
            max_steps: default_max_steps(),
        }
    }
}

impl StepControls {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl = {} must lie in (0, 1]", self.cfl));
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init && self.dt_init <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min < dt_init <= dt_max (got {}, {}, {})",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.u_cap > 0.0) {
            return bad(format!("u_cap = {} must be positive", self.u_cap));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be finite and nonnegative", self.t_end));
        }
        if !(self.tol_mono >= 0.0) {
            return bad(format!("tol_mono = {} must be nonnegative", self.tol_mono));
        }
        if let Some(h) = self.snapshot_interval {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("snapshot_interval = {h} must be positive"));
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    HorizonReached,
    BlowupDeclared,
    StepCollapse,
    MonotonicityFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::HorizonReached => "horizon_reached",
            Termination::BlowupDeclared => "blowup_declared",
            Termination::StepCollapse => "step_collapse",
            Termination::MonotonicityFailure => "monotonicity_failure",
        }
    }
}

/// One accepted step: its end time and size, `n · sup w_s` after the step
/// and the most negative interior second difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    pub t: f64,
    pub dt: f64,
    pub sup_u: f64,
    pub min_second_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: Params,
    pub epsilon: f64,
    pub controls: StepControls,
    pub snapshots: Vec<MassProfile>,
    pub diagnostics: Vec<StepDiagnostic>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn snapshots(&self) -> &[MassProfile] {
        &self.snapshots
    }

    pub fn initial(&self) -> &MassProfile {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &MassProfile {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(MassProfile::time).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.last().time()
    }
}

/// `w₀ε(s) = w₀(Rⁿ (s − ε)/(Rⁿ − ε))`, realised exactly by moving every
/// node `σ ↦ ε + (Rⁿ − ε) σ / Rⁿ` and keeping its value.
pub fn rescale_initial(w0: &MassProfile, p: &Params, epsilon: f64) -> Result<MassProfile> {
    let top = p.s_max();
    if !(0.0..top).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} outside [0, R^n)")));
    }
    let s = w0.s();
    if s[0] != 0.0 || (s[s.len() - 1] - top).abs() > 1e-12 * top {
        return Err(Error::InvalidProfile("initial profile must span [0, R^n]".into()));
    }
    if epsilon == 0.0 {
        return Ok(w0.clone());
    }
    let mut nodes: Vec<f64> = s.iter().map(|&x| epsilon + (top - epsilon) * (x / top)).collect();
    let last = nodes.len() - 1;
    nodes[0] = epsilon;
    nodes[last] = top;
    MassProfile::new(nodes, w0.w().to_vec(), w0.time())
}

fn check_boundary(state: &MassProfile, p: &Params, epsilon: f64) -> Result<()> {
    let s = state.s();
    let top = p.s_max();
    if (s[0] - epsilon).abs() > 1e-12 * top || (s[s.len() - 1] - top).abs() > 1e-12 * top {
        return Err(Error::InvalidProfile(format!(
            "grid spans [{}, {}], expected [{epsilon}, {top}]",
            s[0],
            s[s.len() - 1]
        )));
    }
    if state.len() < 3 {
        return Err(Error::GridTooCoarse { needed: 3, got: state.len() });
    }
    Ok(())
}

/// `s^p` with the convention `0^p = 0` for the degenerate coefficient.
fn spow(s: f64, e: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        s.powf(e)
    }
}

/// `g^α`, clamping a negative slope to zero for non-integer α.
fn slope_power(g: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        g
    } else if alpha.fract() == 0.0 && alpha <= 16.0 {
        g.powi(alpha as i32)
    } else {
        g.max(0.0).powf(alpha)
    }
}

struct Transport {
    /// Explicit term `coef · (w_s^{up})ᵅ` at every node (zero on the boundary).
    term: Vec<f64>,
    /// Largest admissible explicit step, `min_i Δs_up / speed_i`.
    dt_limit: f64,
}

/// Upwinded transport: `coef = nᵅ w − n^{α−1} μ (s − ε)`; a positive
/// coefficient carries information from the right, so the forward
/// difference is used, otherwise the backward one.
fn transport(state: &MassProfile, p: &Params, epsilon: f64, tol_mono: f64) -> Result<Transport> {
    let (s, w) = (state.s(), state.w());
    let n = s.len();
    let nf = p.nf();
    let a = p.alpha;
    let na = nf.powf(a);
    let na1 = nf.powf(a - 1.0);
    let integer_alpha = a.fract() == 0.0;
    let floor = -tol_mono * p.w_total();
    let mut term = vec![0.0; n];
    let mut dt_limit = f64::INFINITY;
    for i in 1..n - 1 {
        let coef = na * w[i] - na1 * p.mu * (s[i] - epsilon);
        if coef == 0.0 {
            continue;
        }
        let (dw, h) = if coef > 0.0 {
            (w[i + 1] - w[i], s[i + 1] - s[i])
        } else {
            (w[i] - w[i - 1], s[i] - s[i - 1])
        };
        if !integer_alpha && dw < floor {
            let node = if coef > 0.0 { i } else { i - 1 };
            return Err(Error::Monotonicity { node, increment: dw });
        }
        let g = dw / h;
        term[i] = coef * slope_power(g, a);
        let speed = coef.abs() * a * if a == 1.0 { 1.0 } else { g.max(0.0).powf(a - 1.0) };
        if speed > 0.0 {
            dt_limit = dt_limit.min(h / speed);
        }
    }
    Ok(Transport { term, dt_limit })
}

/// Implicit solve of `(I − dt n² s^θ D²) w_new = rhs` with pinned end rows.
fn implicit_diffusion(s: &[f64], rhs: &[f64], p: &Params, dt: f64) -> Result<Vec<f64>> {
    let n = s.len();
    let nn = p.nf() * p.nf();
    let theta = p.diffusion_exponent();
    let mut lower = vec![0.0; n];
    let mut diag = vec![1.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let hl = s[i] - s[i - 1];
        let hr = s[i + 1] - s[i];
        let k = dt * nn * spow(s[i], theta) * 2.0 / (hl + hr);
        lower[i] = -k / hl;
        upper[i] = -k / hr;
        diag[i] = 1.0 + k / hl + k / hr;
    }
    fd::solve_tridiagonal(&lower, &diag, &upper, rhs)
}

/// Implicit diffusion step only, with the transport terms switched off.
pub fn diffusion_step(state: &MassProfile, p: &Params, epsilon: f64, dt: f64) -> Result<MassProfile> {
    check_boundary(state, p, epsilon)?;
    check_dt(dt)?;
    let w = implicit_diffusion(state.s(), state.w(), p, dt)?;
    finish_step(state, w, dt)
}

/// One IMEX step: implicit diffusion, explicit upwinded transport.
pub fn step(state: &MassProfile, p: &Params, epsilon: f64, dt: f64) -> Result<MassProfile> {
    step_with_tolerance(state, p, epsilon, dt, default_tol_mono())
}

fn step_with_tolerance(
    state: &MassProfile,
    p: &Params,
    epsilon: f64,
    dt: f64,
    tol_mono: f64,
) -> Result<MassProfile> {
    check_boundary(state, p, epsilon)?;
    check_dt(dt)?;
    let tr = transport(state, p, epsilon, tol_mono)?;
    let rhs: Vec<f64> = state.w().iter().zip(&tr.term).map(|(w, t)| w + dt * t).collect();
    let w = implicit_diffusion(state.s(), &rhs, p, dt)?;
    finish_step(state, w, dt)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step {dt} must be positive")));
    }
    Ok(())
}

fn finish_step(state: &MassProfile, mut w: Vec<f64>, dt: f64) -> Result<MassProfile> {
    let last = w.len() - 1;
    w[0] = state.w()[0];
    w[last] = state.w()[last];
    if let Some(i) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::SingularSystem { row: i });
    }
    Ok(MassProfile::from_parts(state.s().to_vec(), w, state.time() + dt))
}

/// Step acceptance: bounds `0 ≤ w ≤ m/ω_n` with slack `1e-12 · m/ω_n` and
/// nondecreasing values within `tol_mono · m/ω_n`.
fn admissible(w: &[f64], total: f64, tol_mono: f64) -> std::result::Result<(), Error> {
    let slack = 1e-12 * total;
    if let Some(i) = w.iter().position(|&v| v < -slack || v > total + slack) {
        return Err(Error::Precondition(format!("value {} at node {i} leaves [0, m/omega_n]", w[i])));
    }
    let floor = -tol_mono * total;
    if let Some(i) = w.windows(2).position(|p| p[1] - p[0] < floor) {
        return Err(Error::Monotonicity { node: i, increment: w[i + 1] - w[i] });
    }
    Ok(())
}

fn validate_initial(w0: &MassProfile, p: &Params, epsilon: f64, tol_mono: f64) -> Result<()> {
    check_boundary(w0, p, epsilon)?;
    let total = p.w_total();
    let w = w0.w();
    if w[0].abs() > 1e-10 * total || (w[w.len() - 1] - total).abs() > 1e-10 * total {
        return Err(Error::InvalidProfile(format!(
            "boundary values ({}, {}) differ from (0, m/omega_n = {total})",
            w[0],
            w[w.len() - 1]
        )));
    }
    admissible(w, total, tol_mono).map_err(|e| Error::InvalidProfile(e.to_string()))
}

fn sup_density(state: &MassProfile, p: &Params) -> f64 {
    p.nf() * state.max_slope()
}

fn min_second_difference(state: &MassProfile) -> f64 {
    state.second_differences().into_iter().fold(f64::INFINITY, f64::min)
}

/// Adaptive IMEX integration up to `controls.t_end`, stopping early on
/// numerical blow-up (`n · sup w_s ≥ u_cap`) or step-size collapse.
pub fn simulate(p: &Params, w0: &MassProfile, epsilon: f64, controls: &StepControls) -> Result<Trajectory> {
    controls.validate()?;
    validate_initial(w0, p, epsilon, controls.tol_mono)?;
    let total = p.w_total();
    let mut values = w0.w().to_vec();
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = total;
    let mut state = MassProfile::from_parts(w0.s().to_vec(), values, 0.0);

    let mut snapshots = vec![state.clone()];
    let mut diagnostics = Vec::new();
    let mut dt_prev = controls.dt_init / 2.0;
    let mut snap_index: u64 = 1;
    let next_snapshot = |k: u64| match controls.snapshot_interval {
        Some(h) => (k as f64 * h).min(controls.t_end),
        None => controls.t_end,
    };
    let mut t = 0.0;
    let mut steps = 0usize;

    let termination = loop {
        if t >= controls.t_end {
            break Termination::HorizonReached;
        }
        if sup_density(&state, p) >= controls.u_cap {
            break Termination::BlowupDeclared;
        }
        if steps >= controls.max_steps {
            return Err(Error::StepLimit(controls.max_steps));
        }
        let target = next_snapshot(snap_index);
        let tr = match transport(&state, p, epsilon, controls.tol_mono) {
            Ok(tr) => tr,
            Err(Error::Monotonicity { .. }) => break Termination::MonotonicityFailure,
            Err(e) => return Err(e),
        };
        let mut dt = (2.0 * dt_prev).min(controls.cfl * tr.dt_limit).min(controls.dt_max);
        if dt < controls.dt_min {
            break Termination::StepCollapse;
        }
        let remaining = target - t;
        let mut clipped = false;
        if remaining <= dt {
            dt = remaining;
            clipped = true;
        } else if remaining < 1.5 * dt {
            dt = remaining / 2.0;
        }

        let mut failure = None;
        let accepted = loop {
            let attempt = step_with_tolerance(&state, p, epsilon, dt, controls.tol_mono)
                .and_then(|next| admissible(next.w(), total, controls.tol_mono).map(|_| next));
            match attempt {
                Ok(next) => break Some(next),
                Err(e) => {
                    failure = Some(e);
                    dt /= 2.0;
                    clipped = false;
                    if dt < controls.dt_min {
                        break None;
                    }
                }
            }
        };
        let Some(next) = accepted else {
            break match failure {
                Some(Error::Monotonicity { .. }) => Termination::MonotonicityFailure,
                _ => Termination::StepCollapse,
            };
        };

        t = if clipped { target } else { t + dt };
        if !clipped {
            dt_prev = dt;
        }
        steps += 1;
        state = next.with_time(t);
        let sup_u = sup_density(&state, p);
        diagnostics.push(StepDiagnostic { t, dt, sup_u, min_second_diff: min_second_difference(&state) });
        if clipped || controls.snapshot_interval.is_none() {
            snapshots.push(state.clone());
            if clipped {
                snap_index += 1;
            }
        }
    };

    if snapshots.last().map(MassProfile::time) != Some(state.time()) {
        snapshots.push(state);
    }
    Ok(Trajectory {
        params: *p,
        epsilon,
        controls: controls.clone(),
        snapshots,
        diagnostics,
        termination,
    })
}

/// Ordering check between consecutive members of an ε-continuation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonPair {
    pub eps_larger: f64,
    pub eps_smaller: f64,
    /// Minimum of `w_smaller − w_larger` over all probes and common times.
    pub min_margin: f64,
    /// Maximum of `|w_smaller − w_larger|` over the same probes.
    pub sup_distance: f64,
    pub times_compared: usize,
}

#[derive(Debug, Clone)]
pub struct EpsilonContinuation {
    pub trajectories: Vec<Trajectory>,
    pub pairs: Vec<EpsilonPair>,
}

impl EpsilonContinuation {
    /// Smallest ordering margin over all pairs; `+∞` for a single member.
    pub fn min_margin(&self) -> f64 {
        self.pairs.iter().map(|p| p.min_margin).fold(f64::INFINITY, f64::min)
    }
}

/// Runs the regularized problem for each ε (in parallel) from the rescaled
/// initial data and compares consecutive members. Probes are the nodes of
/// the smaller-ε run lying in `[ε_larger, Rⁿ]`; the larger-ε run is
/// interpolated there, which for concave profiles errs on the low side.
pub fn epsilon_continuation(
    p: &Params,
    w0: &MassProfile,
    eps_list: &[f64],
    controls: &StepControls,
) -> Result<EpsilonContinuation> {
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter("eps_list is empty".into()));
    }
    if eps_list.windows(2).any(|e| !(e[1] < e[0])) {
        return Err(Error::InvalidParameter("eps_list must be strictly decreasing".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e < p.s_max())) {
        return Err(Error::InvalidParameter("every epsilon must lie in (0, R^n)".into()));
    }
    if controls.snapshot_interval.is_none() && eps_list.len() > 1 {
        return Err(Error::Precondition(
            "epsilon continuation needs a snapshot_interval for common comparison times".into(),
        ));
    }
    let trajectories = eps_list
        .par_iter()
        .map(|&eps| {
            let start = rescale_initial(w0, p, eps)?;
            simulate(p, &start, eps, controls)
        })
        .collect::<Result<Vec<_>>>()?;

    let first_time = controls.snapshot_interval.map_or(controls.t_end, |h| h.min(controls.t_end));
    if controls.t_end > 0.0 {
        if let Some(k) = trajectories.iter().position(|tr| tr.final_time() < first_time) {
            return Err(Error::Precondition(format!(
                "run with epsilon = {} ended ({}) before the first comparison time {first_time}",
                eps_list[k],
                tr_termination(&trajectories[k])
            )));
        }
    }

    let pairs = trajectories
        .windows(2)
        .map(|pair| compare_members(&pair[0], &pair[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpsilonContinuation { trajectories, pairs })
}

fn tr_termination(tr: &Trajectory) -> &'static str {
    tr.termination.as_str()
}

fn compare_members(larger: &Trajectory, smaller: &Trajectory) -> Result<EpsilonPair> {
    let mut min_margin = f64::INFINITY;
    let mut sup_distance: f64 = 0.0;
    let mut times_compared = 0;
    let mut j = 0;
    for a in larger.snapshots() {
        while j < smaller.snapshots.len() && smaller.snapshots[j].time() < a.time() {
            j += 1;
        }
        let Some(b) = smaller.snapshots.get(j) else { break };
        if b.time() != a.time() {
            continue;
        }
        times_compared += 1;
        for (&s, &wb) in b.s().iter().zip(b.w()) {
            if s < larger.epsilon {
                continue;
            }
            let wa = a.eval(s)?;
            min_margin = min_margin.min(wb - wa);
            sup_distance = sup_distance.max((wb - wa).abs());
        }
    }
    Ok(EpsilonPair {
        eps_larger: larger.epsilon,
        eps_smaller: smaller.epsilon,
        min_margin,
        sup_distance,
        times_compared,
    })
}
