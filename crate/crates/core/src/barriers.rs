//! Linear barrier `y(t)·s` from `y' = nᵅ y^{α+1}`, concavity and slope
//! checks, and a discrete sub/supersolution comparison checker.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fd;
use crate::model::{MassProfile, Params};
use crate::solver::Trajectory;

/// `t* = 1 / (α nᵅ y₀ᵅ)`.
pub fn barrier_blowup_time(y0: f64, n: u32, alpha: f64) -> Result<f64> {
    if !(y0 > 0.0 && y0.is_finite()) {
        return Err(Error::InvalidParameter(format!("barrier slope y0 = {y0} must be positive")));
    }
    Ok(1.0 / (alpha * f64::from(n).powf(alpha) * y0.powf(alpha)))
}

/// `y(t) = y₀ (1 − α nᵅ y₀ᵅ t)^{−1/α}` for `0 ≤ t < t*`.
pub fn barrier_ode_solution(y0: f64, n: u32, alpha: f64, t: f64) -> Result<f64> {
    let t_star = barrier_blowup_time(y0, n, alpha)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time {t} must be nonnegative")));
    }
    if t >= t_star {
        return Err(Error::BeyondBlowupTime { t, t_star });
    }
    Ok(y0 * (1.0 - t / t_star).powf(-1.0 / alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierState {
    pub y0: f64,
    pub n: u32,
    pub alpha: f64,
    pub t_star: f64,
}

impl BarrierState {
    pub fn new(y0: f64, n: u32, alpha: f64) -> Result<Self> {
        let t_star = barrier_blowup_time(y0, n, alpha)?;
        Ok(BarrierState { y0, n, alpha, t_star })
    }

    /// `y₀` is the largest cell slope of `w₀`, so `w₀(s) − w₀(s₀) ≤ y₀ (s − s₀)` holds exactly.
    pub fn from_initial(w0: &MassProfile, p: &Params) -> Result<Self> {
        BarrierState::new(w0.max_slope(), p.n, p.alpha)
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        barrier_ode_solution(self.y0, self.n, self.alpha, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierCheck {
    pub y0: f64,
    pub t_star: f64,
    /// `max (w(s,t) − y(t) s)` over snapshots and nodes.
    pub max_violation: f64,
    /// `max_violation / (m/ω_n)`.
    pub relative_violation: f64,
}

/// Checks `w(s,t) ≤ y(t) s` with `y₀` taken from the trajectory's own
/// initial profile.
pub fn check_linear_barrier(traj: &Trajectory, p: &Params) -> Result<BarrierCheck> {
    let barrier = BarrierState::from_initial(traj.initial(), p)?;
    let mut max_violation = f64::NEG_INFINITY;
    for snap in traj.snapshots() {
        let y = barrier.at(snap.time())?;
        for (s, w) in snap.s().iter().zip(snap.w()) {
            max_violation = max_violation.max(w - y * s);
        }
    }
    Ok(BarrierCheck {
        y0: barrier.y0,
        t_star: barrier.t_star,
        max_violation,
        relative_violation: max_violation / p.w_total(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcavityCheck {
    /// Largest positive interior second difference over all snapshots (0 if none).
    pub max_positive_second_diff: f64,
    /// Largest relative slope increase `(d_right − d_left) / max(|d_left|, |d_right|, μ/n)`
    /// across an interior node (0 if none).
    pub relative: f64,
    pub time_of_max: f64,
}

/// Relative slack on the initial slope increases before the concavity
/// hypothesis counts as failed.
pub const CONCAVITY_HYPOTHESIS_TOL: f64 = 1e-8;

/// Largest raw and relative positive curvature of one profile. The
/// relative measure compares each slope jump with the adjacent slopes (or
/// the mean slope `μ/n` where the profile is flat), so round-off on fine
/// cells near the origin does not masquerade as convexity.
fn positive_curvature(w: &MassProfile, mean_slope: f64) -> (f64, f64) {
    let (s, v) = (w.s(), w.w());
    let slopes = w.cell_slopes();
    let mut raw: f64 = 0.0;
    let mut rel: f64 = 0.0;
    for i in 1..s.len() - 1 {
        let (dl, dr) = (slopes[i - 1], slopes[i]);
        if dr > dl {
            raw = raw.max(fd::second_difference_at(s, v, i));
            rel = rel.max((dr - dl) / dl.abs().max(dr.abs()).max(mean_slope));
        }
    }
    (raw, rel)
}

fn mean_slope(traj: &Trajectory) -> f64 {
    traj.params.mu / traj.params.nf()
}

fn require_concave_start(traj: &Trajectory) -> Result<()> {
    let (raw, rel) = positive_curvature(traj.initial(), mean_slope(traj));
    if rel > CONCAVITY_HYPOTHESIS_TOL {
        return Err(Error::Precondition(format!(
            "initial profile is not concave (second difference {raw:e}, relative slope increase {rel:e})"
        )));
    }
    Ok(())
}

pub fn check_concavity(traj: &Trajectory) -> Result<ConcavityCheck> {
    require_concave_start(traj)?;
    let mut out = ConcavityCheck { max_positive_second_diff: 0.0, relative: 0.0, time_of_max: 0.0 };
    for snap in traj.snapshots() {
        let (raw, rel) = positive_curvature(snap, mean_slope(traj));
        out.max_positive_second_diff = out.max_positive_second_diff.max(raw);
        if rel > out.relative {
            out.relative = rel;
            out.time_of_max = snap.time();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeSample {
    pub t: f64,
    pub sup_ws: f64,
    /// Cell where the largest slope sits (0 = left-most cell).
    pub argmax_cell: usize,
    pub barrier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeBoundCheck {
    pub samples: Vec<SlopeSample>,
    /// `max (sup w_s − y(t))`; nonpositive when the bound holds.
    pub max_excess: f64,
    /// Whether the largest slope always sat in the left-most cell.
    pub attained_at_left: bool,
}

/// Per-snapshot `sup w_s`, compared with the barrier slope `y(t)`.
pub fn check_slope_bound(traj: &Trajectory) -> Result<SlopeBoundCheck> {
    require_concave_start(traj)?;
    let barrier = BarrierState::from_initial(traj.initial(), &traj.params)?;
    let mut samples = Vec::with_capacity(traj.snapshots().len());
    for snap in traj.snapshots() {
        let slopes = snap.cell_slopes();
        let (argmax_cell, sup_ws) = slopes
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
        samples.push(SlopeSample { t: snap.time(), sup_ws, argmax_cell, barrier: barrier.at(snap.time())? });
    }
    let max_excess = samples.iter().map(|s| s.sup_ws - s.barrier).fold(f64::NEG_INFINITY, f64::max);
    let attained_at_left = samples.iter().all(|s| s.argmax_cell == 0);
    Ok(SlopeBoundCheck { samples, max_excess, attained_at_left })
}

/// Coefficients of `w_t ≤ a s^θ w_ss + b s^γ w w_sᵅ + c s^δ w_sᵅ + d w_sᵅ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ComparisonCoefficients {
    pub a: f64,
    pub theta: f64,
    pub b: f64,
    pub gamma: f64,
    pub c: f64,
    pub delta: f64,
    pub d: f64,
    pub alpha: f64,
}

impl ComparisonCoefficients {
    /// The operator of the regularized problem on `[ε, Rⁿ]`.
    pub fn regularized(p: &Params, epsilon: f64) -> Self {
        let nf = p.nf();
        let na1 = nf.powf(p.alpha - 1.0);
        ComparisonCoefficients {
            a: nf * nf,
            theta: p.diffusion_exponent(),
            b: nf.powf(p.alpha),
            gamma: 0.0,
            c: -na1 * p.mu,
            delta: 1.0,
            d: na1 * p.mu * epsilon,
            alpha: p.alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonStatus {
    /// Hypotheses and residual signs hold and the ordering holds within tolerance.
    Ordered,
    /// Hypotheses hold but the ordering does not.
    OrderViolated,
    /// Some hypothesis failed; the ordering is reported, not asserted.
    HypothesisFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypotheses {
    pub initial_ordering: bool,
    pub boundary_ordering: bool,
    pub slope_bounded: bool,
    pub lower_is_subsolution: bool,
    pub upper_is_supersolution: bool,
}

impl Hypotheses {
    fn failed(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.initial_ordering {
            out.push("initial_ordering");
        }
        if !self.boundary_ordering {
            out.push("boundary_ordering");
        }
        if !self.slope_bounded {
            out.push("slope_bounded");
        }
        if !self.lower_is_subsolution {
            out.push("lower_is_subsolution");
        }
        if !self.upper_is_supersolution {
            out.push("upper_is_supersolution");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `sup (lower − upper)` over the probe lattice.
    pub max_order_violation: f64,
    /// `inf (lower − upper)` over the probe lattice.
    pub min_order_difference: f64,
    /// Worst (largest) relative residual of the lower input; `≤ tol` for a subsolution.
    pub residual_lower: f64,
    /// Worst (smallest) relative residual of the upper input; `≥ −tol` for a supersolution.
    pub residual_upper: f64,
    pub coefficients: ComparisonCoefficients,
    pub hypotheses: Hypotheses,
    pub failed_hypotheses: Vec<&'static str>,
    pub status: ComparisonStatus,
    pub probe_nodes: usize,
    pub probe_times: usize,
    pub tol: f64,
}

/// Discrete residual of one input against the comparison operator, taken
/// between consecutive snapshots in the IMEX form of the solver: implicit
/// second difference, upwinded explicit first difference. Returns the
/// extreme residuals relative to the largest term magnitude.
fn residual_extremes(traj: &Trajectory, k: &ComparisonCoefficients, t_last: f64) -> (f64, f64) {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut scale: f64 = 0.0;
    let snaps = traj.snapshots();
    for pair in snaps.windows(2) {
        let (old, new) = (&pair[0], &pair[1]);
        if new.time() > t_last || old.s() != new.s() {
            break;
        }
        let dt = new.time() - old.time();
        let s = new.s();
        let (wo, wn) = (old.w(), new.w());
        for i in 1..s.len() - 1 {
            let diffusion = k.a * power(s[i], k.theta) * fd::second_difference_at(s, wn, i);
            let coef = k.b * power(s[i], k.gamma) * wo[i] + k.c * power(s[i], k.delta) + k.d;
            let g = if coef > 0.0 {
                (wo[i + 1] - wo[i]) / (s[i + 1] - s[i])
            } else {
                (wo[i] - wo[i - 1]) / (s[i] - s[i - 1])
            };
            let transport = coef * g.max(0.0).powf(k.alpha);
            let rate = (wn[i] - wo[i]) / dt;
            let r = rate - diffusion - transport;
            scale = scale.max(rate.abs()).max(diffusion.abs()).max(transport.abs());
            hi = hi.max(r);
            lo = lo.min(r);
        }
    }
    if !hi.is_finite() {
        return (0.0, 0.0);
    }
    let scale = if scale > 0.0 { scale } else { 1.0 };
    (hi / scale, lo / scale)
}

fn power(s: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if s <= 0.0 {
        0.0
    } else {
        s.powf(e)
    }
}

/// Checks the hypotheses and conclusion of the comparison principle on a
/// probe lattice: the nodes of the input with fewer nodes, at the
/// snapshot times both inputs share. `tol` is relative to `m/ω_n` for
/// orderings and to the largest operator term for residuals.
pub fn verify_comparison(
    lower: &Trajectory,
    upper: &Trajectory,
    coeffs: &ComparisonCoefficients,
    tol: f64,
) -> Result<ComparisonReport> {
    let total = lower.params.w_total();
    let common: Vec<(usize, usize)> = {
        let mut out = Vec::new();
        let mut j = 0;
        for (i, a) in lower.snapshots().iter().enumerate() {
            while j < upper.snapshots().len() && upper.snapshots()[j].time() < a.time() {
                j += 1;
            }
            if j < upper.snapshots().len() && upper.snapshots()[j].time() == a.time() {
                out.push((i, j));
            }
        }
        out
    };
    if common.is_empty() {
        return Err(Error::IncompatibleLattice("no common snapshot times".into()));
    }
    let lower_nodes = lower.initial().len();
    let upper_nodes = upper.initial().len();
    let probe_from_lower = lower_nodes <= upper_nodes;

    let mut max_diff = f64::NEG_INFINITY;
    let mut min_diff = f64::INFINITY;
    let mut initial_ordering = true;
    let mut boundary_ordering = true;
    let mut probe_nodes = 0;
    let slack = tol * total;
    for (ci, &(i, j)) in common.iter().enumerate() {
        let (a, b) = (&lower.snapshots()[i], &upper.snapshots()[j]);
        let probes = if probe_from_lower { a.s() } else { b.s() };
        probe_nodes = probes.len();
        let last = probes.len() - 1;
        for (k, &s) in probes.iter().enumerate() {
            let lv = a.eval(s).map_err(|_| lattice_error(s))?;
            let uv = b.eval(s).map_err(|_| lattice_error(s))?;
            let diff = lv - uv;
            max_diff = max_diff.max(diff);
            min_diff = min_diff.min(diff);
            if diff > slack {
                if ci == 0 && a.time() == 0.0 {
                    initial_ordering = false;
                }
                if k == 0 || k == last {
                    boundary_ordering = false;
                }
            }
        }
    }

    let t_last = lower.snapshots()[common[common.len() - 1].0].time();
    let (residual_lower, _) = residual_extremes(lower, coeffs, t_last);
    let (_, residual_upper) = residual_extremes(upper, coeffs, t_last);
    let slope_bounded = [lower, upper]
        .iter()
        .any(|tr| tr.snapshots().iter().all(|sn| sn.max_slope().is_finite()));
    let hypotheses = Hypotheses {
        initial_ordering,
        boundary_ordering,
        slope_bounded,
        lower_is_subsolution: residual_lower <= tol,
        upper_is_supersolution: residual_upper >= -tol,
    };
    let failed_hypotheses = hypotheses.failed();
    let status = if !failed_hypotheses.is_empty() {
        ComparisonStatus::HypothesisFailed
    } else if max_diff <= slack {
        ComparisonStatus::Ordered
    } else {
        ComparisonStatus::OrderViolated
    };
    Ok(ComparisonReport {
        max_order_violation: max_diff,
        min_order_difference: min_diff,
        residual_lower,
        residual_upper,
        coefficients: *coeffs,
        hypotheses,
        failed_hypotheses,
        status,
        probe_nodes,
        probe_times: common.len(),
        tol,
    })
}

fn lattice_error(s: f64) -> Error {
    Error::IncompatibleLattice(format!("probe s = {s} lies outside one of the grids"))
}

/// The barrier `y(t)·s` sampled on the nodes and snapshot times of `traj`.
pub fn barrier_trajectory(traj: &Trajectory) -> Result<Trajectory> {
    let barrier = BarrierState::from_initial(traj.initial(), &traj.params)?;
    let snapshots = traj
        .snapshots()
        .iter()
        .map(|snap| {
            let y = barrier.at(snap.time())?;
            let w = snap.s().iter().map(|s| y * s).collect();
            MassProfile::new(snap.s().to_vec(), w, snap.time())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { snapshots, diagnostics: Vec::new(), ..traj.clone() })
}

/// `traj` with a constant added to every value (used to break boundary ordering).
pub fn shifted_trajectory(traj: &Trajectory, shift: f64) -> Result<Trajectory> {
    let snapshots = traj
        .snapshots()
        .iter()
        .map(|snap| snap.with_values(snap.w().iter().map(|w| w + shift).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { snapshots, ..traj.clone() })
}
