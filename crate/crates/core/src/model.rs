//! Problem data and the exact transforms between the radial density `u`,
//! the mass-accumulation function `w(s) = ∫₀^{s^{1/n}} ρ^{n-1} u dρ` and the
//! signal gradient `v_r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::solver::Trajectory;

/// Surface area of the unit sphere in `R^n`, `2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: u32) -> f64 {
    let half = f64::from(n) / 2.0;
    // Γ(n/2) by the recurrence Γ(x + 1) = x Γ(x), from Γ(1) = 1 or Γ(1/2) = √π.
    let (mut gamma, mut x) = if n.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    while x < half {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(half) / gamma
}

/// Problem parameters. Construct with [`Params::new`] or [`build_params`];
/// deserialization re-derives `omega_n` and `mu` and rejects mismatches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRecord")]
pub struct Params {
    pub n: u32,
    #[serde(rename = "R")]
    pub radius: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "m")]
    pub mass: f64,
    pub omega_n: f64,
    pub mu: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsRecord {
    n: u32,
    #[serde(rename = "R")]
    radius: f64,
    beta: f64,
    alpha: f64,
    m: f64,
    omega_n: Option<f64>,
    mu: Option<f64>,
}

impl TryFrom<ParamsRecord> for Params {
    type Error = Error;

    fn try_from(rec: ParamsRecord) -> Result<Self> {
        let p = Params::new(rec.n, rec.radius, rec.beta, rec.alpha, rec.m)?;
        for (name, given, derived) in [("omega_n", rec.omega_n, p.omega_n), ("mu", rec.mu, p.mu)] {
            if let Some(v) = given {
                if (v - derived).abs() > 1e-12 * derived.abs() {
                    return Err(Error::InvalidParameter(format!(
                        "{name} = {v} disagrees with the derived value {derived}"
                    )));
                }
            }
        }
        Ok(p)
    }
}

impl Params {
    pub fn new(n: u32, radius: f64, beta: f64, alpha: f64, mass: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("dimension n = {n} must be at least 2")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius R = {radius} must be positive")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
        }
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must be at least 1")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("total mass m = {mass} must be positive")));
        }
        let omega_n = unit_sphere_area(n);
        let mu = f64::from(n) * mass / (omega_n * radius.powi(n as i32));
        Ok(Params { n, radius, beta, alpha, mass, omega_n, mu })
    }

    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    /// `R^n`, the right end of the volume coordinate.
    pub fn s_max(&self) -> f64 {
        self.radius.powi(self.n as i32)
    }

    /// Boundary value `w(R^n) = m / ω_n`.
    pub fn w_total(&self) -> f64 {
        self.mass / self.omega_n
    }

    /// Exponent of the degenerate diffusion coefficient `n² s^θ`.
    pub fn diffusion_exponent(&self) -> f64 {
        (2.0 * self.nf() - 2.0 + self.beta) / self.nf()
    }

    /// Linear steady state `μ s / n` of the unregularized problem.
    pub fn steady_profile(&self, s: f64) -> f64 {
        self.mu * s / self.nf()
    }
}

/// Radial density samples `u(r_i)` with `0 < r_0 < … < r_last = R`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    r: Vec<f64>,
    u: Vec<f64>,
}

impl RadialProfile {
    pub fn new(r: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if r.is_empty() || r.len() != u.len() {
            return Err(Error::InvalidProfile(format!(
                "radial profile needs matching non-empty columns (got {} radii, {} values)",
                r.len(),
                u.len()
            )));
        }
        if !(r[0] > 0.0) {
            return Err(Error::InvalidProfile(format!("first radius {} must be positive", r[0])));
        }
        if r.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidProfile("radii must be strictly increasing".into()));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("density values must be finite".into()));
        }
        Ok(RadialProfile { r, u })
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cumulative `∫₀^{r_j} ρ^{n-1} u dρ` at every node for the
    /// piecewise-linear interpolant of `u`, constant on `[0, r_0]`.
    fn cumulative_moment(&self, n: u32) -> Vec<f64> {
        let mut acc = self.u[0] * self.r[0].powi(n as i32) / f64::from(n);
        let mut out = Vec::with_capacity(self.r.len());
        out.push(acc);
        for j in 1..self.r.len() {
            acc += self.cell_moment(n, j - 1, self.r[j]);
            out.push(acc);
        }
        out
    }

    /// `∫_{r_j}^{b} ρ^{n-1} u dρ` for `b` inside cell `j`, expanding
    /// `ρ^{n-1}` around `r_j` so that every term is a positive power sum.
    fn cell_moment(&self, n: u32, j: usize, b: f64) -> f64 {
        let a = self.r[j];
        let k = (self.u[j + 1] - self.u[j]) / (self.r[j + 1] - a);
        let h = b - a;
        // Σ_i C(n-1, i) a^{n-1-i} [u_a h^{i+1}/(i+1) + k h^{i+2}/(i+2)]
        let mut binom = 1.0;
        let mut sum = 0.0;
        for i in 0..n {
            let ai = a.powi((n - 1 - i) as i32);
            let hi = h.powi(i as i32 + 1);
            sum += binom * ai * hi * (self.u[j] / f64::from(i + 1) + k * h / f64::from(i + 2));
            binom = binom * f64::from(n - 1 - i) / f64::from(i + 1);
        }
        sum
    }
}

/// Discrete mass-accumulation function `w(·, t)` on a strictly increasing
/// grid in the volume coordinate `s = r^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassProfile {
    s: Vec<f64>,
    w: Vec<f64>,
    t: f64,
}

impl MassProfile {
    pub fn new(s: Vec<f64>, w: Vec<f64>, t: f64) -> Result<Self> {
        if s.len() < 2 || s.len() != w.len() {
            return Err(Error::InvalidProfile(format!(
                "mass profile needs at least two matching nodes (got {} and {})",
                s.len(),
                w.len()
            )));
        }
        if !(s[0] >= 0.0) {
            return Err(Error::InvalidProfile(format!("grid starts at negative s = {}", s[0])));
        }
        if s.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidProfile("grid must be strictly increasing".into()));
        }
        if w.iter().any(|v| !v.is_finite()) || !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidProfile("values and time must be finite, t >= 0".into()));
        }
        Ok(MassProfile { s, w, t })
    }

    pub(crate) fn from_parts(s: Vec<f64>, w: Vec<f64>, t: f64) -> Self {
        debug_assert_eq!(s.len(), w.len());
        MassProfile { s, w, t }
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_values(&self, w: Vec<f64>) -> Result<Self> {
        MassProfile::new(self.s.clone(), w, self.t)
    }

    /// Piecewise-linear evaluation; errors outside the grid span.
    pub fn eval(&self, at: f64) -> Result<f64> {
        let (lo, hi) = (self.s[0], self.s[self.s.len() - 1]);
        // Tolerate round-off when `at` was computed as r^n from r = R.
        let at = if at > hi && at <= hi * (1.0 + 4.0 * f64::EPSILON) { hi } else { at };
        fd::interpolate(&self.s, &self.w, at).ok_or(Error::OutOfDomain { value: at, lo, hi })
    }

    pub fn cell_slopes(&self) -> Vec<f64> {
        fd::cell_slopes(&self.s, &self.w)
    }

    /// Largest cell slope; the discrete `sup w_s`.
    pub fn max_slope(&self) -> f64 {
        self.cell_slopes().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Second-order nodal approximation of `w_s`.
    pub fn nodal_slopes(&self) -> Result<Vec<f64>> {
        if self.len() < 3 {
            return Err(Error::GridTooCoarse { needed: 3, got: self.len() });
        }
        Ok(fd::nodal_slopes(&self.s, &self.w))
    }

    pub fn second_differences(&self) -> Vec<f64> {
        fd::second_differences(&self.s, &self.w)
    }
}

/// Builds [`Params`] from a sampled initial density; the total mass is
/// `ω_n ∫₀^R ρ^{n-1} u₀ dρ` for the piecewise-linear interpolant of the
/// samples (constant below the first node), integrated exactly.
pub fn build_params(n: u32, radius: f64, beta: f64, alpha: f64, u0: &RadialProfile) -> Result<Params> {
    // Validate everything but the mass first so that errors name the real culprit.
    Params::new(n, radius, beta, alpha, 1.0)?;
    check_density_nodes(u0, radius)?;
    let moment = *u0.cumulative_moment(n).last().expect("non-empty");
    if !(moment > 0.0) {
        return Err(Error::InvalidProfile("initial density has zero mass".into()));
    }
    Params::new(n, radius, beta, alpha, unit_sphere_area(n) * moment)
}

fn check_density_nodes(u0: &RadialProfile, radius: f64) -> Result<()> {
    if let Some((i, v)) = u0.u().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::InvalidProfile(format!("negative density {v} at node {i}")));
    }
    let last = *u0.r().last().expect("non-empty");
    if (last - radius).abs() > 1e-12 * radius {
        return Err(Error::InvalidProfile(format!("last radius {last} differs from R = {radius}")));
    }
    Ok(())
}

/// `w₀(s) = ∫₀^{s^{1/n}} ρ^{n-1} u₀(ρ) dρ` on `grid`, integrating
/// `ρ^{n-1}` times the piecewise-linear interpolant of `u₀` exactly cell by
/// cell (the same rule [`build_params`] uses for the total mass).
pub fn mass_profile_from_density(u0: &RadialProfile, p: &Params, grid: &[f64]) -> Result<MassProfile> {
    check_density_nodes(u0, p.radius)?;
    if grid.len() < 2 {
        return Err(Error::GridTooCoarse { needed: 2, got: grid.len() });
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidProfile("grid must be strictly increasing".into()));
    }
    let s_max = p.s_max();
    let last = grid[grid.len() - 1];
    if grid[0] < 0.0 || (last - s_max).abs() > 1e-12 * s_max {
        return Err(Error::InvalidProfile(format!(
            "grid must lie in [0, R^n] and end at R^n = {s_max} (ends at {last})"
        )));
    }

    let r = u0.r();
    let cumulative = u0.cumulative_moment(p.n);
    let total = cumulative[cumulative.len() - 1];
    let nf = p.nf();

    let mut w = Vec::with_capacity(grid.len());
    for (k, &s) in grid.iter().enumerate() {
        if k == grid.len() - 1 {
            w.push(total);
            continue;
        }
        let rho = s.powf(1.0 / nf);
        // First node at or beyond rho.
        let j = r.partition_point(|&ri| ri < rho);
        let value = if j == 0 {
            u0.u()[0] * s / nf
        } else if j == r.len() {
            total
        } else {
            cumulative[j - 1] + u0.cell_moment(p.n, j - 1, rho)
        };
        w.push(value);
    }
    MassProfile::new(grid.to_vec(), w, 0.0)
}

/// `u(r) = n · w_s(r^n)` at every grid node with `s > 0`.
pub fn density_from_mass_profile(w: &MassProfile, p: &Params) -> Result<RadialProfile> {
    let slopes = w.nodal_slopes()?;
    let nf = p.nf();
    let last = w.len() - 1;
    let (r, u): (Vec<f64>, Vec<f64>) = w
        .s()
        .iter()
        .zip(slopes)
        .enumerate()
        .filter(|(_, (s, _))| **s > 0.0)
        .map(|(i, (s, g))| {
            let r = if i == last { p.radius } else { s.powf(1.0 / nf) };
            (r, nf * g)
        })
        .unzip();
    RadialProfile::new(r, u)
}

/// `v_r(r) = r^{1-n} (μ r^n / n − w(r^n))`.
pub fn signal_gradient(w: &MassProfile, p: &Params, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= p.radius) {
        return Err(Error::OutOfDomain { value: r, lo: 0.0, hi: p.radius });
    }
    let s = if r == p.radius { w.s()[w.len() - 1] } else { r.powi(p.n as i32) };
    let mass_inside = w.eval(s)?;
    Ok((p.mu * s / p.nf() - mass_inside) / r.powi(p.n as i32 - 1))
}

/// `∫₀^R ρ^{n-1} u dρ` for the density field `u = n W_s`, where `W` is the
/// piecewise-linear interpolant of the nodes; in the volume coordinate this
/// is the sum of the cell increments of `w`.
pub fn field_mass(w: &MassProfile) -> f64 {
    w.w().windows(2).map(|p| p[1] - p[0]).sum()
}

/// Trapezoid rule in `s` of the nodal density values `u_i / n` returned by
/// [`density_from_mass_profile`]; differs from [`field_mass`] by the
/// second-order reconstruction error.
pub fn nodal_mass(w: &MassProfile) -> Result<f64> {
    let g = w.nodal_slopes()?;
    Ok(w.s()
        .windows(2)
        .zip(g.windows(2))
        .map(|(s, g)| 0.5 * (s[1] - s[0]) * (g[0] + g[1]))
        .sum())
}

/// Largest relative deviation of the reconstructed mass from `m / ω_n`
/// over all snapshots.
pub fn check_mass_conservation(traj: &Trajectory, p: &Params) -> f64 {
    let target = p.w_total();
    traj.snapshots()
        .iter()
        .map(|snap| (field_mass(snap) - target).abs() / target)
        .fold(0.0, f64::max)
}

/// As [`check_mass_conservation`], measured with [`nodal_mass`].
pub fn nodal_mass_drift(traj: &Trajectory, p: &Params) -> Result<f64> {
    let target = p.w_total();
    traj.snapshots()
        .iter()
        .map(|snap| nodal_mass(snap).map(|m| (m - target).abs() / target))
        .try_fold(0.0_f64, |acc, d| d.map(|d| acc.max(d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsCheck {
    /// Largest excursion outside `[0, m/ω_n]`, relative to `m/ω_n` (0 if none).
    pub range_excess: f64,
    /// Most negative node increment, relative to `m/ω_n` (0 if none).
    pub worst_decrease: f64,
}

pub fn check_bounds(traj: &Trajectory, p: &Params) -> BoundsCheck {
    let total = p.w_total();
    let mut range_excess: f64 = 0.0;
    let mut worst_decrease: f64 = 0.0;
    for snap in traj.snapshots() {
        for &v in snap.w() {
            range_excess = range_excess.max(-v / total).max((v - total) / total);
        }
        for pair in snap.w().windows(2) {
            worst_decrease = worst_decrease.max((pair[0] - pair[1]) / total);
        }
    }
    BoundsCheck { range_excess, worst_decrease }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalGradientCheck {
    /// `max (|v_r| − (2/n) sup u · r)` over nodes with `r > 0` and snapshots.
    pub max_excess: f64,
    /// `max |v_r(R)|`.
    pub boundary_value: f64,
}

/// `|v_r| ≤ (2/n) sup u · r` at every node, with `sup u = n · max w_s`.
pub fn check_signal_gradient_bound(traj: &Trajectory, p: &Params) -> Result<SignalGradientCheck> {
    let nf = p.nf();
    let mut max_excess = f64::NEG_INFINITY;
    let mut boundary_value: f64 = 0.0;
    for snap in traj.snapshots() {
        let sup_u = nf * snap.max_slope();
        let last = snap.len() - 1;
        for (i, &s) in snap.s().iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            let r = if i == last { p.radius } else { s.powf(1.0 / nf) };
            let v = signal_gradient(snap, p, r)?;
            max_excess = max_excess.max(v.abs() - 2.0 / nf * sup_u * r);
            if i == last {
                boundary_value = boundary_value.max(v.abs());
            }
        }
    }
    Ok(SignalGradientCheck { max_excess, boundary_value })
}
