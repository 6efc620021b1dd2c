//! Concentration thresholds, the singular-weight moment
//! `y(t) = ∫₀^{s₁} s^{−γ}(s₁ − s) w ds`, its differential inequality and the
//! Riccati subsolution that forces finite-time blow-up.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MassProfile, Params};
use crate::solver::Trajectory;

/// Cap applied to every automatically selected γ.
pub const GAMMA_CAP: f64 = 0.9;

/// `1 − 2/n + β/n`, the largest admissible moment exponent.
pub fn gamma_limit(n: u32, beta: f64) -> f64 {
    let nf = f64::from(n);
    1.0 - 2.0 / nf + beta / nf
}

pub fn select_gamma(n: u32, beta: f64, override_gamma: Option<f64>) -> Result<f64> {
    if n < 2 || !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("need n >= 2 and beta > 0 (got {n}, {beta})")));
    }
    let limit = gamma_limit(n, beta);
    let gamma = match override_gamma {
        Some(g) => g,
        None => limit.min(GAMMA_CAP),
    };
    if !(gamma > 0.0 && gamma < 1.0) || gamma > limit {
        return Err(Error::InvalidParameter(format!(
            "gamma = {gamma} must lie in (0, 1) and not exceed 1 - 2/n + beta/n = {limit}"
        )));
    }
    Ok(gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// The slope-bound power `C4 = ‖w_s‖^{α−1}`: exactly 1 for α = 1, otherwise
/// `2 (n · sup u₀)^{α−1}`.
pub fn default_c4(p: &Params, sup_u0: f64) -> f64 {
    if p.alpha == 1.0 {
        1.0
    } else {
        2.0 * (p.nf() * sup_u0).powf(p.alpha - 1.0)
    }
}

/// `C4` from the barrier slope at the horizon, `y(T)^{α−1}`.
pub fn barrier_c4(p: &Params, y0: f64, horizon: f64) -> Result<f64> {
    let y = crate::barriers::barrier_ode_solution(y0, p.n, p.alpha, horizon)?;
    Ok(y.powf(p.alpha - 1.0))
}

pub fn constants(p: &Params, gamma: f64, c4: f64) -> Result<Constants> {
    select_gamma(p.n, p.beta, Some(gamma))?;
    if !(c4 > 0.0 && c4.is_finite()) {
        return Err(Error::InvalidParameter(format!("C4 = {c4} must be positive")));
    }
    let nf = p.nf();
    let (a, b) = (p.alpha, p.beta);
    let num = 2.0 - 2.0 / nf + b / nf - gamma;
    let den = 3.0 - 4.0 / nf + 2.0 * b / nf - gamma;
    assert!(den > 0.0, "3 - 4/n + 2 beta/n - gamma must be positive for admissible gamma");
    let c1 = 8.0 * num * num * nf.powf(4.0 - a) / (den * a);
    let c2 = 2.0 * c4 * c4 * nf.powf(a) / (a * (3.0 - gamma) * p.omega_n * p.omega_n);
    let e1 = 1.0 - gamma;
    let e2 = 2.0 - gamma;
    let bracket = -(-e1 * std::f64::consts::LN_2).exp_m1() / e1 + (-e2 * std::f64::consts::LN_2).exp_m1() / e2;
    Ok(Constants { c1, c2, c3: bracket / p.omega_n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    /// The diffusion-controlled bound on `s₁^{2−4/n+2β/n}`.
    Diffusion,
    /// The mass-controlled bound on `s₁²`.
    Mass,
    /// The `(α−1)` linear-damping bound on `s₁²` (α > 1 only).
    Damping,
    /// Every bound exceeded the domain; `s₁` was capped below `Rⁿ`.
    Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    pub s0: f64,
    pub s1: f64,
    pub r0: f64,
    pub binding: BindingConstraint,
}

/// Largest `s₁` meeting every threshold constraint (capped at `Rⁿ(1 − 1e−9)`),
/// with `s₀ = s₁/2` and `r₀ = s₀^{1/n}`.
pub fn concentration_threshold(p: &Params, m0: f64, c4: f64, gamma: f64) -> Result<Threshold> {
    if !(m0 > 0.0) || m0 > p.mass {
        return Err(Error::InvalidParameter(format!("m0 = {m0} must lie in (0, m = {}]", p.mass)));
    }
    let k = constants(p, gamma, c4)?;
    let nf = p.nf();
    let a = p.alpha;
    let na = nf.powf(a);
    let r2n = p.s_max() * p.s_max();
    let base = a * na * (1.0 - gamma) * k.c3 * k.c3 * m0 * m0;

    let mut candidates = Vec::with_capacity(3);
    let exponent = 2.0 - 4.0 / nf + 2.0 * p.beta / nf;
    let diffusion_rhs = base / (12.0 * k.c1);
    if exponent > 0.0 {
        candidates.push((diffusion_rhs.powf(1.0 / exponent), BindingConstraint::Diffusion));
    } else if diffusion_rhs < 1.0 {
        return Err(Error::Infeasible(format!(
            "degenerate exponent: the diffusion bound needs 1 <= {diffusion_rhs}"
        )));
    }
    let mass_ratio = p.mass * p.mass / r2n;
    if a > 1.0 {
        candidates.push(((base / (12.0 * k.c2 * mass_ratio)).sqrt(), BindingConstraint::Mass));
        let damping = a * (1.0 - gamma) * k.c3 * m0 / (12.0 * (a - 1.0));
        candidates.push((damping, BindingConstraint::Damping));
    } else {
        candidates.push(((base / (6.0 * k.c2 * mass_ratio)).sqrt(), BindingConstraint::Mass));
    }
    let cap = p.s_max() * (1.0 - 1e-9);
    let (s1, binding) = candidates
        .into_iter()
        .fold((cap, BindingConstraint::Domain), |acc, c| if c.0 < acc.0 { c } else { acc });
    let s0 = s1 / 2.0;
    Ok(Threshold { s0, s1, r0: s0.powf(1.0 / nf), binding })
}

/// `w₀(s₀) ≥ m₀/ω_n`, i.e. at least `m₀` of the mass sits in the ball of radius `s₀^{1/n}`.
pub fn check_concentration(w0: &MassProfile, s0: f64, m0: f64, p: &Params) -> Result<bool> {
    Ok(w0.eval(s0)? >= m0 / p.omega_n)
}

/// `∫_a^b s^{e−1} ds = (b^e − a^e)/e`, without cancellation for thin cells.
fn power_integral(a: f64, b: f64, e: f64) -> f64 {
    if a <= 0.0 {
        b.powf(e) / e
    } else {
        a.powf(e) * (e * ((b - a) / a).ln_1p()).exp_m1() / e
    }
}

/// The moment `∫₀^{s₁} s^{−γ}(s₁ − s) w ds` of the piecewise-linear profile,
/// integrated analytically cell by cell. Below the first node the profile
/// is taken as zero.
pub fn moment(w: &MassProfile, s1: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    let (s, v) = (w.s(), w.w());
    let top = s[s.len() - 1];
    if !(s1 > 0.0) || s1 > top * (1.0 + 4.0 * f64::EPSILON) {
        return Err(Error::OutOfDomain { value: s1, lo: 0.0, hi: top });
    }
    let s1 = s1.min(top);
    let (e1, e2, e3) = (1.0 - gamma, 2.0 - gamma, 3.0 - gamma);
    let mut y = 0.0;
    for i in 0..s.len() - 1 {
        let a = s[i];
        if a >= s1 {
            break;
        }
        let b = s[i + 1].min(s1);
        let k = (v[i + 1] - v[i]) / (s[i + 1] - s[i]);
        let p = v[i] - k * a;
        y += s1 * p * power_integral(a, b, e1) + (s1 * k - p) * power_integral(a, b, e2)
            - k * power_integral(a, b, e3);
    }
    Ok(y)
}

/// Coefficients of the Riccati comparison `y' = A y² − B y − C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Riccati {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl Riccati {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        assert!(a > 0.0, "Riccati coefficient A must be positive");
        Riccati { a, b, c }
    }

    /// `A = (α nᵅ (1−γ)/4) s₁^{γ−3}`, `B = (α−1) nᵅ`,
    /// `C = c₁ s₁^{3−4/n+2β/n−γ} + c₂ (m²/R^{2n}) s₁^{3−γ}`.
    pub fn from_threshold(p: &Params, gamma: f64, k: &Constants, s1: f64) -> Self {
        let nf = p.nf();
        let na = nf.powf(p.alpha);
        let a = p.alpha * na * (1.0 - gamma) / 4.0 * s1.powf(gamma - 3.0);
        let b = (p.alpha - 1.0) * na;
        let c = k.c1 * s1.powf(3.0 - 4.0 / nf + 2.0 * p.beta / nf - gamma)
            + k.c2 * p.mass * p.mass / (p.s_max() * p.s_max()) * s1.powf(3.0 - gamma);
        Riccati::new(a, b, c)
    }

    /// Roots `y± = (B ± √(B² + 4AC)) / (2A)`.
    pub fn roots(&self) -> (f64, f64) {
        let disc = (self.b * self.b + 4.0 * self.a * self.c).sqrt();
        ((self.b + disc) / (2.0 * self.a), (self.b - disc) / (2.0 * self.a))
    }

    /// `(C + B y)/(A y²)`; a value `≤ 1` guarantees `y > y₊`.
    pub fn predicate(&self, y: f64) -> f64 {
        (self.c + self.b * y) / (self.a * y * y)
    }

    /// Escape time of the solution starting at `y_init`, infinite when
    /// `y_init ≤ y₊`.
    pub fn blowup_time(&self, y_init: f64) -> f64 {
        let (yp, ym) = self.roots();
        if !(y_init > yp) {
            return f64::INFINITY;
        }
        ((y_init - ym) / (y_init - yp)).ln() / (self.a * (yp - ym))
    }
}

/// Predicted blow-up time of the Riccati subsolution; `None` when infinite.
pub fn subsolution_blowup_time(y_init: f64, r: &Riccati) -> Result<Option<f64>> {
    if !(y_init >= 0.0) {
        return Err(Error::InvalidParameter(format!("initial moment {y_init} must be nonnegative")));
    }
    let t = r.blowup_time(y_init);
    Ok(t.is_finite().then_some(t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdiReport {
    pub times: Vec<f64>,
    pub moments: Vec<f64>,
    /// `y(t) − [y(0) + A∫y² + (1−α)nᵅ∫y − C t]`, trapezoid in time.
    pub residuals: Vec<f64>,
    pub min_residual: f64,
    pub tol: f64,
    pub flagged: bool,
}

/// Default tolerance on the ODI residual, relative to `y(0)`.
pub const ODI_TOL: f64 = 1e-6;

pub fn odi_residual(traj: &Trajectory, cert: &BlowupCertificate, p: &Params) -> Result<OdiReport> {
    let snaps = traj.snapshots();
    if snaps.len() < 3 {
        return Err(Error::Precondition(format!(
            "the differential inequality check needs at least 3 snapshots, got {}",
            snaps.len()
        )));
    }
    let times: Vec<f64> = snaps.iter().map(MassProfile::time).collect();
    let moments = snaps
        .iter()
        .map(|w| moment(w, cert.s1, cert.gamma))
        .collect::<Result<Vec<_>>>()?;
    let r = cert.riccati;
    let linear = (1.0 - p.alpha) * p.nf().powf(p.alpha);
    let y0 = moments[0];
    let (mut int_sq, mut int_lin) = (0.0, 0.0);
    let mut residuals = Vec::with_capacity(moments.len());
    residuals.push(0.0);
    for k in 1..moments.len() {
        let h = times[k] - times[k - 1];
        int_sq += 0.5 * h * (moments[k] * moments[k] + moments[k - 1] * moments[k - 1]);
        int_lin += 0.5 * h * (moments[k] + moments[k - 1]);
        let rhs = y0 + r.a * int_sq + linear * int_lin - r.c * times[k];
        residuals.push(moments[k] - rhs);
    }
    let min_residual = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = ODI_TOL * y0;
    Ok(OdiReport { times, moments, residuals, min_residual, tol, flagged: min_residual < -tol })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupCertificate {
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    pub m0: f64,
    pub s0: f64,
    pub s1: f64,
    pub r0: f64,
    pub binding: BindingConstraint,
    pub riccati: Riccati,
    /// Predicate evaluated at the lower bound `c₃ m₀ s₁^{2−γ}` of the initial moment.
    pub y0_lower_bound: f64,
    pub predicate_at_lower_bound: f64,
    /// Initial moment of actual data, when supplied.
    pub y0_moment: Option<f64>,
    pub predicate_at_initial: Option<f64>,
    pub concentration_met: Option<bool>,
    /// Escape time of the Riccati subsolution; `None` when infinite or no data.
    #[serde(rename = "riccati_T")]
    pub riccati_t: Option<f64>,
    pub odi: Option<OdiReport>,
}

impl BlowupCertificate {
    /// Threshold part of the certificate; data-dependent fields are empty.
    pub fn new(p: &Params, m0: f64, c4: f64, gamma: f64) -> Result<Self> {
        let k = constants(p, gamma, c4)?;
        let th = concentration_threshold(p, m0, c4, gamma)?;
        let riccati = Riccati::from_threshold(p, gamma, &k, th.s1);
        let y0_lower_bound = k.c3 * m0 * th.s1.powf(2.0 - gamma);
        Ok(BlowupCertificate {
            gamma,
            c1: k.c1,
            c2: k.c2,
            c3: k.c3,
            c4,
            m0,
            s0: th.s0,
            s1: th.s1,
            r0: th.r0,
            binding: th.binding,
            riccati,
            y0_lower_bound,
            predicate_at_lower_bound: riccati.predicate(y0_lower_bound),
            y0_moment: None,
            predicate_at_initial: None,
            concentration_met: None,
            riccati_t: None,
            odi: None,
        })
    }

    /// Fills the initial-data fields from `w0`.
    pub fn with_initial(mut self, w0: &MassProfile, p: &Params) -> Result<Self> {
        let y0 = moment(w0, self.s1, self.gamma)?;
        self.y0_moment = Some(y0);
        self.predicate_at_initial = Some(self.riccati.predicate(y0));
        self.concentration_met = Some(check_concentration(w0, self.s0, self.m0, p)?);
        self.riccati_t = subsolution_blowup_time(y0, &self.riccati)?;
        Ok(self)
    }

    pub fn with_odi(mut self, traj: &Trajectory, p: &Params) -> Result<Self> {
        self.odi = Some(odi_residual(traj, &self, p)?);
        Ok(self)
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn case_one() -> Params {
        Params::new(2, 1.0, 1.0, 1.0, PI).unwrap()
    }

    #[test]
    fn gamma_selection() {
        assert_eq!(select_gamma(2, 1.0, None).unwrap(), 0.5);
        assert_eq!(select_gamma(2, 4.0, None).unwrap(), 0.9);
        assert!((select_gamma(3, 0.3, None).unwrap() - (1.0 / 3.0 + 0.1)).abs() < 1e-15);
        assert!(select_gamma(2, 1.0, Some(0.6)).is_err());
        assert!(select_gamma(2, 1.0, Some(0.0)).is_err());
        assert_eq!(select_gamma(2, 1.0, Some(0.25)).unwrap(), 0.25);
    }

    #[test]
    fn constants_reference_case() {
        let k = constants(&case_one(), 0.5, 1.0).unwrap();
        assert!((k.c1 - 128.0 / 3.0).abs() < 1e-12);
        assert!((k.c2 - 0.040528473456935108578).abs() < 1e-15);
        let bracket = 2.0 * (1.0 - 2f64.powf(-0.5)) - (2.0 / 3.0) * (1.0 - 2f64.powf(-1.5));
        assert!((k.c3 * 2.0 * PI - bracket).abs() < 1e-15);
        assert!((bracket - 0.154822).abs() < 1e-6);
    }

    #[test]
    fn threshold_reference_case() {
        let th = concentration_threshold(&case_one(), PI, 1.0, 0.5).unwrap();
        assert_eq!(th.binding, BindingConstraint::Diffusion);
        assert!((th.s1 / 1.1704033883360407116e-5 - 1.0).abs() < 1e-10);
        assert!((th.r0 / 2.4190942399336582187e-3 - 1.0).abs() < 1e-10);
        assert!(concentration_threshold(&case_one(), 4.0, 1.0, 0.5).is_err());
        assert!(concentration_threshold(&case_one(), 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn alpha_one_c4_is_one() {
        let p = case_one();
        assert_eq!(default_c4(&p, 1e6), 1.0);
        let p2 = Params::new(2, 1.0, 1.0, 2.0, PI).unwrap();
        assert_eq!(default_c4(&p2, 3.0), 12.0);
        assert_eq!(barrier_c4(&p, 0.5, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn moment_of_linear_profile() {
        let s: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
        let w = MassProfile::new(s.clone(), s.iter().map(|x| x / 2.0).collect(), 0.0).unwrap();
        let y = moment(&w, 1.0, 0.5).unwrap();
        assert!((y - 0.5 * (1.0 / 1.5 - 1.0 / 2.5)).abs() < 1e-14);
        let zero = MassProfile::new(s.clone(), vec![0.0; s.len()], 0.0).unwrap();
        assert_eq!(moment(&zero, 0.7, 0.3).unwrap(), 0.0);
        assert!(moment(&w, 1.5, 0.5).is_err());
    }

    #[test]
    fn concentration_examples() {
        let p = case_one();
        let s: Vec<f64> = (0..=100).map(|i| f64::from(i) / 100.0).collect();
        let quad = MassProfile::new(s.clone(), s.iter().map(|x| x - x * x / 2.0).collect(), 0.0).unwrap();
        assert!(check_concentration(&quad, 0.1, 0.5, &p).unwrap());
        let lin = MassProfile::new(s.clone(), s.iter().map(|x| x / 2.0).collect(), 0.0).unwrap();
        assert!(!check_concentration(&lin, 1e-5, PI, &p).unwrap());
    }

    #[test]
    fn riccati_examples() {
        let r = Riccati::new(1.0, 0.0, 1.0);
        assert!((r.blowup_time(2.0) - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!(r.blowup_time(1.0).is_infinite());
        assert_eq!(subsolution_blowup_time(0.5, &r).unwrap(), None);
        assert!(subsolution_blowup_time(-1.0, &r).is_err());
    }

    #[test]
    fn certificate_predicate_bound() {
        let cert = BlowupCertificate::new(&case_one(), PI, 1.0, 0.5).unwrap();
        assert!(cert.predicate_at_lower_bound <= 1.0 + 1e-12);
        let json = serde_json::to_string(&cert).unwrap();
        assert!(json.contains("\"C4\":1.0"));
        assert!(json.contains("\"riccati_T\":null"));
    }
}
