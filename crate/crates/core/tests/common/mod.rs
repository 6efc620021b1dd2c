//! Shared setups and independent numerical oracles for the integration tests.
#![allow(dead_code, clippy::excessive_precision, clippy::too_many_arguments)]

use ksflow::model::{build_params, mass_profile_from_density, MassProfile, Params, RadialProfile};
use ksflow::solver::Grid;

/// Nodes `(i/(N−1))^q · top`, with the radii of all nodes with `s > 0`.
pub fn graded_nodes(n_nodes: usize, q: i32, top: f64) -> Vec<f64> {
    let last = (n_nodes - 1) as f64;
    let mut s: Vec<f64> = (0..n_nodes).map(|i| top * (i as f64 / last).powi(q)).collect();
    s[n_nodes - 1] = top;
    s
}

pub fn sample(n: u32, radius: f64, nodes: &[f64], u: impl Fn(f64) -> f64) -> RadialProfile {
    let last = nodes.len() - 1;
    let r: Vec<f64> = nodes[1..]
        .iter()
        .enumerate()
        .map(|(k, s)| if k + 1 == last { radius } else { s.powf(1.0 / f64::from(n)) })
        .collect();
    let vals = r.iter().map(|&x| u(x)).collect();
    RadialProfile::new(r, vals).unwrap()
}

/// Density-driven setup: parameters and `w₀` on the `ε = 0` graded grid.
pub fn setup(n: u32, beta: f64, alpha: f64, n_nodes: usize, q: i32, u: impl Fn(f64) -> f64) -> (Params, MassProfile) {
    let nodes = graded_nodes(n_nodes, q, 1.0);
    let u0 = sample(n, 1.0, &nodes, u);
    let p = build_params(n, 1.0, beta, alpha, &u0).unwrap();
    let w0 = mass_profile_from_density(&u0, &p, &nodes).unwrap();
    (p, w0)
}

/// `u₀ = 2 − 2r²` on the unit disc (n = 2, β = 1, α = 1).
pub fn quadratic_setup(n_nodes: usize) -> (Params, MassProfile) {
    setup(2, 1.0, 1.0, n_nodes, 2, |r| 2.0 - 2.0 * r * r)
}

pub fn plateau(height: f64, rp: f64, width: f64, r: f64) -> f64 {
    if r <= rp {
        height
    } else if r >= rp + width {
        0.0
    } else {
        let x = (r - rp) / width;
        height * (1.0 - 3.0 * x * x + 2.0 * x * x * x)
    }
}

/// Concentrated plateau data carrying about 450 units of mass inside r = 0.1.
pub fn plateau_setup() -> (Params, MassProfile) {
    setup(2, 1.0, 1.0, 400, 3, |r| plateau(2.5e4, 0.05, 0.05, r))
}

pub fn grid_profile(grid: &Grid, f: impl Fn(f64) -> f64) -> MassProfile {
    let w = grid.nodes().iter().map(|&s| f(s)).collect();
    MassProfile::new(grid.nodes().to_vec(), w, 0.0).unwrap()
}

/// Classical fourth-order Runge–Kutta over `steps` equal steps.
pub fn rk4(f: impl Fn(f64, f64) -> f64, y0: f64, t_end: f64, steps: usize) -> f64 {
    let h = t_end / steps as f64;
    let mut y = y0;
    let mut t = 0.0;
    for _ in 0..steps {
        let k1 = f(t, y);
        let k2 = f(t + h / 2.0, y + h / 2.0 * k1);
        let k3 = f(t + h / 2.0, y + h / 2.0 * k2);
        let k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    y
}

/// Time at which `y' = A y² − B y − C` started at `y_init` exceeds `y_cap`,
/// integrating `z = 1/y` (which stays bounded) with RK4 and interpolating
/// the crossing of `1/y_cap` linearly.
pub fn riccati_escape_time(a: f64, b: f64, c: f64, y_init: f64, y_cap: f64) -> f64 {
    let rate = a * y_init + b + (a * c).sqrt();
    let h = 1.0 / (rate * 2e4);
    let f = |z: f64| -a + b * z + c * z * z;
    let target = 1.0 / y_cap;
    let mut z = 1.0 / y_init;
    let mut t = 0.0;
    loop {
        let k1 = f(z);
        let k2 = f(z + h / 2.0 * k1);
        let k3 = f(z + h / 2.0 * k2);
        let k4 = f(z + h * k3);
        let next = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next <= target {
            return t + h * (z - target) / (z - next);
        }
        z = next;
        t += h;
        assert!(t < 1e6 / rate, "Riccati orbit did not escape");
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of a smooth integrand on `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `∫₀^{s₁} s^{−γ}(s₁ − s) w ds` for piecewise-linear `w` by the substitution
/// `s = x^{1/(1−γ)}`, which removes the singular weight, and adaptive
/// Simpson on each mapped cell.
pub fn moment_by_quadrature(s: &[f64], w: &[f64], s1: f64, gamma: f64) -> f64 {
    let e = 1.0 - gamma;
    let mut total = 0.0;
    for i in 0..s.len() - 1 {
        if s[i] >= s1 {
            break;
        }
        let (a, b) = (s[i], s[i + 1].min(s1));
        let k = (w[i + 1] - w[i]) / (s[i + 1] - s[i]);
        let wl = |x: f64| w[i] + k * (x - s[i]);
        let g = |x: f64| {
            let sv = x.powf(1.0 / e);
            (s1 - sv) * wl(sv) / e
        };
        let scale = (s1 * w[i].abs().max(w[i + 1].abs())).max(1e-300);
        total += adaptive_simpson(g, a.powf(e), b.powf(e), 1e-15 * scale);
    }
    total
}

/// Threshold inputs and the values printed for them by `oracle/threshold_oracle.py`.
pub struct OracleCase {
    pub n: u32,
    pub beta: f64,
    pub alpha: f64,
    pub radius: f64,
    pub mass: f64,
    pub m0: f64,
    pub c4: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub s1: f64,
    pub r0: f64,
}

pub fn oracle_cases() -> [OracleCase; 2] {
    use std::f64::consts::PI;
    [
        OracleCase {
            n: 2,
            beta: 1.0,
            alpha: 1.0,
            radius: 1.0,
            mass: PI,
            m0: PI,
            c4: 1.0,
            gamma: 0.5,
            c1: 42.666666666666666667,
            c2: 0.040528473456935108578,
            c3: 0.024640691589796683201,
            s1: 1.1704033883360407116e-5,
            r0: 2.4190942399336582187e-3,
        },
        OracleCase {
            n: 3,
            beta: 0.3,
            alpha: 2.0,
            radius: 1.5,
            mass: 10.0,
            m0: 4.0,
            c4: 2.5,
            gamma: 1.0 - 2.0 / 3.0 + 0.1,
            c1: 25.11627906976744186,
            c2: 0.1387820595750365173,
            c3: 0.011968780994745104307,
            s1: 1.8085355775909100463e-5,
            r0: 0.02083366550154184082,
        },
    ]
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
