//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::process::ExitCode;

use common::{
    adaptive_simpson, graded_nodes, moment_by_quadrature, oracle_cases, plateau_setup, quadratic_setup, rel,
    riccati_escape_time, rk4, setup,
};
use ksflow::barriers::{
    barrier_blowup_time, barrier_ode_solution, barrier_trajectory, check_concavity, check_linear_barrier,
    shifted_trajectory, verify_comparison, BarrierState, ComparisonCoefficients, ComparisonStatus,
};
use ksflow::blowup::{
    concentration_threshold, constants, gamma_limit, moment, BlowupCertificate, Riccati, GAMMA_CAP,
};
use ksflow::model::{check_mass_conservation, check_signal_gradient_bound, nodal_mass_drift, MassProfile, Params};
use ksflow::solver::{epsilon_continuation, simulate, StepControls, Termination, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, fn() -> Outcome);

fn controls(t_end: f64, dt_max: f64) -> StepControls {
    StepControls { t_end, dt_max, dt_init: dt_max.min(1e-4), ..Default::default() }
}

fn steady_run() -> (Params, Trajectory) {
    let (p, w0) = setup(2, 1.0, 1.0, 400, 2, |_| 1.0);
    let tr = simulate(&p, &w0, 0.0, &StepControls::default()).unwrap();
    (p, tr)
}

fn quadratic_run() -> (Params, Trajectory) {
    let (p, w0) = quadratic_setup(400);
    let t_end = 0.5 * BarrierState::from_initial(&w0, &p).unwrap().t_star;
    let tr = simulate(&p, &w0, 0.0, &controls(t_end, t_end / 100.0)).unwrap();
    (p, tr)
}

fn blowup_run() -> (Params, MassProfile, Trajectory) {
    let (p, w0) = plateau_setup();
    let tr = simulate(&p, &w0, 0.0, &StepControls::default()).unwrap();
    (p, w0, tr)
}

fn steady_exactness() -> Outcome {
    let (_, tr) = steady_run();
    let dev = tr
        .snapshots()
        .iter()
        .flat_map(|snap| snap.s().iter().zip(snap.w()).map(|(s, w)| (w - s / 2.0).abs()))
        .fold(0.0, f64::max);
    let pass = dev <= 1e-6 && tr.termination == Termination::HorizonReached && tr.final_time() == 1.0;
    outcome(pass, format!("sup |w - s/2| = {dev:.3e}, {} at t = {}", tr.termination.as_str(), tr.final_time()))
}

fn mass_conservation() -> Outcome {
    let runs = [steady_run(), quadratic_run(), {
        let (p, _, tr) = blowup_run();
        (p, tr)
    }];
    let drift = runs.iter().map(|(p, tr)| check_mass_conservation(tr, p)).fold(0.0, f64::max);
    let nodal: Vec<String> =
        runs.iter().map(|(p, tr)| format!("{:.1e}", nodal_mass_drift(tr, p).unwrap())).collect();
    outcome(
        drift <= 1e-6,
        format!(
            "worst relative drift of the cell-wise reconstruction over 3 runs = {drift:.3e} (nodal trapezoid drift, reported only: [{}])",
            nodal.join(", ")
        ),
    )
}

fn linear_barrier() -> Outcome {
    let (p, tr) = quadratic_run();
    let b = check_linear_barrier(&tr, &p).unwrap();
    outcome(
        b.relative_violation <= 1e-8,
        format!("max (w - y s)/(m/omega_n) = {:.3e} to t = {:.4} (t* = {:.4})", b.relative_violation, tr.final_time(), b.t_star),
    )
}

fn barrier_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=4u32);
        let alpha = rng.gen_range(1.0..=3.0);
        let y0 = rng.gen_range(0.1..=5.0);
        let t = 0.9 * barrier_blowup_time(y0, n, alpha).unwrap();
        let rate = f64::from(n).powf(alpha);
        let numeric = rk4(|_, y| rate * y.powf(alpha + 1.0), y0, t, 100_000);
        worst = worst.max(rel(numeric, barrier_ode_solution(y0, n, alpha, t).unwrap()));
    }
    outcome(worst <= 1e-6, format!("worst relative error over 50 tuples = {worst:.3e}"))
}

fn concavity() -> Outcome {
    let (_, tr) = quadratic_run();
    let c = check_concavity(&tr).unwrap();
    outcome(
        c.relative <= 1e-8,
        format!("max relative slope increase = {:.3e} (raw second difference {:.3e})", c.relative, c.max_positive_second_diff),
    )
}

fn epsilon_monotonicity() -> Outcome {
    let (p, w0) = quadratic_setup(400);
    let c = StepControls { snapshot_interval: Some(0.01), ..controls(0.2, 1e-3) };
    let run = epsilon_continuation(&p, &w0, &[0.1, 0.05, 0.025], &c).unwrap();
    let margin = run.min_margin();
    let dists: Vec<String> = run.pairs.iter().map(|q| format!("{:.3e}", q.sup_distance)).collect();
    outcome(margin >= -1e-8, format!("min (w_eps/2 - w_eps) = {margin:.3e}, sup distances [{}]", dists.join(", ")))
}

fn signal_gradient_bound() -> Outcome {
    let runs = [steady_run(), quadratic_run(), {
        let (p, _, tr) = blowup_run();
        (p, tr)
    }];
    let (mut excess, mut boundary) = (f64::NEG_INFINITY, 0.0f64);
    for (p, tr) in &runs {
        let v = check_signal_gradient_bound(tr, p).unwrap();
        excess = excess.max(v.max_excess);
        boundary = boundary.max(v.boundary_value);
    }
    outcome(
        excess <= 1e-10 && boundary <= 1e-12,
        format!("max (|v_r| - (2/n) sup u r) = {excess:.3e}, max |v_r(R)| = {boundary:.3e}"),
    )
}

fn threshold_reproduction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut first = String::new();
    for case in oracle_cases() {
        let p = Params::new(case.n, case.radius, case.beta, case.alpha, case.mass).unwrap();
        let k = constants(&p, case.gamma, case.c4).unwrap();
        let th = concentration_threshold(&p, case.m0, case.c4, case.gamma).unwrap();
        for (got, want) in [(k.c1, case.c1), (k.c2, case.c2), (k.c3, case.c3), (th.s1, case.s1), (th.r0, case.r0)] {
            worst = worst.max(rel(got, want));
        }
        if first.is_empty() {
            first = format!("c1 = {:.5}, s1 = {:.4e}, r0 = {:.4e}", k.c1, th.s1, th.r0);
        }
    }
    outcome(worst <= 1e-10, format!("{first}; worst relative deviation from oracle = {worst:.3e}"))
}

fn sufficiency_predicate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 1000;
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let n = rng.gen_range(2..=5u32);
        let beta = rng.gen_range(0.05..3.0);
        let alpha = if rng.gen_bool(0.3) { 1.0 } else { rng.gen_range(1.0..3.0) };
        let radius = rng.gen_range(0.3..3.0);
        let mass = rng.gen_range(0.01..200.0);
        let m0 = mass * rng.gen_range(0.01..=1.0);
        let c4 = if alpha == 1.0 { 1.0 } else { rng.gen_range(1.0..20.0) };
        let gamma = rng.gen_range(0.01..=1.0) * gamma_limit(n, beta).min(GAMMA_CAP);
        let p = Params::new(n, radius, beta, alpha, mass).unwrap();
        let cert = BlowupCertificate::new(&p, m0, c4, gamma).unwrap();
        worst = worst.max(cert.predicate_at_lower_bound);
    }
    outcome(worst <= 1.0 + 1e-12, format!("largest predicate value over {draws} draws = {worst:.15}"))
}

fn moment_quadrature() -> Outcome {
    let s = graded_nodes(200, 2, 1.0);
    let lin = MassProfile::new(s.clone(), s.iter().map(|x| x / 2.0).collect(), 0.0).unwrap();
    let y = moment(&lin, 1.0, 0.5).unwrap();
    let analytic = rel(y, 2.0 / 15.0);
    let check = adaptive_simpson(|x: f64| 0.5 * (x.sqrt() - x.powf(1.5)), 0.0, 1.0, 1e-13);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let cells = rng.gen_range(2..40);
        let s = graded_nodes(cells + 1, rng.gen_range(1..4), 1.0);
        let mut w = vec![0.0];
        for _ in 0..cells {
            w.push(w.last().unwrap() + rng.gen_range(0.0..1.0));
        }
        let s1 = rng.gen_range(0.05..=1.0);
        let gamma = rng.gen_range(0.05..0.9);
        let exact = moment(&MassProfile::new(s.clone(), w.clone(), 0.0).unwrap(), s1, gamma).unwrap();
        worst = worst.max(rel(exact, moment_by_quadrature(&s, &w, s1, gamma)));
    }
    outcome(
        analytic <= 1e-8 && worst <= 1e-10,
        format!("y(s/2) = {y:.12} (quadrature {check:.12}), worst random mismatch = {worst:.3e}"),
    )
}

fn riccati_time() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (a, b, c) = (rng.gen_range(0.1..10.0), rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0));
        let r = Riccati::new(a, b, c);
        let y_init = r.roots().0 * rng.gen_range(1.05..3.0);
        worst = worst.max(rel(riccati_escape_time(a, b, c, y_init, 1e9), r.blowup_time(y_init)));
    }
    outcome(worst <= 1e-6, format!("worst relative error over 100 tuples = {worst:.3e}"))
}

fn blowup_run_criterion() -> Outcome {
    let (p, w0, tr) = blowup_run();
    let cert = BlowupCertificate::new(&p, p.mass, 1.0, 0.5).unwrap().with_initial(&w0, &p).unwrap();
    let concentrated = cert.concentration_met == Some(true);
    let terminated = matches!(tr.termination, Termination::BlowupDeclared | Termination::StepCollapse);
    let cert = cert.with_odi(&tr, &p).unwrap();
    let odi = cert.odi.as_ref().unwrap();
    let y0 = odi.moments[0];
    let pass = concentrated && terminated && tr.final_time().is_finite() && odi.min_residual >= -1e-6 * y0;
    outcome(
        pass,
        format!(
            "{} at t = {:.4e}; w0(s0) >= m0/omega_n: {concentrated}; min ODI residual / y(0) = {:.3e} over {} samples",
            tr.termination.as_str(),
            tr.final_time(),
            odi.min_residual / y0,
            odi.times.len()
        ),
    )
}

fn comparison_checker() -> Outcome {
    let (p, tr) = quadratic_run();
    let k = ComparisonCoefficients::regularized(&p, 0.0);
    let upper = barrier_trajectory(&tr).unwrap();
    let ordered = verify_comparison(&tr, &upper, &k, 1e-8).unwrap();
    let lifted = shifted_trajectory(&tr, 0.01 * p.w_total()).unwrap();
    let injected = verify_comparison(&lifted, &tr, &k, 1e-8).unwrap();
    let own = verify_comparison(&tr, &tr, &k, 1e-8).unwrap();
    let pass = ordered.status == ComparisonStatus::Ordered
        && injected.status == ComparisonStatus::HypothesisFailed
        && injected.failed_hypotheses.contains(&"boundary_ordering")
        && own.status == ComparisonStatus::Ordered
        && own.max_order_violation == 0.0
        && own.min_order_difference == 0.0;
    outcome(
        pass,
        format!(
            "solver vs barrier {:?}; injection {:?} {:?}; self-comparison margin {:e}",
            ordered.status, injected.status, injected.failed_hypotheses, own.max_order_violation
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("steady-state exactness", steady_exactness),
        ("mass conservation", mass_conservation),
        ("linear barrier", linear_barrier),
        ("barrier closed form vs RK4", barrier_closed_form),
        ("concavity preservation", concavity),
        ("epsilon monotonicity", epsilon_monotonicity),
        ("signal gradient bound", signal_gradient_bound),
        ("threshold reproduction", threshold_reproduction),
        ("sufficiency predicate", sufficiency_predicate),
        ("moment quadrature", moment_quadrature),
        ("Riccati blow-up time", riccati_time),
        ("blow-up run", blowup_run_criterion),
        ("comparison checker", comparison_checker),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("{} criterion {:>2}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
