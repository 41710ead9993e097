//! Acceptance checks. Each test prints one PASS/FAIL line, then asserts.

use std::io::Write;

use num_complex::Complex64;
use predprey::bifurcation::{self, BifurcationEvent, BifurcationKind};
use predprey::equilibria::{self, DEFAULT_SCAN_POINTS};
use predprey::extinction::{self, Persistence};
use predprey::geometry::{self, ManifoldOptions, SeparatrixOptions, Verdict};
use predprey::integrator::{self, IntegratorOptions, Termination};
use predprey::io;
use predprey::model::{self, AssumptionGrid, ModelParams, Param, State};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn base_set() -> ModelParams {
    ModelParams::new(0.6, 1.0, 0.063, 1.0, 2.0, 2.0, 0.8, 1.0).unwrap()
}

fn bistable_set() -> ModelParams {
    ModelParams::new(0.5, 0.7, 0.05, 0.2, 4.0, 0.2, 0.5, 0.5).unwrap()
}

fn report(id: u32, name: &str, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "{verdict} criterion {id:>2} {name}: {detail}").unwrap();
    out.flush().unwrap();
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn interior_points(p: &ModelParams) -> Vec<State> {
    equilibria::interior_equilibria(p, DEFAULT_SCAN_POINTS).unwrap().iter().map(|e| e.point).collect()
}

#[test]
fn criterion_01_equilibria() {
    let mut lines = Vec::new();
    let mut ok = true;
    let cases: [(ModelParams, &[(f64, f64)], f64); 2] = [
        (base_set(), &[(1.45094, 1.47587)], 1e-4),
        (bistable_set(), &[(3.12437, 30.6886), (6.67563, 31.7032)], 1e-3),
    ];
    for (p, expected, tol) in cases {
        let found = interior_points(&p);
        ok &= found.len() == expected.len();
        for &(x1, x2) in expected {
            let best = found
                .iter()
                .map(|s| (s.x1 - x1).abs().max((s.x2 - x2).abs()))
                .fold(f64::INFINITY, f64::min);
            ok &= best <= tol;
            lines.push(format!("({x1}, {x2}) err {best:.1e}"));
        }
    }
    report(1, "equilibrium reproduction", ok, &lines.join(", "));
}

fn sorted_real(ev: [Complex64; 2]) -> [f64; 2] {
    let mut v = [ev[0].re, ev[1].re];
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn criterion_02_eigenvalues() {
    let refuge = bistable_set().with_refuge(0.3).unwrap();
    let cases = [
        (bistable_set(), [[-0.343043, 0.170265], [-0.34517, -0.17481]]),
        (refuge, [[-0.32246, 0.19897], [-0.33157, -0.22790]]),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (p, expected) in cases {
        let eqs = equilibria::interior_equilibria(&p, DEFAULT_SCAN_POINTS).unwrap();
        ok &= eqs.len() == 2;
        for want in expected {
            let err = eqs
                .iter()
                .filter_map(|e| e.eigenvalues())
                .filter(|ev| ev[0].im == 0.0 && ev[1].im == 0.0)
                .map(|ev| {
                    let got = sorted_real(ev);
                    (got[0] - want[0]).abs().max((got[1] - want[1]).abs())
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(err);
        }
    }
    ok &= worst <= 1e-3;
    report(2, "eigenvalue reproduction", ok, &format!("max abs error {worst:.2e}"));
}

fn single(events: Vec<BifurcationEvent>, kind: BifurcationKind) -> Option<BifurcationEvent> {
    let mut hits: Vec<_> = events.into_iter().filter(|e| e.kind == kind).collect();
    if hits.len() == 1 {
        hits.pop()
    } else {
        None
    }
}

#[test]
fn criterion_03_hopf() {
    let base = base_set();
    let refuge = base.with_refuge(0.3).unwrap();
    let cases = [
        ("a1* base", base, Param::A1, 0.2, 0.4, 0.261835),
        ("a1* r=0.3", refuge, Param::A1, 0.5, 1.2, 0.87278),
        ("r**", base, Param::R, 0.3, 0.8, 0.43639),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, p, param, lo, hi, want) in cases {
        let branch = bifurcation::branch_sweep(&p, param, lo, hi, 200).unwrap();
        match single(bifurcation::detect_hopf(&branch), BifurcationKind::Hopf) {
            Some(e) => {
                let err = rel(e.critical_value, want);
                let l1 = e.diagnostic("lyapunov_coefficient").unwrap_or(f64::NAN);
                ok &= err <= 1e-3 && l1 < 0.0;
                lines.push(format!("{name} = {:.6} (rel {err:.1e}, l1 {l1:.3e})", e.critical_value));
            }
            None => {
                ok = false;
                lines.push(format!("{name}: no unique Hopf point"));
            }
        }
    }
    report(3, "Hopf critical values", ok, &lines.join(", "));
}

#[test]
fn criterion_04_saddle_nodes() {
    let base = bistable_set();
    let refuge = base.with_refuge(0.3).unwrap();
    let cases = [
        (base, Param::A1, 0.40, 0.55, 0.46809),
        (base, Param::A2, 0.55, 0.75, 0.61515),
        (base, Param::W0, 0.18, 0.26, 0.22759),
        (base, Param::W1, 4.0, 4.8, 4.55175),
        (base, Param::B1, 0.045, 0.065, 0.05722),
        (refuge, Param::A1, 0.40, 0.55, 0.44476),
        (refuge, Param::A2, 0.50, 0.65, 0.5625),
        (refuge, Param::W0, 0.20, 0.30, 0.24889),
        (refuge, Param::W1, 4.5, 5.5, 4.97778),
        (refuge, Param::B1, 0.055, 0.07, 0.064498),
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut missing = Vec::new();
    for (p, param, lo, hi, want) in cases {
        let branch = bifurcation::branch_sweep(&p, param, lo, hi, 200).unwrap();
        match single(bifurcation::detect_saddle_node(&branch), BifurcationKind::SaddleNode) {
            Some(e) => worst = worst.max(rel(e.critical_value, want)),
            None => {
                ok = false;
                missing.push(format!("{}(r={})", param.name(), p.r));
            }
        }
    }
    ok &= worst <= 1e-2;
    let detail = if missing.is_empty() {
        format!("10 folds, max rel error {worst:.2e}")
    } else {
        format!("no unique fold for {}", missing.join(", "))
    };
    report(4, "saddle-node suite", ok, &detail);
}

#[test]
fn criterion_05_transcritical() {
    let p = base_set();
    // E1 loses stability when w1 g(r K) = a2
    let k = p.a1 / p.b1;
    let c = (p.a2 / p.w1).powf(1.0 / p.m1);
    let oracle = c * p.d / (k * (1.0 - c));
    let t = bifurcation::transcritical_r(&p).unwrap();
    let branch = bifurcation::branch_sweep(&p.with_refuge(0.5).unwrap(), Param::R, 0.1, 0.5, 200).unwrap();
    let detected = single(bifurcation::detect_transcritical(&branch), BifurcationKind::Transcritical);
    let near = p.with_refuge(t.as_derived * (1.0 + 1e-3)).unwrap();
    let x1_near = interior_points(&near).iter().map(|s| s.x1).fold(0.0, f64::max);
    let ok = (t.as_derived - 0.15239).abs() <= 1e-3
        && rel(t.as_derived, oracle) <= 1e-12
        && detected.as_ref().is_some_and(|e| rel(e.critical_value, t.as_derived) <= 1e-3)
        && rel(x1_near, k) <= 1e-2;
    report(
        5,
        "transcritical threshold",
        ok,
        &format!(
            "r1* = {:.6} (closed form {oracle:.6}), sweep {:?}, x1* at r1*(1+1e-3) = {x1_near:.4} vs K = {k:.4}",
            t.as_derived,
            detected.map(|e| e.critical_value)
        ),
    );
}

#[test]
fn criterion_06_separatrix() {
    let fast = ModelParams { a1: 2.0, b1: 0.21, ..base_set() };
    let cases = [
        ("base", base_set(), Verdict::WsAboveWu),
        ("a1=2,b1=0.21", fast, Verdict::WuAboveWs),
        ("a1=2,b1=0.21,r=0.3", fast.with_refuge(0.3).unwrap(), Verdict::WsAboveWu),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, p, want) in cases {
        match geometry::separatrix_diagnostic(&p, &SeparatrixOptions::default(), &ManifoldOptions::default()) {
            Ok((pos, ..)) => {
                ok &= pos.verdict == want;
                lines.push(format!("{name} {:?}", pos.verdict));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{name} error {e}"));
            }
        }
    }
    report(6, "separatrix geometry", ok, &lines.join(", "));
}

#[test]
fn criterion_07_finite_time_extinction() {
    let p = base_set();
    let opts = IntegratorOptions::default();
    let v = extinction::simulate_extinction(&p, State::new(0.3, 50.0), &opts).unwrap();
    let sim = v.simulated.unwrap();
    let t = match sim.termination {
        Termination::PreyExtinct { time } => time,
        _ => f64::NAN,
    };
    let gap = sim.relative_gap.unwrap_or(f64::INFINITY);
    let doubled = integrator::integrate(&p, State::new(0.3, 100.0), &opts).unwrap();
    let t2 = doubled.prey_extinction_time().unwrap_or(f64::INFINITY);
    let ok = t.is_finite() && gap <= 0.05 && t2 < t;
    report(
        7,
        "finite-time extinction",
        ok,
        &format!("T = {t:.6}, blow-up {:?}, gap {gap:.2e}, T(x2 doubled) = {t2:.6}", sim.blowup_time),
    );
}

#[test]
fn criterion_08_refuge_persistence() {
    let p = base_set();
    let (_, k2) = extinction::dissipative_bound_k2(&p, extinction::default_eps1(&p)).unwrap();
    let r_star = extinction::refuge_threshold(0.3, &p, k2).unwrap().r_star;
    let shielded = p.with_refuge(0.9 * r_star).unwrap();
    let verdict =
        extinction::verify_persistence(&shielded, State::new(0.3, 50.0), 500.0, &IntegratorOptions::default()).unwrap();
    let ok = matches!(verdict, Persistence::Persistent { horizon, .. } if horizon >= 500.0);
    report(8, "refuge persistence", ok, &format!("r* = {r_star:.6e}, r = 0.9 r*: {verdict:?}"));
}

fn reference_rhs(p: &ModelParams, x1: f64, x2: f64) -> [f64; 2] {
    let g = (p.r * x1 / (p.r * x1 + p.d)).powf(p.m1);
    let h = x2.powf(p.m2);
    [p.a1 * x1 - p.b1 * x1 * x1 - p.w0 * g * h, -p.a2 * x2 + p.w1 * g * h]
}

fn jacobian_fd_error(p: &ModelParams, s: State) -> f64 {
    let j = equilibria::jacobian(s, p).unwrap();
    let scale = j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst: f64 = 0.0;
    for col in 0..2 {
        let h = 1e-5 * if col == 0 { s.x1 } else { s.x2 };
        let (plus, minus) = if col == 0 {
            (reference_rhs(p, s.x1 + h, s.x2), reference_rhs(p, s.x1 - h, s.x2))
        } else {
            (reference_rhs(p, s.x1, s.x2 + h), reference_rhs(p, s.x1, s.x2 - h))
        };
        for row in 0..2 {
            let fd = (plus[row] - minus[row]) / (2.0 * h);
            let denom = j[row][col].abs().max(1e-3 * scale);
            worst = worst.max((fd - j[row][col]).abs() / denom);
        }
    }
    worst
}

fn sets() -> Vec<(&'static str, ModelParams)> {
    vec![
        ("base", base_set()),
        ("base r=0.3", base_set().with_refuge(0.3).unwrap()),
        ("bistable", bistable_set()),
        ("bistable r=0.3", bistable_set().with_refuge(0.3).unwrap()),
    ]
}

#[test]
fn criterion_09_property_suites() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut failures = Vec::new();

    let mut jac_worst: f64 = 0.0;
    for (name, p) in sets() {
        let k = p.carrying_capacity();
        for _ in 0..50 {
            let s = State::new(rng.gen_range(0.05..1.5) * k, rng.gen_range(0.1..60.0));
            let e = jacobian_fd_error(&p, s);
            jac_worst = jac_worst.max(e);
            if e >= 1e-5 {
                failures.push(format!("{name} jacobian at ({:.3}, {:.3}): {e:.2e}", s.x1, s.x2));
            }
        }
    }

    let mut classical_worst: f64 = 0.0;
    for _ in 0..200 {
        let p = ModelParams::new(
            rng.gen_range(0.1..2.0),
            rng.gen_range(0.1..2.0),
            rng.gen_range(0.01..0.5),
            rng.gen_range(0.1..2.0),
            rng.gen_range(0.1..4.0),
            rng.gen_range(0.1..3.0),
            1.0,
            1.0,
        )
        .unwrap();
        let (x1, x2) = (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0));
        let got = model::rhs(State::new(x1, x2), &p).unwrap();
        let holling = p.w0 * x1 * x2 / (x1 + p.d);
        let want = [p.a1 * x1 - p.b1 * x1 * x1 - holling, -p.a2 * x2 + p.w1 / p.w0 * holling];
        for (g, w) in [got.x1, got.x2].into_iter().zip(want) {
            classical_worst = classical_worst.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    if classical_worst > 1e-14 {
        failures.push(format!("classical limit error {classical_worst:.2e}"));
    }

    let opts = IntegratorOptions::default().with_horizon(300.0);
    let burn_in = 150.0;
    for (name, p) in sets() {
        let k = p.carrying_capacity();
        let (_, k2) = extinction::dissipative_bound_k2(&p, extinction::default_eps1(&p)).unwrap();
        for _ in 0..20 {
            let ic = State::new(rng.gen_range(0.01..2.0) * k, rng.gen_range(0.01..2.0) * k2);
            let traj = integrator::integrate(&p, ic, &opts).unwrap();
            if traj.states.iter().any(|s| !s.is_non_negative()) {
                failures.push(format!("{name} negative state from {ic:?}"));
            }
            let late = traj.times.iter().zip(&traj.states).filter(|(t, _)| **t >= burn_in);
            for (_, s) in late {
                if s.x1 > 1.01 * k || s.x2 > k2 {
                    failures.push(format!("{name} bound exceeded from {ic:?}: {s:?}"));
                    break;
                }
            }
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let p = base_set();
    let traj = integrator::integrate(&p, State::new(2.0, 1.0), &IntegratorOptions::default().with_horizon(50.0)).unwrap();
    let tpath = dir.path().join("trajectory.csv");
    io::write_trajectory(&traj, &tpath).unwrap();
    let back = io::read_trajectory(&tpath).unwrap();
    let same_traj = back.len() == traj.len()
        && back.iter().zip(traj.times.iter().zip(&traj.states)).all(|((t, s), (t0, s0))| t == t0 && s == s0);
    let branch = bifurcation::branch_sweep(&p, Param::A1, 0.2, 0.4, 60).unwrap();
    let bpath = dir.path().join("branch.csv");
    io::write_branch(&branch, &bpath).unwrap();
    let same_branch = io::read_branch(&bpath).unwrap() == io::branch_rows(&branch);
    let events = bifurcation::detect_all(&branch);
    let epath = dir.path().join("events.csv");
    io::write_events(&events, &epath).unwrap();
    let same_events = io::read_events(&epath).unwrap() == events;
    if !(same_traj && same_branch && same_events) {
        failures.push(format!("round trip: trajectory {same_traj}, branch {same_branch}, events {same_events}"));
    }

    let detail = if failures.is_empty() {
        format!("jacobian max rel {jac_worst:.1e}, classical max {classical_worst:.1e}, bounds and round trip ok")
    } else {
        failures.join("; ")
    };
    report(9, "property suites", failures.is_empty(), &detail);
}

#[test]
fn criterion_10_assumptions() {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, p) in [("base", base_set()), ("bistable", bistable_set())] {
        let rep = model::verify_assumptions(&p, AssumptionGrid::default()).unwrap();
        let failed: Vec<_> = rep.checks.iter().filter(|c| c.status != model::CheckStatus::Pass).map(|c| c.id.clone()).collect();
        ok &= failed.is_empty() && rep.checks.len() == 7;
        lines.push(if failed.is_empty() { format!("{name} 7/7") } else { format!("{name} failed {failed:?}") });
    }
    report(10, "assumption checker", ok, &lines.join(", "));
}
