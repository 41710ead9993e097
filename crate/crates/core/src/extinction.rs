//! Finite-time prey extinction, analytic bounds and the refuge threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{self, IntegratorOptions, Termination, UState, UTermination};
use crate::model::{ModelParams, State};

/// Bounds from positivity, boundedness and dissipativity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub delta: f64,
    /// `(a1 + delta)^2 / (4 b1)`.
    pub w1_bound: f64,
    /// `W1 / delta`, bound on `x1 + x2` past a transient.
    pub q_bound: f64,
    /// `false` when `w0 < w1`: the `W1 / delta` bound is then not guaranteed.
    pub hypothesis_holds: bool,
    pub eps1: f64,
    /// `(a1 + a2)(a1/b1 + eps1)`.
    pub k1: f64,
    /// Predator bound `w1 / (w0 a2) * K1`.
    pub k2: f64,
    pub notes: Vec<String>,
}

/// `W1` and `W1 / delta`. Requires `0 < delta <= a2`.
pub fn boundedness_bound(p: &ModelParams, delta: f64) -> Result<(f64, f64, bool)> {
    if !(delta > 0.0 && delta <= p.a2) {
        return Err(Error::Precondition(format!("delta = {delta} must lie in (0, a2 = {}]", p.a2)));
    }
    let w1_bound = (p.a1 + delta).powi(2) / (4.0 * p.b1);
    Ok((w1_bound, w1_bound / delta, p.w0 >= p.w1))
}

/// Default margin `eps1 = 0.01 a1/b1`.
pub fn default_eps1(p: &ModelParams) -> f64 {
    0.01 * p.carrying_capacity()
}

/// `(K1, K2)` for a margin `eps1 >= 0`.
pub fn dissipative_bound_k2(p: &ModelParams, eps1: f64) -> Result<(f64, f64)> {
    if !(eps1 >= 0.0 && eps1.is_finite()) {
        return Err(Error::Precondition(format!("eps1 = {eps1} must be >= 0")));
    }
    let k1 = (p.a1 + p.a2) * (p.carrying_capacity() + eps1);
    Ok((k1, p.w1 / (p.w0 * p.a2) * k1))
}

pub fn bounds_report(p: &ModelParams, delta: f64, eps1: f64) -> Result<BoundsReport> {
    let (w1_bound, q_bound, hypothesis_holds) = boundedness_bound(p, delta)?;
    let (k1, k2) = dissipative_bound_k2(p, eps1)?;
    let mut notes = Vec::new();
    if !hypothesis_holds {
        notes.push(format!("w0 < w1: bound not guaranteed (w0 = {}, w1 = {})", p.w0, p.w1));
    }
    Ok(BoundsReport { delta, w1_bound, q_bound, hypothesis_holds, eps1, k1, k2, notes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedExtinction {
    /// Termination of the `(x1, x2)` run.
    pub termination: Termination,
    /// Blow-up time of the `u = 1/x1` run, when it blew up.
    pub blowup_time: Option<f64>,
    /// `|T - T'| / T` when both times exist.
    pub relative_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionVerdict {
    pub criterion_met: bool,
    pub u0: f64,
    /// `x1(0)^(1-m1) (x1(0) + d)^m1`.
    pub lhs: f64,
    /// `w0 / a1`.
    pub threshold_rhs: f64,
    pub simulated: Option<SimulatedExtinction>,
    pub notes: Vec<String>,
}

/// The extinction criterion in its `x1` form: `(lhs, rhs)` with the
/// criterion met iff `lhs <= rhs`.
pub fn criterion_x_form(x1_0: f64, p: &ModelParams) -> (f64, f64) {
    (x1_0.powf(1.0 - p.m1) * (x1_0 + p.d).powf(p.m1), p.w0 / p.a1)
}

/// The same criterion in the `u = 1/x1` form: `a1 u0 (1 + d u0)^m1 <= w0 u0^2`.
pub fn criterion_u_form(u0: f64, p: &ModelParams) -> bool {
    p.a1 * u0 * (1.0 + p.d * u0).powf(p.m1) <= p.w0 * u0 * u0
}

/// Sufficient initial prey condition for finite-time extinction, given a
/// large enough initial predator density. Refuge is ignored.
pub fn extinction_ic_condition(x1_0: f64, p: &ModelParams) -> Result<ExtinctionVerdict> {
    if !(x1_0 > 0.0 && x1_0.is_finite()) {
        return Err(Error::Domain(format!("x1(0) = {x1_0} must be positive")));
    }
    let u0 = 1.0 / x1_0;
    let (lhs, threshold_rhs) = criterion_x_form(x1_0, p);
    Ok(ExtinctionVerdict {
        criterion_met: criterion_u_form(u0, p),
        u0,
        lhs,
        threshold_rhs,
        simulated: None,
        notes: vec!["criterion uses w0/a1".to_string()],
    })
}

/// Runs the `x` and `u` systems from `ic` and attaches the outcome.
pub fn simulate_extinction(p: &ModelParams, ic: State, opts: &IntegratorOptions) -> Result<ExtinctionVerdict> {
    let mut verdict = extinction_ic_condition(ic.x1, p)?;
    let traj = integrator::integrate(p, ic, opts)?;
    let u = integrator::integrate_u_system(p, UState { u: 1.0 / ic.x1, x2: ic.x2 }, opts)?;
    let blowup_time = match u.termination {
        UTermination::Blowup { time } => Some(time),
        _ => None,
    };
    let relative_gap = match (traj.prey_extinction_time(), blowup_time) {
        (Some(t), Some(tu)) if t > 0.0 => Some((t - tu).abs() / t),
        _ => None,
    };
    if verdict.criterion_met && traj.prey_extinction_time().is_none() {
        verdict.notes.push("criterion sufficient only with large x2(0)".to_string());
    }
    verdict.simulated = Some(SimulatedExtinction { termination: traj.termination, blowup_time, relative_gap });
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefugeThreshold {
    /// Threshold clamped to `(0, 1]`.
    pub r_star: f64,
    /// Unclamped value of the bound.
    pub raw: f64,
    /// `v(0) = 1/x1(0) - b1/a1`.
    pub v0: f64,
    pub k2: f64,
    pub notes: Vec<String>,
}

/// Refuge level below which the prey started at `x1_0` cannot die out in
/// finite time while the predator stays below `k2`.
pub fn refuge_threshold(x1_0: f64, p: &ModelParams, k2: f64) -> Result<RefugeThreshold> {
    let k = p.carrying_capacity();
    if !(x1_0 > 0.0 && x1_0 < k) {
        return Err(Error::Precondition(format!("x1(0) = {x1_0} must lie in (0, a1/b1 = {k})")));
    }
    if !(k2 > 0.0 && k2.is_finite()) {
        return Err(Error::Precondition(format!("K2 = {k2} must be positive")));
    }
    let v0 = 1.0 / x1_0 - p.b1 / p.a1;
    if v0 <= 0.0 {
        return Err(Error::Precondition(format!("v(0) = {v0} must be positive")));
    }
    let inner = p.a1 * p.d.powf(p.m1) * v0 / (p.w0 * (p.b1 / p.a1 + v0).powf(2.0 - p.m1) * k2.powf(p.m2));
    let raw = inner.powf(1.0 / p.m1);
    let mut notes = Vec::new();
    let r_star = if raw >= 1.0 {
        notes.push(format!("bound {raw:.6} >= 1: any refuge level (or none) suffices"));
        1.0
    } else {
        raw
    };
    Ok(RefugeThreshold { r_star, raw, v0, k2, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Persistence {
    /// No extinction up to the horizon. Not a proof of persistence beyond it.
    Persistent { horizon: f64, min_x1: f64 },
    ExtinctAt { time: f64 },
}

/// Simulates `ic` over `horizon` with the refuge stored in `p`.
pub fn verify_persistence(p: &ModelParams, ic: State, horizon: f64, opts: &IntegratorOptions) -> Result<Persistence> {
    let opts = opts.with_horizon(horizon);
    let traj = integrator::integrate(p, ic, &opts)?;
    match traj.termination {
        Termination::PreyExtinct { time } => Ok(Persistence::ExtinctAt { time }),
        Termination::StepFailure { time, reason } => Err(Error::Integration { time, reason }),
        _ => {
            let min_x1 = traj.states.iter().map(|s| s.x1).fold(f64::INFINITY, f64::min);
            if min_x1 > opts.extinction_threshold {
                Ok(Persistence::Persistent { horizon, min_x1 })
            } else {
                Ok(Persistence::ExtinctAt { time: traj.final_time() })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_set() -> ModelParams {
        ModelParams::new(0.6, 1.0, 0.063, 1.0, 2.0, 2.0, 0.8, 1.0).unwrap()
    }

    #[test]
    fn boundedness_arithmetic() {
        let p = base_set();
        let r = bounds_report(&p, 1.0, 0.01).unwrap();
        assert!((r.w1_bound - 1.6f64.powi(2) / 0.252).abs() < 1e-12);
        assert!(!r.hypothesis_holds);
        assert!(r.notes[0].contains("w0 < w1: bound not guaranteed"));
        let sym = ModelParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (w, q, ok) = boundedness_bound(&sym, 1.0).unwrap();
        assert_eq!((w, q, ok), (1.0, 1.0, true));
        assert!(boundedness_bound(&p, 1.5).is_err());
    }

    #[test]
    fn k2_arithmetic() {
        let p = base_set();
        let (k1, k2) = dissipative_bound_k2(&p, 0.01).unwrap();
        assert!((k1 - 1.6 * (0.6 / 0.063 + 0.01)).abs() < 1e-12);
        assert!((k1 - 15.254).abs() < 1e-3 && (k2 - 30.508).abs() < 2e-3);
        let (k1, _) = dissipative_bound_k2(&p, 0.0).unwrap();
        assert!((k1 - 1.6 * 0.6 / 0.063).abs() < 1e-12);
        assert!(dissipative_bound_k2(&p, -1.0).is_err());
    }

    #[test]
    fn criterion_values() {
        let p = base_set();
        let at = |x: f64| extinction_ic_condition(x, &p).unwrap();
        let v5 = at(0.5);
        assert!(!v5.criterion_met && (v5.lhs - 1.811949).abs() < 1e-6);
        let v3 = at(0.3);
        assert!(v3.criterion_met && (v3.lhs - 1.530406).abs() < 1e-6);
        assert!((v3.threshold_rhs - 1.0 / 0.6).abs() < 1e-15);
        assert!(extinction_ic_condition(0.0, &p).is_err());
    }

    #[test]
    fn criterion_linear_case() {
        let p = ModelParams { m1: 1.0, w0: 5.0, ..base_set() };
        // x1 + d <= w0/a1 = 8.333
        assert!(extinction_ic_condition(6.3, &p).unwrap().criterion_met);
        assert!(!extinction_ic_condition(6.4, &p).unwrap().criterion_met);
    }

    #[test]
    fn refuge_threshold_base_set() {
        let p = base_set();
        let (_, k2) = dissipative_bound_k2(&p, 0.01).unwrap();
        let t = refuge_threshold(0.3, &p, k2).unwrap();
        assert!((t.v0 - (1.0 / 0.3 - 0.105)).abs() < 1e-12);
        let manual = (0.6 * 2f64.powf(0.8) * t.v0 / ((0.105 + t.v0).powf(1.2) * k2)).powf(1.25);
        assert!((t.r_star - manual).abs() < 1e-15);
        assert!(t.r_star > 0.0 && t.r_star < 1.0);
        assert!(refuge_threshold(p.carrying_capacity(), &p, k2).is_err());
        assert!(refuge_threshold(0.2, &p, k2).unwrap().r_star < t.r_star);
        assert!(t.r_star < refuge_threshold(0.4, &p, k2).unwrap().r_star);
    }

    #[test]
    fn prey_axis_persists() {
        let p = base_set();
        let v = verify_persistence(&p, State::new(0.3, 0.0), 100.0, &IntegratorOptions::default()).unwrap();
        assert!(matches!(v, Persistence::Persistent { .. }));
    }

    #[test]
    fn base_set_extinction_and_duality() {
        let p = base_set();
        let v = simulate_extinction(&p, State::new(0.3, 50.0), &IntegratorOptions::default()).unwrap();
        let sim = v.simulated.unwrap();
        assert!(matches!(sim.termination, Termination::PreyExtinct { .. }));
        assert!(sim.relative_gap.unwrap() < 0.05, "{sim:?}");
    }
}
