//! Nullclines and the separatrices `W^u(E1)`, `W^s(E0)`.
//!
//! `W^s(E0)` separates starts that reach `x1 = 0` in finite time from those
//! that do not. It is located on vertical probe lines by bisection in
//! `x2(0)`, using only forward integration: an orbit started above the prey
//! nullcline "dies" when it hits the extinction threshold before `x1`
//! reaches its first local minimum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria;
use crate::error::{Error, Result};
use crate::extinction;
use crate::integrator::{self, IntegratorOptions, Termination, Trajectory};
use crate::model::{self, ModelParams, State};
use crate::roots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveLabel {
    PreyNullcline,
    PredatorNullcline,
    UnstableManifoldE1,
    StableSeparatrixE0,
}

impl CurveLabel {
    pub fn name(self) -> &'static str {
        match self {
            CurveLabel::PreyNullcline => "prey_nullcline",
            CurveLabel::PredatorNullcline => "predator_nullcline",
            CurveLabel::UnstableManifoldE1 => "unstable_manifold_e1",
            CurveLabel::StableSeparatrixE0 => "stable_separatrix_e0",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarCurve {
    pub label: CurveLabel,
    pub points: Vec<State>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    WsAboveWu,
    WuAboveWs,
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixPosition {
    pub verdict: Verdict,
    /// Smallest `|x2_Ws - x2_Wu|` over the compared range.
    pub margin: f64,
    /// Compared `x1` range.
    pub x1_lo: f64,
    pub x1_hi: f64,
}

/// `psi(x1) = x1 f(x1) / (w0 g(r x1))`, the prey nullcline for `m2 = 1`.
pub fn psi(x1: f64, p: &ModelParams) -> f64 {
    x1 * model::eval_f(x1, p) / (p.w0 * model::response(x1, p))
}

/// Derivative of [`psi`].
pub fn psi_prime(x1: f64, p: &ModelParams) -> f64 {
    let f = model::eval_f(x1, p);
    let bracket = (p.a1 - 2.0 * p.b1 * x1) - f * p.m1 * p.d / (p.r * x1 + p.d);
    bracket / (p.w0 * model::response(x1, p))
}

fn nullcline_points(p: &ModelParams, lo: f64, hi: f64, n: usize, exponent: f64) -> Result<Vec<State>> {
    let k = p.carrying_capacity();
    if n < 2 {
        return Err(Error::Precondition("nullcline needs at least 2 points".into()));
    }
    if !(lo > 0.0 && lo < hi && hi <= k) {
        return Err(Error::Domain(format!("x1 range [{lo}, {hi}] must lie in (0, a1/b1 = {k}]")));
    }
    if p.r <= 0.0 {
        return Err(Error::Domain("r = 0: no predation, no prey nullcline".into()));
    }
    Ok((0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            State::new(x, psi(x, p).max(0.0).powf(exponent))
        })
        .collect())
}

/// Samples `x2 = psi(x1)` on `n` uniform points of `[lo, hi]`. Requires `m2 = 1`.
pub fn prey_nullcline(p: &ModelParams, x1_range: (f64, f64), n: usize) -> Result<PlanarCurve> {
    if p.m2 != 1.0 {
        return Err(Error::Domain(format!("psi is defined for m2 = 1 (m2 = {}); use prey_nullcline_general", p.m2)));
    }
    Ok(PlanarCurve { label: CurveLabel::PreyNullcline, points: nullcline_points(p, x1_range.0, x1_range.1, n, 1.0)? })
}

/// Prey nullcline for any `m2`: `x2 = psi(x1)^(1/m2)`.
pub fn prey_nullcline_general(p: &ModelParams, x1_range: (f64, f64), n: usize) -> Result<PlanarCurve> {
    Ok(PlanarCurve {
        label: CurveLabel::PreyNullcline,
        points: nullcline_points(p, x1_range.0, x1_range.1, n, 1.0 / p.m2)?,
    })
}

/// Vertical predator nullcline `x1 = x1*` over `[0, x2_max]`.
pub fn predator_nullcline(p: &ModelParams, x2_max: f64, n: usize) -> Result<PlanarCurve> {
    let x1 = equilibria::predator_nullcline_x1(p)?;
    if n < 2 || !(x2_max > 0.0) {
        return Err(Error::Precondition("predator nullcline needs n >= 2 and x2_max > 0".into()));
    }
    Ok(PlanarCurve {
        label: CurveLabel::PredatorNullcline,
        points: (0..n).map(|i| State::new(x1, x2_max * i as f64 / (n - 1) as f64)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldOptions {
    /// Seed offset from E1, relative to `a1/b1`.
    pub eps: f64,
    /// Stop once `x1 + x2` exceeds this multiple of the dissipativity bound.
    pub cap_factor: f64,
    pub integrator: IntegratorOptions,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        ManifoldOptions { eps: 1e-6, cap_factor: 10.0, integrator: IntegratorOptions::default() }
    }
}

/// Unit eigenvector of the unstable direction at E1 pointing into the quadrant,
/// and its eigenvalue. Requires `m2 = 1` and E1 a saddle.
pub fn e1_unstable_direction(p: &ModelParams) -> Result<(State, f64)> {
    if p.m2 != 1.0 {
        return Err(Error::Precondition(format!("E1 is not linearizable for m2 = {} < 1", p.m2)));
    }
    let k = p.carrying_capacity();
    let g = model::response(k, p);
    let lambda = -p.a2 + p.w1 * g;
    if lambda <= 0.0 {
        return Err(Error::Precondition(format!(
            "E1 is not a saddle (transverse eigenvalue {lambda:.6e} <= 0)"
        )));
    }
    let v = State::new(-p.w0 * g, lambda + p.a1);
    let n = v.norm();
    Ok((State::new(v.x1 / n, v.x2 / n), lambda))
}

fn manifold_seed(p: &ModelParams, eps: f64) -> Result<State> {
    let (v, _) = e1_unstable_direction(p)?;
    let k = p.carrying_capacity();
    Ok(State::new(k + eps * k * v.x1, eps * k * v.x2))
}

fn cap(p: &ModelParams, factor: f64) -> Result<f64> {
    let (_, k2) = extinction::dissipative_bound_k2(p, extinction::default_eps1(p))?;
    Ok(factor * (p.carrying_capacity() + k2))
}

/// Forward orbit of the unstable manifold of E1, until the horizon, a
/// boundedness cap or prey extinction.
pub fn trace_unstable_manifold_e1(p: &ModelParams, opts: &ManifoldOptions) -> Result<(PlanarCurve, Termination)> {
    let seed = manifold_seed(p, opts.eps)?;
    let cap = cap(p, opts.cap_factor)?;
    let traj = integrator::integrate_until(p, seed, &opts.integrator, |s| cap - (s.x1 + s.x2))?;
    let mut points = vec![State::new(p.carrying_capacity(), 0.0)];
    points.extend(traj.states);
    Ok((PlanarCurve { label: CurveLabel::UnstableManifoldE1, points }, traj.termination))
}

/// Leading arc of `W^u(E1)`: from E1 until `x1` first stops decreasing or
/// the prey dies. This arc is a graph over `x1`.
pub fn unstable_manifold_leading_arc(p: &ModelParams, opts: &ManifoldOptions) -> Result<(PlanarCurve, Termination)> {
    let seed = manifold_seed(p, opts.eps)?;
    let traj = first_pass(p, seed, &opts.integrator)?;
    let mut points = vec![State::new(p.carrying_capacity(), 0.0)];
    points.extend(traj.states);
    Ok((PlanarCurve { label: CurveLabel::UnstableManifoldE1, points }, traj.termination))
}

/// Integrates until prey extinction or the first local minimum of `x1`.
fn first_pass(p: &ModelParams, ic: State, opts: &IntegratorOptions) -> Result<Trajectory> {
    integrator::integrate_until(p, ic, opts, |s| -model::field(s.x1, s.x2, p)[0])
}

fn dies_first_pass(p: &ModelParams, ic: State, opts: &IntegratorOptions) -> Result<bool> {
    let traj = first_pass(p, ic, opts)?;
    match traj.termination {
        Termination::PreyExtinct { .. } => Ok(true),
        Termination::StepFailure { time, reason } => Err(Error::Integration { time, reason }),
        _ => Ok(false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatrixOptions {
    /// Number of probe lines in the fan.
    pub probes: usize,
    /// Fan limits, as fractions of `a1/b1`.
    pub lo_frac: f64,
    pub hi_frac: f64,
    /// Relative bisection tolerance in `x2`.
    pub bisect_rel_tol: f64,
    /// Upper search limit, as a multiple of the predator bound `K2`.
    pub cap_factor: f64,
    pub horizon: f64,
    pub integrator: IntegratorOptions,
}

impl Default for SeparatrixOptions {
    fn default() -> Self {
        SeparatrixOptions {
            probes: 12,
            lo_frac: 0.05,
            hi_frac: 0.95,
            bisect_rel_tol: 1e-8,
            cap_factor: 1e3,
            horizon: 500.0,
            integrator: IntegratorOptions::default(),
        }
    }
}

impl SeparatrixOptions {
    /// Probe abscissae, geometrically spaced.
    pub fn probe_lines(&self, p: &ModelParams) -> Vec<f64> {
        let k = p.carrying_capacity();
        let (lo, hi) = (self.lo_frac * k, self.hi_frac * k);
        if self.probes == 1 {
            return vec![(lo * hi).sqrt()];
        }
        (0..self.probes)
            .map(|i| lo * (hi / lo).powf(i as f64 / (self.probes - 1) as f64))
            .collect()
    }

    fn integrator_options(&self) -> IntegratorOptions {
        self.integrator.with_horizon(self.horizon)
    }
}

/// Result of a bisection on one probe line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProbeOutcome {
    /// Starts above `x2` die, starts below do not.
    Boundary { x1: f64, x2: f64, lo: f64, hi: f64 },
    /// Even the start just above the prey nullcline dies: no crossing here.
    AllDie { x1: f64, x2_low: f64 },
}

fn check_separatrix_preconditions(p: &ModelParams) -> Result<()> {
    if p.m2 != 1.0 {
        return Err(Error::Precondition(format!("separatrix tracing needs m2 = 1 (m2 = {})", p.m2)));
    }
    if !(p.m1 > 0.0 && p.m1 < 1.0) {
        return Err(Error::Precondition(format!(
            "no finite-time extinction for m1 = {}; W^s(E0) needs 0 < m1 < 1",
            p.m1
        )));
    }
    if p.r <= 0.0 {
        return Err(Error::Precondition("r = 0: prey cannot die out".into()));
    }
    Ok(())
}

/// Bisects on the line `x1 = probe_x1` for the boundary of finite-time extinction.
///
/// Errors with `NotFound` when nothing dies up to `cap_factor * K2`.
pub fn separatrix_boundary(p: &ModelParams, probe_x1: f64, opts: &SeparatrixOptions) -> Result<ProbeOutcome> {
    check_separatrix_preconditions(p)?;
    let k = p.carrying_capacity();
    if !(probe_x1 > 0.0 && probe_x1 < k) {
        return Err(Error::Domain(format!("probe x1 = {probe_x1} must lie in (0, a1/b1 = {k})")));
    }
    let iopts = opts.integrator_options();
    let (_, k2) = extinction::dissipative_bound_k2(p, extinction::default_eps1(p))?;
    let low = psi(probe_x1, p) * (1.0 + 1e-9) + f64::MIN_POSITIVE;
    let high = opts.cap_factor * k2;
    let dies = |x2: f64| dies_first_pass(p, State::new(probe_x1, x2), &iopts);
    if dies(low)? {
        return Ok(ProbeOutcome::AllDie { x1: probe_x1, x2_low: low });
    }
    if high <= low || !dies(high)? {
        return Err(Error::NotFound(format!(
            "no finite-time extinction on x1 = {probe_x1} up to x2 = {high:.6e}"
        )));
    }
    let mut failure = None;
    let (lo, hi) = roots::bisect_predicate(
        |x2| match dies(x2) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                true
            }
        },
        low,
        high,
        opts.bisect_rel_tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ProbeOutcome::Boundary { x1: probe_x1, x2: 0.5 * (lo + hi), lo, hi })
}

/// `W^s(E0)` assembled from the probe fan. Probes without a crossing are
/// skipped; the outcomes of all probes are returned alongside.
pub fn trace_stable_separatrix_e0(p: &ModelParams, opts: &SeparatrixOptions) -> Result<(PlanarCurve, Vec<ProbeOutcome>)> {
    check_separatrix_preconditions(p)?;
    let outcomes: Vec<ProbeOutcome> = opts
        .probe_lines(p)
        .into_par_iter()
        .map(|x| separatrix_boundary(p, x, opts))
        .collect::<Result<_>>()?;
    let points: Vec<State> = outcomes
        .iter()
        .filter_map(|o| match o {
            ProbeOutcome::Boundary { x1, x2, .. } => Some(State::new(*x1, *x2)),
            ProbeOutcome::AllDie { .. } => None,
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::NotFound(format!("separatrix crosses only {} probe line(s)", points.len())));
    }
    Ok((PlanarCurve { label: CurveLabel::StableSeparatrixE0, points }, outcomes))
}

/// Piecewise-linear interpolation of `x2` at `x` on a curve sorted by `x1`.
fn interpolate(sorted: &[State], x: f64) -> f64 {
    let i = sorted.partition_point(|s| s.x1 < x);
    if i == 0 {
        return sorted[0].x2;
    }
    if i == sorted.len() {
        return sorted[sorted.len() - 1].x2;
    }
    let (a, b) = (sorted[i - 1], sorted[i]);
    if b.x1 == a.x1 {
        return b.x2;
    }
    a.x2 + (b.x2 - a.x2) * (x - a.x1) / (b.x1 - a.x1)
}

fn sorted_by_x1(c: &PlanarCurve) -> Vec<State> {
    let mut v = c.points.clone();
    v.sort_by(|a, b| a.x1.total_cmp(&b.x1));
    v
}

/// Compares two curves on a shared `x1` grid over their common range.
pub fn separatrix_relative_position(ws: &PlanarCurve, wu: &PlanarCurve) -> Result<SeparatrixPosition> {
    if ws.points.len() < 2 || wu.points.len() < 2 {
        return Err(Error::Precondition("curves need at least 2 points".into()));
    }
    let (a, b) = (sorted_by_x1(ws), sorted_by_x1(wu));
    let lo = a[0].x1.max(b[0].x1);
    let hi = a[a.len() - 1].x1.min(b[b.len() - 1].x1);
    if !(hi > lo) {
        return Err(Error::Domain(format!("curves share no x1 range ([{lo}, {hi}])")));
    }
    let n = 400;
    let gaps: Vec<f64> = (0..=n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            interpolate(&a, x) - interpolate(&b, x)
        })
        .collect();
    let verdict = if gaps.iter().all(|&g| g > 0.0) {
        Verdict::WsAboveWu
    } else if gaps.iter().all(|&g| g < 0.0) {
        Verdict::WuAboveWs
    } else {
        Verdict::Crossing
    };
    let margin = gaps.iter().map(|g| g.abs()).fold(f64::INFINITY, f64::min);
    Ok(SeparatrixPosition { verdict, margin, x1_lo: lo, x1_hi: hi })
}

/// Full diagnostic: trace both separatrices and compare them.
pub fn separatrix_diagnostic(
    p: &ModelParams,
    sep: &SeparatrixOptions,
    man: &ManifoldOptions,
) -> Result<(SeparatrixPosition, PlanarCurve, PlanarCurve, Vec<ProbeOutcome>)> {
    let (ws, outcomes) = trace_stable_separatrix_e0(p, sep)?;
    let (wu, _) = unstable_manifold_leading_arc(p, man)?;
    let pos = separatrix_relative_position(&ws, &wu)?;
    Ok((pos, ws, wu, outcomes))
}
