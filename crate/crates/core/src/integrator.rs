//! Adaptive time integration with terminal events.
//!
//! Dormand-Prince 5(4) with a PI step controller. Terminal events (prey or
//! predator density falling to a threshold, blow-up of `u = 1/x1`,
//! caller-supplied stop conditions) are located by bisection on the size
//! of the step that first crosses them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ModelParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Prey (or predator) density at which extinction is declared.
    pub extinction_threshold: f64,
    pub horizon: f64,
    /// `u` value at which the `u = 1/x1` system is declared blown up.
    pub blowup_ceiling: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 1.0,
            min_step: 1e-14,
            extinction_threshold: 1e-9,
            horizon: 500.0,
            blowup_ceiling: 1e12,
        }
    }
}

impl IntegratorOptions {
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.rel_tol > 0.0, "rel_tol must be > 0"),
            (self.abs_tol > 0.0, "abs_tol must be > 0"),
            (self.min_step > 0.0, "min_step must be > 0"),
            (self.min_step < self.max_step, "min_step must be < max_step"),
            (self.extinction_threshold > 0.0, "extinction_threshold must be > 0"),
            (self.horizon > 0.0 && self.horizon.is_finite(), "horizon must be finite and > 0"),
            (self.blowup_ceiling > 0.0, "blowup_ceiling must be > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Options((*msg).to_string())),
            None => Ok(()),
        }
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "PascalCase")]
pub enum Termination {
    HorizonReached,
    PreyExtinct { time: f64 },
    /// Only raised for `m2 < 1`; with `m2 = 1` predator decay is asymptotic.
    PredatorExtinct { time: f64 },
    /// Halted by a caller-supplied stop condition.
    Stopped { time: f64 },
    StepFailure { time: f64, reason: String },
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::HorizonReached => "HorizonReached",
            Termination::PreyExtinct { .. } => "PreyExtinct",
            Termination::PredatorExtinct { .. } => "PredatorExtinct",
            Termination::Stopped { .. } => "Stopped",
            Termination::StepFailure { .. } => "StepFailure",
        }
    }

    pub fn time(&self) -> Option<f64> {
        match self {
            Termination::HorizonReached => None,
            Termination::PreyExtinct { time }
            | Termination::PredatorExtinct { time }
            | Termination::Stopped { time }
            | Termination::StepFailure { time, .. } => Some(*time),
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::HorizonReached => f.write_str("HorizonReached"),
            Termination::StepFailure { time, reason } => write!(f, "StepFailure(t={time}: {reason})"),
            other => write!(f, "{}(t={})", other.name(), other.time().unwrap_or(f64::NAN)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> State {
        *self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial state")
    }

    pub fn prey_extinction_time(&self) -> Option<f64> {
        match self.termination {
            Termination::PreyExtinct { time } => Some(time),
            _ => None,
        }
    }

    /// States emitted at or after `t0`.
    pub fn after(&self, t0: f64) -> impl Iterator<Item = &State> {
        self.times.iter().zip(&self.states).filter(move |(t, _)| **t >= t0).map(|(_, s)| s)
    }
}

/// Point of the transformed system, `u = 1/x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UState {
    pub u: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "PascalCase")]
pub enum UTermination {
    HorizonReached,
    Blowup { time: f64 },
    StepFailure { time: f64, reason: String },
}

impl UTermination {
    pub fn blowup_time(&self) -> Option<f64> {
        match self {
            UTermination::Blowup { time } => Some(*time),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<UState>,
    pub termination: UTermination,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;
const MAX_STEPS: usize = 5_000_000;

type Vec2 = [f64; 2];

/// One Dormand-Prince step. Returns the fifth-order solution and the
/// embedded error vector.
fn dopri_step<F: Fn(&Vec2) -> Vec2>(f: &F, y: &Vec2, k1: &Vec2, h: f64) -> (Vec2, Vec2) {
    debug_assert_eq!(C[0], 0.0);
    let mut k = [[0.0; 2]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            ys[0] += h * A[s][j] * kj[0];
            ys[1] += h * A[s][j] * kj[1];
        }
        k[s] = f(&ys);
    }
    let mut y_new = *y;
    let mut err = [0.0; 2];
    for (s, ks) in k.iter().enumerate() {
        for i in 0..2 {
            if s < 6 {
                y_new[i] += h * A[6][s] * ks[i];
            }
            err[i] += h * E[s] * ks[i];
        }
    }
    (y_new, err)
}

fn error_norm(y: &Vec2, y_new: &Vec2, err: &Vec2, opts: &IntegratorOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / 2.0).sqrt()
}

/// Terminal event: fires when `g(y) <= 0` after having been positive.
struct Event<'a, T> {
    g: Box<dyn Fn(&Vec2) -> f64 + 'a>,
    outcome: T,
}

enum RunEnd<T> {
    Horizon,
    Event(T, f64),
    Failure(f64, String),
}

struct Run<T> {
    times: Vec<f64>,
    states: Vec<Vec2>,
    end: RunEnd<T>,
}

/// Adaptive driver shared by the `x` and `u` systems. `project` maps a
/// state back onto the admissible region before it is stored or used as
/// the start of the next step.
fn drive<F, P, T>(f: F, project: P, y0: Vec2, opts: &IntegratorOptions, events: Vec<Event<'_, T>>) -> Run<T>
where
    F: Fn(&Vec2) -> Vec2,
    P: Fn(Vec2) -> Vec2,
    T: Clone,
{
    let armed: Vec<&Event<'_, T>> = events.iter().filter(|e| (e.g)(&y0) > 0.0).collect();
    let fired = |y: &Vec2| armed.iter().find(|e| (e.g)(y) <= 0.0).map(|e| e.outcome.clone());

    let mut times = vec![0.0];
    let mut states = vec![y0];
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(&y);

    let scale = y[0].abs().max(y[1].abs()).max(1e-6);
    let speed = k1[0].abs().max(k1[1].abs());
    let mut h = if speed > 0.0 { (0.01 * scale / speed).min(opts.max_step) } else { opts.max_step };
    h = h.max(opts.min_step * 10.0);
    let mut err_prev: f64 = 1.0;
    let mut rejected_last = false;

    for _ in 0..MAX_STEPS {
        if t >= opts.horizon {
            return Run { times, states, end: RunEnd::Horizon };
        }
        let remaining = opts.horizon - t;
        let step = h.min(opts.max_step).min(remaining);
        let (y_new, e) = dopri_step(&f, &y, &k1, step);
        let finite = y_new.iter().chain(e.iter()).all(|v| v.is_finite());
        let err = if finite { error_norm(&y, &y_new, &e, opts) } else { f64::INFINITY };

        if err > 1.0 {
            let fac = if err.is_finite() { (SAFETY * err.powf(-0.2)).max(0.2) } else { 0.25 };
            h = step * fac;
            rejected_last = true;
            if h < opts.min_step {
                return Run {
                    times,
                    states,
                    end: RunEnd::Failure(t, format!("step size {h:.3e} below min_step with error norm {err:.3e}")),
                };
            }
            continue;
        }

        if let Some(outcome) = fired(&y_new) {
            // Shrink the step until the crossing is bracketed to tolerance.
            let (mut lo, mut hi) = (0.0, step);
            let mut y_hi = y_new;
            let tol = (opts.rel_tol * (t + step)).max(f64::EPSILON * (t + step));
            let mut out = outcome;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let (y_mid, _) = dopri_step(&f, &y, &k1, mid);
                match fired(&y_mid) {
                    Some(o) => {
                        hi = mid;
                        y_hi = y_mid;
                        out = o;
                    }
                    None => lo = mid,
                }
            }
            let t_event = t + hi;
            times.push(t_event);
            states.push(project(y_hi));
            return Run { times, states, end: RunEnd::Event(out, t_event) };
        }

        t = if step == remaining { opts.horizon } else { t + step };
        y = project(y_new);
        k1 = f(&y);
        times.push(t);
        states.push(y);

        let err_c = err.max(1e-10);
        let mut fac = SAFETY * err_c.powf(-PI_ALPHA) * err_prev.powf(PI_BETA);
        fac = fac.clamp(0.2, 5.0);
        if rejected_last {
            fac = fac.min(1.0);
        }
        h = step * fac;
        err_prev = err_c;
        rejected_last = false;
        if h < opts.min_step && t < opts.horizon {
            return Run {
                times,
                states,
                end: RunEnd::Failure(t, format!("step size {h:.3e} below min_step")),
            };
        }
    }
    Run { times, states, end: RunEnd::Failure(t, format!("exceeded {MAX_STEPS} steps")) }
}

fn check_ic(ic: State) -> Result<State> {
    if !(ic.x1.is_finite() && ic.x2.is_finite()) {
        return Err(Error::Domain("initial condition must be finite".into()));
    }
    model::guard_state(ic)
}

#[derive(Clone)]
enum XEvent {
    Prey,
    Predator,
    Stop,
}

fn integrate_impl(
    p: &ModelParams,
    ic: State,
    opts: &IntegratorOptions,
    stop: Option<&dyn Fn(State) -> f64>,
) -> Result<Trajectory> {
    opts.validate()?;
    let ic = check_ic(ic)?;
    let threshold = opts.extinction_threshold;
    let mut events: Vec<Event<'_, XEvent>> = vec![Event { g: Box::new(move |y: &Vec2| y[0] - threshold), outcome: XEvent::Prey }];
    if p.m2 < 1.0 {
        events.push(Event { g: Box::new(move |y: &Vec2| y[1] - threshold), outcome: XEvent::Predator });
    }
    if let Some(stop) = stop {
        events.push(Event { g: Box::new(move |y: &Vec2| stop(State::new(y[0].max(0.0), y[1].max(0.0)))), outcome: XEvent::Stop });
    }
    let f = |y: &Vec2| model::field(y[0].max(0.0), y[1].max(0.0), p);
    let project = |y: Vec2| [y[0].max(0.0), y[1].max(0.0)];
    let run = drive(f, project, [ic.x1, ic.x2], opts, events);
    let termination = match run.end {
        RunEnd::Horizon => Termination::HorizonReached,
        RunEnd::Event(XEvent::Prey, time) => Termination::PreyExtinct { time },
        RunEnd::Event(XEvent::Predator, time) => Termination::PredatorExtinct { time },
        RunEnd::Event(XEvent::Stop, time) => Termination::Stopped { time },
        RunEnd::Failure(time, reason) => Termination::StepFailure { time, reason },
    };
    Ok(Trajectory {
        times: run.times,
        states: run.states.into_iter().map(|y| State::new(y[0], y[1])).collect(),
        termination,
    })
}

/// Integrates the model from `ic` until the horizon or a terminal event.
pub fn integrate(p: &ModelParams, ic: State, opts: &IntegratorOptions) -> Result<Trajectory> {
    integrate_impl(p, ic, opts, None)
}

/// Like [`integrate`], additionally stopping when `stop(state)` becomes
/// `<= 0`. The condition is only armed if it is positive at `ic`.
pub fn integrate_until<S>(p: &ModelParams, ic: State, opts: &IntegratorOptions, stop: S) -> Result<Trajectory>
where
    S: Fn(State) -> f64,
{
    integrate_impl(p, ic, opts, Some(&stop))
}

/// Right-hand side of the `u = 1/x1` system (with refuge):
///
/// ```text
/// du/dt  = -a1 u + b1 + w0 r^m1 u^2 / (r + d u)^m1 x2^m2
/// dx2/dt = -a2 x2 + w1 r^m1 / (r + d u)^m1 x2^m2
/// ```
pub fn u_system_rhs(s: UState, p: &ModelParams) -> [f64; 2] {
    let u = s.u.max(0.0);
    let x2m = model::interference(s.x2, p.m2);
    let resp = if p.r > 0.0 { (p.r / (p.r + p.d * u)).powf(p.m1) } else { 0.0 };
    [
        -p.a1 * u + p.b1 + p.w0 * u * u * resp * x2m,
        -p.a2 * s.x2.max(0.0) + p.w1 * resp * x2m,
    ]
}

/// Integrates the `u = 1/x1` system; blow-up of `u` is prey extinction.
pub fn integrate_u_system(p: &ModelParams, ic: UState, opts: &IntegratorOptions) -> Result<UTrajectory> {
    opts.validate()?;
    if !(ic.u > 0.0 && ic.u.is_finite()) {
        return Err(Error::Domain(format!("u(0) = {} must be positive", ic.u)));
    }
    if ic.x2 < 0.0 || !ic.x2.is_finite() {
        return Err(Error::Domain(format!("x2(0) = {} must be non-negative", ic.x2)));
    }
    let ceiling = opts.blowup_ceiling;
    let events = vec![Event { g: Box::new(move |y: &Vec2| ceiling - y[0]), outcome: () }];
    let f = |y: &Vec2| u_system_rhs(UState { u: y[0], x2: y[1] }, p);
    let project = |y: Vec2| [y[0].max(0.0), y[1].max(0.0)];
    let run = drive(f, project, [ic.u, ic.x2], opts, events);
    let termination = match run.end {
        RunEnd::Horizon => UTermination::HorizonReached,
        RunEnd::Event((), time) => UTermination::Blowup { time },
        RunEnd::Failure(time, reason) => UTermination::StepFailure { time, reason },
    };
    Ok(UTrajectory {
        times: run.times,
        states: run.states.into_iter().map(|y| UState { u: y[0], x2: y[1] }).collect(),
        termination,
    })
}
