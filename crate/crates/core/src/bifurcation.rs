//! One-parameter sweeps of the interior equilibria and detection of
//! saddle-node, Hopf and transcritical points.
//!
//! Branches come from a dense parameter sweep with nearest-neighbour
//! matching. A saddle-node shows up as two branches ending (or starting)
//! between the same pair of samples; it is refined by bisection in the
//! parameter on the sign of the local extremum of the scalar equilibrium
//! function, which is a double root exactly at the fold.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{self, Matrix2, Spectrum, DEFAULT_SCAN_POINTS};
use crate::error::{Error, Result};
use crate::model::{self, ModelParams, Param, State};
use crate::roots;

/// Sweepable parameters.
pub const SWEEP_PARAMS: [Param; 6] = [Param::A1, Param::A2, Param::B1, Param::W0, Param::W1, Param::R];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPoint {
    pub branch_id: usize,
    pub point: State,
    pub spectrum: Spectrum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub base: ModelParams,
    pub param: Param,
    /// Strictly increasing parameter samples.
    pub values: Vec<f64>,
    /// Interior equilibria at each sample, sorted by `x1`.
    pub samples: Vec<Vec<BranchPoint>>,
}

impl Branch {
    pub fn params_at(&self, value: f64) -> ModelParams {
        self.base.with(self.param, value)
    }

    /// `(value, point)` pairs of one matched branch.
    pub fn track(&self, id: usize) -> Vec<(f64, BranchPoint)> {
        self.values
            .iter()
            .zip(&self.samples)
            .filter_map(|(v, s)| s.iter().find(|b| b.branch_id == id).map(|b| (*v, *b)))
            .collect()
    }

    pub fn branch_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.samples.iter().flatten().map(|b| b.branch_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BifurcationKind {
    SaddleNode,
    Hopf,
    Transcritical,
}

impl BifurcationKind {
    pub fn name(self) -> &'static str {
        match self {
            BifurcationKind::SaddleNode => "SaddleNode",
            BifurcationKind::Hopf => "Hopf",
            BifurcationKind::Transcritical => "Transcritical",
        }
    }
}

impl fmt::Display for BifurcationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BifurcationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SaddleNode" => Ok(BifurcationKind::SaddleNode),
            "Hopf" => Ok(BifurcationKind::Hopf),
            "Transcritical" => Ok(BifurcationKind::Transcritical),
            _ => Err(Error::Domain(format!("unknown bifurcation kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationEvent {
    pub kind: BifurcationKind,
    pub param: Param,
    pub critical_value: f64,
    pub point: State,
    /// Ordered `(name, value)` pairs: `tr`, `det`, `transversality`, ...
    pub diagnostics: Vec<(String, f64)>,
}

impl BifurcationEvent {
    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn lyapunov_sign(&self) -> Option<f64> {
        self.diagnostic("lyapunov_sign")
    }
}

fn check_sweep(param: Param, lo: f64, hi: f64, n: usize) -> Result<()> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(Error::Precondition(format!("cannot sweep {param}; use one of a1, a2, b1, w0, w1, r")));
    }
    if n < 50 {
        return Err(Error::Precondition(format!("sweep needs n >= 50 samples (n = {n})")));
    }
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Precondition(format!("sweep range [{lo}, {hi}] must be increasing")));
    }
    let valid = if param == Param::R { lo > 0.0 && hi <= 1.0 } else { lo > 0.0 };
    if !valid {
        return Err(Error::Precondition(format!("sweep range [{lo}, {hi}] outside the valid domain of {param}")));
    }
    Ok(())
}

/// Interior equilibria over `n` uniform samples of `param` in `[lo, hi]`.
pub fn branch_sweep(p: &ModelParams, param: Param, lo: f64, hi: f64, n: usize) -> Result<Branch> {
    branch_sweep_with(p, param, lo, hi, n, DEFAULT_SCAN_POINTS)
}

pub fn branch_sweep_with(p: &ModelParams, param: Param, lo: f64, hi: f64, n: usize, scan_points: usize) -> Result<Branch> {
    check_sweep(param, lo, hi, n)?;
    let values: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let raw: Vec<Vec<(State, Spectrum)>> = values
        .par_iter()
        .map(|&v| {
            let pv = p.with(param, v);
            equilibria::interior_equilibria(&pv, scan_points).map(|eqs| {
                eqs.into_iter()
                    .filter_map(|e| e.spectrum.map(|s| (e.point, s)))
                    .collect::<Vec<_>>()
            })
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::with_capacity(n);
    let mut prev: Vec<BranchPoint> = Vec::new();
    let mut next_id = 0;
    for (v, eqs) in values.iter().zip(raw) {
        let cap = 0.1 * p.with(param, *v).carrying_capacity();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (j, b) in prev.iter().enumerate() {
            for (k, (s, _)) in eqs.iter().enumerate() {
                let dist = b.point.distance(s);
                if dist <= cap {
                    pairs.push((dist, j, k));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut ids: Vec<Option<usize>> = vec![None; eqs.len()];
        let mut used = vec![false; prev.len()];
        for (_, j, k) in pairs {
            if !used[j] && ids[k].is_none() {
                used[j] = true;
                ids[k] = Some(prev[j].branch_id);
            }
        }
        let current: Vec<BranchPoint> = eqs
            .into_iter()
            .zip(ids)
            .map(|((point, spectrum), id)| {
                let branch_id = id.unwrap_or_else(|| {
                    next_id += 1;
                    next_id - 1
                });
                BranchPoint { branch_id, point, spectrum }
            })
            .collect();
        prev = current.clone();
        samples.push(current);
    }
    Ok(Branch { base: *p, param, values, samples })
}

fn jacobian_scale(j: &Matrix2) -> f64 {
    j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE)
}

fn field_at(p: &ModelParams, s: State) -> [f64; 2] {
    model::field(s.x1.max(0.0), s.x2.max(0.0), p)
}

/// Right and left null vectors of a (nearly) singular 2x2 matrix.
fn null_vectors(j: &Matrix2) -> ([f64; 2], [f64; 2]) {
    let unit = |v: [f64; 2]| {
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[0] / n, v[1] / n]
    };
    let pick = |a: [f64; 2], b: [f64; 2]| if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { unit(a) } else { unit(b) };
    let right = pick([-j[0][1], j[0][0]], [j[1][1], -j[1][0]]);
    let left = pick([-j[1][0], j[0][0]], [j[1][1], -j[0][1]]);
    (right, left)
}

/// Sotomayor test quantities `V^T F_param` and `V^T D^2F(U, U)` at a fold.
fn sotomayor(p: &ModelParams, param: Param, value: f64, s: State, j: &Matrix2) -> (f64, f64) {
    let (u, v) = null_vectors(j);
    let hp = 1e-6 * value.abs().max(1e-3);
    let fp = field_at(&p.with(param, value + hp), s);
    let fm = field_at(&p.with(param, value - hp), s);
    let f_param = [(fp[0] - fm[0]) / (2.0 * hp), (fp[1] - fm[1]) / (2.0 * hp)];
    let pv = p.with(param, value);
    let h = 1e-4 * s.x1.abs().max(s.x2.abs()).max(1e-3);
    let a = field_at(&pv, State::new(s.x1 + h * u[0], s.x2 + h * u[1]));
    let b = field_at(&pv, s);
    let c = field_at(&pv, State::new(s.x1 - h * u[0], s.x2 - h * u[1]));
    let d2 = [(a[0] - 2.0 * b[0] + c[0]) / (h * h), (a[1] - 2.0 * b[1] + c[1]) / (h * h)];
    (v[0] * f_param[0] + v[1] * f_param[1], v[0] * d2[0] + v[1] * d2[1])
}

/// Pairs of branches that end (or start) between consecutive samples.
/// Returns `(index with both roots, index without, x_a, x_b)`.
fn fold_candidates(b: &Branch) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for i in 0..b.values.len().saturating_sub(1) {
        for (have, lack) in [(i, i + 1), (i + 1, i)] {
            let lost: Vec<&BranchPoint> = b.samples[have]
                .iter()
                .filter(|bp| !b.samples[lack].iter().any(|o| o.branch_id == bp.branch_id))
                .collect();
            // neighbours in x1 vanish together
            for w in lost.windows(2) {
                let (xa, xb) = (w[0].point.x1, w[1].point.x1);
                let between = b.samples[have].iter().any(|o| o.point.x1 > xa && o.point.x1 < xb);
                if !between {
                    out.push((have, lack, xa, xb));
                }
            }
        }
    }
    out
}

/// Bisects the parameter for the double root of the equilibrium function.
fn refine_fold(b: &Branch, have: usize, lack: usize, xa: f64, xb: f64) -> Option<(f64, State)> {
    let (v_have, v_lack) = (b.values[have], b.values[lack]);
    let k_min = b.params_at(v_have).carrying_capacity().min(b.params_at(v_lack).carrying_capacity());
    let w = 0.5 * (xb - xa) + 0.02 * k_min;
    let (lo, hi) = ((xa - w).max(1e-9 * k_min), (xb + w).min(k_min * (1.0 - 1e-9)));
    let mid_val = equilibria::equilibrium_function(0.5 * (xa + xb), &b.params_at(v_have));
    let s = -mid_val.signum();
    let extremum = |v: f64| {
        let pv = b.params_at(v);
        roots::golden_min(|x| s * equilibria::equilibrium_function(x, &pv), lo, hi, 1e-13 * k_min)
    };
    if extremum(v_have).1 >= 0.0 || extremum(v_lack).1 <= 0.0 {
        return None;
    }
    let v_star = roots::bisect(|v| extremum(v).1, v_have, v_lack, extremum(v_have).1, 1e-14);
    let pv = b.params_at(v_star);
    let (x_guess, _) = extremum(v_star);
    // det vanishes at the double root; sharpen the location on the curve.
    let det_at = |x: f64| {
        let st = State::new(x, equilibria::x2_curve(x, &pv));
        equilibria::trace_det(st, &pv).map(|(_, d)| d).unwrap_or(f64::NAN)
    };
    let dx = 1e-6 * k_min;
    let (l, r) = (x_guess - dx, x_guess + dx);
    let x_star = if det_at(l).signum() != det_at(r).signum() { roots::bisect(det_at, l, r, det_at(l), 1e-15) } else { x_guess };
    Some((v_star, State::new(x_star, equilibria::x2_curve(x_star, &pv))))
}

/// Saddle-node points of a sweep. Only folds with `tr < 0` are reported.
pub fn detect_saddle_node(b: &Branch) -> Vec<BifurcationEvent> {
    let mut events: Vec<BifurcationEvent> = Vec::new();
    for (have, lack, xa, xb) in fold_candidates(b) {
        let Some((v, point)) = refine_fold(b, have, lack, xa, xb) else { continue };
        let pv = b.params_at(v);
        let Ok(j) = equilibria::jacobian(point, &pv) else { continue };
        let sp = Spectrum::of(&j);
        if sp.trace >= 0.0 {
            continue;
        }
        if events.iter().any(|e| (e.critical_value - v).abs() <= 1e-9 * v.abs().max(1.0)) {
            continue;
        }
        let (fp, d2) = sotomayor(&b.base, b.param, v, point, &j);
        let scale = jacobian_scale(&j);
        events.push(BifurcationEvent {
            kind: BifurcationKind::SaddleNode,
            param: b.param,
            critical_value: v,
            point,
            diagnostics: vec![
                ("tr".into(), sp.trace),
                ("det".into(), sp.det),
                ("det_scaled".into(), sp.det / (scale * scale)),
                ("transversality".into(), fp),
                ("sotomayor_d2f".into(), d2),
            ],
        });
    }
    events.sort_by(|a, b| a.critical_value.total_cmp(&b.critical_value));
    events
}

/// Interior equilibrium of `p` closest to `guess`.
fn resolve_near(p: &ModelParams, guess: State) -> Option<State> {
    let cap = 0.1 * p.carrying_capacity();
    equilibria::interior_roots(p, DEFAULT_SCAN_POINTS)
        .ok()?
        .into_iter()
        .map(|x| State::new(x, equilibria::x2_curve(x, p)))
        .filter(|s| s.distance(&guess) <= cap)
        .min_by(|a, b| a.distance(&guess).total_cmp(&b.distance(&guess)))
}

fn trace_near(p: &ModelParams, guess: State) -> Option<(f64, f64, State)> {
    let s = resolve_near(p, guess)?;
    let (tr, det) = equilibria::trace_det(s, p).ok()?;
    Some((tr, det, s))
}

/// `d Re(lambda) / d param` at a Hopf point, by central differences with step `h`.
pub fn hopf_transversality(p: &ModelParams, param: Param, value: f64, point: State, h: f64) -> Option<f64> {
    let (tp, _, _) = trace_near(&p.with(param, value + h), point)?;
    let (tm, _, _) = trace_near(&p.with(param, value - h), point)?;
    Some((tp - tm) / (4.0 * h))
}

/// Hopf points: trace sign changes along a branch with positive determinant.
pub fn detect_hopf(b: &Branch) -> Vec<BifurcationEvent> {
    let mut events = Vec::new();
    for id in b.branch_ids() {
        let track = b.track(id);
        for w in track.windows(2) {
            let ((v0, b0), (v1, b1)) = (w[0], w[1]);
            let (t0, t1) = (b0.spectrum.trace, b1.spectrum.trace);
            if t0 == 0.0 || (t0 < 0.0) == (t1 < 0.0) || b0.spectrum.det <= 0.0 || b1.spectrum.det <= 0.0 {
                continue;
            }
            let guess = |v: f64| {
                let f = (v - v0) / (v1 - v0);
                State::new(b0.point.x1 + f * (b1.point.x1 - b0.point.x1), b0.point.x2 + f * (b1.point.x2 - b0.point.x2))
            };
            let tr_of = |v: f64| trace_near(&b.params_at(v), guess(v)).map(|t| t.0).unwrap_or(f64::NAN);
            let v = roots::bisect(tr_of, v0, v1, t0, 1e-14);
            let pv = b.params_at(v);
            let Some((tr, det, point)) = trace_near(&pv, guess(v)) else { continue };
            if det <= 0.0 {
                continue;
            }
            let j = equilibria::jacobian(point, &pv).expect("interior point");
            let scale = jacobian_scale(&j);
            let h = 1e-4 * v.abs().max(1e-3);
            let transversality = hopf_transversality(&b.base, b.param, v, point, h).unwrap_or(f64::NAN);
            let mut diagnostics = vec![
                ("tr".into(), tr),
                ("tr_scaled".into(), tr / scale),
                ("det".into(), det),
                ("omega".into(), det.sqrt()),
                ("transversality".into(), transversality),
            ];
            let event_probe = BifurcationEvent {
                kind: BifurcationKind::Hopf,
                param: b.param,
                critical_value: v,
                point,
                diagnostics: diagnostics.clone(),
            };
            if let Ok(l1) = first_lyapunov_coefficient(&b.base, &event_probe) {
                diagnostics.push(("lyapunov_coefficient".into(), l1));
                diagnostics.push(("lyapunov_sign".into(), l1.signum()));
            }
            if det.abs() < 1e-6 * scale * scale {
                diagnostics.push(("bogdanov_takens".into(), 1.0));
            }
            events.push(BifurcationEvent { diagnostics, ..event_probe });
        }
    }
    events.sort_by(|a, b| a.critical_value.total_cmp(&b.critical_value));
    events
}

/// Transverse eigenvalue of E1, `-a2 + w1 g(r a1/b1)` (valid for `m2 = 1`).
pub fn e1_transverse_eigenvalue(p: &ModelParams) -> f64 {
    -p.a2 + p.w1 * model::response(p.carrying_capacity(), p)
}

/// Transcritical points at E1 (interior branch meeting the predator-free
/// equilibrium). Only for `m2 = 1`.
pub fn detect_transcritical(b: &Branch) -> Vec<BifurcationEvent> {
    if b.base.m2 != 1.0 {
        return Vec::new();
    }
    let mu = |v: f64| e1_transverse_eigenvalue(&b.params_at(v));
    let mut events = Vec::new();
    for w in b.values.windows(2) {
        let (m0, m1) = (mu(w[0]), mu(w[1]));
        if m0 == 0.0 || (m0 < 0.0) == (m1 < 0.0) {
            continue;
        }
        let v = roots::bisect(mu, w[0], w[1], m0, 1e-15);
        let pv = b.params_at(v);
        let h = 1e-6 * v.abs().max(1e-3);
        let transversality = (mu(v + h) - mu(v - h)) / (2.0 * h);
        let k = pv.carrying_capacity();
        events.push(BifurcationEvent {
            kind: BifurcationKind::Transcritical,
            param: b.param,
            critical_value: v,
            point: State::new(k, 0.0),
            diagnostics: vec![
                ("e1_eigenvalue".into(), mu(v)),
                ("tr".into(), -pv.a1 + mu(v)),
                ("det".into(), -pv.a1 * mu(v)),
                ("transversality".into(), transversality),
            ],
        });
    }
    events
}

/// All events of a sweep, ordered by critical value.
pub fn detect_all(b: &Branch) -> Vec<BifurcationEvent> {
    let mut all = detect_saddle_node(b);
    all.extend(detect_hopf(b));
    all.extend(detect_transcritical(b));
    all.sort_by(|a, b| a.critical_value.total_cmp(&b.critical_value));
    all
}

/// Closed-form `a1*` making the trace vanish at the fixed point `eq`.
pub fn hopf_critical_a1(p: &ModelParams, eq: State) -> Result<f64> {
    if !(eq.x1 > 0.0 && eq.x2 > 0.0) {
        return Err(Error::Domain(format!("a1* needs an interior point, got ({}, {})", eq.x1, eq.x2)));
    }
    let (x, y) = (eq.x1, eq.x2);
    let (m1, m2, d) = (p.m1, p.m2, p.d);
    let predator_term = m2 * p.w1 * y.powf(m2 - 1.0);
    let a1 = if p.r == 1.0 {
        p.a2 + 2.0 * p.b1 * x - predator_term * (x / (x + d)).powf(m1)
            + d * m1 * p.w0 * y.powf(m2) * (x.powf(m1 - 1.0) / (x + d).powf(m1 + 1.0))
    } else {
        let r = p.r;
        let rx = r * x;
        p.a2 + 2.0 * p.b1 * x
            + m1 * p.w0 * y.powf(m2) * (r / (d + rx) - r * r * x / (rx + d).powi(2)) * (rx / (rx + d)).powf(m1 - 1.0)
            - predator_term * (rx / (rx + d)).powf(m1)
    };
    Ok(a1)
}

/// Resolves `a1*` self-consistently: the equilibrium is recomputed at each
/// candidate `a1` and the closed form re-evaluated, until the value settles.
pub fn hopf_critical_a1_resolved(p: &ModelParams, a1_start: f64, near: State) -> Result<(f64, State)> {
    let mut a1 = a1_start;
    let mut guess = near;
    for _ in 0..500 {
        let pa = p.with(Param::A1, a1);
        let eq = resolve_near(&pa, guess)
            .ok_or_else(|| Error::NotFound(format!("no interior equilibrium near ({}, {}) at a1 = {a1}", guess.x1, guess.x2)))?;
        let next = hopf_critical_a1(&pa, eq)?;
        if !(next > 0.0) {
            return Err(Error::NotFound(format!("a1* iteration left the positive range ({next})")));
        }
        guess = eq;
        if (next - a1).abs() <= 1e-13 * a1.abs() {
            return Ok((next, eq));
        }
        a1 = next;
    }
    Err(Error::NotFound("a1* fixed-point iteration did not converge".into()))
}

/// Both readings of the transcritical refuge threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranscriticalR {
    /// Formula with `a1^(1/m1)` in the numerator.
    pub as_printed: f64,
    /// Formula with `a2^(1/m1)`, from `x1*(r) = a1/b1`.
    pub as_derived: f64,
    /// Whether E1's transverse eigenvalue vanishes at each value.
    pub printed_matches: bool,
    pub derived_matches: bool,
}

pub fn transcritical_r(p: &ModelParams) -> Result<TranscriticalR> {
    if p.m2 != 1.0 {
        return Err(Error::Precondition(format!("transcritical threshold needs m2 = 1 (m2 = {})", p.m2)));
    }
    if p.w1 <= p.a2 {
        return Err(Error::Precondition(format!("w1 = {} must exceed a2 = {}", p.w1, p.a2)));
    }
    let inv = 1.0 / p.m1;
    let denom = p.w1.powf(inv) - p.a2.powf(inv);
    let pre = p.b1 * p.d / p.a1;
    let as_printed = pre * p.a1.powf(inv) / denom;
    let as_derived = pre * p.a2.powf(inv) / denom;
    let matches = |r: f64| r > 0.0 && r <= 1.0 && e1_transverse_eigenvalue(&p.with(Param::R, r)).abs() < 1e-9 * p.a2;
    Ok(TranscriticalR { as_printed, as_derived, printed_matches: matches(as_printed), derived_matches: matches(as_derived) })
}

/// First Lyapunov coefficient at a Hopf point.
///
/// The field is written in real Jordan coordinates `x = x* + P y`,
/// `P = [Re q, -Im q]` with `q` a unit eigenvector for `i omega`, and the
/// planar formula
///
/// ```text
/// 16 l1 = fxxx + fxyy + gxxy + gyyy
///       + (fxy (fxx + fyy) - gxy (gxx + gyy) - fxx gxx + fyy gyy) / omega
/// ```
///
/// is evaluated with central differences. Its sign decides super- (`< 0`)
/// versus subcritical (`> 0`).
pub fn first_lyapunov_coefficient(p: &ModelParams, hopf: &BifurcationEvent) -> Result<f64> {
    let pv = p.with(hopf.param, hopf.critical_value);
    lyapunov_at(&pv, hopf.point)
}

/// [`first_lyapunov_coefficient`] at a given point of given parameters.
pub fn lyapunov_at(p: &ModelParams, point: State) -> Result<f64> {
    let j = equilibria::jacobian(point, p)?;
    let (tr, det) = (j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0]);
    let omega2 = det - 0.25 * tr * tr;
    if det <= 0.0 || omega2 <= 0.0 {
        return Err(Error::Precondition(format!("no complex pair at the Hopf point (tr = {tr:.3e}, det = {det:.3e})")));
    }
    let omega = omega2.sqrt();
    let alpha = 0.5 * tr;
    // eigenvector of alpha + i omega: (j12, alpha + i omega - j11)
    let (qr, qi) = if j[0][1].abs() > 0.0 {
        ([j[0][1], alpha - j[0][0]], [0.0, omega])
    } else {
        ([alpha - j[1][1], j[1][0]], [omega, 0.0])
    };
    let n = (qr[0] * qr[0] + qr[1] * qr[1] + qi[0] * qi[0] + qi[1] * qi[1]).sqrt();
    let pm = [[qr[0] / n, -qi[0] / n], [qr[1] / n, -qi[1] / n]];
    let pdet = pm[0][0] * pm[1][1] - pm[0][1] * pm[1][0];
    let pinv = [[pm[1][1] / pdet, -pm[0][1] / pdet], [-pm[1][0] / pdet, pm[0][0] / pdet]];
    let field = |y0: f64, y1: f64| {
        let x = State::new(point.x1 + pm[0][0] * y0 + pm[0][1] * y1, point.x2 + pm[1][0] * y0 + pm[1][1] * y1);
        let f = field_at(p, x);
        [pinv[0][0] * f[0] + pinv[0][1] * f[1], pinv[1][0] * f[0] + pinv[1][1] * f[1]]
    };
    let h = 1e-4 * point.norm().max(1e-6);
    let at = |a: f64, b: f64| field(a * h, b * h);
    let (c, xp, xm, yp, ym) = (at(0.0, 0.0), at(1.0, 0.0), at(-1.0, 0.0), at(0.0, 1.0), at(0.0, -1.0));
    let (pp, pmn, mp, mm) = (at(1.0, 1.0), at(1.0, -1.0), at(-1.0, 1.0), at(-1.0, -1.0));
    let (x2p, x2m, y2p, y2m) = (at(2.0, 0.0), at(-2.0, 0.0), at(0.0, 2.0), at(0.0, -2.0));
    let (h2, h3) = (h * h, h * h * h);
    let d = |k: usize| {
        let xx = (xp[k] - 2.0 * c[k] + xm[k]) / h2;
        let yy = (yp[k] - 2.0 * c[k] + ym[k]) / h2;
        let xy = (pp[k] - pmn[k] - mp[k] + mm[k]) / (4.0 * h2);
        let xxx = (x2p[k] - 2.0 * xp[k] + 2.0 * xm[k] - x2m[k]) / (2.0 * h3);
        let yyy = (y2p[k] - 2.0 * yp[k] + 2.0 * ym[k] - y2m[k]) / (2.0 * h3);
        let xyy = ((pp[k] - 2.0 * xp[k] + pmn[k]) - (mp[k] - 2.0 * xm[k] + mm[k])) / (2.0 * h3);
        let xxy = ((pp[k] - 2.0 * yp[k] + mp[k]) - (pmn[k] - 2.0 * ym[k] + mm[k])) / (2.0 * h3);
        (xx, yy, xy, xxx, yyy, xyy, xxy)
    };
    let (fxx, fyy, fxy, fxxx, _, fxyy, _) = d(0);
    let (gxx, gyy, gxy, _, gyyy, _, gxxy) = d(1);
    Ok((fxxx + fxyy + gxxy + gyyy) / 16.0
        + (fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy) / (16.0 * omega))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_set() -> ModelParams {
        ModelParams::new(0.6, 1.0, 0.063, 1.0, 2.0, 2.0, 0.8, 1.0).unwrap()
    }

    fn bistable_set() -> ModelParams {
        ModelParams::new(0.5, 0.7, 0.05, 0.2, 4.0, 0.2, 0.5, 0.5).unwrap()
    }

    #[test]
    fn sweep_preconditions() {
        assert!(branch_sweep(&base_set(), Param::D, 1.0, 2.0, 60).is_err());
        assert!(branch_sweep(&base_set(), Param::A1, 0.2, 0.4, 10).is_err());
        assert!(branch_sweep(&base_set(), Param::R, 0.5, 1.5, 60).is_err());
        assert!(branch_sweep(&base_set(), Param::A1, 0.4, 0.2, 60).is_err());
    }

    #[test]
    fn empty_region_gives_empty_samples() {
        let b = branch_sweep(&base_set(), Param::W1, 0.5, 0.9, 50).unwrap();
        assert!(b.samples.iter().all(Vec::is_empty));
        assert!(detect_all(&b).iter().all(|e| e.kind != BifurcationKind::Hopf));
    }

    #[test]
    fn single_branch_matched() {
        let b = branch_sweep(&base_set(), Param::A1, 0.2, 0.4, 60).unwrap();
        assert_eq!(b.branch_ids(), vec![0]);
        assert!(b.values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn hopf_base_set_a1() {
        let b = branch_sweep(&base_set(), Param::A1, 0.2, 0.4, 60).unwrap();
        let ev = detect_hopf(&b);
        assert_eq!(ev.len(), 1);
        let e = &ev[0];
        assert!((e.critical_value - 0.261835).abs() < 1e-3 * 0.261835, "{e:?}");
        assert!(e.diagnostic("tr_scaled").unwrap().abs() < 1e-8);
        assert!(e.diagnostic("transversality").unwrap().abs() > 1e-8);
        assert_eq!(e.lyapunov_sign(), Some(-1.0));
    }

    #[test]
    fn closed_form_is_zero_trace() {
        let p = base_set();
        let eq = State::new(1.45094, 0.9);
        let a1 = hopf_critical_a1(&p, eq).unwrap();
        let (tr, _) = equilibria::trace_det(eq, &p.with(Param::A1, a1)).unwrap();
        assert!(tr.abs() < 1e-12);
        let pr = p.with_refuge(0.3).unwrap();
        let a1r = hopf_critical_a1(&pr, eq).unwrap();
        let (trr, _) = equilibria::trace_det(eq, &pr.with(Param::A1, a1r)).unwrap();
        assert!(trr.abs() < 1e-12);
        assert!(hopf_critical_a1(&p, State::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn resolved_a1_matches_base_set() {
        let p = base_set();
        let (a1, eq) = hopf_critical_a1_resolved(&p, p.a1, State::new(1.45, 1.47)).unwrap();
        assert!((a1 - 0.26183528).abs() < 1e-7, "{a1}");
        assert!((eq.x2 - 0.49456).abs() < 1e-4);
    }

    #[test]
    fn transcritical_variants() {
        let t = transcritical_r(&base_set()).unwrap();
        assert!((t.as_derived - 0.152349).abs() < 1e-5);
        assert!((t.as_printed - 0.080450).abs() < 1e-5);
        assert!(t.derived_matches && !t.printed_matches);
        let lin = ModelParams { m1: 1.0, a1: 1.0, ..base_set() };
        let t = transcritical_r(&lin).unwrap();
        assert!((t.as_printed - t.as_derived).abs() < 1e-15);
        assert!(transcritical_r(&ModelParams { w1: 0.5, ..base_set() }).is_err());
    }

    #[test]
    fn transcritical_detected_in_r_sweep() {
        let b = branch_sweep(&base_set(), Param::R, 0.1, 0.5, 80).unwrap();
        let ev = detect_transcritical(&b);
        assert_eq!(ev.len(), 1);
        assert!((ev[0].critical_value - 0.152349).abs() < 1e-5);
    }

    #[test]
    fn saddle_node_bistable_set_a2() {
        let b = branch_sweep(&bistable_set(), Param::A2, 0.55, 0.75, 100).unwrap();
        let ev = detect_saddle_node(&b);
        assert_eq!(ev.len(), 1, "{ev:?}");
        let e = &ev[0];
        assert!((e.critical_value - 0.61515).abs() < 1e-3, "{e:?}");
        assert!(e.diagnostic("det_scaled").unwrap().abs() < 1e-8);
        assert!(e.diagnostic("tr").unwrap() < 0.0);
        assert!(e.diagnostic("transversality").unwrap().abs() > 1e-8);
    }

    #[test]
    fn lyapunov_of_classical_model_is_negative() {
        // Rosenzweig-MacArthur Hopf is supercritical
        let p = ModelParams::new(1.0, 0.5, 0.1, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let x = equilibria::predator_nullcline_x1(&p).unwrap();
        // trace vanishes at x1* = (K - d)/2; tune b1 so that holds
        let k_target = 2.0 * x + p.d;
        let p = ModelParams { b1: p.a1 / k_target, ..p };
        let eq = State::new(x, equilibria::x2_curve(x, &p));
        let (tr, _) = equilibria::trace_det(eq, &p).unwrap();
        assert!(tr.abs() < 1e-12);
        assert!(lyapunov_at(&p, eq).unwrap() < 0.0);
    }
}
