//! Parameters, state and vector field of the predator-prey system
//!
//! ```text
//! dx1/dt = a1 x1 - b1 x1^2 - w0 g(r x1) x2^m2
//! dx2/dt = -a2 x2 + w1 g(r x1) x2^m2
//! g(x)   = (x / (x + d))^m1
//! ```
//!
//! `r = 1` is the model without refuge. For `m1 < 1` the response is not
//! Lipschitz at `x1 = 0`, and for `m2 < 1` the predator term is not
//! Lipschitz at `x2 = 0`; both are evaluated by continuity there.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamViolation, Result};

/// Inputs in `(-NEGATIVE_GUARD, 0)` are clamped to zero before evaluation.
pub const NEGATIVE_GUARD: f64 = 1e-12;

/// The eight positive model constants plus the refuge fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Prey per-capita growth rate.
    pub a1: f64,
    /// Predator intrinsic death rate.
    pub a2: f64,
    /// Prey intraspecific competition rate.
    pub b1: f64,
    /// Maximum prey removal rate.
    pub w0: f64,
    /// Biomass conversion efficiency.
    pub w1: f64,
    /// Half-saturation constant.
    pub d: f64,
    /// Feeding-intensity exponent, in (0, 1].
    pub m1: f64,
    /// Mutual-interference exponent, in (0, 1].
    pub m2: f64,
    /// Fraction of prey exposed to predation, in [0, 1]. `1` means no refuge.
    pub r: f64,
}

impl ModelParams {
    /// Builds parameters without refuge (`r = 1`) and validates them.
    #[allow(clippy::too_many_arguments)]
    pub fn new(a1: f64, a2: f64, b1: f64, w0: f64, w1: f64, d: f64, m1: f64, m2: f64) -> Result<Self> {
        validate_params(&ModelParams { a1, a2, b1, w0, w1, d, m1, m2, r: 1.0 })
    }

    /// Prey carrying capacity `a1 / b1`.
    pub fn carrying_capacity(&self) -> f64 {
        self.a1 / self.b1
    }

    pub fn get(&self, param: Param) -> f64 {
        match param {
            Param::A1 => self.a1,
            Param::A2 => self.a2,
            Param::B1 => self.b1,
            Param::W0 => self.w0,
            Param::W1 => self.w1,
            Param::D => self.d,
            Param::M1 => self.m1,
            Param::M2 => self.m2,
            Param::R => self.r,
        }
    }

    /// Copy with one parameter replaced. Not validated.
    pub fn with(&self, param: Param, value: f64) -> Self {
        let mut p = *self;
        match param {
            Param::A1 => p.a1 = value,
            Param::A2 => p.a2 = value,
            Param::B1 => p.b1 = value,
            Param::W0 => p.w0 = value,
            Param::W1 => p.w1 = value,
            Param::D => p.d = value,
            Param::M1 => p.m1 = value,
            Param::M2 => p.m2 = value,
            Param::R => p.r = value,
        }
        p
    }

    /// Copy with a validated refuge fraction.
    pub fn with_refuge(&self, r: f64) -> Result<Self> {
        validate_params(&self.with(Param::R, r))
    }

    pub fn has_refuge(&self) -> bool {
        self.r != 1.0
    }

    pub fn validate(&self) -> Result<Self> {
        validate_params(self)
    }
}

/// Parameter names, as used in configs, sweeps and output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    A1,
    A2,
    B1,
    W0,
    W1,
    D,
    M1,
    M2,
    R,
}

impl Param {
    pub const ALL: [Param; 9] = [
        Param::A1,
        Param::A2,
        Param::B1,
        Param::W0,
        Param::W1,
        Param::D,
        Param::M1,
        Param::M2,
        Param::R,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::A1 => "a1",
            Param::A2 => "a2",
            Param::B1 => "b1",
            Param::W0 => "w0",
            Param::W1 => "w1",
            Param::D => "d",
            Param::M1 => "m1",
            Param::M2 => "m2",
            Param::R => "r",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown parameter `{s}`")))
    }
}

/// Population pair `(prey, predator)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
}

impl State {
    pub const fn new(x1: f64, x2: f64) -> Self {
        State { x1, x2 }
    }

    pub fn is_non_negative(&self) -> bool {
        self.x1 >= 0.0 && self.x2 >= 0.0
    }

    pub fn norm(&self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn distance(&self, other: &State) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }
}

/// Checks every invariant and reports all violations at once.
pub fn validate_params(p: &ModelParams) -> Result<ModelParams> {
    let mut errors = Vec::new();
    let positive = [
        ("a1", p.a1),
        ("a2", p.a2),
        ("b1", p.b1),
        ("w0", p.w0),
        ("w1", p.w1),
        ("d", p.d),
    ];
    for (field, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            errors.push(ParamViolation { field, message: format!("{field} must be > 0") });
        }
    }
    for (field, v) in [("m1", p.m1), ("m2", p.m2)] {
        if !(v > 0.0 && v <= 1.0) {
            errors.push(ParamViolation { field, message: format!("{field} must lie in (0,1]") });
        }
    }
    if !(p.r >= 0.0 && p.r <= 1.0) {
        errors.push(ParamViolation { field: "r", message: "r must lie in [0,1]".to_string() });
    }
    if errors.is_empty() {
        Ok(*p)
    } else {
        Err(Error::InvalidParams(errors))
    }
}

/// Prey per-capita growth `f(x1) = a1 - b1 x1`.
pub fn eval_f(x1: f64, p: &ModelParams) -> f64 {
    p.a1 - p.b1 * x1
}

/// Functional response `g(x1) = (x1 / (x1 + d))^m1`, with `g(0) = 0`.
///
/// No refuge scaling is applied here; see [`response`].
pub fn eval_g(x1: f64, p: &ModelParams) -> f64 {
    if x1 <= 0.0 {
        return 0.0;
    }
    (x1 / (x1 + p.d)).powf(p.m1)
}

/// Response seen by the predator, `g(r x1)`.
pub fn response(x1: f64, p: &ModelParams) -> f64 {
    let y = p.r * x1;
    if y <= 0.0 {
        return 0.0;
    }
    (y / (y + p.d)).powf(p.m1)
}

/// `x2^m2` with `0^m2 = 0`.
pub(crate) fn interference(x2: f64, m2: f64) -> f64 {
    if x2 <= 0.0 {
        0.0
    } else if m2 == 1.0 {
        x2
    } else {
        x2.powf(m2)
    }
}

/// Vector field on the closed quadrant. Callers guarantee non-negative input.
pub(crate) fn field(x1: f64, x2: f64, p: &ModelParams) -> [f64; 2] {
    let predation = response(x1, p) * interference(x2, p.m2);
    [
        p.a1 * x1 - p.b1 * x1 * x1 - p.w0 * predation,
        -p.a2 * x2 + p.w1 * predation,
    ]
}

fn guard(v: f64, name: &str) -> Result<f64> {
    if v.is_nan() {
        return Err(Error::Domain(format!("{name} is NaN")));
    }
    if v >= 0.0 {
        Ok(v)
    } else if v > -NEGATIVE_GUARD {
        Ok(0.0)
    } else {
        Err(Error::Domain(format!("{name} = {v} is negative")))
    }
}

/// Clamps roundoff-level negatives to zero; rejects anything more negative.
pub fn guard_state(s: State) -> Result<State> {
    Ok(State::new(guard(s.x1, "x1")?, guard(s.x2, "x2")?))
}

/// Time derivative of the state.
pub fn rhs(s: State, p: &ModelParams) -> Result<State> {
    let s = guard_state(s)?;
    let [dx1, dx2] = field(s.x1, s.x2, p);
    Ok(State::new(dx1, dx2))
}

/// Outcome of one numerical assumption check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    /// Roman numeral label, `"I"` to `"VII"`.
    pub id: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    /// True when no check failed.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Sample grid for [`verify_assumptions`].
#[derive(Debug, Clone, Copy)]
pub struct AssumptionGrid {
    /// Uniform samples on `(0, a1/b1]`. At least 10.
    pub points: usize,
    /// Number of decades in the geometric `eps -> 0` sequences.
    pub decades: usize,
}

impl Default for AssumptionGrid {
    fn default() -> Self {
        AssumptionGrid { points: 200, decades: 12 }
    }
}

fn check(id: &str, ok: bool, detail: String) -> AssumptionCheck {
    AssumptionCheck {
        id: id.to_string(),
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        detail,
    }
}

fn not_applicable(id: &str, detail: &str) -> AssumptionCheck {
    AssumptionCheck { id: id.to_string(), status: CheckStatus::NotApplicable, detail: detail.to_string() }
}

/// `int_{eps}^{beta} dx / g(x)` by composite Simpson in `s = ln x`.
fn reciprocal_response_integral(eps: f64, beta: f64, p: &ModelParams) -> f64 {
    let (lo, hi) = (eps.ln(), beta.ln());
    let panels = (((hi - lo) / std::f64::consts::LN_10).ceil() as usize).max(1) * 200;
    let h = (hi - lo) / panels as f64;
    let integrand = |s: f64| {
        let x = s.exp();
        x / eval_g(x, p)
    };
    let mut sum = integrand(lo) + integrand(hi);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Numerically checks the structural assumptions (I)-(VII) on `f` and `g`.
///
/// The secant form `g(x)/x` is used for (V), as the assumption is written.
pub fn verify_assumptions(p: &ModelParams, grid: AssumptionGrid) -> Result<AssumptionReport> {
    if grid.points < 10 {
        return Err(Error::Precondition("assumption grid needs at least 10 points".into()));
    }
    if grid.decades < 4 {
        return Err(Error::Precondition("assumption grid needs at least 4 decades".into()));
    }
    let k = p.carrying_capacity();
    let xs: Vec<f64> = (1..=grid.points).map(|i| k * i as f64 / grid.points as f64).collect();
    let eps_seq: Vec<f64> = (1..=grid.decades).map(|j| k * 10f64.powi(-(j as i32))).collect();
    let sublinear = p.m1 < 1.0;
    let mut checks = Vec::with_capacity(7);

    // (I) g(0) = 0 and g continuous at 0
    let g_small: Vec<f64> = eps_seq.iter().map(|&e| eval_g(e, p)).collect();
    let continuous = g_small.windows(2).all(|w| w[1] < w[0]) && *g_small.last().unwrap() < 1e-2;
    checks.push(check(
        "I",
        eval_g(0.0, p) == 0.0 && continuous,
        format!("g(0) = {}, g({:.1e}) = {:.3e}", eval_g(0.0, p), eps_seq.last().unwrap(), g_small.last().unwrap()),
    ));

    // (II) g' > 0 on the grid, central differences
    let min_slope = xs
        .iter()
        .map(|&x| {
            let h = 1e-6 * x;
            (eval_g(x + h, p) - eval_g(x - h, p)) / (2.0 * h)
        })
        .fold(f64::INFINITY, f64::min);
    checks.push(check("II", min_slope > 0.0, format!("min g' on grid = {min_slope:.6e}")));

    // (III) f is affine, so second differences vanish up to roundoff
    let scale = p.a1.abs() + p.b1 * 2.0 * k;
    let max_second_diff = xs
        .iter()
        .map(|&x| {
            let h = 1e-3 * k;
            (eval_f(x + h, p) - 2.0 * eval_f(x, p) + eval_f(x - h, p)).abs()
        })
        .fold(0.0, f64::max);
    checks.push(check(
        "III",
        max_second_diff.is_finite() && max_second_diff <= 1e-12 * scale,
        format!("max |second difference of f| = {max_second_diff:.3e}"),
    ));

    // (IV) (x - a1/b1) f(x) < 0 on both sides of a1/b1
    let sides: Vec<f64> = (1..=2 * grid.points).map(|i| k * i as f64 / grid.points as f64).collect();
    let violations = sides
        .iter()
        .filter(|&&x| (x - k).abs() > 1e-12 * k)
        .filter(|&&x| (x - k) * eval_f(x, p) >= 0.0)
        .count();
    checks.push(check(
        "IV",
        violations == 0,
        format!("{violations} sign violations on (0, {:.6}] around a1/b1 = {k:.6}", 2.0 * k),
    ));

    // (V) g(x)/x -> +inf as x -> 0+
    if sublinear {
        let secants: Vec<f64> = eps_seq.iter().map(|&e| eval_g(e, p) / e).collect();
        let increasing = secants.windows(2).all(|w| w[1] > w[0]);
        let growth = secants.last().unwrap() / secants[0];
        checks.push(check(
            "V",
            increasing && growth > 10.0,
            format!("g(x)/x grows by factor {growth:.3e} over {} decades", grid.decades),
        ));
    } else {
        checks.push(not_applicable("V", "m1 = 1: g(x)/x -> 1/d is finite"));
    }

    // (VI) g not smooth at 0: the derivative estimate diverges
    if sublinear {
        let slopes: Vec<f64> = eps_seq
            .iter()
            .map(|&e| {
                let h = 1e-3 * e;
                (eval_g(e + h, p) - eval_g(e - h, p)) / (2.0 * h)
            })
            .collect();
        let diverging = slopes.windows(2).all(|w| w[1] > w[0]);
        checks.push(check("VI", diverging, format!("g'(eps) at smallest eps = {:.3e}", slopes.last().unwrap())));
    } else {
        checks.push(not_applicable("VI", "m1 = 1: g is smooth at 0"));
    }

    // (VII) int_eps^beta dx/g converges as eps -> 0
    let beta = k;
    let integrals: Vec<f64> = eps_seq.iter().map(|&e| reciprocal_response_integral(e, beta, p)).collect();
    let increments: Vec<f64> = integrals.windows(2).map(|w| w[1] - w[0]).collect();
    // Increments over successive decades must decay geometrically; the
    // limit is then the last value plus the geometric tail.
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let rho = ratios[ratios.len() / 2..].iter().copied().fold(0.0, f64::max);
    let last = *integrals.last().unwrap();
    let tail = increments.last().copied().unwrap_or(0.0) * rho / (1.0 - rho);
    checks.push(check(
        "VII",
        rho.is_finite() && rho < 1.0 - 1e-3 && (last + tail).is_finite(),
        format!(
            "integral over [eps, {beta:.4}] = {last:.8} at eps = {:.1e}, decade ratio {rho:.4}, extrapolated limit {:.8}",
            eps_seq.last().unwrap(),
            last + tail
        ),
    ));

    Ok(AssumptionReport { checks })
}
