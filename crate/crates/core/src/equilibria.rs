//! Equilibria, Jacobians and local stability.
//!
//! Interior equilibria are the zeros on `(0, a1/b1)` of
//!
//! ```text
//! F(x1) = w0 g(r x1) x2(x1)^m2 - x1 (a1 - b1 x1),   x2(x1) = w1 / (w0 a2) (a1 x1 - b1 x1^2)
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, ModelParams, State};
use crate::roots;

pub const DEFAULT_SCAN_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    Trivial,
    PredatorFree,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    StableNode,
    StableFocus,
    UnstableNode,
    UnstableFocus,
    Saddle,
    CenterDegenerate,
    NonLinearizable,
}

impl Classification {
    pub fn is_stable(self) -> bool {
        matches!(self, Classification::StableNode | Classification::StableFocus)
    }
}

pub type Matrix2 = [[f64; 2]; 2];

/// Trace, determinant and eigenvalues of a 2x2 Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub trace: f64,
    pub det: f64,
    /// Ordered by decreasing real part; a complex pair has `eig[0].im > 0`.
    pub eigenvalues: [Complex64; 2],
}

impl Spectrum {
    pub fn from_trace_det(trace: f64, det: f64) -> Self {
        let half = 0.5 * trace;
        let disc = half * half - det;
        let eigenvalues = if disc >= 0.0 {
            let s = disc.sqrt();
            // avoid cancellation in the smaller-magnitude root
            let big = if half >= 0.0 { half + s } else { half - s };
            let small = if big != 0.0 { det / big } else { 0.0 };
            let (l1, l2) = if big >= small { (big, small) } else { (small, big) };
            [Complex64::new(l1, 0.0), Complex64::new(l2, 0.0)]
        } else {
            let w = (-disc).sqrt();
            [Complex64::new(half, w), Complex64::new(half, -w)]
        };
        Spectrum { trace, det, eigenvalues }
    }

    pub fn of(j: &Matrix2) -> Self {
        Spectrum::from_trace_det(j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0])
    }

    pub fn classify(&self) -> Classification {
        let (tr, det) = (self.trace, self.det);
        if det < 0.0 {
            Classification::Saddle
        } else if det == 0.0 || tr == 0.0 {
            Classification::CenterDegenerate
        } else {
            let focus = 0.25 * tr * tr - det < 0.0;
            match (tr < 0.0, focus) {
                (true, false) => Classification::StableNode,
                (true, true) => Classification::StableFocus,
                (false, false) => Classification::UnstableNode,
                (false, true) => Classification::UnstableFocus,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub point: State,
    /// `None` where the Jacobian is singular (classification `NonLinearizable`).
    pub jacobian: Option<Matrix2>,
    pub spectrum: Option<Spectrum>,
    pub classification: Classification,
}

impl Equilibrium {
    pub fn trace(&self) -> Option<f64> {
        self.spectrum.map(|s| s.trace)
    }

    pub fn det(&self) -> Option<f64> {
        self.spectrum.map(|s| s.det)
    }

    pub fn eigenvalues(&self) -> Option<[Complex64; 2]> {
        self.spectrum.map(|s| s.eigenvalues)
    }
}

/// Predator density on the interior equilibrium curve for a given prey density.
pub fn x2_of_x1(x1: f64, p: &ModelParams) -> Result<f64> {
    let k = p.carrying_capacity();
    if !(x1 >= 0.0 && x1 <= k * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("x1 = {x1} outside [0, a1/b1 = {k}]")));
    }
    Ok(x2_curve(x1, p))
}

pub(crate) fn x2_curve(x1: f64, p: &ModelParams) -> f64 {
    (p.w1 / (p.w0 * p.a2) * (p.a1 * x1 - p.b1 * x1 * x1)).max(0.0)
}

/// The vertical predator nullcline `x1*` (requires `m2 = 1`, `w1 > a2`).
/// With refuge the base value is divided by `r`.
pub fn predator_nullcline_x1(p: &ModelParams) -> Result<f64> {
    if p.m2 != 1.0 {
        return Err(Error::Precondition(format!("predator nullcline is vertical only for m2 = 1 (m2 = {})", p.m2)));
    }
    if p.w1 <= p.a2 {
        return Err(Error::Precondition(format!("w1 = {} must exceed a2 = {}", p.w1, p.a2)));
    }
    if p.r <= 0.0 {
        return Err(Error::Precondition("r = 0: no predation, no predator nullcline".into()));
    }
    let inv = 1.0 / p.m1;
    let a2m = p.a2.powf(inv);
    Ok(p.d * a2m / (p.w1.powf(inv) - a2m) / p.r)
}

/// Scalar function whose zeros in `(0, a1/b1)` are interior equilibria.
pub fn equilibrium_function(x1: f64, p: &ModelParams) -> f64 {
    let x2 = x2_curve(x1, p);
    p.w0 * model::response(x1, p) * model::interference(x2, p.m2) - x1 * (p.a1 - p.b1 * x1)
}

/// Prey coordinates of interior equilibria, ascending.
pub fn interior_roots(p: &ModelParams, scan_points: usize) -> Result<Vec<f64>> {
    if scan_points < 100 {
        return Err(Error::Precondition(format!("scan_points = {scan_points} must be >= 100")));
    }
    let k = p.carrying_capacity();
    let f = |x: f64| equilibrium_function(x, p);
    let xs: Vec<f64> = (1..scan_points).map(|i| k * i as f64 / scan_points as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..xs.len() {
        if fs[i] == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < xs.len() && fs[i + 1] != 0.0 && (fs[i] < 0.0) != (fs[i + 1] < 0.0) {
            roots.push(roots::bisect(f, xs[i], xs[i + 1], fs[i], 1e-15));
        }
    }
    Ok(roots)
}

/// All interior equilibria, classified. Empty when none exist.
pub fn interior_equilibria(p: &ModelParams, scan_points: usize) -> Result<Vec<Equilibrium>> {
    interior_roots(p, scan_points)?
        .into_iter()
        .map(|x1| classify(State::new(x1, x2_curve(x1, p)), p))
        .collect()
}

pub fn trivial_equilibrium(p: &ModelParams) -> Equilibrium {
    classify(State::new(0.0, 0.0), p).expect("origin is a valid state")
}

pub fn predator_free_equilibrium(p: &ModelParams) -> Equilibrium {
    classify(State::new(p.carrying_capacity(), 0.0), p).expect("E1 is a valid state")
}

/// E0, E1 and every interior equilibrium.
pub fn all_equilibria(p: &ModelParams, scan_points: usize) -> Result<Vec<Equilibrium>> {
    let mut out = vec![trivial_equilibrium(p), predator_free_equilibrium(p)];
    out.extend(interior_equilibria(p, scan_points)?);
    Ok(out)
}

/// Closed-form Jacobian at a strictly positive point.
pub fn jacobian(point: State, p: &ModelParams) -> Result<Matrix2> {
    if !(point.x1 > 0.0 && point.x2 > 0.0) || !point.x1.is_finite() || !point.x2.is_finite() {
        return Err(Error::Domain(format!(
            "Jacobian needs a strictly positive point, got ({}, {})",
            point.x1, point.x2
        )));
    }
    Ok(jacobian_unchecked(point, p))
}

fn jacobian_unchecked(point: State, p: &ModelParams) -> Matrix2 {
    if p.r == 1.0 {
        jacobian_base(point, p)
    } else {
        jacobian_refuge(point, p)
    }
}

/// Entries without refuge.
fn jacobian_base(s: State, p: &ModelParams) -> Matrix2 {
    let (x, y) = (s.x1, s.x2);
    let g = model::eval_g(x, p);
    // g'(x) = m1 d x^(m1-1) / (x+d)^(m1+1)
    let dg = p.m1 * p.d * x.powf(p.m1 - 1.0) / (x + p.d).powf(p.m1 + 1.0);
    let ym = y.powf(p.m2);
    let dym = p.m2 * y.powf(p.m2 - 1.0);
    [
        [p.a1 - 2.0 * p.b1 * x - p.w0 * dg * ym, -p.w0 * g * dym],
        [p.w1 * dg * ym, -p.a2 + p.w1 * g * dym],
    ]
}

/// Entries with refuge; `d/dx g(r x) = m1 d r^m1 x^(m1-1) / (r x + d)^(m1+1)`.
fn jacobian_refuge(s: State, p: &ModelParams) -> Matrix2 {
    let (x, y) = (s.x1, s.x2);
    let rx = p.r * x;
    let g = model::response(x, p);
    let dg = p.m1 * p.d * p.r.powf(p.m1) * x.powf(p.m1 - 1.0) / (rx + p.d).powf(p.m1 + 1.0);
    let ym = y.powf(p.m2);
    let dym = p.m2 * y.powf(p.m2 - 1.0);
    [
        [p.a1 - 2.0 * p.b1 * x - p.w0 * dg * ym, -p.w0 * g * dym],
        [p.w1 * dg * ym, -p.a2 + p.w1 * g * dym],
    ]
}

fn kind_of(point: State) -> EquilibriumKind {
    match (point.x1 == 0.0, point.x2 == 0.0) {
        (true, true) => EquilibriumKind::Trivial,
        (false, true) => EquilibriumKind::PredatorFree,
        _ => EquilibriumKind::Interior,
    }
}

/// Linearizes at `point` and classifies by trace and determinant.
///
/// Axis points where the closed-form entries are singular (`E0` unless
/// `m1 = m2 = 1`, any point with `x2 = 0` when `m2 < 1`) are reported as
/// `NonLinearizable`.
pub fn classify(point: State, p: &ModelParams) -> Result<Equilibrium> {
    let point = model::guard_state(point)?;
    let kind = kind_of(point);
    let singular = (point.x2 == 0.0 && p.m2 < 1.0) || (point.x1 == 0.0 && p.m1 < 1.0);
    if singular {
        return Ok(Equilibrium {
            kind,
            point,
            jacobian: None,
            spectrum: None,
            classification: Classification::NonLinearizable,
        });
    }
    let j = if point.x1 > 0.0 && point.x2 > 0.0 {
        jacobian_unchecked(point, p)
    } else {
        axis_jacobian(point, p)
    };
    let spectrum = Spectrum::of(&j);
    Ok(Equilibrium { kind, point, jacobian: Some(j), spectrum: Some(spectrum), classification: spectrum.classify() })
}

/// Jacobian on the axes where it exists (`m2 = 1` for `x2 = 0`, `m1 = 1` for `x1 = 0`).
fn axis_jacobian(s: State, p: &ModelParams) -> Matrix2 {
    let (x, y) = (s.x1, s.x2);
    let g = model::response(x, p);
    let dg = if x > 0.0 {
        p.m1 * p.d * p.r.powf(p.m1) * x.powf(p.m1 - 1.0) / (p.r * x + p.d).powf(p.m1 + 1.0)
    } else {
        // m1 = 1
        p.r / p.d
    };
    let (ym, dym) = if y > 0.0 { (y.powf(p.m2), p.m2 * y.powf(p.m2 - 1.0)) } else { (0.0, 1.0) };
    [
        [p.a1 - 2.0 * p.b1 * x - p.w0 * dg * ym, -p.w0 * g * dym],
        [p.w1 * dg * ym, -p.a2 + p.w1 * g * dym],
    ]
}

/// Trace and determinant at an interior point, for sweeps and refinement.
pub fn trace_det(point: State, p: &ModelParams) -> Result<(f64, f64)> {
    let j = jacobian(point, p)?;
    Ok((j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0]))
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

    fn fd_jacobian(s: State, p: &ModelParams) -> Matrix2 {
        let h = 1e-6;
        let f = |x1: f64, x2: f64| model::field(x1, x2, p);
        let (a, b) = (f(s.x1 + h, s.x2), f(s.x1 - h, s.x2));
        let (c, d) = (f(s.x1, s.x2 + h), f(s.x1, s.x2 - h));
        [
            [(a[0] - b[0]) / (2.0 * h), (c[0] - d[0]) / (2.0 * h)],
            [(a[1] - b[1]) / (2.0 * h), (c[1] - d[1]) / (2.0 * h)],
        ]
    }

    #[test]
    fn x2_curve_endpoints_and_values() {
        let p = base_set();
        assert_eq!(x2_of_x1(0.0, &p).unwrap(), 0.0);
        assert!(x2_of_x1(p.carrying_capacity(), &p).unwrap().abs() < 1e-12);
        assert!((x2_of_x1(1.45094, &p).unwrap() - 1.47587).abs() < 1e-4);
        assert!((x2_of_x1(6.67563, &bistable_set()).unwrap() - 31.7032).abs() < 1e-3);
        assert!(x2_of_x1(-0.1, &p).is_err());
        assert!(x2_of_x1(10.0, &p).is_err());
    }

    #[test]
    fn nullcline_closed_form() {
        let p = base_set();
        assert!((predator_nullcline_x1(&p).unwrap() - 1.45094).abs() < 1e-5);
        let lin = ModelParams { m1: 1.0, ..p };
        assert!((predator_nullcline_x1(&lin).unwrap() - 2.0).abs() < 1e-14);
        let refuge = p.with_refuge(0.3).unwrap();
        assert!((predator_nullcline_x1(&refuge).unwrap() - 4.83648).abs() < 1e-5);
        assert!(predator_nullcline_x1(&ModelParams { w1: 0.5, ..p }).is_err());
        assert!(predator_nullcline_x1(&bistable_set()).is_err());
    }

    #[test]
    fn base_set_single_interior_equilibrium() {
        let p = base_set();
        let eqs = interior_equilibria(&p, DEFAULT_SCAN_POINTS).unwrap();
        assert_eq!(eqs.len(), 1);
        let e = eqs[0].point;
        assert!((e.x1 - 1.45094).abs() < 1e-4 && (e.x2 - 1.47587).abs() < 1e-4);
        let closed = predator_nullcline_x1(&p).unwrap();
        assert!((e.x1 - closed).abs() < 1e-10 * closed);
        assert_eq!(eqs[0].classification, Classification::UnstableFocus);
    }

    #[test]
    fn bistable_set_two_interior_equilibria() {
        let eqs = interior_equilibria(&bistable_set(), DEFAULT_SCAN_POINTS).unwrap();
        assert_eq!(eqs.len(), 2);
        assert!((eqs[0].point.x1 - 3.12437).abs() < 1e-3 && (eqs[0].point.x2 - 30.6886).abs() < 1e-3);
        assert!((eqs[1].point.x1 - 6.67563).abs() < 1e-3 && (eqs[1].point.x2 - 31.7032).abs() < 1e-3);
        assert_eq!(eqs[0].classification, Classification::Saddle);
        assert!(eqs[1].classification.is_stable());
        let ev = eqs[1].eigenvalues().unwrap();
        assert!((ev[0].re + 0.17481).abs() < 1e-3 && (ev[1].re + 0.34517).abs() < 1e-3);
    }

    #[test]
    fn residuals_tiny() {
        for p in [base_set(), bistable_set(), bistable_set().with_refuge(0.3).unwrap()] {
            for e in interior_equilibria(&p, DEFAULT_SCAN_POINTS).unwrap() {
                let d = model::rhs(e.point, &p).unwrap();
                let scale = e.point.x1.abs().max(e.point.x2.abs()).max(1.0);
                assert!(d.x1.abs() < 1e-10 * scale && d.x2.abs() < 1e-10 * scale, "{d:?}");
            }
        }
    }

    #[test]
    fn no_interior_when_predator_cannot_persist() {
        let p = ModelParams { w1: 0.9, ..base_set() };
        assert!(interior_equilibria(&p, DEFAULT_SCAN_POINTS).unwrap().is_empty());
        assert!(interior_equilibria(&p, 50).is_err());
    }

    #[test]
    fn boundary_classification() {
        let p = base_set();
        assert_eq!(predator_free_equilibrium(&p).classification, Classification::Saddle);
        assert_eq!(trivial_equilibrium(&p).classification, Classification::NonLinearizable);
        assert_eq!(predator_free_equilibrium(&bistable_set()).classification, Classification::NonLinearizable);
        let classical = ModelParams { m1: 1.0, ..p };
        let e0 = trivial_equilibrium(&classical);
        assert_eq!(e0.classification, Classification::Saddle);
        assert_eq!(e0.jacobian.unwrap(), [[p.a1, 0.0], [0.0, -p.a2]]);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for p in [base_set(), bistable_set(), base_set().with_refuge(0.3).unwrap()] {
            let s = State::new(1.0, 1.0);
            let j = jacobian(s, &p).unwrap();
            let fd = fd_jacobian(s, &p);
            for i in 0..2 {
                for k in 0..2 {
                    assert!((j[i][k] - fd[i][k]).abs() <= 1e-5 * j[i][k].abs().max(1e-3), "{j:?} vs {fd:?}");
                }
            }
        }
        assert!(jacobian(State::new(0.0, 1.0), &base_set()).is_err());
    }

    #[test]
    fn refuge_form_reduces_to_base_at_r_one() {
        let p = bistable_set();
        for s in [State::new(0.3, 2.0), State::new(5.0, 30.0)] {
            assert_eq!(jacobian_refuge(s, &p), jacobian_base(s, &p));
        }
    }

    #[test]
    fn refuge_saddle_eigenvalues() {
        let p = bistable_set().with_refuge(0.3).unwrap();
        let e = classify(State::new(2.30292, 25.3225), &p).unwrap();
        assert_eq!(e.classification, Classification::Saddle);
        let ev = e.eigenvalues().unwrap();
        assert!((ev[0].re - 0.19897).abs() < 1e-3 && (ev[1].re + 0.32246).abs() < 1e-3);
    }

    #[test]
    fn spectrum_identities() {
        for (tr, det) in [(1.0, -2.0), (-0.5, 0.05), (-0.5, 3.0), (1e-8, 1e-20), (0.0, 1.0)] {
            let s = Spectrum::from_trace_det(tr, det);
            let sum = s.eigenvalues[0] + s.eigenvalues[1];
            let prod = s.eigenvalues[0] * s.eigenvalues[1];
            assert!((sum.re - tr).abs() <= 1e-9 * tr.abs().max(1e-12) && sum.im.abs() < 1e-12);
            assert!((prod.re - det).abs() <= 1e-9 * det.abs() && prod.im.abs() < 1e-9);
        }
        assert_eq!(Spectrum::from_trace_det(0.0, 1.0).classify(), Classification::CenterDegenerate);
    }
}
