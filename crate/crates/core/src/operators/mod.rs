//! Pointwise evaluation of the Hardy operator `P_m`, the weighted Hardy
//! operator `P_{φ,m}` and the weighted Cesàro operator `P*_{φ,m}`, together
//! with norm quotients and weight characteristics.

mod dominance;
mod quotient;
pub mod weight;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::closedform::Kind;
use crate::closedform::{self, monomial_characteristic};
use crate::error::{Error, Result};
use crate::funcs::{check_p, ProductPoint, TestFunction};
use crate::hgroup::ProductSpec;
use crate::measure::quadrature::{integrate, QuadOptions};
use crate::measure::rng::run_chunks;
use crate::measure::{radial_integral_with_breaks, Budget, Estimate, Method, Moments};
pub use quotient::{norm_quotient, pairing, Norms};
pub use weight::Weight;

/// One of the three operators.
#[derive(Clone, Debug)]
pub enum Operator {
    Hardy,
    WeightedHardy(Weight),
    WeightedCesaro(Weight),
}

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::Hardy => "hardy",
            Operator::WeightedHardy(_) => "weighted-hardy",
            Operator::WeightedCesaro(_) => "weighted-cesaro",
        }
    }

    pub fn weight(&self) -> Option<&Weight> {
        match self {
            Operator::Hardy => None,
            Operator::WeightedHardy(w) | Operator::WeightedCesaro(w) => Some(w),
        }
    }

    /// Evaluates the operator at `x`.
    pub fn eval(
        &self,
        f: &TestFunction,
        spec: &ProductSpec,
        x: &ProductPoint,
        p: f64,
        method: Method,
        budget: &Budget,
    ) -> Result<Estimate> {
        match self {
            Operator::Hardy => hardy_eval(f, spec, x, method, budget),
            Operator::WeightedHardy(w) => weighted_hardy_eval(f, w, spec, x, method, budget),
            Operator::WeightedCesaro(w) => weighted_cesaro_eval(f, w, spec, x, p, method, budget),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.weight() {
            None => f.write_str(self.name()),
            Some(w) => write!(f, "{}[{w}]", self.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub(crate) enum Direction {
    /// `f(δ_t x)`.
    Hardy,
    /// `f(δ_{1/t} x) / Π t_i^{Q_i}`.
    Cesaro,
}

fn checked_radii(f: &TestFunction, spec: &ProductSpec, x: &ProductPoint) -> Result<Vec<f64>> {
    f.check_spec(spec)?;
    x.check_spec(spec)?;
    let radii = x.radii();
    if let Some(i) = radii.iter().position(|r| *r == 0.0) {
        return Err(Error::Domain(format!("|x_{}|_h = 0: the operator is undefined there", i + 1)));
    }
    Ok(radii)
}

/// `P_m f(x)`: the average of `f` over `B(0,|x_1|) × … × B(0,|x_m|)`.
pub fn hardy_eval(f: &TestFunction, spec: &ProductSpec, x: &ProductPoint, method: Method, budget: &Budget) -> Result<Estimate> {
    let radii = checked_radii(f, spec, x)?;
    match method {
        Method::Closed => closedform::hardy_power_value(f, spec, &radii).map(Estimate::exact),
        Method::Radial => hardy_radial_value(f, spec, &radii, budget.tol).map(Estimate::exact),
        Method::Mc => {
            let vol = spec.polyball_volume(&radii)?;
            let est = crate::measure::mc_integrate(|y| f.eval_unchecked(y), spec, &radii, budget.samples, budget.seed)?;
            Ok(Estimate {
                value: est.value / vol,
                std_error: est.std_error / vol,
                ..est
            })
        }
    }
}

/// `P_m f` at radii `R` for a radial function, by one radial quadrature per factor.
pub(crate) fn hardy_radial_value(f: &TestFunction, spec: &ProductSpec, radii: &[f64], tol: f64) -> Result<f64> {
    if !f.is_radial() {
        return Err(Error::Unsupported("radial quadrature needs a radial-product function".into()));
    }
    let mut v = 1.0;
    for (i, d) in spec.factors().iter().enumerate() {
        let profile = f.profile(i).expect("radial family");
        let r = radii[i];
        let breaks: Vec<f64> = f.breakpoints(i).into_iter().filter(|b| *b < r).collect();
        v *= radial_integral_with_breaks(|s| profile.eval(s), d, r, &breaks, tol)? / d.ball_volume(r)?;
    }
    Ok(v)
}

/// `P_{φ,m} f(x) = ∫_{[0,1]^m} f(δ_{t_1}x_1, …, δ_{t_m}x_m) φ(t) dt`.
pub fn weighted_hardy_eval(
    f: &TestFunction,
    phi: &Weight,
    spec: &ProductSpec,
    x: &ProductPoint,
    method: Method,
    budget: &Budget,
) -> Result<Estimate> {
    phi.check_m(spec.m())?;
    let radii = checked_radii(f, spec, x)?;
    match method {
        Method::Closed => closed_weighted(f, phi, spec, &radii, Direction::Hardy).map(Estimate::exact),
        Method::Radial => weighted_quadrature(f, phi, spec, x, &radii, Direction::Hardy, budget.tol).map(Estimate::exact),
        Method::Mc => weighted_mc(f, phi, spec, x, Direction::Hardy, budget),
    }
}

/// `P*_{φ,m} f(x) = ∫_{[0,1]^m} f(δ_{1/t_1}x_1, …) φ(t) / Π t_i^{Q_i} dt`.
///
/// Rejected with [`Error::Unbounded`] when the characteristic integral
/// `∫ Π t_i^{-Q_i(1-1/p)} φ(t) dt` diverges.
pub fn weighted_cesaro_eval(
    f: &TestFunction,
    phi: &Weight,
    spec: &ProductSpec,
    x: &ProductPoint,
    p: f64,
    method: Method,
    budget: &Budget,
) -> Result<Estimate> {
    phi.check_m(spec.m())?;
    check_cesaro_bounded(phi, p, spec)?;
    let radii = checked_radii(f, spec, x)?;
    match method {
        Method::Closed => closed_weighted(f, phi, spec, &radii, Direction::Cesaro).map(Estimate::exact),
        Method::Radial => weighted_quadrature(f, phi, spec, x, &radii, Direction::Cesaro, budget.tol).map(Estimate::exact),
        Method::Mc => weighted_mc(f, phi, spec, x, Direction::Cesaro, budget),
    }
}

pub(crate) fn check_cesaro_bounded(phi: &Weight, p: f64, spec: &ProductSpec) -> Result<()> {
    let c = weight_bound_integral(phi, p, spec, Kind::Cesaro)?;
    if c.is_infinite() {
        return Err(Error::Unbounded(format!(
            "unbounded operator: ∫ Π t_i^(-Q_i(1-1/p)) φ(t) dt diverges for φ = {phi}, p = {p}"
        )));
    }
    Ok(())
}

fn closed_weighted(f: &TestFunction, phi: &Weight, spec: &ProductSpec, radii: &[f64], dir: Direction) -> Result<f64> {
    let a = phi
        .exponents()
        .ok_or_else(|| Error::Unsupported("closed forms need a monomial weight".into()))?;
    match dir {
        Direction::Hardy => closedform::weighted_hardy_power_value(f, a, spec, radii),
        Direction::Cesaro => closedform::weighted_cesaro_power_value(f, a, spec, radii),
    }
}

/// `ln |T f|` from log-radii, for radii beyond the range of `f64`.
pub(crate) fn closed_weighted_ln(
    f: &TestFunction,
    phi: &Weight,
    spec: &ProductSpec,
    ln_r: &[f64],
    dir: Direction,
) -> Result<f64> {
    let a = phi
        .exponents()
        .ok_or_else(|| Error::Unsupported("closed forms need a monomial weight".into()))?;
    let kind = match dir {
        Direction::Hardy => Kind::Hardy,
        Direction::Cesaro => Kind::Cesaro,
    };
    closedform::ln_weighted_power_value(f, a, spec, ln_r, kind)
}

/// Point `(δ_{s_1} x_1, …)` with `s_i = t_i` (Hardy) or `1/t_i` (Cesàro) and the
/// Jacobian factor of the Cesàro kernel.
fn dilated(x: &ProductPoint, spec: &ProductSpec, t: &[f64], dir: Direction) -> (ProductPoint, f64) {
    match dir {
        Direction::Hardy => (x.dilate_each_unchecked(t), 1.0),
        Direction::Cesaro => {
            let inv: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
            let jac = spec.factors().iter().zip(t).map(|(d, t)| t.powi(-(d.q as i32))).product();
            (x.dilate_each_unchecked(&inv), jac)
        }
    }
}

/// `t` values where the integrand in factor `i` may lose smoothness.
fn t_breaks(f: &TestFunction, i: usize, r: f64, dir: Direction) -> Vec<f64> {
    let mut out: Vec<f64> = f
        .breakpoints(i)
        .into_iter()
        .filter(|b| *b > 0.0)
        .map(|b| match dir {
            Direction::Hardy => b / r,
            Direction::Cesaro => r / b,
        })
        .filter(|t| *t > 0.0 && *t < 1.0)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn weighted_quadrature(
    f: &TestFunction,
    phi: &Weight,
    spec: &ProductSpec,
    x: &ProductPoint,
    radii: &[f64],
    dir: Direction,
    tol: f64,
) -> Result<f64> {
    let opts = QuadOptions::with_tol(tol);
    if f.is_radial() && phi.is_separable() {
        let mut v = 1.0;
        for (i, d) in spec.factors().iter().enumerate() {
            let profile = f.profile(i).expect("radial family");
            let w = phi.factor(i).expect("separable weight");
            let r = radii[i];
            let q = d.q as i32;
            let g = |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                match dir {
                    Direction::Hardy => profile.eval(t * r) * w(t),
                    Direction::Cesaro => {
                        let fv = profile.eval(r / t);
                        if fv == 0.0 {
                            0.0
                        } else {
                            fv * w(t) * t.powi(-q)
                        }
                    }
                }
            };
            v *= integrate(&g, 0.0, 1.0, &t_breaks(f, i, r, dir), &opts)?;
            if v == 0.0 {
                break;
            }
        }
        return Ok(v);
    }
    let breaks: Vec<Vec<f64>> = (0..spec.m()).map(|i| t_breaks(f, i, radii[i], dir)).collect();
    let g = |t: &[f64]| {
        if t.iter().any(|t| *t <= 0.0) {
            return 0.0;
        }
        let w = phi.eval(t);
        if w == 0.0 {
            return 0.0;
        }
        let (y, jac) = dilated(x, spec, t, dir);
        let fv = f.eval_unchecked(&y);
        if fv == 0.0 {
            0.0
        } else {
            fv * w * jac
        }
    };
    nested_cube(&g, &breaks, &opts)
}

/// `∫_{[0,1]^m} g(t) dt` by nested adaptive quadrature.
pub(crate) fn nested_cube(g: &(dyn Fn(&[f64]) -> f64 + Sync), breaks: &[Vec<f64>], opts: &QuadOptions) -> Result<f64> {
    fn level(g: &(dyn Fn(&[f64]) -> f64 + Sync), breaks: &[Vec<f64>], prefix: &[f64], opts: &QuadOptions) -> f64 {
        let j = prefix.len();
        if j == breaks.len() {
            return g(prefix);
        }
        let inner = QuadOptions {
            rel_tol: opts.rel_tol * 0.1,
            ..*opts
        };
        let h = |t: f64| {
            let mut p = prefix.to_vec();
            p.push(t);
            level(g, breaks, &p, &inner)
        };
        integrate(&h, 0.0, 1.0, &breaks[j], opts).unwrap_or(f64::NAN)
    }
    let v = level(g, breaks, &[], opts);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            point: "nested quadrature over [0,1]^m".into(),
            value: v,
        });
    }
    Ok(v)
}

fn weighted_mc(
    f: &TestFunction,
    phi: &Weight,
    spec: &ProductSpec,
    x: &ProductPoint,
    dir: Direction,
    budget: &Budget,
) -> Result<Estimate> {
    if budget.samples == 0 {
        return Err(Error::invalid("Monte Carlo needs at least one sample"));
    }
    let m = spec.m();
    let parts = run_chunks(budget.samples, budget.seed, |rng, range| -> Result<Moments> {
        let mut acc = Moments::default();
        let mut t = vec![0.0; m];
        for _ in range {
            for ti in t.iter_mut() {
                *ti = 1.0 - rng.gen::<f64>();
            }
            let (y, jac) = dilated(x, spec, &t, dir);
            let fv = f.eval_unchecked(&y);
            let v = if fv == 0.0 { 0.0 } else { fv * phi.eval(&t) * jac };
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    point: format!("t = {t:?}"),
                    value: v,
                });
            }
            acc.push(v);
        }
        Ok(acc)
    });
    let moments = Moments::merge_all(parts.into_iter().collect::<Result<Vec<_>>>()?);
    Ok(moments.mean_estimate(1.0, budget.seed))
}

/// `∫_{[0,1]^m} Π t_i^{-s_i} φ(t) dt` with `s_i = Q_i/p` (Hardy) or
/// `Q_i(1-1/p)` (Cesàro). Divergence is reported as `+∞`.
pub fn weight_bound_integral(phi: &Weight, p: f64, spec: &ProductSpec, kind: Kind) -> Result<f64> {
    check_p(p)?;
    phi.check_m(spec.m())?;
    if let Some(a) = phi.exponents() {
        return monomial_characteristic(a, p, spec, kind);
    }
    let opts = QuadOptions::with_tol(1e-9);
    let s: Vec<f64> = spec.factors().iter().map(|d| kind.exponent(d.qf(), p)).collect();
    let result = if phi.is_separable() {
        let mut v = 1.0;
        for (i, si) in s.iter().enumerate() {
            let w = phi.factor(i).expect("separable weight");
            let si = *si;
            match integrate(&|t: f64| if t <= 0.0 { 0.0 } else { w(t) * t.powf(-si) }, 0.0, 1.0, &[], &opts) {
                Ok(x) => v *= x,
                Err(e) => return divergence_or(e),
            }
        }
        Ok(v)
    } else {
        let g = |t: &[f64]| {
            let w = phi.eval(t);
            if w == 0.0 {
                0.0
            } else {
                w * t.iter().zip(&s).map(|(t, s)| t.powf(-s)).product::<f64>()
            }
        };
        nested_cube(&g, &vec![vec![]; spec.m()], &opts)
    };
    match result {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Ok(f64::INFINITY),
        Err(e) => divergence_or(e),
    }
}

fn divergence_or(e: Error) -> Result<f64> {
    match e {
        Error::NonConvergence { .. } | Error::NonFinite { .. } => Ok(f64::INFINITY),
        other => Err(other),
    }
}
