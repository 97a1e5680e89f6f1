//! Exact values for the power families: ball averages, norm quotients of the
//! three operators, extremal lower bounds and weight characteristics.
//!
//! All formulas factor over the product, so every quotient is a product of
//! one-factor quotients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcs::{check_p, TestFunction};
use crate::hgroup::{GroupDims, ProductSpec};
use crate::special::ln_beta;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpConstant {
    pub p: f64,
    pub m: usize,
    pub value: f64,
}

pub fn sharp_constant(p: f64, m: usize) -> Result<SharpConstant> {
    check_p(p)?;
    if m == 0 {
        return Err(Error::invalid("m must be positive"));
    }
    Ok(SharpConstant {
        p,
        m,
        value: (p / (p - 1.0)).powi(m as i32),
    })
}

/// Which characteristic integral of a weight is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Hardy,
    Cesaro,
}

impl Kind {
    /// The exponent `s` in `∫₀¹ t^{-s} φ(t) dt`.
    pub fn exponent(self, q: f64, p: f64) -> f64 {
        match self {
            Kind::Hardy => q / p,
            Kind::Cesaro => q * (1.0 - 1.0 / p),
        }
    }
}

/// Average of `|y|^α 1{|y| < 1}` over `B(0, R)`.
pub fn ball_average_power(alpha: f64, dims: &GroupDims, radius: f64) -> Result<f64> {
    let q = dims.qf();
    if !(alpha + q > 0.0) {
        return Err(Error::Domain(format!("α + Q = {} must be positive", alpha + q)));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius {radius} must be positive")));
    }
    let c = q / (alpha + q);
    Ok(if radius <= 1.0 {
        c * radius.powf(alpha)
    } else {
        c * radius.powf(-q)
    })
}

/// Average of `|y|^{-β} 1{|y| > 1}` over `B(0, R)`.
pub fn ball_average_outside(beta: f64, dims: &GroupDims, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius {radius} must be positive")));
    }
    if radius <= 1.0 {
        return Ok(0.0);
    }
    let q = dims.qf();
    let k = q - beta;
    let inner = if k.abs() < 1e-12 {
        radius.ln()
    } else {
        (radius.powf(k) - 1.0) / k
    };
    Ok(q * inner / radius.powf(q))
}

/// `P_m f` at radii `R` for the power families.
pub fn hardy_power_value(f: &TestFunction, spec: &ProductSpec, radii: &[f64]) -> Result<f64> {
    f.check_spec(spec)?;
    let mut v = 1.0;
    for (i, d) in spec.factors().iter().enumerate() {
        v *= match f {
            TestFunction::PowerInside(a) => ball_average_power(a[i], d, radii[i])?,
            TestFunction::PowerOutside(b) => ball_average_outside(b[i], d, radii[i])?,
            _ => return Err(Error::Unsupported("closed-form P_m needs a power family".into())),
        };
    }
    Ok(v)
}

fn check_eps(eps: f64, p: f64, spec: &ProductSpec) -> Result<()> {
    check_p(p)?;
    let cap = spec
        .factors()
        .iter()
        .map(|d| (p - 1.0) * d.qf() / p)
        .fold(f64::INFINITY, f64::min);
    if !(eps > 0.0 && eps < cap) {
        return Err(Error::Domain(format!("ε = {eps} outside (0, {cap})")));
    }
    Ok(())
}

/// `‖P_m f‖_p / ‖f‖_p` for `f = Π |x_i|^{α_i} 1{|x_i|<1}`, any `α_i > -Q_i/p`.
pub fn hardy_power_inside_quotient(alphas: &[f64], p: f64, spec: &ProductSpec) -> Result<f64> {
    check_p(p)?;
    TestFunction::PowerInside(alphas.to_vec()).check_finite_norm(spec, p)?;
    Ok(alphas
        .iter()
        .zip(spec.factors())
        .map(|(a, d)| {
            let q = d.qf();
            q / (a + q) * (1.0 + (a * p + q) / (q * (p - 1.0))).powf(1.0 / p)
        })
        .product())
}

/// Exact quotient of the inside extremal `α_i = -Q_i/p + ε`.
pub fn power_family_quotient(eps: f64, p: f64, spec: &ProductSpec) -> Result<f64> {
    check_eps(eps, p, spec)?;
    let alphas: Vec<f64> = spec.factors().iter().map(|d| -d.qf() / p + eps).collect();
    hardy_power_inside_quotient(&alphas, p, spec)
}

/// `Π p / (p - 1 + pε/Q_i)`: the inner-ball part of the extremal quotient.
pub fn extremal_lower_bound(eps: f64, p: f64, spec: &ProductSpec) -> Result<f64> {
    check_eps(eps, p, spec)?;
    Ok(spec
        .factors()
        .iter()
        .map(|d| extremal_ball_average(eps, p, d))
        .product())
}

/// `(1/|B(0,1)|) ∫_{|z|<1} |z|^{-Q/p+ε} dz`.
pub fn extremal_ball_average(eps: f64, p: f64, dims: &GroupDims) -> f64 {
    p / (p - 1.0 + p * eps / dims.qf())
}

fn monomial_exponents<'a>(a: &'a [f64], spec: &ProductSpec) -> Result<&'a [f64]> {
    if a.len() != spec.m() {
        return Err(Error::DimensionMismatch {
            expected: spec.m(),
            found: a.len(),
        });
    }
    if a.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::invalid("monomial exponents must be finite and nonnegative"));
    }
    Ok(a)
}

/// `∫_{[0,1]^m} Π t_i^{-s_i} t_i^{a_i} dt` for a monomial weight; `+∞` when a
/// factor diverges.
pub fn monomial_characteristic(a: &[f64], p: f64, spec: &ProductSpec, kind: Kind) -> Result<f64> {
    check_p(p)?;
    let a = monomial_exponents(a, spec)?;
    let mut v = 1.0;
    for (a, d) in a.iter().zip(spec.factors()) {
        let e = a + 1.0 - kind.exponent(d.qf(), p);
        if e <= 0.0 {
            return Ok(f64::INFINITY);
        }
        v /= e;
    }
    Ok(v)
}

/// Lower bound for `‖P_{φ,m}‖` from the outside extremal:
/// `Π ε^ε ∫_ε^1 t^{a_i - Q_i/p - ε} dt`.
pub fn weighted_extremal_bound(a: &[f64], eps: f64, p: f64, spec: &ProductSpec) -> Result<f64> {
    Ok(eps.powf(eps * spec.m() as f64) * weighted_extremal_bound_uncorrected(a, eps, p, spec)?)
}

/// The same bound without the `ε^ε` factors.
pub fn weighted_extremal_bound_uncorrected(a: &[f64], eps: f64, p: f64, spec: &ProductSpec) -> Result<f64> {
    check_p(p)?;
    let a = monomial_exponents(a, spec)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε = {eps} outside (0, 1)")));
    }
    Ok(a.iter()
        .zip(spec.factors())
        .map(|(a, d)| {
            let e = a + 1.0 - d.qf() / p - eps;
            if e.abs() < 1e-14 {
                -eps.ln()
            } else {
                (1.0 - eps.powf(e)) / e
            }
        })
        .product())
}

/// `ln((1 - R^{-c})/c)` for `ln R = l > 0`, continuous at `c = 0`.
fn ln_one_minus_pow_over(c: f64, l: f64) -> f64 {
    if c.abs() < 1e-12 {
        l.ln()
    } else if c > 0.0 {
        (-(-c * l).exp_m1()).ln() - c.ln()
    } else {
        -c * l + (-(c * l).exp_m1()).ln() - (-c).ln()
    }
}

/// `ln |T f|` at log-radii `ln R` for a power family and `φ = Π t^{a_i}`,
/// with `T = P_{φ,m}` (`Kind::Hardy`) or `P*_{φ,m}` (`Kind::Cesaro`).
/// Working with logarithms keeps radii far beyond `f64` range usable.
pub(crate) fn ln_weighted_power_value(
    f: &TestFunction,
    a: &[f64],
    spec: &ProductSpec,
    ln_radii: &[f64],
    kind: Kind,
) -> Result<f64> {
    f.check_spec(spec)?;
    let a = monomial_exponents(a, spec)?;
    if ln_radii.len() != spec.m() {
        return Err(Error::DimensionMismatch {
            expected: spec.m(),
            found: ln_radii.len(),
        });
    }
    let mut v = 0.0;
    for (i, d) in spec.factors().iter().enumerate() {
        let l = ln_radii[i];
        if l.is_nan() || l == f64::NEG_INFINITY {
            return Err(Error::Domain("radius must be positive".into()));
        }
        let q = d.qf();
        v += match (f, kind) {
            // R^α ∫₀^{min(1,1/R)} t^{α+a} dt
            (TestFunction::PowerInside(al), Kind::Hardy) => {
                let e = al[i] + a[i] + 1.0;
                if e <= 0.0 {
                    return Err(Error::Unbounded(format!("∫ t^{} diverges at 0", e - 1.0)));
                }
                al[i] * l - e * l.max(0.0) - e.ln()
            }
            // R^{-β} ∫_{1/R}^1 t^{a-β} dt for R > 1
            (TestFunction::PowerOutside(b), Kind::Hardy) => {
                if l <= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                -b[i] * l + ln_one_minus_pow_over(a[i] - b[i] + 1.0, l)
            }
            // R^α ∫_R^1 t^{a-Q-α} dt for R < 1
            (TestFunction::PowerInside(al), Kind::Cesaro) => {
                if l >= 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                al[i] * l + ln_one_minus_pow_over(a[i] - q - al[i] + 1.0, -l)
            }
            // R^{-β} ∫₀^{min(1,R)} t^{β+a-Q} dt
            (TestFunction::PowerOutside(b), Kind::Cesaro) => {
                let e = b[i] + a[i] - q + 1.0;
                if e <= 0.0 {
                    return Err(Error::Unbounded(format!("∫ t^{} diverges at 0", e - 1.0)));
                }
                -b[i] * l + e * l.min(0.0) - e.ln()
            }
            _ => return Err(Error::Unsupported("closed-form weighted values need a power family".into())),
        };
    }
    Ok(v)
}

fn ln_radii(radii: &[f64]) -> Result<Vec<f64>> {
    radii
        .iter()
        .map(|&r| {
            if r > 0.0 {
                Ok(r.ln())
            } else {
                Err(Error::Domain("radius must be positive".into()))
            }
        })
        .collect()
}

/// `P_{φ,m} f` at radii `R` for a power family and `φ = Π t^{a_i}`.
pub fn weighted_hardy_power_value(f: &TestFunction, a: &[f64], spec: &ProductSpec, radii: &[f64]) -> Result<f64> {
    ln_weighted_power_value(f, a, spec, &ln_radii(radii)?, Kind::Hardy).map(f64::exp)
}

/// `P*_{φ,m} f` at radii `R` for a power family and `φ = Π t^{a_i}`.
pub fn weighted_cesaro_power_value(f: &TestFunction, a: &[f64], spec: &ProductSpec, radii: &[f64]) -> Result<f64> {
    ln_weighted_power_value(f, a, spec, &ln_radii(radii)?, Kind::Cesaro).map(f64::exp)
}

/// `‖P_{φ,m} f‖_p / ‖f‖_p` for a power family and `φ = Π t^{a_i}`.
pub fn weighted_hardy_power_quotient(f: &TestFunction, a: &[f64], p: f64, spec: &ProductSpec) -> Result<f64> {
    check_p(p)?;
    f.check_finite_norm(spec, p)?;
    let a = monomial_exponents(a, spec)?;
    let mut qp = 1.0;
    for (i, d) in spec.factors().iter().enumerate() {
        let q = d.qf();
        qp *= match f {
            TestFunction::PowerInside(al) => {
                let e = al[i] + a[i] + 1.0;
                let tail = (a[i] + 1.0) * p - q;
                if e <= 0.0 || tail <= 0.0 {
                    return Err(Error::Unbounded("weighted Hardy image has infinite norm".into()));
                }
                (1.0 + (al[i] * p + q) / tail) / e.powf(p)
            }
            TestFunction::PowerOutside(b) => {
                let c = a[i] - b[i] + 1.0;
                let kappa = b[i] * p - q;
                if c <= 0.0 {
                    return Err(Error::Unsupported("closed form needs a_i + 1 > β_i".into()));
                }
                // ω c^{-p-1} B(κ/c, p+1) over ω/κ
                kappa * (ln_beta(kappa / c, p + 1.0).exp()) / c.powf(p + 1.0)
            }
            _ => return Err(Error::Unsupported("closed-form quotient needs a power family".into())),
        };
    }
    Ok(qp.powf(1.0 / p))
}

/// `‖P*_{φ,m} f‖_p / ‖f‖_p` for a power family and `φ = Π t^{a_i}`.
pub fn weighted_cesaro_power_quotient(f: &TestFunction, a: &[f64], p: f64, spec: &ProductSpec) -> Result<f64> {
    check_p(p)?;
    f.check_finite_norm(spec, p)?;
    let a = monomial_exponents(a, spec)?;
    let mut qp = 1.0;
    for (i, d) in spec.factors().iter().enumerate() {
        let q = d.qf();
        qp *= match f {
            TestFunction::PowerInside(al) => {
                let dd = a[i] + 1.0 - q - al[i];
                let g = al[i] * p + q;
                if dd <= 0.0 {
                    return Err(Error::Unsupported("closed form needs a_i + 1 > Q_i + α_i".into()));
                }
                g * ln_beta(g / dd, p + 1.0).exp() / dd.powf(p + 1.0)
            }
            TestFunction::PowerOutside(b) => {
                let e = b[i] + a[i] - q + 1.0;
                let inner = (a[i] + 1.0 - q) * p + q;
                let kappa = b[i] * p - q;
                if e <= 0.0 || inner <= 0.0 {
                    return Err(Error::Unbounded("weighted Cesàro image has infinite norm".into()));
                }
                (1.0 + kappa / inner) / e.powf(p)
            }
            _ => return Err(Error::Unsupported("closed-form quotient needs a power family".into())),
        };
    }
    Ok(qp.powf(1.0 / p))
}

/// `⟨1_B, P_φ 1_B⟩ = ⟨1_B, P*_φ 1_B⟩ = Π |B(0,1)_i| / (a_i + 1)` for the unit
/// polyball indicator.
pub fn indicator_pairing(a: &[f64], spec: &ProductSpec) -> Result<f64> {
    let a = monomial_exponents(a, spec)?;
    Ok(a.iter().zip(spec.factors()).map(|(a, d)| d.volume / (a + 1.0)).product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::radial_integral_with_breaks;
    use crate::measure::quadrature::{integrate, QuadOptions};
    use std::f64::consts::PI;

    fn spec(ns: &[usize]) -> ProductSpec {
        ProductSpec::new(ns).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn sharp_constants() {
        assert_eq!(sharp_constant(2.0, 2).unwrap().value, 4.0);
        assert_eq!(sharp_constant(3.0, 1).unwrap().value, 1.5);
        let big = sharp_constant(1000.0, 1).unwrap().value;
        assert!(big > 1.0 && (big - 1.001).abs() < 1e-5);
        assert!(sharp_constant(1.0, 1).is_err());
        assert!(sharp_constant(2.0, 0).is_err());
    }

    #[test]
    fn ball_average_examples() {
        let d = GroupDims::new(1).unwrap();
        assert_eq!(ball_average_power(0.0, &d, 0.7).unwrap(), 1.0);
        assert!(close(ball_average_power(-1.0, &d, 0.5).unwrap(), 8.0 / 3.0, 1e-15));
        assert!(close(ball_average_power(-1.0, &d, 2.0).unwrap(), 1.0 / 12.0, 1e-15));
        assert!(ball_average_power(-4.0, &d, 0.5).is_err());
    }

    #[test]
    fn ball_averages_match_quadrature() {
        // (Q/R^Q) ∫₀^R F(r) r^{Q-1} dr by adaptive quadrature
        for n in 1..=2 {
            let d = GroupDims::new(n).unwrap();
            let q = d.qf();
            for r in [0.3, 1.0, 2.5] {
                for alpha in [-1.5, 0.5] {
                    let num = radial_integral_with_breaks(
                        |s| if s < 1.0 { s.powf(alpha) } else { 0.0 },
                        &d,
                        r,
                        &[1.0],
                        1e-13,
                    )
                    .unwrap()
                        / d.ball_volume(r).unwrap();
                    assert!(close(ball_average_power(alpha, &d, r).unwrap(), num, 1e-10));
                }
                for beta in [q, 1.5, 3.0 + q] {
                    let num = radial_integral_with_breaks(
                        |s| if s > 1.0 { s.powf(-beta) } else { 0.0 },
                        &d,
                        r,
                        &[1.0],
                        1e-13,
                    )
                    .unwrap()
                        / d.ball_volume(r).unwrap();
                    let v = ball_average_outside(beta, &d, r).unwrap();
                    assert!((v - num).abs() <= 1e-10 * num.max(1e-12), "β={beta} R={r}: {v} vs {num}");
                }
            }
        }
    }

    #[test]
    fn extremal_quotient_examples() {
        let s1 = spec(&[1]);
        let q = |e: f64| power_family_quotient(e, 2.0, &s1).unwrap();
        assert!((q(0.1) - 1.951_800_145_897_066).abs() < 1e-12);
        assert!((q(0.1) - 4.0 / 2.1 * 1.05f64.sqrt()).abs() < 1e-14);
        assert!((q(0.05) - 1.97546).abs() < 5e-6);
        assert!((q(0.025) - 1.987_615_979_999_813).abs() < 1e-12);
        assert!((q(0.025) - 1.98758).abs() < 1e-4);
        assert!((q(0.2) - 1.906925).abs() < 5e-7);
        let s2 = spec(&[1, 1]);
        assert!((power_family_quotient(0.1, 2.0, &s2).unwrap() - q(0.1).powi(2)).abs() < 1e-13);
        assert!((power_family_quotient(0.1, 2.0, &s2).unwrap() - 80.0 / 21.0).abs() < 1e-14);
        assert!(power_family_quotient(0.0, 2.0, &s1).is_err());
        assert!(power_family_quotient(2.0, 2.0, &s1).is_err());
        // indicator: √(p/(p-1)) per factor
        assert!((hardy_power_inside_quotient(&[0.0], 2.0, &s1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_chain() {
        for ns in [vec![1], vec![1, 1], vec![2, 1]] {
            let s = spec(&ns);
            for p in [1.5, 2.0, 3.0] {
                let sharp = sharp_constant(p, s.m()).unwrap().value;
                let mut prev = 0.0;
                for eps in [0.2, 0.1, 0.05, 0.025, 0.0125] {
                    let lb = extremal_lower_bound(eps, p, &s).unwrap();
                    let qv = power_family_quotient(eps, p, &s).unwrap();
                    assert!(lb <= qv && qv < sharp, "{ns:?} p={p} ε={eps}");
                    assert!(qv > prev);
                    prev = qv;
                }
                let tiny = power_family_quotient(1e-9, p, &s).unwrap();
                assert!((tiny - sharp).abs() < 1e-7 * sharp);
            }
        }
        let s2 = spec(&[1, 1]);
        assert!((extremal_lower_bound(0.1, 2.0, &spec(&[1])).unwrap() - 2.0 / 1.05).abs() < 1e-15);
        assert!((extremal_lower_bound(0.1, 2.0, &s2).unwrap() - 3.62812).abs() < 5e-6);
    }

    #[test]
    fn typo_corrected_average_matches_quadrature() {
        for n in 1..=3 {
            let d = GroupDims::new(n).unwrap();
            for (p, eps) in [(2.0, 0.1), (3.0, 0.05), (1.5, 0.2)] {
                let alpha = -d.qf() / p + eps;
                let num = radial_integral_with_breaks(|r| r.powf(alpha), &d, 1.0, &[], 1e-13).unwrap() / d.volume;
                assert!(close(extremal_ball_average(eps, p, &d), num, 1e-10));
            }
        }
    }

    #[test]
    fn characteristic_integrals() {
        let s1 = spec(&[1]);
        assert_eq!(monomial_characteristic(&[3.0], 2.0, &s1, Kind::Hardy).unwrap(), 0.5);
        assert_eq!(monomial_characteristic(&[3.0, 3.0], 2.0, &spec(&[1, 1]), Kind::Hardy).unwrap(), 0.25);
        assert_eq!(monomial_characteristic(&[3.0], 2.0, &s1, Kind::Cesaro).unwrap(), 0.5);
        assert_eq!(monomial_characteristic(&[0.0], 2.0, &s1, Kind::Cesaro).unwrap(), f64::INFINITY);
        assert_eq!(monomial_characteristic(&[0.0], 2.0, &s1, Kind::Hardy).unwrap(), f64::INFINITY);
    }

    #[test]
    fn weighted_bounds() {
        let s1 = spec(&[1]);
        let b = |e| weighted_extremal_bound(&[3.0], e, 2.0, &s1).unwrap();
        assert!((b(0.1) - 0.412_804_334_065_411_3).abs() < 1e-13);
        assert!((b(0.1) - 0.41281).abs() < 1e-4);
        assert!((b(0.1) - 0.1f64.powf(0.1) * (1.0 - 0.1f64.powf(1.9)) / 1.9).abs() < 1e-15);
        assert!((b(0.001) - 0.496_805_927_174_054).abs() < 1e-13);
        assert!(b(1e-7) < 0.5 && b(1e-7) > 0.4999);
        let raw = weighted_extremal_bound_uncorrected(&[3.0], 0.1, 2.0, &s1).unwrap();
        assert!(raw > b(0.1));
        let s2 = spec(&[1, 1]);
        assert!((weighted_extremal_bound(&[3.0, 3.0], 0.1, 2.0, &s2).unwrap() - b(0.1).powi(2)).abs() < 1e-15);
    }

    /// Quotient of a radial function by nested radial quadrature, built only
    /// from the operator definitions.
    fn nested_quotient(
        f: impl Fn(f64) -> f64 + Copy,
        image: impl Fn(f64) -> f64,
        d: &GroupDims,
        p: f64,
        breaks: &[f64],
    ) -> f64 {
        let top = radial_integral_with_breaks(|r| image(r).abs().powf(p), d, f64::INFINITY, breaks, 1e-11).unwrap();
        let bottom = radial_integral_with_breaks(|r| f(r).abs().powf(p), d, f64::INFINITY, breaks, 1e-11).unwrap();
        (top / bottom).powf(1.0 / p)
    }

    #[test]
    fn weighted_quotients_match_nested_quadrature() {
        let s = spec(&[1]);
        let d = s.factors()[0];
        let opts = QuadOptions::with_tol(1e-13);
        let p = 2.0;
        let a = 3.0;
        // inside family, P_φ
        let alpha = -1.2;
        let f = move |r: f64| if r < 1.0 { r.powf(alpha) } else { 0.0 };
        let img = |r: f64| {
            integrate(&|t: f64| f(t * r) * t.powf(a), 0.0, 1.0, &[(1.0 / r).min(1.0)], &opts).unwrap()
        };
        let closed = weighted_hardy_power_quotient(&TestFunction::PowerInside(vec![alpha]), &[a], p, &s).unwrap();
        assert!(close(closed, nested_quotient(f, img, &d, p, &[1.0]), 1e-7));
        // outside family, P_φ
        let beta = 2.3;
        let g = move |r: f64| if r > 1.0 { r.powf(-beta) } else { 0.0 };
        let img = |r: f64| {
            if r <= 1.0 {
                0.0
            } else {
                integrate(&|t: f64| g(t * r) * t.powf(a), 1.0 / r, 1.0, &[], &opts).unwrap()
            }
        };
        let closed = weighted_hardy_power_quotient(&TestFunction::PowerOutside(vec![beta]), &[a], p, &s).unwrap();
        assert!(close(closed, nested_quotient(g, img, &d, p, &[1.0]), 1e-6));
        // inside family, P*_φ
        let alpha = -1.5;
        let f = move |r: f64| if r < 1.0 { r.powf(alpha) } else { 0.0 };
        let img = |r: f64| {
            if r >= 1.0 {
                0.0
            } else {
                integrate(&|t: f64| f(r / t) * t.powf(a - 4.0), r, 1.0, &[], &opts).unwrap()
            }
        };
        let closed = weighted_cesaro_power_quotient(&TestFunction::PowerInside(vec![alpha]), &[a], p, &s).unwrap();
        assert!(close(closed, nested_quotient(f, img, &d, p, &[1.0]), 1e-7));
        // outside family, P*_φ
        let beta = 2.5;
        let g = move |r: f64| if r > 1.0 { r.powf(-beta) } else { 0.0 };
        let img = |r: f64| integrate(&|t: f64| g(r / t) * t.powf(a - 4.0), 0.0, r.min(1.0), &[], &opts).unwrap();
        let closed = weighted_cesaro_power_quotient(&TestFunction::PowerOutside(vec![beta]), &[a], p, &s).unwrap();
        assert!(close(closed, nested_quotient(g, img, &d, p, &[1.0]), 1e-7));
    }

    #[test]
    fn weighted_values_match_definitions() {
        let s = spec(&[1]);
        let opts = QuadOptions::with_tol(1e-13);
        let a = 4.0;
        for r in [0.4f64, 1.0, 1.7] {
            for f in [TestFunction::PowerInside(vec![-0.7]), TestFunction::PowerOutside(vec![2.5])] {
                let fr = |x: f64| f.eval_radii(&[x]);
                let brk = [(1.0 / r).min(1.0), r.min(1.0)];
                let h = integrate(&|t: f64| fr(t * r) * t.powf(a), 0.0, 1.0, &brk, &opts).unwrap();
                let c = integrate(&|t: f64| fr(r / t) * t.powf(a - 4.0), 0.0, 1.0, &brk, &opts).unwrap();
                let hv = weighted_hardy_power_value(&f, &[a], &s, &[r]).unwrap();
                let cv = weighted_cesaro_power_value(&f, &[a], &s, &[r]).unwrap();
                assert!((hv - h).abs() < 1e-10 * h.abs().max(1.0), "{f} R={r}: {hv} vs {h}");
                assert!((cv - c).abs() < 1e-10 * c.abs().max(1.0), "{f} R={r}: {cv} vs {c}");
            }
        }
        // indicator, φ = t⁴: P*f = 1 - |x|
        let ind = TestFunction::unit_indicator(&s);
        assert!((weighted_cesaro_power_value(&ind, &[4.0], &s, &[0.3]).unwrap() - 0.7).abs() < 1e-15);
        assert!((indicator_pairing(&[4.0], &s).unwrap() - PI * PI / 10.0).abs() < 1e-15);
        // φ ≡ 1, indicator: 1 inside the ball
        assert_eq!(weighted_hardy_power_value(&ind, &[0.0], &s, &[0.5]).unwrap(), 1.0);
    }
}
