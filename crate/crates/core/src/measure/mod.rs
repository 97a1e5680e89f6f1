//! Quadrature engine: Monte Carlo over product Korányi balls, adaptive radial
//! quadrature, and `L^p` norms of test functions.

pub mod quadrature;
pub mod rng;
pub mod sampling;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcs::{check_p, closed_lp_norm_power, ProductPoint, TestFunction};
use crate::hgroup::{sample_unit_sphere, GroupDims, ProductSpec};
use quadrature::{integrate, QuadOptions};
use rng::run_chunks;
pub use sampling::RadialLaw;

/// A numerical result. Deterministic results carry `std_error = 0` and
/// `samples = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            samples: 0,
            seed: 0,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.samples == 0
    }

    /// `|value - target|` in units of `std_error` (∞ when the error is zero
    /// and the values differ).
    pub fn sigma_distance(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Streaming mean/variance (Welford), mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn merge_all(parts: impl IntoIterator<Item = Moments>) -> Moments {
        let mut acc = Moments::default();
        for p in parts {
            acc.merge(&p);
        }
        acc
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// `scale · mean` with its standard error.
    pub fn mean_estimate(&self, scale: f64, seed: u64) -> Estimate {
        let se = if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        };
        Estimate {
            value: scale * self.mean,
            std_error: scale.abs() * se,
            samples: self.count,
            seed,
        }
    }
}

/// Work limits shared by the Monte Carlo and quadrature paths.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Budget {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Delete-a-group jackknife groups for nonlinear estimators.
    pub groups: usize,
    /// Truncation radius for Monte Carlo over functions without compact support.
    pub truncation: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            tol: 1e-10,
            groups: 20,
            truncation: 10.0,
        }
    }
}

impl Budget {
    pub fn with_samples(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Closed,
    Radial,
    Mc,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Method::Closed),
            "radial" => Ok(Method::Radial),
            "mc" => Ok(Method::Mc),
            other => Err(Error::Parse(format!("unknown method {other:?} (closed|radial|mc)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Closed => "closed",
            Method::Radial => "radial",
            Method::Mc => "mc",
        })
    }
}

/// Monte Carlo estimate of `∫_{B(0,r_1)×…×B(0,r_m)} f`.
pub fn mc_integrate<F>(f: F, spec: &ProductSpec, radii: &[f64], samples: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(&ProductPoint) -> f64 + Sync,
{
    let volume = spec.polyball_volume(radii)?;
    if samples == 0 {
        return Err(Error::invalid("mc_integrate needs at least one sample"));
    }
    let parts = run_chunks(samples, seed, |rng, range| -> Result<Moments> {
        let mut acc = Moments::default();
        for _ in range {
            let y = ProductPoint::sample_polyball(spec, radii, rng);
            let v = f(&y);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    point: y.to_string(),
                    value: v,
                });
            }
            acc.push(v);
        }
        Ok(acc)
    });
    let moments = Moments::merge_all(parts.into_iter().collect::<Result<Vec<_>>>()?);
    Ok(moments.mean_estimate(volume, seed))
}

/// `ω_Q ∫₀^upper F(r) r^{Q-1} dr`.
pub fn radial_integral<F: Fn(f64) -> f64>(profile: F, dims: &GroupDims, upper: f64, tol: f64) -> Result<f64> {
    radial_integral_with_breaks(profile, dims, upper, &[], tol)
}

pub fn radial_integral_with_breaks<F: Fn(f64) -> f64>(
    profile: F,
    dims: &GroupDims,
    upper: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    if !(upper > 0.0) {
        return Err(Error::invalid(format!("upper limit must be positive, got {upper}")));
    }
    let q1 = dims.q as i32 - 1;
    let integrand = |r: f64| {
        let v = profile(r);
        if v == 0.0 {
            0.0
        } else {
            v * r.powi(q1)
        }
    };
    Ok(dims.omega * integrate(&integrand, 0.0, upper, breaks, &QuadOptions::with_tol(tol))?)
}

/// One polar draw `x_i = δ_{r_i} ξ_i`, with per-factor log radii and log weights.
pub(crate) struct PolarDraw {
    pub ln_r: Vec<f64>,
    pub ln_w: Vec<f64>,
    pub point: Option<ProductPoint>,
}

pub(crate) fn draw_polar<R: Rng + ?Sized>(
    spec: &ProductSpec,
    laws: &[RadialLaw],
    with_point: bool,
    rng: &mut R,
) -> PolarDraw {
    let ln_r: Vec<f64> = laws.iter().map(|l| l.sample_ln_r(rng)).collect();
    let ln_w = spec
        .factors()
        .iter()
        .zip(laws)
        .zip(&ln_r)
        .map(|((d, l), lr)| l.ln_weight(d, *lr))
        .collect();
    let point = with_point.then(|| {
        let points = spec
            .factors()
            .iter()
            .zip(&ln_r)
            .map(|(d, lr)| sample_unit_sphere(d, rng).dilate_unchecked(lr.exp()))
            .collect();
        ProductPoint::new(points).expect("spec has at least one factor")
    });
    PolarDraw { ln_r, ln_w, point }
}

/// `ln |f|` at a polar draw.
pub(crate) fn ln_abs_at(f: &TestFunction, draw: &PolarDraw) -> f64 {
    match &draw.point {
        Some(x) if !f.is_radial() => f.eval_unchecked(x).abs().ln(),
        _ => f.ln_abs_radii(&draw.ln_r),
    }
}

/// Sampling law for factor `i` under which `|f|^p` has low (for the power
/// families, zero) variance.
pub fn natural_law(f: &TestFunction, spec: &ProductSpec, i: usize, p: f64, budget: &Budget) -> RadialLaw {
    let d = &spec.factors()[i];
    match f {
        TestFunction::PowerInside(a) => RadialLaw::Power {
            gamma: a[i] * p + d.qf(),
            radius: 1.0,
        },
        TestFunction::PowerOutside(b) => RadialLaw::Pareto {
            kappa: b[i] * p - d.qf(),
            radius: 1.0,
        },
        _ => {
            let s = f.support_radii()[i];
            RadialLaw::uniform_ball(d, if s.is_finite() { s } else { budget.truncation })
        }
    }
}

/// `‖f‖_{L^p}` by the requested method.
pub fn lp_norm(f: &TestFunction, spec: &ProductSpec, p: f64, method: Method, budget: &Budget) -> Result<Estimate> {
    check_p(p)?;
    f.check_finite_norm(spec, p)?;
    match method {
        Method::Closed => closed_lp_norm_power(f, spec, p).map(Estimate::exact),
        Method::Radial => {
            if !f.is_radial() {
                return Err(Error::Unsupported("radial quadrature needs a radial-product function".into()));
            }
            let mut norm_p = 1.0;
            for (i, d) in spec.factors().iter().enumerate() {
                let profile = f.profile(i).expect("radial family");
                let upper = if profile.support().is_finite() {
                    profile.support()
                } else {
                    f64::INFINITY
                };
                norm_p *= radial_integral_with_breaks(
                    |r| profile.eval(r).abs().powf(p),
                    d,
                    upper,
                    &f.breakpoints(i),
                    budget.tol,
                )?;
            }
            Ok(Estimate::exact(norm_p.powf(1.0 / p)))
        }
        Method::Mc => {
            if let TestFunction::BumpMixture(bumps) = f {
                return bump_norm_mc(bumps, spec, p, budget);
            }
            let laws: Vec<RadialLaw> = (0..spec.m()).map(|i| natural_law(f, spec, i, p, budget)).collect();
            let need_point = !f.is_radial();
            let parts = run_chunks(budget.samples, budget.seed, |rng, range| {
                let mut acc = Moments::default();
                for _ in range {
                    let draw = draw_polar(spec, &laws, need_point, rng);
                    let ln_term = p * ln_abs_at(f, &draw) + draw.ln_w.iter().sum::<f64>();
                    acc.push(ln_term.exp());
                }
                acc
            });
            Ok(root_estimate(Moments::merge_all(parts).mean_estimate(1.0, budget.seed), p))
        }
    }
}

/// `‖f‖_p` for a bump mixture, sampling from the mixture's own support law.
fn bump_norm_mc(bumps: &[crate::funcs::Bump], spec: &ProductSpec, p: f64, budget: &Budget) -> Result<Estimate> {
    let Some(sampler) = crate::funcs::MixtureSampler::new(bumps, spec) else {
        return Ok(Estimate {
            value: 0.0,
            std_error: 0.0,
            samples: budget.samples as u64,
            seed: budget.seed,
        });
    };
    let f = TestFunction::BumpMixture(bumps.to_vec());
    let parts = run_chunks(budget.samples, budget.seed, |rng, range| {
        let mut acc = Moments::default();
        for _ in range {
            let y = sampler.sample(rng);
            let v = f.eval_unchecked(&y).abs();
            acc.push(if v == 0.0 { 0.0 } else { (p * v.ln() - sampler.ln_density(&y)).exp() });
        }
        acc
    });
    Ok(root_estimate(Moments::merge_all(parts).mean_estimate(1.0, budget.seed), p))
}

fn root_estimate(m: Estimate, p: f64) -> Estimate {
    if m.value <= 0.0 {
        return Estimate { value: 0.0, ..m };
    }
    let value = m.value.powf(1.0 / p);
    Estimate {
        value,
        std_error: value * m.std_error / (p * m.value),
        ..m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgroup::HPoint;
    use std::f64::consts::PI;

    fn spec(ns: &[usize]) -> ProductSpec {
        ProductSpec::new(ns).unwrap()
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut seq = Moments::default();
        xs.iter().for_each(|x| seq.push(*x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..333].iter().for_each(|x| a.push(*x));
        xs[333..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert_eq!(a.count, seq.count);
        assert!((a.mean - seq.mean).abs() < 1e-12);
        assert!((a.variance() - seq.variance()).abs() < 1e-9);
    }

    #[test]
    fn mc_volume_and_moment() {
        let s = spec(&[1]);
        let vol = mc_integrate(|_| 1.0, &s, &[1.0], 50_000, 1).unwrap();
        // constant integrand: exact volume, zero error
        assert!((vol.value - PI * PI / 2.0).abs() < 1e-12);
        assert_eq!(vol.std_error, 0.0);
        let sq = mc_integrate(|y| y.factors()[0].koranyi_norm().powi(2), &s, &[1.0], 400_000, 2).unwrap();
        assert!(sq.sigma_distance(PI * PI / 3.0) <= 3.0, "{sq:?}");
        let zero = mc_integrate(|_| 0.0, &s, &[1.0], 1000, 3).unwrap();
        assert_eq!((zero.value, zero.std_error), (0.0, 0.0));
    }

    #[test]
    fn mc_rejects_non_finite() {
        let s = spec(&[1]);
        let r = mc_integrate(|_| f64::NAN, &s, &[1.0], 10, 0);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
        assert!(mc_integrate(|_| 1.0, &s, &[1.0, 1.0], 10, 0).is_err());
    }

    #[test]
    fn mc_linearity_with_common_random_numbers() {
        let s = spec(&[1, 1]);
        let f = |y: &ProductPoint| y.factors()[0].coords()[0].powi(2);
        let g = |y: &ProductPoint| y.factors()[1].vertical().abs();
        let (a, b) = (2.5, -0.75);
        let fg = mc_integrate(|y| a * f(y) + b * g(y), &s, &[1.0, 0.5], 30_000, 17).unwrap();
        let ef = mc_integrate(f, &s, &[1.0, 0.5], 30_000, 17).unwrap();
        let eg = mc_integrate(g, &s, &[1.0, 0.5], 30_000, 17).unwrap();
        let lin = a * ef.value + b * eg.value;
        assert!((fg.value - lin).abs() <= 1e-12 * fg.value.abs().max(1.0));
    }

    #[test]
    fn radial_integral_examples() {
        let d = GroupDims::new(1).unwrap();
        let v = radial_integral(|r| r.powi(-2), &d, 1.0, 1e-12).unwrap();
        assert!((v - PI * PI).abs() < 1e-10 * PI * PI);
        let v = radial_integral(|r| (-r.powi(4)).exp(), &d, f64::INFINITY, 1e-12).unwrap();
        assert!((v - PI * PI / 2.0).abs() < 1e-10);
        assert_eq!(radial_integral(|_| 0.0, &d, f64::INFINITY, 1e-12).unwrap(), 0.0);
        assert!(radial_integral(|_| 1.0, &d, 0.0, 1e-12).is_err());
    }

    #[test]
    fn radial_integral_power_profiles() {
        // ω ∫₀¹ r^{α+Q-1} dr = ω/(α+Q)
        for n in 1..=3 {
            let d = GroupDims::new(n).unwrap();
            for alpha in [-d.qf() + 0.05, -2.5, -1.0, 0.0, 1.7] {
                let v = radial_integral(|r| r.powf(alpha), &d, 1.0, 1e-11).unwrap();
                let exact = d.omega / (alpha + d.qf());
                assert!((v - exact).abs() < 1e-10 * exact, "n={n} α={alpha}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn lp_norm_examples() {
        let s1 = spec(&[1]);
        let ind = TestFunction::unit_indicator(&s1);
        for method in [Method::Closed, Method::Radial] {
            let n = lp_norm(&ind, &s1, 2.0, method, &Budget::default()).unwrap();
            assert!((n.value - (PI * PI / 2.0).sqrt()).abs() < 1e-10);
        }
        let mc = lp_norm(&ind, &s1, 2.0, Method::Mc, &Budget::with_samples(10_000, 5)).unwrap();
        assert!((mc.value - 2.221_441_469_079_183).abs() < 1e-12);

        let s2 = spec(&[1, 1]);
        let f = TestFunction::inside_extremal(&s2, 2.0, 0.1);
        let target = 100.0 * PI.powi(4);
        let rad = lp_norm(&f, &s2, 2.0, Method::Radial, &Budget::default()).unwrap();
        assert!((rad.value.powi(2) - target).abs() < 1e-8 * target);
        let mc = lp_norm(&f, &s2, 2.0, Method::Mc, &Budget::with_samples(20_000, 8)).unwrap();
        assert!((mc.value.powi(2) - target).abs() < 1e-9 * target);

        let zero = TestFunction::BumpMixture(vec![crate::funcs::Bump {
            center: ProductPoint::new(vec![HPoint::origin(1)]).unwrap(),
            radii: vec![0.5],
            coefficient: 0.0,
        }]);
        let z = lp_norm(&zero, &s1, 2.0, Method::Mc, &Budget::with_samples(5000, 1)).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(lp_norm(&zero, &s1, 2.0, Method::Radial, &Budget::default()).is_err());
        assert!(lp_norm(&zero, &s1, 2.0, Method::Closed, &Budget::default()).is_err());
    }

    #[test]
    fn bump_norm_matches_uniform_sampling() {
        let s = spec(&[1]);
        let f = TestFunction::BumpMixture(vec![crate::funcs::Bump {
            center: ProductPoint::new(vec![HPoint::new(1, vec![0.4, -0.2, 0.3]).unwrap()]).unwrap(),
            radii: vec![0.35],
            coefficient: 0.8,
        }]);
        let a = lp_norm(&f, &s, 2.0, Method::Mc, &Budget::with_samples(100_000, 3)).unwrap();
        let b = mc_integrate(|y| f.eval_unchecked(y).powi(2), &s, &[1.0], 400_000, 4).unwrap();
        // compare squared norms
        let a2 = a.value * a.value;
        let a2_se = 2.0 * a.value * a.std_error;
        let sd = (a2_se.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a2 - b.value).abs() <= 3.0 * sd, "{a:?} vs {b:?}");
    }
}
