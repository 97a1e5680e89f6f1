//! Norm quotients `‖T f‖_p / ‖f‖_p` and pairings `⟨f, T g⟩`.
//!
//! The Monte Carlo estimator for `P_m` never evaluates `P_m f` pointwise.
//! With inner samples `y_k` (weights `w_k`) and outer radii `R_l` drawn from
//! per-factor laws,
//!
//! ```text
//! I(R) ≈ (1/N) Σ_k f(y_k) w_k Π_i 1{|y_k,i| < R_i}
//! ‖P_m f‖_p^p ≈ (1/N) Σ_l |I(R_l)|^p Π_i (V_i R_{l,i}^{Q_i})^{-p} w(R_{l,i})
//! ```
//!
//! and every `I(R_l)` comes from one dominance-sum pass. Outside a finite
//! support radius `S_i` the ball integral saturates, `I(…, R_i, …) =
//! I(…, S_i, …)`, so that part of the outer integral is done exactly: the
//! estimate is a sum over subsets `T` of saturated coordinates. Errors come
//! from a delete-a-group jackknife over both sample sets.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dominance::{grouped_log_dominance, log_add, log_sub, Points};
use super::{check_cesaro_bounded, weighted_quadrature, Direction, Operator, Weight};
use crate::closedform;
use crate::error::{Error, Result};
use crate::funcs::{check_p, closed_lp_norm_power, MixtureSampler, ProductPoint, TestFunction};
use crate::hgroup::{sample_unit_ball, ProductSpec};
use crate::measure::quadrature::{integrate, QuadOptions};
use crate::measure::rng::{derive_seed, run_chunks};
use crate::measure::{
    draw_polar, lp_norm, natural_law, radial_integral_with_breaks, Budget, Estimate, Method, Moments, RadialLaw,
};

/// `‖T f‖_p`, `‖f‖_p` and their ratio.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub image: Estimate,
    pub input: Estimate,
    pub quotient: Estimate,
}

/// `‖T f‖_p / ‖f‖_p`.
pub fn norm_quotient(
    f: &TestFunction,
    op: &Operator,
    p: f64,
    spec: &ProductSpec,
    method: Method,
    budget: &Budget,
) -> Result<Estimate> {
    Norms::compute(f, op, p, spec, method, budget).map(|n| n.quotient)
}

impl Norms {
    pub fn compute(
        f: &TestFunction,
        op: &Operator,
        p: f64,
        spec: &ProductSpec,
        method: Method,
        budget: &Budget,
    ) -> Result<Norms> {
        check_p(p)?;
        f.check_finite_norm(spec, p)?;
        if let Some(w) = op.weight() {
            w.check_m(spec.m())?;
        }
        if let Operator::WeightedCesaro(w) = op {
            check_cesaro_bounded(w, p, spec)?;
        }
        match method {
            Method::Closed => closed_norms(f, op, p, spec),
            Method::Radial => radial_norms(f, op, p, spec, budget.tol),
            Method::Mc => match op {
                Operator::Hardy => hardy_mc(f, p, spec, budget),
                _ => weighted_mc_norms(f, op, p, spec, budget),
            },
        }
    }
}

fn ratio(image: Estimate, input: Estimate) -> Result<Estimate> {
    if input.value == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let q = image.value / input.value;
    let rel = |e: &Estimate| if e.value == 0.0 { 0.0 } else { e.std_error / e.value };
    Ok(Estimate {
        value: q,
        std_error: q.abs() * (rel(&image).powi(2) + rel(&input).powi(2)).sqrt(),
        samples: image.samples + input.samples,
        seed: image.seed,
    })
}

fn closed_norms(f: &TestFunction, op: &Operator, p: f64, spec: &ProductSpec) -> Result<Norms> {
    let input = closed_lp_norm_power(f, spec, p)?;
    let monomial = |w: &Weight| {
        w.exponents()
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::Unsupported("closed forms need a monomial weight".into()))
    };
    let q = match op {
        Operator::Hardy => match f {
            TestFunction::PowerInside(a) => closedform::hardy_power_inside_quotient(a, p, spec)?,
            _ => return Err(Error::Unsupported("closed-form P_m quotient needs the inside power family".into())),
        },
        Operator::WeightedHardy(w) => closedform::weighted_hardy_power_quotient(f, &monomial(w)?, p, spec)?,
        Operator::WeightedCesaro(w) => closedform::weighted_cesaro_power_quotient(f, &monomial(w)?, p, spec)?,
    };
    Ok(Norms {
        image: Estimate::exact(q * input),
        input: Estimate::exact(input),
        quotient: Estimate::exact(q),
    })
}

// ---------------------------------------------------------------------------
// nested radial quadrature

fn radial_norms(f: &TestFunction, op: &Operator, p: f64, spec: &ProductSpec, tol: f64) -> Result<Norms> {
    if !f.is_radial() {
        return Err(Error::Unsupported("radial quadrature needs a radial-product function".into()));
    }
    if op.weight().is_some_and(|w| !w.is_separable()) {
        return Err(Error::Unsupported("radial quadrature needs a separable weight".into()));
    }
    let mut image_p = 1.0;
    let mut input_p = 1.0;
    for i in 0..spec.m() {
        let (img, inp) = factor_radial_norms(f, op, p, spec, i, tol)?;
        image_p *= img;
        input_p *= inp;
    }
    let image = Estimate::exact(image_p.powf(1.0 / p));
    let input = Estimate::exact(input_p.powf(1.0 / p));
    Ok(Norms {
        image,
        input,
        quotient: ratio(image, input)?,
    })
}

/// `(‖A_i‖_p^p, ‖F_i‖_p^p)` for factor `i`.
fn factor_radial_norms(f: &TestFunction, op: &Operator, p: f64, spec: &ProductSpec, i: usize, tol: f64) -> Result<(f64, f64)> {
    let d = &spec.factors()[i];
    let q = d.qf();
    let profile = f.profile(i).expect("radial family");
    let support = profile.support();
    let breaks = f.breakpoints(i);
    let below = |r: f64| -> Vec<f64> { breaks.iter().copied().filter(|b| *b < r).collect() };
    let inner_opts = QuadOptions::with_tol(tol * 1e-2);
    let input = radial_integral_with_breaks(|r| profile.eval(r).abs().powf(p), d, f64::INFINITY, &breaks, tol)?;
    let qi = d.q as i32;
    // ∫₀^R F(r) r^{Q-1} dr
    let ball = |r: f64| integrate(&|s: f64| profile.eval(s) * s.powi(qi - 1), 0.0, r, &below(r), &inner_opts);
    let image = match op {
        Operator::Hardy => {
            let a = |r: f64| ball(r).map(|v| q * v / r.powi(qi)).unwrap_or(f64::NAN);
            if support.is_finite() {
                let body = radial_integral_with_breaks(|r| a(r).abs().powf(p), d, support, &below(support), tol)?;
                let c = q * ball(support)?;
                body + d.omega * c.abs().powf(p) * support.powf(q * (1.0 - p)) / (q * (p - 1.0))
            } else {
                radial_integral_with_breaks(|r| a(r).abs().powf(p), d, f64::INFINITY, &breaks, tol)?
            }
        }
        Operator::WeightedHardy(w) => {
            let wf = w.factor(i).expect("separable weight");
            let a = |r: f64| {
                let tb: Vec<f64> = breaks.iter().map(|b| b / r).collect();
                integrate(&|t: f64| profile.eval(t * r) * wf(t), 0.0, 1.0, &tb, &inner_opts).unwrap_or(f64::NAN)
            };
            match (support.is_finite(), w.exponents()) {
                (true, Some(exps)) => {
                    let e = exps[i];
                    let decay = (e + 1.0) * p - q;
                    if decay <= 0.0 {
                        return Err(Error::Unbounded(format!(
                            "P_φ f decays like R^-{} and is not in L^{p}",
                            e + 1.0
                        )));
                    }
                    let body = radial_integral_with_breaks(|r| a(r).abs().powf(p), d, support, &below(support), tol)?;
                    let c = integrate(&|u: f64| profile.eval(u) * u.powf(e), 0.0, support, &below(support), &inner_opts)?;
                    body + d.omega * c.abs().powf(p) * support.powf(-decay) / decay
                }
                _ => {
                    let mut br = breaks.clone();
                    if support.is_finite() {
                        br.push(support);
                    }
                    radial_integral_with_breaks(|r| a(r).abs().powf(p), d, f64::INFINITY, &br, tol)?
                }
            }
        }
        Operator::WeightedCesaro(w) => {
            let wf = w.factor(i).expect("separable weight");
            let a = |r: f64| {
                let tb: Vec<f64> = breaks.iter().filter(|b| **b > 0.0).map(|b| r / b).collect();
                let g = |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    let fv = profile.eval(r / t);
                    if fv == 0.0 {
                        0.0
                    } else {
                        fv * wf(t) * t.powi(-qi)
                    }
                };
                integrate(&g, 0.0, 1.0, &tb, &inner_opts).unwrap_or(f64::NAN)
            };
            let upper = if support.is_finite() { support } else { f64::INFINITY };
            radial_integral_with_breaks(|r| a(r).abs().powf(p), d, upper, &below(upper), tol)?
        }
    };
    Ok((image, input))
}

// ---------------------------------------------------------------------------
// Monte Carlo for P_m

struct InnerSample {
    ln_r: Vec<f64>,
    /// `ln |f w|`.
    ln_a: f64,
    negative: bool,
    /// `ln(|f|^p w)`.
    ln_norm: f64,
}

/// Draws from the importance law attached to `f`.
enum InnerLaw<'a> {
    Radial(Vec<RadialLaw>),
    Bumps(MixtureSampler<'a>),
}

impl<'a> InnerLaw<'a> {
    fn new(f: &'a TestFunction, spec: &'a ProductSpec, p: f64, budget: &Budget) -> Result<Self> {
        match f {
            TestFunction::BumpMixture(bumps) => MixtureSampler::new(bumps, spec).map(InnerLaw::Bumps).ok_or(Error::ZeroNorm),
            _ => Ok(InnerLaw::Radial(
                (0..spec.m()).map(|i| natural_law(f, spec, i, p, budget)).collect(),
            )),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, f: &TestFunction, spec: &ProductSpec, p: f64, rng: &mut R) -> InnerSample {
        match self {
            InnerLaw::Radial(laws) => {
                let draw = draw_polar(spec, laws, false, rng);
                let ln_f = f.ln_abs_radii(&draw.ln_r);
                let ln_w: f64 = draw.ln_w.iter().sum();
                let negative = matches!(f, TestFunction::RadialProduct(_))
                    && f.eval_radii(&draw.ln_r.iter().map(|l| l.exp()).collect::<Vec<_>>()) < 0.0;
                InnerSample {
                    ln_r: draw.ln_r,
                    ln_a: ln_f + ln_w,
                    negative,
                    ln_norm: p * ln_f + ln_w,
                }
            }
            InnerLaw::Bumps(sampler) => {
                let y = sampler.sample(rng);
                let ln_w = -sampler.ln_density(&y);
                let v = f.eval_unchecked(&y);
                let ln_f = v.abs().ln();
                InnerSample {
                    ln_r: y.factors().iter().map(|x| x.koranyi_norm().ln()).collect(),
                    ln_a: ln_f + ln_w,
                    negative: v < 0.0,
                    ln_norm: p * ln_f + ln_w,
                }
            }
        }
    }
}

/// Law for the outer radii of factor `i` and the saturation radius, if any.
fn outer_law(f: &TestFunction, spec: &ProductSpec, i: usize, p: f64, budget: &Budget) -> (RadialLaw, Option<f64>) {
    let d = &spec.factors()[i];
    match f {
        TestFunction::PowerInside(_) | TestFunction::PowerOutside(_) => {
            let law = natural_law(f, spec, i, p, budget);
            let s = law.outer_radius();
            (law, s.is_finite().then_some(s))
        }
        _ => {
            let s = f.support_radii()[i];
            let s = if s.is_finite() { s } else { budget.truncation };
            (RadialLaw::uniform_ball(d, s), Some(s))
        }
    }
}

fn group_of(k: usize, n: usize, groups: usize) -> usize {
    k * groups / n
}

fn group_sizes(n: usize, groups: usize) -> Vec<usize> {
    let mut sizes = vec![0; groups];
    for k in 0..n {
        sizes[group_of(k, n, groups)] += 1;
    }
    sizes
}

/// Standard error of a delete-a-group jackknife.
fn jackknife_se(leave_out: &[f64]) -> f64 {
    let b = leave_out.len() as f64;
    if leave_out.len() < 2 {
        return 0.0;
    }
    let mean = leave_out.iter().sum::<f64>() / b;
    ((b - 1.0) / b * leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt()
}

/// `ln|e^{pos} - e^{neg}|`.
fn ln_abs_diff(pos: f64, neg: f64) -> f64 {
    if pos >= neg {
        log_sub(pos, neg)
    } else {
        log_sub(neg, pos)
    }
}

/// Log-sums over all groups and over all groups but one.
fn totals_and_exclusions(row: &[f64], excl: &mut [f64]) -> f64 {
    let b = row.len();
    // suffix in excl, then sweep the prefix forward
    let mut suffix = f64::NEG_INFINITY;
    for g in (0..b).rev() {
        excl[g] = suffix;
        suffix = log_add(suffix, row[g]);
    }
    let mut prefix = f64::NEG_INFINITY;
    for g in 0..b {
        excl[g] = log_add(prefix, excl[g]);
        prefix = log_add(prefix, row[g]);
    }
    prefix
}

const OUTER_CHUNK: usize = 2048;

fn hardy_mc(f: &TestFunction, p: f64, spec: &ProductSpec, budget: &Budget) -> Result<Norms> {
    let n = budget.samples;
    if n < 2 {
        return Err(Error::invalid("Monte Carlo needs at least two samples"));
    }
    let m = spec.m();
    let groups = budget.groups.clamp(2, n);
    let inner_law = InnerLaw::new(f, spec, p, budget)?;
    let inner: Vec<InnerSample> = run_chunks(n, derive_seed(budget.seed, 1), |rng, range| {
        range.map(|_| inner_law.draw(f, spec, p, rng)).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let outer_laws: Vec<(RadialLaw, Option<f64>)> = (0..m).map(|i| outer_law(f, spec, i, p, budget)).collect();
    // per outer sample: ln R_i and ln[(V_i R_i^{Q_i})^{-p} w_i(R_i)]
    let outer: Vec<(Vec<f64>, Vec<f64>)> = run_chunks(n, derive_seed(budget.seed, 2), |rng, range| {
        range
            .map(|_| {
                let mut ln_r = Vec::with_capacity(m);
                let mut ln_w = Vec::with_capacity(m);
                for ((law, _), d) in outer_laws.iter().zip(spec.factors()) {
                    let lr = law.sample_ln_r(rng);
                    ln_w.push(law.ln_weight(d, lr) - p * (d.volume.ln() + d.qf() * lr));
                    ln_r.push(lr);
                }
                (ln_r, ln_w)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let inner_group: Vec<usize> = (0..n).map(|k| group_of(k, n, groups)).collect();
    let sizes = group_sizes(n, groups);
    let ln_n = (n as f64).ln();
    let ln_n_minus: Vec<f64> = sizes.iter().map(|s| ((n - s) as f64).ln()).collect();
    let inner_cols: Vec<Vec<f64>> = (0..m).map(|i| inner.iter().map(|s| s.ln_r[i]).collect()).collect();
    let outer_cols: Vec<Vec<f64>> = (0..m).map(|i| outer.iter().map(|s| s.0[i]).collect()).collect();
    let pos: Vec<f64> = inner
        .iter()
        .map(|s| if s.negative { f64::NEG_INFINITY } else { s.ln_a })
        .collect();
    let any_negative = inner.iter().any(|s| s.negative);
    let neg: Vec<f64> = inner
        .iter()
        .map(|s| if s.negative { s.ln_a } else { f64::NEG_INFINITY })
        .collect();

    // ‖f‖_p^p
    let norm_terms: Vec<f64> = inner.iter().map(|s| s.ln_norm.exp()).collect();
    let mut den_groups = vec![0.0; groups];
    for (k, t) in norm_terms.iter().enumerate() {
        den_groups[inner_group[k]] += t;
    }
    let den_total: f64 = den_groups.iter().sum();
    if !(den_total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let den = den_total / n as f64;
    let den_jack: Vec<f64> = (0..groups)
        .map(|g| (den_total - den_groups[g]) / (n - sizes[g]) as f64)
        .collect();

    let saturable: Vec<usize> = (0..m).filter(|i| outer_laws[*i].1.is_some()).collect();
    let mut num = 0.0;
    let mut num_jack = vec![0.0; groups];
    for mask in 0..(1usize << saturable.len()) {
        let saturated: Vec<usize> = saturable
            .iter()
            .enumerate()
            .filter(|(b, _)| mask & (1 << b) != 0)
            .map(|(_, i)| *i)
            .collect();
        let free: Vec<usize> = (0..m).filter(|i| !saturated.contains(i)).collect();
        let tail: f64 = saturated
            .iter()
            .map(|&i| {
                let d = &spec.factors()[i];
                let s = outer_laws[i].1.expect("saturable factor");
                let q = d.qf();
                d.omega * d.volume.powf(-p) * s.powf(q * (1.0 - p)) / (q * (p - 1.0))
            })
            .product();
        let points = |vals: &[f64]| -> Vec<f64> {
            let pts = Points {
                coords: free.iter().map(|i| inner_cols[*i].as_slice()).collect(),
                ln_v: vals,
                group: &inner_group,
            };
            let qs: Vec<&[f64]> = free.iter().map(|i| outer_cols[*i].as_slice()).collect();
            grouped_log_dominance(&pts, &qs, groups)
        };
        let pos_sums = points(&pos);
        let neg_sums = if any_negative {
            points(&neg)
        } else {
            vec![f64::NEG_INFINITY; pos_sums.len()]
        };
        // ln|I| for the full set and for every leave-one-group-out set
        let ln_i = |row: usize, excl_p: &mut [f64], excl_n: &mut [f64], out: &mut [f64]| -> f64 {
            let rp = &pos_sums[row * groups..(row + 1) * groups];
            let rn = &neg_sums[row * groups..(row + 1) * groups];
            let tp = totals_and_exclusions(rp, excl_p);
            let tn = totals_and_exclusions(rn, excl_n);
            for g in 0..groups {
                out[g] = ln_abs_diff(excl_p[g], excl_n[g]) - ln_n_minus[g];
            }
            ln_abs_diff(tp, tn) - ln_n
        };
        let (full, jack) = if free.is_empty() {
            let mut ep = vec![0.0; groups];
            let mut en = vec![0.0; groups];
            let mut ex = vec![0.0; groups];
            let li = ln_i(0, &mut ep, &mut en, &mut ex);
            ((p * li).exp(), ex.iter().map(|l| (p * l).exp()).collect::<Vec<_>>())
        } else {
            let outer_sizes = &sizes;
            let parts: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(OUTER_CHUNK))
                .into_par_iter()
                .map(|c| {
                    let mut ep = vec![0.0; groups];
                    let mut en = vec![0.0; groups];
                    let mut ex = vec![0.0; groups];
                    let mut full = 0.0;
                    let mut jack = vec![0.0; groups];
                    for l in c * OUTER_CHUNK..((c + 1) * OUTER_CHUNK).min(n) {
                        let li = ln_i(l, &mut ep, &mut en, &mut ex);
                        let lw: f64 = free.iter().map(|i| outer[l].1[*i]).sum();
                        full += (p * li + lw).exp();
                        let own = group_of(l, n, groups);
                        for g in 0..groups {
                            if g != own {
                                jack[g] += (p * ex[g] + lw).exp();
                            }
                        }
                    }
                    (full, jack)
                })
                .collect();
            let mut full = 0.0;
            let mut jack = vec![0.0; groups];
            for (f_part, j_part) in parts {
                full += f_part;
                for (a, b) in jack.iter_mut().zip(j_part) {
                    *a += b;
                }
            }
            let full = full / n as f64;
            let jack = jack
                .iter()
                .zip(outer_sizes)
                .map(|(s, size)| s / (n - size) as f64)
                .collect();
            (full, jack)
        };
        num += tail * full;
        for (a, b) in num_jack.iter_mut().zip(jack) {
            *a += tail * b;
        }
    }
    if !num.is_finite() {
        return Err(Error::NonFinite {
            point: "Monte Carlo image norm".into(),
            value: num,
        });
    }
    let inv_p = 1.0 / p;
    let seed = budget.seed;
    let samples = 2 * n as u64;
    // bias-corrected jackknife: the |I|^p step carries an O(1/N) bias
    let est = |full: f64, jack: Vec<f64>| {
        let b = jack.len() as f64;
        let mean = jack.iter().sum::<f64>() / b;
        Estimate {
            value: b * full - (b - 1.0) * mean,
            std_error: jackknife_se(&jack),
            samples,
            seed,
        }
    };
    let image = est(num.powf(inv_p), num_jack.iter().map(|v| v.powf(inv_p)).collect());
    let input = est(den.powf(inv_p), den_jack.iter().map(|v| v.powf(inv_p)).collect());
    let quotient = est(
        (num / den).powf(inv_p),
        num_jack.iter().zip(&den_jack).map(|(a, b)| (a / b).powf(inv_p)).collect(),
    );
    Ok(Norms { image, input, quotient })
}

// ---------------------------------------------------------------------------
// Monte Carlo over the outer integral for the weighted operators

fn weighted_outer_law(f: &TestFunction, op: &Operator, spec: &ProductSpec, i: usize, p: f64, budget: &Budget) -> RadialLaw {
    let d = &spec.factors()[i];
    let q = d.qf();
    let a = op
        .weight()
        .and_then(|w| w.exponents().map(|e| e[i]))
        .unwrap_or(0.0);
    let cesaro = matches!(op, Operator::WeightedCesaro(_));
    let half = |first: RadialLaw, second: RadialLaw| RadialLaw::Mixture {
        first: Box::new(first),
        second: Box::new(second),
        weight: 0.5,
    };
    // exponent of the image near 0 (Cesàro) or decay at ∞ (Hardy)
    let near_zero = (p * (a + 1.0 - q) + q).clamp(0.25, q);
    let decay = ((a + 1.0) * p - q).max(0.25);
    match (f, cesaro) {
        (TestFunction::PowerOutside(b), false) => RadialLaw::Pareto {
            kappa: b[i] * p - q,
            radius: 1.0,
        },
        (TestFunction::PowerOutside(b), true) => half(
            RadialLaw::Power {
                gamma: near_zero,
                radius: 1.0,
            },
            RadialLaw::Pareto {
                kappa: b[i] * p - q,
                radius: 1.0,
            },
        ),
        (TestFunction::PowerInside(al), true) => RadialLaw::Power {
            gamma: al[i] * p + q,
            radius: 1.0,
        },
        (TestFunction::PowerInside(al), false) => half(
            RadialLaw::Power {
                gamma: al[i] * p + q,
                radius: 1.0,
            },
            RadialLaw::Pareto { kappa: decay, radius: 1.0 },
        ),
        (_, cesaro) => {
            let s = f.support_radii()[i];
            let s = if s.is_finite() { s } else { budget.truncation };
            if cesaro {
                RadialLaw::Power {
                    gamma: near_zero,
                    radius: s,
                }
            } else {
                half(RadialLaw::uniform_ball(d, s), RadialLaw::Pareto { kappa: decay, radius: s })
            }
        }
    }
}

fn weighted_mc_norms(f: &TestFunction, op: &Operator, p: f64, spec: &ProductSpec, budget: &Budget) -> Result<Norms> {
    let (w, dir) = match op {
        Operator::WeightedHardy(w) => (w, Direction::Hardy),
        Operator::WeightedCesaro(w) => (w, Direction::Cesaro),
        Operator::Hardy => unreachable!("handled by the dominance estimator"),
    };
    let laws: Vec<RadialLaw> = (0..spec.m()).map(|i| weighted_outer_law(f, op, spec, i, p, budget)).collect();
    let closed = w.exponents().is_some() && matches!(f, TestFunction::PowerInside(_) | TestFunction::PowerOutside(_));
    let tol = budget.tol.max(1e-9);
    let seed = derive_seed(budget.seed, 3);
    let parts = run_chunks(budget.samples, seed, |rng, range| -> Result<Moments> {
        let mut acc = Moments::default();
        for _ in range {
            let draw = draw_polar(spec, &laws, !f.is_radial(), rng);
            let ln_value = if closed {
                super::closed_weighted_ln(f, w, spec, &draw.ln_r, dir)?
            } else {
                let radii: Vec<f64> = draw.ln_r.iter().map(|l| l.exp()).collect();
                let x = match draw.point {
                    Some(ref x) => x.clone(),
                    None => ProductPoint::with_radii(spec, &radii)?,
                };
                weighted_quadrature(f, w, spec, &x, &radii, dir, tol)?.abs().ln()
            };
            let term = if ln_value == f64::NEG_INFINITY {
                0.0
            } else {
                (p * ln_value + draw.ln_w.iter().sum::<f64>()).exp()
            };
            acc.push(term);
        }
        Ok(acc)
    });
    let m = Moments::merge_all(parts.into_iter().collect::<Result<Vec<_>>>()?).mean_estimate(1.0, budget.seed);
    let image_value = m.value.powf(1.0 / p);
    let image = Estimate {
        value: image_value,
        std_error: if m.value > 0.0 {
            image_value * m.std_error / (p * m.value)
        } else {
            0.0
        },
        ..m
    };
    let input = match f {
        TestFunction::PowerInside(_) | TestFunction::PowerOutside(_) => Estimate::exact(closed_lp_norm_power(f, spec, p)?),
        _ => {
            let nb = Budget {
                seed: derive_seed(budget.seed, 4),
                ..*budget
            };
            lp_norm(f, spec, p, Method::Mc, &nb)?
        }
    };
    Ok(Norms {
        image,
        input,
        quotient: ratio(image, input)?,
    })
}

// ---------------------------------------------------------------------------
// pairings

/// `⟨f, T g⟩ = ∫ f(x) (T g)(x) dx`.
pub fn pairing(
    f: &TestFunction,
    g: &TestFunction,
    op: &Operator,
    spec: &ProductSpec,
    method: Method,
    budget: &Budget,
) -> Result<Estimate> {
    f.check_spec(spec)?;
    g.check_spec(spec)?;
    if let Some(w) = op.weight() {
        w.check_m(spec.m())?;
    }
    match method {
        Method::Closed => {
            let is_indicator = |h: &TestFunction| matches!(h, TestFunction::PowerInside(a) if a.iter().all(|a| *a == 0.0));
            match (op.weight().and_then(Weight::exponents), is_indicator(f) && is_indicator(g)) {
                (Some(a), true) => closedform::indicator_pairing(a, spec).map(Estimate::exact),
                _ => Err(Error::Unsupported(
                    "closed-form pairings exist for the unit indicator with monomial weights".into(),
                )),
            }
        }
        Method::Radial => radial_pairing(f, g, op, spec, budget.tol).map(Estimate::exact),
        Method::Mc => mc_pairing(f, g, op, spec, budget),
    }
}

fn radial_pairing(f: &TestFunction, g: &TestFunction, op: &Operator, spec: &ProductSpec, tol: f64) -> Result<f64> {
    if !f.is_radial() || !g.is_radial() {
        return Err(Error::Unsupported("radial pairing needs radial-product functions".into()));
    }
    if op.weight().is_some_and(|w| !w.is_separable()) {
        return Err(Error::Unsupported("radial pairing needs a separable weight".into()));
    }
    let inner_opts = QuadOptions::with_tol(tol * 1e-2);
    let mut total = 1.0;
    for (i, d) in spec.factors().iter().enumerate() {
        let fp = f.profile(i).expect("radial");
        let gp = g.profile(i).expect("radial");
        let gb = g.breakpoints(i);
        let qi = d.q as i32;
        let image = |r: f64| -> f64 {
            let res = match op {
                Operator::Hardy => {
                    let br: Vec<f64> = gb.iter().copied().filter(|b| *b < r).collect();
                    integrate(&|s: f64| gp.eval(s) * s.powi(qi - 1), 0.0, r, &br, &inner_opts)
                        .map(|v| d.qf() * v / r.powi(qi))
                }
                Operator::WeightedHardy(w) => {
                    let wf = w.factor(i).expect("separable");
                    let br: Vec<f64> = gb.iter().map(|b| b / r).collect();
                    integrate(&|t: f64| gp.eval(t * r) * wf(t), 0.0, 1.0, &br, &inner_opts)
                }
                Operator::WeightedCesaro(w) => {
                    let wf = w.factor(i).expect("separable");
                    let br: Vec<f64> = gb.iter().filter(|b| **b > 0.0).map(|b| r / b).collect();
                    let h = |t: f64| {
                        if t <= 0.0 {
                            return 0.0;
                        }
                        let v = gp.eval(r / t);
                        if v == 0.0 {
                            0.0
                        } else {
                            v * wf(t) * t.powi(-qi)
                        }
                    };
                    integrate(&h, 0.0, 1.0, &br, &inner_opts)
                }
            };
            res.unwrap_or(f64::NAN)
        };
        let upper = if fp.support().is_finite() { fp.support() } else { f64::INFINITY };
        let mut br = f.breakpoints(i);
        br.extend(gb.iter().copied());
        br.retain(|b| *b < upper);
        total *= radial_integral_with_breaks(
            |r| {
                let fv = fp.eval(r);
                if fv == 0.0 {
                    0.0
                } else {
                    fv * image(r)
                }
            },
            d,
            upper,
            &br,
            tol,
        )?;
    }
    Ok(total)
}

/// Sampler for `x` in a pairing: the bump law, or a per-factor radial law
/// under which `f w` is bounded.
enum PairLaw<'a> {
    Radial(Vec<RadialLaw>),
    Bumps(MixtureSampler<'a>),
}

impl<'a> PairLaw<'a> {
    fn new(f: &'a TestFunction, spec: &'a ProductSpec, budget: &Budget) -> Option<Self> {
        Some(match f {
            TestFunction::BumpMixture(b) => PairLaw::Bumps(MixtureSampler::new(b, spec)?),
            TestFunction::PowerInside(a) => PairLaw::Radial(
                a.iter()
                    .zip(spec.factors())
                    .map(|(a, d)| RadialLaw::Power {
                        gamma: (a + d.qf()).max(0.25),
                        radius: 1.0,
                    })
                    .collect(),
            ),
            TestFunction::PowerOutside(b) => PairLaw::Radial(
                b.iter()
                    .zip(spec.factors())
                    .map(|(b, d)| RadialLaw::Pareto {
                        kappa: (b - d.qf()).max(0.25),
                        radius: 1.0,
                    })
                    .collect(),
            ),
            TestFunction::RadialProduct(ps) => PairLaw::Radial(
                ps.iter()
                    .zip(spec.factors())
                    .map(|(p, d)| {
                        let s = if p.support().is_finite() { p.support() } else { budget.truncation };
                        RadialLaw::uniform_ball(d, s)
                    })
                    .collect(),
            ),
        })
    }

    /// `(x, ln w(x))`.
    fn draw<R: Rng + ?Sized>(&self, spec: &ProductSpec, rng: &mut R) -> (ProductPoint, f64) {
        match self {
            PairLaw::Radial(laws) => {
                let d = draw_polar(spec, laws, true, rng);
                (d.point.expect("point requested"), d.ln_w.iter().sum())
            }
            PairLaw::Bumps(s) => {
                let x = s.sample(rng);
                let lw = -s.ln_density(&x);
                (x, lw)
            }
        }
    }
}

fn mc_pairing(f: &TestFunction, g: &TestFunction, op: &Operator, spec: &ProductSpec, budget: &Budget) -> Result<Estimate> {
    let Some(law) = PairLaw::new(f, spec, budget) else {
        return Ok(Estimate {
            value: 0.0,
            std_error: 0.0,
            samples: budget.samples as u64,
            seed: budget.seed,
        });
    };
    let m = spec.m();
    let parts = run_chunks(budget.samples, budget.seed, |rng, range| -> Result<Moments> {
        let mut acc = Moments::default();
        let mut t = vec![0.0; m];
        for _ in range {
            let (x, ln_w) = law.draw(spec, rng);
            let fv = f.eval_unchecked(&x);
            // draw the inner variable even when f vanishes, to keep streams aligned
            let inner = match op {
                Operator::Hardy => {
                    let radii = x.radii();
                    let y = ProductPoint::new(
                        spec.factors()
                            .iter()
                            .zip(&radii)
                            .map(|(d, r)| sample_unit_ball(d, rng).dilate_unchecked(*r))
                            .collect(),
                    )?;
                    g.eval_unchecked(&y)
                }
                Operator::WeightedHardy(w) | Operator::WeightedCesaro(w) => {
                    for ti in t.iter_mut() {
                        *ti = 1.0 - rng.gen::<f64>();
                    }
                    let dir = if matches!(op, Operator::WeightedHardy(_)) {
                        Direction::Hardy
                    } else {
                        Direction::Cesaro
                    };
                    let (y, jac) = super::dilated(&x, spec, &t, dir);
                    let gv = g.eval_unchecked(&y);
                    if gv == 0.0 {
                        0.0
                    } else {
                        gv * w.eval(&t) * jac
                    }
                }
            };
            let v = if fv == 0.0 || inner == 0.0 {
                0.0
            } else {
                fv * inner * ln_w.exp()
            };
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    point: x.to_string(),
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
