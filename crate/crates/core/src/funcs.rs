//! Test functions on `ℍ^{n_1} × … × ℍ^{n_m}`: truncated power families,
//! radial products and smooth bump mixtures, plus spherical radialization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgroup::{sample_unit_ball, sample_unit_sphere, GroupDims, HPoint, ProductSpec};
use crate::measure::rng::run_chunks;
use crate::measure::{Estimate, Moments};

/// A point `x = (x_1, …, x_m)` of the product space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductPoint {
    points: Vec<HPoint>,
}

impl ProductPoint {
    pub fn new(points: Vec<HPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("product point needs at least one factor"));
        }
        Ok(Self { points })
    }

    pub fn origin(spec: &ProductSpec) -> Self {
        Self {
            points: spec.factors().iter().map(|d| HPoint::origin(d.n)).collect(),
        }
    }

    /// `δ_{r_i} e_1` in every factor: a point with prescribed Korányi radii.
    pub fn with_radii(spec: &ProductSpec, radii: &[f64]) -> Result<Self> {
        if radii.len() != spec.m() {
            return Err(Error::DimensionMismatch {
                expected: spec.m(),
                found: radii.len(),
            });
        }
        let points = spec
            .factors()
            .iter()
            .zip(radii)
            .map(|(d, &r)| {
                let mut c = vec![0.0; 2 * d.n + 1];
                c[0] = r;
                HPoint::new(d.n, c)
            })
            .collect::<Result<_>>()?;
        Ok(Self { points })
    }

    pub fn factors(&self) -> &[HPoint] {
        &self.points
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.points.iter().map(HPoint::koranyi_norm).collect()
    }

    pub fn check_spec(&self, spec: &ProductSpec) -> Result<()> {
        if self.m() != spec.m() {
            return Err(Error::DimensionMismatch {
                expected: spec.m(),
                found: self.m(),
            });
        }
        for (x, d) in self.points.iter().zip(spec.factors()) {
            if x.n() != d.n {
                return Err(Error::DimensionMismatch {
                    expected: d.n,
                    found: x.n(),
                });
            }
        }
        Ok(())
    }

    /// Factor-wise dilation `(δ_{λ_1} x_1, …, δ_{λ_m} x_m)`.
    pub fn dilate_each(&self, lambdas: &[f64]) -> Result<Self> {
        if lambdas.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: lambdas.len(),
            });
        }
        let points = self
            .points
            .iter()
            .zip(lambdas)
            .map(|(x, &l)| x.dilate(l))
            .collect::<Result<_>>()?;
        Ok(Self { points })
    }

    pub(crate) fn dilate_each_unchecked(&self, lambdas: &[f64]) -> Self {
        Self {
            points: self
                .points
                .iter()
                .zip(lambdas)
                .map(|(x, &l)| x.dilate_unchecked(l))
                .collect(),
        }
    }

    /// Uniform sample of `B(0, r_1) × … × B(0, r_m)`.
    pub fn sample_polyball<R: Rng + ?Sized>(spec: &ProductSpec, radii: &[f64], rng: &mut R) -> Self {
        Self {
            points: spec
                .factors()
                .iter()
                .zip(radii)
                .map(|(d, &r)| sample_unit_ball(d, rng).dilate_unchecked(r))
                .collect(),
        }
    }
}

impl fmt::Display for ProductPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.points.iter().enumerate() {
            if i > 0 {
                write!(f, " x ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// One-dimensional profile `F` of a radial factor `F(|x_i|_h)`.
#[derive(Clone)]
pub struct RadialProfile {
    label: String,
    /// `F(r) = 0` for `r ≥ support`.
    support: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl RadialProfile {
    pub fn new(label: impl Into<String>, support: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            support,
            eval: Arc::new(f),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r >= self.support {
            0.0
        } else {
            (self.eval)(r)
        }
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("label", &self.label)
            .field("support", &self.support)
            .finish()
    }
}

/// One piece `c · Π_i b(d(center_i, x_i) / radius_i)` of a bump mixture,
/// with `b(s) = exp(-1/(1-s²))` for `s < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: ProductPoint,
    pub radii: Vec<f64>,
    pub coefficient: f64,
}

pub fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

impl Bump {
    fn eval(&self, x: &ProductPoint) -> f64 {
        let mut v = self.coefficient;
        for ((c, xi), r) in self.center.factors().iter().zip(x.factors()).zip(&self.radii) {
            let s = xi.distance_unchecked(c) / r;
            if s >= 1.0 {
                return 0.0;
            }
            v *= bump_profile(s);
        }
        v
    }

    /// Interval of `|x_i|_h` values the factor-`i` support can reach.
    pub fn radial_shell(&self, i: usize) -> (f64, f64) {
        let c = self.center.factors()[i].koranyi_norm();
        let r = self.radii[i];
        ((c - r).max(0.0), c + r)
    }
}

/// On-disk form of a bump: per-factor coordinate lists; `n` is inferred.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct BumpRecord {
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
    coefficient: f64,
}

#[derive(Clone, Debug)]
pub enum TestFunction {
    /// `Π |x_i|^{α_i} · 1{|x_i| < 1}`.
    PowerInside(Vec<f64>),
    /// `Π |x_i|^{-β_i} · 1{|x_i| > 1}`.
    PowerOutside(Vec<f64>),
    RadialProduct(Vec<RadialProfile>),
    BumpMixture(Vec<Bump>),
}

impl TestFunction {
    /// The inside extremal family `α_i = -Q_i/p + ε`.
    pub fn inside_extremal(spec: &ProductSpec, p: f64, eps: f64) -> Self {
        TestFunction::PowerInside(spec.factors().iter().map(|d| -d.qf() / p + eps).collect())
    }

    /// The outside extremal family `β_i = Q_i/p + ε`.
    pub fn outside_extremal(spec: &ProductSpec, p: f64, eps: f64) -> Self {
        TestFunction::PowerOutside(spec.factors().iter().map(|d| d.qf() / p + eps).collect())
    }

    /// Indicator of the unit polyball.
    pub fn unit_indicator(spec: &ProductSpec) -> Self {
        TestFunction::PowerInside(vec![0.0; spec.m()])
    }

    pub fn m(&self) -> usize {
        match self {
            TestFunction::PowerInside(a) | TestFunction::PowerOutside(a) => a.len(),
            TestFunction::RadialProduct(p) => p.len(),
            TestFunction::BumpMixture(b) => b.first().map_or(0, |b| b.center.m()),
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, TestFunction::BumpMixture(_))
    }

    pub fn check_spec(&self, spec: &ProductSpec) -> Result<()> {
        if let TestFunction::BumpMixture(bumps) = self {
            if bumps.is_empty() {
                return Err(Error::invalid("bump mixture has no pieces"));
            }
            for b in bumps {
                b.center.check_spec(spec)?;
                if b.radii.len() != spec.m() {
                    return Err(Error::DimensionMismatch {
                        expected: spec.m(),
                        found: b.radii.len(),
                    });
                }
                if b.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                    return Err(Error::invalid("bump radii must be positive"));
                }
                if !b.coefficient.is_finite() {
                    return Err(Error::invalid("bump coefficient must be finite"));
                }
            }
        }
        if self.m() != spec.m() {
            return Err(Error::DimensionMismatch {
                expected: spec.m(),
                found: self.m(),
            });
        }
        Ok(())
    }

    /// Checks the finite-norm conditions of the power families at exponent `p`.
    pub fn check_finite_norm(&self, spec: &ProductSpec, p: f64) -> Result<()> {
        self.check_spec(spec)?;
        match self {
            TestFunction::PowerInside(alphas) => {
                for (a, d) in alphas.iter().zip(spec.factors()) {
                    if !(a * p + d.qf() > 0.0) {
                        return Err(Error::InfiniteNorm(format!("α p + Q = {} ≤ 0", a * p + d.qf())));
                    }
                }
            }
            TestFunction::PowerOutside(betas) => {
                for (b, d) in betas.iter().zip(spec.factors()) {
                    if !(b * p - d.qf() > 0.0) {
                        return Err(Error::InfiniteNorm(format!("β p - Q = {} ≤ 0", b * p - d.qf())));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Pointwise value.
    pub fn evaluate(&self, x: &ProductPoint) -> Result<f64> {
        if let TestFunction::BumpMixture(bumps) = self {
            for b in bumps {
                if b.center.m() != x.m() {
                    return Err(Error::DimensionMismatch {
                        expected: b.center.m(),
                        found: x.m(),
                    });
                }
                for (c, xi) in b.center.factors().iter().zip(x.factors()) {
                    if c.n() != xi.n() {
                        return Err(Error::DimensionMismatch {
                            expected: c.n(),
                            found: xi.n(),
                        });
                    }
                }
            }
        } else if x.m() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: x.m(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &ProductPoint) -> f64 {
        match self {
            TestFunction::BumpMixture(bumps) => bumps.iter().map(|b| b.eval(x)).sum(),
            _ => self.eval_radii(&x.radii()),
        }
    }

    /// Value of a radial family at the given factor radii. Bump mixtures are
    /// not radial and evaluate to NaN here.
    pub fn eval_radii(&self, radii: &[f64]) -> f64 {
        match self {
            TestFunction::PowerInside(alphas) => {
                let mut v = 1.0;
                for (a, r) in alphas.iter().zip(radii) {
                    if *r >= 1.0 {
                        return 0.0;
                    }
                    v *= r.powf(*a);
                }
                v
            }
            TestFunction::PowerOutside(betas) => {
                let mut v = 1.0;
                for (b, r) in betas.iter().zip(radii) {
                    if *r <= 1.0 {
                        return 0.0;
                    }
                    v *= r.powf(-*b);
                }
                v
            }
            TestFunction::RadialProduct(profiles) => profiles.iter().zip(radii).map(|(p, r)| p.eval(*r)).product(),
            TestFunction::BumpMixture(_) => f64::NAN,
        }
    }

    /// `ln |f|` from log-radii, exact for the power families even where the
    /// value itself would overflow.
    pub fn ln_abs_radii(&self, ln_r: &[f64]) -> f64 {
        match self {
            TestFunction::PowerInside(alphas) => {
                if ln_r.iter().any(|l| *l >= 0.0) {
                    return f64::NEG_INFINITY;
                }
                alphas.iter().zip(ln_r).map(|(a, l)| a * l).sum()
            }
            TestFunction::PowerOutside(betas) => {
                if ln_r.iter().any(|l| *l <= 0.0) {
                    return f64::NEG_INFINITY;
                }
                betas.iter().zip(ln_r).map(|(b, l)| -b * l).sum()
            }
            TestFunction::RadialProduct(profiles) => profiles
                .iter()
                .zip(ln_r)
                .map(|(p, l)| p.eval(l.exp()).abs().ln())
                .sum(),
            TestFunction::BumpMixture(_) => f64::NAN,
        }
    }

    /// Per-factor radial profile `F_i`, for radial families.
    pub fn profile(&self, i: usize) -> Option<RadialProfile> {
        match self {
            TestFunction::PowerInside(alphas) => {
                let a = alphas[i];
                Some(RadialProfile::new(format!("r^{a}"), 1.0, move |r| r.powf(a)))
            }
            TestFunction::PowerOutside(betas) => {
                let b = betas[i];
                Some(RadialProfile::new(format!("r^-{b}"), f64::INFINITY, move |r| {
                    if r <= 1.0 {
                        0.0
                    } else {
                        r.powf(-b)
                    }
                }))
            }
            TestFunction::RadialProduct(profiles) => Some(profiles[i].clone()),
            TestFunction::BumpMixture(_) => None,
        }
    }

    /// Radii where factor `i` may be discontinuous or change formula.
    pub fn breakpoints(&self, i: usize) -> Vec<f64> {
        match self {
            TestFunction::PowerInside(_) | TestFunction::PowerOutside(_) => vec![1.0],
            TestFunction::RadialProduct(p) if p[i].support.is_finite() => vec![p[i].support],
            TestFunction::RadialProduct(_) => vec![],
            TestFunction::BumpMixture(bumps) => bumps
                .iter()
                .flat_map(|b| {
                    let (lo, hi) = b.radial_shell(i);
                    [lo, hi]
                })
                .filter(|r| *r > 0.0)
                .collect(),
        }
    }

    /// `f = 0` whenever some `|x_i|_h ≥ support_radii()[i]`.
    pub fn support_radii(&self) -> Vec<f64> {
        match self {
            TestFunction::PowerInside(a) => vec![1.0; a.len()],
            TestFunction::PowerOutside(b) => vec![f64::INFINITY; b.len()],
            TestFunction::RadialProduct(p) => p.iter().map(|p| p.support).collect(),
            TestFunction::BumpMixture(bumps) => {
                let m = self.m();
                (0..m)
                    .map(|i| bumps.iter().map(|b| b.radial_shell(i).1).fold(0.0, f64::max))
                    .collect()
            }
        }
    }

    /// `f = 0` whenever some `|x_i|_h ≤ inner_radii()[i]`.
    pub fn inner_radii(&self) -> Vec<f64> {
        match self {
            TestFunction::PowerOutside(b) => vec![1.0; b.len()],
            _ => vec![0.0; self.m()],
        }
    }

    /// `x ↦ f(δ_{λ_1} x_1, …, δ_{λ_m} x_m)`.
    pub fn compose_dilation(&self, lambdas: &[f64]) -> Result<TestFunction> {
        if lambdas.len() != self.m() || lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("one positive dilation factor per factor required"));
        }
        Ok(match self {
            TestFunction::BumpMixture(bumps) => TestFunction::BumpMixture(
                bumps
                    .iter()
                    .map(|b| {
                        let inv: Vec<f64> = lambdas.iter().map(|l| 1.0 / l).collect();
                        Ok(Bump {
                            center: b.center.dilate_each(&inv)?,
                            radii: b.radii.iter().zip(lambdas).map(|(r, l)| r / l).collect(),
                            coefficient: b.coefficient,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            _ => TestFunction::RadialProduct(
                (0..self.m())
                    .map(|i| {
                        let base = self.profile(i).expect("radial family");
                        let l = lambdas[i];
                        let support = base.support / l;
                        RadialProfile::new(format!("{}∘δ_{l}", base.label), support, move |r| base.eval(l * r))
                    })
                    .collect(),
            ),
        })
    }

    pub fn from_bump_file(path: &Path) -> Result<TestFunction> {
        let text = std::fs::read_to_string(path)?;
        Self::from_bump_json(&text)
    }

    pub fn from_bump_json(text: &str) -> Result<TestFunction> {
        let records: Vec<BumpRecord> = serde_json::from_str(text)?;
        let bumps = records
            .into_iter()
            .map(|r| {
                let points = r
                    .centers
                    .into_iter()
                    .map(|c| {
                        if c.len() % 2 == 0 || c.len() < 3 {
                            return Err(Error::Parse(format!("center with {} coordinates is not in any ℍⁿ", c.len())));
                        }
                        HPoint::new((c.len() - 1) / 2, c)
                    })
                    .collect::<Result<_>>()?;
                Ok(Bump {
                    center: ProductPoint::new(points)?,
                    radii: r.radii,
                    coefficient: r.coefficient,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if bumps.is_empty() {
            return Err(Error::Parse("bump file holds no bumps".into()));
        }
        Ok(TestFunction::BumpMixture(bumps))
    }

    pub fn bump_json(bumps: &[Bump]) -> Result<String> {
        let records: Vec<BumpRecord> = bumps
            .iter()
            .map(|b| BumpRecord {
                centers: b.center.factors().iter().map(|p| p.coords().to_vec()).collect(),
                radii: b.radii.clone(),
                coefficient: b.coefficient,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&records)?)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

impl FromStr for TestFunction {
    type Err = Error;

    /// `power-inside:-1.9,-1.9`, `power-outside:2.1,2.1` or `bumps:<file>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("test function {s:?} lacks a ':'")))?;
        match kind {
            "power-inside" => Ok(TestFunction::PowerInside(parse_list(rest)?)),
            "power-outside" => Ok(TestFunction::PowerOutside(parse_list(rest)?)),
            "bumps" => TestFunction::from_bump_file(Path::new(rest)),
            other => Err(Error::Parse(format!("unknown test function family {other:?}"))),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            TestFunction::PowerInside(a) => write!(f, "power-inside:{}", join(a)),
            TestFunction::PowerOutside(b) => write!(f, "power-outside:{}", join(b)),
            TestFunction::RadialProduct(p) => {
                let labels: Vec<&str> = p.iter().map(|p| p.label()).collect();
                write!(f, "radial:{}", labels.join(","))
            }
            TestFunction::BumpMixture(b) => write!(f, "bumps[{}]", b.len()),
        }
    }
}

/// Importance law for a bump mixture: pick piece `j` with probability
/// proportional to `|c_j| · |support_j|`, then a uniform point of its support
/// (a left translate of a dilated unit polyball).
pub(crate) struct MixtureSampler<'a> {
    bumps: &'a [Bump],
    spec: &'a ProductSpec,
    cumulative: Vec<f64>,
    probs: Vec<f64>,
    ln_volumes: Vec<f64>,
}

impl<'a> MixtureSampler<'a> {
    /// `None` when every coefficient is zero.
    pub(crate) fn new(bumps: &'a [Bump], spec: &'a ProductSpec) -> Option<Self> {
        let ln_volumes: Vec<f64> = bumps
            .iter()
            .map(|b| {
                spec.factors()
                    .iter()
                    .zip(&b.radii)
                    .map(|(d, r)| d.volume.ln() + d.qf() * r.ln())
                    .sum()
            })
            .collect();
        let raw: Vec<f64> = bumps
            .iter()
            .zip(&ln_volumes)
            .map(|(b, lv)| b.coefficient.abs() * lv.exp())
            .collect();
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Some(Self {
            bumps,
            spec,
            cumulative,
            probs,
            ln_volumes,
        })
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ProductPoint {
        let u: f64 = rng.gen();
        let j = self.cumulative.partition_point(|c| *c <= u).min(self.bumps.len() - 1);
        let b = &self.bumps[j];
        ProductPoint {
            points: self
                .spec
                .factors()
                .iter()
                .zip(b.center.factors())
                .zip(&b.radii)
                .map(|((d, c), &r)| {
                    c.group_law(&sample_unit_ball(d, rng).dilate_unchecked(r))
                        .expect("center and sample share a factor")
                })
                .collect(),
        }
    }

    /// `ln q(y)` for the sampling density `q`.
    pub(crate) fn ln_density(&self, y: &ProductPoint) -> f64 {
        let mut q = 0.0;
        for ((b, p), lv) in self.bumps.iter().zip(&self.probs).zip(&self.ln_volumes) {
            if *p == 0.0 {
                continue;
            }
            let inside = b
                .center
                .factors()
                .iter()
                .zip(y.factors())
                .zip(&b.radii)
                .all(|((c, yi), r)| yi.distance_unchecked(c) < *r);
            if inside {
                q += p * (-lv).exp();
            }
        }
        q.ln()
    }
}

/// Generator settings for random bump mixtures.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BumpConfig {
    pub min_bumps: usize,
    pub max_bumps: usize,
    pub radius_range: (f64, f64),
    /// Centers are uniform in the polyball of this radius.
    pub center_radius: f64,
    pub coefficient_range: (f64, f64),
}

impl Default for BumpConfig {
    fn default() -> Self {
        Self {
            min_bumps: 1,
            max_bumps: 5,
            radius_range: (0.1, 1.0),
            center_radius: 2.0,
            coefficient_range: (0.1, 1.0),
        }
    }
}

pub fn random_bump_mixture<R: Rng + ?Sized>(spec: &ProductSpec, config: &BumpConfig, rng: &mut R) -> TestFunction {
    let count = rng.gen_range(config.min_bumps..=config.max_bumps);
    let centers = vec![config.center_radius; spec.m()];
    let bumps = (0..count)
        .map(|_| Bump {
            center: ProductPoint::sample_polyball(spec, &centers, rng),
            radii: (0..spec.m())
                .map(|_| rng.gen_range(config.radius_range.0..=config.radius_range.1))
                .collect(),
            coefficient: rng.gen_range(config.coefficient_range.0..=config.coefficient_range.1),
        })
        .collect();
    TestFunction::BumpMixture(bumps)
}

/// Monte Carlo estimate of the spherical average
/// `g_f(x) = E f(δ_{|x_1|} ξ_1, …, δ_{|x_m|} ξ_m)` under the normalized
/// sphere law in each factor.
pub fn radialize(f: &TestFunction, spec: &ProductSpec, x: &ProductPoint, samples: usize, seed: u64) -> Result<Estimate> {
    f.check_spec(spec)?;
    x.check_spec(spec)?;
    if samples == 0 {
        return Err(Error::invalid("radialize needs at least one sample"));
    }
    let radii = x.radii();
    let parts = run_chunks(samples, seed, |rng, range| {
        let mut acc = Moments::default();
        for _ in range {
            let y = sphere_point(spec, &radii, rng);
            acc.push(f.eval_unchecked(&y));
        }
        acc
    });
    Ok(Moments::merge_all(parts).mean_estimate(1.0, seed))
}

pub(crate) fn sphere_point<R: Rng + ?Sized>(spec: &ProductSpec, radii: &[f64], rng: &mut R) -> ProductPoint {
    ProductPoint {
        points: spec
            .factors()
            .iter()
            .zip(radii)
            .map(|(d, &r)| sample_unit_sphere(d, rng).dilate_unchecked(r))
            .collect(),
    }
}

/// Exact `‖f‖_p` for the power families:
/// inside `‖f‖_p^p = Π ω_i/(α_i p + Q_i)`, outside `Π ω_i/(β_i p - Q_i)`.
pub fn closed_lp_norm_power(f: &TestFunction, spec: &ProductSpec, p: f64) -> Result<f64> {
    check_p(p)?;
    f.check_finite_norm(spec, p)?;
    let pth = |denoms: Vec<f64>| -> f64 {
        spec.factors()
            .iter()
            .zip(denoms)
            .map(|(d, den): (&GroupDims, f64)| d.omega / den)
            .product()
    };
    let norm_p = match f {
        TestFunction::PowerInside(a) => pth(a.iter().zip(spec.factors()).map(|(a, d)| a * p + d.qf()).collect()),
        TestFunction::PowerOutside(b) => pth(b.iter().zip(spec.factors()).map(|(b, d)| b * p - d.qf()).collect()),
        _ => return Err(Error::Unsupported("closed-form norm exists for power families only".into())),
    };
    Ok(norm_p.powf(1.0 / p))
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("p must lie in (1, ∞), got {p}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::rng::substream;
    use std::f64::consts::PI;

    fn spec(ns: &[usize]) -> ProductSpec {
        ProductSpec::new(ns).unwrap()
    }

    #[test]
    fn power_evaluation_examples() {
        let s = spec(&[1]);
        let x = ProductPoint::with_radii(&s, &[0.5]).unwrap();
        assert_eq!(TestFunction::PowerInside(vec![0.0]).evaluate(&x).unwrap(), 1.0);
        let v = TestFunction::PowerInside(vec![-1.9]).evaluate(&x).unwrap();
        assert!((v - 3.732_131_966_147_23).abs() < 1e-12);
        assert!((v - 0.5f64.powf(-1.9)).abs() < 1e-15);
        assert_eq!(TestFunction::PowerOutside(vec![3.0]).evaluate(&x).unwrap(), 0.0);
        let far = ProductPoint::with_radii(&s, &[2.0]).unwrap();
        assert_eq!(TestFunction::PowerOutside(vec![3.0]).evaluate(&far).unwrap(), 0.125);
    }

    #[test]
    fn log_evaluation_agrees_and_survives_tiny_radii() {
        let f = TestFunction::PowerInside(vec![-1.95, -0.5]);
        let lr = [0.3f64.ln(), 0.7f64.ln()];
        let direct = f.eval_radii(&[0.3, 0.7]);
        assert!((f.ln_abs_radii(&lr) - direct.ln()).abs() < 1e-13);
        let tiny = [-800.0, -1.0];
        assert!(f.ln_abs_radii(&tiny).is_finite());
        assert_eq!(f.ln_abs_radii(&[0.1, -1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn closed_norm_examples() {
        let s = spec(&[1, 1]);
        let f = TestFunction::inside_extremal(&s, 2.0, 0.1);
        let n = closed_lp_norm_power(&f, &s, 2.0).unwrap();
        assert!((n * n - 100.0 * PI.powi(4)).abs() < 1e-8 * 100.0 * PI.powi(4));
        assert!((n * n - 9740.909_103_400_24).abs() < 1e-6);
        let g = TestFunction::outside_extremal(&s, 2.0, 0.1);
        let n = closed_lp_norm_power(&g, &s, 2.0).unwrap();
        assert!((n * n - 100.0 * PI.powi(4)).abs() < 1e-8 * 100.0 * PI.powi(4));
        let s1 = spec(&[1]);
        let ind = TestFunction::unit_indicator(&s1);
        let n = closed_lp_norm_power(&ind, &s1, 2.0).unwrap();
        assert!((n * n - PI * PI / 2.0).abs() < 1e-12);
        assert!(matches!(
            closed_lp_norm_power(&TestFunction::PowerInside(vec![-2.0]), &s1, 2.0),
            Err(Error::InfiniteNorm(_))
        ));
        assert!(matches!(
            closed_lp_norm_power(&TestFunction::PowerOutside(vec![2.0]), &s1, 2.0),
            Err(Error::InfiniteNorm(_))
        ));
    }

    #[test]
    fn bump_profile_is_compact() {
        assert_eq!(bump_profile(1.0), 0.0);
        assert!((bump_profile(0.0) - (-1f64).exp()).abs() < 1e-15);
        let s = spec(&[1]);
        let f = TestFunction::BumpMixture(vec![Bump {
            center: ProductPoint::origin(&s),
            radii: vec![0.5],
            coefficient: 2.0,
        }]);
        let inside = ProductPoint::with_radii(&s, &[0.25]).unwrap();
        let outside = ProductPoint::with_radii(&s, &[0.6]).unwrap();
        let expect = 2.0 * (-1.0 / (1.0 - 0.25f64)).exp();
        assert!((f.evaluate(&inside).unwrap() - expect).abs() < 1e-15);
        assert_eq!(f.evaluate(&outside).unwrap(), 0.0);
        assert_eq!(f.support_radii(), vec![0.5]);
    }

    #[test]
    fn bump_json_roundtrip_and_parse() {
        let s = spec(&[1, 2]);
        let mut rng = substream(11, 0);
        let f = random_bump_mixture(&s, &BumpConfig::default(), &mut rng);
        let TestFunction::BumpMixture(bumps) = &f else { unreachable!() };
        let text = TestFunction::bump_json(bumps).unwrap();
        let TestFunction::BumpMixture(back) = TestFunction::from_bump_json(&text).unwrap() else {
            unreachable!()
        };
        assert_eq!(&back, bumps);
        assert!(back.iter().all(|b| (0.1..=1.0).contains(&b.coefficient)));
        assert!(TestFunction::from_bump_json("[]").is_err());
        assert!(TestFunction::from_bump_json(r#"[{"centers":[[0,0]],"radii":[1],"coefficient":1}]"#).is_err());
    }

    #[test]
    fn parse_specs() {
        let f: TestFunction = "power-inside:-1.9,-1.9".parse().unwrap();
        assert_eq!(f.to_string(), "power-inside:-1.9,-1.9");
        let g: TestFunction = "power-outside:2.1".parse().unwrap();
        assert!(matches!(g, TestFunction::PowerOutside(ref b) if b == &vec![2.1]));
        assert!("gauss:1".parse::<TestFunction>().is_err());
        assert!("power-inside:x".parse::<TestFunction>().is_err());
        assert!("bumps:/nonexistent/file.json".parse::<TestFunction>().is_err());
    }

    #[test]
    fn radialization_fixes_radial_functions() {
        let s = spec(&[1]);
        let f = TestFunction::PowerInside(vec![-1.0]);
        let x = ProductPoint::new(vec![HPoint::new(1, vec![0.2, -0.3, 0.1]).unwrap()]).unwrap();
        let g = radialize(&f, &s, &x, 1000, 4).unwrap();
        let fx = f.evaluate(&x).unwrap();
        assert!((g.value - fx).abs() < 1e-12 * fx);
    }

    #[test]
    fn radialization_kills_odd_part() {
        // f = 1 + x_1 · h(|x|): spherical mean of the odd part vanishes
        let s = spec(&[1]);
        let odd = TestFunction::BumpMixture(vec![
            Bump {
                center: ProductPoint::new(vec![HPoint::new(1, vec![0.4, 0.0, 0.0]).unwrap()]).unwrap(),
                radii: vec![0.3],
                coefficient: 1.0,
            },
            Bump {
                center: ProductPoint::new(vec![HPoint::new(1, vec![-0.4, 0.0, 0.0]).unwrap()]).unwrap(),
                radii: vec![0.3],
                coefficient: -1.0,
            },
        ]);
        let x = ProductPoint::with_radii(&s, &[0.4]).unwrap();
        let g = radialize(&odd, &s, &x, 200_000, 9).unwrap();
        assert!(g.value.abs() <= 3.0 * g.std_error, "{g:?}");
    }

    #[test]
    fn power_family_homogeneity() {
        let s = spec(&[1, 2]);
        let f = TestFunction::PowerInside(vec![-1.3, 0.7]);
        let mut rng = substream(2, 0);
        for _ in 0..200 {
            let x = ProductPoint::sample_polyball(&s, &[0.5, 0.5], &mut rng);
            let l = [rng.gen_range(0.1..1.9), rng.gen_range(0.1..1.9)];
            let scaled = f.evaluate(&x.dilate_each(&l).unwrap()).unwrap();
            let expect = f.evaluate(&x).unwrap() * l[0].powf(-1.3) * l[1].powf(0.7);
            assert!((scaled - expect).abs() <= 1e-12 * expect.abs());
        }
    }

    #[test]
    fn dilated_bumps_match_pointwise() {
        let s = spec(&[1]);
        let mut rng = substream(21, 0);
        let f = random_bump_mixture(&s, &BumpConfig::default(), &mut rng);
        let g = f.compose_dilation(&[1.7]).unwrap();
        for _ in 0..500 {
            let x = ProductPoint::sample_polyball(&s, &[2.0], &mut rng);
            let a = g.evaluate(&x).unwrap();
            let b = f.evaluate(&x.dilate_each(&[1.7]).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
