use rand::Rng;
use serde::Serialize;

use super::{row_budget, within_rel, within_sigma, ExperimentReport, Row, Verdict, SIGMA_GATE};
use crate::error::{Error, Result};
use crate::funcs::ProductPoint;
use crate::hgroup::{GroupDims, HPoint, ProductSpec};
use crate::measure::rng::run_chunks;
use crate::measure::{mc_integrate, radial_integral, Budget, Estimate, Moments};

/// Absolute tolerance of the algebraic checks, scaled by the size of the
/// quantities involved.
const AXIOM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct GeometryConfig {
    /// Group indices `n` whose unit-ball volume is measured.
    pub volume_ns: Vec<usize>,
    /// Monte Carlo points per volume estimate.
    pub volume_samples: usize,
    /// Random triples for the algebraic checks.
    pub axiom_trials: usize,
    /// Monte Carlo points for the polar-identity integral.
    pub polar_samples: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            volume_ns: vec![1, 2, 3],
            volume_samples: 1_000_000,
            axiom_trials: 100_000,
            polar_samples: 1_000_000,
        }
    }
}

/// Hit-or-miss volume of the Korányi ball of radius `r` inside the box
/// `[-r, r]^{2n} × [-r², r²]`, which contains it since `|z_j| ≤ |x|_h` and
/// `|t| ≤ |x|_h²`.
fn mc_ball_volume(dims: &GroupDims, r: f64, samples: usize, seed: u64) -> Estimate {
    let dim = 2 * dims.n + 1;
    let parts = run_chunks(samples, seed, |rng, range| {
        let mut acc = Moments::default();
        let mut coords = vec![0.0; dim];
        for _ in range {
            coords.iter_mut().for_each(|c| *c = rng.gen_range(-1.0..1.0));
            let h: f64 = coords[..dim - 1].iter().map(|c| c * c * r * r).sum();
            let t = coords[dim - 1] * r * r;
            acc.push(if h * h + t * t < r.powi(4) { 1.0 } else { 0.0 });
        }
        acc
    });
    let box_volume = 2f64.powi(dim as i32) * r.powi(2 * dims.n as i32 + 2);
    Moments::merge_all(parts).mean_estimate(box_volume, seed)
}

fn volume_rows(n: usize, samples: usize, budget: &Budget, row: u64) -> Result<Vec<Row>> {
    let dims = GroupDims::new(n)?;
    let est = mc_ball_volume(&dims, 1.0, samples, row_budget(budget, row).seed);
    Ok(vec![
        Row::compare(
            format!("n={n}; unit ball volume; method=mc"),
            est,
            dims.volume,
            Verdict::from_bool(within_sigma(&est, dims.volume, SIGMA_GATE)),
        ),
        Row::info(
            format!("n={n}; ratio measured volume / quoted closed form (expected 0.5)"),
            Estimate {
                value: est.value / dims.quoted_omega_constant(),
                std_error: est.std_error / dims.quoted_omega_constant(),
                ..est
            },
        ),
    ])
}

/// Monte Carlo volume of the unit ball of ℍⁿ with the quoted-constant ratio.
pub fn volume_check(n: usize, budget: &Budget) -> Result<ExperimentReport> {
    if budget.samples == 0 {
        return Err(Error::invalid("volume needs at least one sample"));
    }
    let mut report = ExperimentReport::new("volume", budget.seed);
    report.param("n", n);
    report.param("samples", budget.samples);
    report.rows = volume_rows(n, budget.samples, budget, 0)?;
    let rows = report.rows.clone();
    report.criterion_over("AC9", "unit ball volume within 3 sigma of V_Q", &rows);
    Ok(report)
}

/// Counts of failed algebraic identities over random triples.
#[derive(Default)]
struct Violations {
    associativity: u64,
    inverse: u64,
    triangle: u64,
    homogeneity: u64,
    left_invariance: u64,
    dilation_homomorphism: u64,
}

fn random_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HPoint {
    HPoint::new(n, (0..2 * n + 1).map(|_| rng.gen_range(-2.0..2.0)).collect()).expect("2n+1 coordinates")
}

fn max_abs_diff(a: &HPoint, b: &HPoint) -> f64 {
    a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_axioms(trials: usize, seed: u64) -> Violations {
    let parts = run_chunks(trials, seed, |rng, range| {
        let mut v = Violations::default();
        for _ in range {
            let n = rng.gen_range(1..=3);
            let (x, y, z) = (random_point(n, rng), random_point(n, rng), random_point(n, rng));
            let r = rng.gen_range(0.1..5.0);
            let scale = 1.0 + x.koranyi_norm() + y.koranyi_norm() + z.koranyi_norm();
            let tol = AXIOM_TOL * scale * scale;
            let law = |a: &HPoint, b: &HPoint| a.group_law(b).expect("same n");

            let left = law(&law(&x, &y), &z);
            let right = law(&x, &law(&y, &z));
            v.associativity += u64::from(max_abs_diff(&left, &right) > tol);

            let e = law(&x, &x.inverse());
            v.inverse += u64::from(max_abs_diff(&e, &HPoint::origin(n)) > tol);

            let d = |a: &HPoint, b: &HPoint| a.distance(b).expect("same n");
            v.triangle += u64::from(d(&x, &z) > d(&x, &y) + d(&y, &z) + AXIOM_TOL * scale);

            let dx = x.dilate(r).expect("r > 0");
            v.homogeneity += u64::from((dx.koranyi_norm() - r * x.koranyi_norm()).abs() > AXIOM_TOL * r * scale);

            v.left_invariance += u64::from((d(&law(&z, &x), &law(&z, &y)) - d(&x, &y)).abs() > AXIOM_TOL * scale);

            let lhs = law(&x, &y).dilate(r).expect("r > 0");
            let rhs = law(&dx, &y.dilate(r).expect("r > 0"));
            v.dilation_homomorphism += u64::from(max_abs_diff(&lhs, &rhs) > tol * r * r.max(1.0));
        }
        v
    });
    parts.into_iter().fold(Violations::default(), |mut acc, v| {
        acc.associativity += v.associativity;
        acc.inverse += v.inverse;
        acc.triangle += v.triangle;
        acc.homogeneity += v.homogeneity;
        acc.left_invariance += v.left_invariance;
        acc.dilation_homomorphism += v.dilation_homomorphism;
        acc
    })
}

/// Group axioms, norm homogeneity, triangle inequality, ball volumes,
/// dilation scaling of volume and the polar integration identity.
pub fn geometry_selftest(config: &GeometryConfig, budget: &Budget) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("geometry_selftest", budget.seed);
    report.param("config", config);

    for (k, &n) in config.volume_ns.iter().enumerate() {
        report.rows.extend(volume_rows(n, config.volume_samples, budget, k as u64)?);
    }

    let v = check_axioms(config.axiom_trials, row_budget(budget, 100).seed);
    for (name, count) in [
        ("associativity", v.associativity),
        ("inverse", v.inverse),
        ("triangle inequality", v.triangle),
        ("norm homogeneity |delta_r x| = r|x|", v.homogeneity),
        ("left invariance of the distance", v.left_invariance),
        ("dilations are automorphisms", v.dilation_homomorphism),
    ] {
        report.rows.push(Row::compare(
            format!("{name}; violations in {} random triples", config.axiom_trials),
            Estimate::exact(count as f64),
            0.0,
            Verdict::from_bool(count == 0),
        ));
    }

    // |δ_r(B)| = r^Q |B|, with the dilated ball measured in its own box.
    let dims = GroupDims::new(1)?;
    let r = 1.7;
    let spec = ProductSpec::new(&[1])?;
    let dilated = mc_ball_volume(&dims, r, config.volume_samples, row_budget(budget, 101).seed);
    let target = r.powi(dims.q as i32) * dims.volume;
    report.rows.push(Row::compare(
        format!("n=1; |B(0,{r})| = r^Q |B(0,1)|; method=mc"),
        dilated,
        target,
        Verdict::from_bool(within_sigma(&dilated, target, SIGMA_GATE)),
    ));

    // ∫ e^{-|x|^4} dx = ω ∫ e^{-r^4} r^3 dr = ω/4 = V_4 on ℍ¹.
    let polar_target = dims.omega / 4.0;
    let quad = radial_integral(|r| (-r.powi(4)).exp(), &dims, f64::INFINITY, 1e-13)?;
    report.rows.push(Row::compare(
        "n=1; polar identity for exp(-r^4); method=radial",
        Estimate::exact(quad),
        polar_target,
        Verdict::from_bool(within_rel(quad, polar_target, 1e-10)),
    ));
    let mc = mc_integrate(
        |x: &ProductPoint| (-x.factors()[0].koranyi_norm().powi(4)).exp(),
        &spec,
        &[3.0],
        config.polar_samples,
        row_budget(budget, 102).seed,
    )?;
    report.rows.push(Row::compare(
        "n=1; polar identity for exp(-r^4); method=mc over B(0,3); oracle = quadrature",
        mc,
        quad,
        Verdict::from_bool(within_sigma(&mc, quad, SIGMA_GATE)),
    ));

    let rows = report.rows.clone();
    report.criterion_over(
        "AC9",
        "geometry: ball volumes within 3 sigma, zero axiom violations at 1e-12, dilation scaling and polar identity",
        &rows,
    );
    Ok(report)
}
