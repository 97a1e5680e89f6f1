use rayon::prelude::*;

use super::{combined, row_budget, within_sigma, ExperimentReport, Row, Verdict, SIGMA_GATE};
use crate::error::Result;
use crate::funcs::{check_p, radialize, random_bump_mixture, sphere_point, Bump, BumpConfig, ProductPoint, TestFunction};
use crate::hgroup::ProductSpec;
use crate::measure::rng::{run_chunks, substream};
use crate::measure::{lp_norm, Budget, Estimate, Method, Moments};
use crate::operators::hardy_eval;

/// Sphere draws per outer radius in the `‖g_f‖_p` estimator.
const SPHERE_DRAWS: usize = 100;
const SPHERE_GROUPS: usize = 10;
/// Outer radii are drawn uniformly from this polyball when sampling `x`.
const POINT_RADIUS: f64 = 2.5;

/// Checks the two radialization facts on random bump mixtures `f`:
/// `P(g_f)(x) = P(f)(x)` pointwise and `‖g_f‖_p ≤ ‖f‖_p`.
pub fn radialization_check(
    trials: usize,
    config: &BumpConfig,
    p: f64,
    spec: &ProductSpec,
    budget: &Budget,
) -> Result<ExperimentReport> {
    check_p(p)?;
    let mut report = ExperimentReport::new("radialization_check", budget.seed);
    report.param("p", p);
    report.param("factors", spec.ns());
    report.param("trials", trials);
    report.param("samples", budget.samples);
    report.param("generator", config);

    let trial_rows: Vec<[Row; 2]> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<[Row; 2]> {
            let b = row_budget(budget, t as u64);
            let mut rng = substream(b.seed, u64::MAX);
            let f = random_bump_mixture(spec, config, &mut rng);
            let x = ProductPoint::sample_polyball(spec, &vec![POINT_RADIUS; spec.m()], &mut rng);

            let direct = hardy_eval(&f, spec, &x, Method::Mc, &row_budget(&b, 0))?;
            let through_g = hardy_of_radialization(&f, spec, &x, &row_budget(&b, 1));
            let z = combined(through_g, direct);
            let pointwise = Row::compare(
                format!("trial={t}; P(g_f)(x) vs P(f)(x); sigma combines both estimates"),
                z,
                direct.value,
                Verdict::from_bool(within_sigma(&z, direct.value, SIGMA_GATE)),
            );

            let norm_f = lp_norm(&f, spec, p, Method::Mc, &row_budget(&b, 2))?;
            let norm_g = radialized_norm(&f, spec, p, &row_budget(&b, 3));
            let slack = SIGMA_GATE * norm_g.std_error.hypot(norm_f.std_error);
            let contraction = Row::compare(
                format!("trial={t}; ||g_f||_p <= ||f||_p; oracle = ||f||_p"),
                norm_g,
                norm_f.value,
                Verdict::from_bool(norm_g.value <= norm_f.value + slack),
            );
            Ok([pointwise, contraction])
        })
        .collect::<Result<_>>()?;

    // A radial function is its own radialization.
    let centered = TestFunction::BumpMixture(vec![Bump {
        center: ProductPoint::origin(spec),
        radii: vec![1.5; spec.m()],
        coefficient: 1.0,
    }]);
    let mut rng = substream(budget.seed, u64::MAX - 1);
    let x = ProductPoint::sample_polyball(spec, &vec![1.0; spec.m()], &mut rng);
    let g = radialize(&centered, spec, &x, 1000, row_budget(budget, trials as u64).seed)?;
    let fx = centered.evaluate(&x)?;
    let fixed = Row::compare(
        "radial f: g_f(x) = f(x)",
        g,
        fx,
        Verdict::from_bool((g.value - fx).abs() <= 1e-9 * fx.abs()),
    );

    let (pointwise, contraction): (Vec<Row>, Vec<Row>) = trial_rows.into_iter().map(|[a, b]| (a, b)).unzip();
    report.rows.push(fixed);
    report.rows.extend(pointwise);
    report.rows.extend(contraction);
    let rows = report.rows.clone();
    report.criterion_over(
        "AC6",
        "radialization preserves P(f) pointwise within 3 sigma and does not increase the L^p norm",
        &rows,
    );
    Ok(report)
}

/// `P(g_f)(x)`: a uniform point `y` of the polyball with radii `|x_i|`, then
/// one point of the product sphere with radii `|y_i|`.
fn hardy_of_radialization(f: &TestFunction, spec: &ProductSpec, x: &ProductPoint, budget: &Budget) -> Estimate {
    let radii = x.radii();
    let parts = run_chunks(budget.samples, budget.seed, |rng, range| {
        let mut acc = Moments::default();
        for _ in range {
            let y = ProductPoint::sample_polyball(spec, &radii, rng);
            acc.push(f.eval_unchecked(&sphere_point(spec, &y.radii(), rng)));
        }
        acc
    });
    Moments::merge_all(parts).mean_estimate(1.0, budget.seed)
}

/// `‖g_f‖_p` with `g_f(r)` replaced by a mean of sphere draws. The plug-in
/// `|ĝ|^p` is biased upward; a delete-a-group jackknife over the sphere
/// draws removes the leading term at each outer radius.
fn radialized_norm(f: &TestFunction, spec: &ProductSpec, p: f64, budget: &Budget) -> Estimate {
    let support = f.support_radii();
    let volume = spec.polyball_volume(&support).expect("bump supports are positive");
    let outer = (budget.samples / SPHERE_DRAWS).max(500);
    let per_group = SPHERE_DRAWS / SPHERE_GROUPS;
    let parts = run_chunks(outer, budget.seed, |rng, range| {
        let mut acc = Moments::default();
        let mut sums = [0.0; SPHERE_GROUPS];
        for _ in range {
            let r = ProductPoint::sample_polyball(spec, &support, rng).radii();
            for s in sums.iter_mut() {
                *s = (0..per_group).map(|_| f.eval_unchecked(&sphere_point(spec, &r, rng))).sum();
            }
            let total: f64 = sums.iter().sum();
            let full = (total / SPHERE_DRAWS as f64).abs().powf(p);
            let leave_out: f64 = sums
                .iter()
                .map(|s| ((total - s) / (SPHERE_DRAWS - per_group) as f64).abs().powf(p))
                .sum::<f64>()
                / SPHERE_GROUPS as f64;
            let g = SPHERE_GROUPS as f64;
            acc.push(g * full - (g - 1.0) * leave_out);
        }
        acc
    });
    let pth = Moments::merge_all(parts).mean_estimate(volume, budget.seed);
    let value = pth.value.max(0.0).powf(1.0 / p);
    let std_error = if value > 0.0 {
        pth.std_error / (p * value.powf(p - 1.0))
    } else {
        pth.std_error.powf(1.0 / p)
    };
    Estimate { value, std_error, ..pth }
}
