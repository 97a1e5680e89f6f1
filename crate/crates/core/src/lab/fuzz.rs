use rayon::prelude::*;

use super::{row_budget, ExperimentReport, Row, Verdict, SIGMA_GATE};
use crate::closedform::{hardy_power_inside_quotient, sharp_constant};
use crate::error::Result;
use crate::funcs::{check_p, bump_profile, random_bump_mixture, Bump, BumpConfig, RadialProfile, ProductPoint, TestFunction};
use crate::hgroup::ProductSpec;
use crate::measure::rng::substream;
use crate::measure::{Budget, Estimate, Method};
use crate::operators::{norm_quotient, Operator};

/// Monte Carlo quotients `‖P_m f‖_p / ‖f‖_p` of random bump mixtures, each
/// checked against the sharp constant with its own relative error:
/// `q ≤ C (1 + 3 σ_q / q)`.
pub fn bound_fuzz(
    trials: usize,
    config: &BumpConfig,
    p: f64,
    spec: &ProductSpec,
    budget: &Budget,
) -> Result<ExperimentReport> {
    check_p(p)?;
    let sharp = sharp_constant(p, spec.m())?.value;
    let mut report = ExperimentReport::new("bound_fuzz", budget.seed);
    report.param("p", p);
    report.param("factors", spec.ns());
    report.param("trials", trials);
    report.param("samples", budget.samples);
    report.param("generator", config);

    let grade = |q: &Estimate| q.value <= sharp * (1.0 + SIGMA_GATE * q.std_error / q.value);

    let trial_rows: Vec<(Row, Option<Estimate>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let b = row_budget(budget, t as u64);
            let mut rng = substream(b.seed, u64::MAX);
            let f = random_bump_mixture(spec, config, &mut rng);
            let count = match &f {
                TestFunction::BumpMixture(bumps) => bumps.len(),
                _ => unreachable!("generator returns bump mixtures"),
            };
            let label = format!("trial={t}; bumps={count}");
            match norm_quotient(&f, &Operator::Hardy, p, spec, Method::Mc, &b) {
                Ok(q) => (Row::compare(label, q, sharp, Verdict::from_bool(grade(&q))), Some(q)),
                Err(e) => (Row::error(label, &e), None),
            }
        })
        .collect();

    let worst = trial_rows
        .iter()
        .filter_map(|(_, q)| *q)
        .max_by(|a, b| a.value.total_cmp(&b.value));

    // Radial, so nested quadrature gives its quotient without sampling noise.
    let centered = TestFunction::RadialProduct(vec![RadialProfile::new("bump", 1.0, bump_profile); spec.m()]);
    let indicator = hardy_power_inside_quotient(&vec![0.0; spec.m()], p, spec)?;
    let centered_row = match norm_quotient(&centered, &Operator::Hardy, p, spec, Method::Radial, budget) {
        Ok(q) => Row::compare(
            "centered unit bump; method=radial; strictly below the sharp constant; oracle = unit-ball indicator quotient",
            q,
            indicator,
            Verdict::from_bool(q.value < sharp),
        ),
        Err(e) => Row {
            verdict: Verdict::Fail,
            ..Row::error("centered unit bump", &e)
        },
    };

    let zero = TestFunction::BumpMixture(vec![Bump {
        center: ProductPoint::origin(spec),
        radii: vec![0.5; spec.m()],
        coefficient: 0.0,
    }]);
    let zero_row = match norm_quotient(&zero, &Operator::Hardy, p, spec, Method::Mc, &row_budget(budget, trials as u64)) {
        Ok(q) => Row::info("zero-coefficient mixture (expected a zero-norm rejection)", q),
        Err(e) => Row::error("zero-coefficient mixture", &e),
    };

    report.rows.extend(trial_rows.into_iter().map(|(r, _)| r));
    if let Some(q) = worst {
        report.rows.push(Row::compare(
            "maximum quotient over trials",
            q,
            sharp,
            Verdict::from_bool(grade(&q)),
        ));
    }
    report.rows.push(centered_row);
    report.rows.push(zero_row);
    let rows = report.rows.clone();
    report.criterion_over(
        "AC5",
        "no random bump quotient exceeds the sharp constant by more than 3 relative sigma",
        &rows,
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_fuzz_run_passes_and_flags_zero_mixture() {
        let spec = ProductSpec::new(&[1]).unwrap();
        let r = bound_fuzz(6, &BumpConfig::default(), 2.0, &spec, &Budget::with_samples(8000, 4)).unwrap();
        assert_eq!(r.verdict_of("AC5"), Some(Verdict::Pass));
        let zero = r.rows.iter().find(|row| row.input.starts_with("zero-coefficient")).unwrap();
        assert_eq!(zero.verdict, Verdict::Info);
        assert!(zero.input.contains("zero norm"), "{}", zero.input);
        let centered = r.rows.iter().find(|row| row.input.starts_with("centered")).unwrap();
        assert!(centered.estimate < 2.0 && centered.estimate > 1.0, "{centered:?}");
    }
}
