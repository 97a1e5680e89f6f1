use rayon::prelude::*;

use super::{combined, row_budget, within_rel, within_sigma, ExperimentReport, Row, Verdict, SIGMA_GATE};
use crate::closedform::indicator_pairing;
use crate::error::Result;
use crate::funcs::{check_p, random_bump_mixture, BumpConfig, TestFunction};
use crate::hgroup::ProductSpec;
use crate::measure::rng::substream;
use crate::measure::{Budget, Estimate, Method};
use crate::operators::{check_cesaro_bounded, pairing, Operator, Weight};

const RADIAL_TOL: f64 = 1e-8;

/// `⟨f, P_φ g⟩` against `⟨g, P*_φ f⟩`: the unit-ball indicator by every
/// available method, the zero weight, and `pairs` random bump pairs by
/// Monte Carlo.
pub fn duality_check(
    phi: &Weight,
    p: f64,
    spec: &ProductSpec,
    pairs: usize,
    config: &BumpConfig,
    budget: &Budget,
) -> Result<ExperimentReport> {
    check_p(p)?;
    phi.check_m(spec.m())?;
    check_cesaro_bounded(phi, p, spec)?;

    let mut report = ExperimentReport::new("duality_check", budget.seed);
    report.param("p", p);
    report.param("factors", spec.ns());
    report.param("weight", phi.to_string());
    report.param("pairs", pairs);
    report.param("samples", budget.samples);
    report.param("generator", config);

    let hardy = Operator::WeightedHardy(phi.clone());
    let cesaro = Operator::WeightedCesaro(phi.clone());
    let ind = TestFunction::unit_indicator(spec);

    let mut methods = vec![Method::Mc];
    if phi.is_separable() {
        methods.insert(0, Method::Radial);
    }
    if phi.exponents().is_some() {
        methods.insert(0, Method::Closed);
    }
    // The reference value: closed form when available, otherwise quadrature,
    // otherwise the Monte Carlo left-hand side.
    let oracle = match phi.exponents() {
        Some(a) => indicator_pairing(a, spec)?,
        None if phi.is_separable() => pairing(&ind, &ind, &hardy, spec, Method::Radial, budget)?.value,
        None => pairing(&ind, &ind, &hardy, spec, Method::Mc, &row_budget(budget, 1000))?.value,
    };
    for (j, &method) in methods.iter().enumerate() {
        for (side, op, label) in [(0, &hardy, "<1_B, P_phi 1_B>"), (1, &cesaro, "<1_B, P*_phi 1_B>")] {
            let est = pairing(&ind, &ind, op, spec, method, &row_budget(budget, (2 * j + side) as u64))?;
            let ok = match method {
                Method::Closed => within_rel(est.value, oracle, 1e-12),
                Method::Radial => within_rel(est.value, oracle, RADIAL_TOL),
                Method::Mc => within_sigma(&est, oracle, SIGMA_GATE),
            };
            report.rows.push(Row::compare(
                format!("indicator; {label}; method={method}"),
                est,
                oracle,
                Verdict::from_bool(ok),
            ));
        }
    }

    let zero = Weight::zero(spec.m());
    for (j, method) in [Method::Radial, Method::Mc].into_iter().enumerate() {
        for (side, op, label) in [
            (0, Operator::WeightedHardy(zero.clone()), "<1_B, P_0 1_B>"),
            (1, Operator::WeightedCesaro(zero.clone()), "<1_B, P*_0 1_B>"),
        ] {
            let est = pairing(&ind, &ind, &op, spec, method, &row_budget(budget, (100 + 2 * j + side) as u64))?;
            report.rows.push(Row::compare(
                format!("zero weight; {label}; method={method}"),
                est,
                0.0,
                Verdict::from_bool(est.value == 0.0),
            ));
        }
    }

    let pair_rows: Vec<Row> = (0..pairs)
        .into_par_iter()
        .map(|k| -> Result<Row> {
            let b = row_budget(budget, 1_000_000 + k as u64);
            let mut rng = substream(b.seed, u64::MAX);
            let f = random_bump_mixture(spec, config, &mut rng);
            let g = random_bump_mixture(spec, config, &mut rng);
            let lhs = pairing(&f, &g, &hardy, spec, Method::Mc, &row_budget(&b, 0))?;
            let rhs = pairing(&g, &f, &cesaro, spec, Method::Mc, &row_budget(&b, 1))?;
            let z: Estimate = combined(lhs, rhs);
            Ok(Row::compare(
                format!("pair={k}; <f, P_phi g> vs <g, P*_phi f>; sigma combines both estimates"),
                z,
                rhs.value,
                Verdict::from_bool(within_sigma(&z, rhs.value, SIGMA_GATE)),
            ))
        })
        .collect::<Result<_>>()?;
    report.rows.extend(pair_rows);

    let rows = report.rows.clone();
    report.criterion_over(
        "AC8",
        "duality: both pairings agree (closed exact, quadrature 1e-8, MC 3 sigma) on the indicator, the zero weight and random bump pairs",
        &rows,
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quartic_weight_indicator_and_pairs() {
        let spec = ProductSpec::new(&[1]).unwrap();
        let phi = Weight::Monomial(vec![4.0]);
        let r = duality_check(&phi, 2.0, &spec, 3, &BumpConfig::default(), &Budget::with_samples(20_000, 5)).unwrap();
        assert_eq!(r.verdict_of("AC8"), Some(Verdict::Pass), "{:#?}", r.rows);
        assert!((r.rows[0].oracle.unwrap() - PI * PI / 10.0).abs() < 1e-14);
    }

    #[test]
    fn unbounded_dual_is_rejected() {
        let spec = ProductSpec::new(&[1]).unwrap();
        let err = duality_check(&Weight::one(1), 2.0, &spec, 1, &BumpConfig::default(), &Budget::default()).unwrap_err();
        assert!(err.to_string().contains("unbounded operator"));
    }
}
