use rayon::prelude::*;

use super::{row_budget, rounding_slack, within_rel, within_sigma, ExperimentReport, Row, Verdict, SIGMA_GATE};
use crate::closedform::{
    monomial_characteristic, weighted_cesaro_power_quotient, weighted_extremal_bound,
    weighted_extremal_bound_uncorrected, weighted_hardy_power_quotient, Kind,
};
use crate::error::{Error, Result};
use crate::funcs::{check_p, TestFunction};
use crate::hgroup::ProductSpec;
use crate::measure::{Budget, Estimate, Method};
use crate::operators::{norm_quotient, Operator, Weight};

pub const WEIGHTED_EPS_GRID: [f64; 5] = [0.1, 0.05, 0.01, 0.005, 0.001];

/// The lower bound at the smallest ε must be within this fraction of `C_φ`.
const LIMIT_TOL: f64 = 0.05;

/// Outside-extremal quotients of `P_{φ,m}` for a monomial weight against the
/// weight characteristic `C_φ = ∫ Π t_i^{a_i - Q_i/p} dt`.
///
/// When `C_φ = ∞` the report is informational: it records the lower bounds
/// growing without limit as ε shrinks.
pub fn weighted_sharpness(
    phi: &Weight,
    p: f64,
    spec: &ProductSpec,
    eps_grid: &[f64],
    budget: &Budget,
) -> Result<ExperimentReport> {
    check_p(p)?;
    phi.check_m(spec.m())?;
    let a = phi
        .exponents()
        .ok_or_else(|| Error::Unsupported("weighted_sharpness needs a monomial weight".into()))?;
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::invalid("ε grid must be non-empty and inside (0, 1)"));
    }
    let c_phi = monomial_characteristic(a, p, spec, Kind::Hardy)?;
    let c_star = monomial_characteristic(a, p, spec, Kind::Cesaro)?;

    let mut report = ExperimentReport::new("weighted_sharpness", budget.seed);
    report.param("p", p);
    report.param("factors", spec.ns());
    report.param("weight", phi.to_string());
    report.param("eps", eps_grid);
    report.param("samples", budget.samples);
    report.param("c_phi", if c_phi.is_finite() { c_phi.to_string() } else { "inf".into() });

    if !c_phi.is_finite() {
        return unbounded_report(report, a, p, spec, eps_grid);
    }

    let op = Operator::WeightedHardy(phi.clone());
    let per_eps: Vec<Vec<Row>> = eps_grid
        .par_iter()
        .enumerate()
        .map(|(k, &eps)| -> Result<Vec<Row>> {
            let f = TestFunction::outside_extremal(spec, p, eps);
            let bound = weighted_extremal_bound(a, eps, p, spec)?;
            let uncorrected = weighted_extremal_bound_uncorrected(a, eps, p, spec)?;
            let closed = weighted_hardy_power_quotient(&f, a, p, spec)?;
            let mc = norm_quotient(&f, &op, p, spec, Method::Mc, &row_budget(budget, k as u64))?;
            let slack = rounding_slack(c_phi);
            let mut rows = vec![
                Row::compare(
                    format!("eps={eps}; rigorous lower bound; oracle = C_phi"),
                    Estimate::exact(bound),
                    c_phi,
                    Verdict::from_bool(bound <= c_phi + slack),
                ),
                Row::compare(
                    format!("eps={eps}; bound without eps^eps factor; oracle = C_phi"),
                    Estimate::exact(uncorrected),
                    c_phi,
                    Verdict::Info,
                ),
                Row::compare(
                    format!("eps={eps}; quotient; method=closed; bound <= quotient <= C_phi"),
                    Estimate::exact(closed),
                    c_phi,
                    Verdict::from_bool(closed >= bound * (1.0 - 1e-12) && closed <= c_phi + slack),
                ),
                Row::compare(
                    format!("eps={eps}; quotient; method=mc; oracle = closed quotient"),
                    mc,
                    closed,
                    Verdict::from_bool(
                        within_sigma(&mc, closed, SIGMA_GATE) && mc.value <= c_phi + SIGMA_GATE * mc.std_error + slack,
                    ),
                ),
            ];
            // Dual operator: tested against its own characteristic, reported only.
            let label = format!("eps={eps}; Cesaro quotient (conjectured norm C*_phi); method=closed");
            rows.push(match weighted_cesaro_power_quotient(&f, a, p, spec) {
                Ok(q) if c_star.is_finite() => Row::compare(label, Estimate::exact(q), c_star, Verdict::Info),
                Ok(q) => Row::info(label, Estimate::exact(q)),
                Err(e) => Row::error(label, &e),
            });
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let eps_min = eps_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = weighted_extremal_bound(a, eps_min, p, spec)?;
    let limit_row = Row::compare(
        format!("eps={eps_min}; smallest-eps bound within {}% of C_phi", LIMIT_TOL * 100.0),
        Estimate::exact(limit),
        c_phi,
        Verdict::from_bool(within_rel(limit, c_phi, LIMIT_TOL)),
    );
    report.rows.extend(per_eps.into_iter().flatten());
    report.rows.push(limit_row);
    let rows = report.rows.clone();
    report.criterion_over(
        "AC7",
        "weighted Hardy: bound <= quotient <= C_phi (+3 sigma) at every eps; bounds reach C_phi within 5%",
        &rows,
    );
    Ok(report)
}

fn unbounded_report(
    mut report: ExperimentReport,
    a: &[f64],
    p: f64,
    spec: &ProductSpec,
    eps_grid: &[f64],
) -> Result<ExperimentReport> {
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|x, y| y.total_cmp(x));
    let mut previous = 0.0;
    let mut growing = true;
    for &eps in &grid {
        let bound = weighted_extremal_bound(a, eps, p, spec)?;
        growing &= bound > previous;
        previous = bound;
        report.rows.push(Row::info(
            format!("eps={eps}; rigorous lower bound for the norm (C_phi infinite)"),
            Estimate::exact(bound),
        ));
        let f = TestFunction::outside_extremal(spec, p, eps);
        let label = format!("eps={eps}; quotient; method=closed");
        report.rows.push(match weighted_hardy_power_quotient(&f, a, p, spec) {
            Ok(q) => Row::info(label, Estimate::exact(q)),
            Err(e) => Row::error(label, &e),
        });
    }
    let verdict = if growing { Verdict::Info } else { Verdict::Fail };
    report.criterion(
        "AC7",
        "unbounded weight: lower bounds increase along the decreasing eps grid (divergence, informational)",
        verdict,
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_weight_passes() {
        let spec = ProductSpec::new(&[1]).unwrap();
        let phi = Weight::Monomial(vec![3.0]);
        let r = weighted_sharpness(&phi, 2.0, &spec, &WEIGHTED_EPS_GRID, &Budget::with_samples(20_000, 1)).unwrap();
        assert_eq!(r.verdict_of("AC7"), Some(Verdict::Pass), "{:#?}", r.rows);
        assert_eq!(r.params["c_phi"], "0.5");
    }

    #[test]
    fn constant_weight_is_informational() {
        let spec = ProductSpec::new(&[1]).unwrap();
        let grid = [0.1, 0.05, 0.02, 0.01, 0.005];
        let r = weighted_sharpness(&Weight::one(1), 2.0, &spec, &grid, &Budget::default()).unwrap();
        assert_eq!(r.verdict_of("AC7"), Some(Verdict::Info));
        let at_01 = r.rows.iter().find(|row| row.input.starts_with("eps=0.01; rigorous")).unwrap();
        assert!(at_01.estimate > 50.0, "{at_01:?}");
    }
}
