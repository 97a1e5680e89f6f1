//! Named experiments. Each one bundles operator evaluations with their
//! oracles into an [`ExperimentReport`] whose summary grades the numbered
//! acceptance criteria AC1–AC9.
//!
//! Rows are computed in parallel; every row draws from its own seed derived
//! from `(run seed, row index)` and rows are assembled in index order, so a
//! report depends only on its configuration and seed.

mod duality;
mod fuzz;
mod geometry;
mod radial;
mod report;
mod sharpness;
mod weighted;

pub use duality::duality_check;
pub use fuzz::bound_fuzz;
pub use geometry::{geometry_selftest, volume_check, GeometryConfig};
pub use radial::radialization_check;
pub use report::{Criterion, ExperimentReport, Plot, Row, Verdict};
pub use sharpness::{sharpness_sweep, DEFAULT_EPS_GRID};
pub use weighted::{weighted_sharpness, WEIGHTED_EPS_GRID};

use crate::measure::{Budget, Estimate};
use crate::measure::rng::derive_seed;

/// Monte Carlo agreement threshold in standard errors.
pub const SIGMA_GATE: f64 = 3.0;

/// Relative slack for comparisons between deterministic values, covering
/// floating-point rounding only.
const ROUNDING: f64 = 1e-12;

fn rounding_slack(scale: f64) -> f64 {
    ROUNDING * scale.abs().max(1.0)
}

/// `|est - target| ≤ k·σ` up to rounding.
fn within_sigma(est: &Estimate, target: f64, k: f64) -> bool {
    (est.value - target).abs() <= k * est.std_error + rounding_slack(target)
}

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

/// Estimate of `a - b` style comparisons between two independent MC runs:
/// keeps `a`'s value and carries the combined standard error.
fn combined(a: Estimate, b: Estimate) -> Estimate {
    Estimate {
        std_error: a.std_error.hypot(b.std_error),
        ..a
    }
}

fn row_budget(base: &Budget, row: u64) -> Budget {
    Budget {
        seed: derive_seed(base.seed, row),
        ..*base
    }
}
