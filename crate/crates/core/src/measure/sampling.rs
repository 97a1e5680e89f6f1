//! Radial sampling laws for importance-weighted Monte Carlo on ℍⁿ.
//!
//! A point is drawn as `δ_r ξ` with `ξ` from the normalized sphere law and `r`
//! from a one-dimensional law `g`. Its weight for `∫_{ℍⁿ} h dx` is
//! `ω_Q r^{Q-1} / g(r)`. Everything is kept in log space because the power
//! laws used for singular test functions reach radii far below `1e-100`.

use rand::Rng;

use crate::hgroup::GroupDims;

#[derive(Clone, Debug, PartialEq)]
pub enum RadialLaw {
    /// Density `γ r^{γ-1} / S^γ` on `[0, S]`; `γ = Q` is the uniform ball.
    Power { gamma: f64, radius: f64 },
    /// Density `κ S^κ r^{-κ-1}` on `(S, ∞)`.
    Pareto { kappa: f64, radius: f64 },
    /// `weight · first + (1 - weight) · second`.
    Mixture {
        first: Box<RadialLaw>,
        second: Box<RadialLaw>,
        weight: f64,
    },
}

fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]
    1.0 - rng.gen::<f64>()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl RadialLaw {
    pub fn uniform_ball(dims: &GroupDims, radius: f64) -> Self {
        RadialLaw::Power {
            gamma: dims.qf(),
            radius,
        }
    }

    pub fn sample_ln_r<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            RadialLaw::Power { gamma, radius } => radius.ln() + uniform_open(rng).ln() / gamma,
            RadialLaw::Pareto { kappa, radius } => radius.ln() - uniform_open(rng).ln() / kappa,
            RadialLaw::Mixture {
                first,
                second,
                weight,
            } => {
                if rng.gen::<f64>() < *weight {
                    first.sample_ln_r(rng)
                } else {
                    second.sample_ln_r(rng)
                }
            }
        }
    }

    /// `ln g(r)`; `-∞` outside the support.
    pub fn ln_density(&self, ln_r: f64) -> f64 {
        match self {
            RadialLaw::Power { gamma, radius } => {
                if ln_r > radius.ln() {
                    f64::NEG_INFINITY
                } else {
                    gamma.ln() + (gamma - 1.0) * ln_r - gamma * radius.ln()
                }
            }
            RadialLaw::Pareto { kappa, radius } => {
                if ln_r < radius.ln() {
                    f64::NEG_INFINITY
                } else {
                    kappa.ln() + kappa * radius.ln() - (kappa + 1.0) * ln_r
                }
            }
            RadialLaw::Mixture {
                first,
                second,
                weight,
            } => log_sum_exp(
                weight.ln() + first.ln_density(ln_r),
                (1.0 - weight).ln() + second.ln_density(ln_r),
            ),
        }
    }

    /// `ln(ω_Q r^{Q-1} / g(r))`.
    pub fn ln_weight(&self, dims: &GroupDims, ln_r: f64) -> f64 {
        dims.omega.ln() + (dims.qf() - 1.0) * ln_r - self.ln_density(ln_r)
    }

    /// Largest radius in the support (`∞` for laws with a Pareto part).
    pub fn outer_radius(&self) -> f64 {
        match self {
            RadialLaw::Power { radius, .. } => *radius,
            RadialLaw::Pareto { .. } => f64::INFINITY,
            RadialLaw::Mixture { first, second, .. } => first.outer_radius().max(second.outer_radius()),
        }
    }
}
