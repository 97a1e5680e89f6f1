//! Heisenberg group arithmetic, Korányi geometry and uniform sampling.
//!
//! A point of ℍⁿ is stored as its `2n + 1` real coordinates. The first `2n`
//! are horizontal, the last one is the vertical (central) coordinate.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma, ln_beta, ln_gamma};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    n: usize,
    coords: Vec<f64>,
}

impl HPoint {
    pub fn new(n: usize, coords: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("group index n must be positive"));
        }
        if coords.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * n + 1,
                found: coords.len(),
            });
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { n, coords })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            n,
            coords: vec![0.0; 2 * n + 1],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.coords[..2 * self.n]
    }

    pub fn vertical(&self) -> f64 {
        self.coords[2 * self.n]
    }

    fn check_same_group(&self, other: &HPoint) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    /// The group law `x ∘ y`.
    pub fn group_law(&self, other: &HPoint) -> Result<HPoint> {
        self.check_same_group(other)?;
        let n = self.n;
        let (x, y) = (&self.coords, &other.coords);
        let mut out = Vec::with_capacity(2 * n + 1);
        out.extend(x[..2 * n].iter().zip(&y[..2 * n]).map(|(a, b)| a + b));
        let twist: f64 = (0..n).map(|j| y[j] * x[n + j] - x[j] * y[n + j]).sum();
        out.push(x[2 * n] + y[2 * n] + 2.0 * twist);
        Ok(HPoint { n, coords: out })
    }

    pub fn inverse(&self) -> HPoint {
        HPoint {
            n: self.n,
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    /// The anisotropic dilation `δ_r`.
    pub fn dilate(&self, r: f64) -> Result<HPoint> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("dilation factor must be positive, got {r}")));
        }
        Ok(self.dilate_unchecked(r))
    }

    pub(crate) fn dilate_unchecked(&self, r: f64) -> HPoint {
        let n = self.n;
        let mut coords = self.coords.clone();
        coords[..2 * n].iter_mut().for_each(|c| *c *= r);
        coords[2 * n] *= r * r;
        HPoint { n, coords }
    }

    pub fn koranyi_norm(&self) -> f64 {
        let h: f64 = self.horizontal().iter().map(|c| c * c).sum();
        let t = self.vertical();
        (h * h + t * t).sqrt().sqrt()
    }

    /// Left-invariant distance `d(p, q) = |q⁻¹ ∘ p|_h`.
    pub fn distance(&self, other: &HPoint) -> Result<f64> {
        Ok(other.inverse().group_law(self)?.koranyi_norm())
    }

    /// Allocation-free `d(self, other)` for points already known to share `n`.
    pub(crate) fn distance_unchecked(&self, other: &HPoint) -> f64 {
        let n = self.n;
        let (p, q) = (&self.coords, &other.coords);
        let mut h = 0.0;
        let mut twist = 0.0;
        for j in 0..n {
            let (a, b) = (p[j] - q[j], p[n + j] - q[n + j]);
            h += a * a + b * b;
            twist += q[j] * p[n + j] - p[j] * q[n + j];
        }
        let t = p[2 * n] - q[2 * n] + 2.0 * twist;
        (h * h + t * t).sqrt().sqrt()
    }
}

impl fmt::Display for HPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Measure constants of one factor ℍⁿ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDims {
    pub n: usize,
    /// Homogeneous dimension `2n + 2`.
    pub q: u32,
    /// Lebesgue volume of the unit Korányi ball.
    pub volume: f64,
    /// Polar surface constant, `Q · volume`.
    pub omega: f64,
}

impl GroupDims {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("group index n must be positive"));
        }
        let q = 2 * n as u32 + 2;
        let volume = unit_ball_volume(n);
        Ok(Self {
            n,
            q,
            volume,
            omega: q as f64 * volume,
        })
    }

    pub fn qf(&self) -> f64 {
        self.q as f64
    }

    /// The closed form `2π^{n+1/2} Γ(n/2) / ((n+1) Γ(n) Γ((n+1)/2))` quoted
    /// for the unit-ball volume in the literature on ℍⁿ. It is twice the
    /// Lebesgue volume of `{|x|_h < 1}`; kept for reporting only.
    pub fn quoted_omega_constant(&self) -> f64 {
        let n = self.n as f64;
        2.0 * PI.powf(n + 0.5) * gamma(n / 2.0)
            / ((n + 1.0) * gamma(n) * gamma((n + 1.0) / 2.0))
    }

    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        Ok(self.volume * r.powi(self.q as i32))
    }
}

/// `|{(z, t) : |z|⁴ + t² < 1}|` with `z ∈ ℝ^{2n}`: the horizontal sphere area
/// `2πⁿ/Γ(n)` times `∫₀¹ ρ^{2n-1} 2√(1-ρ⁴) dρ = ½ B(n/2, 3/2)`.
fn unit_ball_volume(n: usize) -> f64 {
    let n = n as f64;
    let sphere_area = 2.0 * (n * PI.ln() - ln_gamma(n)).exp();
    sphere_area * 0.5 * ln_beta(n / 2.0, 1.5).exp()
}

/// Uniform point of the unit Korányi ball.
///
/// The radial pair `(ρ, t) = (|z|, t)` has density `∝ ρ^{2n-1}` on
/// `{ρ⁴ + t² < 1}`; it is drawn by rejection from `ρ ~ 2n ρ^{2n-1}` on `[0, 1]`
/// and `t ~ U[-1, 1]`, then `z = ρ · (uniform direction in ℝ^{2n})`.
pub fn sample_unit_ball<R: Rng + ?Sized>(dims: &GroupDims, rng: &mut R) -> HPoint {
    let n = dims.n;
    let (rho, t) = loop {
        let u: f64 = rng.gen();
        let rho = u.powf(1.0 / (2 * n) as f64);
        let t: f64 = rng.gen_range(-1.0..1.0);
        if rho.powi(4) + t * t < 1.0 {
            break (rho, t);
        }
    };
    let mut coords = Vec::with_capacity(2 * n + 1);
    let dir = loop {
        coords.clear();
        coords.extend((0..2 * n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-300 {
            break norm;
        }
    };
    coords.iter_mut().for_each(|c| *c *= rho / dir);
    coords.push(t);
    HPoint { n, coords }
}

/// Point of the unit Korányi sphere distributed by the normalized polar
/// surface measure: a uniform ball point projected by `δ_{1/|x|_h}`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(dims: &GroupDims, rng: &mut R) -> HPoint {
    loop {
        let x = sample_unit_ball(dims, rng);
        let r = x.koranyi_norm();
        if r > 1e-150 {
            return x.dilate_unchecked(1.0 / r);
        }
    }
}

/// The factor list `ℍ^{n_1} × … × ℍ^{n_m}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    factors: Vec<GroupDims>,
}

impl ProductSpec {
    pub fn new(ns: &[usize]) -> Result<Self> {
        if ns.is_empty() {
            return Err(Error::invalid("product needs at least one factor"));
        }
        let factors = ns.iter().map(|&n| GroupDims::new(n)).collect::<Result<_>>()?;
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[GroupDims] {
        &self.factors
    }

    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn ns(&self) -> Vec<usize> {
        self.factors.iter().map(|d| d.n).collect()
    }

    /// Volume of the product of balls `B(0, r_i)`.
    pub fn polyball_volume(&self, radii: &[f64]) -> Result<f64> {
        if radii.len() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: radii.len(),
            });
        }
        self.factors
            .iter()
            .zip(radii)
            .map(|(d, &r)| d.ball_volume(r))
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(n: usize, c: &[f64]) -> HPoint {
        HPoint::new(n, c.to_vec()).unwrap()
    }

    #[test]
    fn group_law_is_noncommutative() {
        let a = pt(1, &[1.0, 0.0, 0.0]);
        let b = pt(1, &[0.0, 1.0, 0.0]);
        assert_eq!(a.group_law(&b).unwrap().coords(), &[1.0, 1.0, -2.0]);
        assert_eq!(b.group_law(&a).unwrap().coords(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn identity_and_inverse() {
        let x = pt(2, &[0.3, -1.2, 2.0, 0.7, -0.4]);
        assert_eq!(x.group_law(&HPoint::origin(2)).unwrap(), x);
        let e = x.group_law(&x.inverse()).unwrap();
        assert!(e.coords().iter().all(|c| *c == 0.0));
        assert_eq!(pt(1, &[1.0, 2.0, 3.0]).inverse().coords(), &[-1.0, -2.0, -3.0]);
        assert_eq!(HPoint::origin(1).inverse(), HPoint::origin(1).inverse());
    }

    #[test]
    fn mismatched_groups_are_rejected() {
        let a = HPoint::origin(1);
        let b = HPoint::origin(2);
        assert!(matches!(a.group_law(&b), Err(Error::DimensionMismatch { .. })));
        assert!(a.distance(&b).is_err());
        assert!(HPoint::new(1, vec![0.0; 4]).is_err());
        assert!(HPoint::new(1, vec![0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn dilation_and_norm_examples() {
        let x = pt(1, &[1.0, 1.0, 1.0]);
        assert_eq!(x.dilate(2.0).unwrap().coords(), &[2.0, 2.0, 4.0]);
        assert_eq!(x.dilate(1.0).unwrap(), x);
        assert!(x.dilate(0.0).is_err());
        assert!(x.dilate(-1.0).is_err());
        assert_eq!(pt(1, &[1.0, 0.0, 0.0]).koranyi_norm(), 1.0);
        assert_eq!(pt(1, &[0.0, 0.0, 4.0]).koranyi_norm(), 2.0);
        let scaled = x.dilate(3.0).unwrap().koranyi_norm();
        assert!((scaled - 3.0 * 5f64.powf(0.25)).abs() < 1e-14);
        assert!((scaled - 405f64.powf(0.25)).abs() < 1e-14);
        assert!((scaled - 4.48605).abs() < 1e-5);
    }

    #[test]
    fn fast_distance_matches_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = GroupDims::new(2).unwrap();
        for _ in 0..1000 {
            let p = sample_unit_ball(&d, &mut rng).dilate_unchecked(3.0);
            let q = sample_unit_ball(&d, &mut rng);
            let slow = p.distance(&q).unwrap();
            assert!((slow - p.distance_unchecked(&q)).abs() <= 1e-14 * slow.max(1.0));
        }
    }

    #[test]
    fn distance_examples() {
        let p = pt(1, &[0.5, -0.25, 1.5]);
        assert_eq!(p.distance(&p).unwrap(), 0.0);
        assert_eq!(p.distance(&HPoint::origin(1)).unwrap(), p.koranyi_norm());
    }

    #[test]
    fn ball_volume_closed_forms() {
        let d1 = GroupDims::new(1).unwrap();
        let d2 = GroupDims::new(2).unwrap();
        assert_eq!(d1.q, 4);
        assert!((d1.ball_volume(1.0).unwrap() - PI * PI / 2.0).abs() < 1e-13);
        assert!((d1.ball_volume(2.0).unwrap() - 8.0 * PI * PI).abs() < 1e-12);
        assert!((d2.ball_volume(1.0).unwrap() - 2.0 * PI * PI / 3.0).abs() < 1e-13);
        assert_eq!(d1.omega, 4.0 * d1.volume);
        assert!(d1.ball_volume(0.0).is_err());
        assert!((d1.quoted_omega_constant() - PI * PI).abs() < 1e-12);
        for n in 1..6 {
            let d = GroupDims::new(n).unwrap();
            assert!((d.quoted_omega_constant() / d.volume - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn volume_matches_direct_radial_reduction() {
        // σ_{2n-1} ∫₀¹ ρ^{2n-1} 2√(1-ρ⁴) dρ by a fine midpoint rule in s = ρ⁴.
        for n in 1..=3usize {
            let steps = 400_000;
            let h = 1.0 / steps as f64;
            let nf = n as f64;
            let mut acc = 0.0;
            for k in 0..steps {
                // ρ = s^{1/4}: ρ^{2n-1} dρ = ¼ s^{n/2-1} ds; substitute s = w² to tame s^{-1/2}
                let w = (k as f64 + 0.5) * h;
                let s = w * w;
                acc += 0.25 * s.powf(nf / 2.0 - 1.0) * 2.0 * (1.0 - s).sqrt() * 2.0 * w * h;
            }
            let area = 2.0 * PI.powi(n as i32) / gamma(nf);
            let direct = area * acc;
            let d = GroupDims::new(n).unwrap();
            assert!((direct - d.volume).abs() < 1e-4 * d.volume, "n={n}: {direct} vs {}", d.volume);
        }
        assert!((GroupDims::new(3).unwrap().volume - PI.powi(4) / 16.0).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3 {
            let d = GroupDims::new(n).unwrap();
            for _ in 0..5000 {
                assert!(sample_unit_ball(&d, &mut rng).koranyi_norm() < 1.0);
                let s = sample_unit_sphere(&d, &mut rng);
                assert!((s.koranyi_norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_spec_validation() {
        assert!(ProductSpec::new(&[]).is_err());
        assert!(ProductSpec::new(&[1, 0]).is_err());
        let s = ProductSpec::new(&[1, 2]).unwrap();
        assert_eq!(s.m(), 2);
        let v = s.polyball_volume(&[1.0, 1.0]).unwrap();
        assert!((v - PI.powi(4) / 3.0).abs() < 1e-12);
    }
}
