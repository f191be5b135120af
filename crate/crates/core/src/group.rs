//! Arithmetic of the Heisenberg group ℍⁿ in polarized coordinates.
//!
//! A point is `(z, t)` with `z = (x₁..xₙ, y₁..yₙ)`. The group law is
//! `(z, t)·(z', t') = (z + z', t + t' + ½ω(z, z'))` with the symplectic form
//! `ω(z, z') = Σᵢ (xᵢ y'ᵢ − yᵢ x'ᵢ)`, so the inverse is plain negation and
//! dilations `(λz, λ²t)` are automorphisms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    z: Vec<f64>,
    t: f64,
}

impl GroupPoint {
    pub fn new(z: Vec<f64>, t: f64) -> Result<Self> {
        if z.is_empty() || !z.len().is_multiple_of(2) {
            return usage(format!(
                "horizontal part must have even positive length, got {}",
                z.len()
            ));
        }
        if !t.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return usage("group point coordinates must be finite");
        }
        Ok(Self { z, t })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            z: vec![0.0; 2 * n],
            t: 0.0,
        }
    }

    /// Convenience constructor for ℍ¹.
    pub fn h1(x: f64, y: f64, t: f64) -> Self {
        Self { z: vec![x, y], t }
    }

    pub fn n(&self) -> usize {
        self.z.len() / 2
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn x(&self) -> &[f64] {
        &self.z[..self.n()]
    }

    pub fn y(&self) -> &[f64] {
        &self.z[self.n()..]
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn is_identity(&self) -> bool {
        self.t == 0.0 && self.z.iter().all(|&v| v == 0.0)
    }

    /// Squared Euclidean norm of the horizontal part.
    pub fn horizontal_norm_sq(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomogeneityParams {
    pub n: usize,
    pub q: usize,
}

impl HomogeneityParams {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return usage("group parameter n must be at least 1");
        }
        Ok(Self { n, q: 2 * n + 2 })
    }
}

/// Homogeneous dimension `Q = 2n + 2`.
pub fn homogeneous_dimension(n: usize) -> usize {
    2 * n + 2
}

pub fn symplectic(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len() / 2;
    (0..n).map(|i| p[i] * q[n + i] - p[n + i] * q[i]).sum()
}

pub fn group_mul(p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
    if p.z.len() != q.z.len() {
        return Err(Error::DimensionMismatch {
            expected: p.z.len(),
            found: q.z.len(),
        });
    }
    let z = p.z.iter().zip(&q.z).map(|(a, b)| a + b).collect();
    Ok(GroupPoint {
        z,
        t: p.t + q.t + 0.5 * symplectic(&p.z, &q.z),
    })
}

pub fn group_inv(p: &GroupPoint) -> GroupPoint {
    GroupPoint {
        z: p.z.iter().map(|v| -v).collect(),
        t: -p.t,
    }
}

pub fn dilate(lambda: f64, p: &GroupPoint) -> Result<GroupPoint> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return usage(format!("dilation factor must be positive, got {lambda}"));
    }
    Ok(GroupPoint {
        z: p.z.iter().map(|v| lambda * v).collect(),
        t: lambda * lambda * p.t,
    })
}

/// Korányi gauge `(|z|⁴ + 16t²)^{1/4}`.
pub fn gauge(p: &GroupPoint) -> f64 {
    gauge_parts(p.horizontal_norm_sq(), p.t)
}

/// Gauge from `|z|²` and `t`.
pub fn gauge_parts(z_norm_sq: f64, t: f64) -> f64 {
    (z_norm_sq * z_norm_sq + 16.0 * t * t).sqrt().sqrt()
}

/// Draws a point with standard normal coordinates.
pub fn sample_point<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> GroupPoint {
    let z = (0..2 * n).map(|_| StandardNormal.sample(rng)).collect();
    GroupPoint {
        z,
        t: StandardNormal.sample(rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiDistanceConstants {
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    /// Number of pairs that constrained `c` and `C` respectively.
    pub lower_pairs: usize,
    pub upper_pairs: usize,
    /// Set when no pair was informative and the defaults were returned.
    pub no_informative_samples: bool,
}

const CLAMP_MARGIN: f64 = 1e-9;

/// Tightest `(c, C)` with `c·||x|−|y|| ≤ |yx| ≤ C(|x|+|y|)` over the given pairs.
pub fn quasi_distance_constants_from_pairs(
    pairs: &[(GroupPoint, GroupPoint)],
) -> Result<QuasiDistanceConstants> {
    let mut c = f64::INFINITY;
    let mut big_c: f64 = 0.0;
    let mut lower_pairs = 0;
    let mut upper_pairs = 0;
    for (x, y) in pairs {
        let gx = gauge(x);
        let gy = gauge(y);
        let gyx = gauge(&group_mul(y, x)?);
        let diff = (gx - gy).abs();
        if diff > 0.0 {
            c = c.min(gyx / diff);
            lower_pairs += 1;
        }
        if gx + gy > 0.0 {
            big_c = big_c.max(gyx / (gx + gy));
            upper_pairs += 1;
        }
    }
    if lower_pairs == 0 && upper_pairs == 0 {
        return Ok(QuasiDistanceConstants {
            c: 0.5,
            big_c: 2.0,
            lower_pairs,
            upper_pairs,
            no_informative_samples: true,
        });
    }
    let c = if lower_pairs == 0 {
        0.5
    } else {
        c.min(1.0 - CLAMP_MARGIN)
    };
    let big_c = if upper_pairs == 0 {
        2.0
    } else {
        big_c.max(1.0 + CLAMP_MARGIN)
    };
    Ok(QuasiDistanceConstants {
        c,
        big_c,
        lower_pairs,
        upper_pairs,
        no_informative_samples: false,
    })
}

pub fn estimate_quasi_distance_constants(
    n: usize,
    sample_count: usize,
    seed: u64,
) -> Result<QuasiDistanceConstants> {
    if n == 0 {
        return usage("group parameter n must be at least 1");
    }
    if sample_count == 0 {
        return usage("sample_count must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = (0..sample_count)
        .map(|_| {
            let x = sample_point(&mut rng, n);
            let y = sample_point(&mut rng, n);
            (x, y)
        })
        .collect();
    quasi_distance_constants_from_pairs(&pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    pub exponent: f64,
    pub samples: usize,
    pub accepted: usize,
    pub sup_ratio: f64,
    pub sup_first_half: f64,
    pub stable: bool,
}

/// Increment ratio `|f(xy) − f(x)| / (max{|xy|^{λ−1}, |x|^{λ−1}}·|y|)` for `f = |·|^λ`.
pub fn increment_ratio(exponent: f64, x: &GroupPoint, y: &GroupPoint) -> Result<f64> {
    let gy = gauge(y);
    if gy == 0.0 {
        return Ok(0.0);
    }
    let gx = gauge(x);
    let gxy = gauge(&group_mul(x, y)?);
    let num = (gxy.powf(exponent) - gx.powf(exponent)).abs();
    let den = gxy.powf(exponent - 1.0).max(gx.powf(exponent - 1.0)) * gy;
    Ok(num / den)
}

/// Samples the increment bound for homogeneous `f = |·|^λ` on pairs with `|xy|/|x| ∈ [½, 2]`.
pub fn check_homogeneous_increment(
    n: usize,
    exponent: f64,
    sample_count: usize,
    seed: u64,
) -> Result<IncrementReport> {
    if n == 0 {
        return usage("group parameter n must be at least 1");
    }
    if !exponent.is_finite() {
        return usage("exponent must be finite");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sup: f64 = 0.0;
    let mut sup_half: f64 = 0.0;
    let mut accepted = 0;
    for i in 0..sample_count {
        let x = sample_point(&mut rng, n);
        let y = sample_point(&mut rng, n);
        let gx = gauge(&x);
        if gx == 0.0 {
            continue;
        }
        let band = gauge(&group_mul(&x, &y)?) / gx;
        if !(0.5..=2.0).contains(&band) {
            continue;
        }
        accepted += 1;
        let r = increment_ratio(exponent, &x, &y)?;
        sup = sup.max(r);
        if i < sample_count / 2 {
            sup_half = sup_half.max(r);
        }
    }
    Ok(IncrementReport {
        exponent,
        samples: sample_count,
        accepted,
        sup_ratio: sup,
        sup_first_half: sup_half,
        stable: sup.is_finite() && sup <= 2.0 * sup_half.max(f64::MIN_POSITIVE),
    })
}
