//! Spectral multipliers of the two fractional operators on ℍⁿ and the
//! geometric fractional operator on the lattice.
//!
//! `A(k, λ, α) = ((2k + n)|λ|)^{α/2}` and
//! `Ã(k, λ, α) = (2|λ|)^{α/2} Γ((2k+n)/2 + (2+α)/4) / Γ((2k+n)/2 + (2−α)/4)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{usage, Error, Result};
use crate::kernels::{calibrate_singular_constant, Calibration, SingularOperator};
use crate::lattice::Lattice;
use crate::spectral::SpectralDecomposition;

/// Arguments above this use the log-Γ difference.
const DIRECT_GAMMA_LIMIT: f64 = 160.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierPoint {
    pub k: u64,
    pub lambda: f64,
    pub alpha: f64,
    pub n: usize,
}

impl MultiplierPoint {
    pub fn new(k: u64, lambda: f64, alpha: f64, n: usize) -> Result<Self> {
        let p = Self {
            k,
            lambda,
            alpha,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return usage("group parameter n must be at least 1");
        }
        if self.lambda == 0.0 || !self.lambda.is_finite() {
            return usage("central frequency lambda must be nonzero and finite");
        }
        let q = (2 * self.n + 2) as f64;
        if !(self.alpha > 0.0 && self.alpha < q) {
            return usage(format!("alpha must lie in (0, {q}), got {}", self.alpha));
        }
        Ok(())
    }

    fn level(&self) -> f64 {
        (2 * self.k) as f64 + self.n as f64
    }
}

/// `Γ(z + a)/Γ(z + b)` for positive arguments.
pub fn gamma_ratio(z: f64, a: f64, b: f64) -> Result<f64> {
    let (x, y) = (z + a, z + b);
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Internal(format!(
            "gamma arguments must be positive, got {x} and {y}"
        )));
    }
    if x < DIRECT_GAMMA_LIMIT && y < DIRECT_GAMMA_LIMIT {
        Ok(gamma(x) / gamma(y))
    } else {
        Ok((ln_gamma(x) - ln_gamma(y)).exp())
    }
}

pub fn multiplier_a(pt: &MultiplierPoint) -> Result<f64> {
    pt.validate()?;
    Ok((pt.level() * pt.lambda.abs()).powf(pt.alpha / 2.0))
}

pub fn multiplier_a_tilde(pt: &MultiplierPoint) -> Result<f64> {
    pt.validate()?;
    let z = pt.level() / 2.0;
    let ratio = gamma_ratio(z, (2.0 + pt.alpha) / 4.0, (2.0 - pt.alpha) / 4.0)?;
    Ok((2.0 * pt.lambda.abs()).powf(pt.alpha / 2.0) * ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRow {
    pub k: u64,
    pub lambda: f64,
    pub alpha: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "A_tilde")]
    pub a_tilde: f64,
    pub ratio: f64,
}

/// Rows for `k = 0..=kmax` and each `λ`.
pub fn multiplier_table(
    n: usize,
    alpha: f64,
    kmax: u64,
    lambdas: &[f64],
) -> Result<Vec<MultiplierRow>> {
    let mut rows = Vec::new();
    for &lambda in lambdas {
        for k in 0..=kmax {
            let pt = MultiplierPoint::new(k, lambda, alpha, n)?;
            let a = multiplier_a(&pt)?;
            let a_tilde = multiplier_a_tilde(&pt)?;
            rows.push(MultiplierRow {
                k,
                lambda,
                alpha,
                a,
                a_tilde,
                ratio: a_tilde / a,
            });
        }
    }
    Ok(rows)
}

pub fn multiplier_csv(rows: &[MultiplierRow]) -> String {
    let mut s = String::from("k,lambda,alpha,A,A_tilde,ratio\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.17e},{:.17e},{:.17e}\n",
            r.k, r.lambda, r.alpha, r.a, r.a_tilde, r.ratio
        ));
    }
    s
}

/// Calibrated PV operator with the geometric kernel `|y⁻¹x|^{−Q−α}`.
#[derive(Debug, Clone)]
pub struct GeometricOperator {
    singular: SingularOperator,
    calibration: Calibration,
}

impl GeometricOperator {
    /// Fits the constant against `L^{α/2}` on `corpus`.
    pub fn calibrated(
        lat: &Lattice,
        decomp: &SpectralDecomposition,
        alpha: f64,
        corpus: &[Vec<f64>],
    ) -> Result<Self> {
        let singular = SingularOperator::new(lat, alpha)?;
        let calibration = calibrate_singular_constant(lat, &singular, decomp, corpus)?;
        Ok(Self {
            singular,
            calibration,
        })
    }

    pub fn with_constant(singular: SingularOperator, constant: f64) -> Self {
        Self {
            singular,
            calibration: Calibration {
                constant,
                residual: f64::NAN,
                max_residual: f64::NAN,
            },
        }
    }

    pub fn alpha(&self) -> f64 {
        self.singular.alpha()
    }

    pub fn constant(&self) -> f64 {
        self.calibration.constant
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    pub fn singular(&self) -> &SingularOperator {
        &self.singular
    }

    pub fn apply(&self, lat: &Lattice, u: &[f64]) -> Result<Vec<f64>> {
        geometric_frac_apply(lat, &self.singular, u, self.constant())
    }

    /// `ML_α(uv) − u·ML_α v − v·ML_α u` by three operator applications.
    pub fn h_alpha(&self, lat: &Lattice, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        lat.check(u)?;
        lat.check(v)?;
        let uv: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
        let luv = self.apply(lat, &uv)?;
        let lu = self.apply(lat, u)?;
        let lv = self.apply(lat, v)?;
        Ok((0..u.len())
            .map(|i| luv[i] - u[i] * lv[i] - v[i] * lu[i])
            .collect())
    }

    /// The same commutator as one bilinear kernel sum.
    pub fn h_alpha_bilinear(&self, lat: &Lattice, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.singular.bilinear(lat, u, v, self.constant())
    }
}

pub fn geometric_frac_apply(
    lat: &Lattice,
    op: &SingularOperator,
    u: &[f64],
    constant: f64,
) -> Result<Vec<f64>> {
    if !(op.alpha() > 0.0 && op.alpha() < 2.0) {
        return usage(format!("alpha must lie in (0, 2), got {}", op.alpha()));
    }
    op.apply(lat, u, constant)
}
