//! Functional calculus of the discrete sub-Laplacian.
//!
//! Fractional powers and the heat semigroup act on eigencomponents. The heat
//! integral routes evaluate the Γ-weighted time integrals by quadrature in
//! `log t`, with incomplete-Γ closed forms for the pieces below `t_min` and
//! above `T_max`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{check_len, usage, Result};
use crate::lattice::SubLaplacian;

pub const DEFAULT_ZERO_MODE_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_T_MIN: f64 = 1e-6;
pub const DEFAULT_NODE_COUNT: usize = 400;
/// `T_max = TAIL_FACTOR/λ₁`.
pub const TAIL_FACTOR: f64 = 20.0;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    zero_mode_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroModePolicy {
    ProjectOut,
    KeepZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerRoute {
    Eigen,
    HeatIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalPowerSpec {
    pub s: f64,
    pub zero_mode_policy: ZeroModePolicy,
    pub route: PowerRoute,
}

impl FractionalPowerSpec {
    pub fn eigen(s: f64) -> Self {
        Self {
            s,
            zero_mode_policy: ZeroModePolicy::ProjectOut,
            route: PowerRoute::Eigen,
        }
    }
}

impl SpectralDecomposition {
    pub fn decompose(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return usage(format!(
                "matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            ));
        }
        let scale = a.amax().max(f64::MIN_POSITIVE);
        let asym = (a - a.transpose()).amax();
        if asym > 1e-12 * scale {
            return usage(format!("matrix is not symmetric (max asymmetry {asym:e})"));
        }
        let eig = SymmetricEigen::new(a.clone());
        let mut order: Vec<usize> = (0..a.nrows()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(a.nrows(), a.ncols());
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            if col.sum() < 0.0 {
                col.neg_mut();
            }
            vectors.set_column(dst, &col);
        }
        Ok(Self {
            eigenvalues,
            vectors,
            zero_mode_tolerance: DEFAULT_ZERO_MODE_TOLERANCE,
        })
    }

    pub fn from_operator(op: &SubLaplacian) -> Result<Self> {
        Self::decompose(&op.to_dense())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }

    pub fn zero_mode_tolerance(&self) -> f64 {
        self.zero_mode_tolerance
    }

    pub fn is_zero_mode(&self, i: usize) -> bool {
        self.eigenvalues[i].abs() <= self.zero_mode_tolerance
    }

    /// Smallest eigenvalue above the zero-mode tolerance.
    pub fn spectral_gap(&self) -> Option<f64> {
        self.eigenvalues
            .iter()
            .copied()
            .find(|&l| l > self.zero_mode_tolerance)
    }

    /// Eigenvalues as CSV lines `index,eigenvalue`.
    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue\n");
        for (i, l) in self.eigenvalues.iter().enumerate() {
            s.push_str(&format!("{i},{l:.17e}\n"));
        }
        s
    }

    /// Applies `Σᵢ w(λᵢ, zeroᵢ)⟨u, eᵢ⟩eᵢ`.
    pub fn apply_symbol<F: Fn(f64, bool) -> f64>(&self, u: &[f64], w: F) -> Result<Vec<f64>> {
        check_len(self.dim(), u.len())?;
        let coeffs = self.vectors.tr_mul(&DVector::from_column_slice(u));
        let scaled = DVector::from_iterator(
            self.dim(),
            coeffs.iter().enumerate().map(|(i, c)| {
                let lam = self.eigenvalues[i];
                c * w(lam.max(0.0), self.is_zero_mode(i))
            }),
        );
        Ok((&self.vectors * scaled).iter().copied().collect())
    }

    pub fn frac_power_apply(&self, s: f64, policy: ZeroModePolicy, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), u.len())?;
        if !s.is_finite() {
            return usage("exponent must be finite");
        }
        if s == 0.0 {
            return Ok(u.to_vec());
        }
        if s < 0.0 && policy == ZeroModePolicy::KeepZero {
            return usage("negative powers require the project-out zero-mode policy");
        }
        self.apply_symbol(u, |lam, zero| if zero { 0.0 } else { lam.powf(s) })
    }

    /// `L^s u` with the zero mode projected out.
    pub fn power(&self, s: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.frac_power_apply(s, ZeroModePolicy::ProjectOut, u)
    }

    pub fn heat_apply(&self, t: f64, u: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return usage(format!("heat time must be nonnegative, got {t}"));
        }
        if t == 0.0 {
            check_len(self.dim(), u.len())?;
            return Ok(u.to_vec());
        }
        self.apply_symbol(u, |lam, zero| if zero { 1.0 } else { (-t * lam).exp() })
    }

    /// Applies a power spec through the selected route.
    pub fn apply_spec(
        &self,
        spec: &FractionalPowerSpec,
        quad: &HeatQuadrature,
        u: &[f64],
    ) -> Result<Vec<f64>> {
        match spec.route {
            PowerRoute::Eigen => self.frac_power_apply(spec.s, spec.zero_mode_policy, u),
            PowerRoute::HeatIntegral if spec.s < 0.0 => {
                if spec.zero_mode_policy == ZeroModePolicy::KeepZero {
                    return usage("negative powers require the project-out zero-mode policy");
                }
                let mut v = u.to_vec();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|x| *x -= mean);
                heat_integral_negative_power(self, -2.0 * spec.s, quad, &v)
            }
            PowerRoute::HeatIntegral if spec.s == 0.0 => Ok(u.to_vec()),
            PowerRoute::HeatIntegral => {
                let k = (spec.s.floor() as usize) + 1;
                let r = heat_integral_positive_power(self, 2.0 * spec.s, k, quad, u)?;
                Ok(r.values
                    .iter()
                    .map(|v| v / r.expected_normalization)
                    .collect())
            }
        }
    }
}

/// Log-uniform quadrature for `∫_{t_min}^{T_max} f(t) dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    t_min: f64,
    t_max: f64,
}

impl HeatQuadrature {
    pub fn new(count: usize, t_min: f64, t_max: f64) -> Result<Self> {
        if count < 4 {
            return usage(format!("quadrature needs at least 4 nodes, got {count}"));
        }
        if !(t_min > 0.0 && t_max > t_min) || !t_max.is_finite() {
            return usage(format!("need 0 < t_min < T_max, got [{t_min}, {t_max}]"));
        }
        let (lo, hi) = (t_min.ln(), t_max.ln());
        let step = (hi - lo) / (count - 1) as f64;
        let nodes: Vec<f64> = (0..count).map(|i| (lo + step * i as f64).exp()).collect();
        let mut rule = vec![0.0; count];
        let simpson_points = if count % 2 == 1 { count } else { count - 3 };
        for i in 0..simpson_points - 1 {
            if i % 2 == 0 {
                rule[i] += 1.0 / 3.0;
                rule[i + 1] += 4.0 / 3.0;
                rule[i + 2] += 1.0 / 3.0;
            }
        }
        if simpson_points < count {
            let s = simpson_points - 1;
            for (off, c) in [3.0, 9.0, 9.0, 3.0].iter().enumerate() {
                rule[s + off] += c / 8.0;
            }
        }
        let weights = rule.iter().zip(&nodes).map(|(r, t)| r * step * t).collect();
        Ok(Self {
            nodes,
            weights,
            t_min,
            t_max,
        })
    }

    /// Default rule: 400 nodes on `[1e−6, 20/λ₁]`.
    pub fn for_decomposition(decomp: &SpectralDecomposition, count: usize) -> Result<Self> {
        let gap = decomp.spectral_gap().ok_or_else(|| {
            crate::error::Error::Usage("operator has no positive eigenvalue".into())
        })?;
        Self::new(count, DEFAULT_T_MIN, TAIL_FACTOR / gap)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Quadrature of `∫₀^∞ t^{e−1} e^{−λt} dt` including head and tail corrections.
    pub fn moment(&self, e: f64, lam: f64) -> f64 {
        let body: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * t.powf(e - 1.0) * (-t * lam).exp())
            .sum();
        let scale = gamma(e) * lam.powf(-e);
        let head = scale * gamma_lr(e, lam * self.t_min);
        let tail = scale * gamma_ur(e, lam * self.t_max);
        body + head + tail
    }
}

fn check_alpha(alpha: f64, lo: f64, hi: f64) -> Result<()> {
    if !(alpha > lo && alpha < hi) {
        return usage(format!("alpha = {alpha} outside ({lo}, {hi})"));
    }
    Ok(())
}

/// `L^{−α/2}u` through `(1/Γ(α/2))∫₀^∞ t^{α/2−1} e^{−tL}u dt`.
pub fn heat_integral_negative_power(
    decomp: &SpectralDecomposition,
    alpha: f64,
    quad: &HeatQuadrature,
    u: &[f64],
) -> Result<Vec<f64>> {
    check_len(decomp.dim(), u.len())?;
    check_alpha(alpha, 0.0, f64::INFINITY)?;
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mean.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return usage("negative powers need a mean-zero argument (the zero mode diverges)");
    }
    let s = alpha / 2.0;
    let norm = gamma(s);
    decomp.apply_symbol(u, |lam, zero| {
        if zero {
            0.0
        } else {
            quad.moment(s, lam) / norm
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivePowerResult {
    pub values: Vec<f64>,
    /// Least-squares ratio of `values` to the eigen route `L^{α/2}u`.
    pub measured_normalization: f64,
    /// `Γ(k − α/2)/Γ(α/2)`.
    pub expected_normalization: f64,
}

/// `(1/Γ(α/2))∫₀^∞ t^{k−α/2−1} L^k e^{−tL}u dt`, which equals `Γ(k−α/2)/Γ(α/2)·L^{α/2}u`.
pub fn heat_integral_positive_power(
    decomp: &SpectralDecomposition,
    alpha: f64,
    k: usize,
    quad: &HeatQuadrature,
    u: &[f64],
) -> Result<PositivePowerResult> {
    check_len(decomp.dim(), u.len())?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return usage(format!("alpha must be positive, got {alpha}"));
    }
    let s = alpha / 2.0;
    if (k as f64) <= s {
        return usage(format!("generator power k = {k} must exceed alpha/2 = {s}"));
    }
    let e = k as f64 - s;
    let norm = gamma(s);
    let values = decomp.apply_symbol(u, |lam, zero| {
        if zero {
            0.0
        } else {
            lam.powi(k as i32) * quad.moment(e, lam) / norm
        }
    })?;
    let reference = decomp.power(s, u)?;
    let den: f64 = reference.iter().map(|r| r * r).sum();
    let measured = if den > 0.0 {
        values
            .iter()
            .zip(&reference)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / den
    } else {
        f64::NAN
    };
    Ok(PositivePowerResult {
        values,
        measured_normalization: measured,
        expected_normalization: gamma(e) / norm,
    })
}
