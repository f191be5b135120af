//! Fractional Leibniz commutators and the right-hand sides of their pointwise
//! bounds.
//!
//! `H_α(u, v) = L^{α/2}(uv) − u L^{α/2}v − v L^{α/2}u` and
//! `T_{τ,β,δ}(u, v) = L^{−τ/2}u · L^{(β+δ)/2}v − L^{β/2}(L^{−τ/2}u · L^{δ/2}v)`.
//! The bounding sums are built from positivity-preserving Riesz potentials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::LatticeContext;
use crate::error::{usage, Result};
use crate::kernels::SingularOperator;
use crate::lattice::{centered_gradient, Lattice, SubLaplacian};

/// Defects below this are treated as exactly zero.
const DEFECT_SNAP: f64 = 1e-12;
pub const MAX_TERMS: usize = 25;

fn mul(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).map(|(a, b)| a * b).collect()
}

fn abs(u: &[f64]) -> Vec<f64> {
    u.iter().map(|v| v.abs()).collect()
}

fn check_mean_zero(u: &[f64]) -> Result<()> {
    let mean = u.iter().sum::<f64>() / u.len().max(1) as f64;
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mean.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return usage("argument of a negative power must be mean-zero");
    }
    Ok(())
}

/// `H_α(u, v)` through the spectral calculus.
pub fn h_alpha_operator(
    ctx: &LatticeContext,
    u: &[f64],
    v: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    let q = ctx.lattice().homogeneous_dimension() as f64;
    if !(alpha > 0.0 && alpha < q) {
        return usage(format!("alpha must lie in (0, {q}), got {alpha}"));
    }
    let lat = ctx.lattice();
    lat.check(u)?;
    lat.check(v)?;
    let s = alpha / 2.0;
    let luv = ctx.power(s, &mul(u, v))?;
    let lu = ctx.power(s, u)?;
    let lv = ctx.power(s, v)?;
    Ok((0..u.len())
        .map(|i| luv[i] - (u[i] * lv[i] + v[i] * lu[i]))
        .collect())
}

/// `H_α(u, v)` as the bilinear singular sum with normalization `constant`.
pub fn h_alpha_bilinear(
    lat: &Lattice,
    op: &SingularOperator,
    u: &[f64],
    v: &[f64],
    constant: f64,
) -> Result<Vec<f64>> {
    if !(op.alpha() > 0.0 && op.alpha() < 2.0) {
        return usage(format!("alpha must lie in (0, 2), got {}", op.alpha()));
    }
    op.bilinear(lat, u, v, constant)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateTerm {
    pub s1: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateInstance {
    pub alpha: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
    pub terms: Vec<EstimateTerm>,
}

fn check_hypotheses(alpha: f64, tau1: f64, tau2: f64, epsilon: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return usage(format!("alpha > 0 violated (alpha = {alpha})"));
    }
    if !(epsilon > 0.0) {
        return usage(format!("epsilon > 0 violated (epsilon = {epsilon})"));
    }
    let lo = (alpha - 1.0).max(0.0);
    for (name, tau) in [("tau1", tau1), ("tau2", tau2)] {
        if !(tau > lo) {
            return usage(format!(
                "{name} > max(0, alpha - 1) violated ({name} = {tau}, alpha = {alpha})"
            ));
        }
        if tau > alpha {
            return usage(format!(
                "{name} <= alpha violated ({name} = {tau}, alpha = {alpha})"
            ));
        }
    }
    if !(tau1 + tau2 > alpha) {
        return usage(format!(
            "tau1 + tau2 > alpha violated ({tau1} + {tau2} <= {alpha})"
        ));
    }
    Ok(())
}

impl EstimateInstance {
    /// Outer Riesz order `τ₁ + τ₂ − s₁ − s₂ − α` of a term, snapped to 0 near 0.
    pub fn defect(&self, term: &EstimateTerm) -> f64 {
        let d = self.tau1 + self.tau2 - term.s1 - term.s2 - self.alpha;
        if d.abs() < DEFECT_SNAP {
            0.0
        } else {
            d
        }
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        check_hypotheses(self.alpha, self.tau1, self.tau2, self.epsilon)?;
        if self.terms.is_empty() || self.terms.len() > MAX_TERMS {
            return usage(format!(
                "instance needs 1..={MAX_TERMS} terms, got {}",
                self.terms.len()
            ));
        }
        for (j, t) in self.terms.iter().enumerate() {
            if !(t.s1 > 0.0 && t.s1 < self.tau1) {
                return usage(format!(
                    "term {j}: s1 in (0, tau1) violated (s1 = {})",
                    t.s1
                ));
            }
            if !(t.s2 > 0.0 && t.s2 < self.tau2) {
                return usage(format!(
                    "term {j}: s2 in (0, tau2) violated (s2 = {})",
                    t.s2
                ));
            }
            let d = self.defect(t);
            if !(d >= 0.0 && d < self.epsilon) {
                return usage(format!(
                    "term {j}: defect in [0, epsilon) violated (defect = {d})"
                ));
            }
            if d >= q as f64 {
                return usage(format!("term {j}: Riesz order {d} outside [0, Q)"));
            }
        }
        Ok(())
    }
}

fn stratified(rng: &mut ChaCha8Rng, lo: f64, hi: f64, grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|i| {
            let jitter = 0.3 + 0.4 * rng.random::<f64>();
            lo + (i as f64 + jitter) / grid as f64 * (hi - lo)
        })
        .collect()
}

/// Admissible `(s₁, s₂)` families drawn on stratified `grid`-point δ grids.
///
/// Three families: `(τ₁ − δ₁, τ₂ + δ₁ − α)`, `(τ₁ + δ₂ − α, τ₂ − δ₂)` with zero
/// defect, and `(τ₁ − δ₁, τ₂ − δ₂)` with `δ₁ + δ₂ − α = d ∈ (0, ε)`.
pub fn generate_instance(
    alpha: f64,
    tau1: f64,
    tau2: f64,
    epsilon: f64,
    grid: usize,
    seed: u64,
) -> Result<EstimateInstance> {
    check_hypotheses(alpha, tau1, tau2, epsilon)?;
    if grid == 0 {
        return usage("grid must have at least one point");
    }
    let cap = if alpha < 2.0 { 1.0 } else { f64::INFINITY };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    let (lo, hi) = ((alpha - tau2).max(0.0), tau1.min(alpha).min(cap));
    if lo < hi {
        for d1 in stratified(&mut rng, lo, hi, grid) {
            terms.push(EstimateTerm {
                s1: tau1 - d1,
                s2: tau2 + d1 - alpha,
            });
        }
    }
    let (lo, hi) = ((alpha - tau1).max(0.0), tau2.min(alpha).min(cap));
    if lo < hi {
        for d2 in stratified(&mut rng, lo, hi, grid) {
            terms.push(EstimateTerm {
                s1: tau1 + d2 - alpha,
                s2: tau2 - d2,
            });
        }
    }
    let d = epsilon * (0.3 + 0.4 * rng.random::<f64>());
    let (lo, hi) = (
        (alpha + d - tau2.min(cap)).max(0.0),
        tau1.min(cap).min(alpha + d),
    );
    if lo < hi {
        for d1 in stratified(&mut rng, lo, hi, grid) {
            let d2 = alpha + d - d1;
            terms.push(EstimateTerm {
                s1: tau1 - d1,
                s2: tau2 - d2,
            });
        }
    }
    terms.truncate(MAX_TERMS);
    let inst = EstimateInstance {
        alpha,
        tau1,
        tau2,
        epsilon,
        terms,
    };
    if inst.terms.is_empty() {
        return usage("no admissible delta pairs for these parameters");
    }
    inst.validate(usize::MAX)?;
    Ok(inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTerm {
    pub s1: f64,
    pub s2: f64,
    pub s1_tilde: f64,
    pub s2_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TInstance {
    pub tau: f64,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub terms: Vec<TTerm>,
}

fn check_t_hypotheses(tau: f64, beta: f64, delta: f64, epsilon: f64) -> Result<()> {
    if !(tau > 0.0) {
        return usage(format!("tau > 0 violated (tau = {tau})"));
    }
    if !(beta >= 0.0 && delta >= 0.0) {
        return usage(format!(
            "beta, delta >= 0 violated (beta = {beta}, delta = {delta})"
        ));
    }
    if !(beta + delta < tau.min(1.0)) {
        return usage(format!(
            "beta+delta < min(tau,1) violated ({beta} + {delta} >= min({tau}, 1))"
        ));
    }
    if !(epsilon > 0.0) {
        return usage(format!("epsilon > 0 violated (epsilon = {epsilon})"));
    }
    Ok(())
}

impl TInstance {
    pub fn order(&self) -> f64 {
        self.tau - self.beta - self.delta
    }

    pub fn validate(&self) -> Result<()> {
        check_t_hypotheses(self.tau, self.beta, self.delta, self.epsilon)?;
        if self.terms.len() > MAX_TERMS {
            return usage(format!("at most {MAX_TERMS} terms allowed"));
        }
        let sigma = self.order();
        for (j, t) in self.terms.iter().enumerate() {
            if (t.s1 + t.s2 - sigma).abs() > 1e-12
                || (t.s1_tilde + t.s2_tilde - sigma).abs() > 1e-12
            {
                return usage(format!(
                    "term {j}: orders must sum to tau - beta - delta = {sigma}"
                ));
            }
            if !(t.s1 > 0.0 && t.s1_tilde > 0.0) {
                return usage(format!("term {j}: first orders must be positive"));
            }
            if !(t.s1_tilde < self.epsilon) {
                return usage(format!("term {j}: s1_tilde < epsilon violated"));
            }
            if !(t.s2 > 0.0 && t.s2 < self.tau && t.s2_tilde > 0.0 && t.s2_tilde < self.tau) {
                return usage(format!("term {j}: s2, s2_tilde in (0, tau) violated"));
            }
        }
        Ok(())
    }
}

/// Stratified admissible orders for the `T` bound.
pub fn generate_t_instance(
    tau: f64,
    beta: f64,
    delta: f64,
    epsilon: f64,
    grid: usize,
    seed: u64,
) -> Result<TInstance> {
    check_t_hypotheses(tau, beta, delta, epsilon)?;
    if grid == 0 || grid > MAX_TERMS {
        return usage(format!("grid must have 1..={MAX_TERMS} points"));
    }
    let sigma = tau - beta - delta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = stratified(&mut rng, 0.0, sigma, grid);
    let tilde = stratified(&mut rng, 0.0, sigma.min(epsilon), grid);
    let terms = first
        .iter()
        .zip(&tilde)
        .map(|(&s1, &st1)| TTerm {
            s1,
            s2: sigma - s1,
            s1_tilde: st1,
            s2_tilde: sigma - st1,
        })
        .collect();
    let inst = TInstance {
        tau,
        beta,
        delta,
        epsilon,
        terms,
    };
    inst.validate()?;
    Ok(inst)
}

/// `T_{τ,β,δ}(u, v)` with all powers spectral.
pub fn t_commutator(
    ctx: &LatticeContext,
    u: &[f64],
    v: &[f64],
    inst: &TInstance,
) -> Result<Vec<f64>> {
    inst.validate()?;
    ctx.lattice().check(u)?;
    ctx.lattice().check(v)?;
    check_mean_zero(u)?;
    let w = ctx.power(-inst.tau / 2.0, u)?;
    let first = mul(&w, &ctx.power((inst.beta + inst.delta) / 2.0, v)?);
    let inner = mul(&w, &ctx.power(inst.delta / 2.0, v)?);
    let second = ctx.power(inst.beta / 2.0, &inner)?;
    Ok(first.iter().zip(&second).map(|(a, b)| a - b).collect())
}

/// `Σⱼ R_{dⱼ}(R_{s_{j,1}}|a| · R_{s_{j,2}}|b|)`.
pub fn rhs_commutator_bound(
    ctx: &LatticeContext,
    a: &[f64],
    b: &[f64],
    inst: &EstimateInstance,
) -> Result<Vec<f64>> {
    inst.validate(ctx.lattice().homogeneous_dimension())?;
    ctx.lattice().check(a)?;
    ctx.lattice().check(b)?;
    let (a, b) = (abs(a), abs(b));
    let mut out = vec![0.0; a.len()];
    for term in &inst.terms {
        let prod = mul(&ctx.riesz(term.s1, &a)?, &ctx.riesz(term.s2, &b)?);
        let outer = ctx.riesz(inst.defect(term), &prod)?;
        out.iter_mut().zip(&outer).for_each(|(o, v)| *o += v);
    }
    Ok(out)
}

/// Inner order of the second summand of the `T` bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerOrder {
    /// `R_{s̃₁}(|v| R_{s̃₂}|u|)`.
    #[default]
    Paired,
    /// `R_{s̃₁}(|v| R_{s̃₁}|u|)`.
    Repeated,
}

/// `Σⱼ [R_{s_{j,1}}|u| · R_{s_{j,2}}|v| + R_{s̃_{j,1}}(|v| · R_{s̃_{j,2}}|u|)]`.
pub fn rhs_riesz_commutator_bound(
    ctx: &LatticeContext,
    u: &[f64],
    v: &[f64],
    inst: &TInstance,
    inner: InnerOrder,
) -> Result<Vec<f64>> {
    inst.validate()?;
    ctx.lattice().check(u)?;
    ctx.lattice().check(v)?;
    let (u, v) = (abs(u), abs(v));
    let mut out = vec![0.0; u.len()];
    for t in &inst.terms {
        let first = mul(&ctx.riesz(t.s1, &u)?, &ctx.riesz(t.s2, &v)?);
        let inner_order = match inner {
            InnerOrder::Paired => t.s2_tilde,
            InnerOrder::Repeated => t.s1_tilde,
        };
        let second = ctx.riesz(t.s1_tilde, &mul(&v, &ctx.riesz(inner_order, &u)?))?;
        for i in 0..out.len() {
            out[i] += first[i] + second[i];
        }
    }
    Ok(out)
}

/// `L(uv) − uLv − vLu + 2Σᵢ Xᵢu·Xᵢv` with centered horizontal differences.
pub fn integer_leibniz_defect(
    lat: &Lattice,
    op: &SubLaplacian,
    u: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    lat.check(u)?;
    lat.check(v)?;
    let luv = op.apply(&mul(u, v));
    let lu = op.apply(u);
    let lv = op.apply(v);
    let gu = centered_gradient(lat, u)?;
    let gv = centered_gradient(lat, v)?;
    Ok((0..u.len())
        .map(|i| {
            let grad: f64 = gu.iter().zip(&gv).map(|(a, b)| a[i] * b[i]).sum();
            luv[i] - u[i] * lv[i] - v[i] * lu[i] + 2.0 * grad
        })
        .collect())
}
