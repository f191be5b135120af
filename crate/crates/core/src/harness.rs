//! Corpora, norms and the estimate studies.
//!
//! A pointwise bound `|LHS| ≲ RHS` is tested as boundedness of
//! `sup_x |LHS(x)|/RHS(x)` over a corpus: the supremum must be finite,
//! invariant under scaling the inputs, and stable within a factor of two as
//! the lattice is refined.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commutators::{
    generate_instance, generate_t_instance, h_alpha_bilinear, h_alpha_operator,
    integer_leibniz_defect, rhs_commutator_bound, rhs_riesz_commutator_bound, t_commutator,
    EstimateInstance, InnerOrder, TInstance,
};
use crate::context::LatticeContext;
use crate::error::{usage, Error, Result};
use crate::kernels::{
    calibrate_singular_constant, group_convolve, wrapped_gauge, SingularOperator,
};
use crate::lattice::{Lattice, SubLaplacian};
use crate::multipliers::{multiplier_a, multiplier_a_tilde, GeometricOperator, MultiplierPoint};
use crate::spectral::heat_integral_negative_power;

pub const INCONCLUSIVE_FLAG: &str = "inconclusive: RHS floor exclusions exceed 1%";
/// Nodes with `RHS < RHS_FLOOR·max RHS` are excluded from ratio suprema.
pub const RHS_FLOOR: f64 = 1e-12;
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;
pub const STABILITY_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKind {
    HeatSmoothedNoise,
    GaugeBump,
    EigenMix,
}

impl FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat-smoothed-noise" => Ok(Self::HeatSmoothedNoise),
            "gauge-bump" => Ok(Self::GaugeBump),
            "eigen-mix" => Ok(Self::EigenMix),
            other => usage(format!("unknown corpus kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusDescriptor {
    pub kind: CorpusKind,
    pub count: usize,
    pub seed: u64,
    pub t0: f64,
}

impl Default for CorpusDescriptor {
    fn default() -> Self {
        Self {
            kind: CorpusKind::HeatSmoothedNoise,
            count: 100,
            seed: 42,
            t0: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub descriptor: CorpusDescriptor,
    pub functions: Vec<Vec<f64>>,
}

impl Corpus {
    /// Consecutive elements `(2i, 2i + 1)`.
    pub fn pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.functions
            .chunks_exact(2)
            .map(|c| (c[0].clone(), c[1].clone()))
            .collect()
    }
}

/// Number of low eigenmodes mixed by the eigen-mix corpus.
const EIGEN_MIX_MODES: usize = 20;

/// Seeded mean-zero corpus on the context's lattice.
pub fn generate_corpus(ctx: &LatticeContext, desc: &CorpusDescriptor) -> Result<Corpus> {
    let lat = ctx.lattice();
    let nodes = lat.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(desc.seed);
    let mut functions = Vec::with_capacity(desc.count);
    if desc.kind == CorpusKind::HeatSmoothedNoise && !(desc.t0 > 0.0) {
        return usage(format!("heat-smoothed noise needs t0 > 0, got {}", desc.t0));
    }
    for _ in 0..desc.count {
        let mut u = match desc.kind {
            CorpusKind::HeatSmoothedNoise => {
                let xi: Vec<f64> = (0..nodes)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                ctx.decomposition().heat_apply(desc.t0, &xi)?
            }
            CorpusKind::GaugeBump => {
                let center = rng.random_range(0..nodes);
                let width = 2.0 * lat.h() * (1.0 + rng.random::<f64>());
                let amp: f64 = StandardNormal.sample(&mut rng);
                (0..nodes)
                    .map(|x| {
                        let g = wrapped_gauge(lat, lat.left_quotient(center, x)) / width;
                        amp * (-g * g).exp()
                    })
                    .collect()
            }
            CorpusKind::EigenMix => {
                let d = ctx.decomposition();
                let mut u = vec![0.0; nodes];
                for i in 1..=EIGEN_MIX_MODES.min(nodes - 1) {
                    let c: f64 = StandardNormal.sample(&mut rng);
                    let w = c * (-desc.t0.max(0.0) * d.eigenvalues()[i]).exp();
                    for (x, e) in u.iter_mut().zip(d.eigenvectors().column(i).iter()) {
                        *x += w * e;
                    }
                }
                u
            }
        };
        lat.remove_mean(&mut u);
        functions.push(u);
    }
    Ok(Corpus {
        descriptor: *desc,
        functions,
    })
}

/// `(Σ|u|ᵖ·vol)^{1/p}`, or the max norm for `p = ∞`.
pub fn lp_norm(lat: &Lattice, u: &[f64], p: f64) -> Result<f64> {
    lat.check(u)?;
    if p == f64::INFINITY {
        return Ok(u.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    }
    if !(p >= 1.0) {
        return usage(format!("Lp norm needs p >= 1, got {p}"));
    }
    let s: f64 = u.iter().map(|v| v.abs().powf(p)).sum::<f64>() * lat.cell_volume();
    Ok(s.powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub lhs_max: f64,
    pub rhs_min_positive: f64,
    pub ratio_sup: f64,
    pub excluded_nodes: usize,
}

/// `sup_x |lhs(x)|/rhs(x)` over nodes above the RHS floor.
pub fn pointwise_ratio(lhs: &[f64], rhs: &[f64]) -> PairRatio {
    let lhs_max = lhs.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let rhs_max = rhs.iter().fold(0.0, |m: f64, &v| m.max(v));
    let floor = RHS_FLOOR * rhs_max;
    let mut ratio_sup: f64 = 0.0;
    let mut rhs_min = f64::INFINITY;
    let mut excluded = 0;
    for (l, &r) in lhs.iter().zip(rhs) {
        if rhs_max > 0.0 && r >= floor {
            ratio_sup = ratio_sup.max(l.abs() / r);
            if r > 0.0 {
                rhs_min = rhs_min.min(r);
            }
        } else {
            excluded += 1;
            if l.abs() > 0.0 && rhs_max == 0.0 {
                ratio_sup = f64::INFINITY;
            }
        }
    }
    if rhs_max == 0.0 && lhs_max == 0.0 {
        excluded = 0;
    }
    PairRatio {
        lhs_max,
        rhs_min_positive: rhs_min,
        ratio_sup,
        excluded_nodes: excluded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub label: String,
    pub m: usize,
    pub pairs: Vec<PairRatio>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub excluded_fraction: f64,
    pub inconclusive: bool,
    pub flag: Option<String>,
}

impl RatioReport {
    pub fn from_pairs(label: &str, lat: &Lattice, pairs: Vec<PairRatio>) -> Self {
        let mut sorted: Vec<f64> = pairs.iter().map(|p| p.ratio_sup).collect();
        sorted.sort_by(f64::total_cmp);
        let max_ratio = sorted.last().copied().unwrap_or(0.0);
        let median_ratio = if sorted.is_empty() {
            0.0
        } else if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        let total = (pairs.len() * lat.node_count()).max(1);
        let excluded: usize = pairs.iter().map(|p| p.excluded_nodes).sum();
        let excluded_fraction = excluded as f64 / total as f64;
        let inconclusive = excluded_fraction > MAX_EXCLUDED_FRACTION;
        Self {
            label: label.to_string(),
            m: lat.m(),
            pairs,
            max_ratio,
            median_ratio,
            excluded_fraction,
            inconclusive,
            flag: inconclusive.then(|| INCONCLUSIVE_FLAG.to_string()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.pairs.iter().all(|p| p.ratio_sup.is_finite())
    }

    /// CSV with one row per pair.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,pair,lhs_max,rhs_min_positive,ratio_sup,excluded_nodes\n");
        for (i, p) in self.pairs.iter().enumerate() {
            s.push_str(&format!(
                "{},{i},{:.17e},{:.17e},{:.17e},{}\n",
                self.m, p.lhs_max, p.rhs_min_positive, p.ratio_sup, p.excluded_nodes
            ));
        }
        s
    }
}

/// Operator used on the left-hand side of the first bound.
#[derive(Debug, Clone, Copy)]
pub enum OperatorRoute<'a> {
    /// `H_α` through `L^{α/2}`, with `a = L^{τ₁/2}u`, `b = L^{τ₂/2}v`.
    Spectral,
    /// `H^{ML}_α` with the calibrated geometric operators of orders α, τ₁, τ₂.
    Geometric {
        alpha: &'a GeometricOperator,
        tau1: &'a GeometricOperator,
        tau2: &'a GeometricOperator,
    },
}

/// Ratio study for `|H_α(u, v)| ≲ Σⱼ R_{dⱼ}(R_{s₁}|a| R_{s₂}|b|)`.
///
/// `derivative_shift` raises the derivative orders feeding `a` and `b` by a
/// fixed amount without touching the kernel orders (negative control).
pub fn ratio_study_thm11(
    ctx: &LatticeContext,
    pairs: &[(Vec<f64>, Vec<f64>)],
    inst: &EstimateInstance,
    route: OperatorRoute<'_>,
    derivative_shift: f64,
) -> Result<RatioReport> {
    let lat = ctx.lattice();
    inst.validate(lat.homogeneous_dimension())?;
    if let OperatorRoute::Geometric { alpha, tau1, tau2 } = route {
        if derivative_shift != 0.0 {
            return usage("derivative shifts apply to the spectral route only");
        }
        for (op, want, name) in [
            (alpha, inst.alpha, "alpha"),
            (tau1, inst.tau1, "tau1"),
            (tau2, inst.tau2, "tau2"),
        ] {
            if op.alpha() != want {
                return usage(format!(
                    "geometric operator order {} does not match {name} = {want}",
                    op.alpha()
                ));
            }
        }
    }
    let results: Vec<PairRatio> = pairs
        .par_iter()
        .map(|(u, v)| {
            let (lhs, a, b) = match route {
                OperatorRoute::Spectral => (
                    h_alpha_operator(ctx, u, v, inst.alpha)?,
                    ctx.power((inst.tau1 + derivative_shift) / 2.0, u)?,
                    ctx.power((inst.tau2 + derivative_shift) / 2.0, v)?,
                ),
                OperatorRoute::Geometric { alpha, tau1, tau2 } => (
                    alpha.h_alpha(lat, u, v)?,
                    tau1.apply(lat, u)?,
                    tau2.apply(lat, v)?,
                ),
            };
            let rhs = rhs_commutator_bound(ctx, &a, &b, inst)?;
            Ok(pointwise_ratio(&lhs, &rhs))
        })
        .collect::<Result<_>>()?;
    Ok(RatioReport::from_pairs("thm11", lat, results))
}

/// Ratio study for `|T_{τ,β,δ}(u, v)| ≲ Σⱼ [...]`.
pub fn ratio_study_thm12(
    ctx: &LatticeContext,
    pairs: &[(Vec<f64>, Vec<f64>)],
    inst: &TInstance,
    inner: InnerOrder,
) -> Result<RatioReport> {
    inst.validate()?;
    let results: Vec<PairRatio> = pairs
        .par_iter()
        .map(|(u, v)| {
            let lhs = t_commutator(ctx, u, v, inst)?;
            let rhs = rhs_riesz_commutator_bound(ctx, u, v, inst, inner)?;
            Ok(pointwise_ratio(&lhs, &rhs))
        })
        .collect::<Result<_>>()?;
    Ok(RatioReport::from_pairs("thm12", ctx.lattice(), results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_m: Vec<(usize, f64)>,
    /// `max/min` of the per-level maxima.
    pub spread: f64,
    pub pass: bool,
    pub degenerate: bool,
}

/// Evaluates `max_ratio(M)` on every level and checks `max/min ≤ 2`.
pub fn refinement_stability<F>(m_list: &[usize], max_ratio: F) -> Result<StabilityReport>
where
    F: Fn(usize) -> Result<f64>,
{
    if m_list.len() < 2 {
        return usage("refinement stability needs at least two lattice sizes");
    }
    let per_m: Vec<(usize, f64)> = m_list
        .iter()
        .map(|&m| Ok((m, max_ratio(m)?)))
        .collect::<Result<_>>()?;
    Ok(stability_from_levels(per_m))
}

pub fn stability_from_levels(per_m: Vec<(usize, f64)>) -> StabilityReport {
    let hi = per_m.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = per_m.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let degenerate = hi == 0.0;
    let spread = if degenerate { 1.0 } else { hi / lo };
    StabilityReport {
        per_m,
        spread,
        pass: degenerate || (spread.is_finite() && spread <= STABILITY_FACTOR),
        degenerate,
    }
}

/// `p` from `1/p = 1/q₁ + 1/q₂ − α/Q`.
pub fn lp_exponent(alpha: f64, q1: f64, q2: f64, q: usize) -> Result<f64> {
    if !(q1 >= 1.0 && q2 >= 1.0) {
        return usage(format!("q1, q2 >= 1 required, got ({q1}, {q2})"));
    }
    let inv_p = 1.0 / q1 + 1.0 / q2 - alpha / q as f64;
    if !(inv_p > 0.0 && inv_p <= 1.0) {
        return usage(format!(
            "inadmissible exponents (alpha, q1, q2) = ({alpha}, {q1}, {q2}): 1/p = {inv_p} gives no p >= 1"
        ));
    }
    Ok(1.0 / inv_p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub m: usize,
    pub alpha: f64,
    pub p: f64,
    pub q1: f64,
    pub q2: f64,
    pub residual: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// `‖H_α(u,v)‖_p / (‖L^{α/2}u‖_{q₁}‖L^{α/2}v‖_{q₂})` over the pairs.
pub fn lp_inequality_study(
    ctx: &LatticeContext,
    pairs: &[(Vec<f64>, Vec<f64>)],
    alpha: f64,
    q1: f64,
    q2: f64,
) -> Result<LpReport> {
    let lat = ctx.lattice();
    let q = lat.homogeneous_dimension();
    let p = lp_exponent(alpha, q1, q2, q)?;
    let ratios: Vec<f64> = pairs
        .par_iter()
        .map(|(u, v)| {
            let num = lp_norm(lat, &h_alpha_operator(ctx, u, v, alpha)?, p)?;
            let den = lp_norm(lat, &ctx.power(alpha / 2.0, u)?, q1)?
                * lp_norm(lat, &ctx.power(alpha / 2.0, v)?, q2)?;
            Ok(if num == 0.0 { 0.0 } else { num / den })
        })
        .collect::<Result<_>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LpReport {
        m: lat.m(),
        alpha,
        p,
        q1,
        q2,
        residual: 1.0 / p - 1.0 / q1 - 1.0 / q2 + alpha / q as f64,
        ratios,
        max_ratio,
    })
}

/// Trigonometric polynomial in the horizontal coordinates only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizontalTrig {
    pub constant: f64,
    /// `(frequency vector over x₁..xₙ, y₁..yₙ, cos coefficient, sin coefficient)`.
    pub modes: Vec<(Vec<i32>, f64, f64)>,
}

impl HorizontalTrig {
    /// Degree-one polynomial with standard normal coefficients.
    pub fn random(n: usize, rng: &mut ChaCha8Rng) -> Self {
        let dims = 2 * n;
        let mut modes = Vec::new();
        for code in 0..3usize.pow(dims as u32) {
            let mut c = code;
            let freq: Vec<i32> = (0..dims)
                .map(|_| {
                    let f = (c % 3) as i32 - 1;
                    c /= 3;
                    f
                })
                .collect();
            match freq.iter().find(|&&f| f != 0) {
                Some(&f) if f > 0 => {
                    modes.push((freq, StandardNormal.sample(rng), StandardNormal.sample(rng)));
                }
                _ => {}
            }
        }
        Self {
            constant: StandardNormal.sample(rng),
            modes,
        }
    }

    pub fn sample(&self, lat: &Lattice) -> Vec<f64> {
        (0..lat.node_count())
            .map(|i| {
                let z: Vec<f64> = (0..2 * lat.n())
                    .map(|d| lat.horizontal_coordinate(i, d))
                    .collect();
                self.constant
                    + self
                        .modes
                        .iter()
                        .map(|(f, a, b)| {
                            let phase: f64 = f.iter().zip(&z).map(|(&k, x)| k as f64 * x).sum();
                            a * phase.cos() + b * phase.sin()
                        })
                        .sum::<f64>()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeibnizRefinement {
    pub m_coarse: usize,
    pub m_fine: usize,
    /// Per pair `(coarse max defect, fine max defect on shared horizontal positions, order)`.
    pub pairs: Vec<(f64, f64, f64)>,
    pub min_order: f64,
    /// Smallest order when the fine maximum runs over every fine node.
    pub min_order_full_grid: f64,
}

/// Max-norm refinement order of the integer Leibniz defect on horizontal trigonometric pairs.
///
/// Both maxima run over the horizontal positions of the coarse lattice, which
/// the fine lattice contains when `m_fine` is a multiple of `m_coarse`.
pub fn leibniz_refinement(
    n: usize,
    m_coarse: usize,
    m_fine: usize,
    pairs: usize,
    seed: u64,
) -> Result<LeibnizRefinement> {
    if m_fine <= m_coarse || !m_fine.is_multiple_of(m_coarse) {
        return usage("fine lattice size must be a proper multiple of the coarse size");
    }
    let coarse = Lattice::with_default_spacing(n, m_coarse)?;
    let fine = Lattice::with_default_spacing(n, m_fine)?;
    let (op_c, op_f) = (
        SubLaplacian::assemble(&coarse),
        SubLaplacian::assemble(&fine),
    );
    let stride = (m_fine / m_coarse) as i64;
    let shared: Vec<bool> = (0..fine.node_count())
        .map(|i| fine.coords(i)[..2 * n].iter().all(|c| c % stride == 0))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = (fine.h() / coarse.h()).ln();
    let mut out = Vec::with_capacity(pairs);
    let mut min_full = f64::INFINITY;
    for _ in 0..pairs {
        let (f, g) = (
            HorizontalTrig::random(n, &mut rng),
            HorizontalTrig::random(n, &mut rng),
        );
        let dc = integer_leibniz_defect(&coarse, &op_c, &f.sample(&coarse), &g.sample(&coarse))?;
        let df = integer_leibniz_defect(&fine, &op_f, &f.sample(&fine), &g.sample(&fine))?;
        let mc = dc.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let mf = df
            .iter()
            .zip(&shared)
            .filter(|p| *p.1)
            .fold(0.0, |m: f64, (v, _)| m.max(v.abs()));
        let mf_full = df.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        min_full = min_full.min((mf_full / mc).ln() / rate);
        out.push((mc, mf, (mf / mc).ln() / rate));
    }
    let min_order = out.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    Ok(LeibnizRefinement {
        m_coarse,
        m_fine,
        pairs: out,
        min_order,
        min_order_full_grid: min_full,
    })
}

/// Shared contexts keyed by `(n, M)`.
#[derive(Debug, Default)]
pub struct ContextPool {
    contexts: Mutex<HashMap<(usize, usize), Arc<LatticeContext>>>,
}

impl ContextPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: usize, m: usize) -> Result<Arc<LatticeContext>> {
        if let Some(c) = self
            .contexts
            .lock()
            .expect("context pool poisoned")
            .get(&(n, m))
        {
            return Ok(c.clone());
        }
        let ctx = Arc::new(LatticeContext::new(n, m)?);
        self.contexts
            .lock()
            .expect("context pool poisoned")
            .insert((n, m), ctx.clone());
        Ok(ctx)
    }
}

/// Settings shared by every study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommonSettings {
    pub n: usize,
    pub m_list: Vec<usize>,
    pub pairs: usize,
    pub seed: u64,
    pub t0: f64,
    pub corpus: CorpusKind,
    /// δ grid points per instance family.
    pub grid: usize,
    /// Size of the held-out calibration corpus.
    pub calibration_count: usize,
}

impl Default for CommonSettings {
    fn default() -> Self {
        Self {
            n: 1,
            m_list: vec![4, 6],
            pairs: 50,
            seed: 42,
            t0: 0.3,
            corpus: CorpusKind::HeatSmoothedNoise,
            grid: 5,
            calibration_count: 20,
        }
    }
}

impl CommonSettings {
    fn corpus(&self, ctx: &LatticeContext) -> Result<Corpus> {
        generate_corpus(
            ctx,
            &CorpusDescriptor {
                kind: self.corpus,
                count: 2 * self.pairs,
                seed: self.seed,
                t0: self.t0,
            },
        )
    }

    /// Calibration corpus drawn from a seed disjoint from the study corpus.
    fn calibration_corpus(&self, ctx: &LatticeContext) -> Result<Corpus> {
        generate_corpus(
            ctx,
            &CorpusDescriptor {
                kind: self.corpus,
                count: self.calibration_count,
                seed: self.seed.wrapping_add(1_000_003),
                t0: self.t0,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thm11Settings {
    pub alpha: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub epsilon: f64,
}

impl Default for Thm11Settings {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            tau1: 0.8,
            tau2: 0.8,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thm12Settings {
    pub tau: f64,
    pub beta: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub inner: InnerOrder,
}

impl Default for Thm12Settings {
    fn default() -> Self {
        Self {
            tau: 0.9,
            beta: 0.3,
            delta: 0.2,
            epsilon: 0.1,
            inner: InnerOrder::Paired,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cor12Settings {
    pub alpha: f64,
    pub q1: f64,
    pub q2: f64,
}

impl Default for Cor12Settings {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            q1: 4.0,
            q2: 4.0,
        }
    }
}

/// Summary of one study across lattice levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub max_ratio: f64,
    pub stability: Option<StabilityReport>,
    pub pass: bool,
    pub inconclusive: bool,
    pub excluded_fraction: f64,
    /// Human-readable per-check notes.
    pub checks: Vec<String>,
    /// Per-level ratio reports.
    pub reports: Vec<RatioReport>,
}

impl StudyOutcome {
    fn new(name: &str, params: BTreeMap<String, f64>) -> Self {
        Self {
            name: name.to_string(),
            params,
            max_ratio: 0.0,
            stability: None,
            pass: true,
            inconclusive: false,
            excluded_fraction: 0.0,
            checks: vec![],
            reports: vec![],
        }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.checks
            .push(format!("{} {note}", if ok { "ok" } else { "FAILED" }));
    }

    fn absorb(&mut self, report: RatioReport) {
        self.max_ratio = self.max_ratio.max(report.max_ratio);
        self.excluded_fraction = self.excluded_fraction.max(report.excluded_fraction);
        self.inconclusive |= report.inconclusive;
        self.reports.push(report);
    }

    /// Per-pair CSV across all levels.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,pair,lhs_max,rhs_min_positive,ratio_sup,excluded_nodes\n");
        for r in &self.reports {
            s.push_str(r.to_csv().split_once('\n').map_or("", |x| x.1));
        }
        s
    }
}

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn scaled_pairs(
    pairs: &[(Vec<f64>, Vec<f64>)],
    count: usize,
    factor: f64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    pairs
        .iter()
        .take(count)
        .map(|(u, v)| (u.iter().map(|x| factor * x).collect(), v.clone()))
        .collect()
}

fn scale_invariance(outcome: &mut StudyOutcome, base: &RatioReport, scaled: &RatioReport) {
    let drift = base
        .pairs
        .iter()
        .zip(&scaled.pairs)
        .map(|(a, b)| {
            if a.ratio_sup == 0.0 {
                b.ratio_sup
            } else {
                (a.ratio_sup - b.ratio_sup).abs() / a.ratio_sup
            }
        })
        .fold(0.0, f64::max);
    outcome.check(
        drift <= 1e-10,
        format!(
            "scale invariance at M={}: relative drift {drift:.3e}",
            base.m
        ),
    );
}

/// Number of pairs re-run with `u ← 3u` for the scale-invariance check.
const SCALE_CHECK_PAIRS: usize = 5;

fn finish_stability(outcome: &mut StudyOutcome, levels: Vec<(usize, f64)>) {
    let stability = stability_from_levels(levels);
    outcome.check(
        stability.pass,
        format!(
            "refinement stability: max/min = {:.4} over {:?}",
            stability.spread,
            stability.per_m.iter().map(|p| p.0).collect::<Vec<_>>()
        ),
    );
    outcome.stability = Some(stability);
}

/// First pointwise bound on the spectral route.
pub fn run_thm11(
    pool: &ContextPool,
    common: &CommonSettings,
    s: &Thm11Settings,
) -> Result<StudyOutcome> {
    let inst = generate_instance(s.alpha, s.tau1, s.tau2, s.epsilon, common.grid, common.seed)?;
    let mut out = StudyOutcome::new(
        "thm11",
        params(&[
            ("alpha", s.alpha),
            ("tau1", s.tau1),
            ("tau2", s.tau2),
            ("epsilon", s.epsilon),
        ]),
    );
    let mut levels = Vec::new();
    for &m in &common.m_list {
        let ctx = pool.get(common.n, m)?;
        let pairs = common.corpus(&ctx)?.pairs();
        let report = ratio_study_thm11(&ctx, &pairs, &inst, OperatorRoute::Spectral, 0.0)?;
        let scaled = ratio_study_thm11(
            &ctx,
            &scaled_pairs(&pairs, SCALE_CHECK_PAIRS, 3.0),
            &inst,
            OperatorRoute::Spectral,
            0.0,
        )?;
        out.check(
            report.all_finite(),
            format!("finite ratios at M={m}: max {:.6}", report.max_ratio),
        );
        scale_invariance(&mut out, &report, &scaled);
        levels.push((m, report.max_ratio));
        out.absorb(report);
    }
    finish_stability(&mut out, levels);
    Ok(out)
}

/// Second pointwise bound plus the `β = 0` control.
pub fn run_thm12(
    pool: &ContextPool,
    common: &CommonSettings,
    s: &Thm12Settings,
) -> Result<StudyOutcome> {
    let inst = generate_t_instance(s.tau, s.beta, s.delta, s.epsilon, common.grid, common.seed)?;
    let control = generate_t_instance(s.tau, 0.0, s.delta, s.epsilon, common.grid, common.seed)?;
    let mut out = StudyOutcome::new(
        "thm12",
        params(&[
            ("tau", s.tau),
            ("beta", s.beta),
            ("delta", s.delta),
            ("epsilon", s.epsilon),
        ]),
    );
    let mut levels = Vec::new();
    for &m in &common.m_list {
        let ctx = pool.get(common.n, m)?;
        let pairs = common.corpus(&ctx)?.pairs();
        let report = ratio_study_thm12(&ctx, &pairs, &inst, s.inner)?;
        let scaled = ratio_study_thm12(
            &ctx,
            &scaled_pairs(&pairs, SCALE_CHECK_PAIRS, 3.0),
            &inst,
            s.inner,
        )?;
        out.check(
            report.all_finite(),
            format!("finite ratios at M={m}: max {:.6}", report.max_ratio),
        );
        scale_invariance(&mut out, &report, &scaled);
        let zero = pairs
            .iter()
            .map(|(u, v)| {
                Ok(t_commutator(&ctx, u, v, &control)?
                    .iter()
                    .fold(0.0, |a: f64, x| a.max(x.abs())))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.check(
            zero <= 1e-10,
            format!("beta = 0 control at M={m}: max |T| = {zero:.3e}"),
        );
        levels.push((m, report.max_ratio));
        out.absorb(report);
    }
    finish_stability(&mut out, levels);
    Ok(out)
}

/// Lᵖ inequality for `H_α` with its exponent relation.
pub fn run_cor12(
    pool: &ContextPool,
    common: &CommonSettings,
    s: &Cor12Settings,
) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::new(
        "cor12",
        params(&[("alpha", s.alpha), ("q1", s.q1), ("q2", s.q2)]),
    );
    let mut levels = Vec::new();
    for &m in &common.m_list {
        let ctx = pool.get(common.n, m)?;
        let pairs = common.corpus(&ctx)?.pairs();
        let report = lp_inequality_study(&ctx, &pairs, s.alpha, s.q1, s.q2)?;
        out.params.insert("p".into(), report.p);
        let scaled = lp_inequality_study(
            &ctx,
            &scaled_pairs(&pairs, SCALE_CHECK_PAIRS, 3.0),
            s.alpha,
            s.q1,
            s.q2,
        )?;
        let drift = report
            .ratios
            .iter()
            .zip(&scaled.ratios)
            .map(|(a, b)| if *a == 0.0 { *b } else { (a - b).abs() / a })
            .fold(0.0, f64::max);
        out.check(
            report.ratios.iter().all(|r| r.is_finite()),
            format!("finite ratios at M={m}: max {:.6}", report.max_ratio),
        );
        out.check(
            drift <= 1e-10,
            format!("scale invariance at M={m}: relative drift {drift:.3e}"),
        );
        out.check(
            report.residual.abs() <= 1e-12,
            format!("exponent relation residual {:.3e}", report.residual),
        );
        out.max_ratio = out.max_ratio.max(report.max_ratio);
        levels.push((m, report.max_ratio));
    }
    finish_stability(&mut out, levels);
    Ok(out)
}

/// First pointwise bound with the calibrated geometric operator on both sides.
pub fn run_prop61(
    pool: &ContextPool,
    common: &CommonSettings,
    s: &Thm11Settings,
) -> Result<StudyOutcome> {
    let inst = generate_instance(s.alpha, s.tau1, s.tau2, s.epsilon, common.grid, common.seed)?;
    let mut out = StudyOutcome::new(
        "prop61",
        params(&[
            ("alpha", s.alpha),
            ("tau1", s.tau1),
            ("tau2", s.tau2),
            ("epsilon", s.epsilon),
        ]),
    );
    let mut levels = Vec::new();
    for &m in &common.m_list {
        let ctx = pool.get(common.n, m)?;
        let lat = ctx.lattice();
        let cal = common.calibration_corpus(&ctx)?;
        let geo = |order: f64| {
            GeometricOperator::calibrated(lat, ctx.decomposition(), order, &cal.functions)
        };
        let op_alpha = geo(s.alpha)?;
        let op_tau1 = if s.tau1 == s.alpha {
            op_alpha.clone()
        } else {
            geo(s.tau1)?
        };
        let op_tau2 = if s.tau2 == s.alpha {
            op_alpha.clone()
        } else {
            geo(s.tau2)?
        };
        out.params
            .insert(format!("calibrated_constant_m{m}"), op_alpha.constant());
        let route = OperatorRoute::Geometric {
            alpha: &op_alpha,
            tau1: &op_tau1,
            tau2: &op_tau2,
        };
        let pairs = common.corpus(&ctx)?.pairs();
        let report = ratio_study_thm11(&ctx, &pairs, &inst, route, 0.0)?;
        let scaled = ratio_study_thm11(
            &ctx,
            &scaled_pairs(&pairs, SCALE_CHECK_PAIRS, 3.0),
            &inst,
            route,
            0.0,
        )?;
        out.check(
            op_alpha.constant() > 0.0,
            format!("calibrated constant at M={m}: {:.6}", op_alpha.constant()),
        );
        out.check(
            report.all_finite(),
            format!("finite ratios at M={m}: max {:.6}", report.max_ratio),
        );
        scale_invariance(&mut out, &report, &scaled);
        levels.push((m, report.max_ratio));
        out.absorb(report);
    }
    finish_stability(&mut out, levels);
    Ok(out)
}

/// Derivative-order shift used by the negative control.
pub const NEGATIVE_CONTROL_SHIFT: f64 = 2.0;

/// The first bound with derivative orders raised by two: refinement drift must exceed two.
pub fn run_negative_control(
    pool: &ContextPool,
    common: &CommonSettings,
    s: &Thm11Settings,
) -> Result<StudyOutcome> {
    let inst = generate_instance(s.alpha, s.tau1, s.tau2, s.epsilon, common.grid, common.seed)?;
    let mut out = StudyOutcome::new(
        "negative-control",
        params(&[
            ("alpha", s.alpha),
            ("tau1", s.tau1),
            ("tau2", s.tau2),
            ("shift", NEGATIVE_CONTROL_SHIFT),
        ]),
    );
    let mut levels = Vec::new();
    for &m in &common.m_list {
        let ctx = pool.get(common.n, m)?;
        let pairs = common.corpus(&ctx)?.pairs();
        let report = ratio_study_thm11(
            &ctx,
            &pairs,
            &inst,
            OperatorRoute::Spectral,
            NEGATIVE_CONTROL_SHIFT,
        )?;
        levels.push((m, report.max_ratio));
        out.absorb(report);
    }
    let stability = stability_from_levels(levels);
    out.check(
        stability.spread > STABILITY_FACTOR,
        format!(
            "mis-specified instance drifts: max/min = {:.4} (must exceed {STABILITY_FACTOR})",
            stability.spread
        ),
    );
    out.stability = Some(stability);
    Ok(out)
}

/// Calibrated singular route against the spectral `H_α` on held-out pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteAgreement {
    pub m: usize,
    pub alpha: f64,
    pub constant: f64,
    pub calibration_residual: f64,
    /// `sqrt(Σ‖A − B‖² / Σ‖A‖²)` over the held-out pairs.
    pub pooled_error: f64,
    pub max_pair_error: f64,
}

pub fn h_route_agreement(
    pool: &ContextPool,
    common: &CommonSettings,
    m: usize,
    alpha: f64,
) -> Result<RouteAgreement> {
    let ctx = pool.get(common.n, m)?;
    let lat = ctx.lattice();
    let op = SingularOperator::new(lat, alpha)?;
    let cal = common.calibration_corpus(&ctx)?;
    let calibration = calibrate_singular_constant(lat, &op, ctx.decomposition(), &cal.functions)?;
    let pairs = common.corpus(&ctx)?.pairs();
    let errs: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|(u, v)| {
            let a = h_alpha_operator(&ctx, u, v, alpha)?;
            let b = h_alpha_bilinear(lat, &op, u, v, calibration.constant)?;
            let e: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
            let r: f64 = a.iter().map(|x| x * x).sum();
            Ok((e, r))
        })
        .collect::<Result<_>>()?;
    let (e, r) = errs
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok(RouteAgreement {
        m,
        alpha,
        constant: calibration.constant,
        calibration_residual: calibration.residual,
        pooled_error: (e / r).sqrt(),
        max_pair_error: errs.iter().map(|p| (p.0 / p.1).sqrt()).fold(0.0, f64::max),
    })
}

/// Kernel semigroup, fundamental solution and heat-vs-eigen route checks at one lattice size.
pub fn run_kernel_identities(
    pool: &ContextPool,
    common: &CommonSettings,
    m: usize,
    count: usize,
) -> Result<StudyOutcome> {
    let ctx = pool.get(common.n, m)?;
    let lat = ctx.lattice();
    let (d, quad) = (ctx.decomposition(), ctx.quadrature());
    let mut out = StudyOutcome::new(
        "kernel-identities",
        params(&[("m", m as f64), ("count", count as f64)]),
    );
    let corpus = generate_corpus(
        &ctx,
        &CorpusDescriptor {
            kind: common.corpus,
            count,
            seed: common.seed,
            t0: common.t0,
        },
    )?;
    let r1 = ctx.bank().kernel(lat, d, quad, 1.0)?;
    let r2 = ctx.bank().kernel(lat, d, quad, 2.0)?;
    let rel = |a: &[f64], b: &[f64]| {
        let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let r: f64 = b.iter().map(|y| y * y).sum();
        (e / r).sqrt()
    };
    let mut semigroup: f64 = 0.0;
    let mut fundamental: f64 = 0.0;
    for u in &corpus.functions {
        let u2 = group_convolve(lat, u, &r2)?;
        let u11 = group_convolve(lat, &group_convolve(lat, u, &r1)?, &r1)?;
        semigroup = semigroup.max(rel(&u11, &u2));
        fundamental = fundamental.max(rel(&ctx.operator().apply(&u2), u));
    }
    out.check(
        semigroup <= 1e-5,
        format!("R1*R1 = R2 relative error {semigroup:.3e}"),
    );
    out.check(
        fundamental <= 1e-5,
        format!("L(u*R2) = u relative error {fundamental:.3e}"),
    );
    let mut cross: f64 = 0.0;
    for i in 1..d.dim() {
        let e = d.eigenvector(i);
        cross = cross.max(rel(
            &heat_integral_negative_power(d, 1.0, quad, &e)?,
            &d.power(-0.5, &e)?,
        ));
    }
    out.check(
        cross <= 1e-5,
        format!("heat-integral vs eigen L^(-1/2) relative error {cross:.3e}"),
    );
    out.params.insert("semigroup_error".into(), semigroup);
    out.params.insert("fundamental_error".into(), fundamental);
    out.params.insert("cross_route_error".into(), cross);
    Ok(out)
}

/// Γ-recurrence identity at `α = 2` and the large-`k` ratio limit.
pub fn run_multiplier_identities() -> Result<StudyOutcome> {
    let mut out = StudyOutcome::new("multiplier-identities", BTreeMap::new());
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        for lambda in [-4.0, -1.0, -0.5, 0.5, 1.0, 4.0] {
            for k in 0..=50u64 {
                let pt = MultiplierPoint::new(k, lambda, 2.0, n)?;
                let exact = (2 * k + n as u64) as f64 * f64::abs(lambda);
                worst = worst.max((multiplier_a_tilde(&pt)? - exact).abs() / exact);
            }
        }
    }
    out.check(
        worst <= 1e-12,
        format!("A_tilde(k, lambda, 2) = (2k+n)|lambda|: max relative error {worst:.3e}"),
    );
    let pt = MultiplierPoint::new(10_000, 1.0, 1.0, 1)?;
    let ratio = multiplier_a_tilde(&pt)? / multiplier_a(&pt)?;
    out.check(
        (ratio - 1.0).abs() <= 0.01,
        format!("A_tilde/A at k = 1e4: {ratio:.8}"),
    );
    out.params.insert("identity_error".into(), worst);
    out.params.insert("asymptotic_ratio".into(), ratio);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_ratio_floor() {
        let r = pointwise_ratio(&[1.0, 2.0, 0.0], &[2.0, 1.0, 0.0]);
        assert_eq!(r.ratio_sup, 2.0);
        assert_eq!(r.excluded_nodes, 1);
        let zero = pointwise_ratio(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!((zero.ratio_sup, zero.excluded_nodes), (0.0, 0));
        assert!(pointwise_ratio(&[1.0], &[0.0]).ratio_sup.is_infinite());
    }

    #[test]
    fn exponent_relation() {
        assert_eq!(lp_exponent(1.0, 4.0, 4.0, 4).unwrap(), 4.0);
        assert!(lp_exponent(3.9, 4.0, 4.0, 4).is_err());
        assert!(lp_exponent(1.0, 0.5, 4.0, 4).is_err());
    }

    #[test]
    fn stability_rules() {
        assert!(refinement_stability(&[4], |_| Ok(1.0)).is_err());
        let s = refinement_stability(&[4, 6], |m| Ok(m as f64)).unwrap();
        assert!(s.pass && (s.spread - 1.5).abs() < 1e-15);
        let s = refinement_stability(&[4, 6], |_| Ok(0.0)).unwrap();
        assert!(s.pass && s.degenerate);
        assert!(
            !refinement_stability(&[4, 6, 8], |m| Ok((m * m) as f64))
                .unwrap()
                .pass
        );
    }

    #[test]
    fn corpus_kind_names() {
        assert_eq!(
            "gauge-bump".parse::<CorpusKind>().unwrap(),
            CorpusKind::GaugeBump
        );
        assert!("white".parse::<CorpusKind>().is_err());
    }
}
