//! Riesz, singular and geometric kernels on the lattice, group convolution,
//! and the principal-value singular-integral fractional operator.
//!
//! Kernel tables are indexed by the node `p = y⁻¹x`, so a table acts by
//! `(u * K)(x) = Σ_y u(y) K(y⁻¹x)·vol`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::error::{check_len, usage, Error, Result};
use crate::group::{gauge, gauge_parts, GroupPoint};
use crate::lattice::Lattice;
use crate::spectral::{heat_integral_negative_power, HeatQuadrature, SpectralDecomposition};

/// Lifts are summed inside a gauge ball of this many horizontal periods.
pub const DEFAULT_LIFT_RADIUS_PERIODS: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Riesz,
    Singular,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    AnalyticSurrogate,
    HeatExtracted,
    Calibrated(f64),
}

impl Normalization {
    fn constant(&self) -> f64 {
        match self {
            Normalization::Calibrated(c) => *c,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub alpha: f64,
    pub normalization: Normalization,
}

impl KernelSpec {
    pub fn validate(&self, q: usize) -> Result<()> {
        let q = q as f64;
        let ok = match self.kind {
            KernelKind::Riesz | KernelKind::Geometric => self.alpha > 0.0 && self.alpha < q,
            KernelKind::Singular => self.alpha > 0.0 && self.alpha < 2.0,
        };
        if !ok {
            let range = if self.kind == KernelKind::Singular {
                "(0, 2)".to_string()
            } else {
                format!("(0, {q})")
            };
            return usage(format!(
                "{:?} kernel needs alpha in {range}, got {}",
                self.kind, self.alpha
            ));
        }
        Ok(())
    }

    /// Homogeneity degree: `α − Q` for Riesz and geometric kinds, `−Q − α` for the singular kind.
    pub fn degree(&self, q: usize) -> f64 {
        match self.kind {
            KernelKind::Singular => -(q as f64) - self.alpha,
            _ => self.alpha - q as f64,
        }
    }
}

/// `constant·|p|^{degree}`.
pub fn analytic_kernel(spec: &KernelSpec, p: &GroupPoint) -> Result<f64> {
    let q = 2 * p.n() + 2;
    spec.validate(q)?;
    if p.is_identity() {
        return usage("analytic kernels are singular at the identity");
    }
    Ok(spec.normalization.constant() * gauge(p).powf(spec.degree(q)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    values: Vec<f64>,
}

impl KernelTable {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(K(p) + K(p⁻¹))/2`.
    pub fn symmetrized(&self, lat: &Lattice) -> Self {
        Self::new(
            (0..self.len())
                .map(|p| 0.5 * (self.values[p] + self.values[lat.inv(p)]))
                .collect(),
        )
    }

    /// `K − min K`, entrywise nonnegative.
    pub fn shifted_nonnegative(&self) -> Self {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        Self::new(self.values.iter().map(|v| v - lo).collect())
    }

    pub fn lattice_sum(&self, cell_volume: f64) -> f64 {
        self.values.iter().sum::<f64>() * cell_volume
    }

    /// CSV with columns `node,gauge,value`, gauge taken over the nearest lift.
    pub fn to_csv(&self, lat: &Lattice) -> String {
        let mut s = String::from("node,gauge,value\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{:.17e},{v:.17e}\n", wrapped_gauge(lat, i)));
        }
        s
    }
}

/// `(u * K)(x) = Σ_y u(y)K(y⁻¹x)·vol`, parallel over output nodes.
pub fn group_convolve(lat: &Lattice, u: &[f64], k: &KernelTable) -> Result<Vec<f64>> {
    lat.check(u)?;
    check_len(lat.node_count(), k.len())?;
    let vol = lat.cell_volume();
    let support: Vec<usize> = (0..u.len()).filter(|&y| u[y] != 0.0).collect();
    Ok((0..lat.node_count())
        .into_par_iter()
        .map(|x| {
            support
                .iter()
                .map(|&y| u[y] * k.values[lat.left_quotient(y, x)])
                .sum::<f64>()
                * vol
        })
        .collect())
}

/// Centered integer representative in `(−M/2, M/2]`.
fn centered(v: i64, m: i64) -> i64 {
    let r = v.rem_euclid(m);
    if r > m / 2 {
        r - m
    } else {
        r
    }
}

/// Horizontal lifts `A = a + M·j` of a node's horizontal coordinates with `|j| ≤ reach`.
fn horizontal_lifts(lat: &Lattice, idx: usize, reach: i64) -> Vec<Vec<i64>> {
    let m = lat.m() as i64;
    let base: Vec<i64> = lat.coords(idx)[..2 * lat.n()]
        .iter()
        .map(|&v| centered(v, m))
        .collect();
    let width = (2 * reach + 1) as usize;
    let combos = width.pow(base.len() as u32);
    (0..combos)
        .map(|mut c| {
            base.iter()
                .map(|&b| {
                    let j = (c % width) as i64 - reach;
                    c /= width;
                    b + m * j
                })
                .collect()
        })
        .collect()
}

fn lift_parts(lat: &Lattice, lift: &[i64], k: i64) -> (f64, i64) {
    let n = lat.n();
    let z2: f64 = lift.iter().map(|&v| (v * v) as f64).sum::<f64>() * lat.h() * lat.h();
    let ab: i64 = (0..n).map(|i| lift[i] * lift[n + i]).sum();
    (z2, 2 * k - ab)
}

/// Gauge of the nearest lift of a node to the identity.
pub fn wrapped_gauge(lat: &Lattice, idx: usize) -> f64 {
    let k = lat.coords(idx)[2 * lat.n()];
    let period = 2 * lat.central_period() as i64;
    let mut best = f64::INFINITY;
    for lift in horizontal_lifts(lat, idx, 1) {
        let (z2, base) = lift_parts(lat, &lift, k);
        let m0 = (-(base as f64) / period as f64).round() as i64;
        for m in m0 - 1..=m0 + 1 {
            let c = base + period * m;
            best = best.min(gauge_parts(z2, c as f64 * lat.h_t()));
        }
    }
    best
}

/// Volume of the unit gauge ball, `πⁿ B(n/2, 3/2)/(4Γ(n))`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powi(n as i32) * beta(n as f64 / 2.0, 1.5) / (4.0 * gamma(n as f64))
}

/// `Σ_{lifts ℓ, |ℓ| ≤ R} |ℓ|^{degree}` plus the uniform-density tail beyond `R`.
fn periodized_power(lat: &Lattice, idx: usize, degree: f64, radius: f64) -> f64 {
    let q = lat.homogeneous_dimension() as f64;
    let k = lat.coords(idx)[2 * lat.n()];
    let period = 2 * lat.central_period() as i64;
    let reach = (radius / (lat.m() as f64 * lat.h())).ceil() as i64 + 1;
    let r4 = radius.powi(4);
    let mut sum = 0.0;
    for lift in horizontal_lifts(lat, idx, reach) {
        let (z2, base) = lift_parts(lat, &lift, k);
        if z2 * z2 > r4 {
            continue;
        }
        let c_max = (r4 - z2 * z2).sqrt() / 4.0 / lat.h_t();
        let m_lo = ((-c_max - base as f64) / period as f64).ceil() as i64;
        let m_hi = ((c_max - base as f64) / period as f64).floor() as i64;
        for m in m_lo..=m_hi {
            let g = gauge_parts(z2, (base + period * m) as f64 * lat.h_t());
            if g > 0.0 {
                sum += g.powf(degree);
            }
        }
    }
    let beyond = -(degree + q);
    sum + q * unit_ball_volume(lat.n()) * radius.powf(-beyond) / (beyond * lat.covolume())
}

/// Singular kernel `|p|^{−Q−α}` summed over all lifts of each node; zero at the origin.
pub fn periodized_singular_table(
    lat: &Lattice,
    alpha: f64,
    radius_periods: f64,
) -> Result<KernelTable> {
    KernelSpec {
        kind: KernelKind::Singular,
        alpha,
        normalization: Normalization::AnalyticSurrogate,
    }
    .validate(lat.homogeneous_dimension())?;
    if !(radius_periods > 0.0) {
        return usage("lift radius must be positive");
    }
    let radius = radius_periods * lat.m() as f64 * lat.h();
    let degree = -(lat.homogeneous_dimension() as f64) - alpha;
    let mut values: Vec<f64> = (0..lat.node_count())
        .into_par_iter()
        .map(|p| periodized_power(lat, p, degree, radius))
        .collect();
    values[lat.origin()] = 0.0;
    Ok(KernelTable::new(values).symmetrized(lat))
}

/// Analytic kernel on nearest lifts (Riesz and geometric kinds); zero at the origin.
pub fn analytic_table(lat: &Lattice, spec: &KernelSpec) -> Result<KernelTable> {
    let q = lat.homogeneous_dimension();
    spec.validate(q)?;
    if spec.kind == KernelKind::Singular {
        return usage("singular kernels are tabulated by periodized_singular_table");
    }
    let c = spec.normalization.constant();
    let mut values: Vec<f64> = (0..lat.node_count())
        .map(|p| c * wrapped_gauge(lat, p).powf(spec.degree(q)))
        .collect();
    values[lat.origin()] = 0.0;
    Ok(KernelTable::new(values).symmetrized(lat))
}

/// Mean-zero kernel of `L^{−α/2}` from the heat integral applied to the unit delta.
pub fn riesz_kernel_from_heat(
    lat: &Lattice,
    decomp: &SpectralDecomposition,
    alpha: f64,
    quad: &HeatQuadrature,
) -> Result<KernelTable> {
    KernelSpec {
        kind: KernelKind::Riesz,
        alpha,
        normalization: Normalization::HeatExtracted,
    }
    .validate(lat.homogeneous_dimension())?;
    let mut delta = lat.delta(lat.origin());
    lat.remove_mean(&mut delta);
    Ok(KernelTable::new(heat_integral_negative_power(
        decomp, alpha, quad, &delta,
    )?))
}

/// The principal-value operator `c·Σ_{y≠x}(u(x) − u(y))K(y⁻¹x)·vol`.
#[derive(Debug, Clone)]
pub struct SingularOperator {
    alpha: f64,
    table: KernelTable,
}

impl SingularOperator {
    pub fn new(lat: &Lattice, alpha: f64) -> Result<Self> {
        Self::with_radius(lat, alpha, DEFAULT_LIFT_RADIUS_PERIODS)
    }

    pub fn with_radius(lat: &Lattice, alpha: f64, radius_periods: f64) -> Result<Self> {
        Ok(Self {
            alpha,
            table: periodized_singular_table(lat, alpha, radius_periods)?,
        })
    }

    pub fn from_table(alpha: f64, table: KernelTable) -> Self {
        Self { alpha, table }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn apply(&self, lat: &Lattice, u: &[f64], constant: f64) -> Result<Vec<f64>> {
        lat.check(u)?;
        check_len(lat.node_count(), self.table.len())?;
        let vol = lat.cell_volume();
        let k = self.table.values();
        Ok((0..lat.node_count())
            .into_par_iter()
            .map(|x| {
                let s: f64 = (0..lat.node_count())
                    .filter(|&y| y != x)
                    .map(|y| (u[x] - u[y]) * k[lat.left_quotient(y, x)])
                    .sum();
                constant * s * vol
            })
            .collect())
    }

    /// `−c·Σ_y (u(x) − u(y))(v(x) − v(y))K(y⁻¹x)·vol`.
    pub fn bilinear(&self, lat: &Lattice, u: &[f64], v: &[f64], constant: f64) -> Result<Vec<f64>> {
        lat.check(u)?;
        lat.check(v)?;
        let vol = lat.cell_volume();
        let k = self.table.values();
        Ok((0..lat.node_count())
            .into_par_iter()
            .map(|x| {
                let s: f64 = (0..lat.node_count())
                    .filter(|&y| y != x)
                    .map(|y| (u[x] - u[y]) * (v[x] - v[y]) * k[lat.left_quotient(y, x)])
                    .sum();
                -constant * s * vol
            })
            .collect())
    }
}

/// Builds the periodized kernel and applies the PV sum with the given normalization.
pub fn singular_frac_apply(
    lat: &Lattice,
    u: &[f64],
    alpha: f64,
    normalization: Normalization,
) -> Result<Vec<f64>> {
    if normalization == Normalization::HeatExtracted {
        return usage("the singular operator has no heat-extracted normalization");
    }
    SingularOperator::new(lat, alpha)?.apply(lat, u, normalization.constant())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub constant: f64,
    /// Pooled relative L² residual `‖cS u − L^{α/2}u‖/‖L^{α/2}u‖` over the corpus.
    pub residual: f64,
    /// Largest per-element relative residual.
    pub max_residual: f64,
}

/// Least-squares constant matching the PV operator to the spectral `L^{α/2}`.
pub fn calibrate_singular_constant(
    lat: &Lattice,
    op: &SingularOperator,
    decomp: &SpectralDecomposition,
    corpus: &[Vec<f64>],
) -> Result<Calibration> {
    if corpus.is_empty() {
        return usage("calibration corpus is empty");
    }
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = corpus
        .par_iter()
        .map(|u| Ok((op.apply(lat, u, 1.0)?, decomp.power(op.alpha() / 2.0, u)?)))
        .collect::<Result<_>>()?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let num: f64 = pairs.iter().map(|(s, p)| dot(s, p)).sum();
    let den: f64 = pairs.iter().map(|(s, _)| dot(s, s)).sum();
    if !(den > 0.0) {
        return Err(Error::Usage("calibration corpus is constant".into()));
    }
    let c = num / den;
    let mut err2 = 0.0;
    let mut ref2 = 0.0;
    let mut max_residual: f64 = 0.0;
    for (s, p) in &pairs {
        let e: f64 = s.iter().zip(p).map(|(a, b)| (c * a - b).powi(2)).sum();
        let r: f64 = dot(p, p);
        err2 += e;
        ref2 += r;
        if r > 0.0 {
            max_residual = max_residual.max((e / r).sqrt());
        }
    }
    Ok(Calibration {
        constant: c,
        residual: (err2 / ref2).sqrt(),
        max_residual,
    })
}

/// Heat-extracted Riesz kernels cached by order.
#[derive(Debug, Default)]
pub struct RieszBank {
    tables: Mutex<HashMap<u64, Arc<KernelTable>>>,
}

impl RieszBank {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mean-zero kernel of order `sigma`.
    pub fn kernel(
        &self,
        lat: &Lattice,
        decomp: &SpectralDecomposition,
        quad: &HeatQuadrature,
        sigma: f64,
    ) -> Result<Arc<KernelTable>> {
        let key = sigma.to_bits();
        if let Some(k) = self.tables.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(k.clone());
        }
        let table = Arc::new(riesz_kernel_from_heat(lat, decomp, sigma, quad)?);
        self.tables
            .lock()
            .expect("kernel cache poisoned")
            .insert(key, table.clone());
        Ok(table)
    }

    /// Positivity-preserving `R_σ f`: convolution with `K_σ − min K_σ`; `R₀` is the identity.
    pub fn apply_positive(
        &self,
        lat: &Lattice,
        decomp: &SpectralDecomposition,
        quad: &HeatQuadrature,
        sigma: f64,
        f: &[f64],
    ) -> Result<Vec<f64>> {
        if sigma == 0.0 {
            lat.check(f)?;
            return Ok(f.to_vec());
        }
        let key = (-sigma).to_bits();
        let cached = self
            .tables
            .lock()
            .expect("kernel cache poisoned")
            .get(&key)
            .cloned();
        let table = match cached {
            Some(t) => t,
            None => {
                let t = Arc::new(self.kernel(lat, decomp, quad, sigma)?.shifted_nonnegative());
                self.tables
                    .lock()
                    .expect("kernel cache poisoned")
                    .insert(key, t.clone());
                t
            }
        };
        group_convolve(lat, f, &table)
    }

    pub fn len(&self) -> usize {
        self.tables.lock().expect("kernel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        let spec = KernelSpec {
            kind: KernelKind::Riesz,
            alpha: 1.0,
            normalization: Normalization::AnalyticSurrogate,
        };
        assert_eq!(
            analytic_kernel(&spec, &GroupPoint::h1(1.0, 0.0, 0.0)).unwrap(),
            1.0
        );
        assert!(analytic_kernel(&spec, &GroupPoint::identity(1)).is_err());
        let sing = KernelSpec {
            kind: KernelKind::Singular,
            alpha: 1.0,
            normalization: Normalization::AnalyticSurrogate,
        };
        assert_eq!(sing.degree(4), -5.0);
        let p = GroupPoint::h1(0.0, 0.0, 1.0);
        assert!((analytic_kernel(&sing, &p).unwrap() - 2f64.powi(-5)).abs() < 1e-15);
        let bad = KernelSpec {
            kind: KernelKind::Singular,
            alpha: 2.0,
            normalization: Normalization::AnalyticSurrogate,
        };
        assert!(analytic_kernel(&bad, &p).is_err());
    }

    #[test]
    fn ball_volume_h1() {
        assert!((unit_ball_volume(1) - PI * PI / 8.0).abs() < 1e-14);
    }

    #[test]
    fn wrapped_gauge_of_neighbours() {
        let lat = Lattice::with_default_spacing(1, 6).unwrap();
        assert_eq!(wrapped_gauge(&lat, lat.origin()), 0.0);
        let step = lat.forward(0)[lat.origin()] as usize;
        assert!((wrapped_gauge(&lat, step) - lat.h()).abs() < 1e-14);
        let back = lat.backward(0)[lat.origin()] as usize;
        assert!((wrapped_gauge(&lat, back) - lat.h()).abs() < 1e-14);
    }

    #[test]
    fn singular_table_symmetric_and_positive() {
        let lat = Lattice::with_default_spacing(1, 4).unwrap();
        let t = periodized_singular_table(&lat, 1.0, 2.0).unwrap();
        for p in 1..lat.node_count() {
            assert!(t.at(p) > 0.0);
            assert_eq!(t.at(p), t.at(lat.inv(p)));
        }
        assert_eq!(t.at(0), 0.0);
    }
}
