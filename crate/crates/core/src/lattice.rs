//! Finite Heisenberg nilmanifold lattices and the discrete sub-Laplacian.
//!
//! Nodes are integer triples `(a, b, k)` with `a, b ∈ Zⁿ` taken mod `M` and
//! `k` taken mod `K`, multiplied by `(a, b, k)(a', b', k') = (a + a', b + b',
//! k + k' + a·b')`. The node embeds in ℍⁿ as `z = h(a, b)`,
//! `t = h²(k − a·b/2)`, which is a homomorphism into the polarized group law,
//! so the vertical grid spacing is `h_t = h²/2` and the vertical period is
//! `M_t = 2K` in units of `h_t`. The periods form a normal subgroup exactly
//! when `K` divides `M`; the default is `K = M`.
//!
//! The horizontal fields are realized by right translation with the
//! generators `(eᵢ, 0, 0)` and `(0, eᵢ, 0)`, so every difference operator is
//! left-invariant and `L = Σ DᵢᵀDᵢ` is symmetric positive semidefinite by
//! construction.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, usage, Result};
use crate::group::GroupPoint;

/// Integer-coordinate tolerance used when snapping points onto the grid.
const SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Lattice {
    n: usize,
    m: usize,
    k_period: usize,
    h: f64,
    coords: Vec<i64>,
    plus: Vec<Vec<u32>>,
    minus: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeDescriptor {
    pub n: usize,
    pub m: usize,
    pub m_t: usize,
    pub h: f64,
    pub h_t: f64,
    pub node_count: usize,
    pub cell_volume: f64,
}

impl Lattice {
    /// Lattice with the default central period `K = M`.
    pub fn build(n: usize, m: usize, h: f64) -> Result<Self> {
        Self::with_central_period(n, m, m, h)
    }

    /// Lattice with spacing `2π/M`, so the horizontal period is `2π`.
    pub fn with_default_spacing(n: usize, m: usize) -> Result<Self> {
        Self::build(n, m, 2.0 * PI / m as f64)
    }

    pub fn with_central_period(n: usize, m: usize, k_period: usize, h: f64) -> Result<Self> {
        if n == 0 {
            return usage("group parameter n must be at least 1");
        }
        if m < 4 || !m.is_multiple_of(2) {
            return usage("M must be even and ≥ 4");
        }
        if k_period == 0 || !m.is_multiple_of(k_period) {
            return usage(format!(
                "central period {k_period} must divide M = {m} for the periods to form a normal subgroup"
            ));
        }
        if !(h > 0.0) || !h.is_finite() {
            return usage(format!("spacing h must be positive, got {h}"));
        }
        let dim = 2 * n + 1;
        let count = m
            .checked_pow(2 * n as u32)
            .and_then(|v| v.checked_mul(k_period))
            .filter(|&v| v <= u32::MAX as usize)
            .ok_or_else(|| crate::error::Error::Usage("lattice too large".into()))?;
        let mut lat = Self {
            n,
            m,
            k_period,
            h,
            coords: vec![0; count * dim],
            plus: vec![],
            minus: vec![],
        };
        for idx in 0..count {
            let mut rest = idx;
            let k = rest % k_period;
            rest /= k_period;
            let c = &mut lat.coords[idx * dim..(idx + 1) * dim];
            for slot in c.iter_mut().take(2 * n) {
                *slot = (rest % m) as i64;
                rest /= m;
            }
            c[2 * n] = k as i64;
        }
        let mut plus = Vec::with_capacity(2 * n);
        let mut minus = Vec::with_capacity(2 * n);
        for dir in 0..2 * n {
            let (p, q): (Vec<u32>, Vec<u32>) = (0..count)
                .map(|i| (lat.step(i, dir, 1) as u32, lat.step(i, dir, -1) as u32))
                .unzip();
            plus.push(p);
            minus.push(q);
        }
        lat.plus = plus;
        lat.minus = minus;
        Ok(lat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn central_period(&self) -> usize {
        self.k_period
    }

    /// Vertical period in units of `h_t`.
    pub fn m_t(&self) -> usize {
        2 * self.k_period
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn h_t(&self) -> f64 {
        self.h * self.h / 2.0
    }

    pub fn node_count(&self) -> usize {
        self.coords.len() / (2 * self.n + 1)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(2 * self.n as i32 + 2)
    }

    /// Haar volume of the whole nilmanifold.
    pub fn covolume(&self) -> f64 {
        self.cell_volume() * self.node_count() as f64
    }

    pub fn homogeneous_dimension(&self) -> usize {
        2 * self.n + 2
    }

    pub fn descriptor(&self) -> LatticeDescriptor {
        LatticeDescriptor {
            n: self.n,
            m: self.m,
            m_t: self.m_t(),
            h: self.h,
            h_t: self.h_t(),
            node_count: self.node_count(),
            cell_volume: self.cell_volume(),
        }
    }

    /// Integer coordinates `(a₁..aₙ, b₁..bₙ, k)` of a node.
    pub fn coords(&self, idx: usize) -> &[i64] {
        let dim = 2 * self.n + 1;
        &self.coords[idx * dim..(idx + 1) * dim]
    }

    pub fn index_of(&self, horizontal: &[i64], k: i64) -> usize {
        let m = self.m as i64;
        let mut idx = 0i64;
        for &v in horizontal.iter().rev() {
            idx = idx * m + v.rem_euclid(m);
        }
        (idx * self.k_period as i64 + k.rem_euclid(self.k_period as i64)) as usize
    }

    pub fn origin(&self) -> usize {
        0
    }

    fn dot_ab(&self, c: &[i64]) -> i64 {
        (0..self.n).map(|i| c[i] * c[self.n + i]).sum()
    }

    /// Physical point of the canonical representative of a node.
    pub fn point(&self, idx: usize) -> GroupPoint {
        let c = self.coords(idx);
        let z = c[..2 * self.n].iter().map(|&v| v as f64 * self.h).collect();
        let t = self.h * self.h * (c[2 * self.n] as f64 - 0.5 * self.dot_ab(c) as f64);
        GroupPoint::new(z, t).expect("lattice points are finite")
    }

    /// Horizontal coordinate `dir` (x₁..xₙ, y₁..yₙ) of the canonical representative.
    pub fn horizontal_coordinate(&self, idx: usize, dir: usize) -> f64 {
        self.coords(idx)[dir] as f64 * self.h
    }

    /// Index of the product of two nodes.
    pub fn mul(&self, p: usize, q: usize) -> usize {
        let (cp, cq) = (self.coords(p), self.coords(q));
        let n = self.n;
        let horizontal: Vec<i64> = (0..2 * n).map(|i| cp[i] + cq[i]).collect();
        let cross: i64 = (0..n).map(|i| cp[i] * cq[n + i]).sum();
        self.index_of(&horizontal, cp[2 * n] + cq[2 * n] + cross)
    }

    pub fn inv(&self, p: usize) -> usize {
        let c = self.coords(p);
        let horizontal: Vec<i64> = c[..2 * self.n].iter().map(|v| -v).collect();
        self.index_of(&horizontal, self.dot_ab(c) - c[2 * self.n])
    }

    /// Index of `y⁻¹x`.
    #[inline]
    pub fn left_quotient(&self, y: usize, x: usize) -> usize {
        let dim = 2 * self.n + 1;
        let cy = &self.coords[y * dim..(y + 1) * dim];
        let cx = &self.coords[x * dim..(x + 1) * dim];
        let n = self.n;
        let m = self.m as i64;
        let kp = self.k_period as i64;
        let mut k = cx[2 * n] - cy[2 * n];
        for i in 0..n {
            k -= cy[i] * (cx[n + i] - cy[n + i]);
        }
        let mut idx = 0i64;
        for i in (0..2 * n).rev() {
            idx = idx * m + (cx[i] - cy[i]).rem_euclid(m);
        }
        (idx * kp + k.rem_euclid(kp)) as usize
    }

    fn step(&self, idx: usize, dir: usize, sign: i64) -> usize {
        let c = self.coords(idx);
        let n = self.n;
        let mut horizontal = c[..2 * n].to_vec();
        horizontal[dir] += sign;
        let k = if dir >= n {
            c[2 * n] + sign * c[dir - n]
        } else {
            c[2 * n]
        };
        self.index_of(&horizontal, k)
    }

    /// Right neighbour `x·gᵈⁱʳ`; directions are ordered X₁..Xₙ, Y₁..Yₙ.
    pub fn forward(&self, dir: usize) -> &[u32] {
        &self.plus[dir]
    }

    /// Right neighbour `x·(gᵈⁱʳ)⁻¹`.
    pub fn backward(&self, dir: usize) -> &[u32] {
        &self.minus[dir]
    }

    /// Permutation `x ↦ g·x`.
    pub fn left_translation(&self, g: usize) -> Vec<usize> {
        (0..self.node_count()).map(|x| self.mul(g, x)).collect()
    }

    /// Node index of a point lying on the lattice, reduced modulo the periods.
    pub fn wrap(&self, p: &GroupPoint) -> Result<usize> {
        if p.n() != self.n {
            return Err(crate::error::Error::DimensionMismatch {
                expected: 2 * self.n,
                found: p.z().len(),
            });
        }
        let snap = |v: f64, unit: f64, what: &str| -> Result<i64> {
            let s = v / unit;
            let r = s.round();
            if (s - r).abs() > SNAP_TOL * (1.0 + s.abs()) {
                return usage(format!(
                    "point is off the lattice: {what} = {v} is not a multiple of {unit}"
                ));
            }
            Ok(r as i64)
        };
        let mut horizontal = Vec::with_capacity(2 * self.n);
        for (i, &v) in p.z().iter().enumerate() {
            horizontal.push(snap(v, self.h, if i < self.n { "x" } else { "y" })?);
        }
        let c = snap(p.t(), self.h_t(), "t")?;
        let ab: i64 = (0..self.n)
            .map(|i| horizontal[i] * horizontal[self.n + i])
            .sum();
        if (c + ab).rem_euclid(2) != 0 {
            return usage(format!(
                "point is off the lattice: vertical index {c} has the wrong parity for horizontal position"
            ));
        }
        Ok(self.index_of(&horizontal, (c + ab) / 2))
    }

    /// Samples a function of the physical coordinates at every node.
    pub fn sample<F: Fn(&GroupPoint) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.node_count()).map(|i| f(&self.point(i))).collect()
    }

    pub fn delta(&self, idx: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.node_count()];
        v[idx] = 1.0 / self.cell_volume();
        v
    }

    pub fn mean(&self, u: &[f64]) -> f64 {
        u.iter().sum::<f64>() / u.len() as f64
    }

    pub fn remove_mean(&self, u: &mut [f64]) {
        let mean = self.mean(u);
        u.iter_mut().for_each(|v| *v -= mean);
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }

    pub fn check(&self, u: &[f64]) -> Result<()> {
        check_len(self.node_count(), u.len())
    }
}

/// Sparse symmetric discrete sub-Laplacian in compressed-row form.
#[derive(Debug, Clone)]
pub struct SubLaplacian {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SubLaplacian {
    pub fn assemble(lat: &Lattice) -> Self {
        let count = lat.node_count();
        let w = 1.0 / (lat.h() * lat.h());
        let mut row_ptr = Vec::with_capacity(count + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..count {
            let mut entries: Vec<(u32, f64)> = vec![(i as u32, 0.0)];
            for dir in 0..2 * lat.n() {
                entries[0].1 += 2.0 * w;
                entries.push((lat.forward(dir)[i], -w));
                entries.push((lat.backward(dir)[i], -w));
            }
            entries.sort_by_key(|e| e.0);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
            for (c, v) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|e| self.vals[e] * u[self.cols[e] as usize])
                    .sum()
            })
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(move |e| (i, self.cols[e] as usize, self.vals[e]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .find(|&e| self.cols[e] as usize == j)
            .map_or(0.0, |e| self.vals[e])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.entries() {
            a[(i, j)] = v;
        }
        a
    }

    /// Largest `|L_ij − L_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinate-list text, one `row col value` triple per line.
    pub fn to_coo_text(&self) -> String {
        let mut s = String::new();
        for (i, j, v) in self.entries() {
            let _ = writeln!(s, "{i} {j} {v:.17e}");
        }
        s
    }
}

/// Forward differences `(u(x·g) − u(x))/h` along X₁..Xₙ, Y₁..Yₙ.
pub fn horizontal_gradient(lat: &Lattice, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    lat.check(u)?;
    let h = lat.h();
    Ok((0..2 * lat.n())
        .map(|dir| {
            lat.forward(dir)
                .iter()
                .zip(u)
                .map(|(&j, &ui)| (u[j as usize] - ui) / h)
                .collect()
        })
        .collect())
}

/// Centered differences `(u(x·g) − u(x·g⁻¹))/2h` along X₁..Xₙ, Y₁..Yₙ.
pub fn centered_gradient(lat: &Lattice, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    lat.check(u)?;
    let h = lat.h();
    Ok((0..2 * lat.n())
        .map(|dir| {
            lat.forward(dir)
                .iter()
                .zip(lat.backward(dir))
                .map(|(&p, &q)| (u[p as usize] - u[q as usize]) / (2.0 * h))
                .collect()
        })
        .collect())
}
