//! A lattice bundled with its operator, spectral decomposition, heat
//! quadrature and Riesz kernel cache.

use crate::error::Result;
use crate::kernels::RieszBank;
use crate::lattice::{Lattice, SubLaplacian};
use crate::spectral::{HeatQuadrature, SpectralDecomposition, DEFAULT_NODE_COUNT};

#[derive(Debug)]
pub struct LatticeContext {
    lattice: Lattice,
    operator: SubLaplacian,
    decomp: SpectralDecomposition,
    quad: HeatQuadrature,
    bank: RieszBank,
}

impl LatticeContext {
    /// Context on the default-spacing lattice for `(n, M)`.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        Self::from_lattice(Lattice::with_default_spacing(n, m)?)
    }

    pub fn from_lattice(lattice: Lattice) -> Result<Self> {
        Self::with_quadrature_nodes(lattice, DEFAULT_NODE_COUNT)
    }

    pub fn with_quadrature_nodes(lattice: Lattice, nodes: usize) -> Result<Self> {
        let operator = SubLaplacian::assemble(&lattice);
        let decomp = SpectralDecomposition::from_operator(&operator)?;
        let quad = HeatQuadrature::for_decomposition(&decomp, nodes)?;
        Ok(Self {
            lattice,
            operator,
            decomp,
            quad,
            bank: RieszBank::new(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn operator(&self) -> &SubLaplacian {
        &self.operator
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomp
    }

    pub fn quadrature(&self) -> &HeatQuadrature {
        &self.quad
    }

    pub fn bank(&self) -> &RieszBank {
        &self.bank
    }

    /// `L^s u`, zero mode projected out.
    pub fn power(&self, s: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.decomp.power(s, u)
    }

    /// Positivity-preserving Riesz potential of order `sigma`.
    pub fn riesz(&self, sigma: f64, f: &[f64]) -> Result<Vec<f64>> {
        self.bank
            .apply_positive(&self.lattice, &self.decomp, &self.quad, sigma, f)
    }
}
