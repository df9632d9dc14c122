//! The constant matrices of one mesh, assembled once per run.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fespace::FeSpace;
use crate::forms::{assemble_aip, assemble_mass, assemble_stiffness, Quadratures};
use crate::mesh::TriMesh;
use crate::sparse::SparseMatrix;

/// P2 space `Z` for φ, P1 space `V` for μ and every matrix the scheme and
/// its diagnostics are built from.
#[derive(Debug, Clone)]
pub struct Operators {
    pub z: FeSpace,
    pub v: FeSpace,
    pub quad: Quadratures,
    pub alpha: f64,
    /// Interior-penalty matrix on `Z`.
    pub a: SparseMatrix,
    pub m_z: SparseMatrix,
    pub k_z: SparseMatrix,
    pub m_v: SparseMatrix,
    pub k_v: SparseMatrix,
    /// `∫ χ_i ν_j` with `χ_i ∈ Z`, `ν_j ∈ V`.
    pub m_zv: SparseMatrix,
    /// `∫ χ_i`, so that `∫ φ = mass_z · φ`.
    pub mass_z: Vec<f64>,
    pub mass_v: Vec<f64>,
    pub area: f64,
}

impl Operators {
    pub fn new(mesh: Arc<TriMesh>, alpha: f64, quad: Quadratures) -> Result<Self> {
        let z = FeSpace::p2(mesh.clone());
        let v = FeSpace::p1(mesh.clone());
        let a = assemble_aip(&z, alpha, &quad)?;
        let m_z = assemble_mass(&z, &z, &quad)?;
        let k_z = assemble_stiffness(&z, &quad)?;
        let m_v = assemble_mass(&v, &v, &quad)?;
        let k_v = assemble_stiffness(&v, &quad)?;
        let m_zv = assemble_mass(&z, &v, &quad)?;
        let mass_z = m_z.mul_vec(&vec![1.0; z.n_dofs]);
        let mass_v = m_v.mul_vec(&vec![1.0; v.n_dofs]);
        Ok(Self { area: mesh.area(), z, v, quad, alpha, a, m_z, k_z, m_v, k_v, m_zv, mass_z, mass_v })
    }

    pub fn with_default_quadrature(mesh: Arc<TriMesh>, alpha: f64) -> Result<Self> {
        Self::new(mesh, alpha, Quadratures::default())
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.z.mesh
    }

    pub fn n_phi(&self) -> usize {
        self.z.n_dofs
    }

    pub fn n_mu(&self) -> usize {
        self.v.n_dofs
    }

    pub fn check_phi(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.z.n_dofs {
            return Err(Error::SizeMismatch { expected: self.z.n_dofs, got: phi.len() });
        }
        Ok(())
    }

    pub fn check_mu(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.v.n_dofs {
            return Err(Error::SizeMismatch { expected: self.v.n_dofs, got: mu.len() });
        }
        Ok(())
    }

    /// `∫ φ` for `φ ∈ Z`.
    pub fn mass(&self, phi: &[f64]) -> f64 {
        crate::sparse::dot(&self.mass_z, phi)
    }
}
