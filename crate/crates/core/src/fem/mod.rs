//! P1 finite elements on a uniform triangulation of `(-1, 1)^2`.
//!
//! Boundary conditions are natural everywhere, so there is no Dirichlet
//! machinery: every node is a degree of freedom.

mod assembly;
pub mod io;
mod mesh;
mod pcg;
pub mod quadrature;
mod sparse;

use std::sync::Arc;

use thiserror::Error;

pub use assembly::{
    apply_quasilinear_term, assemble_mass, assemble_potential_term, assemble_weighted_stiffness,
    anisotropic_energy, potential_integral, potential_load, potential_matrix, potential_third_load,
    quasilinear_third_load, DoubleWell, PotentialTerm,
};
pub(crate) use assembly::{local_potential_matrix, local_stiffness};
pub use mesh::StructuredTriMesh;
pub use pcg::{pcg_solve, PcgOutcome, SolverError};
pub use sparse::{parallel_enabled, set_parallel, LinearMap, SparseOperator, SparsityPattern};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("mesh needs at least 2 divisions per axis, got {0}")]
    MeshTooCoarse(usize),
    #[error("expected {expected} element coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("expected a field with {expected} nodal values, got {got}")]
    FieldLength { expected: usize, got: usize },
    #[error("unsupported potential derivative order {0}")]
    UnsupportedOrder(u8),
    #[error("order-3 potential term needs two weight fields")]
    MissingWeights,
}

/// Scalar field: one value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField(pub Vec<f64>);

impl NodalField {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for NodalField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::DerefMut for NodalField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for NodalField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Mesh plus the operators every solve needs.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Arc<StructuredTriMesh>,
    pattern: Arc<SparsityPattern>,
    mass: SparseOperator,
    laplace: SparseOperator,
}

impl FemSpace {
    pub fn new(n_div: usize) -> Result<Self, FemError> {
        Ok(Self::from_mesh(StructuredTriMesh::new(n_div)?))
    }

    pub fn from_mesh(mesh: StructuredTriMesh) -> Self {
        let pattern = Arc::new(SparsityPattern::from_mesh(&mesh));
        let mass = assemble_mass(&mesh, &pattern);
        let identity = vec![[[1.0, 0.0], [0.0, 1.0]]; mesh.n_elements()];
        let laplace = assemble_weighted_stiffness(&mesh, &pattern, &identity).expect("one coefficient per element");
        Self { mesh: Arc::new(mesh), pattern, mass, laplace }
    }

    pub fn mesh(&self) -> &StructuredTriMesh {
        &self.mesh
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    /// Identity-coefficient stiffness matrix.
    pub fn laplace(&self) -> &SparseOperator {
        &self.laplace
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn check_field(&self, v: &[f64]) -> Result<(), FemError> {
        if v.len() != self.n_nodes() {
            return Err(FemError::FieldLength { expected: self.n_nodes(), got: v.len() });
        }
        Ok(())
    }

    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass.bilinear(a, b)
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.mass.bilinear(v, v).max(0.0).sqrt()
    }

    pub fn h1_seminorm(&self, v: &[f64]) -> f64 {
        self.laplace.bilinear(v, v).max(0.0).sqrt()
    }

    /// Full `H^1(Omega)` norm.
    pub fn h1_norm(&self, v: &[f64]) -> f64 {
        (self.mass.bilinear(v, v) + self.laplace.bilinear(v, v)).max(0.0).sqrt()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
