use std::sync::Arc;

use super::quadrature::DEGREE4_RULE;
use super::{FemError, SparseOperator, SparsityPattern, StructuredTriMesh};
use crate::anisotropy::{Anisotropy2, AnisotropyError, Mat};

/// The smooth double well `psi(s) = (1 - s^2)^2 / 4`; its semiconvexity constant is 1.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleWell;

impl DoubleWell {
    pub const SEMICONVEXITY: f64 = 1.0;

    #[inline]
    pub fn value(s: f64) -> f64 {
        let t = 1.0 - s * s;
        0.25 * t * t
    }

    #[inline]
    pub fn d1(s: f64) -> f64 {
        s * s * s - s
    }

    #[inline]
    pub fn d2(s: f64) -> f64 {
        3.0 * s * s - 1.0
    }

    #[inline]
    pub fn d3(s: f64) -> f64 {
        6.0 * s
    }
}

/// Exact P1 mass matrix.
pub fn assemble_mass(mesh: &StructuredTriMesh, pattern: &Arc<SparsityPattern>) -> SparseOperator {
    let mut m = SparseOperator::zeros(pattern.clone());
    for e in 0..mesh.n_elements() {
        let a = mesh.area(e) / 12.0;
        let local = [[2.0 * a, a, a], [a, 2.0 * a, a], [a, a, 2.0 * a]];
        m.add_element(e, &local);
    }
    m
}

/// `K_ij = sum_e area_e grad(phi_i)^T C_e grad(phi_j)` with one coefficient matrix per element.
pub fn assemble_weighted_stiffness(
    mesh: &StructuredTriMesh,
    pattern: &Arc<SparsityPattern>,
    coeffs: &[Mat<2>],
) -> Result<SparseOperator, FemError> {
    if coeffs.len() != mesh.n_elements() {
        return Err(FemError::CoefficientCount { expected: mesh.n_elements(), got: coeffs.len() });
    }
    let mut k = SparseOperator::zeros(pattern.clone());
    for (e, c) in coeffs.iter().enumerate() {
        k.add_element(e, &local_stiffness(mesh, e, c));
    }
    Ok(k)
}

#[inline]
pub(crate) fn local_stiffness(mesh: &StructuredTriMesh, e: usize, c: &Mat<2>) -> [[f64; 3]; 3] {
    let g = mesh.shape_grads(e);
    let area = mesh.area(e);
    let mut local = [[0.0; 3]; 3];
    for b in 0..3 {
        let cg = [c[0][0] * g[b][0] + c[0][1] * g[b][1], c[1][0] * g[b][0] + c[1][1] * g[b][1]];
        for a in 0..3 {
            local[a][b] = area * (g[a][0] * cg[0] + g[a][1] * cg[1]);
        }
    }
    local
}

/// Discrete anisotropic energy `sum_e area_e A(grad y_h)`.
pub fn anisotropic_energy(mesh: &StructuredTriMesh, aniso: &Anisotropy2, y: &[f64]) -> f64 {
    (0..mesh.n_elements()).map(|e| mesh.area(e) * aniso.a_value(&mesh.element_gradient(e, y))).sum()
}

/// `(A'(grad y_h), grad phi_i)` for every node `i`; exact since `grad y_h` is element-wise constant.
pub fn apply_quasilinear_term(mesh: &StructuredTriMesh, aniso: &Anisotropy2, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_nodes()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        let flux = aniso.a_grad(&mesh.element_gradient(e, y));
        let g = mesh.shape_grads(e);
        let area = mesh.area(e);
        for k in 0..3 {
            out[tri[k]] += area * (flux[0] * g[k][0] + flux[1] * g[k][1]);
        }
    }
    out
}

/// `(A'''(grad y)[grad phi_i, grad p; grad z])` for every node `i`.
pub fn quasilinear_third_load(
    mesh: &StructuredTriMesh,
    aniso: &Anisotropy2,
    y: &[f64],
    z: &[f64],
    p: &[f64],
) -> Result<Vec<f64>, AnisotropyError> {
    let mut out = vec![0.0; mesh.n_nodes()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        let gz = mesh.element_gradient(e, z);
        if gz == [0.0, 0.0] {
            continue;
        }
        let gp = mesh.element_gradient(e, p);
        let t = aniso.a_third_apply(&mesh.element_gradient(e, y), &gz)?;
        let v = [t[0][0] * gp[0] + t[0][1] * gp[1], t[1][0] * gp[0] + t[1][1] * gp[1]];
        let g = mesh.shape_grads(e);
        let area = mesh.area(e);
        for k in 0..3 {
            out[tri[k]] += area * (v[0] * g[k][0] + v[1] * g[k][1]);
        }
    }
    Ok(out)
}

#[inline]
fn at_point(tri: &[usize; 3], l: &[f64; 3], v: &[f64]) -> f64 {
    l[0] * v[tri[0]] + l[1] * v[tri[1]] + l[2] * v[tri[2]]
}

/// `int psi(y_h)`.
pub fn potential_integral(mesh: &StructuredTriMesh, y: &[f64]) -> f64 {
    let mut total = 0.0;
    for (e, tri) in mesh.elements().iter().enumerate() {
        let mut s = 0.0;
        for (l, w) in DEGREE4_RULE.iter() {
            s += w * DoubleWell::value(at_point(tri, l, y));
        }
        total += mesh.area(e) * s;
    }
    total
}

/// `int psi'(y_h) phi_i`.
pub fn potential_load(mesh: &StructuredTriMesh, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_nodes()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        let area = mesh.area(e);
        for (l, w) in DEGREE4_RULE.iter() {
            let f = area * w * DoubleWell::d1(at_point(tri, l, y));
            for k in 0..3 {
                out[tri[k]] += f * l[k];
            }
        }
    }
    out
}

/// `int psi''(y_h) phi_j phi_i`.
pub fn potential_matrix(mesh: &StructuredTriMesh, pattern: &Arc<SparsityPattern>, y: &[f64]) -> SparseOperator {
    let mut m = SparseOperator::zeros(pattern.clone());
    for (e, tri) in mesh.elements().iter().enumerate() {
        m.add_element(e, &local_potential_matrix(mesh, e, tri, y));
    }
    m
}

#[inline]
pub(crate) fn local_potential_matrix(mesh: &StructuredTriMesh, e: usize, tri: &[usize; 3], y: &[f64]) -> [[f64; 3]; 3] {
    let area = mesh.area(e);
    let mut local = [[0.0; 3]; 3];
    for (l, w) in DEGREE4_RULE.iter() {
        let f = area * w * DoubleWell::d2(at_point(tri, l, y));
        for a in 0..3 {
            for b in 0..3 {
                local[a][b] += f * l[a] * l[b];
            }
        }
    }
    local
}

/// `int psi'''(y_h) z_h p_h phi_i`.
pub fn potential_third_load(mesh: &StructuredTriMesh, y: &[f64], z: &[f64], p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_nodes()];
    for (e, tri) in mesh.elements().iter().enumerate() {
        let area = mesh.area(e);
        for (l, w) in DEGREE4_RULE.iter() {
            let f = area * w * DoubleWell::d3(at_point(tri, l, y)) * at_point(tri, l, z) * at_point(tri, l, p);
            for k in 0..3 {
                out[tri[k]] += f * l[k];
            }
        }
    }
    out
}

/// Result of [`assemble_potential_term`].
#[derive(Debug, Clone)]
pub enum PotentialTerm {
    Vector(Vec<f64>),
    Matrix(SparseOperator),
}

/// Potential contributions by derivative order: 1 gives the load `psi'(y)`,
/// 2 the matrix `psi''(y)`, 3 the load `psi'''(y) z p` for the weights `(z, p)`.
pub fn assemble_potential_term(
    mesh: &StructuredTriMesh,
    pattern: &Arc<SparsityPattern>,
    y: &[f64],
    order: u8,
    weights: Option<(&[f64], &[f64])>,
) -> Result<PotentialTerm, FemError> {
    match order {
        1 => Ok(PotentialTerm::Vector(potential_load(mesh, y))),
        2 => Ok(PotentialTerm::Matrix(potential_matrix(mesh, pattern, y))),
        3 => {
            let (z, p) = weights.ok_or(FemError::MissingWeights)?;
            Ok(PotentialTerm::Vector(potential_third_load(mesh, y, z, p)))
        }
        other => Err(FemError::UnsupportedOrder(other)),
    }
}
