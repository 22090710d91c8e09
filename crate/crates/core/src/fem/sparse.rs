use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use super::mesh::StructuredTriMesh;

static PARALLEL: AtomicBool = AtomicBool::new(false);

/// Enables row-parallel matrix-vector products on the rayon pool.
///
/// Rows are computed independently, so results are bitwise identical to the
/// serial path; only wall time changes.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Rows below which the serial product is always used.
const PARALLEL_MIN_ROWS: usize = 4096;

/// Anything that maps a vector to a vector linearly.
pub trait LinearMap {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// CSR sparsity pattern of the node adjacency graph, plus the CSR slot of every
/// local element matrix entry.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    element_slots: Vec<[usize; 9]>,
}

impl SparsityPattern {
    pub fn from_mesh(mesh: &StructuredTriMesh) -> Self {
        let n = mesh.n_nodes();
        let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(7); n];
        for tri in mesh.elements() {
            for &a in tri {
                for &b in tri {
                    adj[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend(row.iter().map(|&c| c as u32));
            row_ptr.push(col_idx.len());
        }
        let slot = |r: usize, c: usize| -> usize {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            row_ptr[r] + cols.binary_search(&(c as u32)).expect("entry in pattern")
        };
        let element_slots = mesh
            .elements()
            .iter()
            .map(|tri| {
                let mut s = [0usize; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = slot(tri[a], tri[b]);
                    }
                }
                s
            })
            .collect();
        Self { n, row_ptr, col_idx, element_slots }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    /// CSR slots of the 3x3 local matrix of element `e`, row-major.
    pub fn element_slots(&self, e: usize) -> &[usize; 9] {
        &self.element_slots[e]
    }
}

/// Sparse symmetric operator on nodal fields.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    /// Adds a local element matrix into the global operator.
    #[inline]
    pub fn add_element(&mut self, e: usize, local: &[[f64; 3]; 3]) {
        let slots = self.pattern.element_slots(e);
        for a in 0..3 {
            for b in 0..3 {
                self.values[slots[3 * a + b]] += local[a][b];
            }
        }
    }

    /// `self += alpha * other`; both must share the same pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &SparseOperator) {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern), "operators on different patterns");
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let p = &self.pattern;
        let cols = &p.col_idx[p.row_ptr[r]..p.row_ptr[r + 1]];
        match cols.binary_search(&(c as u32)) {
            Ok(k) => self.values[p.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let p = &self.pattern;
        (0..self.n()).map(|i| self.values[p.row_ptr[i]..p.row_ptr[i + 1]].iter().sum()).collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let p = &self.pattern;
        let mut worst = 0.0_f64;
        for r in 0..self.n() {
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                let c = p.col_idx[k] as usize;
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.apply(x, &mut out);
        out
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        super::dot(x, &ay)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let p = &self.pattern;
        let mut d = vec![vec![0.0; n]; n];
        for (r, row) in d.iter_mut().enumerate() {
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                row[p.col_idx[k] as usize] = self.values[k];
            }
        }
        d
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let p = &self.pattern;
        let (lo, hi) = (p.row_ptr[r], p.row_ptr[r + 1]);
        let mut s = 0.0;
        for k in lo..hi {
            s += self.values[k] * x[p.col_idx[k] as usize];
        }
        s
    }
}

impl LinearMap for SparseOperator {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n());
        if parallel_enabled() && self.n() >= PARALLEL_MIN_ROWS && rayon::current_num_threads() > 1 {
            out.par_iter_mut().enumerate().for_each(|(r, o)| *o = self.row_dot(r, x));
        } else {
            for (r, o) in out.iter_mut().enumerate() {
                *o = self.row_dot(r, x);
            }
        }
    }
}
