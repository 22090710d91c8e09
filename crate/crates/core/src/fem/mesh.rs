use super::FemError;

/// Uniform P1 triangulation of `(-1, 1)^2`.
///
/// Nodes are numbered row-major, `index = iy * (n_div + 1) + ix`. Every cell is
/// split along its `(ix, iy) -> (ix + 1, iy + 1)` diagonal, so all triangles are
/// congruent up to a reflection and interior nodes have six neighbours.
#[derive(Debug, Clone)]
pub struct StructuredTriMesh {
    n_div: usize,
    h: f64,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
}

impl StructuredTriMesh {
    pub fn new(n_div: usize) -> Result<Self, FemError> {
        if n_div < 2 {
            return Err(FemError::MeshTooCoarse(n_div));
        }
        let h = 2.0 / n_div as f64;
        let side = n_div + 1;
        let mut nodes = Vec::with_capacity(side * side);
        for iy in 0..side {
            for ix in 0..side {
                nodes.push([-1.0 + h * ix as f64, -1.0 + h * iy as f64]);
            }
        }
        let mut elements = Vec::with_capacity(2 * n_div * n_div);
        for iy in 0..n_div {
            for ix in 0..n_div {
                let v00 = iy * side + ix;
                let v10 = v00 + 1;
                let v01 = v00 + side;
                let v11 = v01 + 1;
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }
        let mut areas = Vec::with_capacity(elements.len());
        let mut grads = Vec::with_capacity(elements.len());
        for tri in &elements {
            let [a, b, c] = tri.map(|i| nodes[i]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            areas.push(0.5 * det);
            // gradients of barycentric coordinates
            let inv = 1.0 / det;
            grads.push([
                [(b[1] - c[1]) * inv, (c[0] - b[0]) * inv],
                [(c[1] - a[1]) * inv, (a[0] - c[0]) * inv],
                [(a[1] - b[1]) * inv, (b[0] - a[0]) * inv],
            ]);
        }
        Ok(Self { n_div, h, nodes, elements, areas, grads })
    }

    pub fn n_div(&self) -> usize {
        self.n_div
    }

    /// Mesh width along each axis.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn shape_grads(&self, e: usize) -> &[[f64; 2]; 3] {
        &self.grads[e]
    }

    /// Gradient of the P1 interpolant of `field` on element `e`.
    #[inline]
    pub fn element_gradient(&self, e: usize, field: &[f64]) -> [f64; 2] {
        let tri = &self.elements[e];
        let g = &self.grads[e];
        let mut out = [0.0; 2];
        for k in 0..3 {
            let v = field[tri[k]];
            out[0] += v * g[k][0];
            out[1] += v * g[k][1];
        }
        out
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Samples `f` at every node.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}
