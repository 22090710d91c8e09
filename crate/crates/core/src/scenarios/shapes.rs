//! Phase-field shapes built from signed distances.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{NodalField, StructuredTriMesh};

/// Boundary samples used for the star distance.
const STAR_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("shape parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("shape extends to {extent} but must stay within {limit} of the origin in each coordinate")]
    OutsideDomain { extent: f64, limit: f64 },
    #[error("a union needs at least one shape")]
    EmptyUnion,
    #[error("star needs at least 2 petals and r_inner < r_outer")]
    BadStar,
}

fn default_center() -> [f64; 2] {
    [0.0, 0.0]
}

/// Geometry of an initial or target phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Circle {
        #[serde(default = "default_center")]
        center: [f64; 2],
        radius: f64,
    },
    /// Axis-aligned square.
    Square {
        #[serde(default = "default_center")]
        center: [f64; 2],
        half_width: f64,
    },
    /// Regular hexagon with circumradius `radius` and a vertex at angle `rotation`.
    Hexagon {
        #[serde(default = "default_center")]
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        rotation: f64,
    },
    /// Polar star `r(t) = r_inner + (r_outer - r_inner) (1 + cos(k (t - rotation))) / 2`.
    Star {
        #[serde(default = "default_center")]
        center: [f64; 2],
        petals: u32,
        r_inner: f64,
        r_outer: f64,
        #[serde(default)]
        rotation: f64,
    },
    Union {
        shapes: Vec<ShapeSpec>,
    },
    /// The pure phase `y = 1`.
    FullDomain,
    Constant {
        value: f64,
    },
}

impl ShapeSpec {
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        ShapeSpec::Circle { center, radius }
    }

    fn positive(name: &'static str, value: f64) -> Result<(), ShapeError> {
        if value > 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(ShapeError::NonPositive { name, value })
        }
    }

    /// Largest coordinate magnitude reached by the shape, if it has a boundary.
    pub fn extent(&self) -> Result<Option<f64>, ShapeError> {
        let inf = |c: [f64; 2]| c[0].abs().max(c[1].abs());
        Ok(match self {
            ShapeSpec::Circle { center, radius } => {
                Self::positive("radius", *radius)?;
                Some(inf(*center) + radius)
            }
            ShapeSpec::Square { center, half_width } => {
                Self::positive("half_width", *half_width)?;
                Some(inf(*center) + half_width)
            }
            ShapeSpec::Hexagon { center, radius, rotation } => {
                Self::positive("radius", *radius)?;
                let ext = hexagon_vertices(*center, *radius, *rotation).iter().map(|v| inf(*v)).fold(0.0, f64::max);
                Some(ext)
            }
            ShapeSpec::Star { center, petals, r_inner, r_outer, .. } => {
                Self::positive("r_inner", *r_inner)?;
                if *petals < 2 || r_inner >= r_outer {
                    return Err(ShapeError::BadStar);
                }
                Some(inf(*center) + r_outer)
            }
            ShapeSpec::Union { shapes } => {
                if shapes.is_empty() {
                    return Err(ShapeError::EmptyUnion);
                }
                let mut ext: Option<f64> = None;
                for s in shapes {
                    if let Some(e) = s.extent()? {
                        ext = Some(ext.map_or(e, |x| x.max(e)));
                    }
                }
                ext
            }
            ShapeSpec::FullDomain | ShapeSpec::Constant { .. } => None,
        })
    }

    /// Signed distance to the boundary, positive inside. `None` for shapes
    /// without a boundary.
    pub fn signed_distance(&self, x: [f64; 2]) -> Option<f64> {
        match self {
            ShapeSpec::Circle { center, radius } => Some(radius - dist(x, *center)),
            ShapeSpec::Square { center, half_width } => {
                let q = [(x[0] - center[0]).abs() - half_width, (x[1] - center[1]).abs() - half_width];
                let outside = (q[0].max(0.0).powi(2) + q[1].max(0.0).powi(2)).sqrt();
                let inside = q[0].max(q[1]).min(0.0);
                Some(-(outside + inside))
            }
            ShapeSpec::Hexagon { center, radius, rotation } => {
                Some(convex_polygon_sd(&hexagon_vertices(*center, *radius, *rotation), x))
            }
            ShapeSpec::Star { center, petals, r_inner, r_outer, rotation } => {
                Some(star_sd(*center, *petals, *r_inner, *r_outer, *rotation, x))
            }
            ShapeSpec::Union { shapes } => {
                shapes.iter().filter_map(|s| s.signed_distance(x)).fold(None, |acc: Option<f64>, d| {
                    Some(acc.map_or(d, |a| a.max(d)))
                })
            }
            ShapeSpec::FullDomain | ShapeSpec::Constant { .. } => None,
        }
    }

    /// Checks parameters and that the shape keeps a margin of `margin` to the
    /// boundary of `(-1, 1)^2`.
    pub fn validate(&self, margin: f64) -> Result<(), ShapeError> {
        if let Some(extent) = self.extent()? {
            let limit = 1.0 - margin;
            if extent > limit {
                return Err(ShapeError::OutsideDomain { extent, limit });
            }
        }
        Ok(())
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn hexagon_vertices(center: [f64; 2], radius: f64, rotation: f64) -> Vec<[f64; 2]> {
    (0..6)
        .map(|k| {
            let t = rotation + PI * k as f64 / 3.0;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

fn segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let t = ((ax[0] * ab[0] + ax[1] * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
    dist(x, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Signed distance to a counter-clockwise convex polygon.
fn convex_polygon_sd(vertices: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let n = vertices.len();
    let mut d = f64::INFINITY;
    let mut inside = true;
    for i in 0..n {
        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
        d = d.min(segment_distance(x, a, b));
        let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
        if cross < 0.0 {
            inside = false;
        }
    }
    if inside {
        d
    } else {
        -d
    }
}

fn star_radius(petals: u32, r_inner: f64, r_outer: f64, rotation: f64, t: f64) -> f64 {
    r_inner + (r_outer - r_inner) * (0.5 + 0.5 * (petals as f64 * (t - rotation)).cos())
}

fn star_sd(center: [f64; 2], petals: u32, r_inner: f64, r_outer: f64, rotation: f64, x: [f64; 2]) -> f64 {
    let rel = [x[0] - center[0], x[1] - center[1]];
    let r = (rel[0] * rel[0] + rel[1] * rel[1]).sqrt();
    let theta = rel[1].atan2(rel[0]);
    let mut d2 = f64::INFINITY;
    let mut prev: Option<[f64; 2]> = None;
    let mut first = [0.0; 2];
    for k in 0..=STAR_SAMPLES {
        let t = 2.0 * PI * k as f64 / STAR_SAMPLES as f64;
        let rb = star_radius(petals, r_inner, r_outer, rotation, t);
        let p = [rb * t.cos(), rb * t.sin()];
        if k == 0 {
            first = p;
        }
        let p = if k == STAR_SAMPLES { first } else { p };
        if let Some(a) = prev {
            d2 = d2.min(segment_distance(rel, a, p).powi(2));
        }
        prev = Some(p);
    }
    let d = d2.sqrt();
    if r < star_radius(petals, r_inner, r_outer, rotation, theta) {
        d
    } else {
        -d
    }
}

/// `y(x) = tanh(sd(x) / (sqrt(2) eps))`, after checking a `3 eps` margin to the
/// domain boundary.
pub fn make_field(shape: &ShapeSpec, mesh: &StructuredTriMesh, eps: f64) -> Result<NodalField, ShapeError> {
    shape.validate(3.0 * eps)?;
    let values = match shape {
        ShapeSpec::FullDomain => vec![1.0; mesh.n_nodes()],
        ShapeSpec::Constant { value } => vec![*value; mesh.n_nodes()],
        _ => {
            let scale = SQRT_2 * eps;
            mesh.interpolate(|x| (shape.signed_distance(x).expect("bounded shape") / scale).tanh())
        }
    };
    Ok(NodalField::from(values))
}

/// Zero crossings of the piecewise linear field along all mesh edges.
pub fn level_set_points(mesh: &StructuredTriMesh, field: &[f64]) -> Vec<[f64; 2]> {
    let mut edges = std::collections::BTreeSet::new();
    for tri in mesh.elements() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut out = Vec::new();
    for (a, b) in edges {
        let (fa, fb) = (field[a], field[b]);
        if (fa > 0.0) != (fb > 0.0) && fa != fb {
            let t = fa / (fa - fb);
            let (pa, pb) = (mesh.node(a), mesh.node(b));
            out.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        }
    }
    out
}

/// Mean distance of the zero level set from `center`.
pub fn mean_level_set_radius(mesh: &StructuredTriMesh, field: &[f64], center: [f64; 2]) -> Option<f64> {
    let pts = level_set_points(mesh, field);
    if pts.is_empty() {
        return None;
    }
    Some(pts.iter().map(|p| dist(*p, center)).sum::<f64>() / pts.len() as f64)
}
