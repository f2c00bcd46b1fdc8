//! Closed oriented polygons (d = 2) and triangle meshes (d = 3).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::tensor::{assert_dim, Vector};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("shape has no elements")]
    Empty,
    #[error("element {element} references missing vertex {vertex}")]
    BadIndex { element: usize, vertex: usize },
    #[error("element {0} is degenerate")]
    DegenerateElement(usize),
    #[error("shape is not a closed manifold: {0}")]
    OpenManifold(&'static str),
    #[error("element orientations are inconsistent")]
    InconsistentOrientation,
    #[error("vertex {0} lies outside the open unit box")]
    OutOfDomain(usize),
}

/// A closed hypersurface: segments for d = 2, triangles for d = 3. Each
/// element lists its `d` vertex indices in orientation order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteShape<const D: usize> {
    vertices: Vec<Vector<D>>,
    elements: Vec<[usize; D]>,
}

impl<const D: usize> DiscreteShape<D> {
    /// Validates and wraps the given vertices and elements.
    pub fn new(vertices: Vec<Vector<D>>, elements: Vec<[usize; D]>) -> Result<Self, ShapeError> {
        assert_dim::<D>();
        if elements.is_empty() {
            return Err(ShapeError::Empty);
        }
        for (e, el) in elements.iter().enumerate() {
            for &v in el {
                if v >= vertices.len() {
                    return Err(ShapeError::BadIndex { element: e, vertex: v });
                }
            }
            for a in 0..D {
                for b in (a + 1)..D {
                    if el[a] == el[b] {
                        return Err(ShapeError::DegenerateElement(e));
                    }
                }
            }
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.0.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
                return Err(ShapeError::OutOfDomain(i));
            }
        }
        if D == 2 {
            check_closed_polygon(vertices.len(), &elements)?;
        } else {
            check_closed_surface(&elements)?;
        }
        Ok(DiscreteShape { vertices, elements })
    }

    /// A closed polygon through the given points, in order.
    pub fn closed_polyline(points: Vec<Vector<D>>) -> Result<Self, ShapeError> {
        let n = points.len();
        if n < 3 {
            return Err(ShapeError::Empty);
        }
        let elements = (0..n)
            .map(|i| {
                let mut el = [0; D];
                el[0] = i;
                el[1] = (i + 1) % n;
                el
            })
            .collect();
        Self::new(points, elements)
    }

    pub fn vertices(&self) -> &[Vector<D>] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; D]] {
        &self.elements
    }

    pub fn element_points(&self, e: usize) -> [Vector<D>; D] {
        let el = &self.elements[e];
        core::array::from_fn(|k| self.vertices[el[k]])
    }

    /// Length (d = 2) or area (d = 3) of element `e`.
    pub fn element_measure(&self, e: usize) -> f64 {
        let p = self.element_points(e);
        if D == 2 {
            (p[1] - p[0]).norm()
        } else {
            let a = p[1] - p[0];
            let b = p[2] - p[0];
            0.5 * crate::math::sqrt(cross3(&a.0, &b.0).iter().map(|c| c * c).sum::<f64>())
        }
    }

    /// Same shape with every vertex mapped through `f` and connectivity kept.
    pub fn map_vertices(&self, f: impl Fn(&Vector<D>) -> Vector<D>) -> Result<Self, ShapeError> {
        Self::new(self.vertices.iter().map(f).collect(), self.elements.clone())
    }

    /// Euclidean distance from `x` to element `e`.
    pub fn distance_to_element(&self, e: usize, x: &Vector<D>) -> f64 {
        let p = self.element_points(e);
        if D == 2 {
            point_segment_distance(x, &p[0], &p[1])
        } else {
            let q = |v: &Vector<D>| [v.0[0], v.0[1], v.0[2]];
            point_triangle_distance(&q(x), &q(&p[0]), &q(&p[1]), &q(&p[2]))
        }
    }

    /// Brute-force unsigned distance to the whole shape.
    pub fn distance(&self, x: &Vector<D>) -> f64 {
        (0..self.elements.len())
            .map(|e| self.distance_to_element(e, x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_closed_polygon<const D: usize>(n_vertices: usize, elements: &[[usize; D]]) -> Result<(), ShapeError> {
    let mut out_deg = alloc::vec![0usize; n_vertices];
    let mut in_deg = alloc::vec![0usize; n_vertices];
    for el in elements {
        out_deg[el[0]] += 1;
        in_deg[el[1]] += 1;
    }
    for v in 0..n_vertices {
        let used = out_deg[v] + in_deg[v] > 0;
        if !used {
            continue;
        }
        if out_deg[v] + in_deg[v] != 2 {
            return Err(ShapeError::OpenManifold("polygon vertex without exactly two segments"));
        }
        if out_deg[v] != 1 {
            return Err(ShapeError::InconsistentOrientation);
        }
    }
    Ok(())
}

fn check_closed_surface<const D: usize>(elements: &[[usize; D]]) -> Result<(), ShapeError> {
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for el in elements {
        for k in 0..D {
            let a = el[k];
            let b = el[(k + 1) % D];
            *directed.entry((a, b)).or_insert(0) += 1;
        }
    }
    for (&(a, b), &count) in &directed {
        let back = directed.get(&(b, a)).copied().unwrap_or(0);
        match count + back {
            1 => return Err(ShapeError::OpenManifold("boundary edge")),
            2 if count == 1 => {}
            2 => return Err(ShapeError::InconsistentOrientation),
            _ => return Err(ShapeError::OpenManifold("edge shared by more than two triangles")),
        }
    }
    Ok(())
}

pub(crate) fn cross3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn point_segment_distance<const D: usize>(x: &Vector<D>, a: &Vector<D>, b: &Vector<D>) -> f64 {
    let ab = *b - *a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((*x - *a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (*x - (*a + ab * t)).norm()
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Closest point on triangle `abc` to `p` (region classification on the
/// barycentric parameters), returned as a distance.
pub(crate) fn point_triangle_distance(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let ab = sub3(b, a);
    let ac = sub3(c, a);
    let ap = sub3(p, a);
    let d1 = dot3(&ab, &ap);
    let d2 = dot3(&ac, &ap);
    let closest: [f64; 3] = 'found: {
        if d1 <= 0.0 && d2 <= 0.0 {
            break 'found *a;
        }
        let bp = sub3(p, b);
        let d3 = dot3(&ab, &bp);
        let d4 = dot3(&ac, &bp);
        if d3 >= 0.0 && d4 <= d3 {
            break 'found *b;
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            let v = d1 / (d1 - d3);
            break 'found [a[0] + v * ab[0], a[1] + v * ab[1], a[2] + v * ab[2]];
        }
        let cp = sub3(p, c);
        let d5 = dot3(&ab, &cp);
        let d6 = dot3(&ac, &cp);
        if d6 >= 0.0 && d5 <= d6 {
            break 'found *c;
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            let w = d2 / (d2 - d6);
            break 'found [a[0] + w * ac[0], a[1] + w * ac[1], a[2] + w * ac[2]];
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            break 'found [b[0] + w * (c[0] - b[0]), b[1] + w * (c[1] - b[1]), b[2] + w * (c[2] - b[2])];
        }
        let denom = 1.0 / (va + vb + vc);
        let v = vb * denom;
        let w = vc * denom;
        [
            a[0] + ab[0] * v + ac[0] * w,
            a[1] + ab[1] * v + ac[1] * w,
            a[2] + ab[2] * v + ac[2] * w,
        ]
    };
    let diff = sub3(p, &closest);
    crate::math::sqrt(dot3(&diff, &diff))
}
