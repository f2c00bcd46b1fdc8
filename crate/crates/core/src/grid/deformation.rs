use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{AdaptiveGrid, VertexKind};
use crate::tensor::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("target grid does not refine the deformation's grid")]
pub struct GridMismatch;

/// Continuous piecewise linear map on an [`AdaptiveGrid`], stored as one
/// value per grid vertex. Hanging vertex values always follow their
/// constraints; boundary values are kept as constructed.
#[derive(Debug, Clone)]
pub struct Deformation<const D: usize> {
    grid: Arc<AdaptiveGrid<D>>,
    values: Vec<Vector<D>>,
}

impl<const D: usize> Deformation<D> {
    pub fn identity(grid: Arc<AdaptiveGrid<D>>) -> Self {
        Self::interpolate(grid, |x| *x)
    }

    /// Nodal interpolant of `f`. Hanging vertices take their constrained
    /// values, so `f` is reproduced exactly only where it is linear on the
    /// coarse side.
    pub fn interpolate(grid: Arc<AdaptiveGrid<D>>, f: impl Fn(&Vector<D>) -> Vector<D>) -> Self {
        let values = (0..grid.num_vertices()).map(|v| f(&grid.vertex(v))).collect();
        let mut out = Deformation { grid, values };
        out.apply_constraints();
        out
    }

    fn apply_constraints(&mut self) {
        for v in 0..self.values.len() {
            if self.grid.vertex_kind(v) == VertexKind::Hanging {
                let mut x = Vector::zero();
                for &(w, c) in self.grid.constraint(v) {
                    x += self.values[w] * c;
                }
                self.values[v] = x;
            }
        }
    }

    pub fn grid(&self) -> &Arc<AdaptiveGrid<D>> {
        &self.grid
    }

    pub fn values(&self) -> &[Vector<D>] {
        &self.values
    }

    pub fn dofs(&self) -> Vec<Vector<D>> {
        (0..self.grid.num_dofs()).map(|d| self.values[self.grid.dof_vertex(d)]).collect()
    }

    /// Copy with the free values replaced by `dofs`.
    pub fn with_dofs(&self, dofs: &[Vector<D>]) -> Self {
        assert_eq!(dofs.len(), self.grid.num_dofs());
        let mut out = self.clone();
        for (d, x) in dofs.iter().enumerate() {
            out.values[self.grid.dof_vertex(d)] = *x;
        }
        out.apply_constraints();
        out
    }

    /// Copy with `t * direction` added to the free values.
    pub fn displaced(&self, t: f64, direction: &[Vector<D>]) -> Self {
        let dofs: Vec<Vector<D>> = self.dofs().iter().zip(direction).map(|(x, p)| *x + *p * t).collect();
        self.with_dofs(&dofs)
    }

    /// `φ(x)`; points outside the box use the affine extension of the
    /// nearest boundary simplex.
    pub fn evaluate(&self, x: &Vector<D>) -> Vector<D> {
        let (t, bary) = self.grid.locate(x);
        self.evaluate_in(t, &bary)
    }

    /// `φ` at barycentric coordinates in simplex `t`.
    pub fn evaluate_in(&self, t: usize, bary: &[f64; 4]) -> Vector<D> {
        let mut y = Vector::zero();
        for (j, &v) in self.grid.simplex(t).iter().enumerate() {
            y += self.values[v] * bary[j];
        }
        y
    }

    /// Constant Jacobian `Dφ` on simplex `t`.
    pub fn jacobian(&self, t: usize) -> Matrix<D> {
        let grads = self.grid.barycentric_gradients(t);
        let mut a = Matrix::zero();
        for (j, &v) in self.grid.simplex(t).iter().enumerate() {
            a += self.values[v].outer(&grads[j]);
        }
        a
    }

    /// Smallest Jacobian determinant over all simplices.
    pub fn min_det(&self) -> f64 {
        (0..self.grid.num_simplices()).map(|t| self.jacobian(t).det()).fold(f64::INFINITY, f64::min)
    }

    /// The same map represented on a refinement of its grid.
    pub fn prolong(&self, fine: Arc<AdaptiveGrid<D>>) -> Result<Self, GridMismatch> {
        if !fine.refines(&self.grid) {
            return Err(GridMismatch);
        }
        Ok(Self::interpolate(fine, |x| self.evaluate(x)))
    }
}

impl<const D: usize> AdaptiveGrid<D> {
    /// Sums per-vertex gradients onto the free degrees of freedom, routing
    /// hanging vertices through their constraints.
    pub fn reduce_to_dofs(&self, vertex_grads: &[Vector<D>]) -> Vec<Vector<D>> {
        let mut out = alloc::vec![Vector::zero(); self.num_dofs()];
        for (v, g) in vertex_grads.iter().enumerate() {
            match self.vertex_kind(v) {
                VertexKind::Free(d) => out[d] += *g,
                VertexKind::Boundary => {}
                VertexKind::Hanging => {
                    for &(w, c) in self.constraint(v) {
                        if let VertexKind::Free(d) = self.vertex_kind(w) {
                            out[d] += *g * c;
                        }
                    }
                }
            }
        }
        out
    }
}
