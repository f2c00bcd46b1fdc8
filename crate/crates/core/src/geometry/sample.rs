//! Pointwise geometric quantities derived from a signed distance field.

use super::sdf::SignedShape;
use crate::tensor::{projection, reg_abs_scalar, reg_abs_scalar_derivative, Matrix, SymEigen, Vector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("point is within one lattice spacing of the domain boundary")]
    OutsideEvaluable,
}

/// Geometry of the level set through a point.
#[derive(Debug, Clone)]
pub struct GeometrySample<const D: usize> {
    pub d: f64,
    pub n: Vector<D>,
    /// Second differences of the distance field.
    pub hessian: Matrix<D>,
    /// Regularized shape operator, SPD with eigenvalues at least `τ`.
    pub s: Matrix<D>,
    /// Regularized Gaussian curvature `nᵀ cof(S) n`.
    pub k: f64,
    pub(crate) eigen: SymEigen<D>,
    pub(crate) tau: f64,
}

impl<const D: usize> GeometrySample<D> {
    pub fn projection(&self) -> Matrix<D> {
        projection(&self.n)
    }

    /// `S^p` for the regularized shape operator.
    pub fn s_pow(&self, p: f64) -> Matrix<D> {
        let tau = self.tau;
        self.eigen.map(|l| crate::math::powf(reg_abs_scalar(l, tau), p))
    }

    /// Pulls a gradient with respect to `S^p` back to the unregularized
    /// tangential Hessian `P H P + n⊗n`.
    pub(crate) fn s_pow_pullback(&self, p: f64, g: &Matrix<D>) -> Matrix<D> {
        let tau = self.tau;
        self.eigen.pullback(
            |l| crate::math::powf(reg_abs_scalar(l, tau), p),
            |l| {
                let a = reg_abs_scalar(l, tau);
                p * crate::math::powf(a, p - 1.0) * reg_abs_scalar_derivative(l, tau)
            },
            g,
        )
    }
}

/// A geometry sample together with the derivatives of its raw fields with
/// respect to the evaluation point.
#[derive(Debug, Clone)]
pub struct GeometryJet<const D: usize> {
    pub sample: GeometrySample<D>,
    /// Gradient of the interpolated distance.
    pub grad_d: Vector<D>,
    /// `∂n_i/∂y_j`.
    pub dn: Matrix<D>,
    /// `∂H/∂y_k`.
    pub dhessian: [Matrix<D>; D],
}

impl<const D: usize> GeometryJet<D> {
    /// Gradient with respect to the evaluation point of a function of
    /// `(d, n, P H P + n⊗n)` given its partial derivatives.
    pub fn chain(&self, g_d: f64, g_n: &Vector<D>, g_x: &Matrix<D>) -> Vector<D> {
        let s = &self.sample;
        let n = s.n;
        let p = projection(&n);
        let h = &s.hessian;
        let g_h = p * *g_x * p;
        let g_p = *g_x * p * *h + *h * p * *g_x;
        let mut gn = *g_n + (*g_x + g_x.transpose()).mul_vec(&n) - (g_p + g_p.transpose()).mul_vec(&n);
        if !gn.is_finite() {
            gn = Vector::zero();
        }
        let mut out = self.grad_d * g_d + self.dn.tr_mul_vec(&gn);
        for k in 0..D {
            out[k] += g_h.frobenius_dot(&self.dhessian[k]);
        }
        out
    }
}

/// Catmull–Rom weights and their derivatives for the four nodes around
/// parameter `t` in `[0, 1]`.
fn keys_weights(t: f64) -> ([f64; 4], [f64; 4]) {
    let (t2, t3) = (t * t, t * t * t);
    (
        [(-t3 + 2.0 * t2 - t) / 2.0, (3.0 * t3 - 5.0 * t2 + 2.0) / 2.0, (-3.0 * t3 + 4.0 * t2 + t) / 2.0, (t3 - t2) / 2.0],
        [(-3.0 * t2 + 4.0 * t - 1.0) / 2.0, (9.0 * t2 - 10.0 * t) / 2.0, (-9.0 * t2 + 8.0 * t + 1.0) / 2.0, (3.0 * t2 - 2.0 * t) / 2.0],
    )
}

struct Stencil<const D: usize> {
    g: Vector<D>,
    h: Matrix<D>,
}

impl<const D: usize> SignedShape<D> {
    fn clamp_node(&self, idx: &[usize; D]) -> [usize; D] {
        let c = self.lattice().cells;
        core::array::from_fn(|k| idx[k].clamp(1, c - 1))
    }

    /// Central-difference gradient and Hessian at a lattice node. Nodes on the
    /// boundary reuse the nearest interior stencil.
    fn node_stencil(&self, idx: &[usize; D], st: &[usize; D]) -> Stencil<D> {
        let lat = self.lattice();
        let h = lat.spacing();
        let c = self.clamp_node(idx);
        let f = (0..D).map(|k| c[k] * st[k]).sum::<usize>();
        let v = self.values();
        let mut g = Vector::zero();
        let mut hm = Matrix::zero();
        for i in 0..D {
            g[i] = (v[f + st[i]] - v[f - st[i]]) / (2.0 * h);
            hm[(i, i)] = (v[f + st[i]] - 2.0 * v[f] + v[f - st[i]]) / (h * h);
            for j in 0..i {
                let x = (v[f + st[i] + st[j]] - v[f + st[i] - st[j]] - v[f - st[i] + st[j]] + v[f - st[i] - st[j]])
                    / (4.0 * h * h);
                hm[(i, j)] = x;
                hm[(j, i)] = x;
            }
        }
        Stencil { g, h: hm }
    }

    fn strides(&self) -> [usize; D] {
        let n = self.lattice().points_per_axis();
        let mut st = [1usize; D];
        for k in 1..D {
            st[k] = st[k - 1] * n;
        }
        st
    }

    fn evaluable(&self, x: &Vector<D>) -> bool {
        let h = self.spacing();
        (0..D).all(|k| x[k] >= h && x[k] <= 1.0 - h)
    }

    /// Multilinear interpolation of the nodal stencils at `x`, with exact
    /// derivatives of the interpolants when `derivatives` is set. Coordinates
    /// are clamped into the evaluable region and clamped axes get zero
    /// derivative.
    fn interpolate(&self, x: &Vector<D>, derivatives: bool) -> (Stencil<D>, Matrix<D>, [Matrix<D>; D]) {
        let lat = self.lattice();
        let h = lat.spacing();
        let cells = lat.cells;
        let st = self.strides();
        let mut base = [0usize; D];
        let mut t = [0.0; D];
        let mut free = [derivatives; D];
        for k in 0..D {
            let mut xk = x[k];
            if xk < h {
                xk = h;
                free[k] = false;
            } else if xk > 1.0 - h {
                xk = 1.0 - h;
                free[k] = false;
            }
            let i = (crate::math::floor(xk / h) as usize).min(cells - 1);
            base[k] = i;
            t[k] = xk / h - i as f64;
        }
        let mut g = Vector::zero();
        let mut hm = Matrix::zero();
        let mut dg = Matrix::zero();
        let mut dh = [Matrix::zero(); D];
        for corner in 0..(1usize << D) {
            let mut idx = base;
            let mut w = 1.0;
            let mut dw = [1.0; D];
            for k in 0..D {
                let bit = (corner >> k) & 1;
                idx[k] += bit;
                let (wk, dk) = if bit == 1 { (t[k], 1.0 / h) } else { (1.0 - t[k], -1.0 / h) };
                w *= wk;
                for (m, slot) in dw.iter_mut().enumerate() {
                    *slot *= if m == k { dk } else { wk };
                }
            }
            let s = self.node_stencil(&idx, &st);
            g += s.g * w;
            hm += s.h * w;
            for m in 0..D {
                if !free[m] {
                    continue;
                }
                for i in 0..D {
                    dg[(i, m)] += dw[m] * s.g[i];
                }
                dh[m] += s.h * dw[m];
            }
        }
        (Stencil { g, h: hm }, dg, dh)
    }

    /// Interpolated distance at `x`, clamped like the geometry queries.
    pub fn distance_at(&self, x: &Vector<D>) -> f64 {
        self.distance_jet(x).0
    }

    /// Cubic convolution of the lattice distances, which is C¹ so that the
    /// matching term has continuous derivatives. Clamped axes get zero
    /// derivative.
    pub(crate) fn distance_jet(&self, x: &Vector<D>) -> (f64, Vector<D>) {
        let lat = self.lattice();
        let h = lat.spacing();
        let cells = lat.cells;
        let st = self.strides();
        let mut off = [[0usize; 4]; D];
        let mut w = [[0.0; 4]; D];
        let mut dw = [[0.0; 4]; D];
        for k in 0..D {
            let xk = x[k].clamp(h, 1.0 - h);
            let i = (crate::math::floor(xk / h) as usize).min(cells - 1);
            for (s, o) in off[k].iter_mut().enumerate() {
                *o = (i + s).saturating_sub(1).min(cells) * st[k];
            }
            let (wk, dk) = keys_weights(xk / h - i as f64);
            w[k] = wk;
            if x[k] >= h && x[k] <= 1.0 - h {
                dw[k] = dk.map(|v| v / h);
            }
        }
        let values = self.values();
        let mut d = 0.0;
        let mut grad = Vector::zero();
        for corner in 0..(1usize << (2 * D)) {
            let mut flat = 0;
            let mut weight = 1.0;
            let mut partial = [1.0; D];
            for k in 0..D {
                let s = (corner >> (2 * k)) & 3;
                flat += off[k][s];
                weight *= w[k][s];
                for (m, p) in partial.iter_mut().enumerate() {
                    *p *= if m == k { dw[k][s] } else { w[k][s] };
                }
            }
            let v = values[flat];
            d += weight * v;
            for m in 0..D {
                grad[m] += partial[m] * v;
            }
        }
        (d, grad)
    }

    /// Geometry at `x`, clamping points near the boundary of the box.
    pub fn eval_geometry_clamped(&self, x: &Vector<D>, tau: f64) -> GeometrySample<D> {
        self.geometry_with_distance(x, tau, self.distance_at(x))
    }

    /// Geometry at `x`.
    pub fn eval_geometry(&self, x: &Vector<D>, tau: f64) -> Result<GeometrySample<D>, GeometryError> {
        if !self.evaluable(x) {
            return Err(GeometryError::OutsideEvaluable);
        }
        Ok(self.eval_geometry_clamped(x, tau))
    }

    /// Geometry at `x` together with its derivatives in `x`.
    pub fn eval_jet(&self, x: &Vector<D>, tau: f64) -> GeometryJet<D> {
        self.jet_with_distance(x, tau, self.distance_jet(x))
    }

    /// [`Self::eval_geometry_clamped`] with a known `distance_at(x)`.
    pub(crate) fn geometry_with_distance(&self, x: &Vector<D>, tau: f64, d: f64) -> GeometrySample<D> {
        let (st, _, _) = self.interpolate(x, false);
        sample_from(d, unit_or_default(&st.g), st.h, tau)
    }

    /// [`Self::eval_jet`] with a known `distance_jet(x)`.
    pub(crate) fn jet_with_distance(&self, x: &Vector<D>, tau: f64, (d, grad_d): (f64, Vector<D>)) -> GeometryJet<D> {
        let (st, dg, dhessian) = self.interpolate(x, true);
        let gn = st.g.norm();
        let n = unit_or_default(&st.g);
        let dn = if gn > GRAD_FLOOR { projection(&n) * dg * (1.0 / gn) } else { Matrix::zero() };
        let sample = sample_from(d, n, st.h, tau);
        GeometryJet { sample, grad_d, dn, dhessian }
    }

    /// Largest spectral norm of the lattice Hessian over nodes with
    /// `|d| ≤ h`, inverted.
    pub fn curvature_radius(&self) -> f64 {
        let lat = self.lattice();
        let h = lat.spacing();
        let mut sup: f64 = 0.0;
        for f in 0..lat.len() {
            if self.values()[f].abs() > h {
                continue;
            }
            let idx = lat.unflat(f);
            if idx.iter().any(|&i| i == 0 || i == lat.cells) {
                continue;
            }
            let eig = SymEigen::new(&self.node_stencil(&idx, &self.strides()).h);
            sup = eig.values.iter().fold(sup, |m, l| m.max(l.abs()));
        }
        if sup > 0.0 {
            1.0 / sup
        } else {
            f64::INFINITY
        }
    }
}

const GRAD_FLOOR: f64 = 1e-12;

fn unit_or_default<const D: usize>(g: &Vector<D>) -> Vector<D> {
    let gn = g.norm();
    if gn > GRAD_FLOOR {
        *g * (1.0 / gn)
    } else {
        Vector::unit(0)
    }
}

pub(crate) fn sample_from<const D: usize>(d: f64, n: Vector<D>, hessian: Matrix<D>, tau: f64) -> GeometrySample<D> {
    let p = projection(&n);
    let x = p * hessian * p + n.outer(&n);
    let eigen = SymEigen::new(&x);
    let s = eigen.map(|l| reg_abs_scalar(l, tau));
    let k = s.cofactor().bilinear(&n, &n);
    GeometrySample { d, n, hessian, s, k, eigen, tau }
}

/// Injectivity radius estimate of a pair of shapes.
pub fn injectivity_radius<const D: usize>(s1: &SignedShape<D>, s2: &SignedShape<D>) -> f64 {
    s1.curvature_radius().min(s2.curvature_radius())
}
