use alloc::vec;
use alloc::vec::Vec;

use super::blocks::{bending_direct, bending_inverse, membrane_direct, membrane_inverse};
use super::{eta_sigma, eta_sigma_derivative, EnergyBreakdown, EnergyMode, EnergyParams, EnergyTerms};
use crate::geometry::SignedShape;
use crate::grid::{simplex_rule, Deformation};
use crate::parallel::map_indexed;
use crate::stored_energy::{comparison_volume, comparison_volume_gradient};
use crate::tensor::{Matrix, Vector};

/// Energy and, when requested and feasible, its gradient with respect to the
/// free degrees of freedom.
#[derive(Debug, Clone)]
pub struct Assembly<const D: usize> {
    pub energy: EnergyBreakdown,
    pub gradient: Option<Vec<Vector<D>>>,
}

struct Local<const D: usize> {
    terms: EnergyTerms,
    grads: [Vector<D>; 4],
}

pub fn assemble_energy<const D: usize>(
    phi: &Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
) -> EnergyBreakdown {
    assemble(phi, s1, s2, params, false).energy
}

/// Gradient of the discrete energy, `None` if `phi` is infeasible.
pub fn assemble_gradient<const D: usize>(
    phi: &Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
) -> Option<Vec<Vector<D>>> {
    assemble(phi, s1, s2, params, true).gradient
}

/// Integrates the energy selected by `params.mode` over the grid of `phi`.
///
/// Simplex contributions are computed in parallel and summed in simplex
/// order, so results do not depend on the number of threads.
pub fn assemble<const D: usize>(
    phi: &Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
    with_gradient: bool,
) -> Assembly<D> {
    let grid = phi.grid();
    let min_det = phi.min_det();
    if !(min_det > 0.0) {
        return Assembly { energy: EnergyBreakdown { terms: None, min_det }, gradient: None };
    }
    let locals = map_indexed(grid.num_simplices(), |t| local(phi, s1, s2, params, t, with_gradient));
    let mut terms = EnergyTerms::default();
    for l in &locals {
        terms.matching += l.terms.matching;
        terms.membrane += l.terms.membrane;
        terms.bending += l.terms.bending;
        terms.volume += l.terms.volume;
    }
    let gradient = with_gradient.then(|| {
        let mut vertex_grads = vec![Vector::zero(); grid.num_vertices()];
        for (t, l) in locals.iter().enumerate() {
            for (j, &v) in grid.simplex(t).iter().enumerate() {
                vertex_grads[v] += l.grads[j];
            }
        }
        grid.reduce_to_dofs(&vertex_grads)
    });
    Assembly { energy: EnergyBreakdown { terms: Some(terms), min_det }, gradient }
}

fn local<const D: usize>(
    phi: &Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    p: &EnergyParams,
    t: usize,
    with_gradient: bool,
) -> Local<D> {
    let grid = phi.grid();
    let vol = grid.simplex_volume(t);
    let a = phi.jacobian(t);
    let det = a.det();
    let cof = a.cofactor();
    let b = cof.transpose() * (1.0 / det);
    let bt = b.transpose();
    let w = p.density;
    let symmetric = p.mode == EnergyMode::Symmetric;
    let band_active = p.c_match > 0.0 || p.c_mem > 0.0 || p.c_bend > 0.0;
    let match_weight = p.match_weight();

    let mut terms = EnergyTerms::default();
    let mut g_a = Matrix::zero();
    let mut grads = [Vector::zero(); 4];

    let vol_weight = p.vol_weight();
    if vol_weight > 0.0 {
        let (value, grad) = match p.mode {
            EnergyMode::Symmetric => {
                let inv = w.inverse_density(&a).expect("determinant checked");
                let inv_grad = w.inverse_density_gradient(&a).expect("determinant checked");
                (w.value(&a) + inv, w.gradient(&a) + inv_grad)
            }
            EnergyMode::Direct => (w.value(&a), w.gradient(&a)),
            EnergyMode::Comparison => (
                comparison_volume(&a).expect("determinant checked"),
                comparison_volume_gradient(&a).expect("determinant checked"),
            ),
        };
        terms.volume = vol_weight * vol * value;
        g_a += grad * (vol_weight * vol);
    }

    if band_active && near_band(phi, s1, s2, p, t, symmetric) {
        for qp in simplex_rule(D) {
            let omega = qp.weight * vol;
            let x = grid.simplex_point(t, &qp.bary);
            let y = phi.evaluate_in(t, &qp.bary);
            let d1 = s1.distance_at(&x);
            let eta1 = eta_sigma(d1, p.sigma, p.bump);
            let dist2 = s2.distance_jet(&y);
            if eta1 == 0.0 && !(symmetric && eta_sigma(dist2.0, p.sigma, p.bump) != 0.0) {
                continue;
            }
            let g1 = s1.geometry_with_distance(&x, p.tau, d1);
            let jet = s2.jet_with_distance(&y, p.tau, dist2);
            let g2 = &jet.sample;
            let d2 = g2.d;
            let (eta2, deta2) = if symmetric {
                (eta_sigma(d2, p.sigma, p.bump), eta_sigma_derivative(d2, p.sigma, p.bump))
            } else {
                (0.0, 0.0)
            };
            let n1 = g1.n;
            let n2 = g2.n;
            let p1 = g1.projection();

            // partial derivatives at this point: d2, n2, P₂H₂P₂ + n₂⊗n₂, A
            let mut g_d2 = 0.0;
            let mut g_n2 = Vector::zero();
            let mut g_x2 = Matrix::zero();

            if p.c_match > 0.0 {
                let diff = d2 - d1;
                let weight = eta1 + eta2 * det;
                terms.matching += omega * match_weight * weight * diff * diff;
                g_d2 += omega * match_weight * (2.0 * weight * diff + deta2 * det * diff * diff);
                if eta2 != 0.0 {
                    g_a += cof * (omega * match_weight * eta2 * diff * diff);
                }
            }

            if p.c_mem > 0.0 {
                if eta1 != 0.0 {
                    let blk = membrane_direct(w, &a, &n1, &p1, &n2);
                    let c = omega * p.c_mem * eta1;
                    terms.membrane += c * blk.value;
                    g_a += blk.g_mat * c;
                    g_n2 += blk.g_n2 * c;
                }
                if eta2 != 0.0 || deta2 != 0.0 {
                    let blk = membrane_inverse(w, &b, &n1, &p1, &n2);
                    let c = omega * p.c_mem * eta2 * det;
                    terms.membrane += c * blk.value;
                    g_d2 += omega * p.c_mem * deta2 * det * blk.value;
                    g_a += cof * (omega * p.c_mem * eta2 * blk.value) - bt * blk.g_mat * bt * c;
                    g_n2 += blk.g_n2 * c;
                }
            }

            if p.c_bend > 0.0 {
                if eta1 != 0.0 {
                    let l1 = p1 * g1.s_pow(-0.5) * p1;
                    let blk = bending_direct(w, &a, &l1, &n1, &n2, &g2.s_pow(0.5));
                    let c = omega * p.c_bend * eta1;
                    terms.bending += c * blk.value;
                    if with_gradient {
                        g_a += blk.g_mat * c;
                        g_n2 += blk.g_n2 * c;
                        g_x2 += g2.s_pow_pullback(0.5, &blk.g_root) * c;
                    }
                }
                if eta2 != 0.0 || deta2 != 0.0 {
                    let l2 = p1 * g1.s_pow(0.5) * p1;
                    let blk = bending_inverse(w, &b, &l2, &n1, &n2, &g2.s_pow(-0.5));
                    let c = omega * p.c_bend * eta2 * det;
                    terms.bending += c * blk.value;
                    if with_gradient {
                        g_d2 += omega * p.c_bend * deta2 * det * blk.value;
                        g_a += cof * (omega * p.c_bend * eta2 * blk.value) - bt * blk.g_mat * bt * c;
                        g_n2 += blk.g_n2 * c;
                        g_x2 += g2.s_pow_pullback(-0.5, &blk.g_root) * c;
                    }
                }
            }

            if with_gradient {
                let g_y = jet.chain(g_d2, &g_n2, &g_x2);
                for j in 0..=D {
                    grads[j] += g_y * qp.bary[j];
                }
            }
        }
    }

    if with_gradient {
        let lambda = grid.barycentric_gradients(t);
        for j in 0..=D {
            grads[j] += g_a.mul_vec(&lambda[j]);
        }
    }
    Local { terms, grads }
}

/// Conservative test whether any point of simplex `t` can lie in either band.
/// Interpolated distances are treated as `SLOPE`-Lipschitz, with `SLACK`
/// lattice spacings of extra margin, so only points with `η = 0` are skipped.
fn near_band<const D: usize>(
    phi: &Deformation<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    p: &EnergyParams,
    t: usize,
    symmetric: bool,
) -> bool {
    const SLOPE: f64 = 2.0;
    const SLACK: f64 = 4.0;
    let grid = phi.grid();
    let verts = grid.simplex(t);
    let centroid = [1.0 / (D + 1) as f64; 4];
    let x = grid.simplex_point(t, &centroid);
    let rx = verts.iter().map(|&v| (grid.vertex(v) - x).norm()).fold(0.0, f64::max);
    if s1.distance_at(&x).abs() <= p.sigma + SLOPE * rx + SLACK * s1.spacing() {
        return true;
    }
    if !symmetric {
        return false;
    }
    let y = phi.evaluate_in(t, &centroid);
    let ry = verts.iter().map(|&v| (phi.values()[v] - y).norm()).fold(0.0, f64::max);
    s2.distance_at(&y).abs() <= p.sigma + SLOPE * ry + SLACK * s2.spacing()
}
