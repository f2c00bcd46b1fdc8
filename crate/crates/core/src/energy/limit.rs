use super::blocks::d_tt;
use super::EnergyParams;
use crate::geometry::{DiscreteShape, SignedShape};
use crate::grid::Deformation;
use crate::math;
use crate::tensor::Vector;

/// Surface energy on `shape1` that the direct narrow-band energy approaches
/// as the band shrinks: membrane and bending densities integrated over the
/// elements of `shape1`, plus the bulk term when `theta = 0`.
///
/// Segments use 3-point Gauss–Legendre, triangles the edge-midpoint rule.
/// Normals and shape operators come from the distance fields, `Dφ` from the
/// simplex containing each quadrature point.
pub fn surface_limit_energy<const D: usize>(
    phi: &Deformation<D>,
    shape1: &DiscreteShape<D>,
    s1: &SignedShape<D>,
    s2: &SignedShape<D>,
    params: &EnergyParams,
) -> f64 {
    let grid = phi.grid();
    let w = params.density;
    let mut surface = 0.0;
    for e in 0..shape1.elements().len() {
        let pts = shape1.element_points(e);
        let measure = shape1.element_measure(e);
        for (x, weight) in element_rule(&pts) {
            let g1 = s1.eval_geometry_clamped(&x, params.tau);
            let (t, bary) = grid.locate(&x);
            let a = phi.jacobian(t);
            let y = phi.evaluate_in(t, &bary);
            let g2 = s2.eval_geometry_clamped(&y, params.tau);
            let (n1, n2) = (g1.n, g2.n);
            let (p1, p2) = (g1.projection(), g2.projection());
            let mut density = 0.0;
            if params.c_mem > 0.0 {
                density += params.c_mem * w.value(&d_tt(&a, &n1, &n2));
            }
            if params.c_bend > 0.0 {
                let lambda = p2 * g2.s_pow(0.5) * p2 * a * p1 * g1.s_pow(-0.5) * p1 + n2.outer(&n1);
                density += params.c_bend * w.value(&lambda);
            }
            surface += weight * measure * density;
        }
    }
    let mut bulk = 0.0;
    if params.theta == 0 && params.c_vol > 0.0 {
        for t in 0..grid.num_simplices() {
            bulk += grid.simplex_volume(t) * w.value(&phi.jacobian(t));
        }
        bulk *= params.c_vol;
    }
    surface + bulk
}

fn element_rule<const D: usize>(pts: &[Vector<D>; D]) -> impl Iterator<Item = (Vector<D>, f64)> + '_ {
    let r = math::sqrt(0.6) / 2.0;
    let gauss = [(0.5 - r, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + r, 5.0 / 18.0)];
    (0..3).map(move |k| {
        if D == 2 {
            let (s, wt) = gauss[k];
            (pts[0] * (1.0 - s) + pts[1] * s, wt)
        } else {
            let (i, j) = ([0, 1, 2][k], [1, 2, 0][k]);
            ((pts[i] + pts[j]) * 0.5, 1.0 / 3.0)
        }
    })
}
