use std::sync::Arc;

use proptest::prelude::*;
use shellmatch_core::diagnostics::band_inclusion_check;
use shellmatch_core::energy::{assemble_energy, classifier, d_tt, inverse_classifier, inverse_projected_block};
use shellmatch_core::geometry::Lattice;
use shellmatch_core::stored_energy::{bounded, bounded_profile};
use shellmatch_core::tensor::{projection, reg_abs, rotation_to, spd_sqrt_pair, SymEigen};
use shellmatch_core::{AdaptiveGrid, Deformation, EnergyParams, Matrix, SignedShape, Vector};

fn mat<const D: usize>(range: f64) -> impl Strategy<Value = Matrix<D>> {
    prop::array::uniform::<_, D>(prop::array::uniform::<_, D>(-range..range)).prop_map(Matrix)
}

fn mat2(range: f64) -> impl Strategy<Value = Matrix<2>> {
    mat::<2>(range)
}

fn mat3(range: f64) -> impl Strategy<Value = Matrix<3>> {
    mat::<3>(range)
}

fn unit3() -> impl Strategy<Value = Vector<3>> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(z, a)| {
        let r = (1.0 - z * z).sqrt();
        Vector([r * a.cos(), r * a.sin(), z])
    })
}

fn rot3() -> impl Strategy<Value = Matrix<3>> {
    (unit3(), 0.0..std::f64::consts::TAU).prop_map(|(e, a)| {
        let q = rotation_to(&e).unwrap();
        let (s, c) = a.sin_cos();
        q * Matrix([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    })
}

/// SPD with `n` as an eigenvector of eigenvalue 1.
fn shape_operator<const D: usize>(b: &Matrix<D>, n: &Vector<D>) -> Matrix<D> {
    let p = projection(n);
    p * (*b * b.transpose() + Matrix::identity() * 0.1) * p + n.outer(n)
}

fn close<const D: usize>(a: &Matrix<D>, b: &Matrix<D>) -> f64 {
    (*a - *b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cofactor_transpose_over_det_is_inverse(a in mat3(2.0)) {
        let det = a.det();
        prop_assume!(det.abs() > 0.05);
        let inv = a.cofactor().transpose() * (1.0 / det);
        prop_assert!(close(&(a * inv), &Matrix::identity()) < 1e-10);
    }

    #[test]
    fn reg_abs_commutes_and_floors(b in mat3(2.0), tau in 0.01..1.0f64) {
        let m = b.symmetric_part();
        let r = reg_abs(&m, tau);
        prop_assert!(close(&(m * r), &(r * m)) < 1e-10);
        let mut want = SymEigen::new(&m).values.map(|l| l.abs().max(tau));
        let mut got = SymEigen::new(&r).values;
        want.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (w, g) in want.iter().zip(&got) {
            prop_assert!((w - g).abs() < 1e-10);
        }
    }

    #[test]
    fn rotation_to_is_proper(e in unit3()) {
        let q = rotation_to(&e).unwrap();
        prop_assert!(close(&(q * q.transpose()), &Matrix::identity()) < 1e-12);
        prop_assert!((q.det() - 1.0).abs() < 1e-12);
        prop_assert!((q.mul_vec(&Vector::unit(2)) - e).norm() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent(n in unit3()) {
        let p = projection(&n);
        prop_assert!(close(&(p * p), &p) < 1e-13);
        prop_assert!(p.mul_vec(&n).norm() < 1e-14);
    }

    #[test]
    fn density_is_nonnegative(a in mat3(3.0), b in mat2(3.0)) {
        prop_assert!(bounded(&a) >= -1e-12);
        prop_assert!(bounded(&b) >= -1e-12);
    }

    #[test]
    fn density_is_frame_invariant_and_isotropic(a in mat3(2.0), q in rot3()) {
        let w = bounded(&a);
        prop_assert!((bounded(&(q * a)) - w).abs() < 1e-10);
        prop_assert!((bounded(&(a * q)) - w).abs() < 1e-10);
    }

    #[test]
    fn density_grows_like_a_power(a in mat3(1.0), scale in 10.0..40.0f64) {
        prop_assume!(a.norm() > 0.1);
        let a = a * (scale / a.norm());
        let p4 = a.norm().powi(4);
        prop_assert!(bounded(&a) >= p4 / 8.0 - 10.0);
        prop_assert!(bounded(&a) <= 4.0 * (1.0 + p4));
    }

    #[test]
    fn density_continuity_modulus(a in mat3(3.0), b in mat3(3.0)) {
        let bound = 3.0 * (a - b).norm() * (1.0 + a.norm().powi(3) + b.norm().powi(3));
        prop_assert!((bounded(&a) - bounded(&b)).abs() <= bound);
    }

    #[test]
    fn profile_is_midpoint_convex(s in (0.0..100.0f64, 0.0..100.0f64), t in (-10.0..10.0f64, -10.0..10.0f64)) {
        for dim in [2, 3] {
            let mid = bounded_profile(dim, (s.0 + s.1) / 2.0, (t.0 + t.1) / 2.0);
            let avg = (bounded_profile(dim, s.0, t.0) + bounded_profile(dim, s.1, t.1)) / 2.0;
            prop_assert!(mid <= avg + 1e-10 * (1.0 + avg.abs()));
        }
    }

    #[test]
    fn arithmetic_geometric_mean_chain(a in mat3(2.0)) {
        let det = a.det();
        prop_assume!(det > 0.0);
        prop_assert!(bounded(&a) >= bounded(&Matrix::<3>::identity()) - 1e-12);
        prop_assert!(a.norm().powi(3) >= 3f64.powf(1.5) * det * (1.0 - 1e-12));
    }

    #[test]
    fn determinant_identities_hold(a in mat3(2.0), n1 in unit3(), n2 in unit3(), bm in mat3(2.0), bn in mat3(2.0)) {
        prop_assume!(a.det() > 0.05);
        let m = shape_operator(&bm, &n1);
        let n = shape_operator(&bn, &n2);
        let (k1, k2) = (m.cofactor().bilinear(&n1, &n1), n.cofactor().bilinear(&n2, &n2));
        let tancof = a.cofactor().bilinear(&n2, &n1);
        let normal = a.bilinear(&n2, &n1) / a.det();
        prop_assert!((d_tt(&a, &n1, &n2).det() - tancof).abs() < 1e-10);
        prop_assert!((inverse_projected_block(&a, &n1, &n2).unwrap().det() - normal).abs() < 1e-10);
        prop_assert!((classifier(&m, &n, &a, &n1, &n2).unwrap().det() - (k2 / k1).sqrt() * tancof).abs() < 1e-10);
        prop_assert!((inverse_classifier(&m, &n, &a, &n1, &n2).unwrap().det() - (k1 / k2).sqrt() * normal).abs() < 1e-10);
    }

    #[test]
    fn pulled_back_curvature_gives_orthogonal_classifier(
        n1 in unit3(), n2 in unit3(), bm in mat3(2.0), bn in mat3(2.0), spin in 0.0..std::f64::consts::TAU, s in 0.2..3.0f64,
    ) {
        let m = shape_operator(&bm, &n1);
        let n = shape_operator(&bn, &n2);
        let (sn, c) = spin.sin_cos();
        let r = rotation_to(&n2).unwrap() * Matrix([[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]]) * rotation_to(&n1).unwrap().transpose();
        let (m_half, _) = spd_sqrt_pair(&m).unwrap();
        let (_, n_inv_half) = spd_sqrt_pair(&n).unwrap();
        let (p1, p2) = (projection(&n1), projection(&n2));
        let a = p2 * n_inv_half * p2 * r * p1 * m_half * p1 + n2.outer(&n1) * s;
        let lam = classifier(&m, &n, &a, &n1, &n2).unwrap();
        prop_assert!(close(&(lam.transpose() * lam), &Matrix::identity()) < 1e-9);
    }

    #[test]
    fn prolongation_keeps_determinants(seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 81)) {
        let coarse = Arc::new(AdaptiveGrid::<2>::uniform(3).unwrap());
        let fine = Arc::new(AdaptiveGrid::<2>::uniform(4).unwrap());
        let id = Deformation::identity(coarse);
        let dofs: Vec<Vector<2>> = id.dofs().iter().zip(&seed).map(|(x, (u, v))| *x + Vector([*u, *v]) * 0.03).collect();
        let phi = id.with_dofs(&dofs);
        prop_assume!(phi.min_det() > 0.0);
        let psi = phi.prolong(fine).unwrap();
        prop_assert!((psi.min_det() - phi.min_det()).abs() < 1e-13);
    }

    #[test]
    fn locate_contains_the_point(x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let s = SignedShape::from_fn(Lattice::new(64), |p: &Vector<2>| (*p - Vector([0.4, 0.55])).norm() - 0.2);
        let grid = AdaptiveGrid::build(2, 6, &s, &s, 0.02).unwrap();
        let p = Vector([x, y]);
        let (t, bary) = grid.locate(&p);
        prop_assert!(bary.iter().take(3).all(|&b| b >= -1e-12));
        prop_assert!((grid.simplex_point(t, &bary) - p).norm() < 1e-12);
    }

    #[test]
    fn geometry_samples_are_regularized(x in 0.2..0.8f64, y in 0.2..0.8f64, tau in 0.05..2.0f64) {
        let s = SignedShape::from_fn(Lattice::new(128), |p: &Vector<2>| (*p - Vector([0.5, 0.5])).norm() - 0.2);
        let g = s.eval_geometry(&Vector([x, y]), tau).unwrap();
        prop_assert!(g.s.asymmetry() < 1e-12);
        prop_assert!(SymEigen::new(&g.s).values.iter().all(|&l| l >= tau * (1.0 - 1e-12)));
        let k_alt = g.s.det() / g.s.bilinear(&g.n, &g.n);
        prop_assert!((g.k - k_alt).abs() < 1e-8 * (1.0 + g.k.abs()));
    }

    #[test]
    fn identity_passes_its_own_band(sigma in 0.005..0.1f64, r in 0.1..0.3f64) {
        let s = SignedShape::from_fn(Lattice::new(128), move |p: &Vector<2>| (*p - Vector([0.5, 0.5])).norm() - r);
        let grid = Arc::new(AdaptiveGrid::<2>::uniform(5).unwrap());
        let check = band_inclusion_check(&Deformation::identity(grid), &s, &s, sigma, sigma);
        prop_assert!(check.pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shell_weights_off_leaves_volume(c_vol in 0.1..2.0f64, seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 225)) {
        let s1 = SignedShape::from_fn(Lattice::new(128), |p: &Vector<2>| (*p - Vector([0.5, 0.5])).norm() - 0.2);
        let s2 = SignedShape::from_fn(Lattice::new(128), |p: &Vector<2>| (*p - Vector([0.52, 0.5])).norm() - 0.22);
        let grid = Arc::new(AdaptiveGrid::<2>::uniform(4).unwrap());
        let id = Deformation::identity(grid);
        let dofs: Vec<Vector<2>> = id.dofs().iter().zip(&seed).map(|(x, (u, v))| *x + Vector([*u, *v]) * 0.01).collect();
        let phi = id.with_dofs(&dofs);
        let params = EnergyParams { sigma: 0.1, c_vol, ..Default::default() };
        let vol_only = EnergyParams { c_match: 0.0, c_mem: 0.0, c_bend: 0.0, ..params };
        let full = assemble_energy(&phi, &s1, &s2, &params).terms.unwrap();
        let reduced = assemble_energy(&phi, &s1, &s2, &vol_only).terms.unwrap();
        prop_assert_eq!(reduced.total(), reduced.volume);
        prop_assert_eq!(reduced.volume, full.volume);
    }
}
