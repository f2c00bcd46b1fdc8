use super::*;
use crate::geometry::fixtures::circle;
use crate::geometry::{fast_march_sdf, Lattice, SignedShape};
use crate::grid::{simplex_rule, AdaptiveGrid, Deformation};
use crate::stored_energy::StoredEnergy;
use crate::tensor::{projection, Matrix, Vector};
use alloc::sync::Arc;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn circle_field(c: [f64; 2], r: f64) -> SignedShape<2> {
    SignedShape::from_fn(Lattice::new(256), move |x| (*x - Vector(c)).norm() - r)
}

fn ellipse_field(c: [f64; 2], axes: [f64; 2]) -> SignedShape<2> {
    // not a distance function away from the curve, which is fine for gradient checks
    SignedShape::from_fn(Lattice::new(256), move |x| {
        let u = (x[0] - c[0]) / axes[0];
        let v = (x[1] - c[1]) / axes[1];
        (math::sqrt(u * u + v * v) - 1.0) * axes[0].min(axes[1])
    })
}

fn sphere_field(c: [f64; 3], r: f64) -> SignedShape<3> {
    SignedShape::from_fn(Lattice::new(64), move |x| (*x - Vector(c)).norm() - r)
}

fn perturbed<const D: usize>(grid: &Arc<AdaptiveGrid<D>>, seed: u64, amount: f64) -> Deformation<D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = Deformation::identity(grid.clone());
    let dofs: Vec<Vector<D>> =
        id.dofs().iter().map(|x| *x + Vector(core::array::from_fn(|_| rng.gen_range(-amount..amount)))).collect();
    id.with_dofs(&dofs)
}

fn random_unit<const D: usize>(rng: &mut ChaCha8Rng) -> Vector<D> {
    loop {
        let v = Vector(core::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        if v.norm() > 0.2 {
            return v.normalized();
        }
    }
}

fn random_matrix<const D: usize>(rng: &mut ChaCha8Rng) -> Matrix<D> {
    Matrix(core::array::from_fn(|_| core::array::from_fn(|_| rng.gen_range(-2.0..2.0))))
}

/// SPD matrix with `n` as an eigenvector of eigenvalue 1.
fn shape_operator<const D: usize>(rng: &mut ChaCha8Rng, n: &Vector<D>) -> Matrix<D> {
    let b = random_matrix::<D>(rng);
    let p = projection(n);
    p * (b * b.transpose() + Matrix::identity() * 0.1) * p + n.outer(n)
}

fn fd_check<const D: usize>(phi: &Deformation<D>, s1: &SignedShape<D>, s2: &SignedShape<D>, params: &EnergyParams) {
    let grad = assemble_gradient(phi, s1, s2, params).expect("feasible");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eps = 1e-6;
    for _ in 0..20 {
        let dir: Vec<Vector<D>> = (0..grad.len()).map(|_| random_unit(&mut rng)).collect();
        let plus = assemble_energy(&phi.displaced(eps, &dir), s1, s2, params).total().unwrap();
        let minus = assemble_energy(&phi.displaced(-eps, &dir), s1, s2, params).total().unwrap();
        let fd = (plus - minus) / (2.0 * eps);
        let analytic: f64 = grad.iter().zip(&dir).map(|(g, v)| g.dot(v)).sum();
        let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-8);
        assert!(rel < 1e-4, "{:?}: fd {fd} analytic {analytic} rel {rel}", params.mode);
    }
}

#[test]
fn bump_support_peak_and_mass() {
    let sigma = 0.05;
    for bump in [Bump::Quartic, Bump::Cosine] {
        assert_eq!(eta_sigma(sigma, sigma, bump), 0.0);
        assert_eq!(eta_sigma(-sigma, sigma, bump), 0.0);
        let n = 20000;
        let h = 2.0 * sigma / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let s = -sigma + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            mass += w * eta_sigma(s, sigma, bump);
        }
        assert!((mass * h / 3.0 - 1.0).abs() < 1e-8);
        for s in [-0.03, 0.0, 0.02, 0.049] {
            let fd = (eta_sigma(s + 1e-7, sigma, bump) - eta_sigma(s - 1e-7, sigma, bump)) / 2e-7;
            assert!((fd - eta_sigma_derivative(s, sigma, bump)).abs() < 1e-4 * (1.0 + fd.abs()));
        }
    }
    assert!((eta_sigma(0.0, sigma, Bump::Quartic) - 15.0 / 16.0 / sigma).abs() < 1e-12);
}

#[test]
fn param_validation() {
    assert!(EnergyParams::default().validate(2).is_ok());
    let p = EnergyParams { c_mem: -1.0, ..Default::default() };
    assert_eq!(p.validate(2), Err(ParamError::Negative("c_mem")));
    let p = EnergyParams { theta: 2, ..Default::default() };
    assert_eq!(p.validate(2), Err(ParamError::Theta));
    let p = EnergyParams { q: 2.0, ..Default::default() };
    assert_eq!(p.validate(3), Err(ParamError::WeakMatching));
    assert!(EnergyParams { q: 2.0, theta: 0, ..Default::default() }.validate(3).is_ok());
}

#[test]
fn blocks_reduce_to_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = random_unit::<3>(&mut rng);
    let s = shape_operator(&mut rng, &n);
    let id = Matrix::<3>::identity();
    assert!((d_tt(&id, &n, &n) - id).max_abs() < 1e-14);
    assert!((classifier(&s, &s, &id, &n, &n).unwrap() - id).max_abs() < 1e-12);
    assert!((inverse_projected_block(&id, &n, &n).unwrap() - id).max_abs() < 1e-14);
    assert!(inverse_projected_block(&(id * -1.0), &n, &n).is_err());
}

#[test]
fn offset_circles_worked_example() {
    // (-3,3)^2 scaled into the unit box: unit circles centred at (±1, 0)
    let lat = Lattice::with_spacing(1.0 / 512.0).unwrap();
    let s1 = fast_march_sdf(&circle([4.0 / 6.0, 0.5], 1.0 / 6.0, 4000), lat);
    let s2 = fast_march_sdf(&circle([2.0 / 6.0, 0.5], 1.0 / 6.0, 4000), lat);
    let x = Vector([0.5, 0.5]);
    let g1 = s1.eval_geometry(&x, 0.1).unwrap();
    let g2 = s2.eval_geometry(&x, 0.1).unwrap();
    let dtt = d_tt(&Matrix::identity(), &g1.n, &g2.n);
    let expected = Matrix([[-1.0, 0.0], [0.0, 1.0]]);
    assert!((dtt - expected).max_abs() < 5e-2, "{dtt:?}");
}

fn determinant_identities<const D: usize>(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..500 {
        let a = loop {
            let a = random_matrix::<D>(&mut rng);
            if a.det() > 0.05 {
                break a;
            }
        };
        let n1 = random_unit::<D>(&mut rng);
        let n2 = random_unit::<D>(&mut rng);
        let m = shape_operator(&mut rng, &n1);
        let n = shape_operator(&mut rng, &n2);
        let k1 = m.cofactor().bilinear(&n1, &n1);
        let k2 = n.cofactor().bilinear(&n2, &n2);
        let tancof = a.cofactor().bilinear(&n2, &n1);
        let scale = 1.0 + tancof.abs();

        assert!((d_tt(&a, &n1, &n2).det() - tancof).abs() < 1e-10 * scale);
        let inv = inverse_projected_block(&a, &n1, &n2).unwrap();
        assert!((inv.det() - a.bilinear(&n2, &n1) / a.det()).abs() < 1e-10 * (1.0 + inv.det().abs()));
        let lam = classifier(&m, &n, &a, &n1, &n2).unwrap();
        let expected = math::sqrt(k2 / k1) * tancof;
        assert!((lam.det() - expected).abs() < 1e-10 * (1.0 + expected.abs()));
        let lam_inv = inverse_classifier(&m, &n, &a, &n1, &n2).unwrap();
        let expected = math::sqrt(k1 / k2) * a.bilinear(&n2, &n1) / a.det();
        assert!((lam_inv.det() - expected).abs() < 1e-10 * (1.0 + expected.abs()));
    }
}

#[test]
fn determinant_identities_2d() {
    determinant_identities::<2>(2);
}

#[test]
fn determinant_identities_3d() {
    determinant_identities::<3>(3);
}

#[test]
fn null_configuration() {
    let s = circle_field([0.5, 0.5], 0.2);
    let grid = Arc::new(AdaptiveGrid::build(3, 6, &s, &s, 0.25).unwrap());
    let phi = Deformation::identity(grid);
    for mode in [EnergyMode::Symmetric, EnergyMode::Direct, EnergyMode::Comparison] {
        let params = EnergyParams::default().with_mode(mode);
        let out = assemble(&phi, &s, &s, &params, true);
        let terms = out.energy.terms.unwrap();
        let band = terms.matching + terms.membrane + terms.bending;
        assert!(band.abs() < 1e-10, "{mode:?}: {terms:?}");
        if mode == EnergyMode::Comparison {
            // the comparison density is stationary but not zero at the identity
            let expected = params.c_vol * params.sigma * 3.0;
            assert!((terms.volume - expected).abs() < 1e-12);
        } else {
            assert!(terms.total().abs() < 1e-10, "{mode:?}: {terms:?}");
        }
        let g = out.gradient.unwrap();
        let norm: f64 = g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        assert!(norm < 1e-8, "{mode:?}: {norm}");
    }
}

#[test]
fn inverted_simplex_is_infeasible() {
    let s = circle_field([0.5, 0.5], 0.2);
    let grid = Arc::new(AdaptiveGrid::<2>::uniform(4).unwrap());
    let id = Deformation::identity(grid.clone());
    let mut dofs = id.dofs();
    dofs[40] += Vector([0.2, 0.2]);
    let phi = id.with_dofs(&dofs);
    let out = assemble(&phi, &s, &s, &EnergyParams::default(), true);
    assert!(!out.energy.is_feasible());
    assert!(out.energy.min_det < 0.0);
    assert!(out.energy.total().is_none());
    assert!(out.gradient.is_none());
}

fn radial_map(x: &Vector<2>) -> Vector<2> {
    // translates radii by 0.05 on [0.1, 0.3], blends back to the identity by r = 0.45
    let c = Vector([0.5, 0.5]);
    let v = *x - c;
    let r = v.norm();
    if r < 1e-12 {
        return *x;
    }
    let shift = if r < 0.1 {
        0.05 * r / 0.1
    } else if r <= 0.3 {
        0.05
    } else if r < 0.45 {
        0.05 * (0.45 - r) / 0.15
    } else {
        0.0
    };
    c + v * ((r + shift) / r)
}

#[test]
fn radial_stretch_matches_levels() {
    let s1 = circle_field([0.5, 0.5], 0.2);
    let s2 = circle_field([0.5, 0.5], 0.25);
    let grid = Arc::new(AdaptiveGrid::build(4, 8, &s1, &s2, 0.05).unwrap());
    let phi = Deformation::interpolate(grid, radial_map);
    let params = EnergyParams { sigma: 0.04, ..Default::default() }.with_mode(EnergyMode::Direct);
    let terms = assemble_energy(&phi, &s1, &s2, &params).terms.unwrap();
    assert!(terms.matching.abs() < 1e-4, "{terms:?}");
    assert!(terms.membrane > 0.0);
}

#[test]
fn band_terms_switch_off() {
    let s1 = circle_field([0.45, 0.5], 0.2);
    let s2 = circle_field([0.55, 0.5], 0.22);
    let grid = Arc::new(AdaptiveGrid::build(3, 6, &s1, &s2, 0.25).unwrap());
    let phi = perturbed(&grid, 5, 0.003);
    let params = EnergyParams { c_match: 0.0, c_mem: 0.0, c_bend: 0.0, ..Default::default() };
    let out = assemble_energy(&phi, &s1, &s2, &params);
    let t = out.terms.unwrap();
    assert_eq!(t.total(), t.volume);
    assert_eq!(t.matching + t.membrane + t.bending, 0.0);
}

#[test]
fn affine_volume_term_is_exact() {
    let s = circle_field([0.5, 0.5], 0.2);
    let grid = Arc::new(AdaptiveGrid::build(3, 6, &s, &s, 0.25).unwrap());
    let a = Matrix([[1.1, 0.2], [-0.1, 0.9]]);
    let phi = Deformation::interpolate(grid, |x| a.mul_vec(x) + Vector([0.01, -0.02]));
    let params = EnergyParams { c_match: 0.0, c_mem: 0.0, c_bend: 0.0, c_vol: 0.7, ..Default::default() };
    let w = StoredEnergy::Bounded;
    let expected = 0.7 * params.sigma * (w.value(&a) + w.inverse_density(&a).unwrap());
    let got = assemble_energy(&phi, &s, &s, &params).total().unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

/// Direct-mode band terms recomputed point by point from the public blocks.
fn direct_oracle(phi: &Deformation<2>, s1: &SignedShape<2>, s2: &SignedShape<2>, p: &EnergyParams) -> EnergyTerms {
    let grid = phi.grid();
    let w = p.density;
    let mut out = EnergyTerms::default();
    for t in 0..grid.num_simplices() {
        let a = phi.jacobian(t);
        let vol = grid.simplex_volume(t);
        out.volume += p.c_vol * p.sigma * vol * w.value(&a);
        for qp in simplex_rule(2) {
            let x = grid.simplex_point(t, &qp.bary);
            let y = phi.evaluate_in(t, &qp.bary);
            let g1 = s1.eval_geometry_clamped(&x, p.tau);
            let g2 = s2.eval_geometry_clamped(&y, p.tau);
            let eta = eta_sigma(g1.d, p.sigma, p.bump);
            let wq = qp.weight * vol * eta;
            out.matching += wq * p.c_match / math::powf(p.sigma, p.q) * (g2.d - g1.d) * (g2.d - g1.d);
            out.membrane += wq * p.c_mem * w.value(&d_tt(&a, &g1.n, &g2.n));
            let lam = classifier(&g1.s, &g2.s, &a, &g1.n, &g2.n).unwrap();
            out.bending += wq * p.c_bend * w.value(&lam);
        }
    }
    out
}

#[test]
fn direct_mode_matches_pointwise_oracle() {
    let s1 = circle_field([0.45, 0.5], 0.2);
    let s2 = ellipse_field([0.55, 0.5], [0.24, 0.18]);
    let grid = Arc::new(AdaptiveGrid::build(3, 6, &s1, &s2, 0.2).unwrap());
    let phi = perturbed(&grid, 9, 0.004);
    let params = EnergyParams { c_match: 2.0, c_bend: 0.5, ..Default::default() }.with_mode(EnergyMode::Direct);
    let got = assemble_energy(&phi, &s1, &s2, &params).terms.unwrap();
    let want = direct_oracle(&phi, &s1, &s2, &params);
    for (g, w) in [
        (got.matching, want.matching),
        (got.membrane, want.membrane),
        (got.bending, want.bending),
        (got.volume, want.volume),
    ] {
        assert!((g - w).abs() < 1e-12 * (1.0 + w.abs()), "{got:?} vs {want:?}");
    }
}

#[test]
fn swapped_translation_is_symmetric() {
    // shift by a whole number of lattice and grid cells so both sides sample identical data
    let shift = 8.0 / 128.0;
    let s1 = circle_field([0.45, 0.47], 0.17);
    let s2 = circle_field([0.45 + shift, 0.47], 0.17);
    let grid = Arc::new(AdaptiveGrid::<2>::uniform(7).unwrap());
    let phi = Deformation::interpolate(grid.clone(), |x| *x + Vector([shift, 0.0]));
    let psi = Deformation::interpolate(grid, |x| *x - Vector([shift, 0.0]));
    let params = EnergyParams { sigma: 0.06, ..Default::default() };
    let forward = assemble_energy(&phi, &s1, &s2, &params).total().unwrap();
    let backward = assemble_energy(&psi, &s2, &s1, &params).total().unwrap();
    assert!(forward > 0.0);
    assert!((forward - backward).abs() < 1e-6 * forward.max(1.0), "{forward} vs {backward}");
}

#[cfg(feature = "std")]
#[test]
fn thread_count_does_not_change_results() {
    let s1 = circle_field([0.45, 0.5], 0.2);
    let s2 = circle_field([0.55, 0.5], 0.22);
    let grid = Arc::new(AdaptiveGrid::build(3, 6, &s1, &s2, 0.2).unwrap());
    let phi = perturbed(&grid, 2, 0.003);
    let params = EnergyParams::default();
    let a = assemble(&phi, &s1, &s2, &params, true);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| assemble(&phi, &s1, &s2, &params, true));
    assert_eq!(a.energy, b.energy);
    assert_eq!(a.gradient, b.gradient);
}

#[test]
fn gradient_matches_finite_differences_2d() {
    let s1 = circle_field([0.45, 0.5], 0.2);
    let s2 = ellipse_field([0.53, 0.5], [0.24, 0.18]);
    let grid = Arc::new(AdaptiveGrid::build(3, 5, &s1, &s2, 0.125).unwrap());
    let phi = perturbed(&grid, 7, 0.004);
    for mode in [EnergyMode::Symmetric, EnergyMode::Direct, EnergyMode::Comparison] {
        let params = EnergyParams { c_match: 4.0, c_bend: 0.5, sigma: 0.125, ..Default::default() }.with_mode(mode);
        fd_check(&phi, &s1, &s2, &params);
    }
}

#[test]
fn gradient_matches_finite_differences_3d() {
    let s1 = sphere_field([0.48, 0.5, 0.5], 0.22);
    let s2 = sphere_field([0.53, 0.5, 0.48], 0.25);
    let grid = Arc::new(AdaptiveGrid::build(3, 5, &s1, &s2, 0.1).unwrap());
    let phi = perturbed(&grid, 8, 0.003);
    for mode in [EnergyMode::Symmetric, EnergyMode::Direct] {
        let params = EnergyParams { c_match: 4.0, c_bend: 0.5, sigma: 0.125, ..Default::default() }.with_mode(mode);
        fd_check(&phi, &s1, &s2, &params);
    }
}

#[test]
fn surface_limit_of_identity_vanishes() {
    let shape = circle([0.5, 0.5], 0.2, 400);
    let s = fast_march_sdf(&shape, Lattice::new(256));
    let grid = Arc::new(AdaptiveGrid::<2>::uniform(5).unwrap());
    let phi = Deformation::identity(grid);
    for theta in [0, 1] {
        let params = EnergyParams { theta, ..Default::default() };
        assert!(surface_limit_energy(&phi, &shape, &s, &s, &params).abs() < 1e-10);
    }
}

#[test]
fn surface_limit_radial_membrane() {
    let (r1, r2) = (0.2, 0.25);
    let shape = circle([0.5, 0.5], r1, 2000);
    let s1 = circle_field([0.5, 0.5], r1);
    let s2 = circle_field([0.5, 0.5], r2);
    let grid = Arc::new(AdaptiveGrid::build(4, 8, &s1, &s2, 0.05).unwrap());
    let phi = Deformation::interpolate(grid, radial_map);
    let params = EnergyParams { c_bend: 0.0, theta: 1, ..Default::default() };
    let got = surface_limit_energy(&phi, &shape, &s1, &s2, &params);
    // tangential stretch r2/r1 with unit normal stretch; the perimeter is the polygon's
    let perimeter: f64 = (0..shape.elements().len()).map(|e| shape.element_measure(e)).sum();
    let stretch = Matrix::from_diagonal([1.0, r2 / r1]);
    let expected = perimeter * StoredEnergy::Bounded.value(&stretch);
    assert!((got - expected).abs() < 1e-3 * expected, "{got} vs {expected}");
}
