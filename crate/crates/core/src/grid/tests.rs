use super::*;
use crate::geometry::Lattice;
use crate::tensor::Matrix;
use alloc::sync::Arc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn circle_sdf(c: [f64; 2], r: f64) -> SignedShape<2> {
    SignedShape::from_fn(Lattice::new(512), move |x| (*x - Vector(c)).norm() - r)
}

fn two_circles(min: u32, max: u32) -> AdaptiveGrid<2> {
    let a = circle_sdf([0.45, 0.5], 0.2);
    let b = circle_sdf([0.55, 0.5], 0.25);
    AdaptiveGrid::build(min, max, &a, &b, 4.0 / (1u64 << max) as f64).unwrap()
}

fn random_perturbation<const D: usize>(grid: &Arc<AdaptiveGrid<D>>, seed: u64, amount: f64) -> Deformation<D> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = Deformation::identity(grid.clone());
    let dofs: Vec<Vector<D>> = id
        .dofs()
        .iter()
        .map(|x| *x + Vector(core::array::from_fn(|_| rng.gen_range(-amount..amount))))
        .collect();
    id.with_dofs(&dofs)
}

fn brute_force_contains<const D: usize>(grid: &AdaptiveGrid<D>, x: &Vector<D>) -> Vec<usize> {
    (0..grid.num_simplices())
        .filter(|&t| grid.barycentric(t, x)[..=D].iter().all(|&b| b >= -1e-12))
        .collect()
}

#[test]
fn uniform_grid_counts() {
    let g = AdaptiveGrid::<2>::uniform(4).unwrap();
    assert_eq!(g.num_vertices(), 17 * 17);
    assert_eq!(g.num_simplices(), 2 * 256);
    assert_eq!(g.num_hanging(), 0);
    assert_eq!(g.num_dofs(), 15 * 15);
    let g = AdaptiveGrid::<3>::uniform(3).unwrap();
    assert_eq!(g.num_vertices(), 9 * 9 * 9);
    assert_eq!(g.num_simplices(), 6 * 512);
    assert_eq!(g.num_hanging(), 0);
}

#[test]
fn bad_levels_are_rejected() {
    assert!(AdaptiveGrid::<2>::uniform(1).is_err());
    assert!(AdaptiveGrid::<2>::build_with(5, 4, |_, _, _| true).is_err());
    assert!(AdaptiveGrid::<2>::build_with(4, 13, |_, _, _| true).is_err());
}

#[test]
fn band_leaves_are_finest() {
    let max = 8;
    let band = 4.0 / 256.0;
    let g = two_circles(4, max);
    let circles: [([f64; 2], f64); 2] = [([0.45, 0.5], 0.2), ([0.55, 0.5], 0.25)];
    for leaf in 0..g.num_leaves() {
        let (o, s) = g.leaf_bounds(leaf);
        for (c, r) in circles {
            let near: f64 = (0..2)
                .map(|k| (c[k] - (c[k].clamp(o[k], o[k] + s))).powi(2))
                .sum::<f64>()
                .sqrt();
            let far: f64 = (0..2)
                .map(|k| (c[k] - o[k]).abs().max((c[k] - o[k] - s).abs()).powi(2))
                .sum::<f64>()
                .sqrt();
            let touches = near <= r + band && far >= r - band;
            if touches {
                assert_eq!(g.leaf_levels().nth(leaf).unwrap(), max, "{o:?} {s}");
            }
        }
    }
    assert!(g.leaf_levels().all(|l| (4..=max).contains(&l)));
}

#[test]
fn adaptive_grid_is_smaller_than_uniform() {
    for max in [7, 8] {
        let g = two_circles(4, max);
        let uniform = ((1usize << max) + 1).pow(2);
        assert!(g.num_vertices() < uniform, "{} vs {uniform}", g.num_vertices());
        assert!(g.num_hanging() > 0);
    }
}

#[test]
fn corner_balance() {
    let g = two_circles(3, 8);
    for &c in &g.leaves {
        let cell = &g.cells[c];
        let s = cell.size();
        for dir in 0..9usize {
            let d = [dir % 3, dir / 3];
            let unit: Option<[u32; 2]> = (|| {
                let mut u = [0u32; 2];
                for k in 0..2 {
                    u[k] = match d[k] {
                        0 => cell.origin[k].checked_sub(1)?,
                        1 => cell.origin[k],
                        _ => cell.origin[k] + s,
                    };
                    if u[k] >= SCALE {
                        return None;
                    }
                }
                Some(u)
            })();
            if let Some(u) = unit {
                let n = &g.cells[g.leaf_containing(&u)];
                assert!(n.level + 1 >= cell.level && cell.level + 1 >= n.level);
            }
        }
    }
}

#[test]
fn constraint_weights_sum_to_one() {
    let g = two_circles(3, 8);
    for v in 0..g.num_vertices() {
        if g.vertex_kind(v) == VertexKind::Hanging {
            let s: f64 = g.constraint(v).iter().map(|c| c.1).sum();
            assert!((s - 1.0).abs() < 1e-14);
            for &(w, _) in g.constraint(v) {
                assert_ne!(g.vertex_kind(w), VertexKind::Hanging);
            }
            // The constraint reproduces the position.
            let mut x = Vector::zero();
            for &(w, c) in g.constraint(v) {
                x += g.vertex(w) * c;
            }
            assert!((x - g.vertex(v)).norm() < 1e-15);
        }
    }
}

fn check_containment<const D: usize>(coarse: &AdaptiveGrid<D>, fine: &AdaptiveGrid<D>) {
    for t in 0..fine.num_simplices() {
        let mut centroid = Vector::zero();
        for &v in fine.simplex(t) {
            centroid += fine.vertex(v) * (1.0 / (D + 1) as f64);
        }
        let (host, _) = coarse.locate(&centroid);
        for &v in fine.simplex(t) {
            let b = coarse.barycentric(host, &fine.vertex(v));
            assert!(b[..=D].iter().all(|&x| x >= -1e-12), "{t}");
        }
    }
}

#[test]
fn kuhn_simplices_are_nested() {
    check_containment(&AdaptiveGrid::<2>::uniform(3).unwrap(), &AdaptiveGrid::<2>::uniform(4).unwrap());
    check_containment(&AdaptiveGrid::<3>::uniform(2).unwrap(), &AdaptiveGrid::<3>::uniform(3).unwrap());
    check_containment(&two_circles(4, 6), &two_circles(4, 7));
}

#[test]
fn locate_cell_center_and_vertex() {
    let g = AdaptiveGrid::<2>::uniform(3).unwrap();
    let (_, b) = g.locate(&Vector([0.3125 + 0.01, 0.3125]));
    assert!(b[..3].iter().all(|&x| x > 0.0));
    let (t, b) = g.locate(&Vector([0.375, 0.5]));
    assert!(b[..3].iter().any(|&x| (x - 1.0).abs() < 1e-15));
    assert!((g.simplex_point(t, &b) - Vector([0.375, 0.5])).norm() < 1e-15);
}

fn check_locate<const D: usize>(g: &AdaptiveGrid<D>, count: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let x = Vector(core::array::from_fn(|_| rng.gen_range(0.0..1.0)));
        let (t, b) = g.locate(&x);
        assert!(b[..=D].iter().all(|&v| v >= -1e-12));
        assert!((b[..=D].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((g.simplex_point(t, &b) - x).norm() < 1e-12);
    }
}

#[test]
fn locate_round_trip() {
    check_locate(&two_circles(4, 8), 100_000, 1);
    check_locate(&AdaptiveGrid::<3>::uniform(4).unwrap(), 20_000, 2);
}

#[test]
fn locate_agrees_with_brute_force() {
    let g = two_circles(3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2_000 {
        let x = Vector([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
        let (t, _) = g.locate(&x);
        assert_eq!(brute_force_contains(&g, &x), alloc::vec![t]);
    }
}

#[test]
fn evaluate_reproduces_affine_maps() {
    let g = Arc::new(two_circles(4, 7));
    let id = Deformation::identity(g.clone());
    let a = Matrix([[1.1, 0.2], [-0.1, 0.9]]);
    let b = Vector([0.05, -0.02]);
    let affine = Deformation::interpolate(g.clone(), |x| a * *x + b);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let x = Vector([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
        assert!((id.evaluate(&x) - x).norm() < 1e-14);
        assert!((affine.evaluate(&x) - (a * x + b)).norm() < 1e-12);
    }
    for t in 0..g.num_simplices() {
        assert!((affine.jacobian(t) - a).max_abs() < 1e-10);
    }
}

#[test]
fn deformations_are_continuous_across_faces() {
    let g = Arc::new(two_circles(3, 7));
    let phi = random_perturbation(&g, 5, 0.002);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    for leaf in 0..g.num_leaves() {
        let (o, s) = g.leaf_bounds(leaf);
        // random point on the right and top faces of the leaf
        for k in 0..2 {
            let mut x = o;
            x[k] += s;
            x[1 - k] += rng.gen_range(0.0..s);
            if x[k] >= 1.0 {
                continue;
            }
            let hosts = brute_force_contains(&g, &x);
            let vals: Vec<Vector<2>> = hosts.iter().map(|&t| phi.evaluate_in(t, &g.barycentric(t, &x))).collect();
            for v in &vals {
                assert!((*v - vals[0]).norm() < 1e-12);
            }
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn prolongation_is_exact() {
    let coarse = Arc::new(two_circles(4, 6));
    let fine = Arc::new(two_circles(4, 7));
    assert!(fine.refines(&coarse));
    assert!(!coarse.refines(&fine));
    let id = Deformation::identity(coarse.clone()).prolong(fine.clone()).unwrap();
    for (v, x) in id.values().iter().enumerate() {
        assert!((*x - fine.vertex(v)).norm() < 1e-15);
    }
    let phi = random_perturbation(&coarse, 7, 0.003);
    let psi = phi.prolong(fine.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let x = Vector([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
        assert!((phi.evaluate(&x) - psi.evaluate(&x)).norm() < 1e-12);
    }
    for t in 0..fine.num_simplices() {
        let mut c = Vector::zero();
        for &v in fine.simplex(t) {
            c += fine.vertex(v) * (1.0 / 3.0);
        }
        let (parent, _) = coarse.locate(&c);
        assert!((psi.jacobian(t).det() - phi.jacobian(parent).det()).abs() < 1e-13);
    }
    assert!((psi.min_det() - phi.min_det()).abs() < 1e-13);
    assert_eq!(psi.prolong(coarse).unwrap_err(), GridMismatch);
}

#[test]
fn fe_matrices_are_symmetric() {
    let g = two_circles(3, 6);
    let (m, k) = g.fe_matrices();
    assert_eq!(m.rows(), g.num_dofs());
    for r in 0..m.rows() {
        assert!(m.get(r, r) > 0.0 && k.get(r, r) > 0.0);
        for c in 0..m.rows().min(r + 40) {
            assert!((m.get(r, c) - m.get(c, r)).abs() < 1e-15);
            assert!((k.get(r, c) - k.get(c, r)).abs() < 1e-12);
        }
    }
    // Lumped mass of a uniform grid equals the area of the interior support.
    let u = AdaptiveGrid::<2>::uniform(3).unwrap();
    let (m, _) = u.fe_matrices();
    let ones = alloc::vec![1.0; m.rows()];
    let mut out = alloc::vec![0.0; m.rows()];
    m.mul_vec(&ones, &mut out);
    let total: f64 = out.iter().sum();
    // ∫ (Σ_interior φ_i)² over the box with exact P1 mass
    let h = 0.125;
    let interior = 1.0 - 4.0 * h + 4.0 * h * h;
    assert!(total > interior && total < 1.0);
}

#[test]
fn reduce_routes_hanging_gradients() {
    let g = two_circles(3, 7);
    let grads: Vec<Vector<2>> = (0..g.num_vertices()).map(|v| g.vertex(v)).collect();
    let reduced = g.reduce_to_dofs(&grads);
    let total: Vector<2> = reduced.iter().fold(Vector::zero(), |a, b| a + *b);
    let mut expected = Vector::zero();
    for v in 0..g.num_vertices() {
        match g.vertex_kind(v) {
            VertexKind::Free(_) => expected += grads[v],
            VertexKind::Boundary => {}
            VertexKind::Hanging => {
                for &(w, c) in g.constraint(v) {
                    if let VertexKind::Free(_) = g.vertex_kind(w) {
                        expected += grads[v] * c;
                    }
                }
            }
        }
    }
    assert!((total - expected).norm() < 1e-9);
}

#[test]
fn grids_for_consecutive_levels_are_nested() {
    let a = circle_sdf([0.45, 0.5], 0.2);
    let b = circle_sdf([0.55, 0.5], 0.25);
    let mut prev: Option<AdaptiveGrid<2>> = None;
    for l in 4..=8u32 {
        let g = AdaptiveGrid::build(4, l, &a, &b, 4.0 / (1u64 << l) as f64).unwrap();
        if let Some(p) = &prev {
            assert!(g.refines(p), "level {l}");
        }
        prev = Some(g);
    }
}

#[test]
fn octree_constraints_and_continuity() {
    let s = SignedShape::from_fn(Lattice::<3>::new(64), |x| (*x - Vector::splat(0.5)).norm() - 0.25);
    let g = Arc::new(AdaptiveGrid::build(2, 5, &s, &s, 4.0 / 32.0 / 4.0).unwrap());
    assert!(g.num_hanging() > 0);
    for v in 0..g.num_vertices() {
        if g.vertex_kind(v) == VertexKind::Hanging {
            let mut x = Vector::zero();
            for &(w, c) in g.constraint(v) {
                x += g.vertex(w) * c;
            }
            assert!((x - g.vertex(v)).norm() < 1e-15);
        }
    }
    let phi = random_perturbation(&g, 9, 0.004);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for leaf in (0..g.num_leaves()).step_by(7) {
        let (o, s) = g.leaf_bounds(leaf);
        let mut x = o;
        x[0] += s;
        x[1] += rng.gen_range(0.0..s);
        x[2] += rng.gen_range(0.0..s);
        if x[0] >= 1.0 {
            continue;
        }
        let hosts = brute_force_contains(&g, &x);
        assert!(hosts.len() >= 2);
        let v0 = phi.evaluate_in(hosts[0], &g.barycentric(hosts[0], &x));
        for &t in &hosts[1..] {
            assert!((phi.evaluate_in(t, &g.barycentric(t, &x)) - v0).norm() < 1e-12);
        }
    }
    check_locate(&g, 5_000, 11);
}

#[test]
fn split_flags_round_trip() {
    let g = two_circles(3, 7);
    let flags = g.split_flags();
    let h = AdaptiveGrid::<2>::from_split_flags(3, 7, &flags).unwrap();
    assert_eq!(h.num_vertices(), g.num_vertices());
    assert_eq!(h.num_simplices(), g.num_simplices());
    assert!((0..g.num_vertices()).all(|v| g.vertex(v) == h.vertex(v)));
    assert!((0..g.num_simplices()).all(|t| g.simplex(t) == h.simplex(t)));
    assert_eq!(AdaptiveGrid::<2>::from_split_flags(3, 6, &flags).unwrap_err(), GridError::BadSplitFlags);
    assert_eq!(AdaptiveGrid::<2>::from_split_flags(3, 7, &flags[1..]).unwrap_err(), GridError::BadSplitFlags);
    let mut extra = flags.clone();
    extra.push(false);
    assert_eq!(AdaptiveGrid::<2>::from_split_flags(3, 7, &extra).unwrap_err(), GridError::BadSplitFlags);
}
