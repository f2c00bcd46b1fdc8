//! Randomized algebraic property suites behind `shellmatch verify`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use shellmatch_core::energy::{classifier, d_tt, inverse_classifier, inverse_projected_block};
use shellmatch_core::stored_energy::{bounded_profile, StoredEnergy};
use shellmatch_core::tensor::{projection, rotation_to, spd_sqrt_pair};
use shellmatch_core::{Matrix, Vector};

/// Outcome of one suite. `worst` is the largest error seen, or for
/// lower-bound checks the smallest value seen.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
    pub bound: f64,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    name: &'static str,
    bound: f64,
    lower: bool,
    cases: usize,
    failures: usize,
    worst: f64,
    start: Instant,
}

impl Tally {
    fn at_most(name: &'static str, bound: f64) -> Self {
        Tally { name, bound, lower: false, cases: 0, failures: 0, worst: 0.0, start: Instant::now() }
    }

    fn at_least(name: &'static str, bound: f64) -> Self {
        Tally { worst: f64::INFINITY, lower: true, ..Self::at_most(name, bound) }
    }

    fn record(&mut self, value: f64) {
        self.cases += 1;
        let ok = if self.lower { value > self.bound } else { value <= self.bound };
        if !ok {
            self.failures += 1;
        }
        self.worst = if self.lower { self.worst.min(value) } else { self.worst.max(value) };
        if value.is_nan() {
            self.worst = f64::NAN;
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            bound: self.bound,
            seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

pub fn random_matrix<const D: usize>(rng: &mut impl Rng, range: f64) -> Matrix<D> {
    Matrix(core::array::from_fn(|_| core::array::from_fn(|_| rng.gen_range(-range..range))))
}

pub fn random_unit<const D: usize>(rng: &mut impl Rng) -> Vector<D> {
    loop {
        let v = Vector(core::array::from_fn(|_| rng.gen_range(-1.0..1.0)));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

/// Uniformly random proper rotation by Gram-Schmidt on a random matrix.
pub fn random_rotation<const D: usize>(rng: &mut impl Rng) -> Matrix<D> {
    loop {
        let mut rows: [Vector<D>; D] = core::array::from_fn(|_| random_unit(rng));
        let mut ok = true;
        for i in 0..D {
            for j in 0..i {
                let c = rows[i].dot(&rows[j]);
                rows[i] -= rows[j] * c;
            }
            let n = rows[i].norm();
            ok &= n > 1e-3;
            rows[i] = rows[i] * (1.0 / n);
        }
        if !ok {
            continue;
        }
        let mut q = Matrix(rows.map(|r| r.0));
        if q.det() < 0.0 {
            q.0[0] = (-rows[0]).0;
        }
        return q;
    }
}

/// Symmetric positive definite matrix with `n` as eigenvector of eigenvalue
/// 1 and tangential eigenvalues drawn log-uniformly from `[1/4, 4]`.
pub fn random_shape_operator<const D: usize>(rng: &mut impl Rng, n: &Vector<D>) -> Matrix<D> {
    let frame = rotation_to(n).expect("unit normal") * spin(rng);
    let diag = core::array::from_fn(|k| if k + 1 == D { 1.0 } else { 4f64.powf(rng.gen_range(-1.0..1.0)) });
    frame * Matrix::from_diagonal(diag) * frame.transpose()
}

/// Random rotation about the last axis (the identity in 2D).
fn spin<const D: usize>(rng: &mut impl Rng) -> Matrix<D> {
    let mut m = Matrix::<D>::identity();
    if D == 3 {
        let (s, c) = rng.gen_range(0.0..std::f64::consts::TAU).sin_cos();
        m.0[0][0] = c;
        m.0[0][1] = -s;
        m.0[1][0] = s;
        m.0[1][1] = c;
    }
    m
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The four determinant identities of the projected blocks on `cases`
/// random tuples per dimension.
pub fn identity_suite(cases: usize, seed: u64) -> SuiteReport {
    let mut tally = Tally::at_most("determinant identities", 1e-10);
    let mut r = rng(seed);
    identities::<2>(&mut r, cases, &mut tally);
    identities::<3>(&mut r, cases, &mut tally);
    tally.finish()
}

fn identities<const D: usize>(rng: &mut ChaCha8Rng, cases: usize, tally: &mut Tally) {
    for _ in 0..cases {
        let a = loop {
            let a: Matrix<D> = random_matrix(rng, 2.0);
            if a.det() > 0.05 {
                break a;
            }
        };
        let n1 = random_unit(rng);
        let n2 = random_unit(rng);
        let m = random_shape_operator(rng, &n1);
        let n = random_shape_operator(rng, &n2);
        let k1 = m.cofactor().bilinear(&n1, &n1);
        let k2 = n.cofactor().bilinear(&n2, &n2);
        let tancof = a.cofactor().bilinear(&n2, &n1);
        let normal = a.bilinear(&n2, &n1) / a.det();
        let errors = [
            d_tt(&a, &n1, &n2).det() - tancof,
            inverse_projected_block(&a, &n1, &n2).map_or(f64::NAN, |b| b.det()) - normal,
            classifier(&m, &n, &a, &n1, &n2).map_or(f64::NAN, |l| l.det()) - (k2 / k1).sqrt() * tancof,
            inverse_classifier(&m, &n, &a, &n1, &n2).map_or(f64::NAN, |l| l.det()) - (k1 / k2).sqrt() * normal,
        ];
        tally.record(errors.iter().map(|e| e.abs()).fold(0.0, f64::max));
    }
}

/// Sample sizes of [`stored_energy_suite`].
#[derive(Debug, Clone, Copy)]
pub struct EnergySuiteSize {
    pub values: usize,
    pub invariance: usize,
    pub convexity: usize,
    pub gradients: usize,
}

impl Default for EnergySuiteSize {
    fn default() -> Self {
        EnergySuiteSize { values: 100_000, invariance: 10_000, convexity: 10_000, gradients: 1_000 }
    }
}

/// Normalization, nonnegativity, invariance, profile convexity and
/// gradient checks of the bounded density in d = 2 and d = 3.
pub fn stored_energy_suite(size: EnergySuiteSize, seed: u64) -> Vec<SuiteReport> {
    let mut r = rng(seed);
    let w = StoredEnergy::Bounded;

    let mut norm = Tally::at_most("density vanishes at identity", 1e-12);
    norm.record(w.value(&Matrix::<2>::identity()).abs());
    norm.record(w.value(&Matrix::<3>::identity()).abs());

    let mut nonneg = Tally::at_least("density is nonnegative", -1e-12);
    for i in 0..size.values {
        let v = if i % 2 == 0 { w.value(&random_matrix::<2>(&mut r, 3.0)) } else { w.value(&random_matrix::<3>(&mut r, 3.0)) };
        nonneg.record(v);
    }

    let mut inv = Tally::at_most("frame invariance and isotropy", 1e-10);
    for i in 0..size.invariance {
        if i % 2 == 0 {
            invariance::<2>(&mut r, w, &mut inv);
        } else {
            invariance::<3>(&mut r, w, &mut inv);
        }
    }

    let mut convex = Tally::at_least("profile midpoint convexity", -1e-10);
    for i in 0..size.convexity {
        let dim = 2 + i % 2;
        let (s0, s1) = (r.gen_range(0.0..100.0), r.gen_range(0.0..100.0));
        let (t0, t1) = (r.gen_range(-10.0..10.0), r.gen_range(-10.0..10.0));
        let mid = bounded_profile(dim, (s0 + s1) / 2.0, (t0 + t1) / 2.0);
        let avg = (bounded_profile(dim, s0, t0) + bounded_profile(dim, s1, t1)) / 2.0;
        convex.record((avg - mid) / (1.0 + avg.abs()));
    }

    let mut grad = Tally::at_most("gradient against central differences", 1e-6);
    for i in 0..size.gradients {
        if i % 2 == 0 {
            gradient_error::<2>(&mut r, w, &mut grad);
        } else {
            gradient_error::<3>(&mut r, w, &mut grad);
        }
    }

    vec![norm.finish(), nonneg.finish(), inv.finish(), convex.finish(), grad.finish()]
}

fn invariance<const D: usize>(rng: &mut ChaCha8Rng, w: StoredEnergy, tally: &mut Tally) {
    let a: Matrix<D> = random_matrix(rng, 2.0);
    let q = random_rotation(rng);
    let v = w.value(&a);
    tally.record((w.value(&(q * a)) - v).abs().max((w.value(&(a * q)) - v).abs()));
}

fn gradient_error<const D: usize>(rng: &mut ChaCha8Rng, w: StoredEnergy, tally: &mut Tally) {
    let a: Matrix<D> = random_matrix(rng, 2.0);
    let g = w.gradient(&a);
    let h = 1e-5;
    let mut fd = Matrix::<D>::default();
    for i in 0..D {
        for j in 0..D {
            let mut plus = a;
            let mut minus = a;
            plus.0[i][j] += h;
            minus.0[i][j] -= h;
            fd.0[i][j] = (w.value(&plus) - w.value(&minus)) / (2.0 * h);
        }
    }
    tally.record((g - fd).norm() / g.norm().max(1e-8));
}

/// Classifier orthogonality for tangential derivatives built from the
/// pulled-back curvature relation, and its failure for random ones that
/// miss the relation by at least 5%.
pub fn classifier_suite(cases: usize, seed: u64) -> Vec<SuiteReport> {
    let mut r = rng(seed);
    let mut good = Tally::at_most("classifier is orthogonal on matching curvature", 1e-9);
    let mut bad = Tally::at_least("classifier detects curvature mismatch", 1e-3);
    for i in 0..cases {
        if i % 2 == 0 {
            classifier_case::<2>(&mut r, &mut good, &mut bad);
        } else {
            classifier_case::<3>(&mut r, &mut good, &mut bad);
        }
    }
    vec![good.finish(), bad.finish()]
}

/// Tangential part `P₂ N^{-½} R M^{½} P₁` with `R` a rotation taking `n₁` to `n₂`.
pub fn matching_derivative<const D: usize>(
    rng: &mut impl Rng,
    m: &Matrix<D>,
    n: &Matrix<D>,
    n1: &Vector<D>,
    n2: &Vector<D>,
) -> Matrix<D> {
    let spin = spin(rng);
    let to1 = rotation_to(n1).expect("unit normal");
    let to2 = rotation_to(n2).expect("unit normal");
    let rot = to2 * spin * to1.transpose();
    let (m_half, _) = spd_sqrt_pair(m).expect("spd");
    let (_, n_inv_half) = spd_sqrt_pair(n).expect("spd");
    let (p1, p2) = (projection(n1), projection(n2));
    p2 * n_inv_half * p2 * rot * p1 * m_half * p1 + n2.outer(n1) * rng.gen_range(0.2..3.0)
}

fn classifier_case<const D: usize>(rng: &mut ChaCha8Rng, good: &mut Tally, bad: &mut Tally) {
    let n1 = random_unit(rng);
    let n2 = random_unit(rng);
    let m = random_shape_operator(rng, &n1);
    let n = random_shape_operator(rng, &n2);
    let defect = |a: &Matrix<D>| {
        classifier(&m, &n, a, &n1, &n2).map_or(f64::NAN, |l| (l.transpose() * l - Matrix::identity()).norm())
    };
    good.record(defect(&matching_derivative(rng, &m, &n, &n1, &n2)));
    let a = loop {
        let a: Matrix<D> = random_matrix(rng, 2.0);
        if a.det() > 0.05 && pullback_residual(&m, &n, &a, &n1, &n2) > 0.05 {
            break a;
        }
    };
    bad.record(defect(&a));
}

/// `|P₁AᵀP₂NP₂AP₁ − P₁MP₁| / |P₁MP₁|`, zero exactly when `A` pulls the
/// curvature of the second shape back onto the first.
pub fn pullback_residual<const D: usize>(
    m: &Matrix<D>,
    n: &Matrix<D>,
    a: &Matrix<D>,
    n1: &Vector<D>,
    n2: &Vector<D>,
) -> f64 {
    let (p1, p2) = (projection(n1), projection(n2));
    let target = p1 * *m * p1;
    (p1 * a.transpose() * p2 * *n * p2 * *a * p1 - target).norm() / target.norm()
}

/// All suites at their default sizes.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    let mut out = vec![identity_suite(10_000, seed)];
    out.extend(stored_energy_suite(EnergySuiteSize::default(), seed.wrapping_add(1)));
    out.extend(classifier_suite(1_000, seed.wrapping_add(2)));
    out
}
