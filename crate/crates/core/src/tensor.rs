//! Dense small-matrix algebra for spatial dimension 2 or 3.
//!
//! [`Matrix`] is row-major, `m.0[i][j]` is row `i`, column `j`. Everything is
//! a plain `Copy` value; no routine allocates.

use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("vector is not of unit length")]
    NotUnit,
}

/// Compile-time guard: only d = 2 and d = 3 are supported.
pub(crate) const fn assert_dim<const D: usize>() {
    assert!(D == 2 || D == 3, "spatial dimension must be 2 or 3");
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector<const D: usize>(pub [f64; D]);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix<const D: usize>(pub [[f64; D]; D]);

impl<const D: usize> Default for Vector<D> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const D: usize> Default for Matrix<D> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const D: usize> Vector<D> {
    pub const fn zero() -> Self {
        Vector([0.0; D])
    }

    pub fn splat(v: f64) -> Self {
        Vector([v; D])
    }

    /// The `k`-th canonical basis vector.
    pub fn unit(k: usize) -> Self {
        let mut v = Self::zero();
        v.0[k] = 1.0;
        v
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            s += self.0[i] * other.0[i];
        }
        s
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_squared())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `self ⊗ other = self otherᵀ`.
    pub fn outer(&self, other: &Self) -> Matrix<D> {
        let mut m = Matrix::zero();
        for i in 0..D {
            for j in 0..D {
                m.0[i][j] = self.0[i] * other.0[j];
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = *self;
        for v in out.0.iter_mut() {
            *v = f(*v);
        }
        out
    }

    /// Normalized copy; a zero vector is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            *self * (1.0 / n)
        } else {
            *self
        }
    }
}

impl<const D: usize> Index<usize> for Vector<D> {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<const D: usize> IndexMut<usize> for Vector<D> {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<const D: usize> Add for Vector<D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const D: usize> AddAssign for Vector<D> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] += rhs.0[i];
        }
    }
}

impl<const D: usize> Sub for Vector<D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const D: usize> SubAssign for Vector<D> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..D {
            self.0[i] -= rhs.0[i];
        }
    }
}

impl<const D: usize> Neg for Vector<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const D: usize> Mul<f64> for Vector<D> {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for v in self.0.iter_mut() {
            *v *= s;
        }
        self
    }
}

impl<const D: usize> Matrix<D> {
    pub const fn zero() -> Self {
        Matrix([[0.0; D]; D])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..D {
            m.0[i][i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: [f64; D]) -> Self {
        let mut m = Self::zero();
        for i in 0..D {
            m.0[i][i] = diag[i];
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: [Vector<D>; D]) -> Self {
        let mut m = Self::zero();
        for j in 0..D {
            for i in 0..D {
                m.0[i][j] = cols[j].0[i];
            }
        }
        m
    }

    pub fn column(&self, j: usize) -> Vector<D> {
        let mut v = Vector::zero();
        for i in 0..D {
            v.0[i] = self.0[i][j];
        }
        v
    }

    pub fn row(&self, i: usize) -> Vector<D> {
        Vector(self.0[i])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..D {
            for j in 0..D {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..D).map(|i| self.0[i][i]).sum()
    }

    /// Frobenius inner product `A : B = tr(Aᵀ B)`.
    pub fn frobenius_dot(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..D {
            for j in 0..D {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn norm_squared(&self) -> f64 {
        self.frobenius_dot(self)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_squared())
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flat_map(|r| r.iter()).all(|v| v.is_finite())
    }

    pub fn symmetric_part(&self) -> Self {
        (*self + self.transpose()) * 0.5
    }

    pub fn det(&self) -> f64 {
        assert_dim::<D>();
        let m = &self.0;
        if D == 2 {
            m[0][0] * m[1][1] - m[0][1] * m[1][0]
        } else {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }

    /// Cofactor matrix, `A · cof(A)ᵀ = det(A) 𝟙`. Defined for singular `A`.
    pub fn cofactor(&self) -> Self {
        assert_dim::<D>();
        let m = &self.0;
        let mut c = Self::zero();
        if D == 2 {
            c.0[0][0] = m[1][1];
            c.0[0][1] = -m[1][0];
            c.0[1][0] = -m[0][1];
            c.0[1][1] = m[0][0];
        } else {
            for i in 0..3 {
                for j in 0..3 {
                    let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
                    let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                    c.0[i][j] = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
                }
            }
        }
        c
    }

    /// Inverse through Cramer's rule, `cof(A)ᵀ / det A`. `None` if singular.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(self.cofactor().transpose() * (1.0 / det))
    }

    pub fn mul_vec(&self, v: &Vector<D>) -> Vector<D> {
        let mut out = Vector::zero();
        for i in 0..D {
            let mut s = 0.0;
            for j in 0..D {
                s += self.0[i][j] * v.0[j];
            }
            out.0[i] = s;
        }
        out
    }

    /// `selfᵀ v`.
    pub fn tr_mul_vec(&self, v: &Vector<D>) -> Vector<D> {
        let mut out = Vector::zero();
        for j in 0..D {
            let mut s = 0.0;
            for i in 0..D {
                s += self.0[i][j] * v.0[i];
            }
            out.0[j] = s;
        }
        out
    }

    /// Bilinear form `uᵀ A v`.
    pub fn bilinear(&self, u: &Vector<D>, v: &Vector<D>) -> f64 {
        u.dot(&self.mul_vec(v))
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..D {
            for j in 0..D {
                out.0[i][j] *= other.0[i][j];
            }
        }
        out
    }

    pub fn asymmetry(&self) -> f64 {
        (*self - self.transpose()).max_abs()
    }
}

impl<const D: usize> Index<(usize, usize)> for Matrix<D> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl<const D: usize> IndexMut<(usize, usize)> for Matrix<D> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl<const D: usize> Add for Matrix<D> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const D: usize> AddAssign for Matrix<D> {
    fn add_assign(&mut self, rhs: Self) {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl<const D: usize> Sub for Matrix<D> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<const D: usize> SubAssign for Matrix<D> {
    fn sub_assign(&mut self, rhs: Self) {
        for i in 0..D {
            for j in 0..D {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl<const D: usize> Neg for Matrix<D> {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl<const D: usize> Mul<f64> for Matrix<D> {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for row in self.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }
}

impl<const D: usize> Mul for Matrix<D> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..D {
            for k in 0..D {
                let a = self.0[i][k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..D {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }
}

impl<const D: usize> Mul<Vector<D>> for Matrix<D> {
    type Output = Vector<D>;
    fn mul(self, v: Vector<D>) -> Vector<D> {
        self.mul_vec(&v)
    }
}

/// Spectral decomposition of a symmetric matrix, `M = V diag(λ) Vᵀ`, with the
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone, Copy)]
pub struct SymEigen<const D: usize> {
    pub values: [f64; D],
    pub vectors: Matrix<D>,
}

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 32;

impl<const D: usize> SymEigen<D> {
    /// Decomposes the symmetric part of `m`. Closed form for d = 2, cyclic
    /// Jacobi for d = 3.
    pub fn new(m: &Matrix<D>) -> Self {
        assert_dim::<D>();
        let m = m.symmetric_part();
        if D == 2 {
            Self::closed_form_2(&m)
        } else {
            Self::jacobi(&m)
        }
    }

    fn closed_form_2(m: &Matrix<D>) -> Self {
        let (a, b, c) = (m.0[0][0], m.0[0][1], m.0[1][1]);
        let theta = 0.5 * math::atan2(2.0 * b, a - c);
        let (s, co) = (math::sin(theta), math::cos(theta));
        let l1 = a * co * co + 2.0 * b * s * co + c * s * s;
        let l2 = a * s * s - 2.0 * b * s * co + c * co * co;
        let mut vectors = Matrix::zero();
        vectors.0[0][0] = co;
        vectors.0[1][0] = s;
        vectors.0[0][1] = -s;
        vectors.0[1][1] = co;
        let mut values = [0.0; D];
        values[0] = l1;
        values[1] = l2;
        SymEigen { values, vectors }
    }

    fn jacobi(m: &Matrix<D>) -> Self {
        let mut a = *m;
        let mut v = Matrix::<D>::identity();
        let scale = a.norm().max(f64::MIN_POSITIVE);
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..D {
                for q in (p + 1)..D {
                    off += a.0[p][q] * a.0[p][q];
                }
            }
            if math::sqrt(off) <= JACOBI_TOL * scale {
                break;
            }
            for p in 0..D {
                for q in (p + 1)..D {
                    let apq = a.0[p][q];
                    if apq == 0.0 {
                        continue;
                    }
                    let tau = (a.0[q][q] - a.0[p][p]) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + math::sqrt(1.0 + tau * tau))
                    } else {
                        -1.0 / (-tau + math::sqrt(1.0 + tau * tau))
                    };
                    let c = 1.0 / math::sqrt(1.0 + t * t);
                    let s = t * c;
                    // A ← Jᵀ A J with J the rotation in the (p, q) plane.
                    for k in 0..D {
                        let akp = a.0[k][p];
                        let akq = a.0[k][q];
                        a.0[k][p] = c * akp - s * akq;
                        a.0[k][q] = s * akp + c * akq;
                    }
                    for k in 0..D {
                        let apk = a.0[p][k];
                        let aqk = a.0[q][k];
                        a.0[p][k] = c * apk - s * aqk;
                        a.0[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..D {
                        let vkp = v.0[k][p];
                        let vkq = v.0[k][q];
                        v.0[k][p] = c * vkp - s * vkq;
                        v.0[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut values = [0.0; D];
        for (i, val) in values.iter_mut().enumerate() {
            *val = a.0[i][i];
        }
        SymEigen { values, vectors: v }
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix<D> {
        let mut out = Matrix::zero();
        for k in 0..D {
            let fk = f(self.values[k]);
            for i in 0..D {
                for j in 0..D {
                    out.0[i][j] += fk * self.vectors.0[i][k] * self.vectors.0[j][k];
                }
            }
        }
        out
    }

    /// First divided differences of a spectral function `f` at the eigenvalues,
    /// with `f'` on (near-)coincident pairs.
    fn divided_differences(&self, f: &impl Fn(f64) -> f64, df: &impl Fn(f64) -> f64) -> Matrix<D> {
        let mut dd = Matrix::zero();
        for i in 0..D {
            for j in 0..D {
                let (li, lj) = (self.values[i], self.values[j]);
                let gap = li - lj;
                dd.0[i][j] = if gap.abs() <= 1e-8 * li.abs().max(lj.abs()).max(1.0) {
                    0.5 * (df(li) + df(lj))
                } else {
                    (f(li) - f(lj)) / gap
                };
            }
        }
        dd
    }

    /// Pulls a sensitivity `g = ∂E/∂F(M)` back through the spectral function
    /// `F(M) = V diag(f(λ)) Vᵀ`, returning `∂E/∂M` (Daleckii–Krein formula).
    pub fn pullback(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, g: &Matrix<D>) -> Matrix<D> {
        let dd = self.divided_differences(&f, &df);
        let v = self.vectors;
        let inner = (v.transpose() * *g * v).hadamard(&dd);
        v * inner * v.transpose()
    }

    /// Directional derivative of the spectral function in direction `e`.
    pub fn directional(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, e: &Matrix<D>) -> Matrix<D> {
        self.pullback(f, df, e)
    }
}

fn check_spd<const D: usize>(m: &Matrix<D>) -> Result<SymEigen<D>, TensorError> {
    if m.asymmetry() > 1e-10 * m.max_abs().max(1.0) || !m.is_finite() {
        return Err(TensorError::NotSpd);
    }
    let eig = SymEigen::new(m);
    if eig.values.iter().any(|&l| l <= 0.0) {
        return Err(TensorError::NotSpd);
    }
    Ok(eig)
}

/// `(M^{1/2}, M^{-1/2})` for symmetric positive definite `M`.
pub fn spd_sqrt_pair<const D: usize>(m: &Matrix<D>) -> Result<(Matrix<D>, Matrix<D>), TensorError> {
    let eig = check_spd(m)?;
    Ok((eig.map(math::sqrt), eig.map(|l| 1.0 / math::sqrt(l))))
}

/// Regularized absolute value `λ ↦ max(|λ|, τ)`.
#[inline]
pub fn reg_abs_scalar(lambda: f64, tau: f64) -> f64 {
    lambda.abs().max(tau)
}

/// Derivative of [`reg_abs_scalar`] away from its kinks.
#[inline]
pub fn reg_abs_scalar_derivative(lambda: f64, tau: f64) -> f64 {
    if lambda.abs() > tau {
        lambda.signum()
    } else {
        0.0
    }
}

/// Applies `λ ↦ max(|λ|, τ)` to the spectrum of a symmetric matrix.
pub fn reg_abs<const D: usize>(m: &Matrix<D>, tau: f64) -> Matrix<D> {
    SymEigen::new(m).map(|l| reg_abs_scalar(l, tau))
}

const UNIT_TOL: f64 = 1e-10;
const ANTIPODE_GUARD: f64 = 1e-8;

/// A proper rotation `Q` with `Q e_d = e`.
///
/// Rodrigues rotation about `e_d × e` when `e_d · e ≥ 0`, otherwise two
/// reflections; `−e_d` maps to `diag(1, …, −1, −1)`.
pub fn rotation_to<const D: usize>(e: &Vector<D>) -> Result<Matrix<D>, TensorError> {
    assert_dim::<D>();
    if (e.norm() - 1.0).abs() > UNIT_TOL {
        return Err(TensorError::NotUnit);
    }
    let mut q = Matrix::zero();
    if D == 2 {
        // Columns (e_y, −e_x) and e.
        q.0[0][0] = e.0[1];
        q.0[1][0] = -e.0[0];
        q.0[0][1] = e.0[0];
        q.0[1][1] = e.0[1];
        return Ok(q);
    }
    let c = e.0[D - 1];
    if c <= -1.0 + ANTIPODE_GUARD {
        let mut diag = [1.0; D];
        diag[D - 1] = -1.0;
        diag[D - 2] = -1.0;
        return Ok(Matrix::from_diagonal(diag));
    }
    if c < 0.0 {
        // reflection swapping e_3 and e, composed with a flip of e_2
        let u = Vector::<D>::unit(D - 1) - *e;
        let r = Matrix::identity() - u.outer(&u) * (2.0 / u.norm_squared());
        let mut flip = [1.0; D];
        flip[1] = -1.0;
        return Ok(r * Matrix::from_diagonal(flip));
    }
    // axis v = e_3 × e
    let v = [-e.0[1], e.0[0], 0.0];
    let mut k = Matrix::<D>::zero();
    k.0[0][1] = -v[2];
    k.0[0][2] = v[1];
    k.0[1][0] = v[2];
    k.0[1][2] = -v[0];
    k.0[2][0] = -v[1];
    k.0[2][1] = v[0];
    q = Matrix::identity() + k + (k * k) * (1.0 / (1.0 + c));
    Ok(q)
}

/// Orthogonal projection `𝟙 − n ⊗ n` onto the hyperplane normal to `n`.
pub fn projection<const D: usize>(n: &Vector<D>) -> Matrix<D> {
    Matrix::identity() - n.outer(n)
}
