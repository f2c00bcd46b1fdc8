//! Projected matrix blocks entering the shell terms, with hand-written
//! gradients.

use crate::stored_energy::{EnergyError, StoredEnergy};
use crate::tensor::{projection, spd_sqrt_pair, Matrix, TensorError, Vector};

/// Projected tangential derivative `P₂ A P₁ + n₂ ⊗ n₁`.
pub fn d_tt<const D: usize>(a: &Matrix<D>, n1: &Vector<D>, n2: &Vector<D>) -> Matrix<D> {
    projection(n2) * *a * projection(n1) + n2.outer(n1)
}

/// Classifier `P₂ N^½ P₂ A P₁ M^{-½} P₁ + n₂ ⊗ n₁` for SPD `M`, `N`.
pub fn classifier<const D: usize>(
    m: &Matrix<D>,
    n: &Matrix<D>,
    a: &Matrix<D>,
    n1: &Vector<D>,
    n2: &Vector<D>,
) -> Result<Matrix<D>, TensorError> {
    let (_, m_inv_half) = spd_sqrt_pair(m)?;
    let (n_half, _) = spd_sqrt_pair(n)?;
    let p1 = projection(n1);
    let p2 = projection(n2);
    Ok(p2 * n_half * p2 * *a * p1 * m_inv_half * p1 + n2.outer(n1))
}

/// Classifier of the inverse deformation, `Λ[N, M, A⁻¹, n₂, n₁]`.
pub fn inverse_classifier<const D: usize>(
    m: &Matrix<D>,
    n: &Matrix<D>,
    a: &Matrix<D>,
    n1: &Vector<D>,
    n2: &Vector<D>,
) -> Result<Matrix<D>, TensorError> {
    let b = a.inverse().ok_or(TensorError::NotSpd)?;
    classifier(n, m, &b, n2, n1)
}

/// `P₁ (cof Aᵀ / det A) P₂ + n₁ ⊗ n₂`, the projected derivative of the
/// inverse deformation.
pub fn inverse_projected_block<const D: usize>(
    a: &Matrix<D>,
    n1: &Vector<D>,
    n2: &Vector<D>,
) -> Result<Matrix<D>, EnergyError> {
    let det = a.det();
    if det <= 0.0 {
        return Err(EnergyError::NonpositiveDeterminant);
    }
    let b = a.cofactor().transpose() * (1.0 / det);
    Ok(projection(n1) * b * projection(n2) + n1.outer(n2))
}

/// Gradient with respect to `n` of a function of `P = 𝟙 − n⊗n` with
/// gradient `g_p`.
pub(crate) fn projection_pullback<const D: usize>(n: &Vector<D>, g_p: &Matrix<D>) -> Vector<D> {
    -((*g_p + g_p.transpose()).mul_vec(n))
}

pub(crate) struct BlockGrad<const D: usize> {
    pub value: f64,
    /// Gradient with respect to the deformation-side matrix (`A` or `B`).
    pub g_mat: Matrix<D>,
    pub g_n2: Vector<D>,
    /// Gradient with respect to `N^{±½}` (bending blocks only).
    pub g_root: Matrix<D>,
}

/// `W(P₂ A P₁ + n₂ ⊗ n₁)`.
pub(crate) fn membrane_direct<const D: usize>(
    w: StoredEnergy,
    a: &Matrix<D>,
    n1: &Vector<D>,
    p1: &Matrix<D>,
    n2: &Vector<D>,
) -> BlockGrad<D> {
    let p2 = projection(n2);
    let t = p2 * *a * *p1 + n2.outer(n1);
    let g = w.gradient(&t);
    let g_p2 = g * *p1 * a.transpose();
    BlockGrad {
        value: w.value(&t),
        g_mat: p2 * g * *p1,
        g_n2: g.mul_vec(n1) + projection_pullback(n2, &g_p2),
        g_root: Matrix::zero(),
    }
}

/// `W(P₁ B P₂ + n₁ ⊗ n₂)`.
pub(crate) fn membrane_inverse<const D: usize>(
    w: StoredEnergy,
    b: &Matrix<D>,
    n1: &Vector<D>,
    p1: &Matrix<D>,
    n2: &Vector<D>,
) -> BlockGrad<D> {
    let p2 = projection(n2);
    let t = *p1 * *b * p2 + n1.outer(n2);
    let g = w.gradient(&t);
    let g_p2 = b.transpose() * *p1 * g;
    BlockGrad {
        value: w.value(&t),
        g_mat: *p1 * g * p2,
        g_n2: g.tr_mul_vec(n1) + projection_pullback(n2, &g_p2),
        g_root: Matrix::zero(),
    }
}

/// `W(P₂ R P₂ A L₁ + n₂ ⊗ n₁)` with `R = N^½` and `L₁ = P₁ M^{-½} P₁`.
pub(crate) fn bending_direct<const D: usize>(
    w: StoredEnergy,
    a: &Matrix<D>,
    l1: &Matrix<D>,
    n1: &Vector<D>,
    n2: &Vector<D>,
    r: &Matrix<D>,
) -> BlockGrad<D> {
    let p2 = projection(n2);
    let q = p2 * *r * p2;
    let t = q * *a * *l1 + n2.outer(n1);
    let g = w.gradient(&t);
    let g_q = g * l1.transpose() * a.transpose();
    let g_p2 = g_q * p2 * r.transpose() + r.transpose() * p2 * g_q;
    BlockGrad {
        value: w.value(&t),
        g_mat: q.transpose() * g * l1.transpose(),
        g_n2: g.mul_vec(n1) + projection_pullback(n2, &g_p2),
        g_root: p2 * g_q * p2,
    }
}

/// `W(L₂ B P₂ R P₂ + n₁ ⊗ n₂)` with `R = N^{-½}` and `L₂ = P₁ M^½ P₁`.
pub(crate) fn bending_inverse<const D: usize>(
    w: StoredEnergy,
    b: &Matrix<D>,
    l2: &Matrix<D>,
    n1: &Vector<D>,
    n2: &Vector<D>,
    r: &Matrix<D>,
) -> BlockGrad<D> {
    let p2 = projection(n2);
    let k = p2 * *r * p2;
    let t = *l2 * *b * k + n1.outer(n2);
    let g = w.gradient(&t);
    let g_k = b.transpose() * l2.transpose() * g;
    let g_p2 = g_k * p2 * r.transpose() + r.transpose() * p2 * g_k;
    BlockGrad {
        value: w.value(&t),
        g_mat: l2.transpose() * g * k.transpose(),
        g_n2: g.tr_mul_vec(n1) + projection_pullback(n2, &g_p2),
        g_root: p2 * g_k * p2,
    }
}
