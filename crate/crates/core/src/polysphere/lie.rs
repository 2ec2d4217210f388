//! Numerical Lie triple system test on `𝔪 + … + 𝔪`, one `𝔪 ≅ ℝ²` per factor.
//!
//! For `u, v, w` in the product, `[[u, v], w]` acts factorwise as
//! `(vᵢuᵢᵀ − uᵢvᵢᵀ) wᵢ`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{PssaError, Result};
use crate::tolerance::TOL;

/// An element `(ξ₁, …, ξₙ)` of the tangent space `𝔪 + … + 𝔪`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentBlockVector(pub Vec<Vector2<f64>>);

impl TangentBlockVector {
    pub fn n_factors(&self) -> usize {
        self.0.len()
    }

    fn flatten(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.0.len(), self.0.iter().flat_map(|v| [v[0], v[1]]))
    }

    fn unflatten(v: &DVector<f64>) -> Self {
        TangentBlockVector((0..v.len() / 2).map(|i| Vector2::new(v[2 * i], v[2 * i + 1])).collect())
    }
}

/// `[[u, v], w]` computed factorwise.
pub fn triple_bracket(u: &TangentBlockVector, v: &TangentBlockVector, w: &TangentBlockVector) -> TangentBlockVector {
    TangentBlockVector(
        u.0.iter()
            .zip(&v.0)
            .zip(&w.0)
            .map(|((ui, vi), wi)| {
                let h: Matrix2<f64> = vi * ui.transpose() - ui * vi.transpose();
                h * wi
            })
            .collect(),
    )
}

/// Whether `span(basis)` is closed under the triple bracket.
///
/// The span is first given an orthonormal basis, so the outcome depends
/// only on the subspace. Membership is decided by the residual of each
/// bracket after projection onto the span, against `1e-8`.
pub fn lie_triple_check(basis: &[TangentBlockVector]) -> Result<bool> {
    let Some(first) = basis.first() else {
        return Err(PssaError::DegenerateBasis);
    };
    let n = first.n_factors();
    if n == 0 || basis.iter().any(|b| b.n_factors() != n) {
        return Err(PssaError::dim("tangent vectors disagree on the number of factors"));
    }
    let cols: Vec<DVector<f64>> = basis.iter().map(|b| b.flatten()).collect();
    let m = DMatrix::from_columns(&cols);
    let k = basis.len();
    if k > 2 * n {
        return Err(PssaError::DegenerateBasis);
    }
    let svd = m.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= TOL.rank * smax.max(1.0) * 1e2 {
        return Err(PssaError::DegenerateBasis);
    }
    let q = svd.u.ok_or(PssaError::DegenerateBasis)?.columns(0, k).into_owned();
    let onb: Vec<TangentBlockVector> = (0..k).map(|j| TangentBlockVector::unflatten(&q.column(j).into_owned())).collect();
    for u in &onb {
        for v in &onb {
            for w in &onb {
                let t = triple_bracket(u, v, w).flatten();
                let residual = (&t - &q * (q.transpose() * &t)).norm();
                if residual >= TOL.lie_triple {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Tangent model `{(ξ, Bξ)}` of a two-factor coupling with block `B`.
pub fn coupled_tangent_model(b: &Matrix2<f64>) -> Vec<TangentBlockVector> {
    [Vector2::x(), Vector2::y()]
        .iter()
        .map(|e| TangentBlockVector(vec![*e, b * e]))
        .collect()
}

/// Tangent model of `{(x, Rx)}` at `(e₁, Re₁)`.
///
/// The second factor is moved back to `e₁` by an orthogonal map `G` with
/// `Ge₁ = Re₁`; `B` is the lower-right block of `GᵀR`. For orthogonal `R`
/// this block is orthogonal.
pub fn coupling_block(r: &Matrix3<f64>) -> Matrix2<f64> {
    let image = r * Vector3::x();
    let g = householder_to(&image);
    let m = g.transpose() * r;
    Matrix2::new(m[(1, 1)], m[(1, 2)], m[(2, 1)], m[(2, 2)])
}

/// Orthogonal (reflection) map sending `e₁` to the direction of `target`.
fn householder_to(target: &Vector3<f64>) -> Matrix3<f64> {
    let norm = target.norm();
    if norm == 0.0 {
        return Matrix3::identity();
    }
    let t = target / norm;
    let w = Vector3::x() - t;
    let wn = w.norm_squared();
    if wn < 1e-30 {
        return Matrix3::identity();
    }
    Matrix3::identity() - 2.0 * w * w.transpose() / wn
}
