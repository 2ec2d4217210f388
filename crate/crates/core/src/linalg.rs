//! Dense linear-algebra kernels shared by the sphere and Grassmannian fits.
//!
//! Everything here is a pure function of its inputs. Singular systems are
//! returned in a canonical order so that nested fits and regression tests
//! are reproducible: ascending singular value, tied values grouped and
//! given a basis built from the standard axes, each vector's first
//! non-negligible component made positive, ties ordered by descending
//! lexicographic order (so e₁ precedes e₂).

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{PssaError, Result};
use crate::tolerance::TOL;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Components smaller than this are skipped when fixing a vector's sign.
const SIGN_EPS: f64 = 1e-10;

/// A matrix with orthonormal columns (`VᵀV = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame(Matrix);

impl OrthonormalFrame {
    /// Wraps `m` after checking `‖mᵀm − I‖_F ≤ 1e-10`.
    pub fn new(m: Matrix) -> Result<Self> {
        let dev = orthonormality_defect(&m);
        if !(dev <= TOL.orthonormality) {
            return Err(PssaError::Validation(format!(
                "frame is not orthonormal (‖VᵀV − I‖_F = {dev:e})"
            )));
        }
        Ok(OrthonormalFrame(m))
    }

    pub(crate) fn new_unchecked(m: Matrix) -> Self {
        OrthonormalFrame(m)
    }

    /// The first `m` columns of the identity in ℝⁿ.
    pub fn axes(n: usize, m: usize) -> Self {
        OrthonormalFrame(Matrix::identity(n, m))
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn frame_dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn column(&self, j: usize) -> Vector {
        self.0.column(j).into_owned()
    }

    /// Orthonormal basis of the orthogonal complement, obtained by a full
    /// orthogonal completion of this frame.
    pub fn complement(&self) -> OrthonormalFrame {
        let n = self.ambient_dim();
        let m = self.frame_dim();
        if m == n {
            return OrthonormalFrame(Matrix::zeros(n, 0));
        }
        let full = orthogonal_completion(&self.0);
        OrthonormalFrame(full.columns(m, n - m).into_owned())
    }

    /// Projector `VVᵀ` onto the span.
    pub fn projector(&self) -> Matrix {
        &self.0 * self.0.transpose()
    }

    /// Rows of the frame matrix, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }
}

/// `‖MᵀM − I‖_F`.
pub fn orthonormality_defect(m: &Matrix) -> f64 {
    let g = m.transpose() * m;
    (g - Matrix::identity(m.ncols(), m.ncols())).norm()
}

/// Orthonormal basis of the column space of `m`.
///
/// Fails with [`PssaError::RankDeficient`] when the smallest singular value
/// is below `1e-12` times the largest.
pub fn orthonormalize(m: &Matrix) -> Result<OrthonormalFrame> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Err(PssaError::dim("cannot orthonormalize an empty matrix"));
    }
    if m.ncols() > m.nrows() {
        return Err(PssaError::RankDeficient {
            smallest: 0.0,
            largest: m.norm(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(PssaError::Validation("matrix has non-finite entries".into()));
    }
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.max();
    let smallest = sv.min();
    if !(largest > 0.0) || smallest <= TOL.rank * largest {
        return Err(PssaError::RankDeficient { smallest, largest });
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    // one re-orthogonalization pass keeps ‖QᵀQ − I‖ at rounding level
    let q = reorthogonalize(q);
    Ok(OrthonormalFrame(q))
}

fn reorthogonalize(mut q: Matrix) -> Matrix {
    for j in 0..q.ncols() {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let ci = q.column(i).into_owned();
            q.column_mut(j).axpy(-proj, &ci, 1.0);
        }
        let nrm = q.column(j).norm();
        q.column_mut(j).unscale_mut(nrm);
    }
    q
}

/// Square orthogonal matrix whose first `m` columns span the columns of `v`
/// (`v` is assumed orthonormal). The remaining columns are the left singular
/// vectors of `[v | 0]` for the zero singular values.
pub fn orthogonal_completion(v: &Matrix) -> Matrix {
    let n = v.nrows();
    let m = v.ncols();
    let mut padded = Matrix::zeros(n, n);
    padded.columns_mut(0, m).copy_from(v);
    let (u, _) = canonical_left_singular_system(&padded);
    // u is ascending; the last m columns carry the unit singular values
    let mut out = Matrix::zeros(n, n);
    out.columns_mut(0, m).copy_from(v);
    out.columns_mut(m, n - m).copy_from(&u.columns(0, n - m));
    reorthogonalize(out)
}

/// Full left singular system of `x` (n × d) in canonical ascending order.
///
/// Returns an n × n orthogonal matrix whose columns are left singular
/// vectors, and the n singular values (zero-padded when d < n).
pub fn canonical_left_singular_system(x: &Matrix) -> (Matrix, Vec<f64>) {
    let n = x.nrows();
    let d = x.ncols();
    let work = if d < n {
        let mut p = Matrix::zeros(n, n);
        p.columns_mut(0, d).copy_from(x);
        p
    } else {
        x.clone()
    };
    let svd = work.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut pairs: Vec<(f64, Vector)> = svd
        .singular_values
        .iter()
        .copied()
        .zip(u.column_iter().map(|c| c.into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let scale = pairs.last().map(|p| p.0).unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let mut ordered: Vec<(f64, Vector)> = Vec::with_capacity(n);
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= TOL.singular_tie * scale {
            end += 1;
        }
        let group = &pairs[start..end];
        let mut vecs: Vec<Vector> = if group.len() == 1 {
            vec![group[0].1.clone()]
        } else {
            canonical_basis_of_span(group.iter().map(|p| &p.1))
        };
        for v in vecs.iter_mut() {
            canonicalize_sign(v);
        }
        vecs.sort_by(|a, b| lexicographic(b, a));
        for (i, v) in vecs.into_iter().enumerate() {
            ordered.push((group[i].0, v));
        }
        start = end;
    }

    let mut out = Matrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (j, (s, v)) in ordered.into_iter().enumerate() {
        out.set_column(j, &v);
        values.push(s);
    }
    (out, values)
}

/// Basis of span(vs) obtained by Gram–Schmidt on the projected standard
/// axes e₁, e₂, … in order. Independent of which basis of the span is given.
fn canonical_basis_of_span<'a>(vs: impl Iterator<Item = &'a Vector>) -> Vec<Vector> {
    let cols: Vec<&Vector> = vs.collect();
    let r = cols.len();
    let n = cols[0].len();
    let q = Matrix::from_columns(&cols.iter().map(|c| (*c).clone()).collect::<Vec<_>>());
    let p = &q * q.transpose();
    let mut basis: Vec<Vector> = Vec::with_capacity(r);
    // well-conditioned axes are accepted first, weaker ones in later passes
    for level in [0.5, 1e-3, 1e-8] {
        for j in 0..n {
            if basis.len() == r {
                break;
            }
            let mut v: Vector = p.column(j).into_owned();
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
            let nrm = v.norm();
            if nrm > level {
                let mut v = v / nrm;
                // second pass against rounding
                for b in &basis {
                    let c = b.dot(&v);
                    v.axpy(-c, b, 1.0);
                }
                let nrm2 = v.norm();
                basis.push(v / nrm2);
            }
        }
        if basis.len() == r {
            break;
        }
    }
    basis
}

fn canonicalize_sign(v: &mut Vector) {
    if let Some(first) = v.iter().copied().find(|c| c.abs() > SIGN_EPS) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

fn lexicographic(a: &Vector, b: &Vector) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        // snap rounding noise so exact ties compare equal
        let (x, y) = (snap(*x), snap(*y));
        match x.total_cmp(&y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn snap(x: f64) -> f64 {
    if x.abs() <= SIGN_EPS {
        0.0
    } else {
        x
    }
}

/// Left singular vectors of `x` for its `m` smallest singular values.
///
/// `x` is n × d (columns are data). Returns the n × m frame and the full
/// list of n singular values of `xᵀ` in nondecreasing order.
pub fn smallest_singular_subspace(x: &Matrix, m: usize) -> Result<(OrthonormalFrame, Vec<f64>)> {
    let n = x.nrows();
    if m == 0 || m > n {
        return Err(PssaError::dim(format!(
            "requested {m} singular directions in ambient dimension {n}"
        )));
    }
    if x.ncols() == 0 {
        return Err(PssaError::dim("data matrix has no columns"));
    }
    let (u, values) = canonical_left_singular_system(x);
    let frame = u.columns(0, m).into_owned();
    Ok((OrthonormalFrame(frame), values))
}

/// `‖(I − BBᵀ) A‖_F`: how far span(A) is from lying inside span(B).
pub fn projection_residual(inner: &OrthonormalFrame, outer: &OrthonormalFrame) -> f64 {
    let a = inner.matrix();
    let b = outer.matrix();
    (a - b * (b.transpose() * a)).norm()
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PssaError::Validation("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn identity_is_already_orthonormal() {
        let f = orthonormalize(&Matrix::identity(3, 2)).unwrap();
        assert!((f.matrix() - Matrix::identity(3, 2)).norm() < 1e-14);
    }

    #[test]
    fn axis_scaling_orthonormalizes_to_axes() {
        let m = Matrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let f = orthonormalize(&m).unwrap();
        assert!((f.matrix() - Matrix::identity(3, 2)).norm() < 1e-14);
    }

    #[test]
    fn random_matrix_gram_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = gaussian(&mut rng, 5, 3);
        let f = orthonormalize(&m).unwrap();
        assert!(orthonormality_defect(f.matrix()) < 1e-10);
        // span check: m lies in span(f)
        let res = &m - f.projector() * &m;
        assert!(res.norm() < 1e-10 * m.norm());
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let m = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(orthonormalize(&m), Err(PssaError::RankDeficient { .. })));
    }

    #[test]
    fn plane_data_gives_normal_axis() {
        let x = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (f, sv) = smallest_singular_subspace(&x, 1).unwrap();
        assert!((f.column(0) - Vector::from_vec(vec![0.0, 0.0, 1.0])).norm() < 1e-12);
        assert!(sv[0].abs() < 1e-14);
    }

    #[test]
    fn degenerate_spectrum_is_deterministic_axes() {
        let (f, sv) = smallest_singular_subspace(&Matrix::identity(3, 3), 2).unwrap();
        for s in &sv {
            assert!((s - 1.0).abs() < 1e-14);
        }
        // every column is a signed axis vector
        for j in 0..2 {
            let c = f.column(j);
            let big = c.iter().filter(|v| (v.abs() - 1.0).abs() < 1e-12).count();
            assert_eq!(big, 1);
        }
        let (g, _) = smallest_singular_subspace(&Matrix::identity(3, 3), 2).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn tie_breaking_ignores_input_rotation() {
        // same data span rotated inside a degenerate eigenspace
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = orthonormalize(&gaussian(&mut rng, 4, 4)).unwrap();
        let x1 = q.matrix().clone();
        let rot = orthonormalize(&gaussian(&mut rng, 4, 4)).unwrap();
        let x2 = q.matrix() * rot.matrix();
        let (a, _) = smallest_singular_subspace(&x1, 2).unwrap();
        let (b, _) = smallest_singular_subspace(&x2, 2).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-8);
    }

    #[test]
    fn bad_m_is_dimension_error() {
        let x = Matrix::identity(3, 3);
        assert!(matches!(smallest_singular_subspace(&x, 0), Err(PssaError::Dimension(_))));
        assert!(matches!(smallest_singular_subspace(&x, 4), Err(PssaError::Dimension(_))));
    }

    #[test]
    fn smallest_subspace_beats_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = gaussian(&mut rng, 4, 20);
        let (v, sv) = smallest_singular_subspace(&x, 2).unwrap();
        let fitted = (x.transpose() * v.matrix()).norm_squared();
        let expect = sv[0] * sv[0] + sv[1] * sv[1];
        assert!((fitted - expect).abs() <= 1e-8 * expect.max(1.0));
        for _ in 0..10_000 {
            let w = orthonormalize(&gaussian(&mut rng, 4, 2)).unwrap();
            let e = (x.transpose() * w.matrix()).norm_squared();
            assert!(fitted <= e + 1e-12);
        }
    }

    #[test]
    fn complement_is_orthogonal_completion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = orthonormalize(&gaussian(&mut rng, 5, 2)).unwrap();
        let c = f.complement();
        assert_eq!(c.frame_dim(), 3);
        assert!(orthonormality_defect(c.matrix()) < 1e-12);
        assert!((f.matrix().transpose() * c.matrix()).norm() < 1e-12);
    }
}
