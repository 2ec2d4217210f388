//! k-planes in ℝⁿ and the sub-Grassmannians G(k, n−p) of planes orthogonal
//! to a fixed p-dimensional subspace W.
//!
//! Distances use the chordal metric `‖sin θ‖₂`. The distance to the set of
//! planes orthogonal to W is `‖XᵀW‖_F`, so the best W for a dataset is read
//! off the SVD of the concatenated frames, exactly as for subspheres.

use serde::{Deserialize, Serialize};

use crate::error::{PssaError, Result};
use crate::linalg::{
    orthonormalize, smallest_singular_subspace, Matrix, OrthonormalFrame,
};

/// A point of G(k, n), stored through an orthonormal n × k frame.
///
/// Only the column span matters; two frames related by a k × k orthogonal
/// matrix represent the same point.
#[derive(Debug, Clone)]
pub struct GrassmannPoint {
    frame: OrthonormalFrame,
}

impl GrassmannPoint {
    pub fn new(frame: OrthonormalFrame) -> Result<Self> {
        if frame.frame_dim() == 0 || frame.frame_dim() >= frame.ambient_dim() {
            return Err(PssaError::dim(format!(
                "a {}-frame in ℝ^{} is not a proper k-plane",
                frame.frame_dim(),
                frame.ambient_dim()
            )));
        }
        Ok(GrassmannPoint { frame })
    }

    /// The plane spanned by the columns of `m` (orthonormalized).
    pub fn span_of(m: &Matrix) -> Result<Self> {
        Self::new(orthonormalize(m)?)
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.ambient_dim()
    }

    pub fn plane_dim(&self) -> usize {
        self.frame.frame_dim()
    }

    pub fn frame(&self) -> &OrthonormalFrame {
        &self.frame
    }

    /// Equality of column spans, tested by chordal distance < 1e-8.
    pub fn is_same_plane(&self, other: &GrassmannPoint) -> bool {
        chordal_distance(self, other).map(|d| d < 1e-8).unwrap_or(false)
    }
}

fn check_pair(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<()> {
    if x.ambient_dim() != y.ambient_dim() || x.plane_dim() != y.plane_dim() {
        return Err(PssaError::dim(format!(
            "G({},{}) vs G({},{})",
            x.plane_dim(),
            x.ambient_dim(),
            y.plane_dim(),
            y.ambient_dim()
        )));
    }
    Ok(())
}

/// Principal angles between two planes, nondecreasing, in [0, π/2].
pub fn principal_angles(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<Vec<f64>> {
    check_pair(x, y)?;
    let m = x.frame.matrix().transpose() * y.frame.matrix();
    let mut angles: Vec<f64> = m
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Chordal distance `√(k − ‖XᵀY‖_F²)`.
pub fn chordal_distance(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<f64> {
    check_pair(x, y)?;
    let k = x.plane_dim() as f64;
    let overlap = (x.frame.matrix().transpose() * y.frame.matrix()).norm_squared();
    Ok((k - overlap).max(0.0).sqrt())
}

/// `‖XᵀY⊥‖_F` with `Y⊥` from a full orthogonal completion of Y's frame.
pub fn chordal_distance_via_complement(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<f64> {
    check_pair(x, y)?;
    let perp = y.frame.complement();
    Ok((x.frame.matrix().transpose() * perp.matrix()).norm())
}

/// Chordal distance from X to the planes orthogonal to span(W).
pub fn distance_to_subgrassmannian(x: &GrassmannPoint, w: &OrthonormalFrame) -> Result<f64> {
    let n = x.ambient_dim();
    let k = x.plane_dim();
    let p = w.frame_dim();
    if w.ambient_dim() != n {
        return Err(PssaError::dim(format!("W lives in ℝ^{}, X in ℝ^{n}", w.ambient_dim())));
    }
    if k + p > n {
        return Err(PssaError::dim(format!(
            "no {k}-planes fit in the complement of a {p}-dimensional W in ℝ^{n}"
        )));
    }
    Ok((x.frame.matrix().transpose() * w.matrix()).norm())
}

/// Best-fit sub-Grassmannian: planes orthogonal to a fitted W of dim p.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgrassmannianModel {
    pub ambient_dim: usize,
    pub plane_dim: usize,
    pub codim: usize,
    /// n × p basis of W.
    pub complement_frame: OrthonormalFrame,
    /// Singular values of the transposed concatenated frames, nondecreasing.
    pub singular_values: Vec<f64>,
    pub per_point_errors: Vec<f64>,
    pub total_error: f64,
}

impl SubgrassmannianModel {
    /// Dimension k(n − p − k) of the fitted G(k, n − p).
    pub fn dim(&self) -> usize {
        self.plane_dim * (self.ambient_dim - self.codim - self.plane_dim)
    }
}

fn check_planes(planes: &[GrassmannPoint]) -> Result<(usize, usize)> {
    let first = planes
        .first()
        .ok_or_else(|| PssaError::Validation("no planes".into()))?;
    let (n, k) = (first.ambient_dim(), first.plane_dim());
    if planes.iter().any(|p| p.ambient_dim() != n || p.plane_dim() != k) {
        return Err(PssaError::dim("planes have mixed dimensions"));
    }
    Ok((n, k))
}

/// Concatenates the frames into an n × kd matrix.
pub fn concatenate_frames(planes: &[GrassmannPoint]) -> Result<Matrix> {
    let (n, k) = check_planes(planes)?;
    let mut x = Matrix::zeros(n, k * planes.len());
    for (i, p) in planes.iter().enumerate() {
        x.columns_mut(i * k, k).copy_from(p.frame.matrix());
    }
    Ok(x)
}

fn model_from_frame(
    planes: &[GrassmannPoint],
    x: &Matrix,
    w: OrthonormalFrame,
    singular_values: Vec<f64>,
) -> SubgrassmannianModel {
    let (n, k) = (planes[0].ambient_dim(), planes[0].plane_dim());
    let per_point_errors: Vec<f64> = planes
        .iter()
        .map(|p| (p.frame.matrix().transpose() * w.matrix()).norm())
        .collect();
    let total_error = (x.transpose() * w.matrix()).norm();
    SubgrassmannianModel {
        ambient_dim: n,
        plane_dim: k,
        codim: w.frame_dim(),
        complement_frame: w,
        singular_values,
        per_point_errors,
        total_error,
    }
}

/// W minimizing the summed squared chordal distances, for `0 < p ≤ n − k`.
pub fn fit_subgrassmannian(planes: &[GrassmannPoint], p: usize) -> Result<SubgrassmannianModel> {
    let (n, k) = check_planes(planes)?;
    if p == 0 || p + k > n {
        return Err(PssaError::dim(format!("codimension {p} invalid for G({k},{n})")));
    }
    let x = concatenate_frames(planes)?;
    let (w, sv) = smallest_singular_subspace(&x, p)?;
    Ok(model_from_frame(planes, &x, w, sv))
}

/// Nested chain of fits for p = 1 … p_max.
pub fn grassmann_pssa_chain(planes: &[GrassmannPoint], p_max: usize) -> Result<Vec<SubgrassmannianModel>> {
    let (n, k) = check_planes(planes)?;
    if p_max + k > n {
        return Err(PssaError::dim(format!("p_max {p_max} exceeds n − k = {}", n - k)));
    }
    if p_max == 0 {
        return Ok(Vec::new());
    }
    let x = concatenate_frames(planes)?;
    let (full, sv) = smallest_singular_subspace(&x, p_max)?;
    Ok((1..=p_max)
        .map(|p| {
            let w = OrthonormalFrame::new_unchecked(full.matrix().columns(0, p).into_owned());
            model_from_frame(planes, &x, w, sv.clone())
        })
        .collect())
}

/// Nearest plane orthogonal to W: project the frame onto W⊥ and
/// re-orthonormalize.
pub fn project_to_subgrassmannian(x: &GrassmannPoint, w: &OrthonormalFrame) -> Result<GrassmannPoint> {
    distance_to_subgrassmannian(x, w)?;
    let xm = x.frame.matrix();
    let projected = xm - w.matrix() * (w.matrix().transpose() * xm);
    let frame = orthonormalize(&projected).map_err(|_| PssaError::DegenerateProjection { index: 0 })?;
    GrassmannPoint::new(frame)
}

/// Serializable view of a sub-Grassmannian fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgrassmannianSummary {
    pub ambient_dim: usize,
    pub plane_dim: usize,
    pub codim: usize,
    pub complement_frame: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub total_error: f64,
}

impl From<&SubgrassmannianModel> for SubgrassmannianSummary {
    fn from(m: &SubgrassmannianModel) -> Self {
        SubgrassmannianSummary {
            ambient_dim: m.ambient_dim,
            plane_dim: m.plane_dim,
            codim: m.codim,
            complement_frame: m.complement_frame.to_rows(),
            singular_values: m.singular_values.clone(),
            total_error: m.total_error,
        }
    }
}
