//! Great subspheres of Sⁿ ⊂ ℝⁿ⁺¹.
//!
//! A subsphere is `S_N = Sⁿ ∩ N` for a linear subspace `N`; it is stored
//! through an orthonormal basis `V` of `N⊥`. Distances to `S_N` only need
//! `Vᵀx`, which makes the best fit in the projection distance an SVD
//! problem and the fits of every codimension nested.

use serde::{Deserialize, Serialize};

use crate::error::{PssaError, Result};
use crate::linalg::{smallest_singular_subspace, Matrix, OrthonormalFrame, Vector};
use crate::tolerance::TOL;

/// A unit vector in ℝⁿ⁺¹.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(Vector);

impl SpherePoint {
    /// Accepts `coords` if its norm is within `1e-8` of one, then
    /// renormalizes so the stored point is unit to rounding.
    pub fn new(coords: Vector) -> Result<Self> {
        let norm = coords.norm();
        if !((norm - 1.0).abs() <= TOL.unit_norm) {
            return Err(PssaError::NonUnitData { index: 0, norm });
        }
        Ok(SpherePoint(coords / norm))
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn normalized(coords: Vector) -> Result<Self> {
        let norm = coords.norm();
        if !(norm > TOL.degenerate_mean) {
            return Err(PssaError::DegenerateProjection { index: 0 });
        }
        Ok(SpherePoint(coords / norm))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &Vector {
        &self.0
    }

    pub fn into_coords(self) -> Vector {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }
}

/// Best-fit great subsphere of codimension `codim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsphereModel {
    /// Dimension n of the ambient sphere Sⁿ.
    pub ambient_dim: usize,
    pub codim: usize,
    /// Orthonormal basis of `N⊥`, (n+1) × codim.
    pub complement_frame: OrthonormalFrame,
    /// Singular values of Xᵀ, nondecreasing.
    pub singular_values: Vec<f64>,
    /// Projection distance of each data point.
    pub per_point_errors: Vec<f64>,
    /// `‖XᵀV‖_F`.
    pub total_error: f64,
}

impl SubsphereModel {
    /// Intrinsic dimension n − codim of the fitted subsphere.
    pub fn dim(&self) -> usize {
        self.ambient_dim - self.codim
    }

    /// Codimension n leaves `S_N` as a pair of antipodal points.
    pub fn is_antipodal_pair(&self) -> bool {
        self.codim == self.ambient_dim
    }

    /// Orthonormal basis of `N` itself.
    pub fn subspace_basis(&self) -> OrthonormalFrame {
        self.complement_frame.complement()
    }

    /// Sum of squared projection distances.
    pub fn squared_error(&self) -> f64 {
        self.total_error * self.total_error
    }
}

fn check_dims(x: &Vector, v: &OrthonormalFrame) -> Result<()> {
    if x.len() != v.ambient_dim() {
        return Err(PssaError::dim(format!(
            "point lives in ℝ^{} but frame in ℝ^{}",
            x.len(),
            v.ambient_dim()
        )));
    }
    Ok(())
}

/// Euclidean norm of the projection of `x` onto `span(V)`, clamped to [0, 1].
fn complement_norm(x: &Vector, v: &OrthonormalFrame) -> f64 {
    let coeffs = v.matrix().transpose() * x;
    coeffs.norm().clamp(0.0, 1.0)
}

/// Great-circle distance from `x` to `S_N`, with `V` a basis of `N⊥`.
pub fn riemannian_distance_to_subsphere(x: &SpherePoint, v: &OrthonormalFrame) -> Result<f64> {
    check_dims(x.coords(), v)?;
    Ok(complement_norm(x.coords(), v).asin())
}

/// Projection distance `√Σ(x·vᵢ)²`, the sine of the Riemannian distance.
pub fn projection_distance_to_subsphere(x: &SpherePoint, v: &OrthonormalFrame) -> Result<f64> {
    check_dims(x.coords(), v)?;
    Ok(complement_norm(x.coords(), v))
}

/// Checks that every column of `x` is a unit vector (to `1e-8`).
///
/// With `renormalize` set, columns are rescaled instead; zero columns are
/// still rejected.
pub fn validate_unit_columns(x: &Matrix, renormalize: bool) -> Result<Matrix> {
    if x.nrows() < 2 {
        return Err(PssaError::dim("sphere data needs at least 2 coordinates"));
    }
    if x.ncols() == 0 {
        return Err(PssaError::Validation("sphere data is empty".into()));
    }
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !norm.is_finite() {
            return Err(PssaError::Validation(format!("point {j} has non-finite coordinates")));
        }
        if renormalize {
            if norm <= TOL.degenerate_mean {
                return Err(PssaError::NonUnitData { index: j, norm });
            }
            col.unscale_mut(norm);
        } else if (norm - 1.0).abs() > TOL.unit_norm {
            return Err(PssaError::NonUnitData { index: j, norm });
        }
    }
    Ok(out)
}

/// Stacks points as the columns of a data matrix.
pub fn points_to_matrix(points: &[SpherePoint]) -> Result<Matrix> {
    let first = points
        .first()
        .ok_or_else(|| PssaError::Validation("no points".into()))?;
    let rows = first.coords().len();
    if points.iter().any(|p| p.coords().len() != rows) {
        return Err(PssaError::dim("points have different dimensions"));
    }
    let cols: Vec<Vector> = points.iter().map(|p| p.coords().clone()).collect();
    Ok(Matrix::from_columns(&cols))
}

/// Best approximating great (n − m)-sphere in the projection distance.
///
/// `x` holds unit columns in ℝⁿ⁺¹. The complement basis is spanned by the
/// left singular vectors of the m smallest singular values of Xᵀ.
/// `m = n` is accepted and yields the best antipodal pair.
pub fn fit_subsphere(x: &Matrix, m: usize) -> Result<SubsphereModel> {
    let x = validate_unit_columns(x, false)?;
    let n = x.nrows() - 1;
    if m == 0 || m > n {
        return Err(PssaError::dim(format!("codimension {m} invalid on S^{n}")));
    }
    let (frame, singular_values) = smallest_singular_subspace(&x, m)?;
    Ok(model_from_frame(&x, frame, singular_values))
}

fn model_from_frame(x: &Matrix, frame: OrthonormalFrame, singular_values: Vec<f64>) -> SubsphereModel {
    let n = x.nrows() - 1;
    let m = frame.frame_dim();
    let proj = x.transpose() * frame.matrix();
    let per_point_errors: Vec<f64> = proj.row_iter().map(|r| r.norm()).collect();
    let total_error = proj.norm();
    SubsphereModel {
        ambient_dim: n,
        codim: m,
        complement_frame: frame,
        singular_values,
        per_point_errors,
        total_error,
    }
}

/// The unbranched nested chain Sⁿ ⊃ Sⁿ⁻¹ ⊃ … ⊃ S¹ (codimensions 1 … n−1).
///
/// Every model is cut from a single canonical singular system, so the
/// complement of codimension m is contained in that of codimension m+1.
pub fn sphere_pssa_chain(x: &Matrix) -> Result<Vec<SubsphereModel>> {
    let x = validate_unit_columns(x, false)?;
    let n = x.nrows() - 1;
    if n < 2 {
        return Ok(Vec::new());
    }
    let (full, singular_values) = smallest_singular_subspace(&x, n + 1)?;
    Ok((1..n)
        .map(|m| {
            let frame = OrthonormalFrame::new_unchecked(full.matrix().columns(0, m).into_owned());
            model_from_frame(&x, frame, singular_values.clone())
        })
        .collect())
}

/// Normalized Euclidean mean of the points (the extrinsic mean).
pub fn spherical_mean(points: &[SpherePoint]) -> Result<SpherePoint> {
    let x = points_to_matrix(points)?;
    spherical_mean_of_columns(&x)
}

pub fn spherical_mean_of_columns(x: &Matrix) -> Result<SpherePoint> {
    if x.ncols() == 0 {
        return Err(PssaError::Validation("no points".into()));
    }
    let mean = x.column_mean();
    let norm = mean.norm();
    if !(norm > TOL.degenerate_mean) {
        return Err(PssaError::DegenerateMean(norm));
    }
    Ok(SpherePoint(mean / norm))
}

/// Great-circle distance between two unit vectors.
pub fn great_circle_distance(a: &Vector, b: &Vector) -> f64 {
    // atan2 form stays accurate for nearly equal and nearly antipodal points
    let cross = if a.len() == 3 {
        let a3 = nalgebra::Vector3::new(a[0], a[1], a[2]);
        let b3 = nalgebra::Vector3::new(b[0], b[1], b[2]);
        a3.cross(&b3).norm()
    } else {
        let d = a.dot(b);
        (a.norm_squared() * b.norm_squared() - d * d).max(0.0).sqrt()
    };
    cross.atan2(a.dot(b))
}

/// Coordinates of the renormalized projection of `x` onto `N`, expressed
/// in the basis returned by [`SubsphereModel::subspace_basis`].
pub fn project_to_subsphere(x: &SpherePoint, model: &SubsphereModel) -> Result<Vector> {
    let basis = model.subspace_basis();
    check_dims(x.coords(), &basis)?;
    let coords = basis.matrix().transpose() * x.coords();
    let norm = coords.norm();
    if !(norm > TOL.degenerate_mean) {
        return Err(PssaError::DegenerateProjection { index: 0 });
    }
    Ok(coords / norm)
}

/// Embeds intrinsic coordinates of `N` back into ℝⁿ⁺¹.
pub fn lift_from_subsphere(coords: &Vector, model: &SubsphereModel) -> Vector {
    model.subspace_basis().matrix() * coords
}

/// Serializable view of a subsphere fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsphereSummary {
    pub ambient_dim: usize,
    pub codim: usize,
    pub complement_frame: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub total_error: f64,
    pub antipodal_pair: bool,
}

impl From<&SubsphereModel> for SubsphereSummary {
    fn from(m: &SubsphereModel) -> Self {
        SubsphereSummary {
            ambient_dim: m.ambient_dim,
            codim: m.codim,
            complement_frame: m.complement_frame.to_rows(),
            singular_values: m.singular_values.clone(),
            total_error: m.total_error,
            antipodal_pair: m.is_antipodal_pair(),
        }
    }
}
