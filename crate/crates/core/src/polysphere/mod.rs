//! Geodesic submanifolds of the polysphere (S²)ⁿ.
//!
//! Every totally geodesic submanifold is a product of 2-spheres and circles
//! built from three moves: coupling two spheres as `{(x, Rx)}` with `R`
//! orthogonal, cutting a sphere to a great circle (or a circle to a point),
//! and cutting the torus formed by the circles with resonance relations.

pub mod lie;
pub mod model;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{PssaError, Result};
use crate::linalg::Matrix;
use crate::sphere::{fit_subsphere, spherical_mean_of_columns};
use crate::tolerance::TOL;
use crate::torus::wrap01;

pub use lie::{coupled_tangent_model, coupling_block, lie_triple_check, triple_bracket, TangentBlockVector};
pub use model::{
    candidate_edges, enumerate_polysphere_models, fit_polysphere_model, polysphere_loo_error, EdgeFit,
    PolysphereConfig, PolysphereData, PolysphereEdge, PolysphereFit, PolysphereModel, PolysphereState,
    PolysphereTemplate, TemplatePart,
};

/// A point of (S²)ⁿ: one unit vector in ℝ³ per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyspherePoint {
    factors: Vec<Vector3<f64>>,
}

impl PolyspherePoint {
    /// Each factor must be unit to `1e-8`; factors are renormalized.
    pub fn new(factors: Vec<Vector3<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(PssaError::dim("polysphere point without factors"));
        }
        let mut out = Vec::with_capacity(factors.len());
        for (index, f) in factors.into_iter().enumerate() {
            let norm = f.norm();
            if !((norm - 1.0).abs() <= TOL.unit_norm) {
                return Err(PssaError::NonUnitData { index, norm });
            }
            out.push(f / norm);
        }
        Ok(PolyspherePoint { factors: out })
    }

    /// Reads `3n` reals as n consecutive factors.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.is_empty() || coords.len() % 3 != 0 {
            return Err(PssaError::dim(format!("{} reals do not form factors in ℝ³", coords.len())));
        }
        Self::new(coords.chunks(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect())
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, i: usize) -> &Vector3<f64> {
        &self.factors[i]
    }

    pub fn factors(&self) -> &[Vector3<f64>] {
        &self.factors
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|f| [f[0], f[1], f[2]]).collect()
    }
}

pub(crate) fn gc3(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn columns(points: &[Vector3<f64>]) -> Matrix {
    DMatrix::from_fn(3, points.len(), |i, j| points[j][i])
}

/// Procrustes fit of `{(x, Rx)}` with `R ∈ O(3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledFit {
    pub rotation: Matrix3<f64>,
    /// Great-circle distance from `yᵢ` to `Rxᵢ`.
    pub per_pair_errors: Vec<f64>,
    /// Sum of squared per-pair errors.
    pub error: f64,
    /// The cross-covariance was rank deficient or had tied singular values,
    /// so `R` is not unique.
    pub degenerate: bool,
}

/// Best orthogonal `R` with `yᵢ ≈ Rxᵢ`.
///
/// With `M = Σ yᵢxᵢᵀ = USVᵀ`, both `UVᵀ` and `U·diag(1,1,−1)·Vᵀ` are
/// evaluated and the one with smaller great-circle error is kept.
pub fn fit_coupled_spheres(pairs: &[(Vector3<f64>, Vector3<f64>)]) -> Result<CoupledFit> {
    if pairs.is_empty() {
        return Err(PssaError::dim("coupling fit needs at least one pair"));
    }
    let m: Matrix3<f64> = pairs.iter().map(|(x, y)| y * x.transpose()).sum();
    let svd = m.svd(true, true);
    let u = svd.u.ok_or(PssaError::RankDeficient { smallest: 0.0, largest: 0.0 })?;
    let vt = svd.v_t.ok_or(PssaError::RankDeficient { smallest: 0.0, largest: 0.0 })?;
    let s = svd.singular_values;
    let smallest = (0..3).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(2);
    let mut flip_smallest = Matrix3::identity();
    flip_smallest[(smallest, smallest)] = -1.0;
    let candidates = [u * vt, u * flip_smallest * vt];
    let score = |r: &Matrix3<f64>| -> (Vec<f64>, f64) {
        let e: Vec<f64> = pairs.iter().map(|(x, y)| gc3(y, &(r * x))).collect();
        let total = e.iter().map(|v| v * v).sum();
        (e, total)
    };
    let (e0, t0) = score(&candidates[0]);
    let (e1, t1) = score(&candidates[1]);
    let (rotation, per_pair_errors, error) = if t1 < t0 {
        (candidates[1], e1, t1)
    } else {
        (candidates[0], e0, t0)
    };
    let smax = s.max();
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(f64::total_cmp);
    let degenerate = !(smax > 0.0)
        || sorted[0] <= TOL.rank * smax
        || sorted.windows(2).any(|w| (w[1] - w[0]).abs() <= TOL.singular_tie * smax);
    if degenerate {
        log::debug!("coupling fit is not unique (singular values {sorted:?})");
    }
    Ok(CoupledFit {
        rotation,
        per_pair_errors,
        error,
        degenerate,
    })
}

/// Frozen factor `{y}` estimated by the extrinsic mean.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedFit {
    pub point: Vector3<f64>,
    /// Great-circle distances to `point`.
    pub per_point_errors: Vec<f64>,
    pub error: f64,
}

pub fn fit_fixed_factor(points: &[Vector3<f64>]) -> Result<FixedFit> {
    let mean = spherical_mean_of_columns(&columns(points))?;
    let c = mean.coords();
    let point = Vector3::new(c[0], c[1], c[2]);
    let per_point_errors: Vec<f64> = points.iter().map(|p| gc3(p, &point)).collect();
    let error = per_point_errors.iter().map(|v| v * v).sum();
    Ok(FixedFit {
        point,
        per_point_errors,
        error,
    })
}

/// Great circle `{x : x·axis = 0}` fitted to one factor.
#[derive(Clone, Debug, PartialEq)]
pub struct CircleFit {
    pub axis: Vector3<f64>,
    /// Projection distances `|x·axis|`.
    pub per_point_errors: Vec<f64>,
    /// Sum of squared projection distances.
    pub error: f64,
}

pub fn fit_circle_factor(points: &[Vector3<f64>]) -> Result<CircleFit> {
    if points.len() < 2 {
        return Err(PssaError::dim("circle fit needs at least two points"));
    }
    let model = fit_subsphere(&columns(points), 1)?;
    let a = model.complement_frame.column(0);
    let axis = Vector3::new(a[0], a[1], a[2]);
    Ok(CircleFit {
        axis,
        per_point_errors: model.per_point_errors.clone(),
        error: model.squared_error(),
    })
}

/// Great-circle distance from `x` to the circle with the given axis.
pub fn distance_to_circle(x: &Vector3<f64>, axis: &Vector3<f64>) -> f64 {
    x.dot(axis).abs().min(1.0).asin()
}

/// Orthonormal frame `(f₁, f₂)` of the plane orthogonal to `axis`.
///
/// `f₁ = normalize(e_z × axis)`, or `normalize(e_x × axis)` when `axis` is
/// within `1e-6` of `±e_z`; `f₂ = axis × f₁`.
pub fn circle_frame(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = axis.normalize();
    let mut f1 = Vector3::z().cross(&a);
    if f1.norm() < 1e-6 {
        f1 = Vector3::x().cross(&a);
    }
    let f1 = f1.normalize();
    let f2 = a.cross(&f1);
    (f1, f2)
}

/// Angle in turns of each point's projection onto the circle, measured in
/// [`circle_frame`].
pub fn angles_on_circle(points: &[Vector3<f64>], axis: &Vector3<f64>) -> Result<Vec<f64>> {
    if !((axis.norm() - 1.0).abs() <= TOL.unit_norm) {
        return Err(PssaError::NonUnitData {
            index: 0,
            norm: axis.norm(),
        });
    }
    let (f1, f2) = circle_frame(axis);
    points
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let (c, s) = (x.dot(&f1), x.dot(&f2));
            if c.hypot(s) < TOL.degenerate_projection {
                return Err(PssaError::DegenerateProjection { index });
            }
            Ok(wrap01(s.atan2(c) / (2.0 * std::f64::consts::PI)))
        })
        .collect()
}

/// Point of the circle at the given angle.
pub fn point_on_circle(axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (f1, f2) = circle_frame(axis);
    let (s, c) = (2.0 * std::f64::consts::PI * angle).sin_cos();
    f1 * c + f2 * s
}

/// Row-major view of a 3 × 3 matrix.
pub fn matrix3_rows(m: &Matrix3<f64>) -> Vec<Vec<f64>> {
    (0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect()
}

pub fn matrix3_from_rows(rows: &[Vec<f64>]) -> Result<Matrix3<f64>> {
    if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
        return Err(PssaError::Validation("expected a 3 × 3 matrix".into()));
    }
    Ok(Matrix3::from_fn(|i, j| rows[i][j]))
}

/// Serializable 3-vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl From<&Vector3<f64>> for Vec3 {
    fn from(v: &Vector3<f64>) -> Self {
        Vec3([v[0], v[1], v[2]])
    }
}

impl From<Vec3> for Vector3<f64> {
    fn from(v: Vec3) -> Self {
        Vector3::new(v.0[0], v.0[1], v.0[2])
    }
}
