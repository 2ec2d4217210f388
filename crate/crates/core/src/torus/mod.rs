//! Subtori of 𝕋ⁿ = (ℝ/ℤ)ⁿ cut out by integer resonance relations `Ax = c`.
//!
//! Angles are fractions of a full turn. Distances use the chordal circle
//! metric `½ sin π|r|` applied to each resonance coordinate, so fitting
//! separates into one circular mean per row of `A`.

pub mod lattice;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PssaError, Result};
use crate::tolerance::TOL;

pub use lattice::{
    complete_to_unimodular, cvp_oracle, dual_lattice_basis, enumerate_resonances, hermite_normal_form,
    is_unimodular, reduce_resonance_basis, row_angle_degrees, row_transform, same_row_lattice, CvpSolution,
    DualLatticeBasis, IntMatrix, RatMatrix, ResonanceMatrix,
};

use std::f64::consts::PI;

/// Maps a real to `[0, 1)`.
pub fn wrap01(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Maps a real to `(−½, ½]`.
pub fn wrap_half(x: f64) -> f64 {
    let r = wrap01(x);
    if r > 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Chordal circle distance `½ sin π|x − y|` between two angles.
pub fn chordal_circle_distance(x: f64, y: f64) -> f64 {
    0.5 * (PI * wrap_half(x - y).abs()).sin()
}

/// Point of 𝕋ⁿ with coordinates in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    /// Wraps every coordinate into `[0, 1)`. Non-finite input is rejected.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(PssaError::Validation(format!("torus coordinate {i} is not finite")));
        }
        Ok(TorusPoint(coords.into_iter().map(wrap01).collect()))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Componentwise translation, wrapped.
    pub fn translate(&self, t: &[f64]) -> TorusPoint {
        TorusPoint(self.0.iter().zip(t).map(|(x, s)| wrap01(x + s)).collect())
    }

    /// Largest componentwise circular difference.
    pub fn max_circular_difference(&self, other: &TorusPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| wrap_half(a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Circular mean of angles in turns, mapped to `[0, 1)`.
pub fn circular_mean(angles: &[f64]) -> Result<f64> {
    let (s, c) = trig_sums(angles.iter().copied());
    mean_from_sums(s, c, angles.len())
}

fn trig_sums(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((0.0, 0.0), |(s, c), v| {
        let (sv, cv) = (2.0 * PI * v).sin_cos();
        (s + sv, c + cv)
    })
}

fn mean_from_sums(s: f64, c: f64, count: usize) -> Result<f64> {
    if count == 0 {
        return Err(PssaError::DegenerateMean(0.0));
    }
    let (ms, mc) = (s / count as f64, c / count as f64);
    let resultant = ms.hypot(mc);
    if resultant <= TOL.degenerate_mean {
        return Err(PssaError::DegenerateMean(resultant));
    }
    Ok(wrap01(ms.atan2(mc) / (2.0 * PI)))
}

/// Values `A·x` (unwrapped) for one point.
fn resonance_values(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

fn residual_from_values(values: &[f64], c: &[f64]) -> f64 {
    values
        .iter()
        .zip(c)
        .map(|(v, cj)| {
            let h = 0.5 * (PI * wrap_half(v - cj)).sin();
            h * h
        })
        .sum::<f64>()
        .sqrt()
}

/// A fitted subtorus `{x : Ax ≡ c}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubtorusModel {
    pub resonance: ResonanceMatrix,
    pub offset: Vec<f64>,
    pub per_point_errors: Vec<f64>,
    /// `‖e‖₂ / √d` over the per-point errors.
    pub mean_error: f64,
    /// Root-mean-square of `½|sin πrⱼ|` for each resonance row.
    pub per_direction_errors: Vec<f64>,
    pub loo_error: Option<f64>,
}

impl SubtorusModel {
    pub fn ambient_dim(&self) -> usize {
        self.resonance.n()
    }

    pub fn codim(&self) -> usize {
        self.resonance.k()
    }

    pub fn dim(&self) -> usize {
        self.ambient_dim() - self.codim()
    }

    /// Whether `x` satisfies every resonance relation to within `tol`.
    pub fn contains(&self, x: &TorusPoint, tol: f64) -> bool {
        let a = self.resonance.to_f64_rows();
        resonance_values(&a, x.coords())
            .iter()
            .zip(&self.offset)
            .all(|(v, c)| wrap_half(v - c).abs() <= tol)
    }
}

/// Distance from `x` to the subtorus: `‖½ sin π(Ax − c)‖₂`, in `[0, √k/2]`.
pub fn subtorus_residual(x: &TorusPoint, model: &SubtorusModel) -> Result<f64> {
    residual_for(x, &model.resonance, &model.offset)
}

/// Residual against an explicit resonance matrix and offset.
pub fn residual_for(x: &TorusPoint, a: &ResonanceMatrix, c: &[f64]) -> Result<f64> {
    if x.dim() != a.n() {
        return Err(PssaError::dim(format!("point in 𝕋^{} against a resonance on 𝕋^{}", x.dim(), a.n())));
    }
    if c.len() != a.k() {
        return Err(PssaError::dim(format!("{} offsets for {} resonance rows", c.len(), a.k())));
    }
    let rows = a.to_f64_rows();
    Ok(residual_from_values(&resonance_values(&rows, x.coords()), c))
}

fn check_points(points: &[TorusPoint], n: usize) -> Result<()> {
    if points.is_empty() {
        return Err(PssaError::dim("no torus points"));
    }
    if let Some(i) = points.iter().position(|p| p.dim() != n) {
        return Err(PssaError::dim(format!("point {i} has {} angles, expected {n}", points[i].dim())));
    }
    Ok(())
}

/// Best-fitting subtorus for a fixed resonance matrix: one circular mean per row.
pub fn fit_subtorus(points: &[TorusPoint], a: &ResonanceMatrix) -> Result<SubtorusModel> {
    check_points(points, a.n())?;
    let rows = a.to_f64_rows();
    let values: Vec<Vec<f64>> = points.iter().map(|p| resonance_values(&rows, p.coords())).collect();
    let offset = (0..a.k())
        .map(|j| circular_mean(&values.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let per_point_errors: Vec<f64> = values.iter().map(|v| residual_from_values(v, &offset)).collect();
    let d = points.len() as f64;
    let mean_error = norm(&per_point_errors) / d.sqrt();
    let per_direction_errors = (0..a.k())
        .map(|j| {
            let ss: f64 = values
                .iter()
                .map(|v| {
                    let h = 0.5 * (PI * wrap_half(v[j] - offset[j])).sin();
                    h * h
                })
                .sum();
            (ss / d).sqrt()
        })
        .collect();
    Ok(SubtorusModel {
        resonance: a.clone(),
        offset,
        per_point_errors,
        mean_error,
        per_direction_errors,
        loo_error: None,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Leave-one-out error `‖e‖₂/√d` where `eᵢ` is the residual of `xᵢ` against
/// the fit on the remaining points.
///
/// The held-out mean of each row is obtained by removing the point's own
/// sine and cosine from the full resultant.
pub fn loo_error(points: &[TorusPoint], a: &ResonanceMatrix) -> Result<f64> {
    check_points(points, a.n())?;
    let d = points.len();
    if d < 2 {
        return Err(PssaError::dim("leave-one-out needs at least two points"));
    }
    // ¼ sin²(πδ) = |u − m|² / 16 for unit vectors u, m at angles 2πv, 2πc
    let mut trig = vec![(0.0, 0.0); d];
    let mut ss = 0.0;
    for row in a.to_f64_rows() {
        let (mut ts, mut tc) = (0.0, 0.0);
        for (t, p) in trig.iter_mut().zip(points) {
            let v: f64 = row.iter().zip(p.coords()).map(|(r, x)| r * x).sum();
            *t = (2.0 * PI * v).sin_cos();
            ts += t.0;
            tc += t.1;
        }
        for &(s, c) in &trig {
            let (ms, mc) = (ts - s, tc - c);
            let resultant = ms.hypot(mc);
            if resultant <= TOL.degenerate_mean * (d - 1) as f64 {
                return Err(PssaError::DegenerateMean(resultant / (d - 1) as f64));
            }
            let (ds, dc) = (s - ms / resultant, c - mc / resultant);
            ss += (ds * ds + dc * dc) / 16.0;
        }
    }
    Ok((ss / d as f64).sqrt())
}

/// One candidate in a leave-one-out ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedResonance {
    pub resonance: ResonanceMatrix,
    /// `None` when the fit degenerated; see `warning`.
    pub loo_error: Option<f64>,
    pub warning: Option<String>,
}

/// Ranks candidates by leave-one-out error, ascending.
///
/// Candidates are evaluated in parallel. Ties break on the Hermite form;
/// skipped candidates come last in input order.
pub fn loo_model_selection(points: &[TorusPoint], candidates: &[ResonanceMatrix]) -> Result<Vec<RankedResonance>> {
    if points.len() < 2 {
        return Err(PssaError::dim("model selection needs at least two points"));
    }
    let n = points[0].dim();
    if let Some(c) = candidates.iter().find(|c| c.n() != n) {
        return Err(PssaError::dim(format!("candidate {c} does not act on 𝕋^{n}")));
    }
    check_points(points, n)?;
    let mut scored: Vec<(usize, RankedResonance)> = candidates
        .par_iter()
        .enumerate()
        .map(|(idx, a)| {
            let entry = match loo_error(points, a) {
                Ok(e) => RankedResonance {
                    resonance: a.clone(),
                    loo_error: Some(e),
                    warning: None,
                },
                Err(err) => {
                    log::warn!("skipping resonance {a}: {err}");
                    RankedResonance {
                        resonance: a.clone(),
                        loo_error: None,
                        warning: Some(err.to_string()),
                    }
                }
            };
            (idx, entry)
        })
        .collect();
    scored.sort_by(|(ia, a), (ib, b)| match (a.loo_error, b.loo_error) {
        (Some(x), Some(y)) => x
            .total_cmp(&y)
            .then_with(|| a.resonance.canonical_form().cmp(&b.resonance.canonical_form())),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ia.cmp(ib),
    });
    Ok(scored.into_iter().map(|(_, r)| r).collect())
}

/// Enumerates candidates with entries in `(−bound, bound)` and ranks them.
pub fn select_resonance(points: &[TorusPoint], k: usize, bound: u32) -> Result<Vec<RankedResonance>> {
    let n = points.first().map(|p| p.dim()).unwrap_or(0);
    let candidates = enumerate_resonances(n, k, bound);
    if candidates.is_empty() {
        return Err(PssaError::dim(format!("no unimodular {k} × {n} resonances within bound {bound}")));
    }
    loo_model_selection(points, &candidates)
}

/// Nested subtori from the leading rows of a unimodular `C`, for
/// codimensions `k = 1 … n−1`. Offsets agree on shared rows exactly.
pub fn nested_subtorus_chain(points: &[TorusPoint], c: &IntMatrix) -> Result<Vec<SubtorusModel>> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(PssaError::dim(format!("{} × {} matrix is not square", n, c.ncols())));
    }
    use num_traits::{One, Signed};
    if !c.det().abs().is_one() {
        return Err(PssaError::NotUnimodular);
    }
    (1..n)
        .map(|k| fit_subtorus(points, &ResonanceMatrix::new(c.top_rows(k))?))
        .collect()
}

/// Coordinates adapted to a subtorus: `C` completes `A`, and `C⁻¹` is integral.
#[derive(Clone, Debug, PartialEq)]
pub struct SubtorusChart {
    pub completion: IntMatrix,
    pub inverse: IntMatrix,
    k: usize,
}

impl SubtorusChart {
    pub fn new(a: &ResonanceMatrix) -> Result<Self> {
        let completion = complete_to_unimodular(a)?;
        let inverse = RatMatrix::from_int(&completion)
            .inverse()
            .and_then(|m| m.to_integer())
            .ok_or(PssaError::NotUnimodular)?;
        Ok(SubtorusChart {
            completion,
            inverse,
            k: a.k(),
        })
    }

    /// Intrinsic coordinates: the free rows of `Cx`, wrapped.
    pub fn project(&self, x: &TorusPoint) -> Result<TorusPoint> {
        let n = self.completion.ncols();
        if x.dim() != n {
            return Err(PssaError::dim(format!("point in 𝕋^{} for a chart on 𝕋^{n}", x.dim())));
        }
        let rows = self.completion.to_f64_rows();
        let y = resonance_values(&rows[self.k..], x.coords());
        TorusPoint::new(y)
    }

    /// Inverse of [`SubtorusChart::project`] on the subtorus with offset `c`.
    pub fn lift(&self, z: &TorusPoint, c: &[f64]) -> Result<TorusPoint> {
        let n = self.completion.ncols();
        if z.dim() != n - self.k || c.len() != self.k {
            return Err(PssaError::dim("chart coordinates do not match the subtorus"));
        }
        let mut y = c.to_vec();
        y.extend_from_slice(z.coords());
        let rows = self.inverse.to_f64_rows();
        TorusPoint::new(resonance_values(&rows, &y))
    }

    /// Integer directions spanning the subtorus: the free columns of `C⁻¹`.
    pub fn tangent_directions(&self) -> Vec<Vec<f64>> {
        let rows = self.inverse.to_f64_rows();
        let n = rows.len();
        (self.k..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    }

    /// A point on the subtorus with offset `c`.
    pub fn base_point(&self, c: &[f64]) -> Result<TorusPoint> {
        let n = self.completion.ncols();
        self.lift(&TorusPoint::new(vec![0.0; n - self.k])?, c)
    }
}

/// Serializable summary of a fitted subtorus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtorusSummary {
    pub resonance: Vec<Vec<i64>>,
    pub offset: Vec<f64>,
    pub dual_basis: Vec<Vec<String>>,
    pub wind_spacing: Vec<f64>,
    pub mean_error: f64,
    pub per_direction_errors: Vec<f64>,
    pub loo_error: Option<f64>,
}

impl SubtorusSummary {
    pub fn from_model(model: &SubtorusModel) -> Result<Self> {
        let dual = dual_lattice_basis(model.resonance.matrix())?;
        Ok(SubtorusSummary {
            resonance: model.resonance.matrix().to_i64_rows()?,
            offset: model.offset.clone(),
            dual_basis: dual.matrix().to_string_rows(),
            wind_spacing: dual.column_norms(),
            mean_error: model.mean_error,
            per_direction_errors: model.per_direction_errors.clone(),
            loo_error: model.loo_error,
        })
    }
}
