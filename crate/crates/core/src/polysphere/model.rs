//! Submanifold states of (S²)ⁿ, the reductions between them, and fitted
//! model templates.
//!
//! A state is a product of sphere components (a base factor plus factors
//! coupled to it by orthogonal maps), circle components, frozen points and
//! a subtorus of the torus formed by all circles. The circles' angles `θ`
//! carry integer coordinates `y = Mθ` on that subtorus.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::lie::{coupling_block, TangentBlockVector};
use super::{
    angles_on_circle, distance_to_circle, fit_circle_factor, fit_coupled_spheres, fit_fixed_factor, gc3, Vec3,
    PolyspherePoint,
};
use crate::error::{PssaError, Result};
use crate::tolerance::TOL;
use crate::torus::{
    enumerate_resonances, fit_subtorus, loo_error, residual_for, ResonanceMatrix, SubtorusChart,
    TorusPoint,
};

/// Row-major 3 × 3 matrix.
pub type Rows3 = [[f64; 3]; 3];

fn to_rows3(m: &Matrix3<f64>) -> Rows3 {
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
    ]
}

fn from_rows3(r: &Rows3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| r[i][j])
}

const IDENTITY3: Rows3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Factor `factor` equals `rotation` applied to the component's point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub factor: usize,
    pub rotation: Rows3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereComponent {
    pub links: Vec<Link>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleComponent {
    pub links: Vec<Link>,
    /// Axis in the component's own coordinates.
    pub axis: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointComponent {
    pub links: Vec<Link>,
    pub point: Vec3,
}

/// `row · θ ≡ offset` over the circle angles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConstraint {
    pub row: Vec<i64>,
    pub offset: f64,
}

fn base(links: &[Link]) -> usize {
    links[0].factor
}

/// A geodesic submanifold of (S²)ⁿ reached by a sequence of reductions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolysphereState {
    pub n_factors: usize,
    pub spheres: Vec<SphereComponent>,
    pub circles: Vec<CircleComponent>,
    /// `m × circles.len()`: current torus coordinates in terms of `θ`.
    pub torus_map: Vec<Vec<i64>>,
    pub constraints: Vec<TorusConstraint>,
    pub points: Vec<PointComponent>,
}

impl PolysphereState {
    /// The whole polysphere.
    pub fn full(n: usize) -> Self {
        PolysphereState {
            n_factors: n,
            spheres: (0..n)
                .map(|f| SphereComponent {
                    links: vec![Link {
                        factor: f,
                        rotation: IDENTITY3,
                    }],
                })
                .collect(),
            circles: Vec::new(),
            torus_map: Vec::new(),
            constraints: Vec::new(),
            points: Vec::new(),
        }
    }

    pub fn torus_dim(&self) -> usize {
        self.torus_map.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.spheres.len() + self.torus_dim()
    }

    /// Shape such as `S2xS1xS1`; `pt` for a point.
    pub fn signature(&self) -> String {
        let parts: Vec<&str> = std::iter::repeat_n("S2", self.spheres.len())
            .chain(std::iter::repeat_n("S1", self.torus_dim()))
            .collect();
        if parts.is_empty() {
            "pt".into()
        } else {
            parts.join("x")
        }
    }

    fn couplings_used(&self) -> usize {
        let comps = self.spheres.len() + self.circles.len() + self.points.len();
        let links: usize = self.spheres.iter().map(|s| s.links.len()).sum::<usize>()
            + self.circles.iter().map(|c| c.links.len()).sum::<usize>()
            + self.points.iter().map(|p| p.links.len()).sum::<usize>();
        links - comps
    }

    /// Tangent space at the base point, one `ℝ²` block per factor.
    ///
    /// Each component is placed at `e₁`; a factor linked by `R` contributes
    /// through the block of `R` acting on the tangent plane. Circles move
    /// along `(1, 0)` and are combined through the kernel of the
    /// accumulated torus constraints.
    pub fn tangent_model(&self) -> Vec<TangentBlockVector> {
        let n = self.n_factors;
        let mut out = Vec::new();
        for s in &self.spheres {
            for xi in [Vector2::x(), Vector2::y()] {
                let mut v = vec![Vector2::zeros(); n];
                for l in &s.links {
                    v[l.factor] = coupling_block(&from_rows3(&l.rotation)) * xi;
                }
                out.push(TangentBlockVector(v));
            }
        }
        let c = self.circles.len();
        if c > 0 {
            for t in self.torus_tangent_directions() {
                let mut v = vec![Vector2::zeros(); n];
                for (j, circle) in self.circles.iter().enumerate() {
                    for l in &circle.links {
                        v[l.factor] = coupling_block(&from_rows3(&l.rotation)) * Vector2::x() * t[j];
                    }
                }
                out.push(TangentBlockVector(v));
            }
        }
        out
    }

    /// Real basis of the kernel of the torus constraints, in `θ`.
    fn torus_tangent_directions(&self) -> Vec<Vec<f64>> {
        let c = self.circles.len();
        let k = self.constraints.len();
        if k == 0 {
            return (0..c)
                .map(|j| (0..c).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
        }
        let mut m = DMatrix::<f64>::zeros(c, c.max(k));
        for (r, con) in self.constraints.iter().enumerate() {
            for (j, &v) in con.row.iter().enumerate() {
                m[(j, r)] = v as f64;
            }
        }
        let svd = m.svd(true, false);
        let u = svd.u.expect("requested U");
        let smax = svd.singular_values.max().max(1.0);
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        idx.into_iter()
            .filter(|&i| svd.singular_values[i] <= 1e-10 * smax)
            .take(self.torus_dim())
            .map(|i| u.column(i).iter().copied().collect())
            .collect()
    }
}

/// Data expressed in the intrinsic coordinates of a state.
#[derive(Clone, Debug, PartialEq)]
pub struct PolysphereData {
    /// `spheres[s][i]`: point `i` on sphere component `s`.
    pub spheres: Vec<Vec<Vector3<f64>>>,
    /// `torus[i]`: point `i` in current torus coordinates.
    pub torus: Vec<Vec<f64>>,
}

impl PolysphereData {
    pub fn from_points(points: &[PolyspherePoint]) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(PssaError::dim("no polysphere points"));
        };
        let n = first.n_factors();
        if let Some(i) = points.iter().position(|p| p.n_factors() != n) {
            return Err(PssaError::dim(format!("point {i} has {} factors, expected {n}", points[i].n_factors())));
        }
        Ok(PolysphereData {
            spheres: (0..n).map(|f| points.iter().map(|p| *p.factor(f)).collect()).collect(),
            torus: vec![Vec::new(); points.len()],
        })
    }

    pub fn len(&self) -> usize {
        self.torus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.torus.is_empty()
    }

    fn select(&self, idx: &[usize]) -> Self {
        PolysphereData {
            spheres: self.spheres.iter().map(|s| idx.iter().map(|&i| s[i]).collect()).collect(),
            torus: idx.iter().map(|&i| self.torus[i].clone()).collect(),
        }
    }

    fn torus_points(&self) -> Result<Vec<TorusPoint>> {
        self.torus.iter().map(|t| TorusPoint::new(t.clone())).collect()
    }
}

/// One reduction step. Indices refer to the current state's components.
#[derive(Clone, Debug, PartialEq)]
pub enum PolysphereEdge {
    /// Couple sphere components `a < b` as `{(x, Rx)}`.
    Couple { a: usize, b: usize },
    /// Cut a sphere component to a great circle.
    Circle { sphere: usize },
    /// Freeze a sphere component at a point.
    SpherePoint { sphere: usize },
    /// Impose resonance relations on the current torus coordinates.
    Resonance { resonance: ResonanceMatrix },
}

/// A fitted reduction, in original factor indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolysphereModel {
    /// Factor `j`'s component is `rotation` times factor `i`'s.
    CoupledSpheres { i: usize, j: usize, rotation: Rows3 },
    FixedFactor { i: usize, point: Vec3 },
    CircleFactor { i: usize, axis: Vec3 },
    /// `resonance` acts on the torus coordinates at this level;
    /// `angle_resonance` is the same relation on the circle angles, whose
    /// base factors are listed in `circles`.
    TorusResonance {
        circles: Vec<usize>,
        resonance: Vec<Vec<i64>>,
        angle_resonance: Vec<Vec<i64>>,
        offset: Vec<f64>,
    },
    Product { parts: Vec<PolysphereModel> },
}

#[derive(Clone, Debug, PartialEq)]
enum EdgeParams {
    Couple { a: usize, b: usize, rotation: Matrix3<f64> },
    Circle { sphere: usize, axis: Vector3<f64> },
    SpherePoint { sphere: usize, point: Vector3<f64> },
    Resonance { resonance: ResonanceMatrix, offset: Vec<f64> },
}

fn check_sphere(state: &PolysphereState, s: usize) -> Result<()> {
    if s >= state.spheres.len() {
        return Err(PssaError::dim(format!("no sphere component {s}")));
    }
    Ok(())
}

fn fit_params(state: &PolysphereState, data: &PolysphereData, edge: &PolysphereEdge) -> Result<EdgeParams> {
    match edge {
        PolysphereEdge::Couple { a, b } => {
            check_sphere(state, *a)?;
            check_sphere(state, *b)?;
            if a >= b {
                return Err(PssaError::dim("coupling needs two distinct components a < b"));
            }
            let pairs: Vec<_> = data.spheres[*a].iter().zip(&data.spheres[*b]).map(|(x, y)| (*x, *y)).collect();
            Ok(EdgeParams::Couple {
                a: *a,
                b: *b,
                rotation: fit_coupled_spheres(&pairs)?.rotation,
            })
        }
        PolysphereEdge::Circle { sphere } => {
            check_sphere(state, *sphere)?;
            Ok(EdgeParams::Circle {
                sphere: *sphere,
                axis: fit_circle_factor(&data.spheres[*sphere])?.axis,
            })
        }
        PolysphereEdge::SpherePoint { sphere } => {
            check_sphere(state, *sphere)?;
            Ok(EdgeParams::SpherePoint {
                sphere: *sphere,
                point: fit_fixed_factor(&data.spheres[*sphere])?.point,
            })
        }
        PolysphereEdge::Resonance { resonance } => {
            if resonance.n() != state.torus_dim() {
                return Err(PssaError::dim(format!(
                    "resonance on 𝕋^{} but the state carries 𝕋^{}",
                    resonance.n(),
                    state.torus_dim()
                )));
            }
            let model = fit_subtorus(&data.torus_points()?, resonance)?;
            Ok(EdgeParams::Resonance {
                resonance: resonance.clone(),
                offset: model.offset,
            })
        }
    }
}

fn int_product(a: &[Vec<i64>], m: &[Vec<i64>], cols: usize) -> Result<Vec<Vec<i64>>> {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    row.iter().zip(m).try_fold(0i64, |acc, (x, mr)| {
                        x.checked_mul(mr[j])
                            .and_then(|p| acc.checked_add(p))
                            .ok_or_else(|| PssaError::Validation("torus coordinate map overflows i64".into()))
                    })
                })
                .collect()
        })
        .collect()
}

struct Applied {
    state: PolysphereState,
    data: PolysphereData,
    residuals: Vec<f64>,
    /// Residuals measured on a torus (as opposed to great-circle distances).
    torus_residual: bool,
    model: PolysphereModel,
}

fn apply_params(state: &PolysphereState, data: &PolysphereData, params: &EdgeParams) -> Result<Applied> {
    let mut next = state.clone();
    let mut out = data.clone();
    match params {
        EdgeParams::Couple { a, b, rotation } => {
            let (a, b) = (*a, *b);
            let xs = &data.spheres[a];
            let ys = &data.spheres[b];
            let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| gc3(y, &(rotation * x))).collect();
            let merged: Vec<Vector3<f64>> = xs
                .iter()
                .zip(ys)
                .enumerate()
                .map(|(index, (x, y))| {
                    let p = x + rotation.transpose() * y;
                    let norm = p.norm();
                    if norm < TOL.degenerate_projection {
                        Err(PssaError::DegenerateProjection { index })
                    } else {
                        Ok(p / norm)
                    }
                })
                .collect::<Result<_>>()?;
            let mut links = state.spheres[a].links.clone();
            links.extend(state.spheres[b].links.iter().map(|l| Link {
                factor: l.factor,
                rotation: to_rows3(&(from_rows3(&l.rotation) * rotation)),
            }));
            let model = PolysphereModel::CoupledSpheres {
                i: base(&state.spheres[a].links),
                j: base(&state.spheres[b].links),
                rotation: to_rows3(rotation),
            };
            next.spheres[a] = SphereComponent { links };
            next.spheres.remove(b);
            out.spheres[a] = merged;
            out.spheres.remove(b);
            Ok(Applied {
                state: next,
                data: out,
                residuals,
                torus_residual: false,
                model,
            })
        }
        EdgeParams::Circle { sphere, axis } => {
            let s = *sphere;
            let pts = &data.spheres[s];
            let residuals = pts.iter().map(|x| distance_to_circle(x, axis)).collect();
            let angles = angles_on_circle(pts, axis)?;
            let comp = next.spheres.remove(s);
            out.spheres.remove(s);
            let model = PolysphereModel::CircleFactor {
                i: base(&comp.links),
                axis: Vec3::from(axis),
            };
            next.circles.push(CircleComponent {
                links: comp.links,
                axis: Vec3::from(axis),
            });
            for row in next.torus_map.iter_mut() {
                row.push(0);
            }
            for con in next.constraints.iter_mut() {
                con.row.push(0);
            }
            let c = next.circles.len();
            next.torus_map.push((0..c).map(|j| i64::from(j + 1 == c)).collect());
            for (t, a) in out.torus.iter_mut().zip(angles) {
                t.push(a);
            }
            Ok(Applied {
                state: next,
                data: out,
                residuals,
                torus_residual: false,
                model,
            })
        }
        EdgeParams::SpherePoint { sphere, point } => {
            let s = *sphere;
            let residuals = data.spheres[s].iter().map(|x| gc3(x, point)).collect();
            let comp = next.spheres.remove(s);
            out.spheres.remove(s);
            let model = PolysphereModel::FixedFactor {
                i: base(&comp.links),
                point: Vec3::from(point),
            };
            next.points.push(PointComponent {
                links: comp.links,
                point: Vec3::from(point),
            });
            Ok(Applied {
                state: next,
                data: out,
                residuals,
                torus_residual: false,
                model,
            })
        }
        EdgeParams::Resonance { resonance, offset } => {
            let pts = data.torus_points()?;
            let residuals = pts
                .iter()
                .map(|x| residual_for(x, resonance, offset))
                .collect::<Result<Vec<_>>>()?;
            let chart = SubtorusChart::new(resonance)?;
            let k = resonance.k();
            let c = state.circles.len();
            let a_rows = resonance.matrix().to_i64_rows()?;
            let rest = chart.completion.rows_from(k).to_i64_rows()?;
            let angle_resonance = int_product(&a_rows, &state.torus_map, c)?;
            next.torus_map = int_product(&rest, &state.torus_map, c)?;
            for (row, off) in angle_resonance.iter().zip(offset) {
                next.constraints.push(TorusConstraint {
                    row: row.clone(),
                    offset: *off,
                });
            }
            out.torus = pts
                .iter()
                .map(|x| chart.project(x).map(|p| p.coords().to_vec()))
                .collect::<Result<_>>()?;
            let model = PolysphereModel::TorusResonance {
                circles: state.circles.iter().map(|c| base(&c.links)).collect(),
                resonance: a_rows,
                angle_resonance,
                offset: offset.clone(),
            };
            Ok(Applied {
                state: next,
                data: out,
                residuals,
                torus_residual: true,
                model,
            })
        }
    }
}

/// Result of fitting one reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFit {
    pub edge: PolysphereEdge,
    pub model: PolysphereModel,
    pub state: PolysphereState,
    pub data: PolysphereData,
    /// Great-circle distances, or torus residuals for resonance edges.
    pub residuals: Vec<f64>,
    pub torus_residual: bool,
    /// Root mean square of `residuals`.
    pub rms_error: f64,
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

impl EdgeFit {
    pub fn fit(state: &PolysphereState, data: &PolysphereData, edge: &PolysphereEdge) -> Result<Self> {
        let params = fit_params(state, data, edge)?;
        let applied = apply_params(state, data, &params)?;
        Ok(EdgeFit {
            edge: edge.clone(),
            rms_error: rms(&applied.residuals),
            model: applied.model,
            state: applied.state,
            data: applied.data,
            residuals: applied.residuals,
            torus_residual: applied.torus_residual,
        })
    }

    /// Leave-one-out error of this reduction on the given data.
    pub fn loo_error(state: &PolysphereState, data: &PolysphereData, edge: &PolysphereEdge) -> Result<f64> {
        if let PolysphereEdge::Resonance { resonance } = edge {
            return loo_error(&data.torus_points()?, resonance);
        }
        let held = loo_residuals(state, data, std::slice::from_ref(edge))?;
        Ok(rms(&held))
    }
}

/// Held-out residual of every point for a sequence of reductions.
fn loo_residuals(state: &PolysphereState, data: &PolysphereData, edges: &[PolysphereEdge]) -> Result<Vec<f64>> {
    let d = data.len();
    if d < 2 {
        return Err(PssaError::dim("leave-one-out needs at least two points"));
    }
    (0..d)
        .map(|i| {
            let rest: Vec<usize> = (0..d).filter(|&j| j != i).collect();
            let mut train = data.select(&rest);
            let mut test = data.select(&[i]);
            let mut st = state.clone();
            let mut ss = 0.0;
            for edge in edges {
                let params = fit_params(&st, &train, edge)?;
                let held = apply_params(&st, &test, &params)?;
                ss += held.residuals[0] * held.residuals[0];
                let fitted = apply_params(&st, &train, &params)?;
                st = fitted.state;
                train = fitted.data;
                test = held.data;
            }
            Ok(ss.sqrt())
        })
        .collect()
}

/// Limits for polysphere model enumeration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolysphereConfig {
    /// Resonances among circles use entries in `(−bound, bound)`.
    pub resonance_bound: u32,
    pub max_couplings: usize,
    /// Allow coupling components that are already coupled.
    pub group_couplings: bool,
    /// Allow a sphere to collapse straight to a point in the tree.
    pub sphere_to_point: bool,
}

impl Default for PolysphereConfig {
    fn default() -> Self {
        PolysphereConfig {
            resonance_bound: 10,
            max_couplings: usize::MAX,
            group_couplings: false,
            sphere_to_point: false,
        }
    }
}

/// Reductions available from a state.
///
/// Resonance candidates are all single relations on the current torus
/// coordinates within the configured bound; on a circle this is `[1]`,
/// which freezes it at its circular mean.
pub fn candidate_edges(state: &PolysphereState, config: &PolysphereConfig) -> Vec<PolysphereEdge> {
    let mut out = Vec::new();
    let s = state.spheres.len();
    if state.couplings_used() < config.max_couplings {
        for a in 0..s {
            for b in a + 1..s {
                let single = state.spheres[a].links.len() == 1 && state.spheres[b].links.len() == 1;
                if single || config.group_couplings {
                    out.push(PolysphereEdge::Couple { a, b });
                }
            }
        }
    }
    for sphere in 0..s {
        out.push(PolysphereEdge::Circle { sphere });
    }
    if config.sphere_to_point {
        for sphere in 0..s {
            out.push(PolysphereEdge::SpherePoint { sphere });
        }
    }
    let m = state.torus_dim();
    if m > 0 {
        for resonance in enumerate_resonances(m, 1, config.resonance_bound.max(2)) {
            out.push(PolysphereEdge::Resonance { resonance });
        }
    }
    out
}

/// One constraint of a template, by original factor index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TemplatePart {
    Couple { i: usize, j: usize },
    Circle { i: usize },
    Fixed { i: usize },
    /// Relations among the circle angles of the listed base factors.
    Resonance { circles: Vec<usize>, resonance: Vec<Vec<i64>> },
}

/// A submanifold family: couplings, then per-component cuts, then
/// resonances among the resulting circles.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolysphereTemplate {
    pub n_factors: usize,
    pub parts: Vec<TemplatePart>,
}

impl PolysphereTemplate {
    /// Translates the template into reductions from the full polysphere.
    pub fn edges(&self) -> Result<Vec<PolysphereEdge>> {
        let mut state = PolysphereState::full(self.n_factors);
        let mut edges = Vec::with_capacity(self.parts.len());
        let find = |st: &PolysphereState, i: usize| -> Result<usize> {
            st.spheres
                .iter()
                .position(|s| base(&s.links) == i)
                .ok_or_else(|| PssaError::dim(format!("factor {i} is not a free sphere here")))
        };
        for part in &self.parts {
            let edge = match part {
                TemplatePart::Couple { i, j } => {
                    let (a, b) = (find(&state, *i)?, find(&state, *j)?);
                    PolysphereEdge::Couple {
                        a: a.min(b),
                        b: a.max(b),
                    }
                }
                TemplatePart::Circle { i } => PolysphereEdge::Circle {
                    sphere: find(&state, *i)?,
                },
                TemplatePart::Fixed { i } => PolysphereEdge::SpherePoint {
                    sphere: find(&state, *i)?,
                },
                TemplatePart::Resonance { circles, resonance } => {
                    let current: Vec<usize> = state.circles.iter().map(|c| base(&c.links)).collect();
                    if &current != circles || !state.constraints.is_empty() {
                        return Err(PssaError::dim("resonance must follow the circles it relates"));
                    }
                    PolysphereEdge::Resonance {
                        resonance: ResonanceMatrix::from_rows(resonance)?,
                    }
                }
            };
            state = nominal_transition(&state, &edge)?;
            edges.push(edge);
        }
        Ok(edges)
    }

    /// The state reached with identity couplings, axis `e₃` and zero offsets.
    pub fn nominal_state(&self) -> Result<PolysphereState> {
        let mut state = PolysphereState::full(self.n_factors);
        for edge in self.edges()? {
            state = nominal_transition(&state, &edge)?;
        }
        Ok(state)
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(self.nominal_state()?.dim())
    }

    pub fn signature(&self) -> Result<String> {
        Ok(self.nominal_state()?.signature())
    }

    pub fn has_coupling(&self) -> bool {
        self.parts.iter().any(|p| matches!(p, TemplatePart::Couple { .. }))
    }
}

fn nominal_transition(state: &PolysphereState, edge: &PolysphereEdge) -> Result<PolysphereState> {
    let params = match edge {
        PolysphereEdge::Couple { a, b } => EdgeParams::Couple {
            a: *a,
            b: *b,
            rotation: Matrix3::identity(),
        },
        PolysphereEdge::Circle { sphere } => EdgeParams::Circle {
            sphere: *sphere,
            axis: Vector3::z(),
        },
        PolysphereEdge::SpherePoint { sphere } => EdgeParams::SpherePoint {
            sphere: *sphere,
            point: Vector3::x(),
        },
        PolysphereEdge::Resonance { resonance } => EdgeParams::Resonance {
            resonance: resonance.clone(),
            offset: vec![0.0; resonance.k()],
        },
    };
    let empty = PolysphereData {
        spheres: vec![Vec::new(); state.spheres.len()],
        torus: Vec::new(),
    };
    Ok(apply_params(state, &empty, &params)?.state)
}

fn matchings(n: usize, max_pairs: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(free: &[usize], max_pairs: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        out.push(cur.clone());
        if cur.len() == max_pairs {
            return;
        }
        // extend with pairs lexicographically after the last one
        let last = cur.last().copied();
        for (ai, &a) in free.iter().enumerate() {
            for &b in &free[ai + 1..] {
                if let Some(l) = last {
                    if (a, b) <= l {
                        continue;
                    }
                }
                let rest: Vec<usize> = free.iter().copied().filter(|&x| x != a && x != b).collect();
                cur.push((a, b));
                rec(&rest, max_pairs, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    let free: Vec<usize> = (0..n).collect();
    rec(&free, max_pairs, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy)]
enum Role {
    Sphere,
    Circle,
    Fixed,
}

/// Every template of (S²)ⁿ within the configured limits.
///
/// Couplings form a matching of factor pairs. Each resulting component
/// stays a sphere, becomes a circle, or is fixed. When two or more circles
/// remain, each single resonance relation among them gives a further
/// template. The whole polysphere is the empty template.
pub fn enumerate_polysphere_models(n: usize, config: &PolysphereConfig) -> Vec<PolysphereTemplate> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for matching in matchings(n, config.max_couplings.min(n / 2)) {
        let coupled: Vec<usize> = matching.iter().map(|p| p.1).collect();
        let comps: Vec<usize> = (0..n).filter(|f| !coupled.contains(f)).collect();
        let total = 3usize.pow(comps.len() as u32);
        for code in 0..total {
            let mut parts: Vec<TemplatePart> = matching.iter().map(|&(i, j)| TemplatePart::Couple { i, j }).collect();
            let mut circles = Vec::new();
            let mut c = code;
            for &f in &comps {
                let role = [Role::Sphere, Role::Circle, Role::Fixed][c % 3];
                c /= 3;
                match role {
                    Role::Sphere => {}
                    Role::Circle => {
                        parts.push(TemplatePart::Circle { i: f });
                        circles.push(f);
                    }
                    Role::Fixed => parts.push(TemplatePart::Fixed { i: f }),
                }
            }
            out.push(PolysphereTemplate {
                n_factors: n,
                parts: parts.clone(),
            });
            if circles.len() >= 2 {
                for a in enumerate_resonances(circles.len(), 1, config.resonance_bound.max(2)) {
                    let mut with = parts.clone();
                    with.push(TemplatePart::Resonance {
                        circles: circles.clone(),
                        resonance: a.matrix().to_i64_rows().unwrap_or_default(),
                    });
                    out.push(PolysphereTemplate {
                        n_factors: n,
                        parts: with,
                    });
                }
            }
        }
    }
    out
}

/// A template fitted to data.
#[derive(Clone, Debug, PartialEq)]
pub struct PolysphereFit {
    pub template: PolysphereTemplate,
    pub model: PolysphereModel,
    pub state: PolysphereState,
    /// Per point: `√Σ` of squared great-circle residuals over sphere-type constraints.
    pub sphere_errors: Vec<f64>,
    /// Per point: torus residual of the resonance constraints (0 without one).
    pub torus_errors: Vec<f64>,
    /// Sum of squared sphere-type residuals over points and constraints.
    pub total_error: f64,
    /// Sum of squared torus residuals, reported separately.
    pub torus_error: f64,
}

impl PolysphereFit {
    /// `total_error + torus_error`.
    pub fn aggregate_error(&self) -> f64 {
        self.total_error + self.torus_error
    }
}

/// Fits a template by applying its reductions in order, each fitted to the
/// data projected by the previous ones.
pub fn fit_polysphere_model(points: &[PolyspherePoint], template: &PolysphereTemplate) -> Result<PolysphereFit> {
    let mut data = PolysphereData::from_points(points)?;
    if data.spheres.len() != template.n_factors {
        return Err(PssaError::dim(format!(
            "template for {} factors, data has {}",
            template.n_factors,
            data.spheres.len()
        )));
    }
    let mut state = PolysphereState::full(template.n_factors);
    let d = data.len();
    let mut sphere_sq = vec![0.0; d];
    let mut torus_sq = vec![0.0; d];
    let mut parts = Vec::new();
    for edge in template.edges()? {
        let fit = EdgeFit::fit(&state, &data, &edge)?;
        let target = if fit.torus_residual { &mut torus_sq } else { &mut sphere_sq };
        for (t, r) in target.iter_mut().zip(&fit.residuals) {
            *t += r * r;
        }
        parts.push(fit.model);
        state = fit.state;
        data = fit.data;
    }
    Ok(PolysphereFit {
        template: template.clone(),
        model: PolysphereModel::Product { parts },
        state,
        total_error: sphere_sq.iter().sum(),
        torus_error: torus_sq.iter().sum(),
        sphere_errors: sphere_sq.iter().map(|v| v.sqrt()).collect(),
        torus_errors: torus_sq.iter().map(|v| v.sqrt()).collect(),
    })
}

/// Root-mean-square held-out residual of a template, combining
/// sphere-type and torus residuals in quadrature.
pub fn polysphere_loo_error(points: &[PolyspherePoint], template: &PolysphereTemplate) -> Result<f64> {
    let data = PolysphereData::from_points(points)?;
    let state = PolysphereState::full(template.n_factors);
    Ok(rms(&loo_residuals(&state, &data, &template.edges()?)?))
}
