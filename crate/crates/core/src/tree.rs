//! The rooted tree of nested approximations.
//!
//! The root is the whole manifold. The children of a node are the best fits
//! of each submanifold family to the data as seen from that node, ranked
//! and truncated; each child recurses on the data projected into its own
//! coordinates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PssaError, Result};
use crate::grassmann::{grassmann_pssa_chain, GrassmannPoint, SubgrassmannianSummary};
use crate::linalg::Matrix;
use crate::polysphere::model::PolysphereState;
use crate::polysphere::{
    candidate_edges, EdgeFit, PolysphereConfig, PolysphereData, PolysphereEdge, PolysphereModel, PolyspherePoint,
};
use crate::sphere::{fit_subsphere, spherical_mean_of_columns, validate_unit_columns, SubsphereSummary};
use crate::torus::{
    enumerate_resonances, fit_subtorus, loo_model_selection, IntMatrix, ResonanceMatrix, SubtorusChart,
    SubtorusSummary, TorusPoint,
};

/// The manifold at the root of a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldDescriptor {
    /// Sⁿ ⊂ ℝⁿ⁺¹.
    Sphere { n: usize },
    /// k-planes in ℝⁿ.
    Grassmannian { k: usize, n: usize },
    Torus { n: usize },
    /// (S²)ⁿ.
    Polysphere { n: usize },
}

impl ManifoldDescriptor {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ManifoldDescriptor::Sphere { n } => n >= 1,
            ManifoldDescriptor::Grassmannian { k, n } => k >= 1 && k < n,
            ManifoldDescriptor::Torus { n } => n >= 1,
            ManifoldDescriptor::Polysphere { n } => n >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(PssaError::Validation(format!("invalid manifold {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ManifoldDescriptor::Sphere { n } => n,
            ManifoldDescriptor::Grassmannian { k, n } => k * (n - k),
            ManifoldDescriptor::Torus { n } => n,
            ManifoldDescriptor::Polysphere { n } => 2 * n,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ManifoldDescriptor::Sphere { n } => format!("S{n}"),
            ManifoldDescriptor::Grassmannian { k, n } => format!("G({k},{n})"),
            ManifoldDescriptor::Torus { n } => format!("T{n}"),
            ManifoldDescriptor::Polysphere { n } => PolysphereState::full(n).signature(),
        }
    }
}

/// Criterion used to rank sibling fits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Loo,
    TrainingError,
}

/// What the zero-dimensional end of a sphere chain is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereTerminal {
    /// The best antipodal pair S⁰.
    #[default]
    AntipodalPair,
    /// The normalized extrinsic mean.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PssaConfig {
    pub max_children_per_node: usize,
    /// Resonance entries lie in `(−bound, bound)`.
    pub resonance_bound: u32,
    /// Nodes of lower dimension are not built.
    pub min_dim: usize,
    pub selection: Selection,
    pub seed: u64,
    pub sphere_terminal: SphereTerminal,
    pub max_couplings: usize,
    pub group_couplings: bool,
    pub sphere_to_point: bool,
    /// Ranking entries kept in selection reports.
    #[serde(default = "default_ranking_limit")]
    pub ranking_limit: usize,
}

fn default_ranking_limit() -> usize {
    100
}

impl Default for PssaConfig {
    fn default() -> Self {
        PssaConfig {
            max_children_per_node: 3,
            resonance_bound: 10,
            min_dim: 0,
            selection: Selection::Loo,
            seed: 0,
            sphere_terminal: SphereTerminal::AntipodalPair,
            max_couplings: 8,
            group_couplings: false,
            sphere_to_point: false,
            ranking_limit: default_ranking_limit(),
        }
    }
}

impl PssaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_children_per_node == 0 || self.resonance_bound == 0 || self.ranking_limit == 0 {
            return Err(PssaError::Validation(
                "max_children_per_node, resonance_bound and ranking_limit must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn polysphere(&self) -> PolysphereConfig {
        PolysphereConfig {
            resonance_bound: self.resonance_bound,
            max_couplings: self.max_couplings,
            group_couplings: self.group_couplings,
            sphere_to_point: self.sphere_to_point,
        }
    }
}

/// Fitted parameters of a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeModel {
    Whole {
        manifold: ManifoldDescriptor,
    },
    Subsphere {
        fit: SubsphereSummary,
    },
    SphereMean {
        point: Vec<f64>,
    },
    Subgrassmannian {
        fit: SubgrassmannianSummary,
    },
    /// `local` acts on the parent's torus coordinates; `constraints` and
    /// `offsets` give the node's subtorus in the root coordinates.
    Subtorus {
        local: SubtorusSummary,
        constraints: Vec<Vec<i64>>,
        offsets: Vec<f64>,
    },
    Polysphere {
        edge: PolysphereModel,
        state: PolysphereState,
    },
    Failed {
        attempted: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PssaNode {
    pub label: String,
    pub dim: usize,
    pub model: NodeModel,
    /// Cumulative error of the node's fit, in the family's metric.
    pub fit_error: f64,
    /// Leave-one-out error of the step from the parent, when computed.
    pub loo_error: Option<f64>,
    pub warning: Option<String>,
    pub children: Vec<PssaNode>,
}

impl PssaNode {
    fn root(manifold: ManifoldDescriptor) -> Self {
        PssaNode {
            label: manifold.label(),
            dim: manifold.dim(),
            model: NodeModel::Whole { manifold },
            fit_error: 0.0,
            loo_error: None,
            warning: None,
            children: Vec::new(),
        }
    }

    fn failed(label: String, dim: usize, attempted: String, err: &PssaError) -> Self {
        PssaNode {
            label,
            dim,
            model: NodeModel::Failed { attempted },
            fit_error: f64::MAX,
            loo_error: None,
            warning: Some(err.to_string()),
            children: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Every root-to-leaf path of labels.
    pub fn paths(&self) -> Vec<Vec<String>> {
        if self.children.is_empty() {
            return vec![vec![self.label.clone()]];
        }
        self.children
            .iter()
            .flat_map(|c| c.paths())
            .map(|mut p| {
                p.insert(0, self.label.clone());
                p
            })
            .collect()
    }

    /// Visits every node with its depth, parent first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a PssaNode, usize)) {
        fn go<'a>(n: &'a PssaNode, depth: usize, f: &mut impl FnMut(&'a PssaNode, usize)) {
            f(n, depth);
            for c in &n.children {
                go(c, depth + 1, f);
            }
        }
        go(self, 0, f);
    }
}

/// Input data for a tree.
#[derive(Clone, Debug)]
pub enum Dataset {
    /// Unit columns in ℝⁿ⁺¹.
    Sphere(Matrix),
    Grassmannian(Vec<GrassmannPoint>),
    Torus(Vec<TorusPoint>),
    Polysphere(Vec<PolyspherePoint>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Sphere(x) => x.ncols(),
            Dataset::Grassmannian(p) => p.len(),
            Dataset::Torus(p) => p.len(),
            Dataset::Polysphere(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The manifold the data lives on.
    pub fn manifold(&self) -> Result<ManifoldDescriptor> {
        if self.is_empty() {
            return Err(PssaError::Validation("dataset is empty".into()));
        }
        let m = match self {
            Dataset::Sphere(x) => ManifoldDescriptor::Sphere { n: x.nrows().saturating_sub(1) },
            Dataset::Grassmannian(p) => ManifoldDescriptor::Grassmannian {
                k: p[0].plane_dim(),
                n: p[0].ambient_dim(),
            },
            Dataset::Torus(p) => ManifoldDescriptor::Torus { n: p[0].dim() },
            Dataset::Polysphere(p) => ManifoldDescriptor::Polysphere { n: p[0].n_factors() },
        };
        m.validate()?;
        Ok(m)
    }
}

/// Builds the tree of approximations of `data` rooted at `root`.
pub fn build_tree(data: &Dataset, root: ManifoldDescriptor, config: &PssaConfig) -> Result<PssaNode> {
    config.validate()?;
    root.validate()?;
    let actual = data.manifold()?;
    if actual != root {
        return Err(PssaError::dim(format!("data lives on {} but the root is {}", actual.label(), root.label())));
    }
    let mut node = PssaNode::root(root);
    if node.dim <= config.min_dim {
        return Ok(node);
    }
    match data {
        Dataset::Sphere(x) => node.children = sphere_chain(x, config)?,
        Dataset::Grassmannian(planes) => node.children = grassmann_chain(planes, config)?,
        Dataset::Torus(points) => {
            let n = root.dim();
            let identity: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
            let ctx = TorusContext {
                map: identity,
                constraints: Vec::new(),
                offsets: Vec::new(),
                error: 0.0,
            };
            node.children = torus_children(points, &ctx, config)?;
        }
        Dataset::Polysphere(points) => {
            let n = points[0].n_factors();
            let state = PolysphereState::full(n);
            let pdata = PolysphereData::from_points(points)?;
            node.children = polysphere_children(&state, &pdata, 0.0, config);
        }
    }
    Ok(node)
}

/// Nests `nodes` so each is the only child of the previous one.
fn nest(mut nodes: Vec<PssaNode>) -> Vec<PssaNode> {
    let mut child: Option<PssaNode> = None;
    while let Some(mut n) = nodes.pop() {
        if let Some(c) = child.take() {
            n.children = vec![c];
        }
        child = Some(n);
    }
    child.into_iter().collect()
}

/// The unbranched chain Sⁿ⁻¹ ⊃ … ⊃ S⁰ cut from one singular system.
fn sphere_chain(x: &Matrix, config: &PssaConfig) -> Result<Vec<PssaNode>> {
    let x = validate_unit_columns(x, false)?;
    let n = x.nrows() - 1;
    let mut nodes = Vec::new();
    for m in 1..=n {
        let dim = n - m;
        if dim < config.min_dim {
            break;
        }
        if dim == 0 && config.sphere_terminal == SphereTerminal::Mean {
            let mean = spherical_mean_of_columns(&x)?;
            let errs: f64 = x
                .column_iter()
                .map(|c| crate::sphere::great_circle_distance(&c.into_owned(), mean.coords()).powi(2))
                .sum();
            nodes.push(PssaNode {
                label: "pt".into(),
                dim: 0,
                model: NodeModel::SphereMean {
                    point: mean.coords().iter().copied().collect(),
                },
                fit_error: errs.sqrt(),
                loo_error: None,
                warning: None,
                children: Vec::new(),
            });
            break;
        }
        let model = fit_subsphere(&x, m)?;
        nodes.push(PssaNode {
            label: format!("S{dim}"),
            dim,
            fit_error: model.total_error,
            model: NodeModel::Subsphere {
                fit: SubsphereSummary::from(&model),
            },
            loo_error: None,
            warning: None,
            children: Vec::new(),
        });
    }
    Ok(nest(nodes))
}

/// The chain G(k, n−1) ⊃ … ⊃ G(k, k) of planes orthogonal to growing W.
fn grassmann_chain(planes: &[GrassmannPoint], config: &PssaConfig) -> Result<Vec<PssaNode>> {
    let (k, n) = (planes[0].plane_dim(), planes[0].ambient_dim());
    let chain = grassmann_pssa_chain(planes, n - k)?;
    let nodes = chain
        .iter()
        .filter(|m| m.dim() >= config.min_dim)
        .map(|m| PssaNode {
            label: format!("G({k},{})", n - m.codim),
            dim: m.dim(),
            fit_error: m.total_error,
            model: NodeModel::Subgrassmannian {
                fit: SubgrassmannianSummary::from(m),
            },
            loo_error: None,
            warning: None,
            children: Vec::new(),
        })
        .collect();
    Ok(nest(nodes))
}

struct TorusContext {
    /// Current coordinates as integer combinations of the root angles.
    map: Vec<Vec<i64>>,
    constraints: Vec<Vec<i64>>,
    offsets: Vec<f64>,
    error: f64,
}

fn mat_i64(a: &[Vec<i64>], b: &[Vec<i64>], cols: usize) -> Result<Vec<Vec<i64>>> {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    row.iter().zip(b).try_fold(0i64, |acc, (x, br)| {
                        x.checked_mul(br[j])
                            .and_then(|p| acc.checked_add(p))
                            .ok_or_else(|| PssaError::Validation("torus coordinate map overflows i64".into()))
                    })
                })
                .collect()
        })
        .collect()
}

fn torus_label(dim: usize, a: &ResonanceMatrix) -> String {
    let name = if dim == 0 { "pt".to_string() } else { format!("T{dim}") };
    format!("{name} {a}")
}

/// Ranks single resonances on the current coordinates and recurses into
/// the best `max_children_per_node`.
fn torus_children(points: &[TorusPoint], ctx: &TorusContext, config: &PssaConfig) -> Result<Vec<PssaNode>> {
    let m = points[0].dim();
    if m == 0 || m - 1 < config.min_dim {
        return Ok(Vec::new());
    }
    let candidates = enumerate_resonances(m, 1, config.resonance_bound.max(2));
    let ranked: Vec<(ResonanceMatrix, Option<f64>)> = match config.selection {
        Selection::Loo => loo_model_selection(points, &candidates)?
            .into_iter()
            .map(|r| (r.resonance, r.loo_error))
            .collect(),
        Selection::TrainingError => {
            let mut scored: Vec<(usize, ResonanceMatrix, Option<f64>)> = candidates
                .par_iter()
                .enumerate()
                .map(|(i, a)| (i, a.clone(), fit_subtorus(points, a).ok().map(|f| f.mean_error)))
                .collect();
            scored.sort_by(|x, y| match (x.2, y.2) {
                (Some(a), Some(b)) => a.total_cmp(&b).then_with(|| x.0.cmp(&y.0)),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => x.0.cmp(&y.0),
            });
            scored.into_iter().map(|(_, a, _)| (a, None)).collect()
        }
    };
    let n_root = ctx.map.first().map(|r| r.len()).unwrap_or(0);
    ranked
        .into_iter()
        .take(config.max_children_per_node)
        .map(|(a, loo)| -> Result<PssaNode> {
            let label = torus_label(m - 1, &a);
            let model = match fit_subtorus(points, &a) {
                Ok(model) => model,
                Err(e) => return Ok(PssaNode::failed(label, m - 1, a.to_string(), &e)),
            };
            let chart = SubtorusChart::new(&a)?;
            let a_rows = a.matrix().to_i64_rows()?;
            let rest = chart.completion.rows_from(1).to_i64_rows()?;
            let mut constraints = ctx.constraints.clone();
            constraints.extend(mat_i64(&a_rows, &ctx.map, n_root)?);
            let mut offsets = ctx.offsets.clone();
            offsets.extend(model.offset.iter().copied());
            let next = TorusContext {
                map: mat_i64(&rest, &ctx.map, n_root)?,
                constraints: constraints.clone(),
                offsets: offsets.clone(),
                error: ctx.error.hypot(model.mean_error),
            };
            let projected: Vec<TorusPoint> = points.iter().map(|p| chart.project(p)).collect::<Result<_>>()?;
            let mut local = SubtorusSummary::from_model(&model)?;
            local.loo_error = loo;
            let children = torus_children(&projected, &next, config)?;
            Ok(PssaNode {
                label,
                dim: m - 1,
                model: NodeModel::Subtorus {
                    local,
                    constraints,
                    offsets,
                },
                fit_error: next.error,
                loo_error: loo,
                warning: None,
                children,
            })
        })
        .collect()
}

fn edge_label(edge: &PolysphereEdge) -> String {
    match edge {
        PolysphereEdge::Couple { a, b } => format!("couple spheres {a} and {b}"),
        PolysphereEdge::Circle { sphere } => format!("great circle on sphere {sphere}"),
        PolysphereEdge::SpherePoint { sphere } => format!("freeze sphere {sphere}"),
        PolysphereEdge::Resonance { resonance } => format!("resonance {resonance}"),
    }
}

/// Fits every available reduction, ranks them by the configured
/// criterion and recurses into the best `max_children_per_node`.
fn polysphere_children(
    state: &PolysphereState,
    data: &PolysphereData,
    parent_error: f64,
    config: &PssaConfig,
) -> Vec<PssaNode> {
    let pcfg = config.polysphere();
    let edges = candidate_edges(state, &pcfg);
    let mut scored: Vec<(usize, PolysphereEdge, Result<EdgeFit>, Option<f64>)> = edges
        .into_par_iter()
        .enumerate()
        .map(|(i, edge)| {
            let fit = EdgeFit::fit(state, data, &edge);
            let loo = match (&fit, config.selection) {
                (Ok(_), Selection::Loo) => EdgeFit::loo_error(state, data, &edge).ok(),
                _ => None,
            };
            (i, edge, fit, loo)
        })
        .collect();
    let key = |fit: &Result<EdgeFit>, loo: Option<f64>| -> Option<f64> {
        match (fit, config.selection) {
            (Ok(_), Selection::Loo) => loo,
            (Ok(f), Selection::TrainingError) => Some(f.rms_error),
            (Err(_), _) => None,
        }
    };
    scored.sort_by(|x, y| match (key(&x.2, x.3), key(&y.2, y.3)) {
        (Some(a), Some(b)) => a.total_cmp(&b).then_with(|| x.0.cmp(&y.0)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => x.0.cmp(&y.0),
    });
    scored
        .into_iter()
        .take(config.max_children_per_node)
        .filter_map(|(_, edge, fit, loo)| match fit {
            Err(e) => Some(PssaNode::failed("?".into(), 0, edge_label(&edge), &e)),
            Ok(f) => {
                let dim = f.state.dim();
                if dim < config.min_dim {
                    return None;
                }
                let error = parent_error.hypot(f.rms_error);
                let children = if dim > config.min_dim && f.data.len() >= 2 {
                    polysphere_children(&f.state, &f.data, error, config)
                } else {
                    Vec::new()
                };
                Some(PssaNode {
                    label: f.state.signature(),
                    dim,
                    model: NodeModel::Polysphere {
                        edge: f.model,
                        state: f.state,
                    },
                    fit_error: error,
                    loo_error: loo,
                    warning: None,
                    children,
                })
            }
        })
        .collect()
}

/// Intrinsic coordinates of torus data on a node's subtorus.
pub fn project_torus_points(points: &[TorusPoint], constraints: &[Vec<i64>]) -> Result<Vec<TorusPoint>> {
    let a = ResonanceMatrix::new(IntMatrix::try_from_rows(constraints)?)?;
    let chart = SubtorusChart::new(&a)?;
    points.iter().map(|p| chart.project(p)).collect()
}
