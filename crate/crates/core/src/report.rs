//! JSON report documents.
//!
//! Reports are parsed strictly: unknown fields and other schema versions
//! are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{PssaError, Result};
use crate::grassmann::SubgrassmannianSummary;
use crate::polysphere::model::PolysphereState;
use crate::polysphere::{PolysphereModel, PolysphereTemplate};
use crate::sphere::SubsphereSummary;
use crate::torus::SubtorusSummary;
use crate::tree::{ManifoldDescriptor, PssaConfig, PssaNode};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "pssa";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: PssaConfig,
    pub input_points: usize,
}

impl Provenance {
    pub fn new(command: &str, config: &PssaConfig, input_points: usize) -> Self {
        Provenance {
            tool: TOOL_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: config.seed,
            config: config.clone(),
            input_points,
        }
    }
}

/// One candidate of a resonance ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceEntry {
    pub resonance: Vec<Vec<i64>>,
    pub loo_error: Option<f64>,
    pub warning: Option<String>,
}

/// One template of a polysphere ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateEntry {
    pub signature: String,
    pub dim: usize,
    pub template: PolysphereTemplate,
    pub loo_error: Option<f64>,
    /// Sum of squared great-circle residuals.
    pub sphere_error: Option<f64>,
    /// Sum of squared torus residuals.
    pub torus_error: Option<f64>,
    pub model: Option<PolysphereModel>,
    pub state: Option<PolysphereState>,
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReportBody {
    SphereChain {
        manifold: ManifoldDescriptor,
        models: Vec<SubsphereSummary>,
    },
    GrassmannChain {
        manifold: ManifoldDescriptor,
        models: Vec<SubgrassmannianSummary>,
    },
    /// Candidates ranked by leave-one-out error; `best` is the full fit of
    /// the first usable one, with `reduced_basis` a nearly orthogonal
    /// basis of its resonance lattice.
    TorusSelection {
        manifold: ManifoldDescriptor,
        codim: usize,
        /// Number of candidates ranked; `ranking` keeps the leading ones.
        candidates: usize,
        ranking: Vec<ResonanceEntry>,
        best: Option<SubtorusSummary>,
        reduced_basis: Option<Vec<Vec<i64>>>,
    },
    PolysphereSelection {
        manifold: ManifoldDescriptor,
        candidates: usize,
        ranking: Vec<TemplateEntry>,
    },
    Tree {
        manifold: ManifoldDescriptor,
        root: PssaNode,
    },
}

impl ReportBody {
    pub fn section_name(&self) -> &'static str {
        match self {
            ReportBody::SphereChain { .. } => "sphere_chain",
            ReportBody::GrassmannChain { .. } => "grassmann_chain",
            ReportBody::TorusSelection { .. } => "torus_selection",
            ReportBody::PolysphereSelection { .. } => "polysphere_selection",
            ReportBody::Tree { .. } => "tree",
        }
    }

    pub fn manifold(&self) -> ManifoldDescriptor {
        match self {
            ReportBody::SphereChain { manifold, .. }
            | ReportBody::GrassmannChain { manifold, .. }
            | ReportBody::TorusSelection { manifold, .. }
            | ReportBody::PolysphereSelection { manifold, .. }
            | ReportBody::Tree { manifold, .. } => *manifold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub body: ReportBody,
}

impl Report {
    pub fn new(provenance: Provenance, body: ReportBody) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            provenance,
            body,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| PssaError::Validation(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and validates a report.
    pub fn from_json(text: &str) -> Result<Self> {
        let report: Report =
            serde_json::from_str(text).map_err(|e| PssaError::Validation(format!("malformed report: {e}")))?;
        report.validate()?;
        Ok(report)
    }

    /// Checks the schema version and the structural invariants of the body.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(PssaError::Validation(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.body.manifold().validate()?;
        self.provenance.config.validate()?;
        match &self.body {
            ReportBody::SphereChain { models, .. } => check_chain(models.iter().map(|m| (m.codim, m.total_error))),
            ReportBody::GrassmannChain { models, .. } => check_chain(models.iter().map(|m| (m.codim, m.total_error))),
            ReportBody::TorusSelection {
                ranking,
                best,
                candidates,
                ..
            } => {
                if best.is_some() && ranking.is_empty() {
                    return Err(PssaError::Validation("best fit without a ranking".into()));
                }
                check_ranking_len(ranking.len(), *candidates)
            }
            ReportBody::PolysphereSelection { ranking, candidates, .. } => {
                check_ranking_len(ranking.len(), *candidates)
            }
            ReportBody::Tree { manifold, root } => {
                if root.dim != manifold.dim() {
                    return Err(PssaError::Validation("root dimension differs from the manifold".into()));
                }
                check_node(root)
            }
        }
    }
}

fn check_ranking_len(kept: usize, candidates: usize) -> Result<()> {
    if kept > candidates {
        return Err(PssaError::Validation(format!("{kept} ranking entries for {candidates} candidates")));
    }
    Ok(())
}

fn check_chain(items: impl Iterator<Item = (usize, f64)>) -> Result<()> {
    let mut last: Option<(usize, f64)> = None;
    for (codim, err) in items {
        if !(err >= 0.0) {
            return Err(PssaError::Validation("negative or missing chain error".into()));
        }
        if let Some((c, e)) = last {
            if codim <= c || err < e - 1e-9 * e.max(1.0) {
                return Err(PssaError::Validation("chain is not nested".into()));
            }
        }
        last = Some((codim, err));
    }
    Ok(())
}

fn check_node(node: &PssaNode) -> Result<()> {
    for c in &node.children {
        if c.dim >= node.dim {
            return Err(PssaError::Validation(format!(
                "child `{}` of `{}` does not lower the dimension",
                c.label, node.label
            )));
        }
        check_node(c)?;
    }
    Ok(())
}
