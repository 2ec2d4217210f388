//! CSV samples of fitted submanifolds for external plotting.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{PssaError, Result};
use crate::io::csv_table;
use crate::linalg::matrix_from_rows;
use crate::polysphere::model::PolysphereState;
use crate::polysphere::{angles_on_circle, matrix3_from_rows, point_on_circle};
use crate::report::{Report, ReportBody};
use crate::torus::{wrap01, IntMatrix, ResonanceMatrix, SubtorusChart, TorusPoint};
use crate::tree::{Dataset, NodeModel};

/// Samples per closed curve.
pub const CURVE_SAMPLES: usize = 512;

/// Samples per side of a sampled 2-torus.
pub const GRID_SAMPLES: usize = 64;

/// Sections available for each report kind.
pub fn sections(report: &Report) -> &'static [&'static str] {
    match report.body {
        ReportBody::SphereChain { .. } => &["great-circle", "projected"],
        ReportBody::GrassmannChain { .. } => &["complement"],
        ReportBody::TorusSelection { .. } => &["subtorus", "projected"],
        ReportBody::PolysphereSelection { .. } => &["circles", "angles"],
        ReportBody::Tree { .. } => &["nodes"],
    }
}

fn unknown(what: &str) -> PssaError {
    PssaError::UnknownReportSection(what.into())
}

fn need_data(data: Option<&Dataset>, what: &str) -> Result<Dataset> {
    data.cloned()
        .ok_or_else(|| PssaError::Validation(format!("section `{what}` needs the input dataset")))
}

/// Renders section `what` of `report` as CSV. Sections of projected data
/// need the dataset the report was computed from.
pub fn plot_data(report: &Report, what: &str, data: Option<&Dataset>) -> Result<String> {
    if !sections(report).contains(&what) {
        return Err(unknown(what));
    }
    match (&report.body, what) {
        (ReportBody::SphereChain { models, .. }, _) => {
            let circle = models
                .iter()
                .find(|m| m.ambient_dim - m.codim == 1)
                .ok_or_else(|| unknown(what))?;
            let basis = great_circle_basis(&circle.complement_frame, circle.ambient_dim + 1)?;
            let header = coord_header("x", circle.ambient_dim + 1);
            let cols: Vec<&str> = header.iter().map(String::as_str).collect();
            if what == "great-circle" {
                let rows = (0..CURVE_SAMPLES)
                    .map(|s| {
                        let (sn, cs) = (2.0 * PI * s as f64 / CURVE_SAMPLES as f64).sin_cos();
                        basis[0].iter().zip(&basis[1]).map(|(a, b)| cs * a + sn * b).collect()
                    })
                    .collect::<Vec<_>>();
                return Ok(csv_table(&cols, &rows));
            }
            let Dataset::Sphere(x) = need_data(data, what)? else {
                return Err(PssaError::Validation("dataset is not sphere data".into()));
            };
            let mut rows = Vec::new();
            for c in x.column_iter() {
                let (u, v): (f64, f64) = (
                    basis[0].iter().zip(c.iter()).map(|(a, b)| a * b).sum(),
                    basis[1].iter().zip(c.iter()).map(|(a, b)| a * b).sum(),
                );
                let r = u.hypot(v);
                if r < 1e-12 {
                    return Err(PssaError::DegenerateProjection { index: rows.len() });
                }
                rows.push(basis[0].iter().zip(&basis[1]).map(|(a, b)| (u * a + v * b) / r).collect());
            }
            Ok(csv_table(&cols, &rows))
        }
        (ReportBody::GrassmannChain { models, .. }, _) => {
            let mut rows = Vec::new();
            for m in models {
                for (i, r) in m.complement_frame.iter().enumerate() {
                    let mut row = vec![m.codim as f64, i as f64];
                    row.extend(r);
                    rows.push(row);
                }
            }
            let n = models.first().map(|m| m.ambient_dim).unwrap_or(0);
            let mut header = vec!["codim".to_string(), "row".to_string()];
            header.extend((1..=n).map(|j| format!("w{j}")));
            let cols: Vec<&str> = header.iter().map(String::as_str).collect();
            Ok(csv_table(&cols, &rows))
        }
        (ReportBody::TorusSelection { best, manifold, .. }, _) => {
            let best = best.as_ref().ok_or_else(|| unknown(what))?;
            let a = ResonanceMatrix::new(IntMatrix::try_from_rows(&best.resonance)?)?;
            let chart = SubtorusChart::new(&a)?;
            let n = manifold.dim();
            let header = coord_header("x", n);
            let cols: Vec<&str> = header.iter().map(String::as_str).collect();
            if what == "subtorus" {
                let rows = subtorus_samples(&chart, &best.offset, n - a.k())?;
                return Ok(csv_table(&cols, &rows));
            }
            let Dataset::Torus(points) = need_data(data, what)? else {
                return Err(PssaError::Validation("dataset is not torus data".into()));
            };
            let rows = points
                .iter()
                .map(|p| Ok(chart.lift(&chart.project(p)?, &best.offset)?.coords().to_vec()))
                .collect::<Result<Vec<_>>>()?;
            Ok(csv_table(&cols, &rows))
        }
        (ReportBody::PolysphereSelection { ranking, .. }, _) => {
            let state = polysphere_torus_state(ranking).ok_or_else(|| unknown(what))?;
            if what == "circles" {
                return Ok(csv_table(&["circle", "factor", "t", "x", "y", "z"], &circle_samples(state)?));
            }
            let Dataset::Polysphere(points) = need_data(data, what)? else {
                return Err(PssaError::Validation("dataset is not polysphere data".into()));
            };
            let header: Vec<String> = (1..=state.circles.len()).map(|j| format!("theta{j}")).collect();
            let cols: Vec<&str> = header.iter().map(String::as_str).collect();
            Ok(csv_table(&cols, &circle_angles(state, &points)?))
        }
        (ReportBody::Tree { root, .. }, _) => {
            let mut id = 0usize;
            let mut stack: Vec<(usize, usize, &crate::tree::PssaNode)> = vec![(usize::MAX, 0, root)];
            let mut lines = String::from("id,parent,depth,dim,fit_error,loo_error,label\n");
            while let Some((parent, depth, node)) = stack.pop() {
                let me = id;
                id += 1;
                let parent = if parent == usize::MAX { String::new() } else { parent.to_string() };
                let loo = node.loo_error.map(|v| v.to_string()).unwrap_or_default();
                let failed = matches!(node.model, NodeModel::Failed { .. });
                let err = if failed { String::new() } else { node.fit_error.to_string() };
                lines.push_str(&format!("{me},{parent},{depth},{},{err},{loo},{}\n", node.dim, node.label));
                for c in node.children.iter().rev() {
                    stack.push((me, depth + 1, c));
                }
            }
            Ok(lines)
        }
    }
}

/// The best-ranked fit that is a product of circles, else the best-ranked
/// fit with any circle.
fn polysphere_torus_state(ranking: &[crate::report::TemplateEntry]) -> Option<&PolysphereState> {
    let states = || ranking.iter().filter_map(|e| e.state.as_ref());
    states()
        .find(|s| !s.circles.is_empty() && s.spheres.is_empty() && s.constraints.is_empty())
        .or_else(|| states().find(|s| !s.circles.is_empty()))
}

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("{prefix}{j}")).collect()
}

/// An orthonormal basis of the plane orthogonal to the complement rows.
fn great_circle_basis(complement: &[Vec<f64>], n: usize) -> Result<[Vec<f64>; 2]> {
    let w = matrix_from_rows(complement)?;
    let full = crate::linalg::orthogonal_completion(&w);
    if full.ncols() != n || w.ncols() + 2 != n {
        return Err(PssaError::dim("complement does not leave a great circle"));
    }
    let k = w.ncols();
    Ok([
        full.column(k).iter().copied().collect(),
        full.column(k + 1).iter().copied().collect(),
    ])
}

/// Closed winds of a 1-torus, or a grid over a 2-torus.
fn subtorus_samples(chart: &SubtorusChart, offset: &[f64], dim: usize) -> Result<Vec<Vec<f64>>> {
    let lift = |z: Vec<f64>| chart.lift(&TorusPoint::new(z)?, offset).map(|p| p.coords().to_vec());
    match dim {
        0 => Ok(vec![chart.base_point(offset)?.coords().to_vec()]),
        1 => {
            // the wind is closed after one turn of the chart coordinate;
            // sample densely enough for every wrap of the longest direction
            let dir = &chart.tangent_directions()[0];
            let turns = dir.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let count = CURVE_SAMPLES * turns as usize;
            (0..count).map(|s| lift(vec![s as f64 / count as f64])).collect()
        }
        2 => (0..GRID_SAMPLES * GRID_SAMPLES)
            .map(|s| {
                let (i, j) = (s / GRID_SAMPLES, s % GRID_SAMPLES);
                lift(vec![i as f64 / GRID_SAMPLES as f64, j as f64 / GRID_SAMPLES as f64])
            })
            .collect(),
        _ => Err(PssaError::UnknownReportSection(format!("subtorus of dimension {dim}"))),
    }
}

fn rot(rows: &[[f64; 3]; 3]) -> Result<Matrix3<f64>> {
    matrix3_from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
}

/// Samples of every circle component in every factor it occupies.
fn circle_samples(state: &PolysphereState) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (c, comp) in state.circles.iter().enumerate() {
        let axis = Vector3::from(comp.axis.0);
        for link in &comp.links {
            let r = rot(&link.rotation)?;
            for s in 0..CURVE_SAMPLES {
                let t = s as f64 / CURVE_SAMPLES as f64;
                let p = r * point_on_circle(&axis, t);
                rows.push(vec![c as f64, link.factor as f64, t, p.x, p.y, p.z]);
            }
        }
    }
    Ok(rows)
}

/// Angle of each point on each circle component, read off its base factor.
pub fn circle_angles(state: &PolysphereState, points: &[crate::polysphere::PolyspherePoint]) -> Result<Vec<Vec<f64>>> {
    let mut cols = Vec::new();
    for comp in &state.circles {
        let link = &comp.links[0];
        let r = rot(&link.rotation)?;
        if link.factor >= points.first().map(|p| p.n_factors()).unwrap_or(0) {
            return Err(PssaError::dim("circle refers to a missing factor"));
        }
        let pts: Vec<Vector3<f64>> = points.iter().map(|p| r.transpose() * p.factor(link.factor)).collect();
        cols.push(angles_on_circle(&pts, &Vector3::from(comp.axis.0))?);
    }
    Ok((0..points.len()).map(|i| cols.iter().map(|c| wrap01(c[i])).collect()).collect())
}
