//! Whole-dataset runs that produce reports.

use rayon::prelude::*;

use crate::error::{PssaError, Result};
use crate::grassmann::{grassmann_pssa_chain, SubgrassmannianSummary};
use crate::polysphere::{enumerate_polysphere_models, fit_polysphere_model, polysphere_loo_error};
use crate::report::{Provenance, Report, ReportBody, ResonanceEntry, TemplateEntry};
use crate::sphere::{fit_subsphere, sphere_pssa_chain, validate_unit_columns, SubsphereSummary};
use crate::torus::{fit_subtorus, reduce_resonance_basis, select_resonance, SubtorusSummary};
use crate::tree::{build_tree, Dataset, PssaConfig, Selection};

/// Runs the module fit matching the data: the sphere chain down to the
/// antipodal pair, the Grassmannian chain, a resonance selection of codimension `torus_codim`, or a
/// ranking of polysphere templates by dimension, then error.
pub fn fit_report(data: &Dataset, config: &PssaConfig, torus_codim: usize) -> Result<Report> {
    config.validate()?;
    let manifold = data.manifold()?;
    let body = match data {
        Dataset::Sphere(x) => {
            let x = validate_unit_columns(x, false)?;
            let mut chain = sphere_pssa_chain(&x)?;
            chain.push(fit_subsphere(&x, x.nrows() - 1)?);
            let models = chain.iter().map(SubsphereSummary::from).collect();
            ReportBody::SphereChain { manifold, models }
        }
        Dataset::Grassmannian(planes) => {
            let (k, n) = (planes[0].plane_dim(), planes[0].ambient_dim());
            let models = grassmann_pssa_chain(planes, n - k)?
                .iter()
                .map(SubgrassmannianSummary::from)
                .collect();
            ReportBody::GrassmannChain { manifold, models }
        }
        Dataset::Torus(points) => {
            let n = manifold.dim();
            if torus_codim == 0 || torus_codim >= n.max(2) {
                return Err(PssaError::Validation(format!(
                    "resonance codimension must lie in 1..{} for T{n}",
                    n.max(2) - 1
                )));
            }
            let ranked = select_resonance(points, torus_codim, config.resonance_bound)?;
            let best_idx = ranked.iter().position(|r| r.loo_error.is_some());
            let (best, reduced_basis) = match best_idx {
                Some(i) => {
                    let a = &ranked[i].resonance;
                    let mut summary = SubtorusSummary::from_model(&fit_subtorus(points, a)?)?;
                    summary.loo_error = ranked[i].loo_error;
                    (Some(summary), Some(reduce_resonance_basis(a)?.matrix().to_i64_rows()?))
                }
                None => (None, None),
            };
            let candidates = ranked.len();
            let ranking = ranked
                .iter()
                .take(config.ranking_limit)
                .map(|r| {
                    Ok(ResonanceEntry {
                        resonance: r.resonance.matrix().to_i64_rows()?,
                        loo_error: r.loo_error,
                        warning: r.warning.clone(),
                    })
                })
                .collect::<Result<_>>()?;
            ReportBody::TorusSelection {
                manifold,
                codim: torus_codim,
                candidates,
                ranking,
                best,
                reduced_basis,
            }
        }
        Dataset::Polysphere(points) => {
            let templates = enumerate_polysphere_models(manifold_factors(data), &config.polysphere());
            let mut ranking: Vec<(usize, TemplateEntry)> = templates
                .into_par_iter()
                .enumerate()
                .map(|(i, t)| {
                    let signature = t.signature().unwrap_or_default();
                    let dim = t.dim().unwrap_or(0);
                    let fit = fit_polysphere_model(points, &t);
                    let loo = match (&fit, config.selection) {
                        (Ok(_), Selection::Loo) => Some(polysphere_loo_error(points, &t)),
                        _ => None,
                    };
                    let entry = match fit {
                        Ok(f) => TemplateEntry {
                            signature,
                            dim,
                            template: t,
                            loo_error: loo.as_ref().and_then(|r| r.as_ref().ok()).copied(),
                            sphere_error: Some(f.total_error),
                            torus_error: Some(f.torus_error),
                            model: Some(f.model),
                            state: Some(f.state),
                            warning: loo.and_then(|r| r.err()).map(|e| e.to_string()),
                        },
                        Err(e) => TemplateEntry {
                            signature,
                            dim,
                            template: t,
                            loo_error: None,
                            sphere_error: None,
                            torus_error: None,
                            model: None,
                            state: None,
                            warning: Some(e.to_string()),
                        },
                    };
                    (i, entry)
                })
                .collect();
            let key = |e: &TemplateEntry| match config.selection {
                Selection::Loo => e.loo_error,
                Selection::TrainingError => e.sphere_error.zip(e.torus_error).map(|(a, b)| a + b),
            };
            // errors only compare within one dimension
            ranking.sort_by(|(ia, a), (ib, b)| {
                b.dim.cmp(&a.dim).then_with(|| match (key(a), key(b)) {
                    (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| ia.cmp(ib)),
                    (Some(_), None) => std::cmp::Ordering::Less,
                    (None, Some(_)) => std::cmp::Ordering::Greater,
                    (None, None) => ia.cmp(ib),
                })
            });
            ReportBody::PolysphereSelection {
                manifold,
                candidates: ranking.len(),
                ranking: ranking.into_iter().take(config.ranking_limit).map(|(_, e)| e).collect(),
            }
        }
    };
    Ok(Report::new(Provenance::new("fit", config, data.len()), body))
}

fn manifold_factors(data: &Dataset) -> usize {
    match data {
        Dataset::Polysphere(p) => p[0].n_factors(),
        _ => 0,
    }
}

/// Builds the tree of approximations rooted at the data's manifold.
pub fn tree_report(data: &Dataset, config: &PssaConfig) -> Result<Report> {
    let manifold = data.manifold()?;
    let root = build_tree(data, manifold, config)?;
    Ok(Report::new(
        Provenance::new("tree", config, data.len()),
        ReportBody::Tree { manifold, root },
    ))
}
