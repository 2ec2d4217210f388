//! Dataset files.
//!
//! CSV: comma-separated reals with `.` decimals, one item per row. Lines
//! starting with `#` are comments. Grassmannian items are `k` consecutive
//! rows, each a spanning vector in ℝⁿ, with items separated by a blank
//! line (or cut into fixed blocks when the plane dimension is given).
//!
//! JSON: a [`DatasetFile`] object.
//!
//! Sphere and polysphere rows must be unit to `1e-8` unless renormalization
//! is requested.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{PssaError, Result};
use crate::grassmann::GrassmannPoint;
use crate::linalg::{matrix_to_rows, Matrix};
use crate::polysphere::PolyspherePoint;
use crate::tolerance::TOL;
use crate::torus::TorusPoint;
use crate::tree::{Dataset, ManifoldDescriptor};

/// Family of the manifold named on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Sphere,
    Grassmann,
    Torus,
    Polysphere,
}

impl ManifoldKind {
    pub fn of(m: &ManifoldDescriptor) -> Self {
        match m {
            ManifoldDescriptor::Sphere { .. } => ManifoldKind::Sphere,
            ManifoldDescriptor::Grassmannian { .. } => ManifoldKind::Grassmann,
            ManifoldDescriptor::Torus { .. } => ManifoldKind::Torus,
            ManifoldDescriptor::Polysphere { .. } => ManifoldKind::Polysphere,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// `.json` files are JSON, everything else CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

/// JSON dataset document. Exactly one of `rows` and `frames` is present;
/// `frames` holds Grassmannian items as lists of spanning vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub manifold: ManifoldDescriptor,
    #[serde(default)]
    pub header: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<Vec<Vec<f64>>>>,
}

fn invalid(msg: impl Into<String>) -> PssaError {
    PssaError::Validation(msg.into())
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("line {lineno}: `{f}` is not a finite number")))
        })
        .collect()
}

/// Splits CSV text into blocks of rows separated by blank lines.
fn csv_blocks(text: &str) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut blocks = vec![Vec::new()];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !blocks.last().is_some_and(|b: &Vec<Vec<f64>>| b.is_empty()) {
                blocks.push(Vec::new());
            }
            continue;
        }
        blocks.last_mut().expect("nonempty").push(parse_row(line, i + 1)?);
    }
    blocks.retain(|b| !b.is_empty());
    Ok(blocks)
}

fn check_width(rows: &[Vec<f64>]) -> Result<usize> {
    let w = rows.first().map(|r| r.len()).ok_or_else(|| invalid("dataset has no rows"))?;
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != w) {
        return Err(invalid(format!("row {} has {} values, expected {w}", i + 1, r.len())));
    }
    Ok(w)
}

fn unit(v: &[f64], index: usize, renormalize: bool) -> Result<Vec<f64>> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !renormalize && !((norm - 1.0).abs() <= TOL.unit_norm) {
        return Err(PssaError::NonUnitData { index, norm });
    }
    if !(norm > 1e-12) {
        return Err(invalid(format!("row {} cannot be normalized", index + 1)));
    }
    Ok(v.iter().map(|a| a / norm).collect())
}

/// Builds a dataset from flat rows (sphere, torus, polysphere).
pub fn dataset_from_rows(kind: ManifoldKind, rows: &[Vec<f64>], renormalize: bool) -> Result<Dataset> {
    let w = check_width(rows)?;
    match kind {
        ManifoldKind::Sphere => {
            if w < 2 {
                return Err(invalid("sphere rows need at least two coordinates"));
            }
            let mut x = Matrix::zeros(w, rows.len());
            for (j, r) in rows.iter().enumerate() {
                for (i, v) in unit(r, j, renormalize)?.into_iter().enumerate() {
                    x[(i, j)] = v;
                }
            }
            Ok(Dataset::Sphere(x))
        }
        ManifoldKind::Torus => Ok(Dataset::Torus(
            rows.iter().map(|r| TorusPoint::new(r.clone())).collect::<Result<_>>()?,
        )),
        ManifoldKind::Polysphere => {
            if w % 3 != 0 {
                return Err(invalid(format!("polysphere rows need 3n values, got {w}")));
            }
            let pts = rows
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    let factors = r
                        .chunks(3)
                        .map(|c| unit(c, j, renormalize).map(|u| Vector3::new(u[0], u[1], u[2])))
                        .collect::<Result<Vec<_>>>()?;
                    PolyspherePoint::new(factors)
                })
                .collect::<Result<_>>()?;
            Ok(Dataset::Polysphere(pts))
        }
        ManifoldKind::Grassmann => Err(invalid("grassmann data needs frames")),
    }
}

/// Builds a Grassmannian dataset; each frame is a list of spanning vectors.
pub fn dataset_from_frames(frames: &[Vec<Vec<f64>>]) -> Result<Dataset> {
    let first = frames.first().ok_or_else(|| invalid("dataset has no frames"))?;
    let (k, n) = (first.len(), check_width(first)?);
    let planes = frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.len() != k || check_width(f)? != n {
                return Err(invalid(format!("frame {} is not {k} vectors in R^{n}", i + 1)));
            }
            let m = Matrix::from_fn(n, k, |r, c| f[c][r]);
            GrassmannPoint::span_of(&m).map_err(|e| invalid(format!("frame {}: {e}", i + 1)))
        })
        .collect::<Result<_>>()?;
    Ok(Dataset::Grassmannian(planes))
}

/// Parses CSV text. `plane_dim` cuts Grassmannian rows into blocks of that
/// size instead of using blank-line separators.
pub fn parse_csv(text: &str, kind: ManifoldKind, plane_dim: Option<usize>, renormalize: bool) -> Result<Dataset> {
    let blocks = csv_blocks(text)?;
    if kind != ManifoldKind::Grassmann {
        let rows: Vec<Vec<f64>> = blocks.into_iter().flatten().collect();
        return dataset_from_rows(kind, &rows, renormalize);
    }
    let frames: Vec<Vec<Vec<f64>>> = match plane_dim {
        Some(0) => return Err(invalid("plane dimension must be positive")),
        Some(k) => {
            let rows: Vec<Vec<f64>> = blocks.into_iter().flatten().collect();
            if rows.len() % k != 0 {
                return Err(invalid(format!("{} rows do not split into frames of {k}", rows.len())));
            }
            rows.chunks(k).map(|c| c.to_vec()).collect()
        }
        None => blocks,
    };
    dataset_from_frames(&frames)
}

/// Parses a JSON dataset document; `kind`, when given, must match.
pub fn parse_json(text: &str, kind: Option<ManifoldKind>, renormalize: bool) -> Result<Dataset> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| invalid(format!("malformed dataset: {e}")))?;
    let fkind = ManifoldKind::of(&file.manifold);
    if kind.is_some_and(|k| k != fkind) {
        return Err(invalid(format!("file holds {fkind:?} data, not {kind:?}")));
    }
    let data = match (&file.rows, &file.frames) {
        (Some(rows), None) if fkind != ManifoldKind::Grassmann => dataset_from_rows(fkind, rows, renormalize)?,
        (None, Some(frames)) if fkind == ManifoldKind::Grassmann => dataset_from_frames(frames)?,
        _ => return Err(invalid("dataset needs `rows`, or `frames` for grassmann data")),
    };
    if data.manifold()? != file.manifold {
        return Err(invalid("data do not match the declared manifold"));
    }
    Ok(data)
}

/// Flat rows of a non-Grassmannian dataset, or the frames of one.
pub fn dataset_rows(data: &Dataset) -> (Option<Vec<Vec<f64>>>, Option<Vec<Vec<Vec<f64>>>>) {
    match data {
        Dataset::Sphere(x) => (Some(matrix_to_rows(&x.transpose())), None),
        Dataset::Torus(p) => (Some(p.iter().map(|x| x.coords().to_vec()).collect()), None),
        Dataset::Polysphere(p) => (Some(p.iter().map(|x| x.to_flat()).collect()), None),
        Dataset::Grassmannian(p) => (
            None,
            Some(p.iter().map(|x| matrix_to_rows(&x.frame().matrix().transpose())).collect()),
        ),
    }
}

fn csv_line(row: &[f64]) -> String {
    row.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

/// CSV text with `header` as `#` comments.
pub fn write_csv(data: &Dataset, header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    match dataset_rows(data) {
        (Some(rows), _) => {
            for r in rows {
                out.push_str(&csv_line(&r));
                out.push('\n');
            }
        }
        (_, Some(frames)) => {
            for (i, f) in frames.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                for r in f {
                    out.push_str(&csv_line(r));
                    out.push('\n');
                }
            }
        }
        _ => {}
    }
    out
}

pub fn write_json(data: &Dataset, header: &[String]) -> Result<String> {
    let (rows, frames) = dataset_rows(data);
    let file = DatasetFile {
        manifold: data.manifold()?,
        header: header.to_vec(),
        rows,
        frames,
    };
    let mut s = serde_json::to_string_pretty(&file).map_err(|e| invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Plain CSV table with a column header line.
pub fn csv_table(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_csv_round_trip() {
        let text = "# a comment\n1,0,0\n0,2,0\n\n0.6,0.8,0\n";
        assert!(matches!(
            parse_csv(text, ManifoldKind::Sphere, None, false),
            Err(PssaError::NonUnitData { index: 1, .. })
        ));
        let d = parse_csv(text, ManifoldKind::Sphere, None, true).unwrap();
        assert_eq!(d.manifold().unwrap(), ManifoldDescriptor::Sphere { n: 2 });
        assert_eq!(d.len(), 3);
        let out = write_csv(&d, &["x".into()]);
        let again = parse_csv(&out, ManifoldKind::Sphere, None, false).unwrap();
        assert_eq!(dataset_rows(&again), dataset_rows(&d));
    }

    #[test]
    fn grassmann_blocks() {
        let text = "1,0,0\n0,1,0\n\n1,0,0\n0,0,1\n";
        let a = parse_csv(text, ManifoldKind::Grassmann, None, false).unwrap();
        assert_eq!(a.manifold().unwrap(), ManifoldDescriptor::Grassmannian { k: 2, n: 3 });
        let b = parse_csv(&text.replace("\n\n", "\n"), ManifoldKind::Grassmann, Some(2), false).unwrap();
        assert_eq!(dataset_rows(&a), dataset_rows(&b));
        assert!(parse_csv(text, ManifoldKind::Grassmann, Some(3), false).is_err());
    }

    #[test]
    fn bad_input_is_validation_error() {
        for (text, kind) in [
            ("1,x\n", ManifoldKind::Torus),
            ("1,0\n1,0,0\n", ManifoldKind::Sphere),
            ("0,0,0\n", ManifoldKind::Sphere),
            ("1,0,0,1\n", ManifoldKind::Polysphere),
            ("", ManifoldKind::Torus),
        ] {
            assert!(parse_csv(text, kind, None, false).unwrap_err().is_validation(), "{text:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let d = parse_csv("0.1,0.2\n0.5,0.9\n", ManifoldKind::Torus, None, false).unwrap();
        let text = write_json(&d, &[]).unwrap();
        let back = parse_json(&text, Some(ManifoldKind::Torus), false).unwrap();
        assert_eq!(dataset_rows(&back), dataset_rows(&d));
        assert!(parse_json(&text, Some(ManifoldKind::Sphere), false).is_err());
    }
}
