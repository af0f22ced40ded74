use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{LiftedPoint, Parallelotope, Projector, Scheme, SchemeError, Window};
use crate::matrix::{IntMatrix, Matrix, Vector};
use crate::scalar::ExactScalar;

pub const PATCH_SCHEMA_VERSION: u32 = 1;

/// A scalar in a description file: an integer or a string such as
/// `"(1+√5)/2"`, `"3-2√2"`, `"1/2+1/2√5"` or `"0.25"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarText {
    Int(i64),
    Text(String),
}

impl ScalarText {
    pub fn parse(&self) -> Result<ExactScalar, SchemeError> {
        match self {
            ScalarText::Int(n) => Ok(ExactScalar::from_int(*n)),
            ScalarText::Text(s) => s
                .parse()
                .map_err(|e| SchemeError::Malformed(format!("scalar {s:?}: {e}"))),
        }
    }
}

impl From<&ExactScalar> for ScalarText {
    fn from(x: &ExactScalar) -> Self {
        ScalarText::Text(x.to_string())
    }
}

pub fn parse_scalar_row(row: &[ScalarText]) -> Result<Vector, SchemeError> {
    row.iter().map(ScalarText::parse).collect()
}

fn parse_rows(rows: &[Vec<ScalarText>]) -> Result<Matrix, SchemeError> {
    rows.iter().map(|r| parse_scalar_row(r)).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceFile {
    pub origin: Vec<ScalarText>,
    pub generators: Vec<Vec<ScalarText>>,
}

/// Window description. Either `generators` (ambient vectors whose internal
/// projections span a zonotope, tiled automatically when there are more of
/// them than the internal dimension) or explicit `pieces` in the internal
/// space. `offset` is an ambient vector whose internal projection translates
/// the zonotope.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowFile {
    #[serde(default)]
    pub offset: Option<Vec<ScalarText>>,
    #[serde(default)]
    pub generators: Option<Vec<Vec<ScalarText>>>,
    #[serde(default)]
    pub pieces: Option<Vec<PieceFile>>,
}

/// Structured-text scheme description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeFile {
    pub physical: Vec<Vec<ScalarText>>,
    pub internal: Vec<Vec<ScalarText>>,
    #[serde(default)]
    pub lattice: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub generic: bool,
    pub window: WindowFile,
}

impl SchemeFile {
    pub fn from_toml(text: &str) -> Result<Self, SchemeError> {
        toml::from_str(text).map_err(|e| SchemeError::Malformed(e.to_string()))
    }

    pub fn build(&self) -> Result<Scheme, SchemeError> {
        let physical = parse_rows(&self.physical)?;
        let internal = parse_rows(&self.internal)?;
        let dim = physical
            .first()
            .or(internal.first())
            .map(Vec::len)
            .ok_or_else(|| SchemeError::Malformed("no subspace bases".into()))?;
        let lattice = match &self.lattice {
            Some(rows) => {
                if rows.iter().any(|r| r.len() != dim) || rows.len() != dim {
                    return Err(SchemeError::DimensionMismatch("lattice basis".into()));
                }
                IntMatrix::from_rows(rows, dim)
            }
            None => IntMatrix::identity(dim),
        };
        let window = match (&self.window.generators, &self.window.pieces) {
            (Some(gens), None) => {
                let rho_i = Projector::new(&internal, &physical, dim)?;
                let gens = parse_rows(gens)?;
                if gens.iter().any(|g| g.len() != dim) {
                    return Err(SchemeError::DimensionMismatch("window generator".into()));
                }
                let offset = match &self.window.offset {
                    Some(o) => parse_scalar_row(o)?,
                    None => vec![ExactScalar::zero(); dim],
                };
                if offset.len() != dim {
                    return Err(SchemeError::DimensionMismatch("window offset".into()));
                }
                let projected = gens.iter().map(|g| rho_i.apply(g)).collect();
                Window::zonotope(&internal, rho_i.apply(&offset), projected)?
            }
            (None, Some(pieces)) => {
                let mut out = Vec::new();
                for p in pieces {
                    out.push(Parallelotope {
                        origin: parse_scalar_row(&p.origin)?,
                        generators: parse_rows(&p.generators)?,
                    });
                }
                let w = Window::from_pieces(out);
                match &self.window.offset {
                    Some(o) => w.translated(&parse_scalar_row(o)?),
                    None => w,
                }
            }
            _ => {
                return Err(SchemeError::Malformed(
                    "window needs exactly one of `generators` or `pieces`".into(),
                ))
            }
        };
        Scheme::new(physical, internal, lattice, window, self.generic)
    }
}

fn f64_list(v: &[ExactScalar]) -> Vec<f64> {
    v.iter().map(ExactScalar::to_f64).collect()
}

/// CSV with columns `gamma_*`, `y_*` (physical image), `w_*` (internal
/// image), `piece`, `precision`; coordinates as decimals.
pub fn patch_csv(dim: usize, points: &[LiftedPoint], precision: &str) -> String {
    let mut out = String::new();
    let cols: Vec<String> = ["gamma", "y", "w"]
        .iter()
        .flat_map(|p| (0..dim).map(move |i| format!("{p}_{i}")))
        .chain(["piece".to_string(), "precision".to_string()])
        .collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for p in points {
        let mut fields: Vec<String> = p.gamma.iter().map(ToString::to_string).collect();
        fields.extend(f64_list(&p.physical).iter().map(|x| format!("{x:.15e}")));
        fields.extend(f64_list(&p.internal).iter().map(|x| format!("{x:.15e}")));
        fields.push(p.piece.to_string());
        fields.push(precision.to_string());
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

/// JSON document with exact (`"a+b√D"`) and decimal coordinates.
pub fn patch_json(scheme: &Scheme, points: &[LiftedPoint], precision: &str) -> serde_json::Value {
    let pts: Vec<serde_json::Value> = points
        .iter()
        .map(|p| {
            json!({
                "gamma": p.gamma,
                "physical": p.physical.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "physical_decimal": f64_list(&p.physical),
                "internal": p.internal.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "internal_decimal": f64_list(&p.internal),
                "piece": p.piece,
            })
        })
        .collect();
    json!({
        "schema_version": PATCH_SCHEMA_VERSION,
        "precision": precision,
        "dimension": scheme.dim(),
        "field_radicand": scheme.radicand(),
        "pieces": scheme.window().len(),
        "count": points.len(),
        "points": pts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIB: &str = r#"
physical = [["(1+√5)/2", 1]]
internal = [[-1, "(1+√5)/2"]]
generic = true

[window]
offset = ["1/3", "1/7"]
generators = [[1, 0], [0, 1]]
"#;

    #[test]
    fn parses_fibonacci_description() {
        let f = SchemeFile::from_toml(FIB).unwrap();
        let s = f.build().unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.radicand(), 5);
        assert_eq!(s.window().len(), 2);
    }

    #[test]
    fn rejects_malformed_descriptions() {
        assert!(matches!(SchemeFile::from_toml("physical = 3"), Err(SchemeError::Malformed(_))));
        let bad = FIB.replace("\"(1+√5)/2\", 1", "\"(1+√5/2\", 1");
        assert!(SchemeFile::from_toml(&bad).unwrap().build().is_err());
    }

    #[test]
    fn empty_patch_csv_has_header() {
        let csv = patch_csv(2, &[], "exact");
        assert_eq!(csv, "gamma_0,gamma_1,y_0,y_1,w_0,w_1,piece,precision\n");
    }
}
