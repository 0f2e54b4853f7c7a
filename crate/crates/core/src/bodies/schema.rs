//! JSON form of bodies.
//!
//! ```json
//! {"kind":"ball","n":3,"radius":1.0}
//! {"kind":"ellipsoid","n":3,"matrix":[[2,0,0],[0,1,0],[0,0,1]],"center":[0,0,0]}
//! {"kind":"polytope","n":3,"facets":[{"normal":[1,0,0],"offset":1.0,"area":4.0}, ...]}
//! {"kind":"star","n":3,"family":"qball","q":4.0}
//! {"kind":"star","n":3,"family":"perturbed","eps":0.1,"poly":"legendre2-axis0"}
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::{Ball, Body, Ellipsoid, Facet, Polytope, SphericalPoly, StarBody, StarFamily};
use crate::error::{Error, Result};
use crate::sphere::norm;

/// Normals within this distance of unit length are renormalized on input.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyKind {
    Ball,
    Ellipsoid,
    Polytope,
    Star,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Qball,
    Perturbed,
}

/// `q` is a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QExponent(pub f64);

impl<'de> Deserialize<'de> for QExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) if q >= 1.0 => Ok(QExponent(q)),
            Raw::Num(q) => Err(de::Error::custom(format!("q = {q} must lie in [1, inf]"))),
            Raw::Text(s) if s == "inf" || s == "infinity" => Ok(QExponent(f64::INFINITY)),
            Raw::Text(s) => Err(de::Error::custom(format!(
                "q must be a number or \"inf\", got \"{s}\""
            ))),
        }
    }
}

impl Serialize for QExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

fn positive<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let x = f64::deserialize(d)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(de::Error::custom(format!(
            "expected a positive number, got {x}"
        )))
    }
}

fn positive_opt<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    positive(d).map(Some)
}

fn dimension<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<usize, D::Error> {
    let n = usize::deserialize(d)?;
    if n >= 2 {
        Ok(n)
    } else {
        Err(de::Error::custom(format!(
            "dimension n = {n} must be at least 2"
        )))
    }
}

/// One facet entry; the normal is renormalized when it is within [`RENORMALIZE_TOL`] of unit length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawFacet")]
pub struct FacetSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
    pub area: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFacet {
    normal: Vec<f64>,
    #[serde(deserialize_with = "positive")]
    offset: f64,
    #[serde(deserialize_with = "positive")]
    area: f64,
}

impl TryFrom<RawFacet> for FacetSpec {
    type Error = String;

    fn try_from(raw: RawFacet) -> std::result::Result<Self, String> {
        let len = norm(&raw.normal);
        if !((len - 1.0).abs() <= RENORMALIZE_TOL) {
            return Err(format!(
                "facet normal has length {len}, expected 1 (tolerance {RENORMALIZE_TOL:e})"
            ));
        }
        Ok(FacetSpec {
            normal: raw.normal.iter().map(|x| x / len).collect(),
            offset: raw.offset,
            area: raw.area,
        })
    }
}

/// Flat wire form shared by every body kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub kind: BodyKind,
    #[serde(deserialize_with = "dimension")]
    pub n: usize,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "positive_opt"
    )]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facets: Option<Vec<FacetSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<QExponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<String>,
}

impl BodySpec {
    fn empty(kind: BodyKind, n: usize) -> Self {
        Self {
            kind,
            n,
            radius: None,
            matrix: None,
            center: None,
            facets: None,
            family: None,
            q: None,
            eps: None,
            poly: None,
        }
    }
}

impl From<&Body> for BodySpec {
    fn from(body: &Body) -> Self {
        let n = body.dim();
        match body {
            Body::Ball(b) => BodySpec {
                radius: Some(b.radius),
                ..BodySpec::empty(BodyKind::Ball, n)
            },
            Body::Ellipsoid(e) => BodySpec {
                matrix: Some(
                    e.matrix()
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect(),
                ),
                center: Some(e.center().iter().copied().collect()),
                ..BodySpec::empty(BodyKind::Ellipsoid, n)
            },
            Body::Polytope(p) => BodySpec {
                facets: Some(
                    p.facets()
                        .iter()
                        .map(|f| FacetSpec {
                            normal: f.normal.clone(),
                            offset: f.offset,
                            area: f.area,
                        })
                        .collect(),
                ),
                ..BodySpec::empty(BodyKind::Polytope, n)
            },
            Body::Star(s) => match *s.family() {
                StarFamily::QBall { q } => BodySpec {
                    family: Some(FamilyName::Qball),
                    q: Some(QExponent(q)),
                    ..BodySpec::empty(BodyKind::Star, n)
                },
                StarFamily::Perturbed { eps, poly } => BodySpec {
                    family: Some(FamilyName::Perturbed),
                    eps: Some(eps),
                    poly: Some(poly.to_string()),
                    ..BodySpec::empty(BodyKind::Star, n)
                },
            },
        }
    }
}

/// Position of the first occurrence of `"key"` in the source, 1-based.
fn locate(src: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    for (i, line) in src.lines().enumerate() {
        if let Some(col) = line.find(&needle) {
            return (i + 1, col + 1);
        }
    }
    (1, 1)
}

/// Value errors are reported after the separator and whitespace that follow
/// the value; step back to the value's last character.
fn end_of_value(src: &str, line: usize, column: usize) -> (usize, usize) {
    let mut offset = 0;
    for (i, l) in src.split('\n').enumerate() {
        if i + 1 == line {
            offset += column.saturating_sub(1).min(l.len());
            break;
        }
        offset += l.len() + 1;
    }
    let head = &src.as_bytes()[..offset.min(src.len())];
    let end = head
        .iter()
        .rposition(|b| !(b.is_ascii_whitespace() || *b == b','))
        .map_or(0, |i| i + 1);
    let before = &src[..end];
    let line = before.matches('\n').count() + 1;
    let column = end - before.rfind('\n').map_or(0, |i| i + 1);
    (line, column.max(1))
}

fn schema_error(src: &str, key: &str, message: impl Into<String>) -> Error {
    let (line, column) = locate(src, key);
    Error::Schema {
        path: key.to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn require<T>(src: &str, value: Option<T>, key: &str, kind: &str) -> Result<T> {
    value.ok_or_else(|| {
        let (line, column) = locate(src, "kind");
        Error::Schema {
            path: key.to_string(),
            line,
            column,
            message: format!("field '{key}' is required for kind '{kind}'"),
        }
    })
}

/// Parses and validates a body from JSON text.
pub fn parse_body_str(src: &str) -> Result<Body> {
    let de = &mut serde_json::Deserializer::from_str(src);
    let spec: BodySpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = if inner.classify() == serde_json::error::Category::Data {
            end_of_value(src, inner.line(), inner.column())
        } else {
            (inner.line(), inner.column())
        };
        Error::Schema {
            path,
            line,
            column,
            message: inner.to_string(),
        }
    })?;
    spec_to_body(&spec, src)
}

/// Reads and parses a body file.
pub fn parse_body(path: impl AsRef<Path>) -> Result<Body> {
    let src = std::fs::read_to_string(path.as_ref())?;
    parse_body_str(&src)
}

fn spec_to_body(spec: &BodySpec, src: &str) -> Result<Body> {
    let n = spec.n;
    match spec.kind {
        BodyKind::Ball => {
            let r = require(src, spec.radius, "radius", "ball")?;
            Ok(Ball::new(n, r)?.into())
        }
        BodyKind::Ellipsoid => {
            let rows = require(src, spec.matrix.as_ref(), "matrix", "ellipsoid")?;
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(schema_error(
                    src,
                    "matrix",
                    format!("matrix must be {n}x{n}"),
                ));
            }
            let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let c = match &spec.center {
                Some(c) if c.len() != n => {
                    return Err(schema_error(
                        src,
                        "center",
                        format!("center must have {n} components"),
                    ))
                }
                Some(c) => DVector::from_column_slice(c),
                None => DVector::zeros(n),
            };
            Ellipsoid::new(m, c)
                .map(Body::from)
                .map_err(|e| schema_error(src, "matrix", e.to_string()))
        }
        BodyKind::Polytope => {
            let facets = require(src, spec.facets.as_ref(), "facets", "polytope")?;
            if let Some(i) = facets.iter().position(|f| f.normal.len() != n) {
                return Err(schema_error(
                    src,
                    "facets",
                    format!("facets[{i}].normal must have {n} components"),
                ));
            }
            let facets = facets
                .iter()
                .map(|f| Facet {
                    normal: f.normal.clone(),
                    offset: f.offset,
                    area: f.area,
                })
                .collect();
            match Polytope::new(n, facets) {
                Ok(p) => Ok(p.into()),
                Err(e @ Error::Closure { .. }) => Err(e),
                Err(e) => Err(schema_error(src, "facets", e.to_string())),
            }
        }
        BodyKind::Star => {
            let family = require(src, spec.family, "family", "star")?;
            let star = match family {
                FamilyName::Qball => {
                    let q = require(src, spec.q, "q", "star/qball")?;
                    StarBody::qball(n, q.0).map_err(|e| schema_error(src, "q", e.to_string()))?
                }
                FamilyName::Perturbed => {
                    let eps = require(src, spec.eps, "eps", "star/perturbed")?;
                    let poly = require(src, spec.poly.as_ref(), "poly", "star/perturbed")?;
                    let poly: SphericalPoly = poly
                        .parse()
                        .map_err(|e: Error| schema_error(src, "poly", e.to_string()))?;
                    StarBody::perturbed(n, eps, poly)
                        .map_err(|e| schema_error(src, "eps", e.to_string()))?
                }
            };
            Ok(star.into())
        }
    }
}

/// Serializes a body in the same schema the parser reads.
pub fn body_to_json(body: &Body) -> serde_json::Value {
    serde_json::to_value(BodySpec::from(body)).expect("body specs serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = r#"{
  "kind": "polytope",
  "n": 3,
  "facets": [
    {"normal": [1, 0, 0], "offset": 1.0, "area": 4.0},
    {"normal": [-1, 0, 0], "offset": 1.0, "area": 4.0},
    {"normal": [0, 1, 0], "offset": 1.0, "area": 4.0},
    {"normal": [0, -1, 0], "offset": 1.0, "area": 4.0},
    {"normal": [0, 0, 1], "offset": 1.0, "area": 4.0},
    {"normal": [0, 0, -1], "offset": 1.0, "area": 4.0}
  ]
}"#;

    #[test]
    fn parses_cube() {
        let Body::Polytope(p) = parse_body_str(CUBE).unwrap() else {
            panic!("polytope expected")
        };
        assert_eq!(p.facets().len(), 6);
    }

    #[test]
    fn rejects_open_polytope() {
        let src = CUBE.replacen("\"area\": 4.0}", "\"area\": 5.0}", 1);
        match parse_body_str(&src) {
            Err(Error::Closure { defect_norm, .. }) => assert!((defect_norm - 1.0).abs() < 1e-12),
            other => panic!("expected closure error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_singular_ellipsoid() {
        let src = r#"{"kind":"ellipsoid","n":2,"matrix":[[1,2],[2,4]]}"#;
        assert!(matches!(parse_body_str(src), Err(Error::Schema { .. })));
    }

    #[test]
    fn schema_errors_carry_line_and_path() {
        let src = "{\n  \"kind\": \"ball\",\n  \"n\": 3,\n  \"radius\": -1.0\n}";
        match parse_body_str(src) {
            Err(Error::Schema { path, line, .. }) => {
                assert_eq!(path, "radius");
                assert_eq!(line, 4);
            }
            other => panic!("expected schema error, got {other:?}"),
        }
        let src = CUBE.replacen("[0, 1, 0]", "[0, 1.1, 0]", 1);
        match parse_body_str(&src) {
            Err(Error::Schema { path, line, .. }) => {
                assert_eq!(path, "facets[2]");
                assert_eq!(line, 7);
            }
            other => panic!("expected schema error, got {other:?}"),
        }
        let src = r#"{"kind":"ball","n":3,"radius":1.0,"color":"red"}"#;
        assert!(matches!(parse_body_str(src), Err(Error::Schema { .. })));
        let src = r#"{"kind":"ball","n":3}"#;
        match parse_body_str(src) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "radius"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn renormalizes_nearly_unit_normals() {
        let src = CUBE.replacen("[1, 0, 0]", "[1.0000000001, 0, 0]", 1);
        let Body::Polytope(p) = parse_body_str(&src).unwrap() else {
            panic!("polytope expected")
        };
        assert_eq!(p.facets()[0].normal, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn star_bodies() {
        let b = parse_body_str(r#"{"kind":"star","n":3,"family":"qball","q":4.0}"#).unwrap();
        assert_eq!(b, StarBody::qball(3, 4.0).unwrap().into());
        let b = parse_body_str(r#"{"kind":"star","n":3,"family":"qball","q":"inf"}"#).unwrap();
        assert_eq!(b, StarBody::qball(3, f64::INFINITY).unwrap().into());
        let b = parse_body_str(
            r#"{"kind":"star","n":3,"family":"perturbed","eps":0.1,"poly":"legendre2-axis0"}"#,
        )
        .unwrap();
        assert_eq!(b.kind_name(), "star");
        assert!(parse_body_str(
            r#"{"kind":"star","n":3,"family":"perturbed","eps":0.5,"poly":"legendre2-axis0"}"#
        )
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        for body in [
            Body::from(Ball::unit(3)),
            Body::from(Polytope::cube(3)),
            Body::from(StarBody::qball(3, f64::INFINITY).unwrap()),
            Body::from(Ellipsoid::centered(DMatrix::from_diagonal_element(2, 2, 3.0)).unwrap()),
        ] {
            let text = body_to_json(&body).to_string();
            assert_eq!(parse_body_str(&text).unwrap(), body);
        }
    }
}
