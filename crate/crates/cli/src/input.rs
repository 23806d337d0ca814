//! Problem files: parsing with positions, validation with field paths and
//! the canonical form used for digesting.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stabilis::model::assemble_problem;
use stabilis::{CatalogFunction, CatalogKind, Problem64, ProblemSpecInput};

use crate::error::CliError;

/// A matrix given as a list of rows; ragged rows are a parse error.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Rows(pub Vec<Vec<f64>>);

impl<'de> Deserialize<'de> for Rows {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct RowsVisitor;
        impl<'de> Visitor<'de> for RowsVisitor {
            type Value = Rows;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of equally long rows of numbers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Rows, A::Error> {
                let mut rows: Vec<Vec<f64>> = Vec::new();
                while let Some(row) = seq.next_element::<Vec<f64>>()? {
                    if let Some(first) = rows.first() {
                        if first.len() != row.len() {
                            return Err(de::Error::custom(format!(
                                "ragged matrix: row {} has {} entries, row 0 has {}",
                                rows.len(),
                                row.len(),
                                first.len()
                            )));
                        }
                    }
                    rows.push(row);
                }
                Ok(Rows(rows))
            }
        }
        d.deserialize_seq(RowsVisitor)
    }
}

impl Rows {
    fn shape(&self) -> (usize, usize) {
        (self.0.len(), self.0.first().map_or(0, Vec::len))
    }

    fn to_matrix(&self, cols: usize) -> DMatrix<f64> {
        let r = self.0.len();
        DMatrix::from_fn(r, cols, |i, j| self.0[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Shape {
    Dim(usize),
    List(Vec<usize>),
}

impl Shape {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            Shape::Dim(d) => vec![*d],
            Shape::List(v) => v.clone(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Objective {
    #[serde(rename = "Q")]
    pub q: Rows,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerMap {
    #[serde(rename = "A")]
    pub a: Rows,
    pub f0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterFunction {
    pub kind: String,
    pub shape: Shape,
    #[serde(default = "one")]
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub h: Objective,
    #[serde(rename = "F")]
    pub f: InnerMap,
    pub g: OuterFunction,
}

pub fn parse_problem_str(text: &str) -> Result<ProblemFile, CliError> {
    serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        let full = e.to_string();
        let message = full.strip_suffix(&format!(" at line {line} column {column}")).unwrap_or(&full).to_string();
        CliError::Parse { line, column, message }
    })
}

pub fn read_problem_file(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    parse_problem_str(&text)
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { path: path.into(), message: message.into() }
}

/// Checks dimensions field by field, then assembles the core problem.
pub fn validate(file: &ProblemFile) -> Result<Problem64, CliError> {
    let n = file.n;
    let kind = CatalogKind::parse(&file.g.kind).map_err(|e| invalid("g.kind", e.to_string()))?;
    if !(file.g.sigma > 0.0) {
        return Err(invalid("g.sigma", "must be positive"));
    }
    let shape = file.g.shape.to_vec();
    let g = CatalogFunction::new(kind, &shape, file.g.sigma).map_err(|e| invalid("g.shape", e.to_string()))?;
    let m = g.dim();
    let (qr, qc) = file.h.q.shape();
    if qr != n || (n > 0 && qc != n) {
        return Err(invalid("h.Q", format!("is {qr}x{qc}, expected {n}x{n}")));
    }
    if file.h.c.len() != n {
        return Err(invalid("h.c", format!("has length {}, expected {n}", file.h.c.len())));
    }
    let (ar, ac) = file.f.a.shape();
    if ar != m || (m > 0 && ac != n) {
        return Err(invalid("F.A", format!("is {ar}x{ac}, expected {m}x{n} ({} needs m = {m})", kind)));
    }
    if file.f.f0.len() != m {
        return Err(invalid("F.f0", format!("has length {}, expected {m}", file.f.f0.len())));
    }
    let raw = ProblemSpecInput {
        n,
        q: file.h.q.to_matrix(n),
        c: DVector::from_vec(file.h.c.clone()),
        a: file.f.a.to_matrix(n),
        f0: DVector::from_vec(file.f.f0.clone()),
        f_quad: Vec::new(),
        g_kind: file.g.kind.clone(),
        g_shape: shape,
        g_sigma: file.g.sigma,
    };
    assemble_problem(raw).map_err(|e| match e {
        stabilis::Error::AsymmetricQ(_) => invalid("h.Q", e.to_string()),
        other => invalid("", other.to_string()),
    })
}

pub fn parse_problem_file(path: &Path) -> Result<(ProblemFile, Problem64), CliError> {
    let file = read_problem_file(path)?;
    let problem = validate(&file)?;
    Ok((file, problem))
}

/// Sorted keys, shapes as lists, every matrix entry as a float.
pub fn canonical_json(file: &ProblemFile) -> String {
    let mut normalized = file.clone();
    normalized.g.shape = Shape::List(file.g.shape.to_vec());
    let value = serde_json::to_value(&normalized).expect("problem files serialize");
    serde_json::to_string(&sort_keys(value)).expect("values serialize")
}

fn sort_keys(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(map) => {
            let sorted: std::collections::BTreeMap<String, serde_json::Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            serde_json::Value::Object(sorted.into_iter().collect())
        }
        serde_json::Value::Array(items) => serde_json::Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn problem_digest(file: &ProblemFile) -> String {
    hex::encode(Sha256::digest(canonical_json(file).as_bytes()))
}
