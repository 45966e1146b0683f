//! Typed tabular data: attribute metadata, cells, type inference and
//! missing-value handling.
//!
//! A [`Dataset`] is immutable once built. Every operation that changes
//! rows returns a new dataset with freshly computed [`AttributeMeta`].

mod csv_io;
mod generator;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use generator::{generate_blobs, generate_student_data, SEMESTERS};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {0} has a different number of fields than the header")]
    RaggedRow(usize),
    #[error("input contains no data")]
    EmptyInput,
    #[error("column {0:?} has no non-missing values")]
    AllMissing(String),
    #[error("every row contained a missing value")]
    AllRowsDropped,
    #[error("student data needs at least 10 records, got {0}")]
    InvalidCount(usize),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("cell kind does not match attribute {0:?}")]
    KindMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributeKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMeta {
    pub name: String,
    pub kind: AttributeKind,
    pub cardinality: usize,
    pub missing_ratio: f64,
    /// Numeric only.
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    /// Population standard deviation over non-missing cells.
    pub stddev: Option<f64>,
    /// Categorical only, sorted lexicographically.
    pub categories: Vec<String>,
    /// Occurrences of each entry of `categories`.
    pub category_counts: Vec<usize>,
}

impl AttributeMeta {
    /// Statistics for one column whose kind is already decided.
    pub fn from_cells(name: &str, kind: AttributeKind, cells: &[&Cell]) -> Result<Self, IngestError> {
        let total = cells.len();
        if total == 0 {
            return Err(IngestError::EmptyInput);
        }
        let missing = cells.iter().filter(|c| c.is_missing()).count();
        let missing_ratio = missing as f64 / total as f64;
        match kind {
            AttributeKind::Numeric => {
                let mut values = Vec::with_capacity(total - missing);
                for cell in cells {
                    match cell {
                        Cell::Number(v) => values.push(*v),
                        Cell::Missing => {}
                        Cell::Category(_) => return Err(IngestError::KindMismatch(name.to_string())),
                    }
                }
                if values.is_empty() {
                    return Err(IngestError::AllMissing(name.to_string()));
                }
                let (mean, stddev) = mean_std(&values);
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut distinct: Vec<f64> = values.clone();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                Ok(Self {
                    name: name.to_string(),
                    kind,
                    cardinality: distinct.len(),
                    missing_ratio,
                    min: Some(min),
                    max: Some(max),
                    // Summation error can push the mean a hair outside [min, max].
                    mean: Some(mean.clamp(min, max)),
                    stddev: Some(stddev),
                    categories: Vec::new(),
                    category_counts: Vec::new(),
                })
            }
            AttributeKind::Categorical => {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                for cell in cells {
                    match cell {
                        Cell::Category(s) => *counts.entry(s.as_str()).or_default() += 1,
                        Cell::Missing => {}
                        Cell::Number(_) => return Err(IngestError::KindMismatch(name.to_string())),
                    }
                }
                if counts.is_empty() {
                    return Err(IngestError::AllMissing(name.to_string()));
                }
                let categories: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
                let category_counts: Vec<usize> = counts.values().copied().collect();
                Ok(Self {
                    name: name.to_string(),
                    kind,
                    cardinality: categories.len(),
                    missing_ratio,
                    min: None,
                    max: None,
                    mean: None,
                    stddev: None,
                    categories,
                    category_counts,
                })
            }
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == AttributeKind::Numeric
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Category(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Cell::Category(s) => Some(s),
            _ => None,
        }
    }
}

/// Missing markers: empty, `NA`, `NULL` (case-insensitive, surrounding whitespace ignored).
pub fn is_missing_marker(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("null")
}

fn parse_real(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// A named column of raw text cells, as read from a file.
#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    pub cells: Vec<String>,
}

/// Decide the kind of every column and compute its statistics.
///
/// A column is numeric iff at least 95% of its non-missing cells parse as
/// finite reals. In a numeric column the cells that fail to parse are
/// treated as missing.
pub fn infer_types(columns: &[RawColumn]) -> Result<Vec<AttributeMeta>, IngestError> {
    Ok(convert_columns(columns)?.0)
}

pub(crate) fn infer_kind(cells: &[String]) -> AttributeKind {
    let mut present = 0usize;
    let mut parsed = 0usize;
    for raw in cells {
        if is_missing_marker(raw) {
            continue;
        }
        present += 1;
        if parse_real(raw).is_some() {
            parsed += 1;
        }
    }
    // parsed / present >= 0.95, kept in integers.
    if present > 0 && parsed * 100 >= present * 95 {
        AttributeKind::Numeric
    } else {
        AttributeKind::Categorical
    }
}

/// Infer kinds and convert raw text into typed column-major cells.
pub(crate) fn convert_columns(columns: &[RawColumn]) -> Result<(Vec<AttributeMeta>, Vec<Vec<Cell>>), IngestError> {
    let len = columns.first().ok_or(IngestError::EmptyInput)?.cells.len();
    if len == 0 || columns.iter().any(|c| c.cells.len() != len) {
        return Err(IngestError::EmptyInput);
    }
    let mut metas = Vec::with_capacity(columns.len());
    let mut typed = Vec::with_capacity(columns.len());
    for column in columns {
        let kind = infer_kind(&column.cells);
        let cells: Vec<Cell> = column
            .cells
            .iter()
            .map(|raw| {
                if is_missing_marker(raw) {
                    return Cell::Missing;
                }
                match kind {
                    AttributeKind::Numeric => parse_real(raw).map_or(Cell::Missing, Cell::Number),
                    AttributeKind::Categorical => Cell::Category(raw.trim().to_string()),
                }
            })
            .collect();
        let refs: Vec<&Cell> = cells.iter().collect();
        metas.push(AttributeMeta::from_cells(&column.name, kind, &refs)?);
        typed.push(cells);
    }
    Ok((metas, typed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissingPolicy {
    DropRow,
    ImputeMeanMode,
}

/// Row-major typed table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    attributes: Vec<AttributeMeta>,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    /// Build from attribute kinds and rows; statistics are recomputed.
    pub fn from_rows(schema: &[(String, AttributeKind)], rows: Vec<Vec<Cell>>) -> Result<Self, IngestError> {
        if rows.is_empty() || schema.is_empty() {
            return Err(IngestError::EmptyInput);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(IngestError::RaggedRow(i + 1));
            }
        }
        let attributes = schema
            .iter()
            .enumerate()
            .map(|(j, (name, kind))| {
                let column: Vec<&Cell> = rows.iter().map(|r| &r[j]).collect();
                AttributeMeta::from_cells(name, *kind, &column)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { attributes, rows })
    }

    pub(crate) fn from_columns(metas: Vec<AttributeMeta>, columns: Vec<Vec<Cell>>) -> Self {
        let n = columns.first().map_or(0, Vec::len);
        let mut iters: Vec<_> = columns.into_iter().map(Vec::into_iter).collect();
        let rows = (0..n)
            .map(|_| iters.iter_mut().map(|it| it.next().expect("rectangular columns")).collect())
            .collect();
        Self { attributes: metas, rows }
    }

    pub fn attributes(&self) -> &[AttributeMeta] {
        &self.attributes
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeMeta> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[index])
    }

    /// Numeric values of one column (missing cells yield `None`).
    pub fn numeric_column(&self, name: &str) -> Result<Vec<Option<f64>>, IngestError> {
        let j = self.attribute_index(name).ok_or_else(|| IngestError::UnknownAttribute(name.to_string()))?;
        if !self.attributes[j].is_numeric() {
            return Err(IngestError::KindMismatch(name.to_string()));
        }
        Ok(self.column(j).map(Cell::as_number).collect())
    }

    fn schema(&self) -> Vec<(String, AttributeKind)> {
        self.attributes.iter().map(|a| (a.name.clone(), a.kind)).collect()
    }

    /// Dataset restricted to the named attributes, in the given order.
    pub fn project(&self, names: &[String]) -> Result<Dataset, IngestError> {
        let idx = names
            .iter()
            .map(|n| self.attribute_index(n).ok_or_else(|| IngestError::UnknownAttribute(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset {
            attributes: idx.iter().map(|&j| self.attributes[j].clone()).collect(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&j| r[j].clone()).collect()).collect(),
        })
    }

    /// Remove or fill missing cells. The result has `missing_ratio == 0` everywhere.
    pub fn handle_missing(&self, policy: MissingPolicy) -> Result<Dataset, IngestError> {
        if self.attributes.iter().all(|a| a.missing_ratio == 0.0) {
            return Ok(self.clone());
        }
        match policy {
            MissingPolicy::DropRow => {
                let rows: Vec<Vec<Cell>> =
                    self.rows.iter().filter(|r| !r.iter().any(Cell::is_missing)).cloned().collect();
                if rows.is_empty() {
                    return Err(IngestError::AllRowsDropped);
                }
                Dataset::from_rows(&self.schema(), rows)
            }
            MissingPolicy::ImputeMeanMode => {
                let fill: Vec<Cell> = self
                    .attributes
                    .iter()
                    .enumerate()
                    .map(|(j, meta)| match meta.kind {
                        AttributeKind::Numeric => Cell::Number(meta.mean.expect("numeric mean")),
                        AttributeKind::Categorical => Cell::Category(mode_of(self.column(j))),
                    })
                    .collect();
                let rows = self
                    .rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .zip(&fill)
                            .map(|(c, f)| if c.is_missing() { f.clone() } else { c.clone() })
                            .collect()
                    })
                    .collect();
                Dataset::from_rows(&self.schema(), rows)
            }
        }
    }
}

/// Most frequent category; ties go to the lexicographically smallest.
fn mode_of<'a>(cells: impl Iterator<Item = &'a Cell>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for c in cells {
        if let Cell::Category(s) = c {
            *counts.entry(s.as_str()).or_default() += 1;
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (cat, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((cat, count));
        }
    }
    best.map(|(s, _)| s.to_string()).unwrap_or_default()
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
