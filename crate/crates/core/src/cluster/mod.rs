//! Partitioning clustering over numeric, categorical and mixed records.
//!
//! Records are projected into a [`ClusterData`] matrix first: numeric
//! attributes are z-scored (range-scaled when the standard deviation is
//! zero) and categories are coded by their sorted position, so code order
//! is lexicographic order.

mod lloyd;
mod medoids;
mod select;

pub use lloyd::{kmeans, kmodes, kprototypes};
pub use medoids::{clara, clarans, pam};
pub use select::{select_algorithm, DataSummary, SelectionPolicy};

use crate::dataset::{AttributeKind, Cell, Dataset};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("attribute {0:?} is not numeric")]
    NonNumericAttribute(String),
    #[error("attribute {0:?} is not categorical")]
    NonCategoricalAttribute(String),
    #[error("k-prototypes needs at least one numeric and one categorical attribute")]
    NotMixedData,
    #[error("k = {k} exceeds the number of records ({n})")]
    KExceedsN { k: usize, n: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("sample size {sample_size} is smaller than k = {k}")]
    SampleTooSmall { sample_size: usize, k: usize },
    #[error("no attributes selected")]
    NoAttributesSelected,
    #[error("records have different layouts")]
    LayoutMismatch,
    #[error("attribute {0:?} has missing values")]
    MissingValues(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("no records to cluster")]
    EmptyData,
    #[error("gamma must be finite and non-negative, got {0}")]
    InvalidGamma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Pam,
    KModes,
    KPrototypes,
    Clara,
    Clarans,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Algorithm::KMeans, Algorithm::Pam, Algorithm::KModes, Algorithm::KPrototypes, Algorithm::Clara, Algorithm::Clarans];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Pam => "pam",
            Algorithm::KModes => "kmodes",
            Algorithm::KPrototypes => "kprototypes",
            Algorithm::Clara => "clara",
            Algorithm::Clarans => "clarans",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measure {
    SqEuclidean,
    Matching,
    Mixed { gamma: f64 },
}

/// One record split into its numeric and categorical parts.
#[derive(Debug, Clone, Copy)]
pub struct Record<'a> {
    pub numeric: &'a [f64],
    pub categorical: &'a [u32],
}

impl<'a> Record<'a> {
    pub fn new(numeric: &'a [f64], categorical: &'a [u32]) -> Self {
        Self { numeric, categorical }
    }
}

fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mismatches(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Squared Euclidean over the numeric part, mismatch count over the
/// categorical part, or their `gamma`-weighted sum.
pub fn dissimilarity(a: Record<'_>, b: Record<'_>, measure: Measure) -> Result<f64, ClusterError> {
    if a.numeric.len() != b.numeric.len() || a.categorical.len() != b.categorical.len() {
        return Err(ClusterError::LayoutMismatch);
    }
    Ok(match measure {
        Measure::SqEuclidean => sq_euclidean(a.numeric, b.numeric),
        Measure::Matching => mismatches(a.categorical, b.categorical) as f64,
        Measure::Mixed { gamma } => sq_euclidean(a.numeric, b.numeric) + gamma * mismatches(a.categorical, b.categorical) as f64,
    })
}

/// Row-major numeric and categorical matrices for the selected attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterData {
    n: usize,
    numeric: Vec<f64>,
    p: usize,
    categorical: Vec<u32>,
    q: usize,
    numeric_names: Vec<String>,
    categorical_names: Vec<String>,
    categories: Vec<Vec<String>>,
    attributes: Vec<String>,
}

impl ClusterData {
    /// Project and standardize. Attributes must have no missing cells.
    pub fn from_dataset(ds: &Dataset, attributes: &[String]) -> Result<Self, ClusterError> {
        if attributes.is_empty() {
            return Err(ClusterError::NoAttributesSelected);
        }
        let n = ds.n();
        let mut numeric_cols: Vec<Vec<f64>> = Vec::new();
        let mut numeric_names = Vec::new();
        let mut cat_cols: Vec<Vec<u32>> = Vec::new();
        let mut categorical_names = Vec::new();
        let mut categories = Vec::new();
        for name in attributes {
            let j = ds.attribute_index(name).ok_or_else(|| ClusterError::UnknownAttribute(name.clone()))?;
            let meta = &ds.attributes()[j];
            match meta.kind {
                AttributeKind::Numeric => {
                    let col = ds
                        .column(j)
                        .map(|c| c.as_number().ok_or_else(|| ClusterError::MissingValues(name.clone())))
                        .collect::<Result<Vec<f64>, _>>()?;
                    numeric_cols.push(standardize(&col));
                    numeric_names.push(name.clone());
                }
                AttributeKind::Categorical => {
                    let col = ds
                        .column(j)
                        .map(|c| match c {
                            Cell::Category(s) => meta
                                .categories
                                .binary_search(s)
                                .map(|i| i as u32)
                                .map_err(|_| ClusterError::UnknownAttribute(name.clone())),
                            _ => Err(ClusterError::MissingValues(name.clone())),
                        })
                        .collect::<Result<Vec<u32>, _>>()?;
                    cat_cols.push(col);
                    categorical_names.push(name.clone());
                    categories.push(meta.categories.clone());
                }
            }
        }
        let p = numeric_cols.len();
        let q = cat_cols.len();
        let numeric = (0..n).flat_map(|i| numeric_cols.iter().map(move |c| c[i])).collect();
        let categorical = (0..n).flat_map(|i| cat_cols.iter().map(move |c| c[i])).collect();
        let attributes = attributes.to_vec();
        Ok(Self { n, numeric, p, categorical, q, numeric_names, categorical_names, categories, attributes })
    }

    /// Numeric rows used as given, without standardization.
    pub fn from_numeric(rows: &[Vec<f64>]) -> Self {
        Self::from_parts(rows, &[])
    }

    /// Categorical rows; labels are coded by sorted order per column.
    pub fn from_categorical(rows: &[Vec<&str>]) -> Self {
        Self::from_parts(&[], rows)
    }

    /// Numeric part used as given, categorical part coded. Either side may
    /// be empty; when both are present they must have equal row counts.
    pub fn from_parts(numeric_rows: &[Vec<f64>], cat_rows: &[Vec<&str>]) -> Self {
        let n = numeric_rows.len().max(cat_rows.len());
        let p = numeric_rows.first().map_or(0, Vec::len);
        let q = cat_rows.first().map_or(0, Vec::len);
        assert!(numeric_rows.is_empty() || numeric_rows.len() == n, "row count mismatch");
        assert!(cat_rows.is_empty() || cat_rows.len() == n, "row count mismatch");
        let mut categories: Vec<Vec<String>> = (0..q)
            .map(|j| {
                let mut c: Vec<String> = cat_rows.iter().map(|r| r[j].to_string()).collect();
                c.sort();
                c.dedup();
                c
            })
            .collect();
        let categorical = cat_rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), q, "ragged categorical rows");
                r.iter().enumerate().map(|(j, v)| categories[j].binary_search(&v.to_string()).unwrap() as u32).collect::<Vec<_>>()
            })
            .collect();
        let numeric = numeric_rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len(), p, "ragged numeric rows");
                r.iter().copied()
            })
            .collect();
        categories.shrink_to_fit();
        let numeric_names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let categorical_names: Vec<String> = (0..q).map(|j| format!("c{j}")).collect();
        let attributes = numeric_names.iter().chain(&categorical_names).cloned().collect();
        Self { n, numeric, p, categorical, q, numeric_names, categorical_names, categories, attributes }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn numeric_dims(&self) -> usize {
        self.p
    }

    pub fn categorical_dims(&self) -> usize {
        self.q
    }

    pub fn numeric_names(&self) -> &[String] {
        &self.numeric_names
    }

    pub fn categorical_names(&self) -> &[String] {
        &self.categorical_names
    }

    /// Attribute names in selection order.
    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn categories(&self) -> &[Vec<String>] {
        &self.categories
    }

    pub fn numeric_row(&self, i: usize) -> &[f64] {
        &self.numeric[i * self.p..(i + 1) * self.p]
    }

    pub fn categorical_row(&self, i: usize) -> &[u32] {
        &self.categorical[i * self.q..(i + 1) * self.q]
    }

    pub fn record(&self, i: usize) -> Record<'_> {
        Record::new(self.numeric_row(i), self.categorical_row(i))
    }

    pub fn is_mixed(&self) -> bool {
        self.p > 0 && self.q > 0
    }

    /// Measure matching the layout; `gamma` weighs the categorical part of mixed data.
    pub fn measure(&self, gamma: f64) -> Measure {
        match (self.p > 0, self.q > 0) {
            (true, true) => Measure::Mixed { gamma },
            (false, true) => Measure::Matching,
            _ => Measure::SqEuclidean,
        }
    }

    /// `0.5 *` mean per-attribute variance of the numeric part.
    pub fn default_gamma(&self) -> f64 {
        if self.p == 0 || self.n == 0 {
            return 0.5;
        }
        let total: f64 = (0..self.p)
            .map(|j| {
                let col: Vec<f64> = (0..self.n).map(|i| self.numeric[i * self.p + j]).collect();
                crate::dataset::mean_std(&col).1.powi(2)
            })
            .sum();
        0.5 * total / self.p as f64
    }

    /// Dissimilarity between two rows.
    #[inline]
    pub fn dist(&self, i: usize, j: usize, measure: Measure) -> f64 {
        let num = || sq_euclidean(self.numeric_row(i), self.numeric_row(j));
        let cat = || mismatches(self.categorical_row(i), self.categorical_row(j)) as f64;
        match measure {
            Measure::SqEuclidean => num(),
            Measure::Matching => cat(),
            Measure::Mixed { gamma } => num() + gamma * cat(),
        }
    }

    /// Rows `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> ClusterData {
        ClusterData {
            n: indices.len(),
            numeric: indices.iter().flat_map(|&i| self.numeric_row(i).iter().copied()).collect(),
            p: self.p,
            categorical: indices.iter().flat_map(|&i| self.categorical_row(i).iter().copied()).collect(),
            q: self.q,
            numeric_names: self.numeric_names.clone(),
            categorical_names: self.categorical_names.clone(),
            categories: self.categories.clone(),
            attributes: self.attributes.clone(),
        }
    }

    pub(crate) fn label(&self, attr: usize, code: u32) -> String {
        self.categories[attr][code as usize].clone()
    }
}

fn standardize(col: &[f64]) -> Vec<f64> {
    let (mean, sd) = crate::dataset::mean_std(col);
    let scale = if sd > 0.0 {
        sd
    } else {
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            max - min
        } else {
            1.0
        }
    };
    col.iter().map(|v| (v - mean) / scale).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSpec {
    pub algorithm: Algorithm,
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Categorical weight for mixed data; `None` resolves to [`ClusterData::default_gamma`].
    pub gamma: Option<f64>,
    pub clara_samples: usize,
    /// `None` resolves to `40 + 2k`, capped at `n`.
    pub clara_sample_size: Option<usize>,
    pub clarans_numlocal: usize,
    /// `None` resolves to `max(250, 1.25% of k(n - k))`.
    pub clarans_maxneighbor: Option<usize>,
}

impl ClusteringSpec {
    pub fn new(algorithm: Algorithm, k: usize, seed: u64) -> Self {
        Self {
            algorithm,
            k,
            seed,
            max_iter: 100,
            gamma: None,
            clara_samples: 5,
            clara_sample_size: None,
            clarans_numlocal: 2,
            clarans_maxneighbor: None,
        }
    }

    pub fn resolved_gamma(&self, data: &ClusterData) -> f64 {
        self.gamma.unwrap_or_else(|| data.default_gamma())
    }

    pub fn resolved_sample_size(&self, n: usize) -> usize {
        self.clara_sample_size.unwrap_or(40 + 2 * self.k).min(n)
    }

    pub fn resolved_maxneighbor(&self, n: usize) -> usize {
        self.clarans_maxneighbor.unwrap_or_else(|| {
            let swaps = (self.k * n.saturating_sub(self.k)) as f64;
            250usize.max((0.0125 * swaps).ceil() as usize)
        })
    }

    fn check(&self, n: usize) -> Result<(), ClusterError> {
        if n == 0 {
            return Err(ClusterError::EmptyData);
        }
        if self.k == 0 {
            return Err(ClusterError::InvalidK);
        }
        if self.k > n {
            return Err(ClusterError::KExceedsN { k: self.k, n });
        }
        if let Some(g) = self.gamma {
            if !g.is_finite() || g < 0.0 {
                return Err(ClusterError::InvalidGamma(g));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representatives {
    /// Means in standardized units.
    Centers { centers: Vec<Vec<f64>> },
    /// Row indices.
    Medoids { rows: Vec<usize> },
    Modes { modes: Vec<Vec<String>> },
    Prototypes { numeric: Vec<Vec<f64>>, categorical: Vec<Vec<String>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub spec: ClusteringSpec,
    pub selected_attributes: Vec<String>,
    pub measure: Measure,
    pub assignments: Vec<usize>,
    pub representatives: Representatives,
    pub objective: f64,
    pub iterations_run: usize,
    /// Objective after each iteration (Lloyd-type algorithms) or accepted move.
    pub trace: Vec<f64>,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.spec.k
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.spec.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, &a)| a == cluster).map(|(i, _)| i).collect()
    }
}

/// Run the algorithm named in `spec`.
pub fn run(data: &ClusterData, spec: &ClusteringSpec) -> Result<ClusterModel, ClusterError> {
    let mut model = match spec.algorithm {
        Algorithm::KMeans => kmeans(data, spec.k, spec.seed, spec.max_iter),
        Algorithm::KModes => kmodes(data, spec.k, spec.seed, spec.max_iter),
        Algorithm::KPrototypes => kprototypes(data, spec.k, spec.gamma, spec.seed, spec.max_iter),
        Algorithm::Pam => medoids::pam_spec(data, spec),
        Algorithm::Clara => clara(data, spec),
        Algorithm::Clarans => clarans(data, spec),
    }?;
    // Carry the caller's tuning knobs, keeping what the algorithm resolved.
    let resolved_gamma = model.spec.gamma;
    model.spec = ClusteringSpec { gamma: resolved_gamma.or(spec.gamma), ..spec.clone() };
    Ok(model)
}
