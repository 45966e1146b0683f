//! Attribute ranking.
//!
//! Each attribute gets a type score from its metadata and a query weight
//! from the objective and the user's history; the two are blended and the
//! top `m` attributes are forwarded to clustering.
//!
//! Storage cost is folded into the per-kind base score (numeric cells are
//! fixed-width). Object similarity is not scored here: it is the
//! dissimilarity used during clustering.

use crate::dataset::{AttributeKind, AttributeMeta, Dataset};
use crate::profile::SessionRecord;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUMERIC_BASE: f64 = 1.0;
pub const CATEGORICAL_BASE: f64 = 0.8;
/// Categorical attributes with `cardinality / n` at or above this are treated as identifiers.
pub const IDENTIFIER_RATIO: f64 = 0.9;
pub const IDENTIFIER_CAP: f64 = 0.1;
const EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum RankingError {
    #[error("selection size {m} must be between 1 and {available}")]
    InvalidSelectionSize { m: usize, available: usize },
    #[error("ranking weights ({0}, {1}) must be non-negative and sum to 1")]
    InvalidWeights(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub type_score: f64,
    pub query: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self { type_score: 0.6, query: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRank {
    pub name: String,
    pub kind: AttributeKind,
    pub type_score: f64,
    pub query_weight: f64,
    pub combined: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttributes {
    pub ranks: Vec<AttributeRank>,
    pub selected: Vec<String>,
}

/// Spread of an attribute on `[0, 1]`, independent of units.
///
/// Numeric: coefficient of variation capped at 1 (range-relative when the
/// mean is zero). Categorical: entropy normalised by `ln(cardinality)`.
pub fn variability(meta: &AttributeMeta) -> f64 {
    let v = match meta.kind {
        AttributeKind::Numeric => {
            let (Some(mean), Some(sd), Some(min), Some(max)) = (meta.mean, meta.stddev, meta.min, meta.max) else {
                return 0.0;
            };
            if sd <= EPS * mean.abs().max(1.0) {
                0.0
            } else if mean.abs() <= EPS {
                sd / ((max - min).abs() + EPS)
            } else {
                sd / mean.abs()
            }
        }
        AttributeKind::Categorical => normalized_entropy(&meta.category_counts),
    };
    v.clamp(0.0, 1.0)
}

pub fn normalized_entropy(counts: &[usize]) -> f64 {
    let k = counts.iter().filter(|&&c| c > 0).count();
    if k <= 1 {
        return 0.0;
    }
    let total: usize = counts.iter().sum();
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    (h / (k as f64).ln()).clamp(0.0, 1.0)
}

/// `base(kind) * (1 - missing_ratio) * variability`, capped for identifier-like categoricals.
pub fn score_attribute(meta: &AttributeMeta, n: usize) -> f64 {
    let base = match meta.kind {
        AttributeKind::Numeric => NUMERIC_BASE,
        AttributeKind::Categorical => CATEGORICAL_BASE,
    };
    let score = base * (1.0 - meta.missing_ratio) * variability(meta);
    if meta.kind == AttributeKind::Categorical && n > 0 && meta.cardinality as f64 / n as f64 >= IDENTIFIER_RATIO {
        score.min(IDENTIFIER_CAP)
    } else {
        score
    }
}

/// Underscores become spaces, then lowercase.
pub fn normalize_name(name: &str) -> String {
    name.replace('_', " ").to_lowercase()
}

/// `0.5 * name_match + 0.5 * usage`.
pub fn query_weight(attr_name: &str, objective_tokens: &[String], history: &[SessionRecord]) -> f64 {
    let normalized = normalize_name(attr_name);
    let name_match = if objective_tokens.iter().any(|t| normalized.contains(t.as_str())) { 1.0 } else { 0.0 };
    let usage = if history.is_empty() {
        0.0
    } else {
        let used = history.iter().filter(|s| s.selected_attributes.iter().any(|a| a == attr_name)).count();
        used as f64 / history.len() as f64
    };
    0.5 * name_match + 0.5 * usage
}

pub fn rank_attributes(
    ds: &Dataset,
    objective_tokens: &[String],
    history: &[SessionRecord],
    m: usize,
    weights: RankWeights,
) -> Result<RankedAttributes, RankingError> {
    let available = ds.attributes().len();
    if m == 0 || m > available {
        return Err(RankingError::InvalidSelectionSize { m, available });
    }
    let RankWeights { type_score: ws, query: wq } = weights;
    if ws < 0.0 || wq < 0.0 || !ws.is_finite() || !wq.is_finite() || (ws + wq - 1.0).abs() > 1e-9 {
        return Err(RankingError::InvalidWeights(ws, wq));
    }
    let mut ranks: Vec<AttributeRank> = ds
        .attributes()
        .iter()
        .map(|meta| {
            let type_score = score_attribute(meta, ds.n());
            let query_weight = query_weight(&meta.name, objective_tokens, history);
            AttributeRank {
                name: meta.name.clone(),
                kind: meta.kind,
                type_score,
                query_weight,
                combined: (ws * type_score + wq * query_weight).clamp(0.0, 1.0),
                rank: 0,
            }
        })
        .collect();
    // Stable sort keeps column order among equal scores.
    ranks.sort_by(|a, b| b.combined.total_cmp(&a.combined));
    for (i, r) in ranks.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    let selected = ranks.iter().take(m).map(|r| r.name.clone()).collect();
    Ok(RankedAttributes { ranks, selected })
}
