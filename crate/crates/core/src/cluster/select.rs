//! Algorithm choice from attribute kinds, data size and history.

use super::{Algorithm, ClusterError};
use crate::dataset::AttributeKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct DataSummary {
    pub n: usize,
    pub kinds: Vec<AttributeKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionPolicy {
    /// Above this many rows, numeric data goes to a sampling k-medoids variant.
    pub size_threshold: usize,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self { size_threshold: 2000 }
    }
}

fn compatible(alg: Algorithm, numeric: bool, categorical: bool) -> bool {
    match alg {
        Algorithm::KMeans => numeric && !categorical,
        Algorithm::KModes => categorical && !numeric,
        Algorithm::KPrototypes => numeric && categorical,
        Algorithm::Pam | Algorithm::Clara | Algorithm::Clarans => true,
    }
}

/// Pick an algorithm. A type-compatible `hint` wins; PAM hints on large
/// data become CLARA.
pub fn select_algorithm(
    summary: &DataSummary,
    hint: Option<Algorithm>,
    policy: &SelectionPolicy,
) -> Result<Algorithm, ClusterError> {
    if summary.kinds.is_empty() {
        return Err(ClusterError::NoAttributesSelected);
    }
    let numeric = summary.kinds.contains(&AttributeKind::Numeric);
    let categorical = summary.kinds.contains(&AttributeKind::Categorical);
    let large = summary.n > policy.size_threshold;
    if let Some(h) = hint.filter(|&h| compatible(h, numeric, categorical)) {
        return Ok(if h == Algorithm::Pam && large { Algorithm::Clara } else { h });
    }
    Ok(match (numeric, categorical) {
        (true, true) => Algorithm::KPrototypes,
        (false, true) => Algorithm::KModes,
        _ if !large => Algorithm::KMeans,
        _ => Algorithm::Clara,
    })
}
