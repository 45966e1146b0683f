//! Pairwise attribute association as a node-edge chart.

use super::VizError;
use crate::dataset::{AttributeKind, Cell, Dataset};
use serde::{Deserialize, Serialize};

/// Associations at or below this are treated as noise.
pub const EDGE_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Thickness {
    Thin,
    Medium,
    Thick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeFilter {
    PositiveOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    Pearson,
    CramersV,
    CorrelationRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEdge {
    pub a: String,
    pub b: String,
    pub weight: f64,
    pub association: Association,
    pub thickness: Thickness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkChartSpec {
    pub nodes: Vec<String>,
    pub edges: Vec<LinkEdge>,
    pub filter: EdgeFilter,
    /// Sum of retained weights times the record count.
    pub correlation_value: f64,
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

fn codes(labels: &[&str]) -> (Vec<usize>, usize) {
    let mut cats: Vec<&str> = labels.to_vec();
    cats.sort_unstable();
    cats.dedup();
    (labels.iter().map(|l| cats.binary_search(l).unwrap()).collect(), cats.len())
}

pub fn cramers_v(x: &[&str], y: &[&str]) -> f64 {
    let n = x.len();
    let (cx, r) = codes(x);
    let (cy, c) = codes(y);
    if n == 0 || r < 2 || c < 2 {
        return 0.0;
    }
    let mut table = vec![0usize; r * c];
    let mut rows = vec![0usize; r];
    let mut cols = vec![0usize; c];
    for (&a, &b) in cx.iter().zip(&cy) {
        table[a * c + b] += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    let mut chi2 = 0.0;
    for a in 0..r {
        for b in 0..c {
            let expected = rows[a] as f64 * cols[b] as f64 / n as f64;
            let d = table[a * c + b] as f64 - expected;
            chi2 += d * d / expected;
        }
    }
    (chi2 / (n as f64 * (r.min(c) - 1) as f64)).sqrt().min(1.0)
}

/// Share of the numeric variance explained by the categories, square-rooted.
pub fn correlation_ratio(groups: &[&str], values: &[f64]) -> f64 {
    let (codes, k) = codes(groups);
    let n = values.len() as f64;
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (&g, &v) in codes.iter().zip(values) {
        sums[g] += v;
        counts[g] += 1;
    }
    let total: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let between: f64 = (0..k).map(|g| counts[g] as f64 * (sums[g] / counts[g] as f64 - mean).powi(2)).sum();
    (between / total).sqrt().min(1.0)
}

/// Tercile classes over the retained weights; equal weights share a class.
fn thickness_classes(weights: &[f64]) -> Vec<Thickness> {
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let m = sorted.len();
    if m == 0 {
        return Vec::new();
    }
    let thick_cut = sorted[m.div_ceil(3) - 1];
    let medium_cut = sorted[(2 * m).div_ceil(3) - 1];
    weights
        .iter()
        .map(|&w| {
            if w >= thick_cut {
                Thickness::Thick
            } else if w >= medium_cut {
                Thickness::Medium
            } else {
                Thickness::Thin
            }
        })
        .collect()
}

enum Column<'a> {
    Numeric(Vec<f64>),
    Categorical(Vec<&'a str>),
}

fn column<'a>(ds: &'a Dataset, name: &str) -> Result<Column<'a>, VizError> {
    let j = ds.attribute_index(name).ok_or_else(|| VizError::UnknownAttribute(name.to_string()))?;
    let missing = || VizError::MissingValues(name.to_string());
    Ok(match ds.attributes()[j].kind {
        AttributeKind::Numeric => Column::Numeric(ds.column(j).map(|c| c.as_number().ok_or_else(missing)).collect::<Result<_, _>>()?),
        AttributeKind::Categorical => Column::Categorical(
            ds.column(j)
                .map(|c| match c {
                    Cell::Category(s) => Ok(s.as_str()),
                    _ => Err(missing()),
                })
                .collect::<Result<_, _>>()?,
        ),
    })
}

/// Positive associations between every pair of `attributes`.
pub fn link_chart(ds: &Dataset, attributes: &[String]) -> Result<LinkChartSpec, VizError> {
    if attributes.len() < 2 {
        return Err(VizError::TooFewAttributes(attributes.len()));
    }
    let cols: Vec<Column> = attributes.iter().map(|a| column(ds, a)).collect::<Result<_, _>>()?;
    let mut raw = Vec::new();
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let (weight, association) = match (&cols[i], &cols[j]) {
                (Column::Numeric(x), Column::Numeric(y)) => (pearson(x, y), Association::Pearson),
                (Column::Categorical(x), Column::Categorical(y)) => (cramers_v(x, y), Association::CramersV),
                (Column::Categorical(g), Column::Numeric(v)) | (Column::Numeric(v), Column::Categorical(g)) => {
                    (correlation_ratio(g, v), Association::CorrelationRatio)
                }
            };
            if weight > EDGE_FLOOR {
                raw.push((i, j, weight.min(1.0), association));
            }
        }
    }
    let classes = thickness_classes(&raw.iter().map(|e| e.2).collect::<Vec<_>>());
    let edges: Vec<LinkEdge> = raw
        .iter()
        .zip(classes)
        .map(|(&(i, j, weight, association), thickness)| LinkEdge {
            a: attributes[i].clone(),
            b: attributes[j].clone(),
            weight,
            association,
            thickness,
        })
        .collect();
    let correlation_value = edges.iter().map(|e| e.weight).sum::<f64>() * ds.n() as f64;
    Ok(LinkChartSpec { nodes: attributes.to_vec(), edges, filter: EdgeFilter::PositiveOnly, correlation_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn numeric(cols: &[(&str, Vec<f64>)]) -> Dataset {
        let schema: Vec<(String, AttributeKind)> = cols.iter().map(|(n, _)| (n.to_string(), AttributeKind::Numeric)).collect();
        let rows = (0..cols[0].1.len()).map(|i| cols.iter().map(|(_, v)| Cell::Number(v[i])).collect()).collect();
        Dataset::from_rows(&schema, rows).unwrap()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_correlation_is_one_thick_edge() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let spec = link_chart(&numeric(&[("a", x), ("b", y)]), &names(&["a", "b"])).unwrap();
        assert_eq!(spec.edges.len(), 1);
        assert!((spec.edges[0].weight - 1.0).abs() < 1e-12);
        assert_eq!(spec.edges[0].thickness, Thickness::Thick);
        assert!((spec.correlation_value - 20.0).abs() < 1e-9);
    }

    #[test]
    fn negative_and_independent_pairs_are_dropped() {
        let x: Vec<f64> = (0..2000).map(f64::from).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        // Deterministic pseudo-random sequence unrelated to x.
        let noise: Vec<f64> = (0..2000u64).map(|i| ((i.wrapping_mul(2654435761) >> 7) % 1000) as f64).collect();
        let spec = link_chart(&numeric(&[("x", x), ("neg", neg), ("noise", noise)]), &names(&["x", "neg", "noise"])).unwrap();
        assert!(spec.edges.is_empty(), "{:?}", spec.edges);
        assert_eq!(spec.filter, EdgeFilter::PositiveOnly);
    }

    #[test]
    fn categorical_and_mixed_associations() {
        let a = ["p", "p", "q", "q", "p", "q"];
        assert!((cramers_v(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(cramers_v(&a, &["z"; 6]), 0.0);
        let v = [1.0, 1.0, 5.0, 5.0, 1.0, 5.0];
        assert!((correlation_ratio(&a, &v) - 1.0).abs() < 1e-12);
        assert_eq!(correlation_ratio(&a, &[2.0; 6]), 0.0);
    }

    #[test]
    fn too_few_attributes() {
        let ds = numeric(&[("a", vec![1.0, 2.0])]);
        assert_eq!(link_chart(&ds, &names(&["a"])), Err(VizError::TooFewAttributes(1)));
    }

    proptest! {
        #[test]
        fn thickness_never_inverts(weights in prop::collection::vec(0.06f64..1.0, 1..30)) {
            let classes = thickness_classes(&weights);
            for i in 0..weights.len() {
                for j in 0..weights.len() {
                    if weights[i] > weights[j] {
                        prop_assert!(classes[i] >= classes[j]);
                    }
                }
            }
            prop_assert!(classes.contains(&Thickness::Thick));
        }
    }
}
