//! Chart selection and declarative plot specs for clustering results.

mod link;
mod svg;

pub use link::{
    correlation_ratio, cramers_v, link_chart, pearson, Association, EdgeFilter, LinkChartSpec, LinkEdge, Thickness,
    EDGE_FLOOR,
};
pub use svg::{render_svg, to_svg};

use crate::cluster::ClusterModel;
use crate::dataset::{AttributeKind, Cell, Dataset};
use crate::detection::{QualityReport, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Scatter charts above this many points are subsampled.
pub const MAX_POINTS: usize = 5000;
const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("no attributes to visualize")]
    EmptySelection,
    #[error("link chart needs at least two attributes, got {0}")]
    TooFewAttributes(usize),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {0:?} has missing values")]
    MissingValues(String),
    #[error("{chart:?} cannot show {attributes} attribute(s)")]
    ChartMismatch { chart: ChartKind, attributes: usize },
    #[error("model has {model} assignments for {n} records")]
    LengthMismatch { model: usize, n: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl PartialEq for VizError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimensionality {
    D1,
    D2,
    D3,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    Histogram,
    Bar,
    Scatter2D,
    GroupedBar,
    Scatter3D,
    LinkChart,
}

pub fn classify_dimensionality(selected: &[String]) -> Result<Dimensionality, VizError> {
    Ok(match selected.len() {
        0 => return Err(VizError::EmptySelection),
        1 => Dimensionality::D1,
        2 => Dimensionality::D2,
        3 => Dimensionality::D3,
        _ => Dimensionality::Multi,
    })
}

pub fn choose_chart(dim: Dimensionality, kinds: &[AttributeKind]) -> ChartKind {
    let numeric = kinds.iter().filter(|&&k| k == AttributeKind::Numeric).count();
    match dim {
        Dimensionality::D1 if numeric == 1 => ChartKind::Histogram,
        Dimensionality::D1 => ChartKind::Bar,
        Dimensionality::D2 if numeric == 2 => ChartKind::Scatter2D,
        Dimensionality::D2 => ChartKind::GroupedBar,
        Dimensionality::D3 if numeric >= 2 => ChartKind::Scatter3D,
        Dimensionality::D3 | Dimensionality::Multi => ChartKind::LinkChart,
    }
}

/// Attribute subsets charted for a selection: the first attribute alone,
/// the first paired with each other one, then the whole selection when it
/// has three or more attributes.
pub fn chart_plan(selected: &[String]) -> Vec<Vec<String>> {
    let mut plan = Vec::new();
    if let Some(first) = selected.first() {
        plan.push(vec![first.clone()]);
        for other in &selected[1..] {
            plan.push(vec![first.clone(), other.clone()]);
        }
        if selected.len() >= 3 {
            plan.push(selected.to_vec());
        }
    }
    plan
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle,
    Square,
    Triangle,
    Diamond,
    Cross,
}

const SHAPES: [Shape; 5] = [Shape::Circle, Shape::Square, Shape::Triangle, Shape::Diamond, Shape::Cross];

/// Marker for one cluster: shapes cycle, later cycles draw hollow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Glyph {
    pub id: String,
    pub shape: Shape,
    pub cycle: usize,
}

impl Glyph {
    pub fn for_cluster(c: usize) -> Self {
        let shape = SHAPES[c % SHAPES.len()];
        let cycle = c / SHAPES.len();
        let name = serde_json::to_value(shape).unwrap().as_str().unwrap().to_string();
        let id = if cycle == 0 { name } else { format!("{name}-{cycle}") };
        Self { id, shape, cycle }
    }

    pub fn hollow(&self) -> bool {
        self.cycle % 2 == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub kind: AttributeKind,
    pub ticks: Vec<String>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub category: String,
    pub value: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum SeriesData {
    Points(Vec<Point>),
    Bars(Vec<Bar>),
}

impl SeriesData {
    pub fn len(&self) -> usize {
        match self {
            SeriesData::Points(p) => p.len(),
            SeriesData::Bars(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub cluster_id: usize,
    pub glyph: Glyph,
    /// Drawn in grey: the cluster was judged bad.
    pub greyed: bool,
    pub data: SeriesData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub dimensionality: Dimensionality,
    pub chart: ChartKind,
    pub title: String,
    pub attributes: Vec<String>,
    pub axes: Vec<Axis>,
    pub series: Vec<Series>,
    /// All-record aggregate per category, for bar charts.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub overall: Option<Vec<Bar>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub link: Option<LinkChartSpec>,
    pub annotations: Vec<String>,
}

impl PlotSpec {
    /// Mean of the overall bar for `category`.
    pub fn overall_value(&self, category: &str) -> Option<f64> {
        self.overall.as_ref()?.iter().find(|b| b.category == category).map(|b| b.value)
    }
}

fn format_value(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == r.trunc() {
        format!("{r:.0}")
    } else {
        format!("{r}")
    }
}

enum Col<'a> {
    Num(Vec<f64>),
    Cat(Vec<&'a str>, Vec<String>),
}

fn col<'a>(ds: &'a Dataset, name: &str) -> Result<Col<'a>, VizError> {
    let j = ds.attribute_index(name).ok_or_else(|| VizError::UnknownAttribute(name.to_string()))?;
    let meta = &ds.attributes()[j];
    let missing = || VizError::MissingValues(name.to_string());
    Ok(match meta.kind {
        AttributeKind::Numeric => Col::Num(ds.column(j).map(|c| c.as_number().ok_or_else(missing)).collect::<Result<_, _>>()?),
        AttributeKind::Categorical => Col::Cat(
            ds.column(j)
                .map(|c| match c {
                    Cell::Category(s) => Ok(s.as_str()),
                    _ => Err(missing()),
                })
                .collect::<Result<_, _>>()?,
            meta.categories.clone(),
        ),
    })
}

fn numeric_axis(name: &str, v: &[f64]) -> Axis {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (min, max) = if v.is_empty() { (0.0, 1.0) } else { (min, max) };
    let ticks = (0..=4).map(|t| format_value(min + (max - min) * t as f64 / 4.0)).collect();
    Axis { name: name.to_string(), kind: AttributeKind::Numeric, ticks, min: Some(min), max: Some(max) }
}

fn category_axis(name: &str, cats: &[String]) -> Axis {
    Axis { name: name.to_string(), kind: AttributeKind::Categorical, ticks: cats.to_vec(), min: None, max: None }
}

/// Per category: value mean and count over `rows`; `None` values count rows.
fn category_bars(rows: &[usize], groups: &[&str], cats: &[String], values: Option<&[f64]>) -> Vec<Bar> {
    let mut sums = vec![0.0; cats.len()];
    let mut counts = vec![0usize; cats.len()];
    for &i in rows {
        let g = cats.binary_search_by(|c| c.as_str().cmp(groups[i])).expect("category in metadata");
        sums[g] += values.map_or(1.0, |v| v[i]);
        counts[g] += 1;
    }
    cats.iter()
        .enumerate()
        .filter(|&(g, _)| counts[g] > 0)
        .map(|(g, c)| Bar {
            category: c.clone(),
            value: if values.is_some() { sums[g] / counts[g] as f64 } else { counts[g] as f64 },
            count: counts[g],
        })
        .collect()
}

fn histogram_edges(v: &[f64]) -> (f64, f64, usize) {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return (min, 1.0, 1);
    }
    (min, (max - min) / HISTOGRAM_BINS as f64, HISTOGRAM_BINS)
}

fn bin_labels(lo: f64, width: f64, bins: usize) -> Vec<String> {
    (0..bins).map(|b| format!("{}-{}", format_value(lo + width * b as f64), format_value(lo + width * (b + 1) as f64))).collect()
}

fn histogram_bars(rows: &[usize], v: &[f64], (lo, width, bins): (f64, f64, usize), labels: &[String]) -> Vec<Bar> {
    let mut counts = vec![0usize; bins];
    for &i in rows {
        let b = if bins == 1 { 0 } else { (((v[i] - lo) / width) as usize).min(bins - 1) };
        counts[b] += 1;
    }
    labels.iter().zip(counts).map(|(l, c)| Bar { category: l.clone(), value: c as f64, count: c }).collect()
}

/// One series per cluster in cluster order; bad clusters are greyed.
pub fn build_plot_spec(
    ds: &Dataset,
    attributes: &[String],
    model: &ClusterModel,
    quality: &QualityReport,
    chart: ChartKind,
    seed: u64,
) -> Result<PlotSpec, VizError> {
    let dimensionality = classify_dimensionality(attributes)?;
    if model.assignments.len() != ds.n() {
        return Err(VizError::LengthMismatch { model: model.assignments.len(), n: ds.n() });
    }
    let cols: Vec<Col> = attributes.iter().map(|a| col(ds, a)).collect::<Result<_, _>>()?;
    let mismatch = || VizError::ChartMismatch { chart, attributes: attributes.len() };
    let k = model.k();
    let members: Vec<Vec<usize>> = (0..k).map(|c| model.members(c)).collect();
    let verdict = |c: usize| quality.per_cluster.get(c).map_or(Verdict::Bad, |q| q.verdict);
    let mut annotations = Vec::new();
    let mut overall = None;
    let mut link = None;

    let mut series_data: Vec<SeriesData> = Vec::new();
    let axes = match (chart, cols.as_slice()) {
        (ChartKind::Histogram, [Col::Num(v)]) => {
            let edges = histogram_edges(v);
            let labels = bin_labels(edges.0, edges.1, edges.2);
            series_data = members.iter().map(|m| SeriesData::Bars(histogram_bars(m, v, edges, &labels))).collect();
            let all: Vec<usize> = (0..ds.n()).collect();
            overall = Some(histogram_bars(&all, v, edges, &labels));
            vec![Axis { ticks: labels, ..numeric_axis(&attributes[0], v) }]
        }
        (ChartKind::Bar, [Col::Cat(g, cats)]) => {
            series_data = members.iter().map(|m| SeriesData::Bars(category_bars(m, g, cats, None))).collect();
            let all: Vec<usize> = (0..ds.n()).collect();
            overall = Some(category_bars(&all, g, cats, None));
            vec![category_axis(&attributes[0], cats)]
        }
        (ChartKind::Scatter2D, [Col::Num(x), Col::Num(y)]) => {
            series_data =
                members.iter().map(|m| SeriesData::Points(m.iter().map(|&i| Point { x: x[i], y: y[i], z: None }).collect())).collect();
            vec![numeric_axis(&attributes[0], x), numeric_axis(&attributes[1], y)]
        }
        (ChartKind::GroupedBar, [a, b]) => {
            let (gi, g, cats, values, vi) = match (a, b) {
                (Col::Cat(g, cats), Col::Num(v)) => (0, g, cats, Some(v.as_slice()), 1),
                (Col::Num(v), Col::Cat(g, cats)) => (1, g, cats, Some(v.as_slice()), 0),
                (Col::Cat(g, cats), Col::Cat(..)) => (0, g, cats, None, 1),
                _ => return Err(mismatch()),
            };
            series_data = members.iter().map(|m| SeriesData::Bars(category_bars(m, g, cats, values))).collect();
            let all: Vec<usize> = (0..ds.n()).collect();
            overall = Some(category_bars(&all, g, cats, values));
            let y = match values {
                Some(v) => numeric_axis(&attributes[vi], v),
                None => {
                    annotations.push("bar height: record count".to_string());
                    Axis { name: "count".into(), kind: AttributeKind::Numeric, ticks: vec![], min: None, max: None }
                }
            };
            vec![category_axis(&attributes[gi], cats), y]
        }
        (ChartKind::Scatter3D, [_, _, _]) => {
            let coords: Vec<(Vec<f64>, Axis)> = cols
                .iter()
                .zip(attributes)
                .map(|(c, name)| match c {
                    Col::Num(v) => (v.clone(), numeric_axis(name, v)),
                    Col::Cat(g, cats) => {
                        let codes = g.iter().map(|s| cats.binary_search_by(|c| c.as_str().cmp(s)).unwrap() as f64).collect();
                        (codes, category_axis(name, cats))
                    }
                })
                .collect();
            series_data = members
                .iter()
                .map(|m| {
                    SeriesData::Points(
                        m.iter().map(|&i| Point { x: coords[0].0[i], y: coords[1].0[i], z: Some(coords[2].0[i]) }).collect(),
                    )
                })
                .collect();
            annotations.push("orthographic view at azimuth 45, elevation 30; marker size encodes depth".to_string());
            coords.into_iter().map(|(_, a)| a).collect()
        }
        (ChartKind::LinkChart, _) => {
            let spec = link_chart(ds, attributes)?;
            annotations.push(format!("Correlation value: {:.3e} (only positive links)", spec.correlation_value));
            link = Some(spec);
            Vec::new()
        }
        _ => return Err(mismatch()),
    };

    let total_points: usize =
        series_data.iter().filter(|s| matches!(s, SeriesData::Points(_))).map(SeriesData::len).sum();
    if total_points > MAX_POINTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = vec![false; total_points];
        for i in rand::seq::index::sample(&mut rng, total_points, MAX_POINTS) {
            keep[i] = true;
        }
        let mut offset = 0;
        for s in &mut series_data {
            if let SeriesData::Points(points) = s {
                let base = offset;
                offset += points.len();
                let mut idx = base;
                points.retain(|_| {
                    idx += 1;
                    keep[idx - 1]
                });
            }
        }
        annotations.push(format!("showing {MAX_POINTS} of {total_points} points (seeded sample)"));
    }

    let series: Vec<Series> = series_data
        .into_iter()
        .enumerate()
        .map(|(c, data)| Series {
            label: format!("cluster {c} ({} records)", members[c].len()),
            cluster_id: c,
            glyph: Glyph::for_cluster(c),
            greyed: verdict(c) == Verdict::Bad,
            data,
        })
        .collect();
    for (c, q) in quality.per_cluster.iter().enumerate() {
        if q.verdict == Verdict::Bad {
            annotations.push(format!("cluster {c}: bad (silhouette {:.2}, size {})", q.silhouette, q.size));
        }
    }
    if quality.good_count == 0 {
        annotations.push("no good clusters".to_string());
    }
    Ok(PlotSpec {
        dimensionality,
        chart,
        title: format!("{:?}: {}", chart, attributes.join(" x ")),
        attributes: attributes.to_vec(),
        axes,
        series,
        overall,
        link,
        annotations,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cluster::{kprototypes, pam, ClusterData};
    use crate::dataset::{generate_student_data, SEMESTERS};
    use crate::detection::{detect_good_clusters, DetectionThresholds};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dimensionality_examples() {
        assert_eq!(classify_dimensionality(&names(&["SEMESTER"])).unwrap(), Dimensionality::D1);
        assert_eq!(classify_dimensionality(&names(&["SEMESTER", "PASS_PERCENTAGE"])).unwrap(), Dimensionality::D2);
        assert_eq!(
            classify_dimensionality(&names(&["SEMESTER", "PASS_PERCENTAGE", "ASSIG_PARAMETER"])).unwrap(),
            Dimensionality::D3
        );
        assert_eq!(classify_dimensionality(&names(&["a", "b", "c", "d"])).unwrap(), Dimensionality::Multi);
        assert_eq!(classify_dimensionality(&[]), Err(VizError::EmptySelection));
    }

    #[test]
    fn chart_table() {
        use AttributeKind::{Categorical as C, Numeric as N};
        use Dimensionality::*;
        assert_eq!(choose_chart(D1, &[N]), ChartKind::Histogram);
        assert_eq!(choose_chart(D1, &[C]), ChartKind::Bar);
        assert_eq!(choose_chart(D2, &[N, N]), ChartKind::Scatter2D);
        assert_eq!(choose_chart(D2, &[C, N]), ChartKind::GroupedBar);
        assert_eq!(choose_chart(D2, &[C, C]), ChartKind::GroupedBar);
        assert_eq!(choose_chart(D3, &[C, N, N]), ChartKind::Scatter3D);
        assert_eq!(choose_chart(D3, &[C, C, N]), ChartKind::LinkChart);
        assert_eq!(choose_chart(Multi, &[N, N, N, N]), ChartKind::LinkChart);
    }

    #[test]
    fn plan_covers_prefix_pairs_and_whole() {
        let plan = chart_plan(&names(&["a", "b", "c"]));
        assert_eq!(plan, vec![names(&["a"]), names(&["a", "b"]), names(&["a", "c"]), names(&["a", "b", "c"])]);
        assert_eq!(chart_plan(&names(&["a"])), vec![names(&["a"])]);
    }

    #[test]
    fn glyph_ids_are_distinct() {
        let ids: Vec<String> = (0..12).map(|c| Glyph::for_cluster(c).id).collect();
        let mut unique = ids.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), 12);
        assert_eq!(ids[0], "circle");
        assert!(Glyph::for_cluster(6).hollow());
    }

    pub(crate) fn student_fixture() -> (Dataset, ClusterModel, QualityReport) {
        let ds = generate_student_data(300, 1).unwrap();
        let attrs = names(&["SEMESTER", "PASS_PERCENTAGE"]);
        let data = ClusterData::from_dataset(&ds, &attrs).unwrap();
        let model = kprototypes(&data, 3, None, 0, 100).unwrap();
        let quality = detect_good_clusters(&model, &data, &DetectionThresholds::default()).unwrap();
        (ds, model, quality)
    }

    #[test]
    fn grouped_bar_shows_summer_lowest() {
        let (ds, model, quality) = student_fixture();
        let spec = build_plot_spec(&ds, &names(&["SEMESTER", "PASS_PERCENTAGE"]), &model, &quality, ChartKind::GroupedBar, 0)
            .unwrap();
        assert_eq!(spec.axes.len(), 2);
        assert_eq!(spec.series.len(), 3);
        let [spring, fall, summer] = SEMESTERS.map(|s| spec.overall_value(s).unwrap());
        assert!(summer < spring && summer < fall);
        let bad = quality.per_cluster.iter().filter(|q| q.verdict == Verdict::Bad).count();
        assert_eq!(spec.series.iter().filter(|s| s.greyed).count(), bad);
    }

    #[test]
    fn every_chart_kind_builds() {
        let (ds, model, quality) = student_fixture();
        let cases = [
            (vec!["PASS_PERCENTAGE"], ChartKind::Histogram, 1),
            (vec!["SEMESTER"], ChartKind::Bar, 1),
            (vec!["PASS_PERCENTAGE", "ASSIG_PARAMETER"], ChartKind::Scatter2D, 2),
            (vec!["SEMESTER", "PASS_PERCENTAGE", "ASSIG_PARAMETER"], ChartKind::Scatter3D, 3),
            (vec!["SEMESTER", "PASS_PERCENTAGE", "ASSIG_PARAMETER", "LAB_MARK"], ChartKind::LinkChart, 0),
        ];
        for (attrs, chart, axes) in cases {
            let spec = build_plot_spec(&ds, &names(&attrs), &model, &quality, chart, 0).unwrap();
            assert_eq!(spec.axes.len(), axes, "{chart:?}");
            for s in &spec.series {
                assert!(s.data.len() <= ds.n());
            }
        }
        let err = build_plot_spec(&ds, &names(&["SEMESTER"]), &model, &quality, ChartKind::Scatter2D, 0).unwrap_err();
        assert!(matches!(err, VizError::ChartMismatch { .. }));
    }

    #[test]
    fn histogram_counts_sum_to_cluster_size() {
        let (ds, model, quality) = student_fixture();
        let spec = build_plot_spec(&ds, &names(&["PASS_PERCENTAGE"]), &model, &quality, ChartKind::Histogram, 0).unwrap();
        for (c, s) in spec.series.iter().enumerate() {
            let SeriesData::Bars(bars) = &s.data else { panic!() };
            assert_eq!(bars.iter().map(|b| b.count).sum::<usize>(), model.members(c).len());
        }
    }

    #[test]
    fn large_scatter_is_downsampled() {
        let pts: Vec<Vec<Cell>> = (0..6000).map(|i| vec![Cell::Number(i as f64), Cell::Number((i % 7) as f64)]).collect();
        let schema = vec![("a".to_string(), AttributeKind::Numeric), ("b".to_string(), AttributeKind::Numeric)];
        let ds = Dataset::from_rows(&schema, pts).unwrap();
        let data = ClusterData::from_dataset(&ds, &names(&["a", "b"])).unwrap().subset(&(0..6000).collect::<Vec<_>>());
        let model = ClusterModel { assignments: (0..6000).map(|i| i % 2).collect(), ..pam(&data.subset(&[0, 1]), 2, 0).unwrap() };
        let quality = crate::detection::QualityReport {
            per_cluster: vec![],
            overall_silhouette: 0.0,
            good_count: 0,
            min_size: 3,
            k_nn: 3,
            sampled_rows: None,
        };
        let spec = build_plot_spec(&ds, &names(&["a", "b"]), &model, &quality, ChartKind::Scatter2D, 3).unwrap();
        let total: usize = spec.series.iter().map(|s| s.data.len()).sum();
        assert_eq!(total, MAX_POINTS);
        assert!(spec.annotations.iter().any(|a| a.contains("no good clusters")));
    }
}
