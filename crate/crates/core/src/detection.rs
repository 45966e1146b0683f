//! Cluster quality: path length on a mutual-kNN graph, silhouette and
//! compactness, combined into a good/bad verdict per cluster.

use crate::cluster::{ClusterData, ClusterModel, Measure};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("k_nn = {k_nn} must satisfy 1 <= k_nn < n = {n}")]
    InvalidKnn { k_nn: usize, n: usize },
    #[error("path length needs at least two members, got {0}")]
    TooFewMembers(usize),
    #[error("silhouette is undefined with fewer than two non-empty clusters")]
    SingleCluster,
    #[error("{assignments} assignments for {n} records")]
    LengthMismatch { assignments: usize, n: usize },
}

/// Undirected graph of mutual k-nearest neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub n: usize,
    /// Sorted neighbor lists.
    pub adjacency: Vec<Vec<usize>>,
    pub k_nn: usize,
    pub measure: Measure,
}

impl NeighborGraph {
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Hop counts from `source`; `u32::MAX` marks unreachable nodes.
    fn bfs(&self, source: usize, dist: &mut [u32], queue: &mut VecDeque<usize>) {
        dist.fill(u32::MAX);
        dist[source] = 0;
        queue.clear();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
}

/// `max(3, ceil(log2 n))`, kept below `n`.
pub fn default_k_nn(n: usize) -> usize {
    let log = (n.max(1) as f64).log2().ceil() as usize;
    log.max(3).min(n.saturating_sub(1)).max(1)
}

pub fn build_knn_graph(data: &ClusterData, measure: Measure, k_nn: usize) -> Result<NeighborGraph, DetectionError> {
    let n = data.n();
    if n < 2 || k_nn == 0 || k_nn >= n {
        return Err(DetectionError::InvalidKnn { k_nn, n });
    }
    let knn: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (data.dist(i, j, measure), j)).collect();
            others.select_nth_unstable_by(k_nn - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut near: Vec<usize> = others[..k_nn].iter().map(|&(_, j)| j).collect();
            near.sort_unstable();
            near
        })
        .collect();
    let adjacency = (0..n)
        .map(|i| knn[i].iter().copied().filter(|&j| knn[j].binary_search(&i).is_ok()).collect())
        .collect();
    Ok(NeighborGraph { n, adjacency, k_nn, measure })
}

/// Mean hop count or the marker for a member pair with no path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "PathRepr", try_from = "PathRepr")]
pub enum PathLength {
    Mean(f64),
    Disconnected,
}

impl PathLength {
    pub fn value(self) -> Option<f64> {
        match self {
            PathLength::Mean(v) => Some(v),
            PathLength::Disconnected => None,
        }
    }

    fn or_infinity(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PathRepr {
    Mean(f64),
    Marker(String),
}

impl From<PathLength> for PathRepr {
    fn from(p: PathLength) -> Self {
        match p {
            PathLength::Mean(v) => PathRepr::Mean(v),
            PathLength::Disconnected => PathRepr::Marker("disconnected".into()),
        }
    }
}

impl TryFrom<PathRepr> for PathLength {
    type Error = String;

    fn try_from(r: PathRepr) -> Result<Self, Self::Error> {
        match r {
            PathRepr::Mean(v) => Ok(PathLength::Mean(v)),
            PathRepr::Marker(s) if s == "disconnected" => Ok(PathLength::Disconnected),
            PathRepr::Marker(s) => Err(format!("unknown path length marker {s:?}")),
        }
    }
}

/// Mean shortest-path hop count over all unordered member pairs. Paths may
/// pass through non-members.
pub fn avg_path_length(g: &NeighborGraph, members: &[usize]) -> Result<PathLength, DetectionError> {
    if members.len() < 2 {
        return Err(DetectionError::TooFewMembers(members.len()));
    }
    let mut dist = vec![0u32; g.n];
    let mut queue = VecDeque::new();
    let mut total = 0u64;
    for (a, &i) in members.iter().enumerate().take(members.len() - 1) {
        g.bfs(i, &mut dist, &mut queue);
        for &j in &members[a + 1..] {
            if dist[j] == u32::MAX {
                return Ok(PathLength::Disconnected);
            }
            total += u64::from(dist[j]);
        }
    }
    let pairs = members.len() * (members.len() - 1) / 2;
    Ok(PathLength::Mean(total as f64 / pairs as f64))
}

/// All-pairs hop counts, for scoring many member sets on the same graph.
struct HopMatrix {
    n: usize,
    hops: Vec<u32>,
    /// Connected component id per node, numbered by smallest node.
    component: Vec<usize>,
}

impl HopMatrix {
    fn new(g: &NeighborGraph) -> Self {
        let n = g.n;
        let mut hops = vec![0u32; n * n];
        let mut queue = VecDeque::new();
        let mut component = vec![usize::MAX; n];
        let mut next = 0;
        for i in 0..n {
            let row = &mut hops[i * n..(i + 1) * n];
            g.bfs(i, row, &mut queue);
            if component[i] == usize::MAX {
                for (j, &h) in row.iter().enumerate() {
                    if h != u32::MAX {
                        component[j] = next;
                    }
                }
                next += 1;
            }
        }
        Self { n, hops, component }
    }

    /// Members in the component holding most of them (smallest id on ties).
    fn core(&self, members: &[usize]) -> Vec<usize> {
        let mut counts = std::collections::BTreeMap::new();
        for &i in members {
            *counts.entry(self.component[i]).or_insert(0usize) += 1;
        }
        let mut best = (usize::MAX, 0usize);
        for (&c, &count) in &counts {
            if count > best.1 {
                best = (c, count);
            }
        }
        members.iter().copied().filter(|&i| self.component[i] == best.0).collect()
    }

    /// Path length over the core, or `Disconnected` when the core holds
    /// less than `min_core` of the members.
    fn core_avg(&self, members: &[usize], min_core: f64) -> (PathLength, usize) {
        let core = self.core(members);
        let detached = members.len() - core.len();
        if core.len() < 2 || (core.len() as f64) < min_core * members.len() as f64 - 1e-9 {
            return (PathLength::Disconnected, detached);
        }
        (self.avg(&core), detached)
    }

    fn avg(&self, members: &[usize]) -> PathLength {
        let mut total = 0u64;
        for (a, &i) in members.iter().enumerate() {
            let row = &self.hops[i * self.n..(i + 1) * self.n];
            for &j in &members[a + 1..] {
                if row[j] == u32::MAX {
                    return PathLength::Disconnected;
                }
                total += u64::from(row[j]);
            }
        }
        let pairs = members.len() * (members.len() - 1) / 2;
        PathLength::Mean(total as f64 / pairs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub per_point: Vec<f64>,
    /// Mean over members; 0 for an empty cluster.
    pub per_cluster: Vec<f64>,
    pub overall: f64,
}

/// Standard silhouette over `k = max(assignment) + 1` clusters. Singleton
/// members score 0, as do points with `a = b = 0`. Empty clusters are
/// skipped when looking for the nearest other cluster.
pub fn silhouette(data: &ClusterData, assignments: &[usize], measure: Measure) -> Result<Silhouette, DetectionError> {
    let n = data.n();
    if assignments.len() != n {
        return Err(DetectionError::LengthMismatch { assignments: assignments.len(), n });
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(DetectionError::SingleCluster);
    }
    let mut per_point = vec![0.0; n];
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.fill(0.0);
        for j in 0..n {
            if j != i {
                sums[assignments[j]] += data.dist(i, j, measure);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        per_point[i] = if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    let mut per_cluster = vec![0.0; k];
    for (i, &a) in assignments.iter().enumerate() {
        per_cluster[a] += per_point[i];
    }
    for (v, &s) in per_cluster.iter_mut().zip(&sizes) {
        if s > 0 {
            *v /= s as f64;
        }
    }
    let overall = per_point.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { per_point, per_cluster, overall })
}

/// Mean pairwise dissimilarity among `members`; 0 below two members.
pub fn compactness(data: &ClusterData, members: &[usize], measure: Measure) -> f64 {
    if members.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            total += data.dist(i, j, measure);
        }
    }
    total / (members.len() * (members.len() - 1) / 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionThresholds {
    pub min_silhouette: f64,
    pub max_apl_ratio: f64,
    /// `None` resolves to `max(3, ceil(1% of n))`.
    pub min_size: Option<usize>,
    /// `None` resolves to [`default_k_nn`].
    pub k_nn: Option<usize>,
    pub baseline_samples: usize,
    pub seed: u64,
    /// Share of a member set that must lie in one graph component. Members
    /// outside it are counted as detached and left out of the path length;
    /// 1.0 demands full connectivity.
    pub min_core_fraction: f64,
    /// Metrics are computed on a seeded row sample above this size.
    pub max_rows: usize,
}

impl Default for DetectionThresholds {
    fn default() -> Self {
        Self { min_silhouette: 0.25, max_apl_ratio: 1.0, min_size: None, k_nn: None, baseline_samples: 20, seed: 0, min_core_fraction: 0.9, max_rows: 3000 }
    }
}

impl DetectionThresholds {
    pub fn resolved_min_size(&self, n: usize) -> usize {
        self.min_size.unwrap_or_else(|| 3usize.max(n.div_ceil(100)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Good,
    Bad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterQuality {
    pub cluster_id: usize,
    pub size: usize,
    pub silhouette: f64,
    /// `None` when fewer than two members were scored.
    pub avg_path_length: Option<PathLength>,
    /// Members outside the cluster's main graph component.
    pub detached: usize,
    /// Median over random member sets of the same size.
    pub baseline_path_length: Option<PathLength>,
    pub apl_ratio: Option<f64>,
    pub compactness: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub per_cluster: Vec<ClusterQuality>,
    pub overall_silhouette: f64,
    pub good_count: usize,
    pub min_size: usize,
    pub k_nn: usize,
    /// Rows scored when the data was sampled down.
    pub sampled_rows: Option<usize>,
}

impl QualityReport {
    pub fn good_clusters(&self) -> Vec<usize> {
        self.per_cluster.iter().filter(|c| c.verdict == Verdict::Good).map(|c| c.cluster_id).collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Score every cluster of `model` and apply the verdict rule.
pub fn detect_good_clusters(
    model: &ClusterModel,
    data: &ClusterData,
    th: &DetectionThresholds,
) -> Result<QualityReport, DetectionError> {
    let n = data.n();
    if model.assignments.len() != n {
        return Err(DetectionError::LengthMismatch { assignments: model.assignments.len(), n });
    }
    let k = model.k();
    let sizes = model.cluster_sizes();
    let min_size = th.resolved_min_size(n);
    let mut rng = ChaCha8Rng::seed_from_u64(th.seed);

    let (rows, sampled_rows) = if n > th.max_rows {
        let mut idx = rand::seq::index::sample(&mut rng, n, th.max_rows).into_vec();
        idx.sort_unstable();
        (idx, Some(th.max_rows))
    } else {
        ((0..n).collect(), None)
    };
    let scored = if sampled_rows.is_some() { data.subset(&rows) } else { data.clone() };
    let labels: Vec<usize> = rows.iter().map(|&i| model.assignments[i]).collect();
    let m = scored.n();

    let k_nn = th.k_nn.unwrap_or_else(|| default_k_nn(m));
    let graph = build_knn_graph(&scored, model.measure, k_nn)?;
    let hops = HopMatrix::new(&graph);
    let sil = silhouette(&scored, &labels, model.measure)?;

    let mut per_cluster = Vec::with_capacity(k);
    for (c, &size) in sizes.iter().enumerate() {
        let members: Vec<usize> = (0..m).filter(|&i| labels[i] == c).collect();
        let silhouette = sil.per_cluster.get(c).copied().unwrap_or(0.0);
        let (apl, detached, baseline) = if members.len() >= 2 {
            let (apl, detached) = hops.core_avg(&members, th.min_core_fraction);
            let samples: Vec<f64> = (0..th.baseline_samples.max(1))
                .map(|_| {
                    let set = rand::seq::index::sample(&mut rng, m, members.len()).into_vec();
                    hops.core_avg(&set, th.min_core_fraction).0.or_infinity()
                })
                .collect();
            let b = median(samples);
            (Some(apl), detached, Some(if b.is_finite() { PathLength::Mean(b) } else { PathLength::Disconnected }))
        } else {
            (None, 0, None)
        };
        let apl_ratio = match (apl, baseline) {
            (Some(PathLength::Mean(a)), Some(PathLength::Mean(b))) if b > 0.0 => Some(a / b),
            (Some(PathLength::Mean(_)), Some(PathLength::Disconnected)) => Some(0.0),
            _ => None,
        };
        let good = silhouette >= th.min_silhouette
            && size >= min_size
            && apl_ratio.is_some_and(|r| r <= th.max_apl_ratio);
        per_cluster.push(ClusterQuality {
            cluster_id: c,
            size,
            silhouette,
            avg_path_length: apl,
            detached,
            baseline_path_length: baseline,
            apl_ratio,
            compactness: compactness(&scored, &members, model.measure),
            verdict: if good { Verdict::Good } else { Verdict::Bad },
        });
    }
    let good_count = per_cluster.iter().filter(|c| c.verdict == Verdict::Good).count();
    Ok(QualityReport { per_cluster, overall_silhouette: sil.overall, good_count, min_size, k_nn, sampled_rows })
}
