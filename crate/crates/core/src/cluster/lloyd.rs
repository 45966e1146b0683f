//! Lloyd-type alternation shared by k-means, k-modes and k-prototypes.

use super::{Algorithm, ClusterData, ClusterError, ClusteringSpec, ClusterModel, Measure, Representatives};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
struct Center {
    numeric: Vec<f64>,
    categorical: Vec<u32>,
}

struct Engine<'a> {
    data: &'a ClusterData,
    /// Weight of one categorical mismatch.
    cat_weight: f64,
}

impl Engine<'_> {
    fn to_center(&self, i: usize, c: &Center) -> f64 {
        let num: f64 = self.data.numeric_row(i).iter().zip(&c.numeric).map(|(x, y)| (x - y) * (x - y)).sum();
        if self.cat_weight == 0.0 {
            return num;
        }
        let mis = self.data.categorical_row(i).iter().zip(&c.categorical).filter(|(a, b)| a != b).count();
        num + self.cat_weight * mis as f64
    }

    fn row_center(&self, i: usize) -> Center {
        Center { numeric: self.data.numeric_row(i).to_vec(), categorical: self.data.categorical_row(i).to_vec() }
    }

    /// D²-weighted seeding: the first center is uniform, later ones are drawn
    /// with probability proportional to the dissimilarity to the nearest
    /// chosen center. Exhausted weight falls back to a uniform unchosen row.
    fn seed_centers(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<Center> {
        let n = self.data.n();
        let mut chosen = vec![false; n];
        let first = rng.random_range(0..n);
        chosen[first] = true;
        let mut centers = vec![self.row_center(first)];
        let mut nearest: Vec<f64> = (0..n).map(|i| self.to_center(i, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = nearest.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut pick = None;
                for (i, &w) in nearest.iter().enumerate() {
                    if w > 0.0 {
                        pick = Some(i);
                        if u < w {
                            break;
                        }
                        u -= w;
                    }
                }
                pick.expect("positive total weight")
            } else {
                let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                free[rng.random_range(0..free.len())]
            };
            chosen[pick] = true;
            let c = self.row_center(pick);
            for (i, d) in nearest.iter_mut().enumerate() {
                *d = d.min(self.to_center(i, &c));
            }
            centers.push(c);
        }
        centers
    }

    fn nearest(&self, i: usize, centers: &[Center]) -> (usize, f64) {
        let mut best = (0, self.to_center(i, &centers[0]));
        for (c, center) in centers.iter().enumerate().skip(1) {
            let d = self.to_center(i, center);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }

    /// Reassign each row to its nearest center; a row moves only when the
    /// new center is strictly closer than its current one.
    fn assign(&self, centers: &[Center], current: Option<&[usize]>) -> Vec<usize> {
        (0..self.data.n())
            .map(|i| {
                let (best, d) = self.nearest(i, centers);
                match current {
                    Some(cur) if self.to_center(i, &centers[cur[i]]) <= d => cur[i],
                    _ => best,
                }
            })
            .collect()
    }

    /// Give every empty cluster the row farthest from its own center, taken
    /// from a cluster that keeps at least one member. Returns repair count.
    fn repair_empty(&self, assign: &mut [usize], centers: &mut [Center]) -> usize {
        let k = centers.len();
        let mut repairs = 0;
        loop {
            let mut sizes = vec![0usize; k];
            for &a in assign.iter() {
                sizes[a] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                return repairs;
            };
            let mut far: Option<(usize, f64)> = None;
            for (i, &a) in assign.iter().enumerate() {
                if sizes[a] < 2 {
                    continue;
                }
                let d = self.to_center(i, &centers[a]);
                if far.is_none_or(|(_, best)| d > best) {
                    far = Some((i, d));
                }
            }
            let (row, _) = far.expect("k <= n leaves a donor cluster");
            assign[row] = empty;
            centers[empty] = self.row_center(row);
            repairs += 1;
        }
    }

    /// Means for the numeric part, modes (smallest code on ties) for the categorical part.
    fn update(&self, assign: &[usize], k: usize) -> Vec<Center> {
        let p = self.data.numeric_dims();
        let q = self.data.categorical_dims();
        let mut sums = vec![vec![0.0; p]; k];
        let mut sizes = vec![0usize; k];
        let mut counts: Vec<Vec<Vec<usize>>> =
            (0..k).map(|_| self.data.categories().iter().map(|c| vec![0usize; c.len()]).collect()).collect();
        for (i, &a) in assign.iter().enumerate() {
            sizes[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(self.data.numeric_row(i)) {
                *s += x;
            }
            for (j, &code) in self.data.categorical_row(i).iter().enumerate() {
                counts[a][j][code as usize] += 1;
            }
        }
        (0..k)
            .map(|c| Center {
                numeric: sums[c].iter().map(|s| s / sizes[c].max(1) as f64).collect(),
                categorical: (0..q)
                    .map(|j| {
                        let col = &counts[c][j];
                        let mut best = 0usize;
                        for (code, &cnt) in col.iter().enumerate() {
                            if cnt > col[best] {
                                best = code;
                            }
                        }
                        best as u32
                    })
                    .collect(),
            })
            .collect()
    }

    fn cost(&self, assign: &[usize], centers: &[Center]) -> f64 {
        assign.iter().enumerate().map(|(i, &a)| self.to_center(i, &centers[a])).sum()
    }

    fn run(&self, k: usize, seed: u64, max_iter: usize) -> (Vec<usize>, Vec<Center>, f64, usize, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centers = self.seed_centers(k, &mut rng);
        let mut assign = self.assign(&centers, None);
        let mut iterations = self.repair_empty(&mut assign, &mut centers);
        let mut trace = Vec::new();
        loop {
            centers = self.update(&assign, k);
            trace.push(self.cost(&assign, &centers));
            iterations += 1;
            if iterations >= max_iter.max(1) {
                break;
            }
            let mut next = self.assign(&centers, Some(&assign));
            let mut probe = centers.clone();
            let repairs = self.repair_empty(&mut next, &mut probe);
            iterations += repairs;
            if next == assign {
                break;
            }
            assign = next;
        }
        let objective = *trace.last().expect("at least one iteration");
        (assign, centers, objective, iterations, trace)
    }
}

fn check(data: &ClusterData, k: usize) -> Result<(), ClusterError> {
    ClusteringSpec::new(Algorithm::KMeans, k, 0).check(data.n())
}

fn model(
    data: &ClusterData,
    spec: ClusteringSpec,
    measure: Measure,
    result: (Vec<usize>, Vec<Center>, f64, usize, Vec<f64>),
    representatives: impl FnOnce(&[Center]) -> Representatives,
) -> ClusterModel {
    let (assignments, centers, objective, iterations_run, trace) = result;
    ClusterModel {
        spec,
        selected_attributes: data.attributes().to_vec(),
        measure,
        assignments,
        representatives: representatives(&centers),
        objective,
        iterations_run,
        trace,
    }
}

fn mode_labels(data: &ClusterData, centers: &[Center]) -> Vec<Vec<String>> {
    centers
        .iter()
        .map(|c| c.categorical.iter().enumerate().map(|(j, &code)| data.label(j, code)).collect())
        .collect()
}

/// k-means with D² seeding. All attributes must be numeric.
pub fn kmeans(data: &ClusterData, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel, ClusterError> {
    if let Some(name) = data.categorical_names().first() {
        return Err(ClusterError::NonNumericAttribute(name.clone()));
    }
    check(data, k)?;
    let engine = Engine { data, cat_weight: 0.0 };
    let result = engine.run(k, seed, max_iter);
    let spec = ClusteringSpec { max_iter, ..ClusteringSpec::new(Algorithm::KMeans, k, seed) };
    Ok(model(data, spec, Measure::SqEuclidean, result, |c| Representatives::Centers {
        centers: c.iter().map(|c| c.numeric.clone()).collect(),
    }))
}

/// k-modes under simple matching. All attributes must be categorical.
pub fn kmodes(data: &ClusterData, k: usize, seed: u64, max_iter: usize) -> Result<ClusterModel, ClusterError> {
    if let Some(name) = data.numeric_names().first() {
        return Err(ClusterError::NonCategoricalAttribute(name.clone()));
    }
    check(data, k)?;
    let engine = Engine { data, cat_weight: 1.0 };
    let result = engine.run(k, seed, max_iter);
    let spec = ClusteringSpec { max_iter, ..ClusteringSpec::new(Algorithm::KModes, k, seed) };
    Ok(model(data, spec, Measure::Matching, result, |c| Representatives::Modes { modes: mode_labels(data, c) }))
}

/// k-prototypes: squared Euclidean on the numeric part plus `gamma` per
/// categorical mismatch. `None` uses [`ClusterData::default_gamma`].
pub fn kprototypes(
    data: &ClusterData,
    k: usize,
    gamma: Option<f64>,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterModel, ClusterError> {
    if !data.is_mixed() {
        return Err(ClusterError::NotMixedData);
    }
    let gamma = gamma.unwrap_or_else(|| data.default_gamma());
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(ClusterError::InvalidGamma(gamma));
    }
    check(data, k)?;
    let engine = Engine { data, cat_weight: gamma };
    let result = engine.run(k, seed, max_iter);
    let spec = ClusteringSpec { max_iter, gamma: Some(gamma), ..ClusteringSpec::new(Algorithm::KPrototypes, k, seed) };
    Ok(model(data, spec, Measure::Mixed { gamma }, result, |c| Representatives::Prototypes {
        numeric: c.iter().map(|c| c.numeric.clone()).collect(),
        categorical: mode_labels(data, c),
    }))
}
