//! k-medoids: PAM, CLARA and CLARANS.

use super::{Algorithm, ClusterData, ClusterError, ClusteringSpec, ClusterModel, Measure, Representatives};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-12;

/// Nearest and second-nearest medoid distances for every row.
struct Cache {
    nearest: Vec<usize>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Cache {
    fn build(n: usize, medoids: &[usize], dist: impl Fn(usize, usize) -> f64) -> Self {
        let mut nearest = vec![0; n];
        let mut d1 = vec![f64::INFINITY; n];
        let mut d2 = vec![f64::INFINITY; n];
        for j in 0..n {
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dist(j, m);
                if d < d1[j] {
                    d2[j] = d1[j];
                    d1[j] = d;
                    nearest[j] = slot;
                } else if d < d2[j] {
                    d2[j] = d;
                }
            }
        }
        Self { nearest, d1, d2 }
    }

    fn cost(&self) -> f64 {
        self.d1.iter().sum()
    }

    /// Cost change of replacing the medoid in `slot` by row `h`.
    fn swap_delta(&self, slot: usize, h: usize, dist: impl Fn(usize, usize) -> f64) -> f64 {
        let mut delta = 0.0;
        for j in 0..self.d1.len() {
            let dj = dist(j, h);
            delta += if self.nearest[j] == slot { dj.min(self.d2[j]) - self.d1[j] } else { (dj - self.d1[j]).min(0.0) };
        }
        delta
    }

    /// Cost change of every slot replaced by `h`, in one pass over the rows.
    fn swap_deltas(&self, k: usize, h: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let mut shared = 0.0;
        let mut per_slot = vec![0.0; k];
        for j in 0..self.d1.len() {
            let dj = dist(j, h);
            let gain = (dj - self.d1[j]).min(0.0);
            shared += gain;
            per_slot[self.nearest[j]] += dj.min(self.d2[j]) - self.d1[j] - gain;
        }
        per_slot.iter().map(|d| shared + d).collect()
    }
}

struct Matrix {
    n: usize,
    d: Vec<f64>,
}

impl Matrix {
    fn new(data: &ClusterData, measure: Measure) -> Self {
        let n = data.n();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = data.dist(i, j, measure);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// BUILD then SWAP on a precomputed matrix. Returns medoids in slot order,
/// the cost after each accepted swap and the number of swap passes.
fn pam_core(m: &Matrix, k: usize) -> (Vec<usize>, Vec<f64>, usize) {
    let n = m.n;
    let dist = |i: usize, j: usize| m.get(i, j);
    let mut is_medoid = vec![false; n];
    let first = (0..n)
        .map(|i| (i, (0..n).map(|j| m.get(i, j)).sum::<f64>()))
        .fold((0, f64::INFINITY), |best, (i, s)| if s < best.1 { (i, s) } else { best });
    let mut medoids = vec![first.0];
    is_medoid[first.0] = true;
    let mut d1: Vec<f64> = (0..n).map(|j| m.get(j, first.0)).collect();
    while medoids.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for h in (0..n).filter(|&h| !is_medoid[h]) {
            let gain: f64 = (0..n).map(|j| (d1[j] - m.get(j, h)).max(0.0)).sum();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((h, gain));
            }
        }
        let (h, _) = best.expect("k <= n");
        medoids.push(h);
        is_medoid[h] = true;
        for (j, d) in d1.iter_mut().enumerate() {
            *d = d.min(m.get(j, h));
        }
    }

    let mut cache = Cache::build(n, &medoids, dist);
    let mut trace = vec![cache.cost()];
    let mut passes = 0;
    loop {
        passes += 1;
        let mut best: Option<(usize, usize, f64)> = None;
        for h in (0..n).filter(|&h| !is_medoid[h]) {
            for (slot, delta) in cache.swap_deltas(k, h, dist).into_iter().enumerate() {
                if best.is_none_or(|(_, _, b)| delta < b) {
                    best = Some((slot, h, delta));
                }
            }
        }
        match best {
            Some((slot, h, delta)) if delta < -EPS => {
                is_medoid[medoids[slot]] = false;
                is_medoid[h] = true;
                medoids[slot] = h;
                cache = Cache::build(n, &medoids, dist);
                trace.push(cache.cost());
            }
            _ => break,
        }
    }
    (medoids, trace, passes)
}

fn check(data: &ClusterData, spec: &ClusteringSpec) -> Result<Measure, ClusterError> {
    spec.check(data.n())?;
    Ok(data.measure(spec.resolved_gamma(data)))
}

fn medoid_model(
    data: &ClusterData,
    spec: ClusteringSpec,
    measure: Measure,
    medoids: Vec<usize>,
    iterations_run: usize,
    trace: Vec<f64>,
) -> ClusterModel {
    let cache = Cache::build(data.n(), &medoids, |i, j| data.dist(i, j, measure));
    let gamma = match measure {
        Measure::Mixed { gamma } => Some(gamma),
        _ => None,
    };
    ClusterModel {
        spec: ClusteringSpec { gamma, ..spec },
        selected_attributes: data.attributes().to_vec(),
        measure,
        objective: cache.cost(),
        assignments: cache.nearest,
        representatives: Representatives::Medoids { rows: medoids },
        iterations_run,
        trace,
    }
}

/// PAM over any attribute kinds. Deterministic; `seed` is recorded only.
pub fn pam(data: &ClusterData, k: usize, seed: u64) -> Result<ClusterModel, ClusterError> {
    pam_spec(data, &ClusteringSpec::new(Algorithm::Pam, k, seed))
}

pub(super) fn pam_spec(data: &ClusterData, spec: &ClusteringSpec) -> Result<ClusterModel, ClusterError> {
    let measure = check(data, spec)?;
    let (medoids, trace, passes) = pam_core(&Matrix::new(data, measure), spec.k);
    Ok(medoid_model(data, ClusteringSpec { algorithm: Algorithm::Pam, ..spec.clone() }, measure, medoids, passes, trace))
}

/// PAM on `clara_samples` random subsets; the medoid set with the lowest
/// full-data cost wins. Every sample after the first contains the best
/// medoids found so far.
pub fn clara(data: &ClusterData, spec: &ClusteringSpec) -> Result<ClusterModel, ClusterError> {
    let measure = check(data, spec)?;
    let n = data.n();
    let size = spec.resolved_sample_size(n);
    if size < spec.k {
        return Err(ClusterError::SampleTooSmall { sample_size: size, k: spec.k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..spec.clara_samples.max(1) {
        let mut in_sample = vec![false; n];
        let mut sample: Vec<usize> = Vec::with_capacity(size);
        if let Some((medoids, _)) = &best {
            for &m in medoids {
                in_sample[m] = true;
                sample.push(m);
            }
        }
        let rest: Vec<usize> = (0..n).filter(|&i| !in_sample[i]).collect();
        let need = size - sample.len();
        sample.extend(rand::seq::index::sample(&mut rng, rest.len(), need).into_iter().map(|i| rest[i]));
        sample.sort_unstable();

        let sub = data.subset(&sample);
        let (local, _, passes) = pam_core(&Matrix::new(&sub, measure), spec.k);
        iterations += passes;
        let medoids: Vec<usize> = local.iter().map(|&i| sample[i]).collect();
        let cost = Cache::build(n, &medoids, |i, j| data.dist(i, j, measure)).cost();
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((medoids, cost));
        }
        trace.push(best.as_ref().map(|b| b.1).unwrap());
    }
    let (medoids, _) = best.expect("at least one sample");
    Ok(medoid_model(data, ClusteringSpec { algorithm: Algorithm::Clara, ..spec.clone() }, measure, medoids, iterations, trace))
}

/// Randomized search over medoid sets. When `clarans_maxneighbor` covers
/// every swap, neighbors are enumerated exhaustively in a shuffled order.
pub fn clarans(data: &ClusterData, spec: &ClusteringSpec) -> Result<ClusterModel, ClusterError> {
    let measure = check(data, spec)?;
    let n = data.n();
    let k = spec.k;
    let dist = |i: usize, j: usize| data.dist(i, j, measure);
    let swaps = k * (n - k);
    let maxneighbor = spec.resolved_maxneighbor(n);
    let exhaustive = maxneighbor >= swaps;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut trace = Vec::new();
    let mut moves = 0;

    for _ in 0..spec.clarans_numlocal.max(1) {
        let mut medoids: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
        let mut is_medoid = vec![false; n];
        for &m in &medoids {
            is_medoid[m] = true;
        }
        let mut cache = Cache::build(n, &medoids, dist);
        if swaps > 0 {
            loop {
                let mut moved = false;
                if exhaustive {
                    let mut pairs: Vec<(usize, usize)> =
                        (0..k).flat_map(|s| (0..n).filter(|&h| !is_medoid[h]).map(move |h| (s, h))).collect();
                    pairs.shuffle(&mut rng);
                    for (slot, h) in pairs {
                        if cache.swap_delta(slot, h, dist) < -EPS {
                            apply(&mut medoids, &mut is_medoid, slot, h);
                            moved = true;
                            break;
                        }
                    }
                } else {
                    let mut fails = 0;
                    while fails < maxneighbor {
                        let slot = rng.random_range(0..k);
                        let h = loop {
                            let h = rng.random_range(0..n);
                            if !is_medoid[h] {
                                break h;
                            }
                        };
                        if cache.swap_delta(slot, h, dist) < -EPS {
                            apply(&mut medoids, &mut is_medoid, slot, h);
                            moved = true;
                            break;
                        }
                        fails += 1;
                    }
                }
                if !moved {
                    break;
                }
                moves += 1;
                cache = Cache::build(n, &medoids, dist);
                trace.push(cache.cost());
            }
        }
        let cost = cache.cost();
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((medoids, cost));
        }
    }
    let (medoids, _) = best.expect("at least one restart");
    Ok(medoid_model(data, ClusteringSpec { algorithm: Algorithm::Clarans, ..spec.clone() }, measure, medoids, moves, trace))
}

fn apply(medoids: &mut [usize], is_medoid: &mut [bool], slot: usize, h: usize) {
    is_medoid[medoids[slot]] = false;
    is_medoid[h] = true;
    medoids[slot] = h;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(seed: u64, n: usize) -> ClusterData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
        ClusterData::from_numeric(&rows)
    }

    fn brute_force_pairs(data: &ClusterData) -> f64 {
        let n = data.n();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                let cost: f64 = (0..n)
                    .map(|j| data.dist(j, a, Measure::SqEuclidean).min(data.dist(j, b, Measure::SqEuclidean)))
                    .sum();
                best = best.min(cost);
            }
        }
        best
    }

    /// Two noisy groups; the usual shape for a k = 2 instance.
    fn grouped(seed: u64, n: usize) -> ClusterData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { 0.0 } else { 6.0 };
                vec![c + rng.random_range(-2.0..2.0), c + rng.random_range(-2.0..2.0)]
            })
            .collect();
        ClusterData::from_numeric(&rows)
    }

    #[test]
    fn pam_matches_exhaustive_pairs() {
        for seed in 0..10 {
            let data = grouped(seed, 8 + seed as usize % 5);
            let m = pam(&data, 2, 0).unwrap();
            assert!((m.objective - brute_force_pairs(&data)).abs() < 1e-9, "seed {seed}: {} vs {}", m.objective, brute_force_pairs(&data));
        }
    }

    #[test]
    fn pam_ends_at_a_swap_local_optimum() {
        for seed in 0..20 {
            let data = points(seed, 12);
            let m = pam(&data, 3, 0).unwrap();
            let Representatives::Medoids { rows } = &m.representatives else { panic!() };
            let cost = |med: &[usize]| Cache::build(12, med, |i, j| data.dist(i, j, Measure::SqEuclidean)).cost();
            for slot in 0..3 {
                for h in (0..12).filter(|h| !rows.contains(h)) {
                    let mut swapped = rows.clone();
                    swapped[slot] = h;
                    assert!(cost(&swapped) >= m.objective - 1e-9);
                }
            }
        }
    }

    #[test]
    fn k_equals_n_is_free() {
        let data = points(3, 6);
        assert_eq!(pam(&data, 6, 0).unwrap().objective, 0.0);
        let spec = ClusteringSpec::new(Algorithm::Clarans, 6, 1);
        assert_eq!(clarans(&data, &spec).unwrap().objective, 0.0);
    }

    #[test]
    fn duplicates_cost_nothing() {
        let data = ClusterData::from_numeric(&vec![vec![1.5, -2.0]; 7]);
        for k in 1..=7 {
            let m = pam(&data, k, 0).unwrap();
            assert_eq!(m.objective, 0.0);
            assert_eq!(m.cluster_sizes().iter().sum::<usize>(), 7);
        }
    }

    #[test]
    fn pam_uses_matching_for_categories() {
        let data = ClusterData::from_categorical(&[vec!["a", "x"], vec!["a", "y"], vec!["b", "z"], vec!["b", "z"]]);
        let m = pam(&data, 2, 0).unwrap();
        assert_eq!(m.measure, Measure::Matching);
        assert_eq!(m.objective, 1.0);
        assert_eq!(pam(&data, 5, 0).unwrap_err(), ClusterError::KExceedsN { k: 5, n: 4 });
    }

    #[test]
    fn swap_deltas_agree_with_single_delta() {
        let data = points(11, 15);
        let m = Matrix::new(&data, Measure::SqEuclidean);
        let dist = |i: usize, j: usize| m.get(i, j);
        let cache = Cache::build(15, &[0, 4, 9], dist);
        for h in [1, 2, 14] {
            let all = cache.swap_deltas(3, h, dist);
            for (slot, d) in all.iter().enumerate() {
                assert!((d - cache.swap_delta(slot, h, dist)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn clara_with_full_sample_is_pam() {
        let data = points(5, 30);
        let spec = ClusteringSpec { clara_samples: 1, clara_sample_size: Some(30), ..ClusteringSpec::new(Algorithm::Clara, 3, 8) };
        let c = clara(&data, &spec).unwrap();
        let p = pam(&data, 3, 8).unwrap();
        assert_eq!(c.assignments, p.assignments);
        assert_eq!(c.representatives, p.representatives);
        assert_eq!(c.objective, p.objective);
    }

    #[test]
    fn clara_is_deterministic_and_checks_sample_size() {
        let data = points(6, 80);
        let spec = ClusteringSpec::new(Algorithm::Clara, 3, 2);
        assert_eq!(clara(&data, &spec).unwrap(), clara(&data, &spec).unwrap());
        let small = ClusteringSpec { clara_sample_size: Some(2), ..spec };
        assert_eq!(clara(&data, &small).unwrap_err(), ClusterError::SampleTooSmall { sample_size: 2, k: 3 });
    }

    #[test]
    fn exhaustive_clarans_reaches_pam() {
        for seed in 0..10 {
            let data = points(100 + seed, 10);
            let spec = ClusteringSpec { clarans_maxneighbor: Some(16), ..ClusteringSpec::new(Algorithm::Clarans, 2, seed) };
            let c = clarans(&data, &spec).unwrap();
            let p = pam(&data, 2, seed).unwrap();
            assert!(c.objective <= p.objective + 1e-9, "seed {seed}: {} > {}", c.objective, p.objective);
        }
    }

    #[test]
    fn clarans_is_deterministic() {
        let data = points(9, 60);
        let spec = ClusteringSpec::new(Algorithm::Clarans, 4, 17);
        let a = clarans(&data, &spec).unwrap();
        assert_eq!(a, clarans(&data, &spec).unwrap());
        assert!(a.objective.is_finite());
        assert_eq!(a.cluster_sizes().iter().sum::<usize>(), 60);
    }
}
