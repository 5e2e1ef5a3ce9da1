//! Level recovery.
//!
//! Per-cluster +1 ratios on a random pool of items are pooled, sorted and cut
//! at the `d - 1` widest gaps; the segment means estimate the levels. Each
//! `(cluster, item)` cell then takes the level that maximizes the likelihood
//! of the cluster's observed ratings on that item.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, RatingObservation};
use crate::synth::Seed;

/// Attempts per pool slot before giving up on unobserved items.
pub const MAX_REDRAWS: usize = 100;

/// The +1 ratio of one item within one cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSample {
    pub item: usize,
    pub cluster: usize,
    pub ratio: f64,
    /// Number of observed ratings behind the ratio.
    pub support: usize,
}

/// Estimated levels together with the segmentation that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEstimate {
    pub values: Vec<f64>,
    /// Exclusive end of each segment in the sorted ratio list.
    pub boundaries: Vec<usize>,
    /// Set when segment means collided and were perturbed apart.
    pub degenerate: bool,
}

impl LevelEstimate {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(+1 count, observed count)` for every cluster and item.
#[derive(Debug, Clone)]
pub struct ClusterItemCounts {
    m: usize,
    plus: Vec<u32>,
    total: Vec<u32>,
}

impl ClusterItemCounts {
    pub fn new(obs: &RatingObservation, labels: &[usize], k: usize) -> Self {
        let m = obs.m();
        let mut plus = vec![0u32; k * m];
        let mut total = vec![0u32; k * m];
        for r in obs.entries() {
            let idx = labels[r.user] * m + r.item;
            total[idx] += 1;
            if r.value > 0 {
                plus[idx] += 1;
            }
        }
        ClusterItemCounts { m, plus, total }
    }

    pub fn plus(&self, cluster: usize, item: usize) -> usize {
        self.plus[cluster * self.m + item] as usize
    }

    pub fn total(&self, cluster: usize, item: usize) -> usize {
        self.total[cluster * self.m + item] as usize
    }

    pub fn minus(&self, cluster: usize, item: usize) -> usize {
        self.total(cluster, item) - self.plus(cluster, item)
    }

    fn ratio(&self, cluster: usize, item: usize) -> Result<RatioSample> {
        let total = self.total(cluster, item);
        if total == 0 {
            return Err(Error::NoObservations { cluster, item });
        }
        Ok(RatioSample { item, cluster, ratio: self.plus(cluster, item) as f64 / total as f64, support: total })
    }
}

fn check_dims(obs: &RatingObservation, clusters: &ClusterAssignment) -> Result<()> {
    if obs.n() != clusters.n() {
        return Err(Error::DimensionMismatch(format!(
            "ratings have {} users, assignment has {}",
            obs.n(),
            clusters.n()
        )));
    }
    Ok(())
}

/// Fraction of +1 among the observed ratings of `item` by users in `cluster`.
pub fn estimate_item_ratio(
    obs: &RatingObservation,
    clusters: &ClusterAssignment,
    cluster: usize,
    item: usize,
) -> Result<RatioSample> {
    check_dims(obs, clusters)?;
    let (mut plus, mut total) = (0usize, 0usize);
    for r in obs.item_ratings(item).filter(|r| clusters.label(r.user) == cluster) {
        total += 1;
        if r.value > 0 {
            plus += 1;
        }
    }
    if total == 0 {
        return Err(Error::NoObservations { cluster, item });
    }
    Ok(RatioSample { item, cluster, ratio: plus as f64 / total as f64, support: total })
}

/// Pool size per cluster: `d * ceil(ln m)`, at least `d`.
pub fn pool_size(m: usize, d: usize) -> usize {
    d * ((m as f64).ln().ceil() as usize).max(1)
}

/// Draws `pool_size(m, d)` items per cluster uniformly with replacement.
///
/// A draw that lands on an item the cluster never rated is redrawn, up to
/// [`MAX_REDRAWS`] attempts per slot.
pub fn sample_ratio_pool(
    obs: &RatingObservation,
    clusters: &ClusterAssignment,
    d: usize,
    seed: Seed,
) -> Result<Vec<RatioSample>> {
    check_dims(obs, clusters)?;
    let counts = ClusterItemCounts::new(obs, clusters.labels(), clusters.k());
    sample_pool_from_counts(&counts, obs.m(), clusters.k(), d, seed)
}

pub(crate) fn sample_pool_from_counts(
    counts: &ClusterItemCounts,
    m: usize,
    k: usize,
    d: usize,
    seed: Seed,
) -> Result<Vec<RatioSample>> {
    let m0 = pool_size(m, d);
    let mut pool = Vec::with_capacity(k * m0);
    for cluster in 0..k {
        let mut rng = seed.child("ratio_pool", cluster as u64).rng();
        for _ in 0..m0 {
            let sample = (0..MAX_REDRAWS).find_map(|_| counts.ratio(cluster, rng.gen_range(0..m)).ok());
            pool.push(sample.ok_or(Error::ExhaustedRedraws { cluster, attempts: MAX_REDRAWS })?);
        }
    }
    Ok(pool)
}

/// Splits the sorted ratios at the `d - 1` largest adjacent gaps.
///
/// Equal gaps are cut at the lowest position first. Segment means are
/// clamped to `[clamp, 1 - clamp]`; colliding means are pushed apart by
/// `clamp * h` and flagged as degenerate.
pub fn gap_cluster(ratios: &[f64], d: usize, clamp: f64) -> Result<LevelEstimate> {
    if d == 0 {
        return Err(Error::EmptyLevels);
    }
    if ratios.len() < d {
        return Err(Error::TooFewSamples { needed: d, got: ratios.len() });
    }
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut order: Vec<usize> = (0..sorted.len() - 1).collect();
    order.sort_by(|&a, &b| {
        let ga = sorted[a + 1] - sorted[a];
        let gb = sorted[b + 1] - sorted[b];
        gb.total_cmp(&ga).then(a.cmp(&b))
    });
    let mut cuts: Vec<usize> = order[..d - 1].iter().map(|&j| j + 1).collect();
    cuts.sort_unstable();
    cuts.push(sorted.len());

    let mut values = Vec::with_capacity(d);
    let mut start = 0;
    for &end in &cuts {
        let segment = &sorted[start..end];
        // offsets from the first element keep repeated values exact
        let mean = segment[0] + segment.iter().map(|x| x - segment[0]).sum::<f64>() / segment.len() as f64;
        values.push(mean.clamp(clamp, 1.0 - clamp));
        start = end;
    }

    let mut degenerate = false;
    for h in 1..d {
        if values[h] <= values[h - 1] {
            degenerate = true;
            values[h] = values[h - 1] + clamp * h as f64;
        }
    }
    if degenerate {
        let overshoot = values[d - 1] - (1.0 - clamp);
        if overshoot > 0.0 {
            values.iter_mut().for_each(|v| *v -= overshoot);
        }
    }
    Ok(LevelEstimate { values, boundaries: cuts, degenerate })
}

/// Likelihood cost of level `p` for `plus` positive and `minus` negative ratings.
pub fn level_cost(plus: usize, minus: usize, p: f64) -> f64 {
    let mut cost = 0.0;
    if plus > 0 {
        cost -= plus as f64 * p.ln();
    }
    if minus > 0 {
        cost -= minus as f64 * (1.0 - p).ln();
    }
    cost
}

/// Level index minimizing [`level_cost`]; ties go to the lowest index.
pub fn best_level(plus: usize, minus: usize, levels: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (h, &p) in levels.iter().enumerate() {
        let c = level_cost(plus, minus, p);
        if c < best.0 {
            best = (c, h);
        }
    }
    best.1
}

/// Maximum-likelihood level index for every `(cluster, item)`.
///
/// Items a cluster never rated get level 0.
pub fn assign_levels(
    obs: &RatingObservation,
    clusters: &ClusterAssignment,
    estimate: &LevelEstimate,
) -> Result<Vec<Vec<usize>>> {
    check_dims(obs, clusters)?;
    let counts = ClusterItemCounts::new(obs, clusters.labels(), clusters.k());
    Ok(assign_from_counts(&counts, obs.m(), clusters.k(), &estimate.values))
}

pub(crate) fn assign_from_counts(counts: &ClusterItemCounts, m: usize, k: usize, levels: &[f64]) -> Vec<Vec<usize>> {
    (0..k)
        .map(|c| (0..m).map(|j| best_level(counts.plus(c, j), counts.minus(c, j), levels)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LevelSet, PreferenceModel, Rating};
    use crate::synth::sample_ratings;
    use proptest::prelude::*;

    const EPS: f64 = 1e-6;

    fn obs_from(n: usize, m: usize, triples: &[(usize, usize, i8)]) -> RatingObservation {
        let entries = triples.iter().map(|&(user, item, value)| Rating { user, item, value }).collect();
        RatingObservation::new(n, m, entries).unwrap()
    }

    #[test]
    fn ratio_examples() {
        let a = ClusterAssignment::new(vec![0; 10], 1).unwrap();
        let all_plus = obs_from(10, 1, &[(0, 0, 1), (3, 0, 1)]);
        assert_eq!(estimate_item_ratio(&all_plus, &a, 0, 0).unwrap().ratio, 1.0);

        let triples: Vec<_> = (0..10).map(|i| (i, 0, if i < 3 { 1 } else { -1 })).collect();
        let s = estimate_item_ratio(&obs_from(10, 1, &triples), &a, 0, 0).unwrap();
        assert_eq!((s.ratio, s.support), (0.3, 10));

        let empty = RatingObservation::empty(10, 1);
        assert_eq!(
            estimate_item_ratio(&empty, &a, 0, 0),
            Err(Error::NoObservations { cluster: 0, item: 0 })
        );
    }

    #[test]
    fn ratio_concentrates() {
        let levels = LevelSet::new(&[0.7]).unwrap();
        let model = PreferenceModel::from_blocks(levels, &[1000], &[vec![0]], 1).unwrap();
        let obs = sample_ratings(&model.induce_matrix(), 0.5, Seed::new(9)).unwrap();
        let s = estimate_item_ratio(&obs, model.assignment(), 0, 0).unwrap();
        let sd = (0.7f64 * 0.3 / s.support as f64).sqrt();
        assert!((s.ratio - 0.7).abs() < 4.0 * sd);
    }

    #[test]
    fn pool_size_uses_natural_log() {
        assert_eq!(pool_size(100, 3), 15);
        assert_eq!(pool_size(1, 2), 2);
    }

    #[test]
    fn pool_is_deterministic_and_sized() {
        let levels = LevelSet::new(&[0.2, 0.7]).unwrap();
        let model = PreferenceModel::from_blocks(levels, &[20, 20], &[vec![0, 1], vec![1, 0]], 100).unwrap();
        let obs = sample_ratings(&model.induce_matrix(), 0.3, Seed::new(1)).unwrap();
        let a = sample_ratio_pool(&obs, model.assignment(), 3, Seed::new(5)).unwrap();
        let b = sample_ratio_pool(&obs, model.assignment(), 3, Seed::new(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 15);
        assert!(a[..15].iter().all(|s| s.cluster == 0));
    }

    #[test]
    fn pool_with_no_ratings_exhausts() {
        let a = ClusterAssignment::from_sizes(&[2, 2]).unwrap();
        let obs = RatingObservation::empty(4, 10);
        assert_eq!(
            sample_ratio_pool(&obs, &a, 2, Seed::new(0)),
            Err(Error::ExhaustedRedraws { cluster: 0, attempts: MAX_REDRAWS })
        );
    }

    #[test]
    fn gap_cluster_examples() {
        let est = gap_cluster(&[0.69, 0.21, 0.49, 0.71, 0.19, 0.51], 3, EPS).unwrap();
        for (got, want) in est.values.iter().zip([0.2, 0.5, 0.7]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(est.boundaries, vec![2, 4, 6]);
        assert!(!est.degenerate);

        let single = gap_cluster(&[0.1, 0.2, 0.6], 1, EPS).unwrap();
        assert!((single.values[0] - 0.3).abs() < 1e-12);

        let flat = gap_cluster(&[0.4; 5], 2, EPS).unwrap();
        assert!(flat.degenerate);
        assert_eq!(flat.boundaries, vec![1, 5]);
        assert!(flat.values[0] < flat.values[1]);

        assert_eq!(gap_cluster(&[0.5], 2, EPS), Err(Error::TooFewSamples { needed: 2, got: 1 }));
    }

    #[test]
    fn gap_cluster_clamps_extremes() {
        let est = gap_cluster(&[0.0, 0.0, 1.0, 1.0], 2, EPS).unwrap();
        assert_eq!(est.values, vec![EPS, 1.0 - EPS]);
        let top = gap_cluster(&[1.0, 1.0, 1.0], 3, EPS).unwrap();
        assert!(top.values.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(top.values.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn assign_prefers_extremes_for_one_sided_data() {
        let a = ClusterAssignment::new(vec![0; 3], 1).unwrap();
        let obs = obs_from(3, 3, &[(0, 0, 1), (1, 0, 1), (0, 1, -1), (2, 1, -1)]);
        let est = LevelEstimate { values: vec![0.2, 0.5, 0.7], boundaries: vec![], degenerate: false };
        let u = assign_levels(&obs, &a, &est).unwrap();
        assert_eq!(u, vec![vec![2, 0, 0]]);
    }

    #[test]
    fn unobserved_items_do_not_affect_others() {
        let a = ClusterAssignment::from_sizes(&[2, 2]).unwrap();
        let est = LevelEstimate { values: vec![0.3, 0.6], boundaries: vec![], degenerate: false };
        let full = obs_from(4, 3, &[(0, 0, 1), (1, 0, -1), (2, 2, 1), (3, 2, 1)]);
        // drop the never-rated item 1
        let reduced = obs_from(4, 2, &[(0, 0, 1), (1, 0, -1), (2, 1, 1), (3, 1, 1)]);
        let u_full = assign_levels(&full, &a, &est).unwrap();
        let u_red = assign_levels(&reduced, &a, &est).unwrap();
        for c in 0..2 {
            assert_eq!(vec![u_full[c][0], u_full[c][2]], u_red[c]);
        }
    }

    proptest! {
        #[test]
        fn gap_cluster_is_permutation_invariant_and_monotone(
            mut xs in prop::collection::vec(0.0f64..1.0, 3..40),
            d in 1usize..4,
            rot in 0usize..40,
        ) {
            let est = gap_cluster(&xs, d, EPS).unwrap();
            let r = rot % xs.len();
            xs.rotate_left(r);
            xs.reverse();
            prop_assert_eq!(&gap_cluster(&xs, d, EPS).unwrap(), &est);
            prop_assert!(est.values.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn gap_cluster_recovers_separated_values(
            base in prop::collection::vec(0.05f64..0.95, 1..5),
            reps in prop::collection::vec(1usize..5, 5),
        ) {
            let mut levels = base.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            let mut xs = Vec::new();
            for (i, &v) in levels.iter().enumerate() {
                xs.extend(std::iter::repeat(v).take(reps[i]));
            }
            let est = gap_cluster(&xs, levels.len(), EPS).unwrap();
            prop_assert_eq!(est.values, levels);
        }
    }
}
