//! Seeded generators for the observation model: stochastic block model graphs
//! (optionally with per-pair uniform noise), Bernoulli rating masks and
//! train/test splits.
//!
//! Every generator takes a [`Seed`] and is a pure function of its inputs.
//! Child streams are derived with [`Seed::child`] so that independent trials
//! never share RNG state.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, Rating, RatingObservation, SocialGraph};

/// Root of a deterministic RNG stream.
///
/// `child(tag, index)` mixes the tag (FNV-1a) and the index into the parent
/// value with splitmix64 finalizers, so streams for different purposes or
/// trials are decorrelated and independent of evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(u64);

impl Seed {
    pub fn new(root: u64) -> Self {
        Seed(root)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn child(self, tag: &str, index: u64) -> Seed {
        let mut state = splitmix64(self.0 ^ fnv1a(tag.as_bytes()));
        state = splitmix64(state ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        Seed(state)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Edge probabilities of a symmetric SBM, with optional uniform noise of
/// half-width `noise_theta` on every pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmParams {
    pub alpha: f64,
    pub beta: f64,
    pub noise_theta: f64,
}

impl SbmParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_noise(alpha, beta, 0.0)
    }

    pub fn with_noise(alpha: f64, beta: f64, noise_theta: f64) -> Result<Self> {
        for p in [alpha, beta] {
            check_probability(p)?;
        }
        if !(noise_theta >= 0.0 && noise_theta.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise theta {noise_theta} must be a nonnegative number")));
        }
        Ok(SbmParams { alpha, beta, noise_theta })
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Samples a graph with edge probability `alpha` inside clusters and `beta`
/// across them. Pairs are visited in `i < j` lexicographic order.
pub fn sample_sbm(assignment: &ClusterAssignment, params: SbmParams, seed: Seed) -> Result<SocialGraph> {
    if params.noise_theta != 0.0 {
        return Err(Error::InvalidConfig(
            "sample_sbm requires noise_theta = 0; use sample_noisy_sbm".into(),
        ));
    }
    sample_noisy_sbm(assignment, params, seed)
}

/// Noisy SBM: each unordered pair gets `q ~ U[-theta, theta]` and an edge with
/// probability `clamp(base + q, 0, 1)`. With `theta = 0` no noise is drawn and
/// the output is identical to [`sample_sbm`] for the same seed.
pub fn sample_noisy_sbm(assignment: &ClusterAssignment, params: SbmParams, seed: Seed) -> Result<SocialGraph> {
    check_probability(params.alpha)?;
    check_probability(params.beta)?;
    let n = assignment.n();
    let theta = params.noise_theta;
    let labels = assignment.labels();
    let mut rng = seed.rng();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let base = if labels[i] == labels[j] { params.alpha } else { params.beta };
            let prob = if theta > 0.0 {
                let q: f64 = rng.gen_range(-theta..=theta);
                (base + q).clamp(0.0, 1.0)
            } else {
                base
            };
            if rng.gen::<f64>() < prob {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    Ok(SocialGraph::from_sorted_adjacency(adjacency))
}

/// Reveals each entry independently with probability `p`; a revealed entry is
/// `+1` with probability `R[i][j]` and `-1` otherwise.
pub fn sample_ratings(r: &Array2<f64>, p: f64, seed: Seed) -> Result<RatingObservation> {
    check_probability(p)?;
    if let Some(&bad) = r.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidProbability(bad));
    }
    let (n, m) = r.dim();
    let mut rng = seed.rng();
    let mut entries = Vec::new();
    for i in 0..n {
        for j in 0..m {
            if rng.gen::<f64>() < p {
                let value = if rng.gen::<f64>() < r[[i, j]] { 1 } else { -1 };
                entries.push(Rating { user: i, item: j, value });
            }
        }
    }
    RatingObservation::new(n, m, entries)
}

/// Random disjoint split; the train part has `round(fraction * |obs|)` entries.
pub fn split_train_test(
    obs: &RatingObservation,
    train_fraction: f64,
    seed: Seed,
) -> Result<(RatingObservation, RatingObservation)> {
    if obs.is_empty() {
        return Err(Error::EmptyObservation);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.shuffle(&mut seed.rng());
    let n_train = (train_fraction * obs.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&e| obs.entries()[e]).collect::<Vec<_>>();
    let train = RatingObservation::new(obs.n(), obs.m(), pick(&order[..n_train]))?;
    let test = RatingObservation::new(obs.n(), obs.m(), pick(&order[n_train..]))?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn count_edges(g: &SocialGraph, a: &ClusterAssignment) -> (usize, usize) {
        g.edges().fold((0, 0), |(intra, inter), (u, v)| {
            if a.label(u) == a.label(v) {
                (intra + 1, inter)
            } else {
                (intra, inter + 1)
            }
        })
    }

    fn within_sigmas(observed: f64, trials: f64, prob: f64, sigmas: f64) -> bool {
        let mean = trials * prob;
        let sd = (trials * prob * (1.0 - prob)).sqrt();
        (observed - mean).abs() <= sigmas * sd
    }

    #[test]
    fn child_streams_are_deterministic_and_distinct() {
        let s = Seed::new(7);
        assert_eq!(s.child("graph", 3), s.child("graph", 3));
        assert_ne!(s.child("graph", 3), s.child("graph", 4));
        assert_ne!(s.child("graph", 3), s.child("ratings", 3));
    }

    #[test]
    fn deterministic_edges_form_cliques() {
        let a = ClusterAssignment::from_sizes(&[4, 5]).unwrap();
        let g = sample_sbm(&a, SbmParams::new(1.0, 0.0).unwrap(), Seed::new(1)).unwrap();
        assert_eq!(g.edge_count(), 6 + 10);
        assert_eq!(count_edges(&g, &a), (16, 0));
        let empty = sample_sbm(&a, SbmParams::new(0.0, 0.0).unwrap(), Seed::new(1)).unwrap();
        assert_eq!(empty.edge_count(), 0);
    }

    #[test]
    fn rejects_invalid_probabilities() {
        assert_eq!(SbmParams::new(1.2, 0.1), Err(Error::InvalidProbability(1.2)));
        let r = Array2::from_elem((2, 2), 0.5);
        assert_eq!(sample_ratings(&r, -0.1, Seed::new(0)).unwrap_err(), Error::InvalidProbability(-0.1));
        let bad = Array2::from_elem((1, 1), 1.5);
        assert!(sample_ratings(&bad, 0.5, Seed::new(0)).is_err());
    }

    #[test]
    fn sbm_edge_counts_concentrate() {
        let a = ClusterAssignment::from_sizes(&[1000, 1000]).unwrap();
        let g = sample_sbm(&a, SbmParams::new(0.7, 0.3).unwrap(), Seed::new(11)).unwrap();
        let (intra, inter) = count_edges(&g, &a);
        let intra_pairs = 2.0 * (1000.0 * 999.0 / 2.0);
        assert!(within_sigmas(intra as f64, intra_pairs, 0.7, 4.0), "intra = {intra}");
        assert!(within_sigmas(inter as f64, 1e6, 0.3, 4.0), "inter = {inter}");
    }

    #[test]
    fn zero_noise_matches_plain_sbm() {
        let a = ClusterAssignment::from_sizes(&[30, 30]).unwrap();
        let seed = Seed::new(5);
        let plain = sample_sbm(&a, SbmParams::new(0.4, 0.1).unwrap(), seed).unwrap();
        let noisy = sample_noisy_sbm(&a, SbmParams::with_noise(0.4, 0.1, 0.0).unwrap(), seed).unwrap();
        assert_eq!(plain, noisy);
    }

    #[test]
    fn noise_keeps_mean_edge_rate() {
        // 0.7 +- 0.3 stays inside [0, 1], so clamping never triggers and E[q] = 0.
        let a = ClusterAssignment::from_sizes(&[1000, 1000]).unwrap();
        let g = sample_noisy_sbm(&a, SbmParams::with_noise(0.7, 0.3, 0.3).unwrap(), Seed::new(3)).unwrap();
        let (intra, _) = count_edges(&g, &a);
        let pairs = 999_000.0;
        // Var of a Bernoulli(0.7 + q) mixture is 0.7 * 0.3 since E[q] = 0.
        assert!(within_sigmas(intra as f64, pairs, 0.7, 4.0), "intra = {intra}");
    }

    #[test]
    fn within_cluster_exchangeability() {
        // Contiguous and interleaved labelings share cluster sizes, so their
        // intra/inter edge count distributions must coincide.
        let contiguous = ClusterAssignment::from_sizes(&[20, 20]).unwrap();
        let interleaved = ClusterAssignment::new((0..40).map(|i| i % 2).collect(), 2).unwrap();
        let params = SbmParams::new(0.6, 0.2).unwrap();
        let trials = 300;
        let stats = |a: &ClusterAssignment, tag: &str| {
            let counts: Vec<f64> = (0..trials)
                .map(|t| count_edges(&sample_sbm(a, params, Seed::new(9).child(tag, t)).unwrap(), a).0 as f64)
                .collect();
            let mean = counts.iter().sum::<f64>() / trials as f64;
            let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
            (mean, var)
        };
        let (m1, v1) = stats(&contiguous, "a");
        let (m2, v2) = stats(&interleaved, "b");
        // intra pairs = 380, Var = 380 * 0.24 = 91.2
        let se = (2.0 * 91.2 / trials as f64).sqrt();
        assert!((m1 - m2).abs() < 4.0 * se, "means {m1} vs {m2}");
        assert!((v1 / v2 - 1.0).abs() < 0.45, "variances {v1} vs {v2}");
    }

    #[test]
    fn rating_extremes() {
        let r = Array2::from_elem((5, 4), 1.0);
        assert!(sample_ratings(&r, 0.0, Seed::new(0)).unwrap().is_empty());
        let all = sample_ratings(&r, 1.0, Seed::new(0)).unwrap();
        assert_eq!(all.len(), 20);
        assert!(all.entries().iter().all(|e| e.value == 1));
    }

    #[test]
    fn rating_sign_fraction_concentrates() {
        let r = Array2::from_elem((1000, 1000), 0.3);
        let obs = sample_ratings(&r, 0.5, Seed::new(21)).unwrap();
        let plus = obs.entries().iter().filter(|e| e.value == 1).count();
        assert!(within_sigmas(plus as f64, obs.len() as f64, 0.3, 4.0));
        assert!(within_sigmas(obs.len() as f64, 1e6, 0.5, 4.0));
    }

    #[test]
    fn rating_blocks_pass_chi_square() {
        // three column blocks at 0.2 / 0.5 / 0.7; df = 3, critical value at 1e-3 is 16.266
        let levels = [0.2, 0.5, 0.7];
        let r = Array2::from_shape_fn((300, 600), |(_, j)| levels[j / 200]);
        let obs = sample_ratings(&r, 0.8, Seed::new(4)).unwrap();
        assert!(obs.len() >= 100_000);
        let mut plus = [0f64; 3];
        let mut total = [0f64; 3];
        for e in obs.entries() {
            let b = e.item / 200;
            total[b] += 1.0;
            if e.value == 1 {
                plus[b] += 1.0;
            }
        }
        let chi2: f64 = (0..3)
            .map(|b| {
                let exp = total[b] * levels[b];
                (plus[b] - exp).powi(2) / (total[b] * levels[b] * (1.0 - levels[b]))
            })
            .sum();
        assert!(chi2 < 16.266, "chi2 = {chi2}");
    }

    #[test]
    fn split_sizes_and_partition() {
        let entries: Vec<Rating> =
            (0..10).map(|j| Rating { user: j % 2, item: j, value: if j % 3 == 0 { 1 } else { -1 } }).collect();
        let obs = RatingObservation::new(2, 10, entries).unwrap();
        let (train, test) = split_train_test(&obs, 0.8, Seed::new(1)).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let a: HashSet<Rating> = train.entries().iter().copied().collect();
        let b: HashSet<Rating> = test.entries().iter().copied().collect();
        assert!(a.is_disjoint(&b));
        let all: HashSet<Rating> = obs.entries().iter().copied().collect();
        assert_eq!(a.union(&b).copied().collect::<HashSet<_>>(), all);

        let again = split_train_test(&obs, 0.8, Seed::new(1)).unwrap();
        assert_eq!(again.0, train);
        let other = split_train_test(&obs, 0.8, Seed::new(2)).unwrap();
        assert_ne!(other.0, train);
    }

    #[test]
    fn split_errors() {
        let empty = RatingObservation::empty(2, 2);
        assert_eq!(split_train_test(&empty, 0.8, Seed::new(0)).unwrap_err(), Error::EmptyObservation);
        let one = RatingObservation::new(1, 1, vec![Rating { user: 0, item: 0, value: 1 }]).unwrap();
        assert_eq!(split_train_test(&one, 1.0, Seed::new(0)).unwrap_err(), Error::InvalidFraction(1.0));
    }

    #[test]
    fn generators_are_deterministic() {
        let a = ClusterAssignment::from_sizes(&[10, 12]).unwrap();
        let p = SbmParams::with_noise(0.5, 0.2, 0.1).unwrap();
        assert_eq!(
            sample_noisy_sbm(&a, p, Seed::new(8)).unwrap(),
            sample_noisy_sbm(&a, p, Seed::new(8)).unwrap()
        );
        let r = Array2::from_elem((10, 10), 0.4);
        assert_eq!(sample_ratings(&r, 0.3, Seed::new(8)).unwrap(), sample_ratings(&r, 0.3, Seed::new(8)).unwrap());
    }
}
