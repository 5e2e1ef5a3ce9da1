//! Information quantities and sample-complexity thresholds.
//!
//! Levels are compared through the Hellinger distance between the Bernoulli
//! distributions `(p, 1 - p)`. The rating side of the threshold is governed by
//! the closest pair of levels, the graph side by
//! `I_s = -2 log(1 - d_H(alpha, beta)^2)`.
//!
//! All thresholds are the sharp constants (no `1 +- eps` slack) and are floored
//! at zero.

use crate::error::{Error, Result};
use crate::model::LevelSet;

/// Relative tolerance under which two Hellinger distances count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Which argument of the outer `max` determines `p*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingTerm {
    GraphTerm,
    RatingTerm,
}

impl BindingTerm {
    pub fn as_str(self) -> &'static str {
        match self {
            BindingTerm::GraphTerm => "graph_term",
            BindingTerm::RatingTerm => "rating_term",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub d_h_min: f64,
    /// Adjacent level indices `(d0, d0 + 1)` achieving `d_h_min`.
    pub min_pair: (usize, usize),
    pub i_s: f64,
    pub graph_term: f64,
    pub rating_term: f64,
    pub p_star: f64,
    /// `n * m * p_star`.
    pub sample_complexity: f64,
    pub binding_term: BindingTerm,
}

/// Hellinger distance between `(p_i, 1 - p_i)` and `(p_j, 1 - p_j)`.
pub fn hellinger(p_i: f64, p_j: f64) -> Result<f64> {
    for p in [p_i, p_j] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::LevelOutOfRange(p));
        }
    }
    Ok(hellinger_unchecked(p_i, p_j))
}

fn hellinger_unchecked(a: f64, b: f64) -> f64 {
    let s = (a.sqrt() - b.sqrt()).powi(2) + ((1.0 - a).sqrt() - (1.0 - b).sqrt()).powi(2);
    (0.5 * s).sqrt()
}

/// Minimum pairwise Hellinger distance over `levels`.
///
/// All pairs are scanned; the minimizer is adjacent for sorted levels, and ties
/// (within a relative 1e-12) go to the lowest index.
pub fn min_hellinger(levels: &LevelSet) -> Result<(f64, (usize, usize))> {
    let v = levels.values();
    if v.len() < 2 {
        return Err(Error::SingleLevel);
    }
    let mut best: Option<(f64, (usize, usize))> = None;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            let d = hellinger_unchecked(v[i], v[j]);
            let better = match best {
                None => true,
                Some((b, _)) => d < b * (1.0 - TIE_TOLERANCE),
            };
            if better {
                best = Some((d, (i, j)));
            }
        }
    }
    let (d, pair) = best.expect("at least one pair");
    debug_assert_eq!(pair.1, pair.0 + 1, "minimizing pair of sorted levels is adjacent");
    Ok((d, pair))
}

/// `I_s = -2 log(1 - d_H(alpha, beta)^2)`; zero when `alpha == beta`.
pub fn graph_information(alpha: f64, beta: f64) -> Result<f64> {
    for p in [alpha, beta] {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
    }
    if alpha == beta {
        return Ok(0.0);
    }
    // squared differences keep d_H^2 accurate when alpha is close to beta
    let h2 = ((alpha.sqrt() - beta.sqrt()).powi(2) + ((1.0 - alpha).sqrt() - (1.0 - beta).sqrt()).powi(2)) / 2.0;
    Ok(-2.0 * (-h2).ln_1p())
}

/// Optimal observation rate for two equal-sized clusters whose vectors differ
/// on a `gamma` fraction of items.
pub fn optimal_rate_two_cluster(
    n: usize,
    m: usize,
    gamma: f64,
    alpha: f64,
    beta: f64,
    levels: &LevelSet,
) -> Result<ThresholdReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let (d_h_min, min_pair) = min_hellinger(levels)?;
    let i_s = graph_information(alpha, beta)?;
    let (nf, mf) = (n as f64, m as f64);
    let d2 = d_h_min * d_h_min;
    let graph_term = (nf.ln() - 0.5 * nf * i_s) / (gamma * mf) / d2;
    let rating_term = 2.0 * mf.ln() / nf / d2;
    Ok(report(n, m, d_h_min, min_pair, i_s, graph_term, rating_term))
}

fn report(
    n: usize,
    m: usize,
    d_h_min: f64,
    min_pair: (usize, usize),
    i_s: f64,
    graph_term: f64,
    rating_term: f64,
) -> ThresholdReport {
    let binding_term = if graph_term > rating_term {
        BindingTerm::GraphTerm
    } else {
        BindingTerm::RatingTerm
    };
    let p_star = graph_term.max(rating_term).max(0.0);
    ThresholdReport {
        d_h_min,
        min_pair,
        i_s,
        graph_term,
        rating_term,
        p_star,
        sample_complexity: n as f64 * m as f64 * p_star,
        binding_term,
    }
}

/// Projects a level vector onto the closest pair `{p_d0, p_d0+1}`: values at or
/// below `p_d0` map to `p_d0`, values at or above `p_d0+1` map to `p_d0+1`.
pub fn collapse_map(vector: &[f64], levels: &LevelSet) -> Result<Vec<f64>> {
    let (_, (lo, hi)) = min_hellinger(levels)?;
    let (p_lo, p_hi) = (levels.get(lo), levels.get(hi));
    vector
        .iter()
        .map(|&x| {
            if levels.index_of(x).is_none() {
                Err(Error::InvalidModel(format!("{x} is not a level")))
            } else if x <= p_lo {
                Ok(p_lo)
            } else {
                Ok(p_hi)
            }
        })
        .collect()
}

/// Cluster sizes, latent vectors and graph parameters for the multi-cluster threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiClusterSpec {
    pub cluster_sizes: Vec<usize>,
    pub vectors: Vec<Vec<f64>>,
    pub levels: LevelSet,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl MultiClusterSpec {
    pub fn new(
        cluster_sizes: Vec<usize>,
        vectors: Vec<Vec<f64>>,
        levels: LevelSet,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if cluster_sizes.len() != vectors.len() {
            return Err(Error::InvalidModel("one vector per cluster is required".into()));
        }
        if cluster_sizes.len() < 2 {
            return Err(Error::InvalidModel("at least two clusters are required".into()));
        }
        if cluster_sizes.contains(&0) {
            return Err(Error::InvalidModel("cluster sizes must be positive".into()));
        }
        let m = vectors[0].len();
        if vectors.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidModel("vectors differ in length".into()));
        }
        if let Some(x) = vectors.iter().flatten().find(|&&x| levels.index_of(x).is_none()) {
            return Err(Error::InvalidModel(format!("{x} is not a level")));
        }
        Ok(MultiClusterSpec { cluster_sizes, vectors, levels, m, alpha, beta })
    }

    pub fn n(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }
}

/// Multi-cluster optimal observation rate.
///
/// Graph term: `max_{i != j} (log n - c_ij I_s) / |P(u_i) - P(u_j)|_0` with
/// `c_ij = (c_i + c_j) / 2`; rating term: `max_k log m / c_k`; both divided by
/// `d_H_min^2`.
pub fn optimal_rate_multi(spec: &MultiClusterSpec) -> Result<ThresholdReport> {
    let (d_h_min, min_pair) = min_hellinger(&spec.levels)?;
    let i_s = graph_information(spec.alpha, spec.beta)?;
    let collapsed = spec
        .vectors
        .iter()
        .map(|v| collapse_map(v, &spec.levels))
        .collect::<Result<Vec<_>>>()?;
    let n = spec.n();
    let (nf, mf) = (n as f64, spec.m as f64);
    let d2 = d_h_min * d_h_min;
    let k = spec.cluster_sizes.len();

    let mut graph_term = f64::NEG_INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let dist = collapsed[i].iter().zip(&collapsed[j]).filter(|(a, b)| a != b).count();
            if dist == 0 {
                return Err(Error::DegeneratePair(i, j));
            }
            let c_ij = 0.5 * (spec.cluster_sizes[i] + spec.cluster_sizes[j]) as f64;
            graph_term = graph_term.max((nf.ln() - c_ij * i_s) / dist as f64);
        }
    }
    let rating_term = spec
        .cluster_sizes
        .iter()
        .map(|&c| mf.ln() / c as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(report(n, spec.m, d_h_min, min_pair, i_s, graph_term / d2, rating_term / d2))
}

/// Expected test MAE of the estimator that outputs `R` itself:
/// `2 * mean(R (1 - R) + (1 - R) R)`.
pub fn expected_optimal_mae(r: &ndarray::Array2<f64>) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    let total: f64 = r.iter().map(|&x| x * (1.0 - x) + (1.0 - x) * x).sum();
    2.0 * total / r.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn levels(v: &[f64]) -> LevelSet {
        LevelSet::new(v).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Reference values below were evaluated at 40 significant digits.

    #[test]
    fn hellinger_values() {
        assert_eq!(hellinger(0.3, 0.3).unwrap(), 0.0);
        assert!(close(hellinger(0.5, 0.7).unwrap(), 0.145_236_658_834_113_6, 1e-15));
        let h = hellinger(0.25, 0.75).unwrap();
        assert!(close(h * h, 0.133_974_596_215_561_35, 1e-15));
        assert!(matches!(hellinger(0.0, 0.5), Err(Error::LevelOutOfRange(_))));
    }

    #[test]
    fn min_hellinger_examples() {
        let (d, pair) = min_hellinger(&levels(&[0.2, 0.5, 0.7])).unwrap();
        assert_eq!(pair, (1, 2));
        assert!(close(d * d, 0.021_093_687_069_296_707, 1e-15));

        let (_, pair) = min_hellinger(&levels(&[0.25, 0.75])).unwrap();
        assert_eq!(pair, (0, 1));

        // symmetric construction: both pairs tie, lower index wins
        let (_, pair) = min_hellinger(&levels(&[0.05, 0.5, 0.95])).unwrap();
        assert_eq!(pair, (0, 1));

        assert_eq!(min_hellinger(&levels(&[0.5])), Err(Error::SingleLevel));
    }

    #[test]
    fn graph_information_values() {
        assert_eq!(graph_information(0.4, 0.4).unwrap(), 0.0);
        assert!(close(graph_information(0.26, 0.23).unwrap(), 0.001_217_642_821_550_163_8, 1e-17));
        assert!(close(graph_information(0.27, 0.23).unwrap(), 0.002_137_137_839_724_290_2, 1e-17));
        assert!(graph_information(1.0, 0.2).is_err());
    }

    #[test]
    fn two_cluster_thresholds() {
        let l = levels(&[0.2, 0.5, 0.7]);
        let former = optimal_rate_two_cluster(10_000, 5_000, 0.25, 0.26, 0.23, &l).unwrap();
        assert!(close(former.p_star, 0.118_409_882_690_251_16, 1e-12));
        assert_eq!(former.binding_term, BindingTerm::GraphTerm);
        assert_eq!(former.min_pair, (1, 2));
        assert!(close(former.sample_complexity, 5e7 * former.p_star, 1e-6));

        let latter = optimal_rate_two_cluster(10_000, 5_000, 0.25, 0.27, 0.23, &l).unwrap();
        assert!(close(latter.p_star, 0.080_755_850_444_122_59, 1e-12));
        assert_eq!(latter.binding_term, BindingTerm::RatingTerm);
        assert!(latter.graph_term < 0.0);
    }

    #[test]
    fn no_graph_reduction() {
        let l = levels(&[0.25, 0.75]);
        let r = optimal_rate_two_cluster(10_000, 5_000, 0.25, 0.1, 0.1, &l).unwrap();
        assert_eq!(r.i_s, 0.0);
        assert!(close(r.p_star, 0.054_997_533_157_148_714, 1e-12));
    }

    #[test]
    fn threshold_errors() {
        let l = levels(&[0.2, 0.5]);
        assert_eq!(
            optimal_rate_two_cluster(10, 10, 1.0, 0.3, 0.2, &l),
            Err(Error::InvalidGamma(1.0))
        );
        assert_eq!(
            optimal_rate_two_cluster(10, 10, 0.5, 0.3, 0.2, &levels(&[0.5])),
            Err(Error::SingleLevel)
        );
    }

    #[test]
    fn floors_at_zero() {
        // both terms negative is impossible (rating term > 0), but a huge I_s
        // must never make p* negative
        let l = levels(&[0.2, 0.8]);
        let r = optimal_rate_two_cluster(1000, 10, 0.5, 0.9, 0.01, &l).unwrap();
        assert!(r.p_star >= 0.0);
    }

    #[test]
    fn collapse_map_examples() {
        let l = levels(&[0.2, 0.5, 0.7]);
        assert_eq!(collapse_map(&[0.2, 0.5, 0.7], &l).unwrap(), vec![0.5, 0.5, 0.7]);
        assert_eq!(collapse_map(&[0.5, 0.7, 0.7], &l).unwrap(), vec![0.5, 0.7, 0.7]);
        assert_eq!(collapse_map(&[0.2; 4], &l).unwrap(), vec![0.5; 4]);
        assert!(collapse_map(&[0.3], &l).is_err());
        assert_eq!(collapse_map(&[0.5], &levels(&[0.5])), Err(Error::SingleLevel));
    }

    fn three_cluster_vectors() -> Vec<Vec<f64>> {
        let blocks = [
            [0.05, 0.05, 0.5, 0.95, 0.95],
            [0.05, 0.95, 0.05, 0.05, 0.05],
            [0.95; 5],
        ];
        blocks.iter().map(|b| (0..1000).map(|j| b[j / 200]).collect()).collect()
    }

    #[test]
    fn three_cluster_threshold_regression() {
        let l = levels(&[0.05, 0.5, 0.95]);
        let spec = MultiClusterSpec::new(vec![467, 590, 580], three_cluster_vectors(), l.clone(), 0.1, 0.02).unwrap();
        let r = optimal_rate_multi(&spec).unwrap();
        assert!(r.p_star.is_finite() && r.p_star > 0.0);
        assert!(close(r.p_star, 0.096_878_508_901_940_177, 1e-12));
        assert_eq!(r.binding_term, BindingTerm::RatingTerm);

        let flat = MultiClusterSpec::new(vec![467, 590, 580], three_cluster_vectors(), l, 0.05, 0.05).unwrap();
        let r = optimal_rate_multi(&flat).unwrap();
        assert!(close(r.p_star, 0.121_175_698_134_208_35, 1e-12));
        assert_eq!(r.binding_term, BindingTerm::GraphTerm);
    }

    #[test]
    fn multi_matches_two_cluster() {
        let l = levels(&[0.2, 0.5, 0.7]);
        let (n, m, gamma) = (10_000usize, 5_000usize, 0.25);
        // differ on exactly gamma * m = 1250 items after collapsing
        let u: Vec<f64> = (0..m).map(|j| if j < 1250 { 0.7 } else { 0.2 }).collect();
        let v: Vec<f64> = vec![0.5; m];
        for alpha in [0.23, 0.26, 0.27, 0.4] {
            let spec = MultiClusterSpec::new(vec![n / 2, n / 2], vec![u.clone(), v.clone()], l.clone(), alpha, 0.23)
                .unwrap();
            let multi = optimal_rate_multi(&spec).unwrap();
            let two = optimal_rate_two_cluster(n, m, gamma, alpha, 0.23, &l).unwrap();
            assert!(close(multi.p_star, two.p_star, 1e-12), "{} vs {}", multi.p_star, two.p_star);
            assert_eq!(multi.binding_term, two.binding_term);
        }
    }

    #[test]
    fn equal_sizes_equal_distances_tie() {
        let l = levels(&[0.3, 0.7]);
        let vs = vec![
            vec![0.3, 0.3, 0.7, 0.7],
            vec![0.7, 0.3, 0.3, 0.7],
            vec![0.3, 0.7, 0.3, 0.7],
        ];
        let spec = MultiClusterSpec::new(vec![10, 10, 10], vs, l, 0.3, 0.3).unwrap();
        let r = optimal_rate_multi(&spec).unwrap();
        let d2 = r.d_h_min * r.d_h_min;
        assert!(close(r.graph_term, (30f64).ln() / 2.0 / d2, 1e-12));
    }

    #[test]
    fn degenerate_pair_rejected() {
        let l = levels(&[0.2, 0.5, 0.7]);
        // 0.2 and 0.5 collapse to the same value
        let spec =
            MultiClusterSpec::new(vec![5, 5], vec![vec![0.2, 0.7], vec![0.5, 0.7]], l, 0.3, 0.2).unwrap();
        assert_eq!(optimal_rate_multi(&spec), Err(Error::DegeneratePair(0, 1)));
    }

    #[test]
    fn optimal_mae_values() {
        assert_eq!(expected_optimal_mae(&Array2::zeros((3, 3))), 0.0);
        assert_eq!(expected_optimal_mae(&Array2::ones((3, 3))), 0.0);
        assert_eq!(expected_optimal_mae(&Array2::from_elem((2, 5), 0.5)), 1.0);
        let rows = [(467, [0.05, 0.05, 0.5, 0.95, 0.95]), (590, [0.05, 0.95, 0.05, 0.05, 0.05]), (580, [0.95; 5])];
        let mut r = Array2::zeros((1637, 1000));
        let mut start = 0;
        for (size, blocks) in rows {
            for i in start..start + size {
                for j in 0..1000 {
                    r[[i, j]] = blocks[j / 200];
                }
            }
            start += size;
        }
        assert!(close(expected_optimal_mae(&r), 0.236, 1e-3));
    }

    #[test]
    fn asymptotic_expansion_of_graph_information() {
        // relative error (exact - approx) / exact from a 40-digit evaluation
        let expected = [
            -0.004943023153466809,
            -0.009873226639909105,
            -0.014790792947088101,
            -0.019695900152486855,
            -0.024588722071257306,
            -0.029469428397844395,
            -0.03433818484161454,
            -0.039195153256795824,
            -0.044040491767018866,
            -0.04887435488473011,
        ];
        let beta: f64 = 0.010;
        for (step, want) in (1..=10).zip(expected) {
            let alpha = 0.0100 + 0.0001 * step as f64;
            let exact = graph_information(alpha, beta).unwrap();
            let (sa, sb) = (alpha.sqrt(), beta.sqrt());
            let approx = (sa - sb).powi(2) * (sa + sb).powi(2) / (4.0 * beta * (1.0 - beta));
            let rel = (exact - approx) / exact;
            assert!((rel - want).abs() < 1e-6, "alpha = {alpha}: {rel}");
            // the error vanishes linearly in (alpha - beta) / beta
            assert!((rel.abs() / ((alpha - beta) / beta) - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn symmetric_levels_identity() {
        for t in 1..=9 {
            let theta = 0.05 * t as f64;
            let (d, _) = min_hellinger(&levels(&[theta, 1.0 - theta])).unwrap();
            let closed = ((1.0 - theta).sqrt() - theta.sqrt()).powi(2);
            assert!(close(d * d, closed, 1e-12), "theta = {theta}");
        }
    }

    proptest! {
        #[test]
        fn hellinger_symmetric_and_zero_iff_equal(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            prop_assert_eq!(hellinger(a, b).unwrap(), hellinger(b, a).unwrap());
            prop_assert_eq!(hellinger(a, b).unwrap() == 0.0, a == b);
            prop_assert_eq!(hellinger(a, a).unwrap(), 0.0);
        }

        #[test]
        fn p_star_monotone_in_gamma(g1 in 0.05f64..0.95, g2 in 0.05f64..0.95, alpha in 0.2f64..0.5) {
            let l = levels(&[0.2, 0.5, 0.7]);
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let a = optimal_rate_two_cluster(10_000, 5_000, lo, alpha, 0.2, &l).unwrap();
            let b = optimal_rate_two_cluster(10_000, 5_000, hi, alpha, 0.2, &l).unwrap();
            prop_assert!(b.p_star <= a.p_star + 1e-15);
        }

        #[test]
        fn p_star_monotone_in_graph_information(a1 in 0.20f64..0.30, a2 in 0.20f64..0.30) {
            let l = levels(&[0.2, 0.5, 0.7]);
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            // beta = 0.2 <= alpha, so I_s grows with alpha
            let weak = optimal_rate_two_cluster(10_000, 5_000, 0.25, lo, 0.2, &l).unwrap();
            let strong = optimal_rate_two_cluster(10_000, 5_000, 0.25, hi, 0.2, &l).unwrap();
            prop_assert!(strong.i_s >= weak.i_s);
            prop_assert!(strong.p_star <= weak.p_star + 1e-15);
            if weak.binding_term == BindingTerm::RatingTerm {
                prop_assert_eq!(strong.p_star, weak.p_star);
            }
        }
    }
}
