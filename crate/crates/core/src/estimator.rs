//! End-to-end estimation, the exact likelihood, and a brute-force oracle.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::levels::{assign_from_counts, gap_cluster, sample_pool_from_counts, ClusterItemCounts, LevelEstimate};
use crate::model::{ClusterAssignment, LevelSet, PreferenceModel, RatingObservation, SocialGraph};
use crate::refine::{stage2ii, GraphParamEstimate, RefinementTrace};
use crate::spectral::{alt_stage1, stage1, SpectralConfig};
use crate::synth::Seed;

/// Which partial-recovery stage starts the pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Stage1Variant {
    /// Spectral clustering of the social graph.
    #[default]
    GraphOnly,
    /// Spectral clustering of the masked `[G | N]` matrix.
    InformationSplit,
}

impl Stage1Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage1Variant::GraphOnly => "graph_only",
            Stage1Variant::InformationSplit => "information_split",
        }
    }
}

impl std::str::FromStr for Stage1Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graph_only" => Ok(Stage1Variant::GraphOnly),
            "information_split" => Ok(Stage1Variant::InformationSplit),
            other => Err(Error::InvalidConfig(format!("unknown stage1 variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Number of clusters.
    pub k: usize,
    /// Number of levels.
    pub d: usize,
    /// Outer iterations of level recovery and refinement.
    pub l_max: usize,
    pub seed: Seed,
    pub clamp: f64,
    pub stage1: Stage1Variant,
    pub spectral: SpectralConfig,
}

impl EstimatorConfig {
    pub fn new(k: usize, d: usize, seed: Seed) -> Self {
        EstimatorConfig {
            k,
            d,
            l_max: 2,
            seed,
            clamp: 1e-6,
            stage1: Stage1Variant::GraphOnly,
            spectral: SpectralConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.l_max == 0 {
            return Err(Error::InvalidConfig("K, d and l_max must be at least 1".into()));
        }
        if !(self.clamp > 0.0 && self.clamp < 0.5) {
            return Err(Error::InvalidConfig(format!("clamp {} outside (0, 0.5)", self.clamp)));
        }
        Ok(())
    }
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub levels: LevelEstimate,
    pub params: GraphParamEstimate,
    pub refinement: RefinementTrace,
    /// Labels after refinement.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub clusters: ClusterAssignment,
    pub levels: LevelEstimate,
    /// Level indices of each cluster's estimated vector.
    pub vectors: Vec<Vec<usize>>,
    pub matrix: Array2<f64>,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub stage1_labels: Vec<usize>,
    pub iterations: Vec<IterationTrace>,
}

impl EstimationResult {
    pub fn vector_values(&self, k: usize) -> Vec<f64> {
        self.vectors[k].iter().map(|&h| self.levels.values[h]).collect()
    }

    /// The estimate as a model over the estimated levels.
    pub fn model(&self) -> Result<PreferenceModel> {
        PreferenceModel::new(LevelSet::new(&self.levels.values)?, self.clusters.clone(), self.vectors.clone())
    }
}

fn first_empty(labels: &[usize], k: usize) -> Option<usize> {
    let mut seen = vec![false; k];
    labels.iter().for_each(|&l| seen[l] = true);
    seen.iter().position(|&s| !s)
}

/// Runs partial recovery, then `l_max` rounds of level recovery and refinement.
///
/// ```
/// use preflex::{estimate, sample_ratings, sample_sbm, EstimatorConfig, LevelSet, PreferenceModel, SbmParams, Seed};
///
/// let levels = LevelSet::new(&[0.2, 0.8]).unwrap();
/// let truth = PreferenceModel::from_blocks(levels, &[100, 100], &[vec![0, 1], vec![1, 0]], 100).unwrap();
/// let graph = sample_sbm(truth.assignment(), SbmParams::new(0.5, 0.1).unwrap(), Seed::new(1)).unwrap();
/// let ratings = sample_ratings(&truth.induce_matrix(), 0.3, Seed::new(2)).unwrap();
///
/// let result = estimate(&ratings, &graph, &EstimatorConfig::new(2, 2, Seed::new(3))).unwrap();
/// assert_eq!(result.matrix.dim(), (200, 100));
/// ```
pub fn estimate(obs: &RatingObservation, graph: &SocialGraph, config: &EstimatorConfig) -> Result<EstimationResult> {
    config.validate()?;
    if obs.n() != graph.n() {
        return Err(Error::DimensionMismatch(format!("graph has {} users, ratings have {}", graph.n(), obs.n())));
    }
    let (k, seed) = (config.k, config.seed);
    let (initial, split_ratings) = match config.stage1 {
        Stage1Variant::GraphOnly => (stage1(graph, k, seed.child("stage1", 0), config.spectral)?, None),
        Stage1Variant::InformationSplit => {
            let out = alt_stage1(graph, obs, k, seed.child("stage1", 0), config.spectral)?;
            (out.assignment, Some(out.retained))
        }
    };
    let level_obs = split_ratings.as_ref().unwrap_or(obs);

    let stage1_labels = initial.labels().to_vec();
    let mut labels = stage1_labels.clone();
    let mut iterations = Vec::with_capacity(config.l_max);
    let mut last: Option<(LevelEstimate, Vec<Vec<usize>>)> = None;
    for round in 1..=config.l_max {
        if let Some(c) = first_empty(&labels, k) {
            return Err(Error::EmptyClusterAtStage2i(c));
        }
        let counts = ClusterItemCounts::new(level_obs, &labels, k);
        let pool = sample_pool_from_counts(&counts, obs.m(), k, config.d, seed.child("stage2i", round as u64))?;
        let ratios: Vec<f64> = pool.iter().map(|s| s.ratio).collect();
        let levels = gap_cluster(&ratios, config.d, config.clamp)?;
        let vectors = assign_from_counts(&counts, obs.m(), k, &levels.values);
        let values: Vec<Vec<f64>> =
            vectors.iter().map(|v| v.iter().map(|&h| levels.values[h]).collect()).collect();

        let (next, refinement, params) = stage2ii(graph, obs, &labels, &values, config.clamp)?;
        labels = next;
        iterations.push(IterationTrace { levels: levels.clone(), params, refinement, labels: labels.clone() });
        last = Some((levels, vectors));
    }
    if let Some(c) = first_empty(&labels, k) {
        return Err(Error::EmptyCluster(c));
    }
    let (levels, vectors) = last.expect("l_max >= 1");
    let clusters = ClusterAssignment::new(labels, k)?;
    let matrix = Array2::from_shape_fn((obs.n(), obs.m()), |(i, j)| levels.values[vectors[clusters.label(i)][j]]);
    let params = iterations.last().expect("l_max >= 1").params;
    Ok(EstimationResult {
        clusters,
        levels,
        vectors,
        matrix,
        alpha_hat: params.alpha_hat,
        beta_hat: params.beta_hat,
        stage1_labels,
        iterations,
    })
}

fn check_probability_pair(alpha: f64, beta: f64) -> Result<()> {
    for x in [alpha, beta] {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidProbability(x));
        }
    }
    Ok(())
}

fn check_shapes(model: &PreferenceModel, obs: &RatingObservation, graph: &SocialGraph) -> Result<()> {
    if model.n() != obs.n() || model.m() != obs.m() || model.n() != graph.n() {
        return Err(Error::DimensionMismatch(format!(
            "model is {}x{}, ratings {}x{}, graph has {} users",
            model.n(),
            model.m(),
            obs.n(),
            obs.m(),
            graph.n()
        )));
    }
    Ok(())
}

/// Pairs of users sharing a cluster when `n` users are split as evenly as possible.
fn balanced_intra_pairs(n: usize, k: usize) -> f64 {
    (0..k)
        .map(|c| {
            let size = n / k + usize::from(c < n % k);
            (size * size.saturating_sub(1) / 2) as f64
        })
        .sum()
}

/// Per-item rating terms and the graph term of [`neg_log_likelihood`].
pub fn neg_log_likelihood_parts(
    model: &PreferenceModel,
    obs: &RatingObservation,
    graph: &SocialGraph,
    alpha: f64,
    beta: f64,
) -> Result<(Vec<f64>, f64)> {
    check_probability_pair(alpha, beta)?;
    check_shapes(model, obs, graph)?;
    let a = model.assignment();
    let values: Vec<Vec<f64>> = (0..model.k()).map(|k| model.vector_values(k)).collect();
    let mut per_item = vec![0.0; model.m()];
    for r in obs.entries() {
        let x = values[a.label(r.user)][r.item];
        per_item[r.item] -= if r.value > 0 { x.ln() } else { (1.0 - x).ln() };
    }
    let cross = graph.edges().filter(|&(u, v)| a.label(u) != a.label(v)).count() as f64;
    let intra: f64 = a.sizes().iter().map(|&c| (c * c.saturating_sub(1) / 2) as f64).sum();
    let weight = (alpha * (1.0 - beta) / ((1.0 - alpha) * beta)).ln();
    let size_term = (intra - balanced_intra_pairs(model.n(), model.k())) * ((1.0 - beta) / (1.0 - alpha)).ln();
    Ok((per_item, weight * cross + size_term))
}

/// Negative log-likelihood of a candidate model given ratings and graph, up
/// to an additive constant that depends only on the data and `(p, alpha, beta)`.
///
/// For balanced partitions this is the rating cost plus
/// `log(alpha (1 - beta) / ((1 - alpha) beta))` times the number of
/// cross-cluster edges. Unbalanced partitions add the exact correction for
/// their different count of intra-cluster pairs.
pub fn neg_log_likelihood(
    model: &PreferenceModel,
    obs: &RatingObservation,
    graph: &SocialGraph,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let (items, graph_term) = neg_log_likelihood_parts(model, obs, graph, alpha, beta)?;
    Ok(items.iter().sum::<f64>() + graph_term)
}

/// Upper bound on candidates the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 10_000_000;

/// Restricts oracle candidates to pairwise Hamming distance `ceil(gamma * m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HammingConstraint {
    pub gamma: f64,
}

impl HammingConstraint {
    pub fn distance(&self, m: usize) -> usize {
        (self.gamma * m as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub model: PreferenceModel,
    pub value: f64,
}

/// Exhaustive maximum-likelihood search over all partitions into `k`
/// non-empty clusters and all level vectors.
///
/// Ties go to the lexicographically smallest `(labels, vectors)` encoding.
#[allow(clippy::too_many_arguments)]
pub fn mle_oracle(
    obs: &RatingObservation,
    graph: &SocialGraph,
    levels: &LevelSet,
    k: usize,
    alpha: f64,
    beta: f64,
    constraint: Option<HammingConstraint>,
) -> Result<OracleResult> {
    check_probability_pair(alpha, beta)?;
    let (n, m, d) = (obs.n(), obs.m(), levels.len());
    if graph.n() != n {
        return Err(Error::DimensionMismatch(format!("graph has {} users, ratings have {n}", graph.n())));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("cannot split {n} users into {k} clusters")));
    }
    let size = (k as u128)
        .checked_pow(n as u32)
        .and_then(|a| (d as u128).checked_pow((k * m) as u32).and_then(|b| a.checked_mul(b)))
        .unwrap_or(u128::MAX);
    if size > ORACLE_LIMIT {
        return Err(Error::InstanceTooLarge(size));
    }
    let required = constraint.map(|c| c.distance(m));

    let weight = (alpha * (1.0 - beta) / ((1.0 - alpha) * beta)).ln();
    let size_weight = ((1.0 - beta) / (1.0 - alpha)).ln();
    let balanced = balanced_intra_pairs(n, k);
    let edges: Vec<(usize, usize)> = graph.edges().collect();

    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut labels = vec![0usize; n];
    let mut cell_cost = vec![0.0; k * m * d];
    loop {
        if first_empty(&labels, k).is_none() {
            let cross = edges.iter().filter(|&&(u, v)| labels[u] != labels[v]).count() as f64;
            let mut sizes = vec![0usize; k];
            labels.iter().for_each(|&l| sizes[l] += 1);
            let intra: f64 = sizes.iter().map(|&c| (c * c.saturating_sub(1) / 2) as f64).sum();
            let graph_term = weight * cross + (intra - balanced) * size_weight;

            cell_cost.iter_mut().for_each(|c| *c = 0.0);
            for r in obs.entries() {
                for h in 0..d {
                    let p = levels.get(h);
                    cell_cost[(labels[r.user] * m + r.item) * d + h] -= if r.value > 0 { p.ln() } else { (1.0 - p).ln() };
                }
            }

            let mut choice = vec![0usize; k * m];
            loop {
                if required.is_none_or(|h| pairwise_hamming_is(&choice, k, m, h)) {
                    let value = graph_term + choice.iter().enumerate().map(|(cell, &h)| cell_cost[cell * d + h]).sum::<f64>();
                    if best.as_ref().is_none_or(|b| value < b.0) {
                        best = Some((value, labels.clone(), choice.clone()));
                    }
                }
                if !increment(&mut choice, d) {
                    break;
                }
            }
        }
        if !increment(&mut labels, k) {
            break;
        }
    }
    let (value, labels, choice) =
        best.ok_or_else(|| Error::InvalidConfig("no candidate satisfies the constraint".into()))?;
    let vectors = choice.chunks(m).map(<[usize]>::to_vec).collect();
    let model = PreferenceModel::new(levels.clone(), ClusterAssignment::new(labels, k)?, vectors)?;
    Ok(OracleResult { model, value })
}

fn pairwise_hamming_is(choice: &[usize], k: usize, m: usize, required: usize) -> bool {
    (0..k).all(|a| {
        (a + 1..k).all(|b| (0..m).filter(|&j| choice[a * m + j] != choice[b * m + j]).count() == required)
    })
}

/// Advances `digits` as a base-`base` counter, last digit fastest.
fn increment(digits: &mut [usize], base: usize) -> bool {
    for x in digits.iter_mut().rev() {
        *x += 1;
        if *x < base {
            return true;
        }
        *x = 0;
    }
    false
}
