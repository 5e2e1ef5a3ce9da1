//! Cluster refinement.
//!
//! Each sweep scores every user against every cluster of the frozen current
//! partition and moves all users to their lowest-cost cluster at once. The
//! cost combines the user's edges and non-edges to each cluster under
//! `(alpha_hat, beta_hat)` with the likelihood of the user's ratings under the
//! cluster's estimated vector.

use crate::error::{Error, Result};
use crate::model::{RatingObservation, SocialGraph};

/// Edge densities estimated from a partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParamEstimate {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// `alpha_hat > beta_hat`; graph terms are ignored otherwise.
    pub informative: bool,
}

/// Per-sweep move counts of one refinement run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RefinementTrace {
    pub moves: Vec<usize>,
    /// Clusters left empty by the last sweep.
    pub empty_clusters: Vec<usize>,
}

impl RefinementTrace {
    pub fn sweeps(&self) -> usize {
        self.moves.len()
    }
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    sizes
}

/// Intra-cluster and inter-cluster edge densities, clamped to `[clamp, 1 - clamp]`.
pub fn estimate_graph_params(
    graph: &SocialGraph,
    labels: &[usize],
    k: usize,
    clamp: f64,
) -> Result<GraphParamEstimate> {
    if labels.len() != graph.n() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} users, partition has {}",
            graph.n(),
            labels.len()
        )));
    }
    let sizes = cluster_sizes(labels, k);
    let n = labels.len() as f64;
    let intra_pairs: f64 = sizes.iter().map(|&c| (c * c.saturating_sub(1) / 2) as f64).sum();
    if intra_pairs == 0.0 {
        return Err(Error::DegeneratePartition);
    }
    let inter_pairs = (n * n - sizes.iter().map(|&c| (c * c) as f64).sum::<f64>()) / 2.0;
    let (mut intra, mut inter) = (0usize, 0usize);
    for (u, v) in graph.edges() {
        if labels[u] == labels[v] {
            intra += 1;
        } else {
            inter += 1;
        }
    }
    let alpha_hat = (intra as f64 / intra_pairs).clamp(clamp, 1.0 - clamp);
    let beta_hat = if inter_pairs > 0.0 { inter as f64 / inter_pairs } else { 0.0 }.clamp(clamp, 1.0 - clamp);
    Ok(GraphParamEstimate { alpha_hat, beta_hat, informative: alpha_hat > beta_hat })
}

/// Frozen inputs of a refinement sweep.
#[derive(Debug, Clone, Copy)]
pub struct Scorer<'a> {
    pub graph: &'a SocialGraph,
    pub obs: &'a RatingObservation,
    /// Estimated preference vector of each cluster, as probabilities.
    pub vectors: &'a [Vec<f64>],
    pub params: GraphParamEstimate,
}

impl Scorer<'_> {
    pub fn k(&self) -> usize {
        self.vectors.len()
    }

    fn rating_cost(&self, i: usize, k: usize) -> f64 {
        let u = &self.vectors[k];
        self.obs
            .user_ratings(i)
            .iter()
            .map(|r| if r.value > 0 { -u[r.item].ln() } else { -(1.0 - u[r.item]).ln() })
            .sum()
    }

    /// Costs of placing user `i` in each cluster of the partition `labels`.
    ///
    /// `sizes` are the cluster sizes of `labels`; user `i` is not counted in
    /// its own cluster.
    pub fn user_costs(&self, labels: &[usize], sizes: &[usize], i: usize) -> Vec<f64> {
        let k = self.k();
        let mut costs: Vec<f64> = (0..k).map(|c| self.rating_cost(i, c)).collect();
        if !self.params.informative {
            return costs;
        }
        let mut edges = vec![0usize; k];
        for &j in self.graph.neighbors(i) {
            edges[labels[j]] += 1;
        }
        let mut others = sizes.to_vec();
        others[labels[i]] -= 1;

        let GraphParamEstimate { alpha_hat: a, beta_hat: b, .. } = self.params;
        // -log-likelihood of i's edges to cluster c if c is i's cluster, or another cluster
        let same: Vec<f64> =
            (0..k).map(|c| -(a.ln() * edges[c] as f64 + (1.0 - a).ln() * (others[c] - edges[c]) as f64)).collect();
        let across: Vec<f64> =
            (0..k).map(|c| -(b.ln() * edges[c] as f64 + (1.0 - b).ln() * (others[c] - edges[c]) as f64)).collect();
        let across_total: f64 = across.iter().sum();
        for c in 0..k {
            costs[c] += same[c] + (across_total - across[c]);
        }
        costs
    }

    /// Cost of placing user `i` in cluster `k`.
    pub fn user_cost(&self, labels: &[usize], i: usize, k: usize) -> f64 {
        let sizes = cluster_sizes(labels, self.k());
        self.user_costs(labels, &sizes, i)[k]
    }
}

fn argmin(costs: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (c, &v) in costs.iter().enumerate() {
        if v < best.0 {
            best = (v, c);
        }
    }
    best.1
}

/// One synchronous sweep: every user moves to its lowest-cost cluster.
///
/// Ties go to the lowest cluster index. Returns the new labels and the number
/// of users that changed cluster.
pub fn refine_once(scorer: &Scorer<'_>, labels: &[usize]) -> (Vec<usize>, usize) {
    let k = scorer.k();
    if k <= 1 {
        return (labels.to_vec(), 0);
    }
    let sizes = cluster_sizes(labels, k);
    let next: Vec<usize> = (0..labels.len()).map(|i| argmin(&scorer.user_costs(labels, &sizes, i))).collect();
    let moved = next.iter().zip(labels).filter(|(a, b)| a != b).count();
    (next, moved)
}

/// Number of sweeps, `ceil(log2 n)`.
pub fn sweep_budget(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Estimates the graph parameters once, then runs up to `ceil(log2 n)`
/// sweeps, stopping early when nobody moves.
pub fn stage2ii(
    graph: &SocialGraph,
    obs: &RatingObservation,
    labels: &[usize],
    vectors: &[Vec<f64>],
    clamp: f64,
) -> Result<(Vec<usize>, RefinementTrace, GraphParamEstimate)> {
    let k = vectors.len();
    if obs.n() != graph.n() {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} users, ratings have {}",
            graph.n(),
            obs.n()
        )));
    }
    if vectors.iter().any(|v| v.len() != obs.m()) {
        return Err(Error::DimensionMismatch(format!("preference vectors must have length {}", obs.m())));
    }
    let params = estimate_graph_params(graph, labels, k, clamp)?;
    let scorer = Scorer { graph, obs, vectors, params };
    let mut current = labels.to_vec();
    let mut trace = RefinementTrace::default();
    for _ in 0..sweep_budget(graph.n()) {
        let (next, moved) = refine_once(&scorer, &current);
        trace.moves.push(moved);
        current = next;
        if moved == 0 {
            break;
        }
    }
    let sizes = cluster_sizes(&current, k);
    trace.empty_clusters = (0..k).filter(|&c| sizes[c] == 0).collect();
    Ok((current, trace, params))
}
