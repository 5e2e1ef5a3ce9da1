//! Partial cluster recovery.
//!
//! [`stage1`] clusters users from the social graph alone: the top-`K`
//! eigenvectors of the adjacency matrix (power iteration with Hotelling
//! deflation) are fed to k-means. [`alt_stage1`] is the information-splitting
//! variant that clusters the concatenated `[G | N]` matrix after masking it
//! with a Bernoulli(1/sqrt(log n)) split.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, Rating, RatingObservation, SocialGraph};
use crate::synth::Seed;

/// Leading eigenvectors as columns of an `n x k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vectors: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    /// False when some vector did not reach the tolerance within `max_iter`.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    /// Stop when successive unit iterates differ (up to sign) by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig { tol: 1e-8, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { restarts: 5, max_iter: 100 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpectralConfig {
    pub power: PowerConfig,
    pub kmeans: KMeansConfig,
}

fn adjacency_matvec(graph: &SocialGraph, x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = graph.neighbors(i).iter().map(|&j| x[j]).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Top-`k` eigenpairs of a symmetric operator of size `dim` whose spectrum
/// lies in `[-shift, inf)`; iterating on `op + shift * I` makes the
/// algebraically largest eigenvalues dominate.
fn deflated_power_iteration<F>(
    dim: usize,
    k: usize,
    config: PowerConfig,
    seed: Seed,
    shift: f64,
    apply: F,
) -> (Vec<Vec<f64>>, Vec<f64>, bool)
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut all_converged = true;
    let mut y = vec![0.0; dim];

    for c in 0..k {
        let mut rng = seed.child("power_start", c as u64).rng();
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut x, &found);
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);

        let mut converged = false;
        for _ in 0..config.max_iter {
            apply(&x, &mut y);
            y.iter_mut().zip(&x).for_each(|(yi, xi)| *yi += shift * xi);
            // Hotelling deflation: subtract lambda_i v_i v_i^T x
            for (v, &lam) in found.iter().zip(&eigenvalues) {
                let coef = lam * dot(v, &x);
                y.iter_mut().zip(v).for_each(|(yi, vi)| *yi -= coef * vi);
            }
            orthogonalize(&mut y, &found);
            let ny = norm(&y);
            if ny < 1e-300 {
                // remaining spectrum is zero; x already spans an eigenvector
                converged = true;
                break;
            }
            y.iter_mut().for_each(|v| *v /= ny);
            let sign = if dot(&x, &y) < 0.0 { -1.0 } else { 1.0 };
            let change = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (b - sign * a).powi(2))
                .sum::<f64>()
                .sqrt();
            std::mem::swap(&mut x, &mut y);
            if change < config.tol {
                converged = true;
                break;
            }
        }
        apply(&x, &mut y);
        eigenvalues.push(dot(&x, &y) + shift);
        found.push(x);
        all_converged &= converged;
    }
    eigenvalues.iter_mut().for_each(|l| *l -= shift);
    (found, eigenvalues, all_converged)
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for v in basis {
        let c = dot(x, v);
        x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= c * vi);
    }
}

fn to_columns(vectors: &[Vec<f64>], rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, vectors.len()), |(i, c)| vectors[c][i])
}

/// Eigenvectors of the `k` largest adjacency eigenvalues, in decreasing order.
///
/// Negative eigenvalues are never picked ahead of positive ones, even when
/// they are larger in magnitude; on small sparse graphs they often are.
///
/// Start vectors come from `seed`. If some vector misses `tol` after
/// `max_iter` iterations the best iterate is returned with `converged = false`.
pub fn top_k_eigenvectors(
    graph: &SocialGraph,
    k: usize,
    config: PowerConfig,
    seed: Seed,
) -> Result<Embedding> {
    let n = graph.n();
    if k == 0 || k > n {
        return Err(Error::TooManyComponents { requested: k, available: n });
    }
    if graph.edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    // the spectrum of A lies in [-max degree, max degree]
    let max_degree = (0..n).map(|i| graph.degree(i)).max().unwrap_or(0) as f64;
    let (vectors, eigenvalues, converged) =
        deflated_power_iteration(n, k, config, seed, max_degree, |x, y| adjacency_matvec(graph, x, y));
    Ok(Embedding { vectors: to_columns(&vectors, n), eigenvalues, converged })
}

/// Result of the best k-means restart.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub cost: f64,
    /// Cost after every Lloyd iteration of the returned restart.
    pub cost_trace: Vec<f64>,
}

impl KMeansFit {
    pub fn assignment(&self, k: usize) -> Result<ClusterAssignment> {
        ClusterAssignment::new(self.labels.clone(), k)
    }
}

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's algorithm with D^2-weighted (farthest-point biased) seeding.
///
/// Runs `config.restarts` seeded restarts and keeps the lowest cost. A cluster
/// that empties out takes over the point farthest from its current centroid.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: Seed, config: KMeansConfig) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::TooManyComponents { requested: k, available: n });
    }
    let mut best: Option<KMeansFit> = None;
    for restart in 0..config.restarts.max(1) {
        let fit = lloyd(points, k, seed.child("kmeans_restart", restart as u64), config.max_iter);
        if best.as_ref().is_none_or(|b| fit.cost < b.cost) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn seed_centroids(points: &Array2<f64>, k: usize, seed: Seed) -> Array2<f64> {
    let n = points.nrows();
    let mut rng = seed.rng();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    let mut centroids = Array2::zeros((k, points.ncols()));
    for (c, &i) in chosen.iter().enumerate() {
        centroids.row_mut(c).assign(&points.row(i));
    }
    centroids
}

fn lloyd(points: &Array2<f64>, k: usize, seed: Seed, max_iter: usize) -> KMeansFit {
    let n = points.nrows();
    let mut centroids = seed_centroids(points, k, seed);
    let mut labels = vec![usize::MAX; n];
    let mut cost_trace = Vec::new();

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let d = sq_dist(points.row(i), centroids.row(c));
                if d < best.0 {
                    best = (d, c);
                }
            }
            if *label != best.1 {
                *label = best.1;
                changed = true;
            }
        }
        repair_empty(points, &centroids, &mut labels, k);

        let mut sums = Array2::<f64>::zeros((k, points.ncols()));
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let mut row = sums.row_mut(l);
            row += &points.row(i);
        }
        for (mut row, &count) in sums.rows_mut().into_iter().zip(&counts) {
            row /= count as f64;
        }
        centroids = sums;
        cost_trace.push(cost(points, &centroids, &labels));
        if !changed {
            break;
        }
    }
    let cost = *cost_trace.last().expect("at least one iteration");
    KMeansFit { labels, centroids, cost, cost_trace }
}

fn repair_empty(points: &Array2<f64>, centroids: &Array2<f64>, labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| (sq_dist(points.row(i), centroids.row(labels[i])), i))
            .fold((f64::NEG_INFINITY, usize::MAX), |acc, cand| if cand.0 > acc.0 { cand } else { acc })
            .1;
        labels[donor] = empty;
    }
}

fn cost(points: &Array2<f64>, centroids: &Array2<f64>, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), centroids.row(l)))
        .sum()
}

/// Graph-only partial recovery: adjacency eigenvectors followed by k-means.
pub fn stage1(graph: &SocialGraph, k: usize, seed: Seed, config: SpectralConfig) -> Result<ClusterAssignment> {
    if k == 1 {
        return ClusterAssignment::new(vec![0; graph.n()], 1);
    }
    let embedding = top_k_eigenvectors(graph, k, config.power, seed.child("eigen", 0))?;
    kmeans(&embedding.vectors, k, seed.child("kmeans", 0), config.kmeans)?.assignment(k)
}

/// Complementary masks over the `n x (n + m)` matrix `[G | N]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMasks {
    rows: usize,
    cols: usize,
    first: Vec<bool>,
}

impl SplitMasks {
    /// Each entry of the first mask is 1 with probability `keep`.
    pub fn sample(rows: usize, cols: usize, keep: f64, seed: Seed) -> Self {
        let mut rng = seed.rng();
        let first = (0..rows * cols).map(|_| rng.gen::<f64>() < keep).collect();
        SplitMasks { rows, cols, first }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn first(&self, i: usize, j: usize) -> bool {
        self.first[i * self.cols + j]
    }

    pub fn second(&self, i: usize, j: usize) -> bool {
        !self.first(i, j)
    }
}

/// Output of [`alt_stage1`].
#[derive(Debug, Clone)]
pub struct SplitStage1 {
    pub assignment: ClusterAssignment,
    /// Ratings kept by the second mask, reserved for level recovery.
    pub retained: RatingObservation,
    pub masks: SplitMasks,
}

/// Information-splitting partial recovery.
///
/// Builds `I0 = [G | N]`, masks it with Bernoulli(1/sqrt(log n)) into `I1` and
/// the complement `I2`, projects the rows of `I1` onto its top-`k` right
/// singular vectors (power iteration on `I1^T I1`) and runs k-means on the
/// projected rows. Raw `+-1`/`0` values are used without rescaling.
pub fn alt_stage1(
    graph: &SocialGraph,
    obs: &RatingObservation,
    k: usize,
    seed: Seed,
    config: SpectralConfig,
) -> Result<SplitStage1> {
    let n = graph.n();
    if obs.n() != n {
        return Err(Error::DimensionMismatch(format!("graph has {n} users, ratings have {}", obs.n())));
    }
    if n < 3 {
        return Err(Error::InvalidConfig("information splitting needs n >= 3".into()));
    }
    let m = obs.m();
    let keep = 1.0 / (n as f64).ln().sqrt();
    let masks = SplitMasks::sample(n, n + m, keep, seed.child("split_mask", 0));

    // sparse rows of I1
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in rows.iter_mut().enumerate() {
        row.extend(graph.neighbors(i).iter().filter(|&&j| masks.first(i, j)).map(|&j| (j, 1.0)));
        row.extend(
            obs.user_ratings(i)
                .iter()
                .filter(|r| masks.first(i, n + r.item))
                .map(|r| (n + r.item, f64::from(r.value))),
        );
    }
    let retained: Vec<Rating> =
        obs.entries().iter().copied().filter(|r| masks.second(r.user, n + r.item)).collect();
    let retained = RatingObservation::new(n, m, retained)?;

    if rows.iter().all(Vec::is_empty) {
        return Err(Error::EmptyGraph);
    }
    if k > n {
        return Err(Error::TooManyComponents { requested: k, available: n });
    }

    let assignment = if k == 1 {
        ClusterAssignment::new(vec![0; n], 1)?
    } else {
        let gram = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for row in &rows {
                let s: f64 = row.iter().map(|&(c, v)| v * x[c]).sum();
                for &(c, v) in row {
                    y[c] += v * s;
                }
            }
        };
        let (right, _, _) = deflated_power_iteration(n + m, k, config.power, seed.child("svd", 0), 0.0, gram);
        let projected = Array2::from_shape_fn((n, k), |(i, c)| {
            rows[i].iter().map(|&(col, v)| v * right[c][col]).sum::<f64>()
        });
        kmeans(&projected, k, seed.child("kmeans", 0), config.kmeans)?.assignment(k)?
    };
    Ok(SplitStage1 { assignment, retained, masks })
}
