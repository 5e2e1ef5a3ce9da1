//! Core domain types: preference levels, cluster assignments, the ground-truth
//! preference model, sparse rating observations and the social graph.
//!
//! Everything here is immutable once constructed. Constructors validate their
//! invariants so downstream stages can index without re-checking.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Strictly increasing set of preference levels, each in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    levels: Vec<f64>,
}

impl LevelSet {
    /// Sorts and validates `values`. Duplicates and values outside (0, 1) are rejected.
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyLevels);
        }
        for &v in values {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::LevelOutOfRange(v));
            }
        }
        let mut levels = values.to_vec();
        levels.sort_by(|a, b| a.partial_cmp(b).expect("levels are finite"));
        if let Some(w) = levels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLevel(w[0]));
        }
        Ok(LevelSet { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.levels
    }

    pub fn get(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Index of `value` by exact equality.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.levels.iter().position(|&l| l == value)
    }

    /// Smallest gap between adjacent levels, or `None` for a single level.
    pub fn min_gap(&self) -> Option<f64> {
        self.levels
            .windows(2)
            .map(|w| w[1] - w[0])
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

/// Validates and sorts a raw list of levels.
pub fn validate_level_set(values: &[f64]) -> Result<LevelSet> {
    LevelSet::new(values)
}

/// Map from users to clusters `0..k`, with every cluster non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
    sizes: Vec<usize>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidAssignment("K must be positive".into()));
        }
        let mut sizes = vec![0usize; k];
        for (user, &label) in labels.iter().enumerate() {
            if label >= k {
                return Err(Error::InvalidAssignment(format!(
                    "user {user} has label {label} but K = {k}"
                )));
            }
            sizes[label] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidAssignment(format!("cluster {empty} is empty")));
        }
        Ok(ClusterAssignment { labels, k, sizes })
    }

    /// Contiguous blocks: the first `sizes[0]` users form cluster 0, and so on.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
            .collect();
        Self::new(labels, sizes.len())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, user: usize) -> usize {
        self.labels[user]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Applies `perm[old] = new` to every label.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k {
            return Err(Error::InvalidAssignment("permutation length differs from K".into()));
        }
        Self::new(self.labels.iter().map(|&l| perm[l]).collect(), self.k)
    }
}

/// Ground truth: a level set, a cluster assignment and one latent vector per cluster.
///
/// Vectors are stored as indices into the level set so that membership is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel {
    levels: LevelSet,
    assignment: ClusterAssignment,
    vectors: Vec<Vec<usize>>,
    m: usize,
}

impl PreferenceModel {
    pub fn new(
        levels: LevelSet,
        assignment: ClusterAssignment,
        vectors: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if vectors.len() != assignment.k() {
            return Err(Error::InvalidModel(format!(
                "{} vectors for {} clusters",
                vectors.len(),
                assignment.k()
            )));
        }
        let m = vectors[0].len();
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != m {
                return Err(Error::InvalidModel(format!(
                    "vector {k} has length {} but vector 0 has length {m}",
                    v.len()
                )));
            }
            if let Some(&bad) = v.iter().find(|&&h| h >= levels.len()) {
                return Err(Error::InvalidModel(format!(
                    "vector {k} references level index {bad} of {}",
                    levels.len()
                )));
            }
        }
        Ok(PreferenceModel { levels, assignment, vectors, m })
    }

    /// Builds vectors from equal-width item blocks.
    ///
    /// `blocks[k]` lists level indices for cluster `k`; block `b` of `B` covers
    /// items `b*m/B .. (b+1)*m/B`.
    pub fn from_blocks(
        levels: LevelSet,
        sizes: &[usize],
        blocks: &[Vec<usize>],
        m: usize,
    ) -> Result<Self> {
        let assignment = ClusterAssignment::from_sizes(sizes)?;
        let vectors = blocks
            .iter()
            .map(|b| {
                if b.is_empty() {
                    return Err(Error::InvalidModel("empty block layout".into()));
                }
                let nb = b.len();
                Ok((0..m).map(|j| b[j * nb / m]).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels, assignment, vectors)
    }

    pub fn levels(&self) -> &LevelSet {
        &self.levels
    }

    pub fn assignment(&self) -> &ClusterAssignment {
        &self.assignment
    }

    /// Level indices of cluster `k`'s vector.
    pub fn vector_indices(&self, k: usize) -> &[usize] {
        &self.vectors[k]
    }

    pub fn vector_values(&self, k: usize) -> Vec<f64> {
        self.vectors[k].iter().map(|&h| self.levels.get(h)).collect()
    }

    pub fn n(&self) -> usize {
        self.assignment.n()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.assignment.k()
    }

    pub fn induce_matrix(&self) -> Array2<f64> {
        induce_matrix(self)
    }
}

/// `R[i][j] = vectors[assignment[i]][j]`.
pub fn induce_matrix(model: &PreferenceModel) -> Array2<f64> {
    let values: Vec<Vec<f64>> = (0..model.k()).map(|k| model.vector_values(k)).collect();
    Array2::from_shape_fn((model.n(), model.m()), |(i, j)| {
        values[model.assignment.label(i)][j]
    })
}

/// Number of coordinates where `u` and `v` differ (exact comparison).
pub fn hamming_distance(u: &[f64], v: &[f64]) -> Result<usize> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    Ok(u.iter().zip(v).filter(|(a, b)| a != b).count())
}

/// One observed binary rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    /// `+1` (like) or `-1` (dislike).
    pub value: i8,
}

/// Sparse set of observed ratings, indexed by user and by item.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingObservation {
    n: usize,
    m: usize,
    // sorted by (user, item)
    entries: Vec<Rating>,
    user_offsets: Vec<usize>,
    // entry indices grouped by item
    item_offsets: Vec<usize>,
    item_entries: Vec<usize>,
}

impl RatingObservation {
    pub fn new(n: usize, m: usize, mut entries: Vec<Rating>) -> Result<Self> {
        for r in &entries {
            if r.user >= n || r.item >= m {
                return Err(Error::InvalidObservation(format!(
                    "entry ({}, {}) outside {n}x{m}",
                    r.user, r.item
                )));
            }
            if r.value != 1 && r.value != -1 {
                return Err(Error::InvalidObservation(format!(
                    "entry ({}, {}) has value {}",
                    r.user, r.item, r.value
                )));
            }
        }
        entries.sort_unstable_by_key(|r| (r.user, r.item));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::InvalidObservation(format!(
                "duplicate entry ({}, {})",
                w[0].user, w[0].item
            )));
        }

        let mut user_offsets = vec![0usize; n + 1];
        let mut item_counts = vec![0usize; m + 1];
        for r in &entries {
            user_offsets[r.user + 1] += 1;
            item_counts[r.item + 1] += 1;
        }
        for i in 0..n {
            user_offsets[i + 1] += user_offsets[i];
        }
        for j in 0..m {
            item_counts[j + 1] += item_counts[j];
        }
        let item_offsets = item_counts.clone();
        let mut cursor = item_counts;
        let mut item_entries = vec![0usize; entries.len()];
        for (e, r) in entries.iter().enumerate() {
            item_entries[cursor[r.item]] = e;
            cursor[r.item] += 1;
        }

        Ok(RatingObservation { n, m, entries, user_offsets, item_offsets, item_entries })
    }

    pub fn empty(n: usize, m: usize) -> Self {
        Self::new(n, m, Vec::new()).expect("empty observation is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All entries, sorted by `(user, item)`.
    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn user_ratings(&self, user: usize) -> &[Rating] {
        &self.entries[self.user_offsets[user]..self.user_offsets[user + 1]]
    }

    pub fn item_ratings(&self, item: usize) -> impl Iterator<Item = &Rating> + '_ {
        self.item_entries[self.item_offsets[item]..self.item_offsets[item + 1]]
            .iter()
            .map(move |&e| &self.entries[e])
    }

    pub fn get(&self, user: usize, item: usize) -> Option<i8> {
        let row = self.user_ratings(user);
        row.binary_search_by_key(&item, |r| r.item)
            .ok()
            .map(|idx| row[idx].value)
    }
}

/// Undirected simple graph on `n` users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl SocialGraph {
    /// Builds a graph from undirected edges. Self-loops and repeated edges are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) outside n = {n}")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for (u, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            if let Some(w) = nbrs.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!("repeated edge ({u}, {})", w[0])));
            }
        }
        Ok(SocialGraph { adjacency, edge_count: edges.len() })
    }

    /// Assembles a graph from already sorted, symmetric neighbor lists.
    pub(crate) fn from_sorted_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        SocialGraph { adjacency, edge_count }
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }
}
