//! Evaluation measures.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, RatingObservation};

/// Largest supported `K` for [`cluster_error_rate`].
pub const MAX_MATCHED_CLUSTERS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub max_norm: f64,
    pub mae: Option<f64>,
    pub eta: f64,
    pub exact_recovery: bool,
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// `max |estimate - truth|` over all entries.
pub fn max_norm_error(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    same_shape(estimate, truth)?;
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Mean of `|N_ij - (2 R_ij - 1)|` over the test entries.
pub fn mae(estimate: &Array2<f64>, test: &RatingObservation) -> Result<f64> {
    if estimate.dim() != (test.n(), test.m()) {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {:?}, test set is {}x{}",
            estimate.dim(),
            test.n(),
            test.m()
        )));
    }
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let total: f64 = test
        .entries()
        .iter()
        .map(|r| (f64::from(r.value) - (2.0 * estimate[[r.user, r.item]] - 1.0)).abs())
        .sum();
    Ok(total / test.len() as f64)
}

fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    fn go(perm: &mut Vec<usize>, used: &mut [bool], visit: &mut dyn FnMut(&[usize])) {
        if perm.len() == used.len() {
            visit(perm);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                perm.push(c);
                go(perm, used, visit);
                perm.pop();
                used[c] = false;
            }
        }
    }
    go(&mut Vec::with_capacity(k), &mut vec![false; k], &mut visit);
}

/// Fraction of misassigned users under the best matching of cluster labels.
pub fn cluster_error_rate(estimate: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    if estimate.n() != truth.n() || estimate.k() != truth.k() {
        return Err(Error::ShapeMismatch(format!(
            "assignments cover {} users in {} clusters vs {} users in {} clusters",
            estimate.n(),
            estimate.k(),
            truth.n(),
            truth.k()
        )));
    }
    let k = truth.k();
    if k > MAX_MATCHED_CLUSTERS {
        return Err(Error::TooManyClusters(k));
    }
    let mut overlap = vec![0usize; k * k];
    for (&e, &t) in estimate.labels().iter().zip(truth.labels()) {
        overlap[e * k + t] += 1;
    }
    let mut best = 0;
    for_each_permutation(k, |perm| {
        let matched = (0..k).map(|e| overlap[e * k + perm[e]]).sum::<usize>();
        best = best.max(matched);
    });
    Ok((truth.n() - best) as f64 / truth.n() as f64)
}

/// Whether `estimate` equals `truth` after snapping every estimated value to
/// the nearest true level within half the smallest gap between true levels.
pub fn exact_recovery(estimate: &Array2<f64>, truth: &Array2<f64>) -> Result<bool> {
    same_shape(estimate, truth)?;
    let mut levels: Vec<f64> = truth.iter().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let radius = levels.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min) / 2.0;
    let snap = |x: f64| {
        let idx = levels.partition_point(|&l| l < x);
        [idx.checked_sub(1), (idx < levels.len()).then_some(idx)]
            .into_iter()
            .flatten()
            .map(|i| levels[i])
            .filter(|l| (l - x).abs() < radius)
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
            .unwrap_or(x)
    };
    Ok(estimate.iter().zip(truth).all(|(&e, &t)| snap(e) == t))
}

/// All metrics for one estimate; `test` enables the MAE column.
pub fn evaluate(
    estimate: &Array2<f64>,
    estimated_clusters: &ClusterAssignment,
    truth: &Array2<f64>,
    true_clusters: &ClusterAssignment,
    test: Option<&RatingObservation>,
) -> Result<EvalReport> {
    Ok(EvalReport {
        max_norm: max_norm_error(estimate, truth)?,
        mae: test.map(|t| mae(estimate, t)).transpose()?,
        eta: cluster_error_rate(estimated_clusters, true_clusters)?,
        exact_recovery: exact_recovery(estimate, truth)?,
    })
}
