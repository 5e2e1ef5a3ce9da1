//! Monte Carlo sweeps over the observation rate.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{generate_instance, ModelConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, Stage1Variant};
use crate::metrics::{cluster_error_rate, exact_recovery, max_norm_error};
use crate::synth::Seed;

pub const ROW_HEADER: &str = "p_index,p,trial,seed,status,max_norm,eta,exact_recovery,elapsed_ms";
pub const AGGREGATE_HEADER: &str = "p_index,p,trials,errors,mean_max_norm,mean_eta,success_rate";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub model: ModelConfig,
    pub p_grid: Vec<f64>,
    pub trials: usize,
    pub seed: Seed,
    pub l_max: usize,
    pub stage1: Stage1Variant,
    /// Record wall time per trial; off by default so output is reproducible.
    pub timing: bool,
}

impl SweepSpec {
    pub fn new(model: ModelConfig, p_grid: Vec<f64>, trials: usize, seed: Seed) -> Self {
        SweepSpec { model, p_grid, trials, seed, l_max: 2, stage1: Stage1Variant::GraphOnly, timing: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.p_grid.is_empty() {
            return Err(Error::InvalidConfig("p grid is empty".into()));
        }
        if let Some(&bad) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(bad));
        }
        if self.p_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("p grid must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Seed of one `(p, trial)` cell; independent of the rest of the grid.
    pub fn trial_seed(&self, p_index: usize, trial: usize) -> Seed {
        self.seed.child("cell", p_index as u64).child("trial", trial as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialMetrics {
    pub max_norm: f64,
    pub eta: f64,
    pub exact_recovery: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p_index: usize,
    pub p: f64,
    pub trial: usize,
    pub seed: Seed,
    /// Metrics, or the error code of the failed stage.
    pub outcome: std::result::Result<TrialMetrics, &'static str>,
    pub elapsed_ms: Option<f64>,
}

/// Generates and estimates one instance.
pub fn run_trial(spec: &SweepSpec, p_index: usize, trial: usize) -> Result<SweepRow> {
    let p = spec.p_grid[p_index];
    let seed = spec.trial_seed(p_index, trial);
    let instance = generate_instance(&spec.model, p, seed)?;
    let mut config = EstimatorConfig::new(spec.model.k(), spec.model.d(), seed.child("estimate", 0));
    config.l_max = spec.l_max;
    config.stage1 = spec.stage1;

    let start = Instant::now();
    let result = estimate(&instance.ratings, &instance.graph, &config);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let truth = instance.model.induce_matrix();
    let outcome = match result {
        Ok(res) => Ok(TrialMetrics {
            max_norm: max_norm_error(&res.matrix, &truth)?,
            eta: cluster_error_rate(&res.clusters, instance.model.assignment())?,
            exact_recovery: exact_recovery(&res.matrix, &truth)?,
        }),
        Err(e) => Err(e.code()),
    };
    Ok(SweepRow { p_index, p, trial, seed, outcome, elapsed_ms: spec.timing.then_some(elapsed) })
}

/// Runs every `(p, trial)` cell. Rows come back in grid order regardless of
/// `threads`.
pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.model.model()?;
    let cells: Vec<(usize, usize)> =
        (0..spec.p_grid.len()).flat_map(|i| (0..spec.trials).map(move |t| (i, t))).collect();
    if threads <= 1 {
        return cells.iter().map(|&(i, t)| run_trial(spec, i, t)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| cells.par_iter().map(|&(i, t)| run_trial(spec, i, t)).collect())
}

pub fn rows_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{ROW_HEADER}\n");
    for r in rows {
        let elapsed = r.elapsed_ms.map(|e| format!("{e:.3}")).unwrap_or_default();
        let (status, metrics) = match &r.outcome {
            Ok(m) => ("ok", format!("{},{},{}", m.max_norm, m.eta, u8::from(m.exact_recovery))),
            Err(code) => (*code, ",,".to_string()),
        };
        writeln!(out, "{},{},{},{},{status},{metrics},{elapsed}", r.p_index, r.p, r.trial, r.seed.value())
            .expect("writing to a String");
    }
    out
}

/// Per-p summary of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub p_index: usize,
    pub p: f64,
    pub trials: usize,
    pub errors: usize,
    /// Means over trials that completed; `None` when every trial failed.
    pub mean_max_norm: Option<f64>,
    pub mean_eta: Option<f64>,
    /// Exact recoveries over all trials; failed trials count as misses.
    pub success_rate: f64,
}

pub fn aggregate(rows: &[SweepRow]) -> Vec<AggregateRow> {
    let mut out: Vec<AggregateRow> = Vec::new();
    for chunk in rows.chunk_by(|a, b| a.p_index == b.p_index) {
        let ok: Vec<&TrialMetrics> = chunk.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let mean = |f: fn(&TrialMetrics) -> f64| {
            (!ok.is_empty()).then(|| ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64)
        };
        out.push(AggregateRow {
            p_index: chunk[0].p_index,
            p: chunk[0].p,
            trials: chunk.len(),
            errors: chunk.len() - ok.len(),
            mean_max_norm: mean(|m| m.max_norm),
            mean_eta: mean(|m| m.eta),
            success_rate: ok.iter().filter(|m| m.exact_recovery).count() as f64 / chunk.len() as f64,
        });
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for a in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            a.p_index,
            a.p,
            a.trials,
            a.errors,
            opt(a.mean_max_norm),
            opt(a.mean_eta),
            a.success_rate
        )
        .expect("writing to a String");
    }
    out
}
