//! Estimation of discrete-valued latent preference matrices from sparse
//! binary ratings and a social graph.
//!
//! Users fall into `K` clusters that share a preference vector whose entries
//! come from a finite set of levels. Given a fraction of `+1`/`-1` ratings and
//! a graph drawn from a stochastic block model over the clusters, [`estimate`]
//! recovers the clusters, the levels and the full matrix. [`theory`] computes
//! the observation rate above which exact recovery is possible.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod levels;
pub mod metrics;
pub mod model;
pub mod refine;
pub mod spectral;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use estimator::{estimate, mle_oracle, neg_log_likelihood, EstimationResult, EstimatorConfig, Stage1Variant};
pub use metrics::{cluster_error_rate, exact_recovery, mae, max_norm_error, EvalReport};
pub use model::{ClusterAssignment, LevelSet, PreferenceModel, Rating, RatingObservation, SocialGraph};
pub use synth::{sample_noisy_sbm, sample_ratings, sample_sbm, split_train_test, SbmParams, Seed};
pub use theory::{optimal_rate_multi, optimal_rate_two_cluster, ThresholdReport};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/thresholds.md")]
    mod thresholds {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/stages.md")]
    mod stages {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
