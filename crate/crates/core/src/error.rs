use thiserror::Error;

/// Errors raised across the estimation pipeline.
///
/// Variants are grouped by the layer that produces them; [`Error::code`]
/// gives a stable module-qualified identifier for the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // model
    #[error("level set is empty")]
    EmptyLevels,
    #[error("level {0} is outside the open interval (0, 1)")]
    LevelOutOfRange(f64),
    #[error("level {0} appears more than once")]
    DuplicateLevel(f64),
    #[error("sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid cluster assignment: {0}")]
    InvalidAssignment(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    // synth
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("observation set is empty")]
    EmptyObservation,
    #[error("train fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),

    // theory
    #[error("at least two levels are required")]
    SingleLevel,
    #[error("gamma {0} is outside (0, 1)")]
    InvalidGamma(f64),
    #[error("collapsed vectors of clusters {0} and {1} coincide")]
    DegeneratePair(usize, usize),

    // spectral
    #[error("graph has no edges; its adjacency spectrum is identically zero")]
    EmptyGraph,
    #[error("requested {requested} components from {available} nodes")]
    TooManyComponents { requested: usize, available: usize },

    // levels
    #[error("no observed ratings for item {item} in cluster {cluster}")]
    NoObservations { cluster: usize, item: usize },
    #[error("cluster {cluster}: gave up after {attempts} redraws of unobserved items")]
    ExhaustedRedraws { cluster: usize, attempts: usize },
    #[error("need at least {needed} ratio samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    // refine
    #[error("partition has no cluster with two or more members")]
    DegeneratePartition,

    // estimator
    #[error("cluster {0} is empty at the start of level recovery")]
    EmptyClusterAtStage2i(usize),
    #[error("cluster {0} is empty after refinement")]
    EmptyCluster(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("search space of {0} candidates exceeds the enumeration limit")]
    InstanceTooLarge(u128),

    // metrics
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("cluster matching supports at most 8 clusters, got {0}")]
    TooManyClusters(usize),

    // cli
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Module-qualified error code, e.g. `levels::no_observations`.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            EmptyLevels => "model::empty_levels",
            LevelOutOfRange(_) => "model::level_out_of_range",
            DuplicateLevel(_) => "model::duplicate_level",
            LengthMismatch(..) => "model::length_mismatch",
            InvalidAssignment(_) => "model::invalid_assignment",
            InvalidModel(_) => "model::invalid_model",
            InvalidObservation(_) => "model::invalid_observation",
            InvalidGraph(_) => "model::invalid_graph",
            InvalidProbability(_) => "synth::invalid_probability",
            EmptyObservation => "synth::empty_observation",
            InvalidFraction(_) => "synth::invalid_fraction",
            SingleLevel => "theory::single_level",
            InvalidGamma(_) => "theory::invalid_gamma",
            DegeneratePair(..) => "theory::degenerate_pair",
            EmptyGraph => "spectral::empty_graph",
            TooManyComponents { .. } => "spectral::too_many_components",
            NoObservations { .. } => "levels::no_observations",
            ExhaustedRedraws { .. } => "levels::exhausted_redraws",
            TooFewSamples { .. } => "levels::too_few_samples",
            DegeneratePartition => "refine::degenerate_partition",
            EmptyClusterAtStage2i(_) => "estimator::empty_cluster_at_stage2i",
            EmptyCluster(_) => "estimator::empty_cluster",
            DimensionMismatch(_) => "estimator::dimension_mismatch",
            InstanceTooLarge(_) => "estimator::instance_too_large",
            ShapeMismatch(_) => "metrics::shape_mismatch",
            EmptyTestSet => "metrics::empty_test_set",
            TooManyClusters(_) => "metrics::too_many_clusters",
            Parse { .. } => "cli::parse_error",
            InvalidConfig(_) => "cli::invalid_config",
            Io(_) => "cli::io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
