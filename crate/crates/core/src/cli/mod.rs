//! The `preflex` command-line tool.
//!
//! Exit codes: 0 success, 2 usage, 3 unreadable or inconsistent data,
//! 4 numerical or stage failure. `PREFLEX_SEED` overrides `--seed`.

pub mod config;
pub mod io;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, Stage1Variant};
use crate::metrics::{cluster_error_rate, exact_recovery, mae, max_norm_error};
use crate::model::LevelSet;
use crate::synth::Seed;
use crate::theory::{optimal_rate_two_cluster, ThresholdReport};
use config::{generate_instance, parse_list, parse_vectors, spec_file_args, ModelConfig};
use sweep::{aggregate, aggregate_csv, rows_csv, run_sweep, SweepSpec};

pub const SEED_ENV: &str = "PREFLEX_SEED";

#[derive(Debug, Parser)]
#[command(name = "preflex", version, about = "Latent preference estimation with graph side information")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic instance and write graph, ratings and truth files.
    Generate(GenerateArgs),
    /// Print the optimal observation rate of a configuration.
    Threshold(ThresholdArgs),
    /// Estimate the preference matrix from a ratings file and a graph file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo sweep over observation rates.
    #[command(after_help = "Row CSV columns: p_index,p,trial,seed,status,max_norm,eta,exact_recovery,elapsed_ms\n\
        Aggregate CSV columns: p_index,p,trials,errors,mean_max_norm,mean_eta,success_rate\n\
        status is 'ok' or the error code of the failed stage; elapsed_ms is empty without --timing.")]
    Sweep(SweepArgs),
    /// Score an estimate against ground truth and/or held-out ratings.
    #[command(after_help = "CSV columns: max_norm,mae,eta,exact_recovery (empty when not computable)")]
    Evaluate(EvaluateArgs),
}

/// Model flags; explicit values override the preset.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Start from a named configuration (toy, two-half, two-quarter, three-cluster).
    #[arg(long)]
    pub preset: Option<String>,
    /// Comma-separated levels, e.g. 0.2,0.5,0.7.
    #[arg(long)]
    pub levels: Option<String>,
    /// Comma-separated cluster sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Number of users, split evenly across clusters when --sizes is absent.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of items.
    #[arg(long)]
    pub m: Option<usize>,
    /// Block layouts of level indices, one per cluster, separated by ';'.
    #[arg(long)]
    pub vectors: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Half-width of the uniform edge-probability noise.
    #[arg(long)]
    pub theta: Option<f64>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<ModelConfig> {
        let mut c = match &self.preset {
            Some(name) => ModelConfig::preset(name)?,
            None => ModelConfig {
                levels: Vec::new(),
                sizes: Vec::new(),
                m: 0,
                blocks: Vec::new(),
                alpha: f64::NAN,
                beta: f64::NAN,
                theta: 0.0,
            },
        };
        if let Some(s) = &self.levels {
            c.levels = parse_list(s, "level")?;
        }
        if let Some(s) = &self.vectors {
            c.blocks = parse_vectors(s)?;
        }
        if let Some(s) = &self.sizes {
            c.sizes = parse_list(s, "cluster size")?;
        } else if let Some(n) = self.n {
            let k = if c.blocks.is_empty() { c.sizes.len().max(2) } else { c.blocks.len() };
            c.sizes = (0..k).map(|i| n / k + usize::from(i < n % k)).collect();
        }
        if let Some(m) = self.m {
            c.m = m;
        }
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.beta = self.beta.unwrap_or(c.beta);
        c.theta = self.theta.unwrap_or(c.theta);
        if c.levels.is_empty() || c.sizes.is_empty() || c.blocks.is_empty() || c.m == 0 {
            return Err(Error::InvalidConfig(
                "model needs --preset or all of --levels, --n/--sizes, --m and --vectors".into(),
            ));
        }
        if c.alpha.is_nan() || c.beta.is_nan() {
            return Err(Error::InvalidConfig("model needs --alpha and --beta".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Stage1Arg {
    GraphOnly,
    InformationSplit,
}

impl From<Stage1Arg> for Stage1Variant {
    fn from(a: Stage1Arg) -> Self {
        match a {
            Stage1Arg::GraphOnly => Stage1Variant::GraphOnly,
            Stage1Arg::InformationSplit => Stage1Variant::InformationSplit,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Observation rate.
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for graph.tsv, ratings.tsv and truth.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Use the two equal-cluster formula with this fraction of differing items.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    /// Number of clusters.
    #[arg(long = "K", visible_alias = "k")]
    pub k: usize,
    /// Number of levels.
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub l_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "graph-only")]
    pub stage1: Stage1Arg,
    /// Output directory for model.txt, matrix.tsv and diagnostics.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Comma-separated observation rates.
    #[arg(long, conflicts_with = "p_scale")]
    pub p_grid: Option<String>,
    /// Comma-separated multiples of the configuration's optimal rate.
    #[arg(long)]
    pub p_scale: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 2)]
    pub l_max: usize,
    #[arg(long, value_enum, default_value = "graph-only")]
    pub stage1: Stage1Arg,
    /// Record per-trial wall time (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Row CSV path; rows go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Aggregate CSV path; defaults to the row path with an `.agg.csv` suffix.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Estimate as a model file or a matrix file.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Ground-truth model file.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Held-out ratings file.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    use Error::*;
    match e {
        InvalidConfig(_) | InvalidProbability(_) | InvalidFraction(_) | InvalidGamma(_) => 2,
        Parse { .. } | Io(_) | ShapeMismatch(_) | DimensionMismatch(_) | InvalidObservation(_) | InvalidGraph(_)
        | InvalidModel(_) | InvalidAssignment(_) | LengthMismatch(..) | EmptyLevels | LevelOutOfRange(_)
        | DuplicateLevel(_) | EmptyTestSet | EmptyObservation => 3,
        _ => 4,
    }
}

/// Replaces `--spec <file>` with the flags the file lists, placed right after
/// the subcommand so explicit flags still win.
pub fn expand_spec(args: Vec<String>) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut spec = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        if a == "--spec" {
            spec = Some(iter.next().ok_or_else(|| Error::InvalidConfig("--spec needs a file".into()))?);
        } else if let Some(path) = a.strip_prefix("--spec=") {
            spec = Some(path.to_string());
        } else {
            out.push(a);
        }
    }
    if let Some(path) = spec {
        let extra = spec_file_args(&io::read(Path::new(&path))?)?;
        let at = 2.min(out.len());
        out.splice(at..at, extra);
    }
    Ok(out)
}

fn resolve_seed(flag: u64) -> Result<Seed> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Seed::new)
            .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(Seed::new(flag)),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: Vec<String>) -> i32 {
    let args = match expand_spec(args) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error[{}]: {e}", e.code());
    exit_code(e)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Threshold(a) => cmd_threshold(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let config = a.model.resolve()?;
    let instance = generate_instance(&config, a.p, resolve_seed(a.seed)?)?;
    create_dir(&a.out)?;
    io::write(&a.out.join("graph.tsv"), &io::write_graph(&instance.graph))?;
    io::write(&a.out.join("ratings.tsv"), &io::write_ratings(&instance.ratings))?;
    io::write(&a.out.join("truth.txt"), &io::write_model(&instance.model))?;
    Ok(())
}

pub const THRESHOLD_HEADER: &str = "p_star,d_h_min,pair_low,pair_high,i_s,graph_term,rating_term,binding_term,sample_complexity";

pub fn threshold_csv_row(r: &ThresholdReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.p_star,
        r.d_h_min,
        r.min_pair.0,
        r.min_pair.1,
        r.i_s,
        r.graph_term,
        r.rating_term,
        r.binding_term.as_str(),
        r.sample_complexity
    )
}

pub fn cmd_threshold(a: &ThresholdArgs) -> Result<()> {
    let report = match a.gamma {
        Some(gamma) => {
            let m = &a.model;
            let base = m.preset.as_deref().map(ModelConfig::preset).transpose()?;
            let levels = match (&m.levels, &base) {
                (Some(s), _) => parse_list(s, "level")?,
                (None, Some(b)) => b.levels.clone(),
                (None, None) => return Err(Error::InvalidConfig("--gamma needs --levels".into())),
            };
            let pick = |flag: Option<f64>, preset: Option<f64>, name: &str| {
                flag.or(preset).ok_or_else(|| Error::InvalidConfig(format!("--gamma needs --{name}")))
            };
            let n = m.n.or(base.as_ref().map(|b| b.n())).ok_or_else(|| Error::InvalidConfig("--gamma needs --n".into()))?;
            let items = m.m.or(base.as_ref().map(|b| b.m)).ok_or_else(|| Error::InvalidConfig("--gamma needs --m".into()))?;
            let alpha = pick(m.alpha, base.as_ref().map(|b| b.alpha), "alpha")?;
            let beta = pick(m.beta, base.as_ref().map(|b| b.beta), "beta")?;
            optimal_rate_two_cluster(n, items, gamma, alpha, beta, &LevelSet::new(&levels)?)?
        }
        None => a.model.resolve()?.threshold()?,
    };
    match a.format {
        Format::Text => {
            println!("p_star: {}", report.p_star);
            println!("d_h_min: {}", report.d_h_min);
            println!("min_pair: ({}, {})", report.min_pair.0, report.min_pair.1);
            println!("i_s: {}", report.i_s);
            println!("graph_term: {}", report.graph_term);
            println!("rating_term: {}", report.rating_term);
            println!("binding_term: {}", report.binding_term.as_str());
            println!("sample_complexity: {}", report.sample_complexity);
        }
        Format::Csv => {
            println!("{THRESHOLD_HEADER}");
            println!("{}", threshold_csv_row(&report));
        }
    }
    Ok(())
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let ratings = io::parse_ratings(&io::read(&a.ratings)?)?;
    let graph = io::parse_graph(&io::read(&a.graph)?)?;
    let mut config = EstimatorConfig::new(a.k, a.d, resolve_seed(a.seed)?);
    config.l_max = a.l_max;
    config.stage1 = a.stage1.into();
    let result = estimate(&ratings, &graph, &config)?;

    create_dir(&a.out)?;
    io::write(&a.out.join("model.txt"), &io::write_model(&result.model()?))?;
    io::write(&a.out.join("matrix.tsv"), &io::write_matrix(&result.matrix))?;
    let mut diag = String::new();
    diag.push_str(&format!("stage1={}\n", config.stage1.as_str()));
    diag.push_str(&format!("alpha_hat={}\nbeta_hat={}\n", result.alpha_hat, result.beta_hat));
    let levels: Vec<String> = result.levels.values.iter().map(f64::to_string).collect();
    diag.push_str(&format!("levels={}\n", levels.join(",")));
    diag.push_str(&format!("degenerate_levels={}\n", result.levels.degenerate));
    for (l, it) in result.iterations.iter().enumerate() {
        let moves: Vec<String> = it.refinement.moves.iter().map(usize::to_string).collect();
        diag.push_str(&format!("iteration{}_moves={}\n", l + 1, moves.join(",")));
    }
    io::write(&a.out.join("diagnostics.txt"), &diag)?;
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let model = a.model.resolve()?;
    let p_grid = match (&a.p_grid, &a.p_scale) {
        (Some(g), _) => parse_list(g, "observation rate")?,
        (None, Some(s)) => {
            let p_star = model.threshold()?.p_star;
            parse_list::<f64>(s, "scale")?.into_iter().map(|x| x * p_star).collect()
        }
        (None, None) => return Err(Error::InvalidConfig("sweep needs --p-grid or --p-scale".into())),
    };
    let mut spec = SweepSpec::new(model, p_grid, a.trials, resolve_seed(a.seed)?);
    spec.l_max = a.l_max;
    spec.stage1 = a.stage1.into();
    spec.timing = a.timing;
    let rows = run_sweep(&spec, a.threads)?;
    let agg = aggregate_csv(&aggregate(&rows));
    match &a.out {
        Some(path) => {
            io::write(path, &rows_csv(&rows))?;
            let agg_path = a.aggregate.clone().unwrap_or_else(|| path.with_extension("agg.csv"));
            io::write(&agg_path, &agg)?;
        }
        None => {
            print!("{}", rows_csv(&rows));
            if let Some(path) = &a.aggregate {
                io::write(path, &agg)?;
            }
        }
    }
    Ok(())
}

pub const EVALUATE_HEADER: &str = "max_norm,mae,eta,exact_recovery";

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    if a.truth.is_none() && a.test.is_none() {
        return Err(Error::InvalidConfig("evaluate needs --truth and/or --test".into()));
    }
    let est = io::parse_estimate(&io::read(&a.estimate)?)?;
    let r_hat = est.matrix();
    let (mut max_norm, mut eta, mut exact, mut err) = (String::new(), String::new(), String::new(), String::new());
    if let Some(path) = &a.truth {
        let truth = io::parse_model(&io::read(path)?)?;
        let r = truth.induce_matrix();
        max_norm = max_norm_error(&r_hat, &r)?.to_string();
        exact = u8::from(exact_recovery(&r_hat, &r)?).to_string();
        if let io::EstimateFile::Model(model) = &est {
            if model.k() == truth.k() {
                eta = cluster_error_rate(model.assignment(), truth.assignment())?.to_string();
            }
        }
    }
    if let Some(path) = &a.test {
        err = mae(&r_hat, &io::parse_ratings(&io::read(path)?)?)?.to_string();
    }
    let csv = format!("{EVALUATE_HEADER}\n{max_norm},{err},{eta},{exact}\n");
    match &a.out {
        Some(path) => io::write(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(exit_code(&Error::Parse { line: 1, message: String::new() }), 3);
        assert_eq!(exit_code(&Error::ShapeMismatch(String::new())), 3);
        assert_eq!(exit_code(&Error::EmptyGraph), 4);
        assert_eq!(exit_code(&Error::InvalidConfig(String::new())), 2);
    }

    #[test]
    fn spec_flags_are_overridable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.txt");
        std::fs::write(&path, "preset=two-half\nalpha=0.6\n").unwrap();
        let args: Vec<String> = ["preflex", "threshold", "--spec", path.to_str().unwrap(), "--alpha", "0.65"]
            .map(String::from)
            .to_vec();
        let expanded = expand_spec(args).unwrap();
        assert_eq!(&expanded[2..6], ["--preset", "two-half", "--alpha", "0.6"]);
        let cli = Cli::try_parse_from(expanded).unwrap();
        let Command::Threshold(t) = cli.command else { panic!("wrong command") };
        assert_eq!(t.model.alpha, Some(0.65));
    }

    #[test]
    fn n_splits_evenly() {
        let args = ModelArgs {
            levels: Some("0.2,0.7".into()),
            n: Some(7),
            m: Some(4),
            vectors: Some("0,1;1,0".into()),
            alpha: Some(0.5),
            beta: Some(0.1),
            ..Default::default()
        };
        assert_eq!(args.resolve().unwrap().sizes, vec![4, 3]);
        assert!(ModelArgs::default().resolve().is_err());
    }
}
