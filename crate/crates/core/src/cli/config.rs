//! Model configuration shared by the subcommands.

use crate::error::{Error, Result};
use crate::model::{LevelSet, PreferenceModel, RatingObservation, SocialGraph};
use crate::synth::{sample_noisy_sbm, sample_ratings, SbmParams, Seed};
use crate::theory::{optimal_rate_multi, MultiClusterSpec, ThresholdReport};

/// Ground-truth model and graph parameters of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub levels: Vec<f64>,
    pub sizes: Vec<usize>,
    pub m: usize,
    /// Level indices per cluster; block `b` of `B` covers items `b*m/B ..`.
    pub blocks: Vec<Vec<usize>>,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
}

/// Named configurations.
pub const PRESETS: &[&str] = &["toy", "two-half", "two-quarter", "three-cluster"];

impl ModelConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let two = |blocks: [[usize; 4]; 2]| ModelConfig {
            levels: vec![0.2, 0.5, 0.7],
            sizes: vec![1000, 1000],
            m: 1000,
            blocks: blocks.iter().map(|b| b.to_vec()).collect(),
            alpha: 0.7,
            beta: 0.3,
            theta: 0.0,
        };
        Ok(match name {
            "toy" => ModelConfig {
                levels: vec![0.1, 1.0 / 3.0, 0.75],
                sizes: vec![3, 3, 6],
                m: 8,
                blocks: vec![
                    vec![2, 2, 0, 0, 1, 1, 2, 0],
                    vec![0, 1, 2, 2, 0, 1, 0, 2],
                    vec![1, 1, 1, 0, 2, 2, 0, 0],
                ],
                alpha: 0.8,
                beta: 0.2,
                theta: 0.0,
            },
            "two-half" => two([[0, 1, 1, 2], [0, 1, 2, 1]]),
            "two-quarter" => two([[0, 1, 1, 2], [0, 1, 1, 1]]),
            "three-cluster" => ModelConfig {
                levels: vec![0.05, 0.5, 0.95],
                sizes: vec![467, 590, 580],
                m: 1000,
                blocks: vec![vec![0, 0, 1, 2, 2], vec![0, 2, 0, 0, 0], vec![2, 2, 2, 2, 2]],
                alpha: 0.1,
                beta: 0.02,
                theta: 0.0,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset '{other}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        })
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn d(&self) -> usize {
        self.levels.len()
    }

    pub fn model(&self) -> Result<PreferenceModel> {
        if self.blocks.len() != self.sizes.len() {
            return Err(Error::InvalidConfig(format!(
                "{} vectors for {} clusters",
                self.blocks.len(),
                self.sizes.len()
            )));
        }
        PreferenceModel::from_blocks(LevelSet::new(&self.levels)?, &self.sizes, &self.blocks, self.m)
    }

    pub fn sbm(&self) -> Result<SbmParams> {
        SbmParams::with_noise(self.alpha, self.beta, self.theta)
    }

    /// Optimal observation rate of this configuration.
    pub fn threshold(&self) -> Result<ThresholdReport> {
        let model = self.model()?;
        let vectors = (0..model.k()).map(|k| model.vector_values(k)).collect();
        let spec = MultiClusterSpec::new(self.sizes.clone(), vectors, model.levels().clone(), self.alpha, self.beta)?;
        optimal_rate_multi(&spec)
    }
}

/// A sampled synthetic instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: PreferenceModel,
    pub graph: SocialGraph,
    pub ratings: RatingObservation,
}

/// Samples the graph and ratings of one instance from independent child seeds.
pub fn generate_instance(config: &ModelConfig, p: f64, seed: Seed) -> Result<Instance> {
    let model = config.model()?;
    let graph = sample_noisy_sbm(model.assignment(), config.sbm()?, seed.child("graph", 0))?;
    let ratings = sample_ratings(&model.induce_matrix(), p, seed.child("ratings", 0))?;
    Ok(Instance { model, graph, ratings })
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::InvalidConfig(format!("invalid {what} '{x}'"))))
        .collect()
}

/// `0,1,1,2;0,1,2,1` becomes one block layout per cluster.
pub fn parse_vectors(s: &str) -> Result<Vec<Vec<usize>>> {
    s.split(';').map(|v| parse_list(v, "level index")).collect()
}

/// Turns `key=value` lines into `--key value` arguments.
///
/// Blank lines and lines starting with `#` are skipped. `key=true` becomes a
/// bare `--key` and `key=false` is dropped.
pub fn spec_file_args(text: &str) -> Result<Vec<String>> {
    let mut args = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key=value, found '{line}'") })?;
        let (key, value) = (key.trim(), value.trim());
        match value {
            "true" => args.push(format!("--{key}")),
            "false" => {}
            _ => {
                args.push(format!("--{key}"));
                args.push(value.to_string());
            }
        }
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        for name in PRESETS {
            let c = ModelConfig::preset(name).unwrap();
            let model = c.model().unwrap();
            assert_eq!(model.n(), c.n());
            assert!(c.threshold().is_ok());
        }
        assert!(ModelConfig::preset("nope").is_err());
    }

    #[test]
    fn two_half_threshold_is_rating_bound() {
        let r = ModelConfig::preset("two-half").unwrap().threshold().unwrap();
        let d2 = 0.021_093_687_069_296_707;
        assert!((r.p_star - 2.0 * 1000f64.ln() / 2000.0 / d2).abs() < 1e-12);
    }

    #[test]
    fn spec_lines_become_flags() {
        let args = spec_file_args("# comment\nn=10\n\ntiming=true\nquiet=false\nlevels = 0.2,0.5\n").unwrap();
        assert_eq!(args, vec!["--n", "10", "--timing", "--levels", "0.2,0.5"]);
        assert!(matches!(spec_file_args("oops\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn vector_layouts_parse() {
        assert_eq!(parse_vectors("0,1;2,2").unwrap(), vec![vec![0, 1], vec![2, 2]]);
        assert!(parse_vectors("0,x").is_err());
    }
}
