//! Plain-text file formats.
//!
//! Every file starts with a `# <kind> key=value ...` header followed by
//! tab-separated lines. Indices are 0-based and floats use Rust's shortest
//! round-trip representation, so writing a parsed file reproduces it byte for
//! byte.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{ClusterAssignment, LevelSet, PreferenceModel, Rating, RatingObservation, SocialGraph};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_header(line: Option<&str>, kind: &str, keys: &[&str]) -> Result<Vec<usize>> {
    let line = line.ok_or_else(|| parse_err(1, format!("missing '# {kind}' header")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some("#") || parts.next() != Some(kind) {
        return Err(parse_err(1, format!("expected '# {kind}' header, found '{line}'")));
    }
    let fields: Vec<(&str, &str)> = parts.filter_map(|p| p.split_once('=')).collect();
    keys.iter()
        .map(|key| {
            let (_, v) = fields
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| parse_err(1, format!("header lacks '{key}='")))?;
            v.parse().map_err(|_| parse_err(1, format!("bad value for '{key}': '{v}'")))
        })
        .collect()
}

fn fields(line: &str, lineno: usize, expected: usize) -> Result<Vec<&str>> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() != expected {
        return Err(parse_err(lineno, format!("expected {expected} tab-separated fields, found {}", parts.len())));
    }
    Ok(parts)
}

fn number<T: std::str::FromStr>(s: &str, lineno: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(lineno, format!("invalid {what} '{s}'")))
}

/// Non-empty body lines with their 1-based line numbers.
fn body(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().skip(1).map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.is_empty())
}

pub fn write_graph(graph: &SocialGraph) -> String {
    let mut out = format!("# graph n={}\n", graph.n());
    for (u, v) in graph.edges() {
        writeln!(out, "{u}\t{v}").expect("writing to a String");
    }
    out
}

pub fn parse_graph(text: &str) -> Result<SocialGraph> {
    let n = parse_header(text.lines().next(), "graph", &["n"])?[0];
    let mut edges = Vec::new();
    for (lineno, line) in body(text) {
        let f = fields(line, lineno, 2)?;
        let (u, v): (usize, usize) = (number(f[0], lineno, "node")?, number(f[1], lineno, "node")?);
        if u >= v || v >= n {
            return Err(parse_err(lineno, format!("edge ({u}, {v}) must satisfy u < v < {n}")));
        }
        edges.push((u, v));
    }
    SocialGraph::from_edges(n, &edges)
}

pub fn write_ratings(obs: &RatingObservation) -> String {
    let mut out = format!("# ratings n={} m={}\n", obs.n(), obs.m());
    for r in obs.entries() {
        writeln!(out, "{}\t{}\t{}", r.user, r.item, r.value).expect("writing to a String");
    }
    out
}

pub fn parse_ratings(text: &str) -> Result<RatingObservation> {
    let dims = parse_header(text.lines().next(), "ratings", &["n", "m"])?;
    let (n, m) = (dims[0], dims[1]);
    let mut entries = Vec::new();
    for (lineno, line) in body(text) {
        let f = fields(line, lineno, 3)?;
        let user: usize = number(f[0], lineno, "user")?;
        let item: usize = number(f[1], lineno, "item")?;
        let value: i8 = number(f[2], lineno, "rating")?;
        if user >= n || item >= m || (value != 1 && value != -1) {
            return Err(parse_err(lineno, format!("rating ({user}, {item}, {value}) out of range")));
        }
        entries.push(Rating { user, item, value });
    }
    RatingObservation::new(n, m, entries)
}

fn join<T: std::fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t")
}

/// Levels line, assignment line, then one line of level indices per cluster.
pub fn write_model(model: &PreferenceModel) -> String {
    let mut out = format!(
        "# truth n={} m={} k={} d={}\n",
        model.n(),
        model.m(),
        model.k(),
        model.levels().len()
    );
    writeln!(out, "{}", join(model.levels().values())).expect("writing to a String");
    writeln!(out, "{}", join(model.assignment().labels())).expect("writing to a String");
    for k in 0..model.k() {
        writeln!(out, "{}", join(model.vector_indices(k))).expect("writing to a String");
    }
    out
}

pub fn parse_model(text: &str) -> Result<PreferenceModel> {
    let dims = parse_header(text.lines().next(), "truth", &["n", "m", "k", "d"])?;
    let (n, m, k, d) = (dims[0], dims[1], dims[2], dims[3]);
    let lines: Vec<(usize, &str)> = body(text).collect();
    if lines.len() != 2 + k {
        return Err(parse_err(lines.last().map_or(1, |l| l.0), format!("expected {} lines after the header", 2 + k)));
    }
    let (ln, levels_line) = lines[0];
    let levels: Vec<f64> = fields(levels_line, ln, d)?.iter().map(|s| number(s, ln, "level")).collect::<Result<_>>()?;
    let (ln, assign_line) = lines[1];
    let labels: Vec<usize> =
        fields(assign_line, ln, n)?.iter().map(|s| number(s, ln, "cluster label")).collect::<Result<_>>()?;
    let mut vectors = Vec::with_capacity(k);
    for &(ln, line) in &lines[2..] {
        vectors.push(fields(line, ln, m)?.iter().map(|s| number(s, ln, "level index")).collect::<Result<Vec<usize>>>()?);
    }
    let set = LevelSet::new(&levels)?;
    if set.values() != levels.as_slice() {
        return Err(parse_err(lines[0].0, "levels must be strictly increasing"));
    }
    PreferenceModel::new(set, ClusterAssignment::new(labels, k)?, vectors)
}

pub fn write_matrix(r: &Array2<f64>) -> String {
    let mut out = format!("# matrix n={} m={}\n", r.nrows(), r.ncols());
    for row in r.rows() {
        writeln!(out, "{}", join(row.iter())).expect("writing to a String");
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let dims = parse_header(text.lines().next(), "matrix", &["n", "m"])?;
    let (n, m) = (dims[0], dims[1]);
    let mut values = Vec::with_capacity(n * m);
    let mut rows = 0;
    for (lineno, line) in body(text) {
        for s in fields(line, lineno, m)? {
            values.push(number::<f64>(s, lineno, "value")?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(text.lines().count(), format!("expected {n} rows, found {rows}")));
    }
    Ok(Array2::from_shape_vec((n, m), values).expect("shape checked row by row"))
}

/// An estimate file: either a full model or a bare matrix.
#[derive(Debug, Clone)]
pub enum EstimateFile {
    Model(PreferenceModel),
    Matrix(Array2<f64>),
}

impl EstimateFile {
    pub fn matrix(&self) -> Array2<f64> {
        match self {
            EstimateFile::Model(m) => m.induce_matrix(),
            EstimateFile::Matrix(r) => r.clone(),
        }
    }
}

pub fn parse_estimate(text: &str) -> Result<EstimateFile> {
    if text.starts_with("# matrix") {
        parse_matrix(text).map(EstimateFile::Matrix)
    } else {
        parse_model(text).map(EstimateFile::Model)
    }
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
