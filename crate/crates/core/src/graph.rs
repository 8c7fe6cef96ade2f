//! Weighted communication graphs and their generators.

use ndarray::Array2;
use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QapError, Result};
use crate::fmt::fmt9;
use crate::rng::rng_from_seed;

pub const GRAPH_HEADER: &str = "qapgraph v1";

/// Symmetric tie-strength matrix over `m` phones with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    w: Array2<f64>,
}

impl CommGraph {
    /// Validates symmetry, range and the unit diagonal.
    pub fn new(w: Array2<f64>) -> Result<Self> {
        let (rows, cols) = w.dim();
        if rows != cols {
            return Err(QapError::Dimension(format!(
                "weight matrix must be square, got {rows}x{cols}"
            )));
        }
        if rows == 0 {
            return Err(QapError::Config("graph needs at least one node".into()));
        }
        for i in 0..rows {
            if w[[i, i]] != 1.0 {
                return Err(QapError::Config(format!(
                    "diagonal entry {i} is {} (must be 1)",
                    w[[i, i]]
                )));
            }
            for j in 0..i {
                let x = w[[i, j]];
                if !(0.0..=1.0).contains(&x) {
                    return Err(QapError::Config(format!(
                        "weight ({i},{j}) = {x} outside [0,1]"
                    )));
                }
                if x != w[[j, i]] {
                    return Err(QapError::Config(format!("weight ({i},{j}) not symmetric")));
                }
            }
        }
        Ok(Self { w })
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[[i, j]]
    }

    /// `w̄ = 1 − w`; symmetric with zero diagonal.
    pub fn complement(&self) -> Array2<f64> {
        self.w.mapv(|x| 1.0 - x)
    }

    /// Builds a graph from a complement matrix, restoring the unit diagonal.
    pub fn from_complement(w_bar: &Array2<f64>) -> Result<Self> {
        let mut w = w_bar.mapv(|x| 1.0 - x);
        for i in 0..w.nrows().min(w.ncols()) {
            w[[i, i]] = 1.0;
        }
        Self::new(w)
    }

    /// Writes the `qapgraph v1` text form.
    pub fn write_to<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let m = self.m();
        writeln!(out, "{GRAPH_HEADER} m={m}")?;
        for i in 0..m {
            let row: Vec<String> = (0..m).map(|j| fmt9(self.w[[i, j]])).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("graph text is ascii")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        parse_graph_lines(&mut lines)
    }
}

/// Reads a `qapgraph v1` block from numbered lines. Rows that disagree with
/// their transpose by more than 1e-9 are rejected; smaller disagreements are
/// averaged away.
pub(crate) fn parse_graph_lines<'a, I>(lines: &mut I) -> Result<CommGraph>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let bad = |line: usize, msg: String| QapError::Format {
        what: "graph file",
        line,
        msg,
    };
    let (hline, header) = next_content(lines).ok_or_else(|| bad(0, "missing header".into()))?;
    let m = parse_header(header, GRAPH_HEADER, "m")
        .map_err(|msg| bad(hline, msg))?
        .to_owned();
    let m: usize = m.parse().map_err(|_| bad(hline, format!("bad node count {m:?}")))?;
    if m == 0 {
        return Err(bad(hline, "node count must be positive".into()));
    }
    let mut w = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        let (ln, row) = next_content(lines)
            .ok_or_else(|| bad(hline + i + 1, format!("expected {m} rows, found {i}")))?;
        let vals: Vec<&str> = row.split_whitespace().collect();
        if vals.len() != m {
            return Err(bad(ln, format!("expected {m} values, found {}", vals.len())));
        }
        for (j, v) in vals.iter().enumerate() {
            let x: f64 = v.parse().map_err(|_| bad(ln, format!("bad number {v:?}")))?;
            if !x.is_finite() {
                return Err(bad(ln, format!("non-finite weight {v:?}")));
            }
            w[[i, j]] = x;
        }
    }
    for i in 0..m {
        for j in 0..i {
            let (a, b) = (w[[i, j]], w[[j, i]]);
            if (a - b).abs() > 1e-9 {
                return Err(QapError::Config(format!(
                    "graph not symmetric at ({i},{j}): {a} vs {b}"
                )));
            }
            let avg = 0.5 * (a + b);
            w[[i, j]] = avg;
            w[[j, i]] = avg;
        }
    }
    CommGraph::new(w)
}

pub(crate) fn next_content<'a, I>(lines: &mut I) -> Option<(usize, &'a str)>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    lines.find(|(_, l)| !l.trim().is_empty())
}

/// Checks `<magic> key=value ...` and returns the value of `key`.
pub(crate) fn parse_header<'a>(
    line: &'a str,
    magic: &str,
    key: &str,
) -> std::result::Result<&'a str, String> {
    let rest = line
        .trim()
        .strip_prefix(magic)
        .ok_or_else(|| format!("expected header {magic:?}, got {line:?}"))?;
    rest.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| format!("header lacks {key}="))
}

/// Planted-partition random graph parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub cluster_sizes: Vec<usize>,
    pub p_within: f64,
    pub p_between: f64,
    pub seed: u64,
}

impl SbmConfig {
    /// Splits `m` into clusters proportional to `proportions` by largest remainder.
    pub fn from_proportions(
        m: usize,
        proportions: &[f64],
        p_within: f64,
        p_between: f64,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            cluster_sizes: apportion(m, proportions)?,
            p_within,
            p_between,
            seed,
        })
    }

    /// `k` clusters as equal as largest remainder allows.
    pub fn equal_clusters(m: usize, k: usize, p_within: f64, p_between: f64, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(QapError::Config("need at least one cluster".into()));
        }
        Self::from_proportions(m, &vec![1.0 / k as f64; k], p_within, p_between, seed)
    }

    pub fn m(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_sizes.is_empty() {
            return Err(QapError::Config("SBM needs at least one cluster".into()));
        }
        if self.cluster_sizes.contains(&0) {
            return Err(QapError::Config("every SBM cluster needs at least one node".into()));
        }
        for (name, p) in [("p_within", self.p_within), ("p_between", self.p_between)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(QapError::Config(format!("{name} = {p} outside [0,1]")));
            }
        }
        Ok(())
    }

    /// Legal but unusual settings worth surfacing to the user.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.p_between > self.p_within {
            out.push(format!(
                "p_between ({}) exceeds p_within ({}): anti-community structure",
                self.p_between, self.p_within
            ));
        }
        out
    }

    /// Cluster label per node, clusters laid out contiguously.
    pub fn labels(&self) -> Vec<usize> {
        self.cluster_sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
            .collect()
    }
}

/// Largest-remainder apportionment of `total` into parts proportional to
/// `weights`. Every part must come out at least 1.
pub fn apportion(total: usize, weights: &[f64]) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(QapError::Config("empty proportion vector".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(QapError::Config("proportions must be positive and finite".into()));
    }
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &idx in order.iter().take(total.saturating_sub(assigned)) {
        parts[idx] += 1;
    }
    if parts.contains(&0) {
        return Err(QapError::Config(format!(
            "cannot split {total} nodes into {} non-empty clusters",
            weights.len()
        )));
    }
    Ok(parts)
}

/// Binary planted-partition graph: each unordered pair is an independent
/// Bernoulli draw with `p_within` or `p_between`.
pub fn gen_sbm(cfg: &SbmConfig) -> Result<CommGraph> {
    cfg.validate()?;
    let labels = cfg.labels();
    let m = labels.len();
    let mut rng = rng_from_seed(cfg.seed);
    let mut w = Array2::<f64>::eye(m);
    for i in 0..m {
        for j in (i + 1)..m {
            let p = if labels[i] == labels[j] {
                cfg.p_within
            } else {
                cfg.p_between
            };
            if rng.gen_bool(p) {
                w[[i, j]] = 1.0;
                w[[j, i]] = 1.0;
            }
        }
    }
    CommGraph::new(w)
}

/// Independent Uniform(0,1) weight for every unordered pair.
pub fn gen_uniform(m: usize, seed: u64) -> Result<CommGraph> {
    if m < 2 {
        return Err(QapError::Config(format!("uniform graph needs m >= 2, got {m}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut w = Array2::<f64>::eye(m);
    for i in 0..m {
        for j in (i + 1)..m {
            let x: f64 = rng.sample(Open01);
            w[[i, j]] = x;
            w[[j, i]] = x;
        }
    }
    CommGraph::new(w)
}
