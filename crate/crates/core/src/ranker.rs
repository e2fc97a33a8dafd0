//! PageRank and LPageRank by fixed-point iteration.
//!
//! Both use the non-normalized recursion with `alpha` as the additive floor:
//!
//! ```text
//! PR(A)  = alpha + (1 - alpha) * sum_{B in parents(A)} PR(B) / N(B)
//! LPR(A) = alpha + (1 - alpha) * sum_{B in parents(A)} LPR(B) * P(B, A)
//! ```
//!
//! Dangling pages contribute nothing to anybody; there is no teleport
//! redistribution. Iteration starts from the uniform distribution and stops
//! once the largest per-page change between two iterates is at most
//! `epsilon`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checksum::content_checksum;
use crate::graph::{validate, LinkList, ProbGraph, Violation};

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

pub const RANK_FORMAT: &str = "logrank-rank";
pub const RANK_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl RankParams {
    pub fn validate(&self) -> Result<(), RankError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(RankError::InvalidParams(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(RankError::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(RankError::InvalidParams(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankKind {
    /// Plain PageRank over structural links.
    Pr,
    /// LPageRank over a probabilistic graph.
    Lpr,
}

impl fmt::Display for RankKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankKind::Pr => "pr",
            RankKind::Lpr => "lpr",
        })
    }
}

/// Scores of every page together with how the iteration ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    pub kind: RankKind,
    pub params: RankParams,
    pub pages: Vec<String>,
    pub scores: Vec<f64>,
    pub iterations_used: usize,
    pub final_residual: f64,
    /// Max-norm change after each iteration.
    pub residuals: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum RankError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("graph has no pages")]
    Empty,
    #[error("graph violates probability constraints: {}", join_violations(.0))]
    InvalidGraph(Vec<Violation>),
    #[error(
        "no convergence after {} iterations (residual {})",
        .partial.iterations_used,
        .partial.final_residual
    )]
    NotConverged { partial: Box<RankVector> },
    #[error("bad rank file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .take(5)
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl RankVector {
    pub fn get(&self, page: &str) -> Option<f64> {
        self.pages
            .binary_search_by(|p| p.as_str().cmp(page))
            .ok()
            .map(|i| self.scores[i])
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.pages.iter().map(String::as_str).zip(self.scores.iter().copied())
    }

    /// Pages sorted by descending score, ties by page id.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Checksum over `page<TAB>score` lines with scores in shortest
    /// round-trip form.
    pub fn checksum(&self) -> String {
        let mut text = String::new();
        for (p, s) in self.iter() {
            let _ = writeln!(text, "{p}\t{s:?}");
        }
        content_checksum(text.as_bytes())
    }

    /// JSON document: `meta` block plus a `scores` object keyed by page.
    /// `extra` pairs are recorded in the meta block.
    pub fn to_json(&self, extra: &BTreeMap<String, String>) -> Result<String, RankError> {
        let scores: BTreeMap<&str, f64> = self.iter().collect();
        let file = RankFileRef {
            meta: RankMeta {
                format: RANK_FORMAT.into(),
                version: RANK_VERSION,
                kind: self.kind,
                alpha: self.params.alpha,
                epsilon: self.params.epsilon,
                max_iterations: self.params.max_iterations,
                iterations_used: self.iterations_used,
                final_residual: self.final_residual,
                checksum: self.checksum(),
                extra: extra.clone(),
            },
            scores,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<(Self, BTreeMap<String, String>), RankError> {
        let file: RankFile = serde_json::from_str(text)?;
        let m = file.meta;
        if m.format != RANK_FORMAT || m.version != RANK_VERSION {
            return Err(RankError::Format(format!(
                "unsupported format {:?} version {}",
                m.format, m.version
            )));
        }
        let (pages, scores) = file.scores.into_iter().unzip();
        let rv = RankVector {
            kind: m.kind,
            params: RankParams {
                alpha: m.alpha,
                epsilon: m.epsilon,
                max_iterations: m.max_iterations,
            },
            pages,
            scores,
            iterations_used: m.iterations_used,
            final_residual: m.final_residual,
            residuals: Vec::new(),
        };
        let actual = rv.checksum();
        if actual != m.checksum {
            return Err(RankError::Format(format!(
                "checksum mismatch: header says {}, scores hash to {actual}",
                m.checksum
            )));
        }
        Ok((rv, m.extra))
    }
}

#[derive(Serialize, Deserialize)]
struct RankMeta {
    format: String,
    version: u32,
    kind: RankKind,
    alpha: f64,
    epsilon: f64,
    max_iterations: usize,
    iterations_used: usize,
    final_residual: f64,
    checksum: String,
    #[serde(default)]
    extra: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct RankFileRef<'a> {
    meta: RankMeta,
    scores: BTreeMap<&'a str, f64>,
}

#[derive(Deserialize)]
struct RankFile {
    meta: RankMeta,
    scores: BTreeMap<String, f64>,
}

/// Jacobi iteration driver shared by both rankers. `step` fills `next` from
/// `prev`.
fn iterate<F>(
    kind: RankKind,
    pages: Vec<String>,
    params: RankParams,
    mut step: F,
) -> Result<RankVector, RankError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = pages.len();
    let mut prev = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut residual = f64::INFINITY;
    for _ in 0..params.max_iterations {
        step(&prev, &mut next);
        residual = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        residuals.push(residual);
        std::mem::swap(&mut prev, &mut next);
        if residual <= params.epsilon {
            break;
        }
    }
    let result = RankVector {
        kind,
        params,
        pages,
        scores: prev,
        iterations_used: residuals.len(),
        final_residual: residual,
        residuals,
    };
    if result.final_residual <= params.epsilon {
        Ok(result)
    } else {
        Err(RankError::NotConverged {
            partial: Box::new(result),
        })
    }
}

/// PageRank over structural links, each link of `B` followed with
/// probability `1/N(B)`.
pub fn pagerank(links: &LinkList, params: RankParams) -> Result<RankVector, RankError> {
    params.validate()?;
    if links.is_empty() {
        return Err(RankError::Empty);
    }
    let pages: Vec<String> = links.pages().map(str::to_string).collect();
    let pos = |p: &str| pages.binary_search_by(|x| x.as_str().cmp(p)).unwrap();
    let mut out_degree = vec![0usize; pages.len()];
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); pages.len()];
    for (s, d) in links.edges() {
        let (s, d) = (pos(s), pos(d));
        out_degree[s] += 1;
        parents[d].push(s);
    }
    for p in &mut parents {
        p.sort_unstable();
    }
    let damp = 1.0 - params.alpha;
    let alpha = params.alpha;
    iterate(RankKind::Pr, pages, params, |prev, next| {
        for (a, slot) in next.iter_mut().enumerate() {
            let sum: f64 = parents[a]
                .iter()
                .map(|&b| prev[b] / out_degree[b] as f64)
                .sum();
            *slot = alpha + damp * sum;
        }
    })
}

/// LPageRank over a probabilistic graph. The graph must pass [`validate`].
pub fn lpagerank(g: &ProbGraph, params: RankParams) -> Result<RankVector, RankError> {
    params.validate()?;
    if g.is_empty() {
        return Err(RankError::Empty);
    }
    let violations = validate(g);
    if !violations.is_empty() {
        return Err(RankError::InvalidGraph(violations));
    }
    let damp = 1.0 - params.alpha;
    let alpha = params.alpha;
    iterate(RankKind::Lpr, g.pages().to_vec(), params, |prev, next| {
        for (a, slot) in next.iter_mut().enumerate() {
            let sum: f64 = g.parents(a).iter().map(|&(b, p)| prev[b] * p).sum();
            *slot = alpha + damp * sum;
        }
    })
}
