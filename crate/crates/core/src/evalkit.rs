//! Rank-position tables and recall@k over judged queries.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{Engine, FusionWeights, QueryResult, SearchError};
use crate::ranker::RankKind;

/// Cut-offs reported by [`compare_configs`].
pub const RECALL_KS: [usize; 4] = [1, 5, 10, 20];

/// Default number of results inspected per query.
pub const DEFAULT_DEPTH: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("config {config:?} needs engine state that is not loaded: {detail}")]
    MissingEngineState { config: String, detail: String },
    #[error("no judgments given")]
    NoJudgments,
    #[error("no configurations given")]
    NoConfigs,
    #[error("judgments line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("query {query:?}: {source}")]
    Search {
        query: String,
        #[source]
        source: SearchError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryJudgment {
    pub query: String,
    /// Relevant page ids; never empty.
    pub targets: Vec<String>,
}

/// Parse `query<TAB>target[,target...]` lines; `#` lines are comments.
pub fn parse_judgments(text: &str) -> Result<Vec<QueryJudgment>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| EvalError::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let (q, t) = line
            .split_once('\t')
            .ok_or_else(|| err("expected query<TAB>targets"))?;
        let targets: Vec<String> = t
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if q.trim().is_empty() {
            return Err(err("empty query"));
        }
        if targets.is_empty() {
            return Err(err("at least one target is required"));
        }
        out.push(QueryJudgment {
            query: q.trim().to_string(),
            targets,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Found(usize),
    NotFound,
}

impl Position {
    pub fn within(&self, k: usize) -> bool {
        matches!(self, Position::Found(p) if *p <= k)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Found(p) => write!(f, "{p}"),
            Position::NotFound => f.write_str("-"),
        }
    }
}

/// 1-based position of the first result whose page is a target.
pub fn rank_position<S: AsRef<str>>(results: &[QueryResult], targets: &[S]) -> Position {
    results
        .iter()
        .position(|r| targets.iter().any(|t| t.as_ref() == r.page))
        .map_or(Position::NotFound, |i| Position::Found(i + 1))
}

/// One engine configuration under evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub name: String,
    pub weights: FusionWeights,
    #[serde(rename = "static")]
    pub static_kind: RankKind,
}

pub fn parse_configs(json: &str) -> Result<Vec<EvalConfig>, serde_json::Error> {
    serde_json::from_str(json)
}

/// Per-query positions for every configuration plus recall summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub configs: Vec<String>,
    pub depth: usize,
    /// `(query, position per config)`.
    pub rows: Vec<(String, Vec<Position>)>,
}

impl EvalReport {
    /// Fraction of queries whose first relevant page sits within the top `k`
    /// for config column `c`.
    pub fn recall_at(&self, c: usize, k: usize) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        let hits = self.rows.iter().filter(|(_, p)| p[c].within(k)).count();
        hits as f64 / self.rows.len() as f64
    }

    /// Recall counting every found position, however deep.
    pub fn recall_found(&self, c: usize) -> f64 {
        self.recall_at(c, usize::MAX)
    }

    pub fn mean_position(&self, c: usize) -> Option<f64> {
        let found: Vec<usize> = self
            .rows
            .iter()
            .filter_map(|(_, p)| match p[c] {
                Position::Found(x) => Some(x),
                Position::NotFound => None,
            })
            .collect();
        (!found.is_empty()).then(|| found.iter().sum::<usize>() as f64 / found.len() as f64)
    }

    /// Table of positions (`-` when not found within the depth), followed by
    /// recall@k rows and summary rows, each prefixed with `#`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("query");
        for c in &self.configs {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
        for (q, ps) in &self.rows {
            out.push_str(q);
            for p in ps {
                let _ = write!(out, "\t{p}");
            }
            out.push('\n');
        }
        for k in RECALL_KS {
            let _ = write!(out, "#recall@{k}");
            for c in 0..self.configs.len() {
                let _ = write!(out, "\t{:.4}", self.recall_at(c, k));
            }
            out.push('\n');
        }
        let _ = write!(out, "#recall@{}", self.depth);
        for c in 0..self.configs.len() {
            let _ = write!(out, "\t{:.4}", self.recall_found(c));
        }
        out.push('\n');
        out.push_str("#mean_position_found");
        for c in 0..self.configs.len() {
            match self.mean_position(c) {
                Some(m) => {
                    let _ = write!(out, "\t{m:.4}");
                }
                None => out.push_str("\t-"),
            }
        }
        out.push('\n');
        out
    }

    /// Long-format `config,k,recall` rows for plotting recall curves.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,k,recall\n");
        for (c, name) in self.configs.iter().enumerate() {
            for k in 1..=RECALL_KS[RECALL_KS.len() - 1] {
                let _ = writeln!(out, "{name},{k},{:.4}", self.recall_at(c, k));
            }
        }
        out
    }
}

/// Run every judged query under every configuration, recording the position
/// of the first relevant page within the top `depth` results.
pub fn compare_configs(
    judgments: &[QueryJudgment],
    configs: &[EvalConfig],
    engine: &Engine,
    depth: usize,
) -> Result<EvalReport, EvalError> {
    if judgments.is_empty() {
        return Err(EvalError::NoJudgments);
    }
    if configs.is_empty() {
        return Err(EvalError::NoConfigs);
    }
    for c in configs {
        if engine.index().is_none() {
            return Err(EvalError::MissingEngineState {
                config: c.name.clone(),
                detail: "text index".into(),
            });
        }
        if engine.rank(c.static_kind).is_none() {
            return Err(EvalError::MissingEngineState {
                config: c.name.clone(),
                detail: format!("{} rank vector", c.static_kind),
            });
        }
    }
    let mut rows = Vec::with_capacity(judgments.len());
    for j in judgments {
        let mut ps = Vec::with_capacity(configs.len());
        for c in configs {
            let pos = match engine.search(&j.query, depth.max(1), c.weights, c.static_kind) {
                Ok(results) => rank_position(&results, &j.targets),
                Err(SearchError::EmptyQuery) => Position::NotFound,
                Err(source) => {
                    return Err(EvalError::Search {
                        query: j.query.clone(),
                        source,
                    })
                }
            };
            ps.push(pos);
        }
        rows.push((j.query.clone(), ps));
    }
    Ok(EvalReport {
        configs: configs.iter().map(|c| c.name.clone()).collect(),
        depth,
        rows,
    })
}
