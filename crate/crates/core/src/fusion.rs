//! Query answering by linear fusion of lexical, social and static scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranker::{RankKind, RankVector};
use crate::social::{query_page_similarity, AnnotationStore, SimMatrices};
use crate::textindex::{tfidf_scores, InvertedIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("engine state not loaded: {0}")]
    EngineNotLoaded(String),
    #[error("query has no searchable terms")]
    EmptyQuery,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Non-negative weights of the text, social and static signals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub text: f64,
    pub social: f64,
    pub static_: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            text: 0.6,
            social: 0.2,
            static_: 0.2,
        }
    }
}

impl FusionWeights {
    pub fn new(text: f64, social: f64, static_: f64) -> Result<Self, SearchError> {
        let w = Self {
            text,
            social,
            static_,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let all = [self.text, self.social, self.static_];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SearchError::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        if all.iter().sum::<f64>() <= 0.0 {
            return Err(SearchError::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Weights scaled to sum to one.
    pub fn normalized(&self) -> Self {
        let s = self.text + self.social + self.static_;
        Self {
            text: self.text / s,
            social: self.social / s,
            static_: self.static_ / s,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.text, self.social, self.static_]
    }
}

impl fmt::Display for FusionWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.text, self.social, self.static_)
    }
}

impl FromStr for FusionWeights {
    type Err = SearchError;

    /// Parses `text,social,static`, e.g. `0.6,0.2,0.2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [t, so, st] = parts[..] else {
            return Err(SearchError::InvalidWeights(format!(
                "expected three comma-separated numbers, got {s:?}"
            )));
        };
        let num = |x: &str| {
            x.parse::<f64>()
                .map_err(|_| SearchError::InvalidWeights(format!("not a number: {x:?}")))
        };
        Self::new(num(t)?, num(so)?, num(st)?)
    }
}

impl Serialize for FusionWeights {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FusionWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [t, so, st] = <[f64; 3]>::deserialize(d)?;
        Self::new(t, so, st).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub text: f64,
    pub social: f64,
    #[serde(rename = "static")]
    pub static_: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub page: String,
    pub score: f64,
    /// Per-query min-max normalized component scores.
    pub components: Components,
    /// Component scores before normalization.
    pub raw: Components,
    /// 1-based rank position.
    pub position: usize,
}

/// Immutable search state: the text index, static rank vectors and the
/// optional annotation similarity data.
#[derive(Debug, Clone, Default)]
pub struct Engine {
    index: Option<InvertedIndex>,
    ranks: BTreeMap<RankKind, RankVector>,
    social: Option<(AnnotationStore, SimMatrices)>,
}

fn min_max(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if values.is_empty() || hi <= lo {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in values.iter_mut() {
        *v = (*v - lo) / (hi - lo);
    }
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_index(mut self, index: InvertedIndex) -> Self {
        self.index = Some(index);
        self
    }

    pub fn with_rank(mut self, rank: RankVector) -> Self {
        self.ranks.insert(rank.kind, rank);
        self
    }

    pub fn with_social(mut self, store: AnnotationStore, sim: SimMatrices) -> Self {
        self.social = Some((store, sim));
        self
    }

    pub fn index(&self) -> Option<&InvertedIndex> {
        self.index.as_ref()
    }

    pub fn rank(&self, kind: RankKind) -> Option<&RankVector> {
        self.ranks.get(&kind)
    }

    pub fn rank_kinds(&self) -> impl Iterator<Item = RankKind> + '_ {
        self.ranks.keys().copied()
    }

    pub fn social(&self) -> Option<(&AnnotationStore, &SimMatrices)> {
        self.social.as_ref().map(|(a, s)| (a, s))
    }

    /// Top-`k` pages for `query`, using the rank vector of `static_kind` as
    /// the static signal.
    ///
    /// Candidates are retrievable pages with a non-zero TF-IDF or annotation
    /// score. Each component is min-max normalized over the candidates
    /// (a constant component becomes zero) and fused with the normalized
    /// weights. Ties break by page id.
    pub fn search(
        &self,
        query: &str,
        k: usize,
        weights: FusionWeights,
        static_kind: RankKind,
    ) -> Result<Vec<QueryResult>, SearchError> {
        let index = self
            .index
            .as_ref()
            .ok_or_else(|| SearchError::EngineNotLoaded("text index".into()))?;
        let rank = self
            .ranks
            .get(&static_kind)
            .ok_or_else(|| SearchError::EngineNotLoaded(format!("{static_kind} rank vector")))?;
        if k == 0 {
            return Err(SearchError::InvalidK);
        }
        weights.validate()?;
        let terms = index.tokenize_query(query);
        if terms.is_empty() {
            return Err(SearchError::EmptyQuery);
        }

        let text = tfidf_scores(&terms, index);
        let mut social: BTreeMap<&str, f64> = BTreeMap::new();
        if let Some((store, sim)) = &self.social {
            for page in store.pages() {
                let s = query_page_similarity(&terms, page, store, sim);
                if s > 0.0 {
                    social.insert(page.as_str(), s);
                }
            }
        }
        let candidates: BTreeSet<&str> = text
            .iter()
            .filter(|(_, &s)| s > 0.0)
            .map(|(p, _)| p.as_str())
            .chain(social.keys().copied())
            .filter(|p| index.contains(p))
            .collect();

        let raw: Vec<Components> = candidates
            .iter()
            .map(|p| Components {
                text: text.get(*p).copied().unwrap_or(0.0),
                social: social.get(p).copied().unwrap_or(0.0),
                static_: rank.get(p).unwrap_or(0.0),
            })
            .collect();
        let mut t: Vec<f64> = raw.iter().map(|c| c.text).collect();
        let mut so: Vec<f64> = raw.iter().map(|c| c.social).collect();
        let mut st: Vec<f64> = raw.iter().map(|c| c.static_).collect();
        min_max(&mut t);
        min_max(&mut so);
        min_max(&mut st);

        let w = weights.normalized();
        let mut results: Vec<QueryResult> = candidates
            .iter()
            .enumerate()
            .map(|(i, p)| QueryResult {
                page: p.to_string(),
                score: w.text * t[i] + w.social * so[i] + w.static_ * st[i],
                components: Components {
                    text: t[i],
                    social: so[i],
                    static_: st[i],
                },
                raw: raw[i],
                position: 0,
            })
            .collect();
        results.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.page.cmp(&b.page)));
        results.truncate(k);
        for (i, r) in results.iter_mut().enumerate() {
            r.position = i + 1;
        }
        Ok(results)
    }
}
