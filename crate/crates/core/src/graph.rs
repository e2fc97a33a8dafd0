//! Structural link lists and the probabilistic page graph `G = (W, E, P)`.
//!
//! `P(B, A)` is the probability that a visitor on page `B` follows the edge to
//! `A`. Outgoing probabilities of every page sum to at most one; whatever is
//! missing is the chance the visit ends there.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::checksum::content_checksum;
use crate::logparse::TransitionCounts;

/// Slack allowed on row sums to absorb floating-point rounding.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Default blend weight of structural (uniform) probabilities.
pub const DEFAULT_SMOOTHING: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("no transition counts and no structural links")]
    NoData,
    #[error("smoothing must lie in [0, 1], got {0}")]
    BadSmoothing(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checksum mismatch: header says {expected}, content hashes to {actual}")]
    Checksum { expected: String, actual: String },
}

/// Structural hyperlinks between pages. Self-links are ignored and duplicate
/// links collapse, so the out-degree of a page counts distinct targets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkList {
    pages: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

impl LinkList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut l = Self::default();
        for (s, d) in pairs {
            l.add_link(s, d);
        }
        l
    }

    pub fn add_page(&mut self, page: &str) {
        if !self.pages.contains(page) {
            self.pages.insert(page.to_string());
        }
    }

    pub fn add_link(&mut self, src: &str, dst: &str) {
        self.add_page(src);
        self.add_page(dst);
        if src != dst {
            self.edges.insert((src.to_string(), dst.to_string()));
        }
    }

    pub fn pages(&self) -> impl Iterator<Item = &str> + '_ {
        self.pages.iter().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges.iter().map(|(s, d)| (s.as_str(), d.as_str()))
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    /// Distinct link targets of `page`, sorted.
    pub fn targets<'a>(&'a self, page: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .range((page.to_string(), String::new())..)
            .take_while(move |(s, _)| s == page)
            .map(|(_, d)| d.as_str())
    }

    fn body(&self) -> String {
        let mut linked = BTreeSet::new();
        let mut out = String::new();
        for (s, d) in &self.edges {
            linked.insert(s.as_str());
            linked.insert(d.as_str());
            let _ = writeln!(out, "{s}\t{d}");
        }
        for p in &self.pages {
            if !linked.contains(p.as_str()) {
                let _ = writeln!(out, "#page\t{p}");
            }
        }
        out
    }

    pub fn checksum(&self) -> String {
        content_checksum(self.body().as_bytes())
    }

    /// `src<TAB>dst` lines after a `#links` header with counts and checksum;
    /// pages without any link appear as `#page<TAB>path`.
    pub fn to_tsv(&self) -> String {
        let body = self.body();
        format!(
            "#links\tpages={}\tedges={}\tchecksum={}\n{body}",
            self.page_count(),
            self.edge_count(),
            content_checksum(body.as_bytes())
        )
    }

    /// Parse [`LinkList::to_tsv`] output or a bare `src<TAB>dst` list. A
    /// header checksum, when present, is verified.
    pub fn from_tsv(text: &str) -> Result<Self, GraphError> {
        let mut l = Self::default();
        let mut expected = None;
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix("#links") {
                expected = h
                    .split('\t')
                    .find_map(|kv| kv.strip_prefix("checksum="))
                    .map(str::to_string);
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            match cols[..] {
                ["#page", p] => l.add_page(p),
                _ if line.starts_with('#') => {}
                [s, d] => l.add_link(s, d),
                _ => {
                    return Err(GraphError::Parse {
                        line: i + 1,
                        msg: "expected src<TAB>dst".into(),
                    })
                }
            }
        }
        if let Some(expected) = expected {
            let actual = l.checksum();
            if actual != expected {
                return Err(GraphError::Checksum { expected, actual });
            }
        }
        Ok(l)
    }
}

/// A constraint broken by a [`ProbGraph`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSumExceeded { page: String, sum: f64 },
    NegativeProbability { from: String, to: String, p: f64 },
    ProbabilityAboveOne { from: String, to: String, p: f64 },
    NonFiniteProbability { from: String, to: String },
    ParentsMismatch { page: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSumExceeded { page, sum } => write!(f, "RowSumExceeded({page}, {sum})"),
            Violation::NegativeProbability { from, to, p } => {
                write!(f, "NegativeProbability({from}\u{2192}{to}, {p})")
            }
            Violation::ProbabilityAboveOne { from, to, p } => {
                write!(f, "ProbabilityAboveOne({from}\u{2192}{to}, {p})")
            }
            Violation::NonFiniteProbability { from, to } => {
                write!(f, "NonFiniteProbability({from}\u{2192}{to})")
            }
            Violation::ParentsMismatch { page } => write!(f, "ParentsMismatch({page})"),
        }
    }
}

/// Directed page graph with per-edge follow probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbGraph {
    pages: Vec<String>,
    index: HashMap<String, usize>,
    out: Vec<Vec<(usize, f64)>>,
    parents: Vec<Vec<(usize, f64)>>,
    out_degree: Vec<usize>,
    retrievable: Vec<bool>,
}

impl ProbGraph {
    fn assemble(
        pages: Vec<String>,
        edges: Vec<(usize, usize, f64)>,
        out_degree: Vec<usize>,
        retrievable: Vec<bool>,
    ) -> Self {
        let n = pages.len();
        let index = pages
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        let mut out = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        for (s, d, p) in edges {
            out[s].push((d, p));
            parents[d].push((s, p));
        }
        for row in out.iter_mut().chain(parents.iter_mut()) {
            row.sort_by_key(|&(j, _)| j);
        }
        Self {
            pages,
            index,
            out,
            parents,
            out_degree,
            retrievable,
        }
    }

    /// Build a graph from raw `(from, to, probability)` triples without any
    /// checking. Out-degrees are taken as the number of listed targets. Use
    /// [`validate`] to inspect the result.
    pub fn from_edges(edges: &[(&str, &str, f64)]) -> Self {
        let mut names: BTreeSet<&str> = BTreeSet::new();
        for (s, d, _) in edges {
            names.insert(s);
            names.insert(d);
        }
        let pages: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let pos = |p: &str| pages.binary_search_by(|x| x.as_str().cmp(p)).unwrap();
        let triples: Vec<_> = edges.iter().map(|(s, d, p)| (pos(s), pos(d), *p)).collect();
        let mut deg = vec![0; pages.len()];
        for &(s, _, _) in &triples {
            deg[s] += 1;
        }
        let n = pages.len();
        Self::assemble(pages, triples, deg, vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn pages(&self) -> &[String] {
        &self.pages
    }

    pub fn page_index(&self, page: &str) -> Option<usize> {
        self.index.get(page).copied()
    }

    /// Outgoing `(target, P)` pairs of page `i`, sorted by target index.
    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }

    /// Incoming `(source, P)` pairs of page `i`, sorted by source index.
    pub fn parents(&self, i: usize) -> &[(usize, f64)] {
        &self.parents[i]
    }

    /// Number of distinct structural out-links of page `i`.
    pub fn out_degree(&self, i: usize) -> usize {
        self.out_degree[i]
    }

    pub fn is_retrievable(&self, i: usize) -> bool {
        self.retrievable[i]
    }

    pub fn prob(&self, from: &str, to: &str) -> Option<f64> {
        let (s, d) = (self.page_index(from)?, self.page_index(to)?);
        self.out[s]
            .binary_search_by_key(&d, |&(j, _)| j)
            .ok()
            .map(|k| self.out[s][k].1)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.out[i].iter().map(|&(_, p)| p).sum()
    }

    fn body(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.pages.iter().enumerate() {
            let _ = writeln!(
                out,
                "#node\t{p}\t{}\t{}",
                u8::from(self.retrievable[i]),
                self.out_degree[i]
            );
        }
        for (s, row) in self.out.iter().enumerate() {
            for &(d, p) in row {
                let _ = writeln!(out, "{}\t{}\t{p}", self.pages[s], self.pages[d]);
            }
        }
        out
    }

    pub fn checksum(&self) -> String {
        content_checksum(self.body().as_bytes())
    }

    /// TSV serialization: a `#graph` header with page count, edge count,
    /// `meta` pairs and checksum; one `#node` line per page (id, retrievable
    /// flag, structural out-degree); then `src<TAB>dst<TAB>prob` edges.
    pub fn to_tsv(&self, meta: &[(&str, String)]) -> String {
        let body = self.body();
        let mut out = format!("#graph\tpages={}\tedges={}", self.len(), self.edge_count());
        for (k, v) in meta {
            let _ = write!(out, "\t{k}={v}");
        }
        let _ = writeln!(out, "\tchecksum={}", content_checksum(body.as_bytes()));
        out.push_str(&body);
        out
    }

    /// Parse [`ProbGraph::to_tsv`] output, returning the graph and the header
    /// key/value pairs.
    pub fn from_tsv(text: &str) -> Result<(Self, BTreeMap<String, String>), GraphError> {
        let mut meta = BTreeMap::new();
        let mut pages = Vec::new();
        let mut retrievable = Vec::new();
        let mut degree = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| GraphError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols[0] == "#graph" {
                for kv in &cols[1..] {
                    if let Some((k, v)) = kv.split_once('=') {
                        meta.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            if cols[0] == "#node" {
                let [_, p, r, d] = cols[..] else {
                    return Err(err("expected #node<TAB>page<TAB>flag<TAB>degree"));
                };
                if index.insert(p.to_string(), pages.len()).is_some() {
                    return Err(err("duplicate node"));
                }
                pages.push(p.to_string());
                retrievable.push(r == "1");
                degree.push(d.parse().map_err(|_| err("bad out-degree"))?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let [s, d, p] = cols[..] else {
                return Err(err("expected src<TAB>dst<TAB>prob"));
            };
            let s = *index.get(s).ok_or_else(|| err("edge source is not a declared node"))?;
            let d = *index.get(d).ok_or_else(|| err("edge target is not a declared node"))?;
            let p: f64 = p.parse().map_err(|_| err("bad probability"))?;
            edges.push((s, d, p));
        }
        let g = Self::assemble(pages, edges, degree, retrievable);
        if let Some(expected) = meta.get("checksum") {
            let actual = g.checksum();
            if *expected != actual {
                return Err(GraphError::Checksum {
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        if let Some(n) = meta.get("pages") {
            if n.parse::<usize>().ok() != Some(g.len()) {
                return Err(GraphError::Parse {
                    line: 1,
                    msg: "page count does not match header".into(),
                });
            }
        }
        Ok((g, meta))
    }
}

/// Blend log-derived transition frequencies with structural links.
///
/// For a page `B` with `T(B)` outgoing transitions and `N(B)` structural
/// links, `P(B,A) = (1-λ)·count(B,A)/T(B) + λ·[B links to A]/N(B)`. Pages
/// with traffic but no structural links use plain frequencies; pages with
/// links but no traffic are uniform over their links. Edges that end with
/// probability zero are omitted.
pub fn build_prob_graph(
    counts: &TransitionCounts,
    links: Option<&LinkList>,
    smoothing: f64,
) -> Result<ProbGraph, GraphError> {
    build_prob_graph_for_corpus(counts, links, smoothing, None)
}

/// Like [`build_prob_graph`], but adds every corpus page to the page set and
/// flags pages outside `corpus` as non-retrievable.
pub fn build_prob_graph_for_corpus(
    counts: &TransitionCounts,
    links: Option<&LinkList>,
    smoothing: f64,
    corpus: Option<&BTreeSet<String>>,
) -> Result<ProbGraph, GraphError> {
    if !(0.0..=1.0).contains(&smoothing) {
        return Err(GraphError::BadSmoothing(smoothing));
    }
    let empty_links = LinkList::default();
    let links = links.unwrap_or(&empty_links);
    if counts.is_empty() && links.is_empty() && corpus.is_none_or(|c| c.is_empty()) {
        return Err(GraphError::NoData);
    }

    let mut names: BTreeSet<&str> = links.pages().collect();
    for (f, t) in counts.counts.keys() {
        names.insert(f);
        names.insert(t);
    }
    names.extend(counts.page_hits.keys().map(String::as_str));
    if let Some(c) = corpus {
        names.extend(c.iter().map(String::as_str));
    }
    let pages: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let pos = |p: &str| pages.binary_search_by(|x| x.as_str().cmp(p)).unwrap();

    let mut traffic: Vec<Vec<(usize, u64)>> = vec![Vec::new(); pages.len()];
    for ((f, t), &n) in &counts.counts {
        if f != t {
            traffic[pos(f)].push((pos(t), n));
        }
    }
    let mut structural: Vec<Vec<usize>> = vec![Vec::new(); pages.len()];
    for (s, d) in links.edges() {
        structural[pos(s)].push(pos(d));
    }

    let mut edges = Vec::new();
    for b in 0..pages.len() {
        let total: u64 = traffic[b].iter().map(|&(_, n)| n).sum();
        let n_links = structural[b].len();
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        if total > 0 {
            let w = if n_links > 0 { 1.0 - smoothing } else { 1.0 };
            for &(a, n) in &traffic[b] {
                *row.entry(a).or_default() += w * n as f64 / total as f64;
            }
        }
        if n_links > 0 {
            let w = if total > 0 { smoothing } else { 1.0 };
            for &a in &structural[b] {
                *row.entry(a).or_default() += w / n_links as f64;
            }
        }
        edges.extend(
            row.into_iter()
                .filter(|&(_, p)| p > 0.0)
                .map(|(a, p)| (b, a, p)),
        );
    }
    let degree = structural.iter().map(Vec::len).collect();
    let retrievable = match corpus {
        Some(c) => pages.iter().map(|p| c.contains(p)).collect(),
        None => vec![true; pages.len()],
    };
    Ok(ProbGraph::assemble(pages, edges, degree, retrievable))
}

/// The graph plain PageRank implicitly assumes: `P(B,A) = 1/N(B)`.
pub fn uniform_prob_graph(links: &LinkList) -> ProbGraph {
    let pages: Vec<String> = links.pages().map(str::to_string).collect();
    let pos = |p: &str| pages.binary_search_by(|x| x.as_str().cmp(p)).unwrap();
    let mut degree = vec![0usize; pages.len()];
    for (s, _) in links.edges() {
        degree[pos(s)] += 1;
    }
    let edges = links
        .edges()
        .map(|(s, d)| {
            let s = pos(s);
            (s, pos(d), 1.0 / degree[s] as f64)
        })
        .collect();
    let n = pages.len();
    ProbGraph::assemble(pages, edges, degree, vec![true; n])
}

/// Every broken graph constraint; empty when the graph is valid.
pub fn validate(g: &ProbGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for (b, row) in g.out.iter().enumerate() {
        let mut sum = 0.0;
        for &(a, p) in row {
            let (from, to) = (g.pages[b].clone(), g.pages[a].clone());
            if !p.is_finite() {
                out.push(Violation::NonFiniteProbability { from, to });
                continue;
            }
            if p < 0.0 {
                out.push(Violation::NegativeProbability { from, to, p });
            } else if p > 1.0 {
                out.push(Violation::ProbabilityAboveOne { from, to, p });
            }
            sum += p;
        }
        if sum > 1.0 + ROW_SUM_TOLERANCE {
            out.push(Violation::RowSumExceeded {
                page: g.pages[b].clone(),
                sum,
            });
        }
    }
    let mut transposed: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.len()];
    for (b, row) in g.out.iter().enumerate() {
        for &(a, p) in row {
            transposed[a].push((b, p));
        }
    }
    for (a, row) in transposed.iter().enumerate() {
        let same = row.len() == g.parents[a].len()
            && row
                .iter()
                .zip(&g.parents[a])
                .all(|(x, y)| x.0 == y.0 && x.1.to_bits() == y.1.to_bits());
        if !same {
            out.push(Violation::ParentsMismatch {
                page: g.pages[a].clone(),
            });
        }
    }
    out
}
