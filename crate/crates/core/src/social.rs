//! Annotation/page association store and SocialSimRank.
//!
//! SocialSimRank propagates similarity back and forth across the bipartite
//! annotation/page graph. Two annotations are similar when they were given
//! to similar pages, and two pages are similar when they carry similar
//! annotations. Each contributing pair is weighted by the ratio of the
//! smaller to the larger user count, so edges backed by very different
//! numbers of users propagate less similarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checksum::content_checksum;
use crate::textindex::normalize_term;

pub const DEFAULT_DAMPING: f64 = 0.7;
pub const DEFAULT_DELTA: f64 = 1e-4;
pub const DEFAULT_SWEEPS: usize = 10;

pub const SIM_FORMAT: &str = "logrank-sim";
pub const SIM_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SocialError {
    #[error("no annotations given")]
    EmptyInput,
    #[error("user count for ({term}, {page}) must be positive, got {count}")]
    NonPositiveCount { term: String, page: String, count: i64 },
    #[error("annotation term {0:?} has no alphanumeric characters")]
    InvalidTerm(String),
    #[error("annotation store is empty")]
    EmptyStore,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("user count {given} is below the largest association count {max}")]
    UserCountTooSmall { given: u64, max: u64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("similarity files do not match: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Sparse annotation x page matrix of user counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationStore {
    annotations: Vec<String>,
    pages: Vec<String>,
    /// `P(a)`: pages carrying annotation `a`, with user counts, by page index.
    by_annotation: Vec<Vec<(usize, u64)>>,
    /// `A(p)`: annotations given to page `p`, with user counts, by annotation index.
    by_page: Vec<Vec<(usize, u64)>>,
    user_count: u64,
}

/// Build a store from `(term, page, user_count)` triples. Terms are
/// normalized like index terms; duplicate pairs are summed.
pub fn load_annotations<S, P>(triples: &[(S, P, i64)]) -> Result<AnnotationStore, SocialError>
where
    S: AsRef<str>,
    P: AsRef<str>,
{
    if triples.is_empty() {
        return Err(SocialError::EmptyInput);
    }
    let mut assoc: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (term, page, count) in triples {
        let (term, page) = (term.as_ref(), page.as_ref().trim());
        if *count <= 0 {
            return Err(SocialError::NonPositiveCount {
                term: term.to_string(),
                page: page.to_string(),
                count: *count,
            });
        }
        let t = normalize_term(term).ok_or_else(|| SocialError::InvalidTerm(term.to_string()))?;
        *assoc.entry((t, page.to_string())).or_default() += *count as u64;
    }
    let annotations: Vec<String> = assoc
        .keys()
        .map(|(t, _)| t.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let pages: Vec<String> = assoc
        .keys()
        .map(|(_, p)| p.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let a_pos: HashMap<&str, usize> = annotations
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let p_pos: HashMap<&str, usize> = pages
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let mut by_annotation = vec![Vec::new(); annotations.len()];
    let mut by_page = vec![Vec::new(); pages.len()];
    let mut max = 0;
    for ((t, p), n) in &assoc {
        let (a, q) = (a_pos[t.as_str()], p_pos[p.as_str()]);
        by_annotation[a].push((q, *n));
        by_page[q].push((a, *n));
        max = max.max(*n);
    }
    for row in by_annotation.iter_mut().chain(by_page.iter_mut()) {
        row.sort_unstable();
    }
    Ok(AnnotationStore {
        annotations,
        pages,
        by_annotation,
        by_page,
        user_count: max,
    })
}

impl AnnotationStore {
    /// Parse `term<TAB>page<TAB>user_count` lines. Lines starting with `#`
    /// are comments.
    pub fn from_tsv(text: &str) -> Result<Self, SocialError> {
        let mut triples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| SocialError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            let [t, p, n] = line.split('\t').collect::<Vec<_>>()[..] else {
                return Err(err("expected term<TAB>page<TAB>user_count"));
            };
            let n: i64 = n.trim().parse().map_err(|_| err("bad user count"))?;
            triples.push((t.to_string(), p.to_string(), n));
        }
        load_annotations(&triples)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (a, row) in self.by_annotation.iter().enumerate() {
            for &(p, n) in row {
                let _ = writeln!(out, "{}\t{}\t{n}", self.annotations[a], self.pages[p]);
            }
        }
        out
    }

    pub fn checksum(&self) -> String {
        content_checksum(self.to_tsv().as_bytes())
    }

    /// Declare the number of distinct users behind the counts.
    pub fn with_user_count(mut self, users: u64) -> Result<Self, SocialError> {
        let max = self.max_count();
        if users < max {
            return Err(SocialError::UserCountTooSmall { given: users, max });
        }
        self.user_count = users;
        Ok(self)
    }

    fn max_count(&self) -> u64 {
        self.by_annotation
            .iter()
            .flatten()
            .map(|&(_, n)| n)
            .max()
            .unwrap_or(0)
    }

    pub fn user_count(&self) -> u64 {
        self.user_count
    }

    pub fn annotation_count(&self) -> usize {
        self.annotations.len()
    }

    pub fn page_count(&self) -> usize {
        self.pages.len()
    }

    pub fn annotations(&self) -> &[String] {
        &self.annotations
    }

    pub fn pages(&self) -> &[String] {
        &self.pages
    }

    pub fn annotation_index(&self, term: &str) -> Option<usize> {
        self.annotations
            .binary_search_by(|a| a.as_str().cmp(term))
            .ok()
    }

    pub fn page_index(&self, page: &str) -> Option<usize> {
        self.pages.binary_search_by(|p| p.as_str().cmp(page)).ok()
    }

    /// `M_AP(a, p)`, zero when absent.
    pub fn count(&self, annotation: usize, page: usize) -> u64 {
        self.by_annotation[annotation]
            .binary_search_by_key(&page, |&(p, _)| p)
            .map_or(0, |k| self.by_annotation[annotation][k].1)
    }

    /// Pages of annotation `a` with counts.
    pub fn pages_of(&self, annotation: usize) -> &[(usize, u64)] {
        &self.by_annotation[annotation]
    }

    /// Annotations of page `p` with counts.
    pub fn annotations_of(&self, page: usize) -> &[(usize, u64)] {
        &self.by_page[page]
    }

    /// Annotation terms and counts of a page id, empty when unannotated.
    pub fn page_annotations(&self, page: &str) -> Vec<(&str, u64)> {
        self.page_index(page)
            .map(|p| {
                self.by_page[p]
                    .iter()
                    .map(|&(a, n)| (self.annotations[a].as_str(), n))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Connected component id of every annotation and every page in the
    /// bipartite graph.
    fn components(&self) -> (Vec<usize>, Vec<usize>) {
        let na = self.annotations.len();
        let mut parent: Vec<usize> = (0..na + self.pages.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (a, row) in self.by_annotation.iter().enumerate() {
            for &(p, _) in row {
                let (ra, rp) = (find(&mut parent, a), find(&mut parent, na + p));
                if ra != rp {
                    parent[ra.max(rp)] = ra.min(rp);
                }
            }
        }
        let comps: Vec<usize> = (0..parent.len()).map(|x| find(&mut parent, x)).collect();
        (comps[..na].to_vec(), comps[na..].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsrParams {
    pub c_a: f64,
    pub c_p: f64,
    pub delta: f64,
    pub max_iterations: usize,
}

impl Default for SsrParams {
    fn default() -> Self {
        Self {
            c_a: DEFAULT_DAMPING,
            c_p: DEFAULT_DAMPING,
            delta: DEFAULT_DELTA,
            max_iterations: DEFAULT_SWEEPS,
        }
    }
}

impl SsrParams {
    pub fn validate(&self) -> Result<(), SocialError> {
        for (name, c) in [("c_a", self.c_a), ("c_p", self.c_p)] {
            if !(c > 0.0 && c < 1.0) {
                return Err(SocialError::InvalidParams(format!(
                    "{name} must lie in (0, 1), got {c}"
                )));
            }
        }
        if !(self.delta >= 0.0) {
            return Err(SocialError::InvalidParams(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Dense symmetric similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Set both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    fn max_abs_diff(&self, other: &SimMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Non-zero strictly-upper-triangle entries.
    pub fn upper_triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n)
                .map(move |j| (i, j, self.get(i, j)))
                .filter(|t| t.2 != 0.0)
        })
    }
}

/// Result of SocialSimRank: annotation and page similarity matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrices {
    pub params: SsrParams,
    pub annotations: Vec<String>,
    pub pages: Vec<String>,
    pub sa: SimMatrix,
    pub sp: SimMatrix,
    pub iterations_used: usize,
    pub final_delta: f64,
}

impl SimMatrices {
    pub fn annotation_similarity(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.annotations.binary_search_by(|x| x.as_str().cmp(a)).ok()?;
        let j = self.annotations.binary_search_by(|x| x.as_str().cmp(b)).ok()?;
        Some(self.sa.get(i, j))
    }

    /// The `k` annotations most similar to `term`, excluding itself.
    pub fn neighbours(&self, term: &str, k: usize) -> Vec<(&str, f64)> {
        let Ok(i) = self.annotations.binary_search_by(|x| x.as_str().cmp(term)) else {
            return Vec::new();
        };
        let mut v: Vec<(&str, f64)> = (0..self.sa.size())
            .filter(|&j| j != i && self.sa.get(i, j) > 0.0)
            .map(|j| (self.annotations[j].as_str(), self.sa.get(i, j)))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v.truncate(k);
        v
    }
}

/// Step-by-step SocialSimRank, exposing each sweep.
pub struct SsrRun<'a> {
    store: &'a AnnotationStore,
    params: SsrParams,
    sa: SimMatrix,
    sp: SimMatrix,
    a_comp: Vec<usize>,
    p_comp: Vec<usize>,
    iterations: usize,
    last_delta: f64,
}

fn ratio(x: u64, y: u64) -> f64 {
    x.min(y) as f64 / x.max(y) as f64
}

/// One half-sweep: similarity between items of one side from the similarity
/// of their neighbours on the other side.
fn propagate(
    adj: &[Vec<(usize, u64)>],
    comp: &[usize],
    damping: f64,
    other: &SimMatrix,
) -> SimMatrix {
    let n = adj.len();
    let mut next = SimMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if comp[i] != comp[j] {
                continue;
            }
            let mut sum = 0.0;
            for &(m, ci) in &adj[i] {
                let row = other.row(m);
                for &(k, cj) in &adj[j] {
                    let s = row[k];
                    if s != 0.0 {
                        sum += ratio(ci, cj) * s;
                    }
                }
            }
            let v = damping * sum / (adj[i].len() * adj[j].len()) as f64;
            next.set_sym(i, j, v);
        }
    }
    next
}

impl<'a> SsrRun<'a> {
    pub fn new(store: &'a AnnotationStore, params: SsrParams) -> Result<Self, SocialError> {
        params.validate()?;
        if store.annotations.is_empty() {
            return Err(SocialError::EmptyStore);
        }
        let (a_comp, p_comp) = store.components();
        Ok(Self {
            store,
            params,
            sa: SimMatrix::identity(store.annotations.len()),
            sp: SimMatrix::identity(store.pages.len()),
            a_comp,
            p_comp,
            iterations: 0,
            last_delta: f64::INFINITY,
        })
    }

    /// Run one sweep: annotations from the previous page matrix, then pages
    /// from the fresh annotation matrix. Returns the largest entry change.
    pub fn sweep(&mut self) -> f64 {
        let sa = propagate(
            &self.store.by_annotation,
            &self.a_comp,
            self.params.c_a,
            &self.sp,
        );
        let sp = propagate(&self.store.by_page, &self.p_comp, self.params.c_p, &sa);
        let delta = sa.max_abs_diff(&self.sa).max(sp.max_abs_diff(&self.sp));
        self.sa = sa;
        self.sp = sp;
        self.iterations += 1;
        self.last_delta = delta;
        delta
    }

    pub fn sa(&self) -> &SimMatrix {
        &self.sa
    }

    pub fn sp(&self) -> &SimMatrix {
        &self.sp
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn finish(self) -> SimMatrices {
        SimMatrices {
            params: self.params,
            annotations: self.store.annotations.clone(),
            pages: self.store.pages.clone(),
            sa: self.sa,
            sp: self.sp,
            iterations_used: self.iterations,
            final_delta: if self.iterations == 0 { 0.0 } else { self.last_delta },
        }
    }
}

/// Run SocialSimRank until the largest entry change is at most
/// `params.delta` or `params.max_iterations` sweeps have run. Hitting the
/// sweep cap is a normal completion.
pub fn social_sim_rank(store: &AnnotationStore, params: SsrParams) -> Result<SimMatrices, SocialError> {
    let mut run = SsrRun::new(store, params)?;
    while run.iterations() < params.max_iterations {
        if run.sweep() <= params.delta {
            break;
        }
    }
    Ok(run.finish())
}

/// Similarity of a query to a page through the page's annotations:
/// `sum_q sum_{a in A(page)} SA(q, a) * M_AP(a, page) / sum_b M_AP(b, page)`.
/// Query terms outside the annotation vocabulary contribute nothing.
pub fn query_page_similarity(
    query_terms: &[String],
    page: &str,
    store: &AnnotationStore,
    sim: &SimMatrices,
) -> f64 {
    let Some(p) = store.page_index(page) else {
        return 0.0;
    };
    let anns = &store.by_page[p];
    let total: u64 = anns.iter().map(|&(_, n)| n).sum();
    if total == 0 {
        return 0.0;
    }
    let mut score = 0.0;
    for q in query_terms {
        let Some(qi) = store.annotation_index(q) else {
            continue;
        };
        for &(a, n) in anns {
            score += sim.sa.get(qi, a) * n as f64 / total as f64;
        }
    }
    score
}

#[derive(Debug, Serialize, Deserialize)]
struct SimMeta {
    format: String,
    version: u32,
    params: SsrParams,
    iterations_used: usize,
    final_delta: f64,
    annotations_checksum: String,
    sa_checksum: String,
    sp_checksum: String,
}

fn triples_tsv(m: &SimMatrix) -> String {
    let mut out = String::new();
    for (i, j, v) in m.upper_triples() {
        let _ = writeln!(out, "{i}\t{j}\t{v}");
    }
    out
}

fn parse_triples(text: &str, n: usize) -> Result<SimMatrix, SocialError> {
    let mut m = SimMatrix::identity(n);
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| SocialError::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let [a, b, v] = line.split('\t').collect::<Vec<_>>()[..] else {
            return Err(err("expected i<TAB>j<TAB>value"));
        };
        let a: usize = a.parse().map_err(|_| err("bad row"))?;
        let b: usize = b.parse().map_err(|_| err("bad column"))?;
        let v: f64 = v.parse().map_err(|_| err("bad value"))?;
        if a >= n || b >= n || a >= b {
            return Err(err("entry outside the upper triangle"));
        }
        m.set_sym(a, b, v);
    }
    Ok(m)
}

/// Write the store and matrices into `dir`: `annotations.tsv` (the store),
/// `annotations.txt` / `pages.txt` (row vocabularies), `sa.tsv` / `sp.tsv`
/// (upper-triangle `i<TAB>j<TAB>value` triples) and `meta.json`.
pub fn save_sim_dir(dir: &Path, store: &AnnotationStore, sim: &SimMatrices) -> io::Result<()> {
    let sa = triples_tsv(&sim.sa);
    let sp = triples_tsv(&sim.sp);
    let meta = SimMeta {
        format: SIM_FORMAT.into(),
        version: SIM_VERSION,
        params: sim.params,
        iterations_used: sim.iterations_used,
        final_delta: sim.final_delta,
        annotations_checksum: store.checksum(),
        sa_checksum: content_checksum(sa.as_bytes()),
        sp_checksum: content_checksum(sp.as_bytes()),
    };
    fs::write(dir.join("annotations.tsv"), store.to_tsv())?;
    fs::write(dir.join("annotations.txt"), sim.annotations.join("\n") + "\n")?;
    fs::write(dir.join("pages.txt"), sim.pages.join("\n") + "\n")?;
    fs::write(dir.join("sa.tsv"), sa)?;
    fs::write(dir.join("sp.tsv"), sp)?;
    fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).map_err(io::Error::other)? + "\n",
    )?;
    Ok(())
}

/// Load what [`save_sim_dir`] wrote, verifying every checksum and that the
/// vocabularies agree with the store.
pub fn load_sim_dir(dir: &Path) -> Result<(AnnotationStore, SimMatrices), SocialError> {
    let meta: SimMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
    if meta.format != SIM_FORMAT || meta.version != SIM_VERSION {
        return Err(SocialError::Mismatch(format!(
            "unsupported format {:?} version {}",
            meta.format, meta.version
        )));
    }
    let store = AnnotationStore::from_tsv(&fs::read_to_string(dir.join("annotations.tsv"))?)?;
    if store.checksum() != meta.annotations_checksum {
        return Err(SocialError::Mismatch("annotations checksum".into()));
    }
    let vocab = |name: &str| -> Result<Vec<String>, SocialError> {
        Ok(fs::read_to_string(dir.join(name))?
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect())
    };
    let annotations = vocab("annotations.txt")?;
    let pages = vocab("pages.txt")?;
    if annotations != store.annotations || pages != store.pages {
        return Err(SocialError::Mismatch("vocabulary differs from store".into()));
    }
    let sa_text = fs::read_to_string(dir.join("sa.tsv"))?;
    let sp_text = fs::read_to_string(dir.join("sp.tsv"))?;
    if content_checksum(sa_text.as_bytes()) != meta.sa_checksum
        || content_checksum(sp_text.as_bytes()) != meta.sp_checksum
    {
        return Err(SocialError::Mismatch("matrix checksum".into()));
    }
    let sim = SimMatrices {
        params: meta.params,
        sa: parse_triples(&sa_text, annotations.len())?,
        sp: parse_triples(&sp_text, pages.len())?,
        annotations,
        pages,
        iterations_used: meta.iterations_used,
        final_delta: meta.final_delta,
    };
    Ok((store, sim))
}
