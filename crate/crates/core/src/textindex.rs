//! Corpus text extraction, tokenization and a TF-IDF inverted index.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::LinkList;
use crate::paths::{normalize_path, resolve_href, PathOptions};

pub const INDEX_FORMAT: &str = "logrank-index";
pub const INDEX_VERSION: u32 = 1;

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on",
    "or", "that", "the", "this", "to", "with",
];

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate page id {0}")]
    DuplicatePageId(String),
    #[error("unsupported index format {format:?} version {version}")]
    Version { format: String, version: u32 },
    #[error("index is inconsistent: {0}")]
    Inconsistent(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Lowercase a single term and keep only its alphanumeric characters.
/// Returns `None` when nothing is left.
pub fn normalize_term(raw: &str) -> Option<String> {
    let t: String = raw
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    (!t.is_empty()).then_some(t)
}

/// Splits text into lowercase alphanumeric tokens.
///
/// Hyphenated words are emitted as their parts followed by the joined form,
/// so `Arp-Sequencer` yields `arp`, `sequencer`, `arpsequencer`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub stopwords: BTreeSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self {
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Tokenizer {
    pub fn without_stopwords() -> Self {
        Self {
            stopwords: BTreeSet::new(),
        }
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for word in text.split(|c: char| !(c.is_alphanumeric() || c == '-')) {
            let parts: Vec<String> = word
                .split('-')
                .filter(|p| !p.is_empty())
                .map(|p| p.chars().flat_map(char::to_lowercase).collect())
                .collect();
            if parts.is_empty() {
                continue;
            }
            let joined = (parts.len() > 1).then(|| parts.concat());
            for p in parts {
                if !self.stopwords.contains(&p) {
                    out.push(p);
                }
            }
            if let Some(j) = joined {
                out.push(j);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub page: String,
    pub title: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn length(&self) -> usize {
        self.tokens.len()
    }
}

/// A document plus the local pages it links to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub document: Document,
    pub links: Vec<String>,
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let end = rest[..rest.len().min(12)].find(';');
        let decoded = end.and_then(|e| {
            let name = &rest[1..e];
            let c = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" | "mdash" | "ndash" | "middot" => Some(' '),
                _ if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric()) => {
                    Some(' ')
                }
                _ => name.strip_prefix('#').and_then(|n| {
                    let code = match n.strip_prefix(['x', 'X']) {
                        Some(h) => u32::from_str_radix(h, 16).ok(),
                        None => n.parse().ok(),
                    };
                    code.and_then(char::from_u32)
                }),
            };
            c.map(|c| (c, e))
        });
        match decoded {
            Some((c, e)) => {
                out.push(c);
                rest = &rest[e + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn attr_value(tag: &str, name: &str) -> Option<String> {
    let lower = tag.to_ascii_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(name) {
        let start = from + pos;
        from = start + name.len();
        let boundary = start == 0 || lower.as_bytes()[start - 1].is_ascii_whitespace();
        if !boundary {
            continue;
        }
        let rest = tag[from..].trim_start();
        let Some(rest) = rest.strip_prefix('=') else {
            continue;
        };
        let rest = rest.trim_start();
        let value = match rest.chars().next() {
            Some(q @ ('"' | '\'')) => rest[1..].split(q).next().unwrap_or(""),
            _ => rest
                .split(|c: char| c.is_whitespace() || c == '>')
                .next()
                .unwrap_or(""),
        };
        return Some(decode_entities(value));
    }
    None
}

fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    hay.to_ascii_lowercase().find(needle)
}

/// Strip markup from an HTML page and collect its text, title and links.
///
/// `path` is the URL path the file is served at (e.g. `/drums/index.html`);
/// it anchors relative links and is normalized into the page id.
pub fn extract_html(html: &str, path: &str, tokenizer: &Tokenizer, opts: &PathOptions) -> Extracted {
    let mut text = String::with_capacity(html.len());
    let mut title = String::new();
    let mut links = Vec::new();
    let mut in_title = false;
    let mut rest = html;
    while let Some(lt) = rest.find('<') {
        let chunk = decode_entities(&rest[..lt]);
        if in_title {
            title.push_str(&chunk);
        }
        text.push_str(&chunk);
        rest = &rest[lt..];
        if rest.starts_with("<!--") {
            rest = match rest.find("-->") {
                Some(e) => &rest[e + 3..],
                None => "",
            };
            continue;
        }
        // Find the end of the tag, honoring quoted attribute values.
        let mut end = None;
        let mut quote: Option<char> = None;
        for (i, c) in rest.char_indices().skip(1) {
            match (quote, c) {
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, '"' | '\'') => quote = Some(c),
                (None, '>') => {
                    end = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let Some(end) = end else {
            // Unterminated tag: treat the remainder as text.
            text.push_str(&decode_entities(&rest[1..]));
            rest = "";
            break;
        };
        let tag = &rest[1..end];
        rest = &rest[end + 1..];
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let closing = tag.starts_with('/');
        text.push(' ');
        match (name.as_str(), closing) {
            ("script" | "style", false) => {
                let close = format!("</{name}");
                rest = match find_ci(rest, &close) {
                    Some(e) => {
                        let after = &rest[e..];
                        match after.find('>') {
                            Some(g) => &after[g + 1..],
                            None => "",
                        }
                    }
                    None => "",
                };
            }
            ("title", false) => in_title = true,
            ("title", true) => in_title = false,
            ("a" | "area", false) => {
                if let Some(href) = attr_value(tag, "href") {
                    if let Some(target) = resolve_href(path, &href, opts) {
                        links.push(target);
                    }
                }
            }
            ("frame" | "iframe", false) => {
                if let Some(src) = attr_value(tag, "src") {
                    if let Some(target) = resolve_href(path, &src, opts) {
                        links.push(target);
                    }
                }
            }
            _ => {}
        }
    }
    let tail = decode_entities(rest);
    if in_title {
        title.push_str(&tail);
    }
    text.push_str(&tail);

    let page = normalize_path(path, opts).unwrap_or_else(|| "/".to_string());
    Extracted {
        document: Document {
            page,
            title: title.split_whitespace().collect::<Vec<_>>().join(" "),
            tokens: tokenizer.tokenize(&text),
        },
        links,
    }
}

/// Convenience wrapper over [`extract_html`] with default tokenizer and
/// path options.
pub fn extract_text(html: &str, path: &str) -> Extracted {
    extract_html(html, path, &Tokenizer::default(), &PathOptions::default())
}

/// Plain-text documents: no markup, no links; the first non-empty line is
/// the title.
pub fn extract_plain(text: &str, path: &str, tokenizer: &Tokenizer, opts: &PathOptions) -> Extracted {
    let title = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .to_string();
    Extracted {
        document: Document {
            page: normalize_path(path, opts).unwrap_or_else(|| "/".to_string()),
            title,
            tokens: tokenizer.tokenize(text),
        },
        links: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocMeta {
    pub page: String,
    pub title: String,
    pub length: u32,
}

/// Term to postings map with the statistics TF-IDF needs.
///
/// Documents are stored sorted by page id and postings reference them by
/// position, so postings are sorted by page id as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    format: String,
    version: u32,
    tokenizer: Tokenizer,
    docs: Vec<DocMeta>,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

/// Build an index over `docs`, which may arrive in any order.
pub fn build_index(docs: &[Document], tokenizer: &Tokenizer) -> Result<InvertedIndex, IndexError> {
    let mut order: Vec<&Document> = docs.iter().collect();
    order.sort_by(|a, b| a.page.cmp(&b.page));
    for w in order.windows(2) {
        if w[0].page == w[1].page {
            return Err(IndexError::DuplicatePageId(w[0].page.clone()));
        }
    }
    let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    let mut metas = Vec::with_capacity(order.len());
    for (i, d) in order.iter().enumerate() {
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for t in &d.tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        for (t, n) in tf {
            postings.entry(t.to_string()).or_default().push((i as u32, n));
        }
        metas.push(DocMeta {
            page: d.page.clone(),
            title: d.title.clone(),
            length: d.tokens.len() as u32,
        });
    }
    Ok(InvertedIndex {
        format: INDEX_FORMAT.to_string(),
        version: INDEX_VERSION,
        tokenizer: tokenizer.clone(),
        docs: metas,
        postings,
    })
}

impl InvertedIndex {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn docs(&self) -> &[DocMeta] {
        &self.docs
    }

    pub fn doc(&self, page: &str) -> Option<&DocMeta> {
        self.docs
            .binary_search_by(|d| d.page.as_str().cmp(page))
            .ok()
            .map(|i| &self.docs[i])
    }

    pub fn contains(&self, page: &str) -> bool {
        self.doc(page).is_some()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Indexed terms in lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = &str> + '_ {
        self.postings.keys().map(String::as_str)
    }

    /// `(page, tf)` pairs for `term`, sorted by page id.
    pub fn postings(&self, term: &str) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.postings
            .get(term)
            .into_iter()
            .flatten()
            .map(|&(d, tf)| (self.docs[d as usize].page.as_str(), tf))
    }

    pub fn tf(&self, term: &str, page: &str) -> u32 {
        self.postings(term)
            .find(|(p, _)| *p == page)
            .map_or(0, |(_, tf)| tf)
    }

    /// `ln(N / df)`, or `None` for unknown terms.
    pub fn idf(&self, term: &str) -> Option<f64> {
        let df = self.doc_freq(term);
        (df > 0).then(|| (self.docs.len() as f64 / df as f64).ln())
    }

    pub fn tokenize_query(&self, query: &str) -> Vec<String> {
        self.tokenizer.tokenize(query)
    }

    pub fn to_json(&self) -> Result<String, IndexError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, IndexError> {
        let idx: InvertedIndex = serde_json::from_str(text)?;
        if idx.format != INDEX_FORMAT || idx.version != INDEX_VERSION {
            return Err(IndexError::Version {
                format: idx.format,
                version: idx.version,
            });
        }
        let n = idx.docs.len() as u32;
        for (t, ps) in &idx.postings {
            if ps.is_empty() || ps.iter().any(|&(d, tf)| d >= n || tf == 0) {
                return Err(IndexError::Inconsistent(format!("postings for {t:?}")));
            }
        }
        Ok(idx)
    }
}

/// TF-IDF score of every document containing at least one query term:
/// `sum_t tf(t,d) * ln(N/df(t)) / len(d)`.
pub fn tfidf_scores(query_terms: &[String], idx: &InvertedIndex) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    let n = idx.docs.len() as f64;
    for t in query_terms {
        let Some(ps) = idx.postings.get(t) else {
            continue;
        };
        let idf = (n / ps.len() as f64).ln();
        for &(d, tf) in ps {
            let len = f64::from(idx.docs[d as usize].length);
            *acc.entry(d).or_default() += f64::from(tf) * idf / len;
        }
    }
    acc.into_iter()
        .map(|(d, s)| (idx.docs[d as usize].page.clone(), s))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct ScanOptions {
    pub tokenizer: Tokenizer,
    pub paths: PathOptions,
}

/// Documents and structural links of a local corpus directory.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub links: LinkList,
}

fn indexable_kind(rel: &str) -> Option<bool> {
    let ext = Path::new(rel).extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "html" | "htm" => Some(true),
        "txt" => Some(false),
        _ => None,
    }
}

/// Extract every `.html`, `.htm` and `.txt` entry of `(relative path,
/// contents)` pairs; other files are ignored. Relative paths use `/`.
pub fn corpus_from_files<'a, I>(files: I, opts: &ScanOptions) -> Corpus
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut documents = Vec::new();
    let mut links = LinkList::default();
    for (rel, content) in files {
        let Some(is_html) = indexable_kind(rel) else {
            continue;
        };
        let url_path = format!("/{}", rel.trim_start_matches('/'));
        let ex = if is_html {
            extract_html(content, &url_path, &opts.tokenizer, &opts.paths)
        } else {
            extract_plain(content, &url_path, &opts.tokenizer, &opts.paths)
        };
        links.add_page(&ex.document.page);
        for target in &ex.links {
            links.add_link(&ex.document.page, target);
        }
        documents.push(ex.document);
    }
    Corpus { documents, links }
}

/// Walk `root`, extracting every `.html`, `.htm` and `.txt` file.
/// Page ids are paths relative to `root`, normalized like log paths.
pub fn scan_corpus(root: &Path, opts: &ScanOptions) -> Result<Corpus, IndexError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| IndexError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .unwrap_or(entry.path())
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if indexable_kind(&rel).is_none() {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(|source| IndexError::Io {
            path: entry.path().to_path_buf(),
            source,
        })?;
        files.push((rel, String::from_utf8_lossy(&bytes).into_owned()));
    }
    Ok(corpus_from_files(
        files.iter().map(|(r, c)| (r.as_str(), c.as_str())),
        opts,
    ))
}
