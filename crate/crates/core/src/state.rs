//! On-disk artifacts and the engine state directory.
//!
//! Each pipeline stage writes one artifact. Every artifact carries the
//! parameters that produced it and a checksum of its own content, and records
//! the checksums of the artifacts it was built from. [`load_state`] follows
//! those references and refuses combinations that do not line up.
//!
//! A state directory holds some or all of:
//!
//! | file              | written by     | references                 |
//! |-------------------|----------------|----------------------------|
//! | `index.json`      | `scan`         | links                      |
//! | `links.tsv`       | `scan`         |                            |
//! | `transitions.tsv` | `ingest`       |                            |
//! | `graph.tsv`       | `graph`        | links, transitions         |
//! | `lpr.json`        | `rank --graph` | graph                      |
//! | `pr.json`         | `rank --links` | links                      |
//! | `sim/`            | `ssr`          | annotations (inside `sim`) |

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::atomic::{write_atomic, write_dir_atomic};
use crate::checksum::content_checksum;
use crate::fusion::Engine;
use crate::graph::{LinkList, ProbGraph};
use crate::logparse::TransitionCounts;
use crate::pipeline::{Built, PipelineConfig};
use crate::ranker::{RankKind, RankVector};
use crate::social::{load_sim_dir, save_sim_dir, AnnotationStore, SimMatrices};
use crate::textindex::InvertedIndex;

pub const INDEX_FILE: &str = "index.json";
pub const LINKS_FILE: &str = "links.tsv";
pub const TRANSITIONS_FILE: &str = "transitions.tsv";
pub const GRAPH_FILE: &str = "graph.tsv";
pub const LPR_FILE: &str = "lpr.json";
pub const PR_FILE: &str = "pr.json";
pub const SIM_DIR: &str = "sim";

const INDEX_ENVELOPE_FORMAT: &str = "logrank-index";
const INDEX_ENVELOPE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Artifact {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("artifacts do not belong together: {0}")]
    Mismatch(String),
    #[error("{} holds no {INDEX_FILE}", .0.display())]
    MissingIndex(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StateError + '_ {
    move |source| StateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn artifact_err<E>(path: &Path) -> impl FnOnce(E) -> StateError + '_
where
    E: std::error::Error + Send + Sync + 'static,
{
    move |e| StateError::Artifact {
        path: path.to_path_buf(),
        source: Box::new(e),
    }
}

fn read(path: &Path) -> Result<String, StateError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), StateError> {
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format: String,
    pub version: u32,
    pub documents: usize,
    pub terms: usize,
    pub checksum: String,
    /// Checksum of the link list scanned alongside the index.
    pub links_checksum: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct IndexEnvelope {
    meta: IndexMeta,
    index: Value,
}

pub fn write_links(path: &Path, links: &LinkList) -> Result<(), StateError> {
    write(path, &links.to_tsv())
}

pub fn read_links(path: &Path) -> Result<LinkList, StateError> {
    LinkList::from_tsv(&read(path)?).map_err(artifact_err(path))
}

pub fn write_index(
    path: &Path,
    index: &InvertedIndex,
    links_checksum: Option<&str>,
) -> Result<(), StateError> {
    let value = serde_json::to_value(index).map_err(artifact_err(path))?;
    let env = IndexEnvelope {
        meta: IndexMeta {
            format: INDEX_ENVELOPE_FORMAT.into(),
            version: INDEX_ENVELOPE_VERSION,
            documents: index.doc_count(),
            terms: index.term_count(),
            checksum: content_checksum(value.to_string().as_bytes()),
            links_checksum: links_checksum.map(str::to_string),
        },
        index: value,
    };
    let text = serde_json::to_string(&env).map_err(artifact_err(path))?;
    write(path, &text)
}

pub fn read_index(path: &Path) -> Result<(InvertedIndex, IndexMeta), StateError> {
    let env: IndexEnvelope = serde_json::from_str(&read(path)?).map_err(artifact_err(path))?;
    let mismatch = |msg: String| StateError::Mismatch(format!("{}: {msg}", path.display()));
    if env.meta.format != INDEX_ENVELOPE_FORMAT || env.meta.version != INDEX_ENVELOPE_VERSION {
        return Err(mismatch(format!(
            "unsupported format {:?} version {}",
            env.meta.format, env.meta.version
        )));
    }
    let text = env.index.to_string();
    let actual = content_checksum(text.as_bytes());
    if actual != env.meta.checksum {
        return Err(mismatch(format!(
            "checksum mismatch: header says {}, content hashes to {actual}",
            env.meta.checksum
        )));
    }
    let index = InvertedIndex::from_json(&text).map_err(artifact_err(path))?;
    Ok((index, env.meta))
}

pub fn write_transitions(
    path: &Path,
    counts: &TransitionCounts,
    meta: &[(&str, String)],
) -> Result<(), StateError> {
    write(path, &counts.to_tsv(meta))
}

pub fn read_transitions(path: &Path) -> Result<TransitionCounts, StateError> {
    TransitionCounts::from_tsv(&read(path)?).map_err(artifact_err(path))
}

/// Header key/value pairs of a `#transitions` file.
pub fn transitions_meta(text: &str) -> BTreeMap<String, String> {
    header_pairs(text, "#transitions")
}

fn header_pairs(text: &str, tag: &str) -> BTreeMap<String, String> {
    text.lines()
        .next()
        .and_then(|l| l.strip_prefix(tag))
        .map(|h| {
            h.split('\t')
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

/// Write the graph with its smoothing and the checksums of its inputs.
pub fn write_graph(
    path: &Path,
    graph: &ProbGraph,
    smoothing: f64,
    links_checksum: Option<&str>,
    transitions_checksum: &str,
) -> Result<(), StateError> {
    let mut meta = vec![
        ("smoothing", smoothing.to_string()),
        ("transitions_checksum", transitions_checksum.to_string()),
    ];
    if let Some(l) = links_checksum {
        meta.push(("links_checksum", l.to_string()));
    }
    write(path, &graph.to_tsv(&meta))
}

pub fn read_graph(path: &Path) -> Result<(ProbGraph, BTreeMap<String, String>), StateError> {
    ProbGraph::from_tsv(&read(path)?).map_err(artifact_err(path))
}

/// Write a rank vector, recording the checksum of the graph (LPageRank) or
/// link list (PageRank) it was computed from.
pub fn write_rank(path: &Path, rank: &RankVector, source_checksum: &str) -> Result<(), StateError> {
    let key = match rank.kind {
        RankKind::Lpr => "graph_checksum",
        RankKind::Pr => "links_checksum",
    };
    let extra = BTreeMap::from([(key.to_string(), source_checksum.to_string())]);
    let text = rank.to_json(&extra).map_err(artifact_err(path))?;
    write(path, &(text + "\n"))
}

pub fn read_rank(path: &Path) -> Result<(RankVector, BTreeMap<String, String>), StateError> {
    RankVector::from_json(&read(path)?).map_err(artifact_err(path))
}

pub fn write_sim(dir: &Path, store: &AnnotationStore, sim: &SimMatrices) -> Result<(), StateError> {
    write_dir_atomic(dir, |tmp| save_sim_dir(tmp, store, sim)).map_err(io_err(dir))
}

pub fn read_sim(dir: &Path) -> Result<(AnnotationStore, SimMatrices), StateError> {
    load_sim_dir(dir).map_err(artifact_err(dir))
}

/// Write every artifact of `built` into `dir` under the standard names.
pub fn save_built(dir: &Path, built: &Built, cfg: &PipelineConfig) -> Result<(), StateError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let links_ck = built.links.checksum();
    write_links(&dir.join(LINKS_FILE), &built.links)?;
    if let Some(index) = built.engine.index() {
        write_index(&dir.join(INDEX_FILE), index, Some(&links_ck))?;
    }
    write_transitions(
        &dir.join(TRANSITIONS_FILE),
        &built.counts,
        &[
            ("timeout", cfg.session.timeout_s.to_string()),
            ("referrer", cfg.use_referrer.to_string()),
        ],
    )?;
    write_graph(
        &dir.join(GRAPH_FILE),
        &built.graph,
        cfg.smoothing,
        Some(&links_ck),
        &built.counts.checksum(),
    )?;
    if let Some(lpr) = built.engine.rank(RankKind::Lpr) {
        write_rank(&dir.join(LPR_FILE), lpr, &built.graph.checksum())?;
    }
    if let Some(pr) = built.engine.rank(RankKind::Pr) {
        write_rank(&dir.join(PR_FILE), pr, &links_ck)?;
    }
    if let Some((store, sim)) = built.engine.social() {
        write_sim(&dir.join(SIM_DIR), store, sim)?;
    }
    Ok(())
}

/// A loaded, cross-checked engine plus what it was built from.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub engine: Engine,
    pub graph: Option<ProbGraph>,
    pub links: Option<LinkList>,
    /// Parameters recorded in the artifacts, keyed by stage.
    pub config: Value,
}

impl EngineState {
    /// Corpus, graph and matrix dimensions plus the config echo.
    pub fn stats(&self) -> Value {
        let index = self.engine.index();
        let mut ranks = serde_json::Map::new();
        for kind in self.engine.rank_kinds() {
            let r = self.engine.rank(kind).expect("listed kind");
            ranks.insert(
                kind.to_string(),
                json!({
                    "pages": r.len(),
                    "iterations_used": r.iterations_used,
                    "final_residual": r.final_residual,
                }),
            );
        }
        json!({
            "corpus": {
                "documents": index.map_or(0, InvertedIndex::doc_count),
                "terms": index.map_or(0, InvertedIndex::term_count),
            },
            "graph": self.graph.as_ref().map(|g| json!({
                "pages": g.len(),
                "edges": g.edge_count(),
            })),
            "links": self.links.as_ref().map(|l| json!({
                "pages": l.page_count(),
                "edges": l.edge_count(),
            })),
            "ranks": ranks,
            "social": self.engine.social().map(|(store, sim)| json!({
                "annotations": store.annotation_count(),
                "pages": store.page_count(),
                "sa": [sim.sa.size(), sim.sa.size()],
                "sp": [sim.sp.size(), sim.sp.size()],
                "iterations_used": sim.iterations_used,
            })),
            "config": self.config,
        })
    }
}

fn expect_same(what: &str, recorded: Option<&String>, actual: &str) -> Result<(), StateError> {
    match recorded {
        Some(r) if r != actual => Err(StateError::Mismatch(format!(
            "{what}: recorded {r}, found {actual}"
        ))),
        _ => Ok(()),
    }
}

/// Load a state directory. `index.json` is required; every other artifact is
/// optional, but those present must reference each other consistently.
pub fn load_state(dir: &Path) -> Result<EngineState, StateError> {
    let index_path = dir.join(INDEX_FILE);
    if !index_path.exists() {
        return Err(StateError::MissingIndex(dir.to_path_buf()));
    }
    let (index, index_meta) = read_index(&index_path)?;
    let mut config = serde_json::Map::new();

    let links_path = dir.join(LINKS_FILE);
    let links = if links_path.exists() {
        let l = read_links(&links_path)?;
        expect_same(
            "links checksum recorded by index.json",
            index_meta.links_checksum.as_ref(),
            &l.checksum(),
        )?;
        Some(l)
    } else {
        None
    };
    let links_ck = links
        .as_ref()
        .map(LinkList::checksum)
        .or(index_meta.links_checksum.clone());

    let transitions_path = dir.join(TRANSITIONS_FILE);
    let transitions_ck = if transitions_path.exists() {
        let text = read(&transitions_path)?;
        let counts = TransitionCounts::from_tsv(&text).map_err(artifact_err(&transitions_path))?;
        let meta = transitions_meta(&text);
        let mut c = serde_json::Map::new();
        for (k, v) in meta.iter().filter(|(k, _)| *k != "checksum") {
            c.insert(k.clone(), Value::String(v.clone()));
        }
        config.insert("ingest".into(), Value::Object(c));
        Some(counts.checksum())
    } else {
        None
    };

    let graph_path = dir.join(GRAPH_FILE);
    let graph = if graph_path.exists() {
        let (g, meta) = read_graph(&graph_path)?;
        if let Some(l) = &links_ck {
            expect_same("links checksum recorded by graph.tsv", meta.get("links_checksum"), l)?;
        }
        if let Some(t) = &transitions_ck {
            expect_same(
                "transitions checksum recorded by graph.tsv",
                meta.get("transitions_checksum"),
                t,
            )?;
        }
        if let Some(s) = meta.get("smoothing") {
            config.insert("graph".into(), json!({ "smoothing": s.parse::<f64>().ok() }));
        }
        Some(g)
    } else {
        None
    };

    let mut engine = Engine::new().with_index(index);
    let mut rank_config = serde_json::Map::new();
    for (file, kind) in [(LPR_FILE, RankKind::Lpr), (PR_FILE, RankKind::Pr)] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        let (rv, extra) = read_rank(&path)?;
        if rv.kind != kind {
            return Err(StateError::Mismatch(format!(
                "{file} holds a {} vector",
                rv.kind
            )));
        }
        match kind {
            RankKind::Lpr => {
                if let Some(g) = &graph {
                    expect_same(
                        "graph checksum recorded by lpr.json",
                        extra.get("graph_checksum"),
                        &g.checksum(),
                    )?;
                }
            }
            RankKind::Pr => {
                if let Some(l) = &links_ck {
                    expect_same("links checksum recorded by pr.json", extra.get("links_checksum"), l)?;
                }
            }
        }
        rank_config.insert(
            kind.to_string(),
            json!({
                "alpha": rv.params.alpha,
                "epsilon": rv.params.epsilon,
                "max_iterations": rv.params.max_iterations,
            }),
        );
        engine = engine.with_rank(rv);
    }
    if !rank_config.is_empty() {
        config.insert("rank".into(), Value::Object(rank_config));
    }

    let sim_path = dir.join(SIM_DIR);
    if sim_path.exists() {
        let (store, sim) = read_sim(&sim_path)?;
        config.insert(
            "ssr".into(),
            json!({
                "c_a": sim.params.c_a,
                "c_p": sim.params.c_p,
                "delta": sim.params.delta,
                "max_iterations": sim.params.max_iterations,
            }),
        );
        engine = engine.with_social(store, sim);
    }

    Ok(EngineState {
        engine,
        graph,
        links,
        config: Value::Object(config),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::build_from_site;
    use crate::synth::{generate, SynthConfig};

    fn built() -> (Built, PipelineConfig) {
        let site = generate(&SynthConfig {
            pages: 60,
            visitors: 60,
            ..Default::default()
        });
        let cfg = PipelineConfig::default();
        (build_from_site(&site, &cfg).unwrap(), cfg)
    }

    #[test]
    fn save_then_load() {
        let (b, cfg) = built();
        let dir = tempfile::tempdir().unwrap();
        save_built(dir.path(), &b, &cfg).unwrap();
        let st = load_state(dir.path()).unwrap();
        assert_eq!(st.engine.index(), b.engine.index());
        assert_eq!(
            st.engine.rank(RankKind::Lpr).unwrap().scores,
            b.engine.rank(RankKind::Lpr).unwrap().scores
        );
        assert_eq!(st.graph.as_ref(), Some(&b.graph));
        assert_eq!(st.config["graph"]["smoothing"], json!(0.1));
        assert_eq!(st.config["ssr"]["c_a"], json!(0.7));
        let stats = st.stats();
        assert_eq!(
            stats["corpus"]["documents"],
            json!(b.engine.index().unwrap().doc_count())
        );
    }

    #[test]
    fn mismatched_artifacts_are_refused() {
        let (b, cfg) = built();
        let dir = tempfile::tempdir().unwrap();
        save_built(dir.path(), &b, &cfg).unwrap();

        let other = tempfile::tempdir().unwrap();
        let mut links = b.links.clone();
        links.add_link("/", "/brand-new");
        let cfg2 = cfg.clone();
        let mut b2 = b.clone();
        b2.links = links;
        save_built(other.path(), &b2, &cfg2).unwrap();
        fs::copy(other.path().join(LINKS_FILE), dir.path().join(LINKS_FILE)).unwrap();
        assert!(matches!(
            load_state(dir.path()),
            Err(StateError::Mismatch(_))
        ));
    }

    #[test]
    fn tampered_rank_file_is_refused() {
        let (b, cfg) = built();
        let dir = tempfile::tempdir().unwrap();
        save_built(dir.path(), &b, &cfg).unwrap();
        let p = dir.path().join(LPR_FILE);
        let text = fs::read_to_string(&p).unwrap();
        let (rv, _) = RankVector::from_json(&text).unwrap();
        let needle = format!("{:?}", rv.scores[0]);
        fs::write(&p, text.replacen(&needle, "7.5", 1)).unwrap();
        assert!(matches!(load_state(dir.path()), Err(StateError::Artifact { .. })));
    }

    #[test]
    fn missing_index() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_state(dir.path()),
            Err(StateError::MissingIndex(_))
        ));
    }
}
