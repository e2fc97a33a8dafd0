//! In-memory composition of the pipeline stages, from raw corpus files, log
//! lines and annotations to a ready [`Engine`].

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fusion::Engine;
use crate::graph::{build_prob_graph_for_corpus, GraphError, LinkList, ProbGraph};
use crate::logparse::{
    extract_transitions, sessionize, LogScan, PageViewFilter, SessionConfig, TransitionCounts,
};
use crate::paths::PathOptions;
use crate::ranker::{lpagerank, pagerank, RankError, RankParams};
use crate::social::{load_annotations, social_sim_rank, SocialError, SsrParams};
use crate::synth::SynthSite;
use crate::textindex::{build_index, corpus_from_files, IndexError, ScanOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Social(#[from] SocialError),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub paths: PathOptions,
    pub filter: PageViewFilter,
    pub session: SessionConfig,
    pub use_referrer: bool,
    pub smoothing: f64,
    pub rank: RankParams,
    pub ssr: SsrParams,
    pub scan: ScanOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: PathOptions::default(),
            filter: PageViewFilter::default(),
            session: SessionConfig::default(),
            use_referrer: false,
            smoothing: crate::graph::DEFAULT_SMOOTHING,
            rank: RankParams::default(),
            ssr: SsrParams::default(),
            scan: ScanOptions::default(),
        }
    }
}

/// Parse, filter, sessionize and count a batch of log lines.
pub fn ingest_lines<'a, I>(lines: I, cfg: &PipelineConfig) -> (LogScan, TransitionCounts)
where
    I: IntoIterator<Item = &'a str>,
{
    let mut scan = LogScan::default();
    for line in lines {
        scan.push_line(line, &cfg.paths, &cfg.filter);
    }
    let sessions = sessionize(&scan.records, &cfg.session);
    let counts = extract_transitions(&sessions, cfg.use_referrer);
    (scan, counts)
}

/// Everything built from one set of inputs.
#[derive(Debug, Clone)]
pub struct Built {
    pub engine: Engine,
    pub links: LinkList,
    pub graph: ProbGraph,
    pub counts: TransitionCounts,
}

/// Build an engine with both PageRank and LPageRank static scores and, when
/// annotations are given, SocialSimRank similarities.
pub fn build<'a, F, L>(
    files: F,
    log_lines: L,
    annotations: &[(String, String, i64)],
    cfg: &PipelineConfig,
) -> Result<Built, PipelineError>
where
    F: IntoIterator<Item = (&'a str, &'a str)>,
    L: IntoIterator<Item = &'a str>,
{
    let corpus = corpus_from_files(files, &cfg.scan);
    let index = build_index(&corpus.documents, &cfg.scan.tokenizer)?;
    let (_, counts) = ingest_lines(log_lines, cfg);
    let pages: BTreeSet<String> = corpus.documents.iter().map(|d| d.page.clone()).collect();
    let graph = build_prob_graph_for_corpus(&counts, Some(&corpus.links), cfg.smoothing, Some(&pages))?;
    let lpr = lpagerank(&graph, cfg.rank)?;
    let pr = pagerank(&corpus.links, cfg.rank)?;
    let mut engine = Engine::new().with_index(index).with_rank(lpr).with_rank(pr);
    if !annotations.is_empty() {
        let store = load_annotations(annotations)?;
        let sim = social_sim_rank(&store, cfg.ssr)?;
        engine = engine.with_social(store, sim);
    }
    Ok(Built {
        engine,
        links: corpus.links,
        graph,
        counts,
    })
}

/// [`build`] over a generated site.
pub fn build_from_site(site: &SynthSite, cfg: &PipelineConfig) -> Result<Built, PipelineError> {
    let annotations: Vec<(String, String, i64)> = site
        .annotations
        .iter()
        .map(|(t, p, n)| (t.clone(), p.clone(), *n as i64))
        .collect();
    build(
        site.files.iter().map(|(f, c)| (f.as_str(), c.as_str())),
        site.log_lines.iter().map(String::as_str),
        &annotations,
        cfg,
    )
}
