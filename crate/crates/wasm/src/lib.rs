//! In-browser playground over a generated site. Every method returns a JSON
//! string so the page script only needs `JSON.parse`.

use std::collections::BTreeSet;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use logrank_core::fusion::{Engine, FusionWeights};
use logrank_core::graph::{build_prob_graph_for_corpus, LinkList};
use logrank_core::logparse::TransitionCounts;
use logrank_core::pipeline::{build, ingest_lines, PipelineConfig};
use logrank_core::ranker::{lpagerank, pagerank, RankKind, RankParams, RankVector};
use logrank_core::social::{load_annotations, query_page_similarity, social_sim_rank, AnnotationStore, SsrParams};
use logrank_core::synth::{branches, generate, SynthConfig};
use logrank_core::textindex::corpus_from_files;

#[wasm_bindgen]
pub struct Demo {
    engine: Engine,
    links: LinkList,
    counts: TransitionCounts,
    pages: BTreeSet<String>,
    store: AnnotationStore,
    hot_branch: String,
}

fn top(rv: &RankVector, k: usize) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = rv.pages.iter().cloned().zip(rv.scores.iter().copied()).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

fn position(rv: &RankVector, page: &str) -> Option<usize> {
    let mine = rv.get(page)?;
    let ahead = rv
        .pages
        .iter()
        .zip(&rv.scores)
        .filter(|(p, &s)| s > mine || (s == mine && p.as_str() < page))
        .count();
    Some(ahead + 1)
}

fn listing(v: &[(String, f64)]) -> Value {
    v.iter().map(|(p, s)| json!({ "page": p, "score": s })).collect()
}

#[wasm_bindgen]
impl Demo {
    /// Generate a site from `seed` with extra traffic into `hot_branch` and
    /// build every signal with default parameters.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, hot_branch: &str) -> Result<Demo, String> {
        if !branches().contains(&hot_branch) {
            return Err(format!("unknown branch {hot_branch:?}"));
        }
        let site = generate(&SynthConfig {
            seed: seed.into(),
            hot_branch: hot_branch.to_string(),
            ..Default::default()
        });
        let cfg = PipelineConfig::default();
        let annotations: Vec<(String, String, i64)> =
            site.annotations.iter().map(|(t, p, n)| (t.clone(), p.clone(), *n as i64)).collect();
        let files = || site.files.iter().map(|(f, c)| (f.as_str(), c.as_str()));
        let built = build(files(), site.log_lines.iter().map(String::as_str), &annotations, &cfg)
            .map_err(|e| e.to_string())?;
        let corpus = corpus_from_files(files(), &cfg.scan);
        let (_, counts) = ingest_lines(site.log_lines.iter().map(String::as_str), &cfg);
        Ok(Demo {
            engine: built.engine,
            links: built.links,
            counts,
            pages: corpus.documents.iter().map(|d| d.page.clone()).collect(),
            store: load_annotations(&annotations).map_err(|e| e.to_string())?,
            hot_branch: site.hot_branch,
        })
    }

    /// Section names a site can be generated with, as a JSON array.
    pub fn branches() -> String {
        serde_json::to_string(&branches()).expect("plain data")
    }

    pub fn summary(&self) -> String {
        json!({
            "documents": self.pages.len(),
            "links": self.links.edge_count(),
            "transitions": self.counts.total_transitions(),
            "annotations": self.store.annotation_count(),
            "hot_branch": self.hot_branch,
        })
        .to_string()
    }

    /// Fused search. `static_kind` is `lpr` or `pr`.
    pub fn search(
        &self,
        query: &str,
        k: usize,
        text: f64,
        social: f64,
        static_weight: f64,
        static_kind: &str,
    ) -> Result<String, String> {
        let kind = match static_kind {
            "lpr" => RankKind::Lpr,
            "pr" => RankKind::Pr,
            other => return Err(format!("unknown static rank {other:?}")),
        };
        let w = FusionWeights::new(text, social, static_weight).map_err(|e| e.to_string())?;
        let hits = self.engine.search(query, k, w, kind).map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&hits).expect("plain data"))
    }

    /// Recompute LPageRank and PageRank at damping `alpha`, with the traffic
    /// graph smoothed by `smoothing`, and report the top `k` of each plus
    /// where the hot branch landing page falls.
    pub fn compare_ranks(&self, alpha: f64, smoothing: f64, k: usize) -> Result<String, String> {
        let params = RankParams {
            alpha,
            ..Default::default()
        };
        let g = build_prob_graph_for_corpus(&self.counts, Some(&self.links), smoothing, Some(&self.pages))
            .map_err(|e| e.to_string())?;
        let lpr = lpagerank(&g, params).map_err(|e| e.to_string())?;
        let pr = pagerank(&self.links, params).map_err(|e| e.to_string())?;
        let landing = format!("/{}", self.hot_branch);
        Ok(json!({
            "lpr": listing(&top(&lpr, k)),
            "pr": listing(&top(&pr, k)),
            "iterations": { "lpr": lpr.iterations_used, "pr": pr.iterations_used },
            "landing": {
                "page": landing,
                "lpr": position(&lpr, &landing),
                "pr": position(&pr, &landing),
            },
        })
        .to_string())
    }

    /// SocialSimRank with the given damping factors: the annotations most
    /// similar to `term` and the pages it reaches through them.
    pub fn neighbours(&self, term: &str, c_a: f64, c_p: f64, k: usize) -> Result<String, String> {
        let params = SsrParams {
            c_a,
            c_p,
            ..Default::default()
        };
        let sim = social_sim_rank(&self.store, params).map_err(|e| e.to_string())?;
        let term = term.trim().to_lowercase();
        let q = [term.clone()];
        let mut pages: Vec<(String, f64)> = self
            .store
            .pages()
            .iter()
            .map(|p| (p.clone(), query_page_similarity(&q, p, &self.store, &sim)))
            .filter(|x| x.1 > 0.0)
            .collect();
        pages.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        pages.truncate(k);
        let near: Vec<Value> = sim
            .neighbours(&term, k)
            .into_iter()
            .map(|(t, s)| json!({ "term": t, "score": s }))
            .collect();
        Ok(json!({
            "term": term,
            "known": self.store.annotation_index(&term).is_some(),
            "sweeps": sim.iterations_used,
            "neighbours": near,
            "pages": listing(&pages),
        })
        .to_string())
    }
}
