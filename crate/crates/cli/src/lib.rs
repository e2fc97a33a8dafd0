//! The `logrank` command line: one subcommand per pipeline stage, each
//! reading and writing files, plus `query`, `eval` and `serve` over a state
//! directory.

pub mod http;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use logrank_core::evalkit::{compare_configs, parse_configs, parse_judgments, DEFAULT_DEPTH};
use logrank_core::fusion::{FusionWeights, QueryResult, SearchError};
use logrank_core::graph::{build_prob_graph_for_corpus, GraphError, DEFAULT_SMOOTHING};
use logrank_core::logparse::{extract_transitions, scan_log_dir, sessionize, PageViewFilter, SessionConfig};
use logrank_core::paths::PathOptions;
use logrank_core::ranker::{
    lpagerank, pagerank, RankError, RankKind, RankParams, DEFAULT_ALPHA, DEFAULT_EPSILON,
    DEFAULT_MAX_ITERATIONS,
};
use logrank_core::social::{
    social_sim_rank, AnnotationStore, SsrParams, DEFAULT_DAMPING, DEFAULT_DELTA, DEFAULT_SWEEPS,
};
use logrank_core::state::{self, StateError};
use logrank_core::synth::{branches, generate, SynthConfig};
use logrank_core::textindex::{build_index, scan_corpus, ScanOptions};
use logrank_core::write_atomic;

#[derive(Debug, Parser)]
#[command(name = "logrank", version, about = "Local-site search from content, annotations and access logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse access logs into page-to-page transition counts.
    Ingest(IngestArgs),
    /// Index a corpus directory and extract its link structure.
    Scan(ScanArgs),
    /// Blend transitions and links into a probabilistic graph.
    Graph(GraphArgs),
    /// LPageRank over a graph, or PageRank over a link list.
    Rank(RankArgs),
    /// SocialSimRank over an annotation file.
    Ssr(SsrArgs),
    /// Search a state directory and print TSV results.
    Query(QueryArgs),
    /// Compare engine configurations over judged queries.
    Eval(EvalArgs),
    /// Generate a synthetic corpus, log and annotations.
    Synth(SynthArgs),
    /// Serve the JSON search API over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of access logs; `.gz` files are decompressed.
    #[arg(long)]
    pub logs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Session inactivity timeout in seconds.
    #[arg(long, default_value_t = 1800)]
    pub timeout: u64,
    /// Attribute hits to their local referrer instead of the previous hit.
    #[arg(long)]
    pub referrer: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out_links: PathBuf,
    #[arg(long)]
    pub out_index: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub transitions: PathBuf,
    #[arg(long)]
    pub links: Option<PathBuf>,
    /// Weight of the structural links against observed traffic.
    #[arg(long, default_value_t = DEFAULT_SMOOTHING, value_parser = unit_closed)]
    pub smoothing: f64,
    /// Index whose documents are the retrievable pages; log-only paths stay
    /// in the graph but are flagged.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["graph", "links"]))]
pub struct RankArgs {
    /// Probabilistic graph; computes LPageRank.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Link list; computes plain PageRank.
    #[arg(long)]
    pub links: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA, value_parser = unit_open)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON, value_parser = positive)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS, value_parser = at_least_one)]
    pub max_iterations: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SsrArgs {
    /// `term<TAB>page<TAB>user_count` lines.
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DAMPING, value_parser = unit_open)]
    pub ca: f64,
    #[arg(long, default_value_t = DEFAULT_DAMPING, value_parser = unit_open)]
    pub cp: f64,
    #[arg(long, default_value_t = DEFAULT_SWEEPS, value_parser = at_least_one)]
    pub iters: usize,
    #[arg(long, default_value_t = DEFAULT_DELTA, value_parser = positive)]
    pub delta: f64,
    /// Number of distinct users behind the counts, if known.
    #[arg(long)]
    pub users: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StaticArg {
    Lpr,
    Pr,
}

impl From<StaticArg> for RankKind {
    fn from(s: StaticArg) -> Self {
        match s {
            StaticArg::Lpr => RankKind::Lpr,
            StaticArg::Pr => RankKind::Pr,
        }
    }
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long, env = "LOGRANK_STATE")]
    pub state: PathBuf,
    #[arg(long)]
    pub q: String,
    #[arg(short, default_value_t = 10, value_parser = at_least_one)]
    pub k: usize,
    /// `text,social,static` fusion weights.
    #[arg(long, default_value_t = FusionWeights::default())]
    pub weights: FusionWeights,
    /// Static signal: LPageRank or plain PageRank.
    #[arg(long = "static", value_enum, default_value_t = StaticArg::Lpr)]
    pub static_kind: StaticArg,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "LOGRANK_STATE")]
    pub state: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long)]
    pub configs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Recall-curve CSV; defaults to the report path with a `.csv`
    /// extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Results inspected per query.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    pub depth: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub pages: usize,
    #[arg(long, default_value_t = 400)]
    pub visitors: usize,
    /// Manufacturer section that receives extra traffic.
    #[arg(long, default_value = "kawai")]
    pub hot_branch: String,
    #[arg(long, default_value_t = 6.0, value_parser = positive)]
    pub skew: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "LOGRANK_STATE")]
    pub state: PathBuf,
    #[arg(long, env = "LOGRANK_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Static files served under `/`, e.g. the browser demo.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("not a finite number: {s}"))
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("must be a positive integer, got {s}")),
    }
}

fn unit_open(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie strictly between 0 and 1, got {v}"))
    }
}

fn unit_closed(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

/// Failure classes, mapped to exit codes by [`CliError::exit_code`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<StateError> for CliError {
    fn from(e: StateError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn search_error(e: SearchError) -> CliError {
    match e {
        SearchError::EmptyQuery | SearchError::InvalidWeights(_) | SearchError::InvalidK => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Data(e.to_string()),
    }
}

/// Run one parsed command. Progress goes to stderr, results to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Scan(a) => scan(a),
        Command::Graph(a) => graph(a),
        Command::Rank(a) => rank(a),
        Command::Ssr(a) => ssr(a),
        Command::Query(a) => query(a, out),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Serve(a) => http::serve(a),
    }
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    if !a.logs.is_dir() {
        return Err(CliError::Data(format!("{}: not a directory", a.logs.display())));
    }
    let scan = scan_log_dir(&a.logs, &PathOptions::default(), &PageViewFilter::default())
        .map_err(|e| CliError::Data(format!("{}: {e}", a.logs.display())))?;
    let sessions = sessionize(&scan.records, &SessionConfig::with_timeout(a.timeout));
    let counts = extract_transitions(&sessions, a.referrer);
    state::write_transitions(
        &a.out,
        &counts,
        &[
            ("timeout", a.timeout.to_string()),
            ("referrer", a.referrer.to_string()),
        ],
    )?;
    eprintln!(
        "ingest: {} page views, {} rejected lines, {} sessions, {} transitions -> {}",
        scan.records.len(),
        scan.rejected(),
        sessions.len(),
        counts.total_transitions(),
        a.out.display()
    );
    Ok(())
}

fn scan(a: ScanArgs) -> Result<(), CliError> {
    let opts = ScanOptions::default();
    let corpus = scan_corpus(&a.corpus, &opts).map_err(|e| CliError::Data(e.to_string()))?;
    if corpus.documents.is_empty() {
        return Err(CliError::Data(format!("{}: no .html, .htm or .txt files", a.corpus.display())));
    }
    let index = build_index(&corpus.documents, &opts.tokenizer).map_err(|e| CliError::Data(e.to_string()))?;
    state::write_links(&a.out_links, &corpus.links)?;
    state::write_index(&a.out_index, &index, Some(&corpus.links.checksum()))?;
    eprintln!(
        "scan: {} documents, {} terms, {} links",
        index.doc_count(),
        index.term_count(),
        corpus.links.edge_count()
    );
    Ok(())
}

fn graph(a: GraphArgs) -> Result<(), CliError> {
    let counts = state::read_transitions(&a.transitions)?;
    let links = a.links.as_deref().map(state::read_links).transpose()?;
    let corpus: Option<BTreeSet<String>> = match &a.index {
        Some(p) => {
            let (idx, meta) = state::read_index(p)?;
            if let (Some(l), Some(rec)) = (&links, &meta.links_checksum) {
                if &l.checksum() != rec {
                    return Err(CliError::Data(format!(
                        "{} was scanned with a different link list",
                        p.display()
                    )));
                }
            }
            Some(idx.docs().iter().map(|d| d.page.clone()).collect())
        }
        None => None,
    };
    let g = build_prob_graph_for_corpus(&counts, links.as_ref(), a.smoothing, corpus.as_ref())
        .map_err(|e| match e {
            GraphError::BadSmoothing(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        })?;
    let links_ck = links.as_ref().map(|l| l.checksum());
    state::write_graph(&a.out, &g, a.smoothing, links_ck.as_deref(), &counts.checksum())?;
    eprintln!("graph: {} pages, {} edges", g.len(), g.edge_count());
    Ok(())
}

fn rank(a: RankArgs) -> Result<(), CliError> {
    let params = RankParams {
        alpha: a.alpha,
        epsilon: a.epsilon,
        max_iterations: a.max_iterations,
    };
    let rank_err = |e: RankError| match e {
        RankError::InvalidParams(_) => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    };
    let (rv, source_ck) = if let Some(gp) = &a.graph {
        let (g, _) = state::read_graph(gp)?;
        (lpagerank(&g, params).map_err(rank_err)?, g.checksum())
    } else {
        let lp = a.links.as_ref().expect("clap enforces one source");
        let l = state::read_links(lp)?;
        (pagerank(&l, params).map_err(rank_err)?, l.checksum())
    };
    state::write_rank(&a.out, &rv, &source_ck)?;
    eprintln!(
        "rank: {} over {} pages, {} iterations, residual {:.3e}",
        rv.kind,
        rv.len(),
        rv.iterations_used,
        rv.final_residual
    );
    Ok(())
}

fn ssr(a: SsrArgs) -> Result<(), CliError> {
    let text = read_text(&a.annotations)?;
    let mut store = AnnotationStore::from_tsv(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.annotations.display())))?;
    if let Some(u) = a.users {
        store = store.with_user_count(u).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let params = SsrParams {
        c_a: a.ca,
        c_p: a.cp,
        delta: a.delta,
        max_iterations: a.iters,
    };
    let sim = social_sim_rank(&store, params).map_err(|e| CliError::Data(e.to_string()))?;
    state::write_sim(&a.out, &store, &sim)?;
    eprintln!(
        "ssr: {} annotations x {} pages, {} sweeps",
        store.annotation_count(),
        store.page_count(),
        sim.iterations_used
    );
    Ok(())
}

/// Column header of `query` output.
pub const QUERY_HEADER: &str = "position\tpage\tscore\ttext\tsocial\tstatic";

/// TSV rendering of search results. Scores use the shortest representation
/// that parses back to the same value.
pub fn format_results(results: &[QueryResult]) -> String {
    let mut out = String::from(QUERY_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.position, r.page, r.score, r.components.text, r.components.social, r.components.static_
        );
    }
    out
}

fn query(a: QueryArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let st = state::load_state(&a.state)?;
    let results = st
        .engine
        .search(&a.q, a.k, a.weights, a.static_kind.into())
        .map_err(search_error)?;
    out.write_all(format_results(&results).as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let judgments = parse_judgments(&read_text(&a.judgments)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.judgments.display())))?;
    let configs = parse_configs(&read_text(&a.configs)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.configs.display())))?;
    let st = state::load_state(&a.state)?;
    let report = compare_configs(&judgments, &configs, &st.engine, a.depth)
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_text(&a.out, &report.to_tsv())?;
    let csv = a.csv.unwrap_or_else(|| a.out.with_extension("csv"));
    write_text(&csv, &report.to_csv())?;
    eprintln!(
        "eval: {} queries x {} configs -> {}",
        report.rows.len(),
        report.configs.len(),
        a.out.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    if !branches().contains(&a.hot_branch.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown --hot-branch {:?}; choose one of {}",
            a.hot_branch,
            branches().join(", ")
        )));
    }
    let site = generate(&SynthConfig {
        seed: a.seed,
        pages: a.pages,
        visitors: a.visitors,
        hot_branch: a.hot_branch,
        skew: a.skew,
        ..Default::default()
    });
    site.write_to(&a.out)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
    eprintln!(
        "synth: {} files, {} log lines, {} annotations -> {}",
        site.files.len(),
        site.log_lines.len(),
        site.annotations.len(),
        a.out.display()
    );
    Ok(())
}
