mod common;

use std::fs;
use std::path::Path;

use common::{logrank, ok, parse_query_tsv};
use logrank_core::graph::LinkList;
use logrank_core::ranker::RankKind;
use logrank_core::state;
use logrank_oracles::{fuse, text};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn two_page_cycle_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let links = dir.path().join("links.tsv");
    state::write_links(&links, &LinkList::from_pairs([("/a", "/b"), ("/b", "/a")])).unwrap();
    let out = dir.path().join("pr.json");
    ok(&["rank", "--links", s(&links), "--epsilon", "1e-12", "--out", s(&out)]).unwrap();
    let (rv, meta) = state::read_rank(&out).unwrap();
    assert_eq!(rv.kind, RankKind::Pr);
    assert!(meta.contains_key("links_checksum"));
    for p in ["/a", "/b"] {
        assert!((rv.get(p).unwrap() - 1.0).abs() < 1e-9, "{p}: {:?}", rv.get(p));
    }
}

const DOCS: [(&str, &str); 3] = [
    ("a.txt", "bass drum bass drum circuit"),
    ("b.txt", "drum machine manual"),
    ("c.txt", "synth bass patch notes patch"),
];

fn text_site(root: &Path) -> std::path::PathBuf {
    let corpus = root.join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    for (name, body) in DOCS {
        fs::write(corpus.join(name), body).unwrap();
    }
    let st = root.join("state");
    ok(&[
        "scan",
        "--corpus",
        s(&corpus),
        "--out-links",
        s(&st.join("links.tsv")),
        "--out-index",
        s(&st.join("index.json")),
    ])
    .unwrap();
    ok(&["rank", "--links", s(&st.join("links.tsv")), "--out", s(&st.join("pr.json"))]).unwrap();
    st
}

/// Query the text-only state, which has PageRank but no traffic graph.
fn query(st: &Path, q: &str, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["query", "--state", s(st), "--q", q, "--static", "pr"];
    args.extend_from_slice(extra);
    logrank(&args)
}

#[test]
fn text_only_query_follows_tfidf() {
    let dir = tempfile::tempdir().unwrap();
    let st = text_site(dir.path());
    let out = query(&st, "bass drum", &["--weights", "1,0,0"]);
    assert!(out.status.success());
    let out = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.lines().next(), Some(logrank_cli::QUERY_HEADER));
    let got = parse_query_tsv(&out);

    let docs: Vec<(String, Vec<String>)> = DOCS
        .iter()
        .map(|(n, b)| (format!("/{n}"), b.split(' ').map(String::from).collect()))
        .collect();
    let want = text::tfidf(&docs, &["bass".into(), "drum".into()]);
    let mut order: Vec<(&String, &f64)> = want.iter().filter(|(_, &v)| v > 0.0).collect();
    order.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(b.0)));

    // Components are reported after min-max scaling over the candidates.
    let scaled = fuse::min_max(&order.iter().map(|x| *x.1).collect::<Vec<_>>());
    assert_eq!(got.len(), order.len());
    for (i, ((pos, page, c), ((p, _), v))) in got.iter().zip(order.iter().zip(&scaled)).enumerate() {
        assert_eq!(*pos, i + 1);
        assert_eq!(page, *p);
        assert!((c[1] - v).abs() < 1e-12, "{page}: {} vs {v}", c[1]);
        assert_eq!(c[0], c[1]);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let st = text_site(dir.path());
    assert_eq!(query(&st, "drum", &[]).status.code(), Some(0));
    // The traffic-based rank was never built.
    assert_eq!(logrank(&["query", "--state", s(&st), "--q", "drum"]).status.code(), Some(2));
    assert_eq!(logrank(&["--help"]).status.code(), Some(0));
    // Bad arguments.
    assert_eq!(logrank(&["query", "--q", "drum"]).status.code(), Some(1));
    assert_eq!(logrank(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        logrank(&["rank", "--links", s(&st.join("links.tsv")), "--alpha", "2", "--out", "x"]).status.code(),
        Some(1)
    );
    assert_eq!(logrank(&["synth", "--hot-branch", "nowhere", "--out", "x"]).status.code(), Some(1));
    // Bad data.
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(logrank(&["query", "--state", s(&empty), "--q", "drum"]).status.code(), Some(2));
    let bogus = dir.path().join("bogus.tsv");
    fs::write(&bogus, "not\ta\tgraph\n").unwrap();
    assert_eq!(
        logrank(&["rank", "--graph", s(&bogus), "--out", s(&dir.path().join("r.json"))]).status.code(),
        Some(2)
    );
}

#[test]
fn state_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let st = text_site(dir.path());
    let out = std::process::Command::new(common::bin())
        .args(["query", "--q", "patch", "--static", "pr"])
        .env("LOGRANK_STATE", &st)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = parse_query_tsv(&String::from_utf8_lossy(&out.stdout));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].1, "/c.txt");
}

#[test]
fn failed_runs_leave_outputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    let links = dir.path().join("links.tsv");
    state::write_links(&links, &LinkList::from_pairs([("/a", "/b")])).unwrap();
    let out = dir.path().join("pr.json");
    fs::write(&out, "previous").unwrap();

    let bogus = dir.path().join("bogus.tsv");
    fs::write(&bogus, "garbage").unwrap();
    assert_eq!(logrank(&["rank", "--graph", s(&bogus), "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(fs::read_to_string(&out).unwrap(), "previous");

    // The final rename cannot replace a non-empty directory.
    let blocked = dir.path().join("blocked.json");
    fs::create_dir(&blocked).unwrap();
    fs::write(blocked.join("keep"), "x").unwrap();
    assert_eq!(logrank(&["rank", "--links", s(&links), "--out", s(&blocked)]).status.code(), Some(2));
    assert_eq!(fs::read_to_string(blocked.join("keep")).unwrap(), "x");
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["blocked.json", "bogus.tsv", "links.tsv", "pr.json"]);
}

#[test]
fn mismatched_artifacts_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let (_, st) = common::build_state(dir.path(), 7).unwrap();
    ok(&["query", "--state", s(&st), "--q", "bass"]).unwrap();

    // Links from a different site no longer match the checksum in graph.tsv.
    state::write_links(&st.join("links.tsv"), &LinkList::from_pairs([("/x", "/y")])).unwrap();
    let out = logrank(&["query", "--state", s(&st), "--q", "bass"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}
