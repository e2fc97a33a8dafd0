#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_logrank"))
}

/// Run the binary with a clean `LOGRANK_*` environment.
pub fn logrank(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("LOGRANK_STATE")
        .env_remove("LOGRANK_PORT")
        .output()
        .expect("logrank runs")
}

pub fn ok(args: &[&str]) -> Result<String, String> {
    let out = logrank(args);
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "logrank {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// `synth` into `dir/site`, then every pipeline stage into `dir/state`.
/// Returns `(site, state)`.
pub fn build_state(dir: &Path, seed: u64) -> Result<(PathBuf, PathBuf), String> {
    let site = dir.join("site");
    let st = dir.join("state");
    std::fs::create_dir_all(&st).map_err(|e| e.to_string())?;
    let seed = seed.to_string();
    ok(&["synth", "--seed", &seed, "--out", s(&site)])?;
    ok(&[
        "scan",
        "--corpus",
        s(&site.join("corpus")),
        "--out-links",
        s(&st.join("links.tsv")),
        "--out-index",
        s(&st.join("index.json")),
    ])?;
    ok(&["ingest", "--logs", s(&site.join("logs")), "--out", s(&st.join("transitions.tsv"))])?;
    ok(&[
        "graph",
        "--transitions",
        s(&st.join("transitions.tsv")),
        "--links",
        s(&st.join("links.tsv")),
        "--index",
        s(&st.join("index.json")),
        "--smoothing",
        "0.1",
        "--out",
        s(&st.join("graph.tsv")),
    ])?;
    ok(&["rank", "--graph", s(&st.join("graph.tsv")), "--out", s(&st.join("lpr.json"))])?;
    ok(&["rank", "--links", s(&st.join("links.tsv")), "--out", s(&st.join("pr.json"))])?;
    ok(&["ssr", "--annotations", s(&site.join("annotations.tsv")), "--out", s(&st.join("sim"))])?;
    Ok((site, st))
}

/// `eval` over a built state with the generated judgments and configs.
pub fn eval(site: &Path, st: &Path, out: &Path) -> Result<Vec<u8>, String> {
    ok(&[
        "eval",
        "--state",
        s(st),
        "--judgments",
        s(&site.join("judgments.tsv")),
        "--configs",
        s(&site.join("configs.json")),
        "--out",
        s(out),
    ])?;
    std::fs::read(out).map_err(|e| e.to_string())
}

/// Parse `query` TSV output into `(position, page, [score, text, social, static])`.
pub fn parse_query_tsv(text: &str) -> Vec<(usize, String, [f64; 4])> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let n = |i: usize| f[i].parse::<f64>().unwrap();
            (f[0].parse().unwrap(), f[1].to_string(), [n(2), n(3), n(4), n(5)])
        })
        .collect()
}
