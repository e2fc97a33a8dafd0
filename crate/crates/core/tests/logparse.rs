use std::io::{BufRead, Write};
use std::path::PathBuf;

use logrank_core::logparse::{
    extract_transitions, open_log, parse_clf_line, scan_log, sessionize, LogError, LogRecord,
    PageViewFilter, SessionConfig, TransitionCounts,
};
use logrank_core::paths::PathOptions;
use logrank_oracles::sessions;
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/clf").join(name)
}

fn render(line: &str) -> String {
    let dash = |o: Option<String>| o.unwrap_or_else(|| "-".into());
    match parse_clf_line(line) {
        Ok(r) => {
            let verdict = match PageViewFilter::default().check(&r) {
                Ok(()) => "view".to_string(),
                Err(why) => format!("skip:{why:?}"),
            };
            [
                "ok".to_string(),
                verdict,
                r.client_key,
                r.host,
                r.timestamp.to_string(),
                r.method,
                r.path,
                dash(r.protocol),
                r.status.to_string(),
                dash(r.bytes.map(|b| b.to_string())),
                dash(r.referrer),
                dash(r.user_agent),
            ]
            .join("\t")
        }
        Err(LogError::MalformedLine(_)) => "err\tMalformedLine".into(),
        Err(LogError::BadTimestamp(_)) => "err\tBadTimestamp".into(),
        Err(LogError::BadStatus(_)) => "err\tBadStatus".into(),
    }
}

#[test]
fn golden_parse() {
    let log = std::fs::read_to_string(fixture("sample.log")).unwrap();
    let expected = std::fs::read_to_string(fixture("sample.expected")).unwrap();
    let got: Vec<String> = log.lines().map(render).collect();
    let want: Vec<&str> = expected.lines().collect();
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        assert_eq!(g, w, "line {}", i + 1);
    }
}

fn golden_transitions(use_referrer: bool) -> (TransitionCounts, String) {
    let f = std::fs::File::open(fixture("sessions.log")).unwrap();
    let scan = scan_log(
        std::io::BufReader::new(f),
        &PathOptions::default(),
        &PageViewFilter::default(),
    )
    .unwrap();
    let sessions = sessionize(&scan.records, &SessionConfig::default());
    let counts = extract_transitions(&sessions, use_referrer);
    let name = if use_referrer {
        "sessions.referrer.tsv"
    } else {
        "sessions.consecutive.tsv"
    };
    (counts, std::fs::read_to_string(fixture(name)).unwrap())
}

#[test]
fn golden_transitions_consecutive() {
    let (counts, want) = golden_transitions(false);
    assert_eq!(counts.to_tsv(&[]), want);
    assert_eq!(TransitionCounts::from_tsv(&want).unwrap(), counts);
}

#[test]
fn golden_transitions_referrer() {
    let (counts, want) = golden_transitions(true);
    assert_eq!(counts.to_tsv(&[]), want);
}

#[test]
fn gzip_and_plain_logs_read_the_same() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read(fixture("sessions.log")).unwrap();
    let gz = dir.path().join("access.log.1.gz");
    let mut enc = flate2::write::GzEncoder::new(
        std::fs::File::create(&gz).unwrap(),
        flate2::Compression::default(),
    );
    enc.write_all(&text).unwrap();
    enc.finish().unwrap();
    let plain: Vec<String> = open_log(&fixture("sessions.log"))
        .unwrap()
        .lines()
        .map(Result::unwrap)
        .collect();
    let unzipped: Vec<String> = open_log(&gz).unwrap().lines().map(Result::unwrap).collect();
    assert_eq!(plain, unzipped);
}

fn record(client: &str, ts: i64, path: &str) -> LogRecord {
    LogRecord {
        client_key: client.into(),
        host: client.into(),
        user_agent: None,
        timestamp: ts,
        method: "GET".into(),
        path: path.into(),
        protocol: Some("HTTP/1.0".into()),
        status: 200,
        bytes: Some(1),
        referrer: None,
    }
}

/// Per-client hit streams with strictly increasing timestamps, then shuffled
/// together.
fn interleaved() -> impl Strategy<Value = Vec<(String, i64, String)>> {
    prop::collection::vec(
        prop::collection::vec((1i64..4000, 0usize..5), 1..25),
        1..5,
    )
    .prop_flat_map(|clients| {
        let mut hits = Vec::new();
        for (c, steps) in clients.iter().enumerate() {
            let mut t = 1_000_000;
            for &(gap, page) in steps {
                t += gap;
                hits.push((format!("10.0.0.{c}"), t, format!("/p{page}")));
            }
        }
        Just(hits).prop_shuffle()
    })
}

proptest! {
    #[test]
    fn sessions_partition_the_records(hits in interleaved(), timeout in 1u64..3000) {
        let records: Vec<LogRecord> = hits.iter().map(|(c, t, p)| record(c, *t, p)).collect();
        let got = sessionize(&records, &SessionConfig::with_timeout(timeout));

        let mut seen: Vec<(String, i64, String)> = got
            .iter()
            .flat_map(|s| s.hits.iter().map(|h| (s.client_key.clone(), h.timestamp, h.path.clone())))
            .collect();
        let mut all = hits.clone();
        seen.sort();
        all.sort();
        prop_assert_eq!(seen, all);

        let want = sessions::sessionize(&hits, timeout as i64);
        let got: Vec<(String, Vec<(i64, String)>)> = got
            .into_iter()
            .map(|s| (s.client_key, s.hits.into_iter().map(|h| (h.timestamp, h.path)).collect()))
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn transition_total_counts_steps(hits in interleaved(), timeout in 1u64..3000) {
        let records: Vec<LogRecord> = hits.iter().map(|(c, t, p)| record(c, *t, p)).collect();
        let ss = sessionize(&records, &SessionConfig::with_timeout(timeout));
        let counts = extract_transitions(&ss, false);
        let expected: usize = ss
            .iter()
            .map(|s| s.hits.len() - 1 - s.transitions().iter().filter(|(a, b)| a == b).count())
            .sum();
        prop_assert_eq!(counts.total_transitions(), expected as u64);
    }

    #[test]
    fn counts_add_across_client_shards(hits in interleaved(), shards in 1usize..4) {
        let records: Vec<LogRecord> = hits.iter().map(|(c, t, p)| record(c, *t, p)).collect();
        let cfg = SessionConfig::default();
        let whole = extract_transitions(&sessionize(&records, &cfg), false);
        let mut merged = TransitionCounts::default();
        for k in 0..shards {
            let part: Vec<LogRecord> = records
                .iter()
                .filter(|r| r.client_key.bytes().map(usize::from).sum::<usize>() % shards == k)
                .cloned()
                .collect();
            merged.merge(&extract_transitions(&sessionize(&part, &cfg), false));
        }
        prop_assert_eq!(merged, whole);
    }

    #[test]
    fn clf_round_trip(
        host in "[a-z0-9.]{1,15}",
        ts in 0i64..2_000_000_000,
        method in "(GET|POST|HEAD)",
        path in "(/[a-z0-9_.~-]{1,8}){1,4}",
        status in 100u16..600,
        bytes in prop::option::of(0u64..1_000_000),
        referrer in prop::option::of("(/[a-z0-9]{1,6}){1,3}"),
        agent in prop::option::of("[ -~]{1,30}"),
    ) {
        let agent = agent.filter(|a| a.trim() != "-" && !a.trim().is_empty());
        prop_assume!(!path.split('/').any(|s| s == "." || s == ".."));
        prop_assume!(!path.ends_with("/index.html") && !path.ends_with("/index.htm"));
        let tz = ["+0000", "-0700", "+0530"][(ts % 3) as usize];
        let off = match tz { "-0700" => -7 * 3600, "+0530" => 5 * 3600 + 1800, _ => 0 };
        let local = chrono::DateTime::from_timestamp(ts + off, 0).unwrap();
        let mut line = format!(
            "{host} - - [{} {tz}] \"{method} {path} HTTP/1.1\" {status} {}",
            local.format("%d/%b/%Y:%H:%M:%S"),
            bytes.map_or("-".to_string(), |b| b.to_string()),
        );
        if referrer.is_some() || agent.is_some() {
            let esc = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
            line += &format!(
                " \"{}\" \"{}\"",
                referrer.as_deref().unwrap_or("-"),
                esc(agent.as_deref().unwrap_or("-"))
            );
        }
        let first = parse_clf_line(&line).unwrap();
        prop_assert_eq!(first.timestamp, ts);
        let again = parse_clf_line(&first.to_clf_line()).unwrap();
        prop_assert_eq!(again, first);
    }
}
