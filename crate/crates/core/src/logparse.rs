//! Access-log ingestion: Common/Combined Log Format parsing, visitor
//! sessionization and page-to-page transition counting.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use chrono::DateTime;
use flate2::read::MultiGzDecoder;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::checksum::content_checksum;
use crate::paths::{extension, normalize_path, PathOptions};

const CLF_TIME_FORMAT: &str = "%d/%b/%Y:%H:%M:%S %z";

/// Default session inactivity timeout in seconds.
pub const DEFAULT_SESSION_TIMEOUT: u64 = 1800;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("malformed log line: {0}")]
    MalformedLine(String),
    #[error("bad timestamp: {0}")]
    BadTimestamp(String),
    #[error("bad status: {0}")]
    BadStatus(String),
}

/// One parsed access-log hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    /// Opaque visitor identifier derived from host and user agent.
    pub client_key: String,
    pub host: String,
    pub user_agent: Option<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub method: String,
    pub path: String,
    pub protocol: Option<String>,
    pub status: u16,
    pub bytes: Option<u64>,
    /// Normalized local referrer path, if the referrer was a local page.
    pub referrer: Option<String>,
}

fn client_key(host: &str, user_agent: Option<&str>) -> String {
    match user_agent {
        None => host.to_string(),
        Some(ua) => {
            let digest = Sha256::digest(ua.as_bytes());
            format!("{host}#{}", hex::encode(&digest[..4]))
        }
    }
}

impl LogRecord {
    /// Re-serialize as a log line. Combined format is used whenever a
    /// referrer or user agent is present. Timestamps are written in UTC.
    pub fn to_clf_line(&self) -> String {
        let ts = DateTime::from_timestamp(self.timestamp, 0)
            .map(|t| t.format(CLF_TIME_FORMAT).to_string())
            .unwrap_or_default();
        let mut line = format!("{} - - [{}] \"{} {}", self.host, ts, self.method, self.path);
        if let Some(p) = &self.protocol {
            line.push(' ');
            line.push_str(p);
        }
        let bytes = self
            .bytes
            .map(|b| b.to_string())
            .unwrap_or_else(|| "-".to_string());
        let _ = write!(line, "\" {} {}", self.status, bytes);
        if self.referrer.is_some() || self.user_agent.is_some() {
            let _ = write!(
                line,
                " \"{}\" \"{}\"",
                self.referrer.as_deref().unwrap_or("-"),
                escape_quoted(self.user_agent.as_deref().unwrap_or("-"))
            );
        }
        line
    }
}

fn escape_quoted(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

struct Fields<'a> {
    rest: &'a str,
}

impl<'a> Fields<'a> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start();
    }

    fn bare(&mut self) -> Option<&'a str> {
        self.skip_ws();
        if self.rest.is_empty() {
            return None;
        }
        let end = self.rest.find(char::is_whitespace).unwrap_or(self.rest.len());
        let (tok, rest) = self.rest.split_at(end);
        self.rest = rest;
        Some(tok)
    }

    fn bracketed(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let body = self.rest.strip_prefix('[')?;
        let end = body.find(']')?;
        self.rest = &body[end + 1..];
        Some(&body[..end])
    }

    fn quoted(&mut self) -> Option<String> {
        self.skip_ws();
        let body = self.rest.strip_prefix('"')?;
        let mut out = String::new();
        let mut chars = body.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    if let Some((_, n)) = chars.next() {
                        out.push(n);
                    }
                }
                '"' => {
                    self.rest = &body[i + 1..];
                    return Some(out);
                }
                c => out.push(c),
            }
        }
        None
    }
}

/// Parse one Common or Combined Log Format line with default path options.
pub fn parse_clf_line(line: &str) -> Result<LogRecord, LogError> {
    parse_clf_line_with(line, &PathOptions::default())
}

/// Parse one Common or Combined Log Format line.
///
/// Any well-formed line parses, whatever its method or status; use
/// [`PageViewFilter`] to decide whether it counts as a page view.
pub fn parse_clf_line_with(line: &str, opts: &PathOptions) -> Result<LogRecord, LogError> {
    let malformed = || LogError::MalformedLine(truncate(line));
    let mut f = Fields {
        rest: line.trim_end_matches(['\r', '\n']),
    };
    let host = f.bare().ok_or_else(malformed)?.to_string();
    let _ident = f.bare().ok_or_else(malformed)?;
    let _user = f.bare().ok_or_else(malformed)?;
    let raw_ts = f.bracketed().ok_or_else(malformed)?;
    let request = f.quoted().ok_or_else(malformed)?;
    let raw_status = f.bare().ok_or_else(malformed)?;
    let raw_bytes = f.bare().ok_or_else(malformed)?;

    let (referrer_raw, agent_raw) = if f.rest.trim().is_empty() {
        (None, None)
    } else {
        let r = f.quoted().ok_or_else(malformed)?;
        let a = f.quoted().ok_or_else(malformed)?;
        if !f.rest.trim().is_empty() {
            return Err(malformed());
        }
        (Some(r), Some(a))
    };

    let timestamp = DateTime::parse_from_str(raw_ts, CLF_TIME_FORMAT)
        .map_err(|_| LogError::BadTimestamp(raw_ts.to_string()))?
        .timestamp();

    let mut parts = request.split_whitespace();
    let method = parts.next().ok_or_else(malformed)?.to_string();
    let target = parts.next().ok_or_else(malformed)?;
    let protocol = parts.next().map(str::to_string);
    if parts.next().is_some() {
        return Err(malformed());
    }
    let path = normalize_path(target, opts).ok_or_else(malformed)?;

    let status: u16 = raw_status
        .parse()
        .ok()
        .filter(|s| (100..=599).contains(s))
        .ok_or_else(|| LogError::BadStatus(raw_status.to_string()))?;
    let bytes = match raw_bytes {
        "-" => None,
        b => Some(b.parse::<u64>().map_err(|_| malformed())?),
    };

    let referrer = referrer_raw.and_then(|r| normalize_path(&r, opts));
    let user_agent = agent_raw.filter(|a| !a.is_empty() && a != "-");
    Ok(LogRecord {
        client_key: client_key(&host, user_agent.as_deref()),
        host,
        user_agent,
        timestamp,
        method,
        path,
        protocol,
        status,
        bytes,
        referrer,
    })
}

fn truncate(line: &str) -> String {
    line.chars().take(80).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SkipReason {
    Method,
    Status,
    Bot,
}

/// Decides which parsed records count as page views.
#[derive(Debug, Clone)]
pub struct PageViewFilter {
    pub methods: Vec<String>,
    pub statuses: Vec<u16>,
    /// Case-insensitive substrings of user agents to drop.
    pub bot_agents: Vec<String>,
}

impl Default for PageViewFilter {
    fn default() -> Self {
        Self {
            methods: vec!["GET".into()],
            statuses: vec![200, 304],
            bot_agents: ["bot", "crawler", "spider", "slurp", "wget", "curl"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl PageViewFilter {
    pub fn check(&self, rec: &LogRecord) -> Result<(), SkipReason> {
        if !self.methods.iter().any(|m| m.eq_ignore_ascii_case(&rec.method)) {
            return Err(SkipReason::Method);
        }
        if !self.statuses.contains(&rec.status) {
            return Err(SkipReason::Status);
        }
        if let Some(ua) = &rec.user_agent {
            let ua = ua.to_ascii_lowercase();
            if self.bot_agents.iter().any(|b| ua.contains(b.as_str())) {
                return Err(SkipReason::Bot);
            }
        }
        Ok(())
    }
}

/// Result of scanning a whole log: accepted page views plus tallies of every
/// line that was rejected, by class.
#[derive(Debug, Clone, Default)]
pub struct LogScan {
    pub records: Vec<LogRecord>,
    pub malformed: usize,
    pub bad_timestamp: usize,
    pub bad_status: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
}

impl LogScan {
    pub fn rejected(&self) -> usize {
        self.malformed + self.bad_timestamp + self.bad_status + self.skipped.values().sum::<usize>()
    }

    pub fn merge(&mut self, other: LogScan) {
        self.records.extend(other.records);
        self.malformed += other.malformed;
        self.bad_timestamp += other.bad_timestamp;
        self.bad_status += other.bad_status;
        for (k, v) in other.skipped {
            *self.skipped.entry(k).or_default() += v;
        }
    }
}

impl LogScan {
    /// Parse one line and file it as a page view or under its reject class.
    pub fn push_line(&mut self, line: &str, opts: &PathOptions, filter: &PageViewFilter) {
        if line.trim().is_empty() {
            return;
        }
        match parse_clf_line_with(line, opts) {
            Ok(rec) => match filter.check(&rec) {
                Ok(()) => self.records.push(rec),
                Err(reason) => *self.skipped.entry(reason).or_default() += 1,
            },
            Err(LogError::MalformedLine(_)) => self.malformed += 1,
            Err(LogError::BadTimestamp(_)) => self.bad_timestamp += 1,
            Err(LogError::BadStatus(_)) => self.bad_status += 1,
        }
    }
}

/// Parse every line of `reader`, keeping page views and counting the rest.
pub fn scan_log<R: BufRead>(
    reader: R,
    opts: &PathOptions,
    filter: &PageViewFilter,
) -> io::Result<LogScan> {
    let mut scan = LogScan::default();
    for line in reader.lines() {
        scan.push_line(&line?, opts, filter);
    }
    Ok(scan)
}

/// Log files under `dir` in name order. Hidden files are skipped.
pub fn log_files(dir: &Path) -> io::Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(io::Error::other)?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if entry.file_type().is_file() && !hidden {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

/// Scan every log file under `dir`, plain or gzip, in name order.
pub fn scan_log_dir(dir: &Path, opts: &PathOptions, filter: &PageViewFilter) -> io::Result<LogScan> {
    let mut scan = LogScan::default();
    for path in log_files(dir)? {
        scan.merge(scan_log(open_log(&path)?, opts, filter)?);
    }
    Ok(scan)
}

/// Open a log file, transparently decompressing gzip content.
pub fn open_log(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hit {
    pub path: String,
    pub timestamp: i64,
    pub referrer: Option<String>,
}

/// An ordered click sequence of one visitor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub client_key: String,
    pub hits: Vec<Hit>,
}

impl Session {
    /// Consecutive-hit pairs, including self-loops.
    pub fn transitions(&self) -> Vec<(&str, &str)> {
        self.hits
            .windows(2)
            .map(|w| (w[0].path.as_str(), w[1].path.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Maximum gap in seconds between consecutive hits of one session.
    pub timeout_s: u64,
    /// Lowercased extensions of asset requests dropped before grouping.
    pub asset_extensions: HashSet<String>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self::with_timeout(DEFAULT_SESSION_TIMEOUT)
    }
}

impl SessionConfig {
    pub fn with_timeout(timeout_s: u64) -> Self {
        let asset_extensions = [
            "gif", "jpg", "jpeg", "png", "bmp", "ico", "svg", "webp", "css", "js", "woff", "woff2",
            "ttf", "mp3", "wav", "aif", "aiff", "mid", "zip", "gz", "tar", "exe", "pdf", "swf",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        Self {
            timeout_s,
            asset_extensions,
        }
    }

    pub fn is_asset(&self, path: &str) -> bool {
        extension(path).is_some_and(|e| self.asset_extensions.contains(&e))
    }
}

/// Group records into per-visitor sessions, splitting wherever two
/// consecutive hits of a visitor are more than `timeout_s` apart.
///
/// Output is ordered by client key, then by session start time.
pub fn sessionize(records: &[LogRecord], cfg: &SessionConfig) -> Vec<Session> {
    let mut by_client: BTreeMap<&str, Vec<&LogRecord>> = BTreeMap::new();
    for rec in records.iter().filter(|r| !cfg.is_asset(&r.path)) {
        by_client.entry(rec.client_key.as_str()).or_default().push(rec);
    }
    let timeout = i64::try_from(cfg.timeout_s).unwrap_or(i64::MAX);
    let mut sessions = Vec::new();
    for (client, mut recs) in by_client {
        recs.sort_by_key(|r| r.timestamp);
        let mut current: Vec<Hit> = Vec::new();
        for rec in recs {
            if let Some(last) = current.last() {
                if rec.timestamp - last.timestamp > timeout {
                    sessions.push(Session {
                        client_key: client.to_string(),
                        hits: std::mem::take(&mut current),
                    });
                }
            }
            current.push(Hit {
                path: rec.path.clone(),
                timestamp: rec.timestamp,
                referrer: rec.referrer.clone(),
            });
        }
        if !current.is_empty() {
            sessions.push(Session {
                client_key: client.to_string(),
                hits: current,
            });
        }
    }
    sessions
}

#[derive(Debug, Error)]
pub enum TransitionsFormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checksum mismatch: header says {expected}, content hashes to {actual}")]
    Checksum { expected: String, actual: String },
}

/// Aggregated page-to-page click counts plus per-page visit totals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pub counts: BTreeMap<(String, String), u64>,
    pub page_hits: BTreeMap<String, u64>,
}

impl TransitionCounts {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty() && self.page_hits.is_empty()
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn add(&mut self, from: &str, to: &str, n: u64) {
        if n == 0 {
            return;
        }
        *self
            .counts
            .entry((from.to_string(), to.to_string()))
            .or_default() += n;
    }

    /// Sum another set of counts into this one.
    pub fn merge(&mut self, other: &TransitionCounts) {
        for ((f, t), n) in &other.counts {
            self.add(f, t, *n);
        }
        for (p, n) in &other.page_hits {
            *self.page_hits.entry(p.clone()).or_default() += n;
        }
    }

    fn body(&self) -> String {
        let mut out = String::new();
        for ((f, t), n) in &self.counts {
            let _ = writeln!(out, "{f}\t{t}\t{n}");
        }
        out.push_str("#page_hits\n");
        for (p, n) in &self.page_hits {
            let _ = writeln!(out, "{p}\t{n}");
        }
        out
    }

    /// Serialize as `from<TAB>to<TAB>count` lines followed by a
    /// `#page_hits` section of `path<TAB>count` lines. The first line is a
    /// header carrying `meta` key/value pairs and the body checksum.
    pub fn to_tsv(&self, meta: &[(&str, String)]) -> String {
        let body = self.body();
        let mut out = String::from("#transitions");
        for (k, v) in meta {
            let _ = write!(out, "\t{k}={v}");
        }
        let _ = writeln!(out, "\tchecksum={}", content_checksum(body.as_bytes()));
        out.push_str(&body);
        out
    }

    pub fn checksum(&self) -> String {
        content_checksum(self.body().as_bytes())
    }

    /// Parse the format written by [`TransitionCounts::to_tsv`]. The header is
    /// optional; when present its checksum is verified.
    pub fn from_tsv(text: &str) -> Result<Self, TransitionsFormatError> {
        let mut out = TransitionCounts::default();
        let mut in_hits = false;
        let mut expected = None;
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| TransitionsFormatError::Parse {
                line: i + 1,
                msg: msg.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix("#transitions") {
                expected = h
                    .split('\t')
                    .find_map(|kv| kv.strip_prefix("checksum="))
                    .map(str::to_string);
                continue;
            }
            if line == "#page_hits" {
                in_hits = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if in_hits {
                let [p, n] = cols[..] else {
                    return Err(err("expected path<TAB>count"));
                };
                let n: u64 = n.parse().map_err(|_| err("bad count"))?;
                *out.page_hits.entry(p.to_string()).or_default() += n;
            } else {
                let [f, t, n] = cols[..] else {
                    return Err(err("expected from<TAB>to<TAB>count"));
                };
                let n: u64 = n.parse().map_err(|_| err("bad count"))?;
                if n == 0 {
                    return Err(err("count must be positive"));
                }
                out.add(f, t, n);
            }
        }
        if let Some(expected) = expected {
            let actual = out.checksum();
            if actual != expected {
                return Err(TransitionsFormatError::Checksum { expected, actual });
            }
        }
        Ok(out)
    }
}

/// Count navigation steps inside sessions.
///
/// Consecutive hits form a transition. With `use_referrer`, a hit whose
/// referrer names a page other than the previous hit is attributed to that
/// referrer instead (back-button navigation). Self-loops are dropped.
pub fn extract_transitions(sessions: &[Session], use_referrer: bool) -> TransitionCounts {
    let mut out = TransitionCounts::default();
    for s in sessions {
        for h in &s.hits {
            *out.page_hits.entry(h.path.clone()).or_default() += 1;
        }
        for w in s.hits.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            let from = match (&cur.referrer, use_referrer) {
                (Some(r), true) if *r != prev.path => r.as_str(),
                _ => prev.path.as_str(),
            };
            if from != cur.path {
                out.add(from, &cur.path, 1);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLF: &str = r#"1.2.3.4 - - [10/Oct/2000:13:55:36 -0700] "GET /drums/606 HTTP/1.0" 200 2326"#;

    #[test]
    fn parses_common_format() {
        let r = parse_clf_line(CLF).unwrap();
        assert_eq!(r.path, "/drums/606");
        assert_eq!(r.status, 200);
        assert_eq!(r.method, "GET");
        assert_eq!(r.host, "1.2.3.4");
        assert_eq!(r.client_key, "1.2.3.4");
        assert_eq!(r.bytes, Some(2326));
        assert_eq!(r.timestamp, 971211336);
        assert_eq!(r.referrer, None);
    }

    #[test]
    fn parses_combined_format_referrer() {
        let line = r#"1.2.3.4 - - [10/Oct/2000:13:55:36 -0700] "GET /drums/606 HTTP/1.0" 200 2326 "http://machines.hyperreal.org/" "Mozilla/4.08 [en] (Win98; I ;Nav)""#;
        let r = parse_clf_line(line).unwrap();
        assert_eq!(r.referrer.as_deref(), Some("/"));
        assert_eq!(r.user_agent.as_deref(), Some("Mozilla/4.08 [en] (Win98; I ;Nav)"));
        assert!(r.client_key.starts_with("1.2.3.4#"));
    }

    #[test]
    fn rejects_distinctly() {
        assert!(matches!(parse_clf_line("garbage"), Err(LogError::MalformedLine(_))));
        assert!(matches!(
            parse_clf_line(r#"1.2.3.4 - - [10/Oct/2000:13:55:36 -0700] "GET /a HTTP/1.0 200 1"#),
            Err(LogError::MalformedLine(_))
        ));
        assert!(matches!(
            parse_clf_line(r#"1.2.3.4 - - [99/Foo/2000:13:55:36 -0700] "GET /a HTTP/1.0" 200 1"#),
            Err(LogError::BadTimestamp(_))
        ));
        assert!(matches!(
            parse_clf_line(r#"1.2.3.4 - - [10/Oct/2000:13:55:36 -0700] "GET /a HTTP/1.0" abc 1"#),
            Err(LogError::BadStatus(_))
        ));
        assert!(matches!(
            parse_clf_line(r#"1.2.3.4 - - [10/Oct/2000:13:55:36 -0700] "GET /a HTTP/1.0" 999 1"#),
            Err(LogError::BadStatus(_))
        ));
    }

    #[test]
    fn filter_reports_skip_reasons() {
        let f = PageViewFilter::default();
        let mut r = parse_clf_line(CLF).unwrap();
        assert_eq!(f.check(&r), Ok(()));
        r.status = 404;
        assert_eq!(f.check(&r), Err(SkipReason::Status));
        r.status = 304;
        assert_eq!(f.check(&r), Ok(()));
        r.method = "POST".into();
        assert_eq!(f.check(&r), Err(SkipReason::Method));
        r.method = "GET".into();
        r.user_agent = Some("Googlebot/2.1".into());
        assert_eq!(f.check(&r), Err(SkipReason::Bot));
    }

    fn rec(client: &str, path: &str, ts: i64) -> LogRecord {
        LogRecord {
            client_key: client.into(),
            host: client.into(),
            user_agent: None,
            timestamp: ts,
            method: "GET".into(),
            path: path.into(),
            protocol: None,
            status: 200,
            bytes: None,
            referrer: None,
        }
    }

    #[test]
    fn session_timeout_boundaries() {
        let cfg = SessionConfig::with_timeout(1800);
        let s = sessionize(&[rec("a", "/x", 0), rec("a", "/y", 10)], &cfg);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].hits.len(), 2);

        let s = sessionize(&[rec("a", "/x", 0), rec("a", "/y", 3600)], &cfg);
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|s| s.hits.len() == 1));

        let s = sessionize(&[rec("a", "/x", 0), rec("a", "/y", 1800)], &cfg);
        assert_eq!(s.len(), 1);
        assert!(sessionize(&[], &cfg).is_empty());
    }

    #[test]
    fn assets_removed_before_grouping() {
        let cfg = SessionConfig::default();
        let s = sessionize(
            &[rec("a", "/x", 0), rec("a", "/logo.GIF", 1), rec("a", "/y", 2)],
            &cfg,
        );
        assert_eq!(s.len(), 1);
        let paths: Vec<_> = s[0].hits.iter().map(|h| h.path.as_str()).collect();
        assert_eq!(paths, ["/x", "/y"]);
    }

    fn session(paths: &[&str]) -> Session {
        Session {
            client_key: "c".into(),
            hits: paths
                .iter()
                .enumerate()
                .map(|(i, p)| Hit {
                    path: p.to_string(),
                    timestamp: i as i64,
                    referrer: None,
                })
                .collect(),
        }
    }

    fn pairs(tc: &TransitionCounts) -> Vec<(&str, &str, u64)> {
        tc.counts
            .iter()
            .map(|((f, t), n)| (f.as_str(), t.as_str(), *n))
            .collect()
    }

    #[test]
    fn transitions_drop_self_loops() {
        let tc = extract_transitions(&[session(&["A", "B", "B", "C"])], false);
        assert_eq!(pairs(&tc), [("A", "B", 1), ("B", "C", 1)]);
        assert_eq!(tc.page_hits["B"], 2);
    }

    #[test]
    fn transitions_are_additive() {
        let tc = extract_transitions(&[session(&["A", "B"]), session(&["A", "B"])], false);
        assert_eq!(pairs(&tc), [("A", "B", 2)]);
    }

    #[test]
    fn referrer_rule_reattaches_back_navigation() {
        let mut s = session(&["A", "B", "C"]);
        s.hits[1].referrer = Some("A".into());
        s.hits[2].referrer = Some("A".into());
        let tc = extract_transitions(std::slice::from_ref(&s), true);
        assert_eq!(pairs(&tc), [("A", "B", 1), ("A", "C", 1)]);
        let tc = extract_transitions(&[s], false);
        assert_eq!(pairs(&tc), [("A", "B", 1), ("B", "C", 1)]);
    }

    #[test]
    fn tsv_round_trip_and_checksum() {
        let mut tc = extract_transitions(&[session(&["/a", "/b", "/c"])], false);
        tc.page_hits.insert("/lonely".into(), 4);
        let text = tc.to_tsv(&[("timeout", "1800".into())]);
        assert!(text.starts_with("#transitions\ttimeout=1800\tchecksum="));
        assert_eq!(TransitionCounts::from_tsv(&text).unwrap(), tc);
        let tampered = text.replace("/b\t/c\t1", "/b\t/c\t2");
        assert!(matches!(
            TransitionCounts::from_tsv(&tampered),
            Err(TransitionsFormatError::Checksum { .. })
        ));
        assert!(TransitionCounts::from_tsv("a\tb\n").is_err());
        assert!(TransitionCounts::from_tsv("a\tb\t0\n").is_err());
    }
}
