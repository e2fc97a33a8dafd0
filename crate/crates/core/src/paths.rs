//! URL path normalization shared by the log parser and the corpus scanner.
//!
//! Both sides must agree on page ids, otherwise log traffic cannot be joined
//! with indexed documents. A page id is an absolute path with no query string,
//! no fragment, no trailing slash (except the root) and no trailing
//! `index.html`/`index.htm` component.

/// Options controlling how raw request targets become page ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathOptions {
    /// Keep the query string as part of the page id.
    pub keep_query: bool,
    /// Hosts treated as local when a full URL is given. Empty means any host
    /// is accepted as local.
    pub local_hosts: Vec<String>,
}

impl PathOptions {
    fn is_local_host(&self, host: &str) -> bool {
        if self.local_hosts.is_empty() {
            return true;
        }
        let host = host.split(':').next().unwrap_or(host);
        self.local_hosts
            .iter()
            .any(|h| h.eq_ignore_ascii_case(host))
    }
}

/// Normalize a request target or full URL into a page id.
///
/// Returns `None` for targets that do not name a local page: empty strings,
/// `-`, foreign hosts, or non-http schemes such as `mailto:`.
pub fn normalize_path(raw: &str, opts: &PathOptions) -> Option<String> {
    let raw = raw.trim();
    if raw.is_empty() || raw == "-" {
        return None;
    }
    let rest = if let Some(idx) = raw.find("://") {
        let scheme = &raw[..idx];
        if !scheme.eq_ignore_ascii_case("http") && !scheme.eq_ignore_ascii_case("https") {
            return None;
        }
        let after = &raw[idx + 3..];
        let (host, path) = match after.find('/') {
            Some(p) => (&after[..p], &after[p..]),
            None => (after, "/"),
        };
        let host = host.rsplit('@').next().unwrap_or(host);
        if !opts.is_local_host(host) {
            return None;
        }
        path
    } else if raw.starts_with('/') {
        raw
    } else {
        return None;
    };

    let rest = match rest.find('#') {
        Some(i) => &rest[..i],
        None => rest,
    };
    let (path, query) = match rest.find('?') {
        Some(i) => (&rest[..i], Some(&rest[i + 1..])),
        None => (rest, None),
    };

    let mut segments: Vec<&str> = Vec::new();
    for seg in path.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                segments.pop();
            }
            s => segments.push(s),
        }
    }
    if let Some(last) = segments.last() {
        let lower = last.to_ascii_lowercase();
        if lower == "index.html" || lower == "index.htm" {
            segments.pop();
        }
    }
    let mut out = String::with_capacity(path.len() + 1);
    for seg in &segments {
        out.push('/');
        out.push_str(seg);
    }
    if out.is_empty() {
        out.push('/');
    }
    if opts.keep_query {
        if let Some(q) = query.filter(|q| !q.is_empty()) {
            out.push('?');
            out.push_str(q);
        }
    }
    Some(out)
}

/// Resolve an `href` found on the page served at `base` (a URL path such as
/// `/drums/index.html`) into a page id.
pub fn resolve_href(base: &str, href: &str, opts: &PathOptions) -> Option<String> {
    let href = href.trim();
    if href.is_empty() || href.starts_with('#') {
        return None;
    }
    if href.contains("://") || href.starts_with('/') {
        if let Some(stripped) = href.strip_prefix("//") {
            return normalize_path(&format!("http://{stripped}"), opts);
        }
        return normalize_path(href, opts);
    }
    // Any other scheme (mailto:, javascript:, ...) is not a page.
    if let Some(colon) = href.find(':') {
        let before = &href[..colon];
        if !before.contains('/') && !before.contains('?') && !before.contains('#') {
            return None;
        }
    }
    let dir = match base.rfind('/') {
        Some(i) => &base[..=i],
        None => "/",
    };
    normalize_path(&format!("{dir}{href}"), opts)
}

/// Lowercased file extension of the last path segment, if any.
pub fn extension(path: &str) -> Option<String> {
    let path = path.split(['?', '#']).next().unwrap_or(path);
    let last = path.rsplit('/').next()?;
    let dot = last.rfind('.')?;
    if dot + 1 == last.len() {
        return None;
    }
    Some(last[dot + 1..].to_ascii_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> Option<String> {
        normalize_path(s, &PathOptions::default())
    }

    #[test]
    fn strips_query_fragment_and_trailing_slash() {
        assert_eq!(norm("/drums/606/").as_deref(), Some("/drums/606"));
        assert_eq!(norm("/drums/606?x=1#a").as_deref(), Some("/drums/606"));
        assert_eq!(norm("/").as_deref(), Some("/"));
        assert_eq!(norm("//").as_deref(), Some("/"));
    }

    #[test]
    fn keeps_query_when_asked() {
        let opts = PathOptions {
            keep_query: true,
            ..Default::default()
        };
        assert_eq!(
            normalize_path("/a/?q=1", &opts).as_deref(),
            Some("/a?q=1")
        );
    }

    #[test]
    fn full_urls_and_hosts() {
        assert_eq!(
            norm("http://machines.hyperreal.org/").as_deref(),
            Some("/")
        );
        let opts = PathOptions {
            local_hosts: vec!["machines.hyperreal.org".into()],
            ..Default::default()
        };
        assert_eq!(
            normalize_path("http://machines.hyperreal.org:80/x/", &opts).as_deref(),
            Some("/x")
        );
        assert_eq!(normalize_path("http://google.com/x", &opts), None);
        assert_eq!(norm("ftp://host/x"), None);
        assert_eq!(norm("-"), None);
        assert_eq!(norm("relative"), None);
    }

    #[test]
    fn index_files_collapse_to_directory() {
        assert_eq!(norm("/drums/index.html").as_deref(), Some("/drums"));
        assert_eq!(norm("/index.htm").as_deref(), Some("/"));
        assert_eq!(norm("/a/../b/./c").as_deref(), Some("/b/c"));
    }

    #[test]
    fn hrefs_resolve_against_base() {
        let o = PathOptions::default();
        assert_eq!(
            resolve_href("/drums/index.html", "606.html", &o).as_deref(),
            Some("/drums/606.html")
        );
        assert_eq!(
            resolve_href("/drums/606.html", "../index.html", &o).as_deref(),
            Some("/")
        );
        assert_eq!(
            resolve_href("/a/b.html", "/x/y.html", &o).as_deref(),
            Some("/x/y.html")
        );
        assert_eq!(resolve_href("/a/b.html", "#top", &o), None);
        assert_eq!(resolve_href("/a/b.html", "mailto:x@y", &o), None);
        assert_eq!(resolve_href("/a/b.html", "javascript:void(0)", &o), None);
    }

    #[test]
    fn extensions() {
        assert_eq!(extension("/a/b.GIF").as_deref(), Some("gif"));
        assert_eq!(extension("/a.b/c"), None);
        assert_eq!(extension("/a/b.css?v=2").as_deref(), Some("css"));
    }
}
