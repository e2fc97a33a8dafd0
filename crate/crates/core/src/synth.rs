//! Deterministic synthetic site generator: an HTML corpus about vintage
//! music machines, an access log of simulated visitors with configurable
//! traffic skew, an annotation file and judged queries.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use chrono::{DateTime, FixedOffset};
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evalkit::{EvalConfig, QueryJudgment};
use crate::fusion::FusionWeights;
use crate::ranker::RankKind;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Requested page count; raised to the size of the fixed catalog if lower.
    pub pages: usize,
    pub visitors: usize,
    /// Manufacturer section that attracts extra traffic.
    pub hot_branch: String,
    /// Multiplier on the chance of entering or following a link into the
    /// hot branch.
    pub skew: f64,
    /// Fraction of catalog pages that receive annotations.
    pub annotated_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            pages: 200,
            visitors: 400,
            hot_branch: "kawai".into(),
            skew: 6.0,
            annotated_fraction: 0.7,
        }
    }
}

struct Maker {
    slug: &'static str,
    name: &'static str,
    models: &'static [(&'static str, &'static str, &'static str)],
}

const CATALOG: &[Maker] = &[
    Maker {
        slug: "arp",
        name: "ARP",
        models: &[
            ("sequencer", "Arp-Sequencer", "analog step sequencer with sixteen steps"),
            ("odyssey", "ARP Odyssey", "duophonic synthesizer"),
            ("2600", "ARP 2600", "semi modular synthesizer"),
            ("axxe", "ARP Axxe", "monophonic synthesizer"),
            ("omni", "ARP Omni", "string ensemble polyphonic"),
            ("solina", "ARP Solina", "string ensemble"),
        ],
    },
    Maker {
        slug: "roland",
        name: "Roland",
        models: &[
            ("tr-606", "Roland TR-606 Drumatix", "drum machine with a dramatic snare"),
            ("tr-808", "Roland TR-808", "drum machine with a deep bass drum"),
            ("tb-303", "Roland TB-303", "bass line sequencer"),
            ("sh-101", "Roland SH-101", "monophonic synthesizer"),
            ("juno-60", "Roland Juno-60", "polyphonic synthesizer chorus"),
            ("jupiter-8", "Roland Jupiter-8", "polyphonic synthesizer"),
            ("cr-78", "Roland CR-78", "rhythm machine presets"),
        ],
    },
    Maker {
        slug: "korg",
        name: "Korg",
        models: &[
            ("monopoly", "Korg MonoPoly", "four voice analog synthesizer"),
            ("ms-20", "Korg MS-20", "patchable monophonic synthesizer"),
            ("polysix", "Korg Polysix", "six voice polyphonic synthesizer"),
            ("kpr-77", "Korg KPR-77", "programmable rhythm drum machine"),
            ("minipops", "Korg Minipops", "preset rhythm machine"),
        ],
    },
    Maker {
        slug: "kawai",
        name: "Kawai",
        models: &[
            ("k3", "Kawai K3", "digital wavetable synthesizer"),
            ("xd5", "Kawai XD5", "percussion synthesizer drum module"),
            ("k1", "Kawai K1", "digital synthesizer"),
            ("sx-240", "Kawai SX-240", "polyphonic analog synthesizer"),
            ("r-50", "Kawai R-50", "digital drum machine"),
        ],
    },
    Maker {
        slug: "maplin",
        name: "Maplin",
        models: &[
            ("3800", "Maplin 3800", "kit synthesizer project"),
            ("5600s", "Maplin 5600S", "modular kit synthesizer"),
            ("matinee", "Maplin Matinee", "kit organ project"),
        ],
    },
    Maker {
        slug: "hammond",
        name: "Hammond",
        models: &[
            ("auto-vari", "Hammond Auto-Vari 64", "rhythm unit with variations"),
            ("b-3", "Hammond B-3", "tonewheel organ"),
            ("novachord", "Hammond Novachord", "early polyphonic synthesizer"),
        ],
    },
    Maker {
        slug: "univox",
        name: "Univox",
        models: &[
            ("micro-rhythmer-12", "Univox Micro-Rhythmer-12", "compact preset rhythm box"),
            ("sr-95", "Univox SR-95", "drum machine"),
            ("sr-55", "Univox SR-55", "drum machine"),
        ],
    },
    Maker {
        slug: "moog",
        name: "Moog",
        models: &[
            ("minimoog", "Moog Minimoog", "monophonic synthesizer ladder filter"),
            ("prodigy", "Moog Prodigy", "monophonic synthesizer"),
            ("taurus", "Moog Taurus", "bass pedal synthesizer"),
            ("source", "Moog Source", "digital control synthesizer"),
        ],
    },
    Maker {
        slug: "yamaha",
        name: "Yamaha",
        models: &[
            ("cs-80", "Yamaha CS-80", "polyphonic synthesizer"),
            ("dx7", "Yamaha DX7", "fm digital synthesizer"),
            ("rx11", "Yamaha RX11", "sampled drum machine"),
        ],
    },
    Maker {
        slug: "sequential",
        name: "Sequential Circuits",
        models: &[
            ("prophet-5", "Sequential Prophet-5", "polyphonic synthesizer"),
            ("pro-one", "Sequential Pro-One", "monophonic synthesizer"),
            ("drumtraks", "Sequential Drumtraks", "sampled drum machine"),
        ],
    },
    Maker {
        slug: "misc",
        name: "Miscellaneous",
        models: &[
            ("ragtime-piano", "Ragtime Piano", "player piano rolls and piano samples"),
            ("theremin", "Theremin", "oscillator played without contact"),
            ("stylophone", "Stylophone", "stylus keyboard"),
        ],
    },
    Maker {
        slug: "diy",
        name: "DIY Projects",
        models: &[
            ("bass-drum", "BASS DRUM", "bass drum voice circuit for a drum synthesizer"),
            ("noise-source", "Noise Source", "white noise generator circuit"),
            ("vcf", "Voltage Controlled Filter", "filter circuit"),
        ],
    },
];

const SUBPAGES: &[&str] = &["manual", "mods", "samples", "reviews", "patches", "schematics"];

const FILLER: &[&str] = &[
    "oscillator", "filter", "envelope", "voltage", "control", "bass", "drum", "snare", "hihat",
    "cymbal", "clap", "piano", "organ", "keyboard", "patch", "sequencer", "rhythm", "preset",
    "vintage", "analog", "digital", "sample", "sound", "tone", "pitch", "tempo", "memory",
    "service", "repair", "manual", "owner", "modification", "circuit", "resonance", "cutoff",
    "chorus", "delay", "pattern", "trigger", "gate", "clock", "sync", "midi", "cv", "output",
    "input", "knob", "slider", "panel", "voice", "polyphonic", "monophonic", "module", "machine",
    "synthesizer", "studio", "recording", "track", "album", "collector", "price", "rare",
    "classic", "famous", "used", "played", "sequence", "accent", "decay", "attack", "release",
    "sustain", "noise", "waveform", "square", "sawtooth", "triangle", "sine", "lfo", "vibrato",
];

const TAG_POOL: &[&str] = &[
    "vintage", "analog", "drums", "synth", "rhythm", "keyboard", "classic", "rare", "diy",
    "samples", "manual", "bass", "electronic", "retro",
];

const AGENTS: &[&str] = &[
    "Mozilla/4.0 (compatible; MSIE 5.5; Windows 98)",
    "Mozilla/4.08 [en] (Win98; I ;Nav)",
    "Mozilla/5.0 (Macintosh; U; PPC Mac OS X; en)",
    "Mozilla/5.0 (X11; U; Linux i686; en-US)",
    "Opera/9.00 (Windows NT 5.1; U; en)",
];

/// Queries with the catalog page each one should find.
const JUDGED: &[(&str, &str)] = &[
    ("Arp-Sequencer", "/arp/sequencer.html"),
    ("Roland TR-606 Dramatic", "/roland/tr-606.html"),
    ("MonoPoly", "/korg/monopoly.html"),
    ("Kawai K3", "/kawai/k3.html"),
    ("ragtime piano", "/misc/ragtime-piano.html"),
    ("Kawai XD5", "/kawai/xd5.html"),
    ("BASS DRUM", "/diy/bass-drum.html"),
    ("Maplin 3800", "/maplin/3800.html"),
    ("Maplin 5600S", "/maplin/5600s.html"),
    ("Hammond Auto-Vari", "/hammond/auto-vari.html"),
    ("Univox Micro-Rhythmer-12", "/univox/micro-rhythmer-12.html"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Root,
    Maker,
    Model,
    Sub,
}

#[derive(Debug, Clone)]
struct Page {
    /// File path relative to the corpus root.
    file: String,
    /// URL visitors request.
    url: String,
    /// Normalized page id.
    id: String,
    kind: Kind,
    branch: &'static str,
    title: String,
    description: String,
    links: Vec<usize>,
}

/// Everything the generator produces, in memory.
#[derive(Debug, Clone)]
pub struct SynthSite {
    /// `(relative file path, contents)` of every corpus file.
    pub files: Vec<(String, String)>,
    /// Access log lines in time order.
    pub log_lines: Vec<String>,
    /// `(term, page id, user count)`.
    pub annotations: Vec<(String, String, u64)>,
    pub judgments: Vec<QueryJudgment>,
    pub hot_branch: String,
}

fn weighted_pick<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

fn pick<'a, R: Rng, T>(rng: &mut R, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn build_pages(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Page> {
    let mut pages = vec![Page {
        file: "index.html".into(),
        url: "/".into(),
        id: "/".into(),
        kind: Kind::Root,
        branch: "",
        title: "Music Machines".into(),
        description: "archive of electronic music machines synthesizers and drum machines".into(),
        links: Vec::new(),
    }];
    let mut model_pages = Vec::new();
    for m in CATALOG {
        pages.push(Page {
            file: format!("{}/index.html", m.slug),
            url: format!("/{}/", m.slug),
            id: format!("/{}", m.slug),
            kind: Kind::Maker,
            branch: m.slug,
            title: format!("{} machines", m.name),
            description: format!("{} instruments archive", m.name),
            links: Vec::new(),
        });
        for (slug, title, desc) in m.models {
            model_pages.push(pages.len());
            pages.push(Page {
                file: format!("{}/{slug}.html", m.slug),
                url: format!("/{}/{slug}.html", m.slug),
                id: format!("/{}/{slug}.html", m.slug),
                kind: Kind::Model,
                branch: m.slug,
                title: title.to_string(),
                description: desc.to_string(),
                links: Vec::new(),
            });
        }
    }
    let mut round = 0;
    while pages.len() < cfg.pages {
        let sub = SUBPAGES[round % SUBPAGES.len()];
        for &mp in &model_pages {
            if pages.len() >= cfg.pages {
                break;
            }
            let base = pages[mp].clone();
            let stem = base.file.trim_end_matches(".html");
            let suffix = if round < SUBPAGES.len() {
                String::new()
            } else {
                format!("-{}", round / SUBPAGES.len() + 1)
            };
            let file = format!("{stem}/{sub}{suffix}.html");
            pages.push(Page {
                url: format!("/{file}"),
                id: format!("/{file}"),
                file,
                kind: Kind::Sub,
                branch: base.branch,
                title: format!("{} {sub}", base.title),
                description: format!("{sub} notes for the {}", base.description),
                links: Vec::new(),
            });
        }
        round += 1;
    }

    let idx_of = |id: &str, pages: &[Page]| pages.iter().position(|p| p.id == id);
    let n = pages.len();
    for i in 0..n {
        let mut links: BTreeSet<usize> = BTreeSet::new();
        match pages[i].kind {
            Kind::Root => {
                for (j, p) in pages.iter().enumerate() {
                    if p.kind == Kind::Maker {
                        links.insert(j);
                    }
                }
                for _ in 0..5 {
                    links.insert(*pick(rng, &model_pages));
                }
            }
            Kind::Maker => {
                links.insert(0);
                let prefix = format!("{}/", pages[i].id);
                for (j, p) in pages.iter().enumerate() {
                    if p.kind == Kind::Model && p.id.starts_with(&prefix) {
                        links.insert(j);
                    }
                }
            }
            Kind::Model => {
                links.insert(0);
                if let Some(j) = idx_of(&format!("/{}", pages[i].branch), &pages) {
                    links.insert(j);
                }
                let prefix = format!("{}/", pages[i].id.trim_end_matches(".html"));
                for (j, p) in pages.iter().enumerate() {
                    if p.kind == Kind::Sub && p.id.starts_with(&prefix) {
                        links.insert(j);
                    }
                }
                for _ in 0..rng.random_range(2..=4) {
                    links.insert(*pick(rng, &model_pages));
                }
            }
            Kind::Sub => {
                let model_id = format!("{}.html", pages[i].id.rsplit_once('/').unwrap().0);
                let model = idx_of(&model_id, &pages);
                if let Some(m) = model {
                    links.insert(m);
                }
                let dir = pages[i].id.rsplit_once('/').unwrap().0.to_string() + "/";
                let siblings: Vec<usize> = (0..n)
                    .filter(|&j| pages[j].kind == Kind::Sub && pages[j].id.starts_with(&dir))
                    .collect();
                for _ in 0..2 {
                    links.insert(*pick(rng, &siblings));
                }
                if rng.random_bool(0.5) {
                    links.insert(rng.random_range(0..n));
                }
            }
        }
        links.remove(&i);
        pages[i].links = links.into_iter().collect();
    }
    pages
}

fn href(from: &Page, to: &Page) -> String {
    let from_dir = from.file.rsplit_once('/').map_or("", |(d, _)| d);
    let (to_dir, to_name) = to.file.rsplit_once('/').unwrap_or(("", to.file.as_str()));
    if from_dir == to_dir && to.kind != Kind::Maker && to.kind != Kind::Root {
        to_name.to_string()
    } else {
        to.url.clone()
    }
}

fn render(page: &Page, pages: &[Page], rng: &mut ChaCha8Rng) -> String {
    let mut body = String::new();
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..rng.random_range(30..80) {
        words.push(pick(rng, FILLER));
    }
    let repeat = if page.kind == Kind::Model { 3 } else { 1 };
    let _ = write!(
        body,
        "<!DOCTYPE html>\n<html><head><title>{}</title>\n<style>body {{ font-family: serif }}</style></head>\n<body>\n<h1>{}</h1>\n",
        page.title, page.title
    );
    for _ in 0..repeat {
        let _ = writeln!(body, "<p>{} &mdash; {}.</p>", page.title, page.description);
    }
    let _ = writeln!(body, "<p>{}</p>", words.join(" "));
    body.push_str("<ul>\n");
    for &l in &page.links {
        let _ = writeln!(
            body,
            "<li><a href=\"{}\">{}</a></li>",
            href(page, &pages[l]),
            pages[l].title
        );
    }
    body.push_str("</ul>\n<img src=\"/images/logo.gif\" alt=\"logo\">\n</body></html>\n");
    body
}

fn clf_time(ts: i64) -> String {
    let tz = FixedOffset::west_opt(7 * 3600).unwrap();
    DateTime::from_timestamp(ts, 0)
        .unwrap()
        .with_timezone(&tz)
        .format("%d/%b/%Y:%H:%M:%S %z")
        .to_string()
}

struct LogWriter {
    lines: Vec<(i64, usize, String)>,
}

impl LogWriter {
    #[allow(clippy::too_many_arguments)]
    fn hit(
        &mut self,
        ip: &str,
        ts: i64,
        method: &str,
        url: &str,
        status: u16,
        bytes: u64,
        referrer: Option<&str>,
        agent: &str,
    ) {
        let r = referrer
            .map(|r| format!("http://machines.example.org{r}"))
            .unwrap_or_else(|| "-".into());
        let line = format!(
            "{ip} - - [{}] \"{method} {url} HTTP/1.0\" {status} {bytes} \"{r}\" \"{agent}\"",
            clf_time(ts)
        );
        let seq = self.lines.len();
        self.lines.push((ts, seq, line));
    }
}

fn simulate_log(cfg: &SynthConfig, pages: &[Page], rng: &mut ChaCha8Rng) -> Vec<String> {
    let start: i64 = 1_230_768_000; // 2009-01-01T00:00:00Z
    let mut log = LogWriter { lines: Vec::new() };
    let hot = |p: &Page| p.branch == cfg.hot_branch;
    let entry_weights: Vec<f64> = pages
        .iter()
        .map(|p| match (p.kind, hot(p)) {
            (Kind::Root, _) => pages.len() as f64 * 0.4,
            (_, true) => cfg.skew,
            _ => 1.0,
        })
        .collect();

    for v in 0..cfg.visitors {
        let ip = format!("10.{}.{}.{}", v / 65536 % 256, v / 256 % 256, v % 256 + 1);
        let agent = *pick(rng, AGENTS);
        let mut ts = start + rng.random_range(0..86_400 * 20);
        for _ in 0..rng.random_range(1..=3) {
            let mut current = weighted_pick(rng, &entry_weights);
            let mut stack: Vec<usize> = Vec::new();
            let mut referrer: Option<usize> = None;
            for _step in 0..15 {
                log.hit(
                    &ip,
                    ts,
                    "GET",
                    &pages[current].url,
                    if rng.random_bool(0.08) { 304 } else { 200 },
                    rng.random_range(900..9000),
                    referrer.map(|r| pages[r].url.as_str()),
                    agent,
                );
                if rng.random_bool(0.4) {
                    log.hit(
                        &ip,
                        ts + 1,
                        "GET",
                        "/images/logo.gif",
                        200,
                        1432,
                        Some(&pages[current].url),
                        agent,
                    );
                }
                ts += rng.random_range(5..240);
                if rng.random_bool(0.25) || pages[current].links.is_empty() {
                    break;
                }
                // Back button: the previous page comes from the browser
                // cache, so only the next click reaches the log.
                if !stack.is_empty() && rng.random_bool(0.1) {
                    current = stack.pop().unwrap();
                }
                let links = &pages[current].links;
                let w: Vec<f64> = links
                    .iter()
                    .map(|&l| if hot(&pages[l]) { cfg.skew } else { 1.0 })
                    .collect();
                let next = links[weighted_pick(rng, &w)];
                stack.push(current);
                referrer = Some(current);
                current = next;
            }
            ts += 3600 + rng.random_range(0..86_400 * 3);
        }
    }

    // Noise the pipeline must skip.
    for i in 0..(cfg.visitors / 10).max(4) {
        let ts = start + rng.random_range(0..86_400 * 20);
        let p = pick(rng, pages);
        let ip = format!("192.168.1.{}", i % 250 + 1);
        match i % 4 {
            0 => log.hit(&ip, ts, "GET", "/missing/page.html", 404, 210, None, AGENTS[0]),
            1 => log.hit(&ip, ts, "POST", "/cgi-bin/search", 200, 512, Some(&p.url), AGENTS[1]),
            2 => log.hit(&ip, ts, "GET", &p.url, 200, 2048, None, "Googlebot/2.1 (+http://www.google.com/bot.html)"),
            _ => {
                let seq = log.lines.len();
                log.lines.push((ts, seq, "garbage line without structure".into()));
            }
        }
    }
    log.lines.sort();
    log.lines.into_iter().map(|(_, _, l)| l).collect()
}

fn annotate(cfg: &SynthConfig, pages: &[Page], rng: &mut ChaCha8Rng) -> Vec<(String, String, u64)> {
    let mut out = Vec::new();
    for p in pages {
        let chance = match p.kind {
            Kind::Model => cfg.annotated_fraction,
            Kind::Sub => cfg.annotated_fraction * 0.2,
            _ => 0.0,
        };
        if !rng.random_bool(chance.clamp(0.0, 1.0)) {
            continue;
        }
        let boost = if p.branch == cfg.hot_branch { 3 } else { 1 };
        let mut tags: BTreeSet<String> = BTreeSet::new();
        tags.insert(p.branch.to_string());
        for w in p.title.split_whitespace() {
            let t: String = w
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            if t.len() > 1 {
                tags.insert(t);
            }
        }
        for w in p.description.split_whitespace().filter(|w| w.len() > 4) {
            if rng.random_bool(0.3) {
                tags.insert(w.to_lowercase());
            }
        }
        for _ in 0..rng.random_range(1..=2) {
            tags.insert(pick(rng, TAG_POOL).to_string());
        }
        for t in tags {
            let n = rng.random_range(1..=12) * boost;
            out.push((t, p.id.clone(), n));
        }
    }
    out
}

/// Generate a site from `cfg`. Identical configs produce identical output.
pub fn generate(cfg: &SynthConfig) -> SynthSite {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pages = build_pages(cfg, &mut rng);
    let files = pages
        .iter()
        .map(|p| (p.file.clone(), render(p, &pages, &mut rng)))
        .collect();
    let log_lines = simulate_log(cfg, &pages, &mut rng);
    let annotations = annotate(cfg, &pages, &mut rng);
    let judgments = JUDGED
        .iter()
        .map(|(q, t)| QueryJudgment {
            query: q.to_string(),
            targets: vec![t.to_string()],
        })
        .collect();
    SynthSite {
        files,
        log_lines,
        annotations,
        judgments,
        hot_branch: cfg.hot_branch.clone(),
    }
}

/// Section slugs that can serve as the hot branch.
pub fn branches() -> Vec<&'static str> {
    CATALOG.iter().map(|m| m.slug).collect()
}

/// The configurations the bundled evaluation compares: PageRank versus
/// LPageRank as the static signal, plus a text-only baseline.
pub fn default_configs() -> Vec<EvalConfig> {
    let w = FusionWeights::default();
    vec![
        EvalConfig {
            name: "tfidf".into(),
            weights: FusionWeights::new(1.0, 0.0, 0.0).unwrap(),
            static_kind: RankKind::Lpr,
        },
        EvalConfig {
            name: "pr".into(),
            weights: w,
            static_kind: RankKind::Pr,
        },
        EvalConfig {
            name: "lpr".into(),
            weights: w,
            static_kind: RankKind::Lpr,
        },
    ]
}

impl SynthSite {
    pub fn annotations_tsv(&self) -> String {
        let mut out = String::new();
        for (t, p, n) in &self.annotations {
            let _ = writeln!(out, "{t}\t{p}\t{n}");
        }
        out
    }

    pub fn judgments_tsv(&self) -> String {
        let mut out = String::new();
        for j in &self.judgments {
            let _ = writeln!(out, "{}\t{}", j.query, j.targets.join(","));
        }
        out
    }

    /// Write `corpus/`, `logs/access.log.1.gz` (older half, gzip),
    /// `logs/access.log`, `annotations.tsv`, `judgments.tsv` and
    /// `configs.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        for (rel, content) in &self.files {
            let path = dir.join("corpus").join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, content)?;
        }
        let logs = dir.join("logs");
        fs::create_dir_all(&logs)?;
        let half = self.log_lines.len() / 2;
        let mut gz = GzEncoder::new(Vec::new(), Compression::default());
        for l in &self.log_lines[..half] {
            writeln!(gz, "{l}")?;
        }
        fs::write(logs.join("access.log.1.gz"), gz.finish()?)?;
        let mut recent = self.log_lines[half..].join("\n");
        recent.push('\n');
        fs::write(logs.join("access.log"), recent)?;
        fs::write(dir.join("annotations.tsv"), self.annotations_tsv())?;
        fs::write(dir.join("judgments.tsv"), self.judgments_tsv())?;
        let configs = serde_json::to_string_pretty(&default_configs()).map_err(io::Error::other)?;
        fs::write(dir.join("configs.json"), configs + "\n")?;
        Ok(())
    }
}
