use logrank_core::fusion::{Engine, FusionWeights, QueryResult};
use logrank_core::ranker::{RankKind, RankParams, RankVector};
use logrank_core::social::{load_annotations, social_sim_rank, SsrParams};
use logrank_core::textindex::{build_index, tfidf_scores, Document, Tokenizer};
use logrank_oracles::{fuse, text};
use proptest::prelude::*;

const WORDS: &[&str] = &["bass", "drum", "synth", "keys", "snare", "korg"];

fn static_vector(scores: &[(String, f64)]) -> RankVector {
    let mut s = scores.to_vec();
    s.sort_by(|a, b| a.0.cmp(&b.0));
    RankVector {
        kind: RankKind::Lpr,
        params: RankParams::default(),
        pages: s.iter().map(|p| p.0.clone()).collect(),
        scores: s.iter().map(|p| p.1).collect(),
        iterations_used: 0,
        final_residual: 0.0,
        residuals: Vec::new(),
    }
}

#[derive(Debug, Clone)]
struct Site {
    docs: Vec<(String, Vec<String>)>,
    statics: Vec<(String, f64)>,
}

impl Site {
    fn engine(&self) -> Engine {
        let docs: Vec<Document> = self
            .docs
            .iter()
            .map(|(p, t)| Document {
                page: p.clone(),
                title: String::new(),
                tokens: t.clone(),
            })
            .collect();
        Engine::new()
            .with_index(build_index(&docs, &Tokenizer::default()).unwrap())
            .with_rank(static_vector(&self.statics))
    }

    /// Candidates as the oracle sees them: pages with a positive TF-IDF score.
    fn candidates(&self, q: &[String]) -> Vec<(String, [f64; 3])> {
        text::tfidf(&self.docs, q)
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(p, s)| {
                let st = self.statics.iter().find(|x| x.0 == p).map_or(0.0, |x| x.1);
                (p, [s, 0.0, st])
            })
            .collect()
    }
}

fn site() -> impl Strategy<Value = Site> {
    (
        prop::collection::vec(prop::collection::vec(0..WORDS.len(), 1..12), 2..10),
        prop::collection::vec(0.15f64..5.0, 10),
    )
        .prop_map(|(ds, st)| {
            let docs: Vec<(String, Vec<String>)> = ds
                .into_iter()
                .enumerate()
                .map(|(i, ws)| (format!("/d{i}"), ws.into_iter().map(|w| WORDS[w].to_string()).collect()))
                .collect();
            let statics = docs.iter().zip(st).map(|(d, s)| (d.0.clone(), s)).collect();
            Site { docs, statics }
        })
}

fn weights() -> impl Strategy<Value = FusionWeights> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("some weight", |w| w.0 + w.1 + w.2 > 1e-3)
        .prop_map(|(a, b, c)| FusionWeights::new(a, b, c).unwrap())
}

fn pages(rs: &[QueryResult]) -> Vec<String> {
    rs.iter().map(|r| r.page.clone()).collect()
}

fn query() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..WORDS.len(), 1..3)
}

fn qstr(q: &[usize]) -> (String, Vec<String>) {
    let terms: Vec<String> = q.iter().map(|&i| WORDS[i].to_string()).collect();
    (terms.join(" "), terms)
}

#[test]
fn three_page_example() {
    let docs = [
        ("/a", "bass drum bass drum"),
        ("/b", "bass synth keys keys"),
        ("/c", "bass keys snare snare korg"),
        ("/d", "keys"),
    ];
    let tok = Tokenizer::default();
    let idx = build_index(
        &docs
            .iter()
            .map(|(p, t)| Document {
                page: p.to_string(),
                title: String::new(),
                tokens: tok.tokenize(t),
            })
            .collect::<Vec<_>>(),
        &tok,
    )
    .unwrap();
    let store = load_annotations(&[("bass", "/a", 1), ("bass", "/c", 4), ("amp", "/c", 2), ("amp", "/b", 2)]).unwrap();
    let sim = social_sim_rank(&store, SsrParams::default()).unwrap();
    let statics = [("/a", 0.3), ("/b", 1.9), ("/c", 0.8), ("/d", 4.0)]
        .map(|(p, s)| (p.to_string(), s));
    let engine = Engine::new()
        .with_index(idx)
        .with_rank(static_vector(&statics))
        .with_social(store, sim);
    let w = FusionWeights::new(0.5, 0.3, 0.2).unwrap();
    let got = engine.search("bass", 10, w, RankKind::Lpr).unwrap();

    let cands: Vec<(String, [f64; 3])> = got
        .iter()
        .map(|r| (r.page.clone(), [r.raw.text, r.raw.social, r.raw.static_]))
        .collect();
    let mut seen = pages(&got);
    seen.sort();
    assert_eq!(seen, ["/a", "/b", "/c"]);
    let want = fuse::fused(&cands, [0.5, 0.3, 0.2]);
    for (r, (p, s)) in got.iter().zip(&want) {
        assert_eq!(&r.page, p);
        assert!((r.score - s).abs() < 1e-12);
    }
    // Raw text scores from the word counts: idf(bass) = ln(4/3).
    let idf = (4.0f64 / 3.0).ln();
    let raw_text = |p: &str| got.iter().find(|r| r.page == p).unwrap().raw.text;
    assert!((raw_text("/a") - 2.0 * idf / 4.0).abs() < 1e-15);
    assert!((raw_text("/b") - idf / 4.0).abs() < 1e-15);
    assert!((raw_text("/c") - idf / 5.0).abs() < 1e-15);
    assert!(got.iter().all(|r| r.page != "/d"));
}

proptest! {
    #[test]
    fn matches_oracle(s in site(), q in query(), w in weights()) {
        let (qs, terms) = qstr(&q);
        let got = s.engine().search(&qs, 100, w, RankKind::Lpr).unwrap();
        let want = fuse::fused(&s.candidates(&terms), w.as_array());
        prop_assert_eq!(got.len(), want.len());
        for (r, (p, sc)) in got.iter().zip(&want) {
            prop_assert_eq!(&r.page, p);
            prop_assert!((r.score - sc).abs() < 1e-12);
        }
        for (i, r) in got.iter().enumerate() {
            prop_assert_eq!(r.position, i + 1);
            for c in [r.components.text, r.components.social, r.components.static_] {
                prop_assert!((0.0..=1.0).contains(&c));
            }
        }
    }

    #[test]
    fn text_only_weights_give_tfidf_order(s in site(), q in query()) {
        let (qs, terms) = qstr(&q);
        let e = s.engine();
        let got = e.search(&qs, 100, FusionWeights::new(1.0, 0.0, 0.0).unwrap(), RankKind::Lpr).unwrap();
        let mut by_text: Vec<(String, f64)> = tfidf_scores(&terms, e.index().unwrap())
            .into_iter()
            .filter(|(_, v)| *v > 0.0)
            .collect();
        by_text.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        // Pages tied on text keep page-id order even though their static
        // scores differ.
        prop_assert_eq!(pages(&got), by_text.into_iter().map(|x| x.0).collect::<Vec<_>>());
    }

    #[test]
    fn static_only_weights_give_static_order(s in site(), q in query()) {
        let (qs, terms) = qstr(&q);
        let got = s.engine().search(&qs, 100, FusionWeights::new(0.0, 0.0, 1.0).unwrap(), RankKind::Lpr).unwrap();
        let mut by_static: Vec<(String, f64)> = s.candidates(&terms).into_iter().map(|(p, v)| (p, v[2])).collect();
        by_static.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        prop_assert_eq!(pages(&got), by_static.into_iter().map(|x| x.0).collect::<Vec<_>>());
    }

    #[test]
    fn non_candidates_do_not_matter(mut s in site(), q in query(), w in weights(), bump in 0.0f64..100.0) {
        let (qs, terms) = qstr(&q);
        let before = s.engine().search(&qs, 100, w, RankKind::Lpr).unwrap();
        let cands: Vec<String> = s.candidates(&terms).into_iter().map(|c| c.0).collect();
        for (p, v) in s.statics.iter_mut() {
            if !cands.contains(p) {
                *v += bump;
            }
        }
        s.statics.push(("/elsewhere".into(), 1e6));
        let after = s.engine().search(&qs, 100, w, RankKind::Lpr).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn search_is_deterministic(s in site(), q in query(), w in weights()) {
        let (qs, _) = qstr(&q);
        let e = s.engine();
        let a = e.search(&qs, 100, w, RankKind::Lpr).unwrap();
        let b = e.search(&qs, 100, w, RankKind::Lpr).unwrap();
        prop_assert_eq!(&a, &b);
        let c = s.engine().search(&qs, 100, w, RankKind::Lpr).unwrap();
        prop_assert_eq!(a, c);
    }

    #[test]
    fn raising_static_never_demotes(mut s in site(), q in query(), w in weights(), pick in 0usize..10, gain in 0.0f64..10.0) {
        let (qs, terms) = qstr(&q);
        let cands = s.candidates(&terms);
        prop_assume!(!cands.is_empty());
        let target = cands[pick % cands.len()].0.clone();
        let pos = |rs: &[QueryResult]| rs.iter().position(|r| r.page == target).unwrap();
        let before = pos(&s.engine().search(&qs, 100, w, RankKind::Lpr).unwrap());
        s.statics.iter_mut().find(|x| x.0 == target).unwrap().1 += gain;
        let after = pos(&s.engine().search(&qs, 100, w, RankKind::Lpr).unwrap());
        prop_assert!(after <= before, "{} -> {}", before, after);
    }

    #[test]
    fn top_k_is_a_prefix(s in site(), q in query(), w in weights(), k in 1usize..6) {
        let (qs, _) = qstr(&q);
        let e = s.engine();
        let all = e.search(&qs, 100, w, RankKind::Lpr).unwrap();
        let top = e.search(&qs, k, w, RankKind::Lpr).unwrap();
        prop_assert_eq!(&all[..k.min(all.len())], &top[..]);
    }
}
