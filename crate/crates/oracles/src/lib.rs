//! Slow reference implementations for the logrank test suites.
//!
//! Everything here is written straight from the formulas on plain vectors
//! and maps, sharing no code with `logrank-core`, so that a test comparing
//! the two is comparing independent computations.

pub mod rank {
    use nalgebra::{DMatrix, DVector};

    /// Solve `(I - (1 - alpha) P^T) x = alpha * 1` for the fixed point of the
    /// non-normalized PageRank recursion. `edges` are `(from, to, p)`.
    pub fn linear_solve(n: usize, edges: &[(usize, usize, f64)], alpha: f64) -> Vec<f64> {
        let mut a = DMatrix::<f64>::identity(n, n);
        for &(from, to, p) in edges {
            a[(to, from)] -= (1.0 - alpha) * p;
        }
        let b = DVector::from_element(n, alpha);
        let x = a.lu().solve(&b).expect("system is non-singular for alpha > 0");
        x.iter().copied().collect()
    }

    /// `P(B, A) = 1 / N(B)` over distinct non-self links.
    pub fn uniform_edges(n: usize, links: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
        let mut targets = vec![Vec::new(); n];
        for &(s, d) in links {
            if s != d && !targets[s].contains(&d) {
                targets[s].push(d);
            }
        }
        let mut out = Vec::new();
        for (s, ts) in targets.iter().enumerate() {
            for &d in ts {
                out.push((s, d, 1.0 / ts.len() as f64));
            }
        }
        out
    }
}

pub mod ssr {
    pub type Matrix = Vec<Vec<f64>>;

    fn identity(n: usize) -> Matrix {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    /// Run `sweeps` rounds of SocialSimRank on the count matrix
    /// `m[annotation][page]` and return `(SA, SP)` after every round.
    ///
    /// ```text
    /// SA'(ai,aj) = CA / (|P(ai)| |P(aj)|) * sum_m sum_n
    ///              min(M(ai,pm), M(aj,pn)) / max(M(ai,pm), M(aj,pn)) * SP(pm,pn)
    /// SP'(pi,pj) = CP / (|A(pi)| |A(pj)|) * sum_m sum_n
    ///              min(M(am,pi), M(an,pj)) / max(M(am,pi), M(an,pj)) * SA'(am,an)
    /// ```
    ///
    /// Diagonals are set to one after each half-sweep.
    pub fn sweeps(m: &[Vec<u64>], ca: f64, cp: f64, sweeps: usize) -> Vec<(Matrix, Matrix)> {
        let na = m.len();
        let np = if na == 0 { 0 } else { m[0].len() };
        let mut sp = identity(np);
        let mut out = Vec::new();
        for _ in 0..sweeps {
            let mut next_a = identity(na);
            for i in 0..na {
                for j in 0..na {
                    if i == j {
                        continue;
                    }
                    let pi: Vec<usize> = (0..np).filter(|&p| m[i][p] > 0).collect();
                    let pj: Vec<usize> = (0..np).filter(|&p| m[j][p] > 0).collect();
                    if pi.is_empty() || pj.is_empty() {
                        continue;
                    }
                    let mut sum = 0.0;
                    for &pm in &pi {
                        for &pn in &pj {
                            let (x, y) = (m[i][pm], m[j][pn]);
                            sum += x.min(y) as f64 / x.max(y) as f64 * sp[pm][pn];
                        }
                    }
                    next_a[i][j] = ca / (pi.len() * pj.len()) as f64 * sum;
                }
            }
            let mut next_p = identity(np);
            for i in 0..np {
                for j in 0..np {
                    if i == j {
                        continue;
                    }
                    let ai: Vec<usize> = (0..na).filter(|&a| m[a][i] > 0).collect();
                    let aj: Vec<usize> = (0..na).filter(|&a| m[a][j] > 0).collect();
                    if ai.is_empty() || aj.is_empty() {
                        continue;
                    }
                    let mut sum = 0.0;
                    for &am in &ai {
                        for &an in &aj {
                            let (x, y) = (m[am][i], m[an][j]);
                            sum += x.min(y) as f64 / x.max(y) as f64 * next_a[am][an];
                        }
                    }
                    next_p[i][j] = cp / (ai.len() * aj.len()) as f64 * sum;
                }
            }
            sp = next_p.clone();
            out.push((next_a, next_p));
        }
        out
    }

    /// `sum_q sum_a SA(q,a) * M(a,page) / sum_b M(b,page)`.
    pub fn query_page_similarity(sa: &Matrix, m: &[Vec<u64>], query: &[usize], page: usize) -> f64 {
        let total: u64 = m.iter().map(|row| row[page]).sum();
        if total == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for &q in query {
            for (a, row) in m.iter().enumerate() {
                s += sa[q][a] * row[page] as f64 / total as f64;
            }
        }
        s
    }
}

pub mod text {
    use std::collections::BTreeMap;

    pub fn word_counts(tokens: &[String]) -> BTreeMap<String, u32> {
        let mut out = BTreeMap::new();
        for t in tokens {
            *out.entry(t.clone()).or_insert(0) += 1;
        }
        out
    }

    /// `sum_t tf(t,d) * ln(N / df(t)) / len(d)` for every document holding at
    /// least one query term.
    pub fn tfidf(docs: &[(String, Vec<String>)], query: &[String]) -> BTreeMap<String, f64> {
        let n = docs.len() as f64;
        let mut out = BTreeMap::new();
        for (page, tokens) in docs {
            let mut score = 0.0;
            let mut hit = false;
            for q in query {
                let tf = tokens.iter().filter(|t| *t == q).count();
                if tf == 0 {
                    continue;
                }
                hit = true;
                let df = docs.iter().filter(|(_, ts)| ts.contains(q)).count() as f64;
                score += tf as f64 * (n / df).ln() / tokens.len() as f64;
            }
            if hit {
                out.insert(page.clone(), score);
            }
        }
        out
    }
}

pub mod fuse {
    /// Rescale to [0, 1]; a constant vector becomes all zeros.
    pub fn min_max(xs: &[f64]) -> Vec<f64> {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        xs.iter()
            .map(|x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    /// Fused scores, sorted descending with ties broken by page id.
    pub fn fused(cands: &[(String, [f64; 3])], w: [f64; 3]) -> Vec<(String, f64)> {
        let total: f64 = w.iter().sum();
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|c| min_max(&cands.iter().map(|(_, v)| v[c]).collect::<Vec<_>>()))
            .collect();
        let mut out: Vec<(String, f64)> = cands
            .iter()
            .enumerate()
            .map(|(i, (p, _))| {
                let s = (0..3).map(|c| w[c] / total * cols[c][i]).sum();
                (p.clone(), s)
            })
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        out
    }

    pub fn order(cands: &[(String, [f64; 3])], w: [f64; 3]) -> Vec<String> {
        fused(cands, w).into_iter().map(|(p, _)| p).collect()
    }
}

pub mod sessions {
    use std::collections::BTreeMap;

    /// Group `(client, timestamp, path)` hits by client, order each group by
    /// time, then cut wherever the gap exceeds `timeout`.
    pub fn sessionize(hits: &[(String, i64, String)], timeout: i64) -> Vec<(String, Vec<(i64, String)>)> {
        let mut groups: BTreeMap<&str, Vec<(i64, String)>> = BTreeMap::new();
        for (c, t, p) in hits {
            groups.entry(c).or_default().push((*t, p.clone()));
        }
        let mut out = Vec::new();
        for (c, mut hs) in groups {
            hs.sort_by_key(|h| h.0);
            let mut cur: Vec<(i64, String)> = Vec::new();
            for h in hs {
                if cur.last().is_some_and(|l| h.0 - l.0 > timeout) {
                    out.push((c.to_string(), std::mem::take(&mut cur)));
                }
                cur.push(h);
            }
            if !cur.is_empty() {
                out.push((c.to_string(), cur));
            }
        }
        out
    }
}
