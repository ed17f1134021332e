//! Deliberately naive metric references: subset enumeration for LCS, full
//! matching enumeration for the METEOR alignment, plain n-gram counting for
//! BLEU. Shared by the metric tests and the acceptance harness.

#![allow(dead_code)]

use std::collections::HashMap;

use reasoning_circuits::metrics::{meteor_lite, rouge_l, EvalPair};

pub const VOCAB: [&str; 3] = ["run", "runs", "walk"];

pub fn all_sequences(max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for w in VOCAB {
                let mut t: Vec<&str> = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn is_subsequence(needle: &[&str], hay: &[&str]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

pub fn brute_lcs(a: &[&str], b: &[&str]) -> usize {
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&str> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
            is_subsequence(&sub, b).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

pub fn brute_rouge(hyp: &[&str], reference: &[&str]) -> f64 {
    let l = brute_lcs(hyp, reference) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let (p, r) = (l / hyp.len() as f64, l / reference.len() as f64);
    let b2 = 1.2f64 * 1.2;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Word pairs sharing a Porter stem, listed by hand.
pub const STEM_PAIRS: [(&str, &str); 2] = [("run", "runs"), ("cat", "cats")];

/// 0 = no match, 1 = stem match, 2 = exact.
pub fn relation(a: &str, b: &str) -> u8 {
    if a == b {
        2
    } else if STEM_PAIRS.iter().any(|&(x, y)| (a, b) == (x, y) || (a, b) == (y, x)) {
        1
    } else {
        0
    }
}

/// Best (exact, total, -chunks) over every one-to-one alignment. Branches
/// are cut only when even linking every remaining hypothesis token exactly
/// could not beat the incumbent; chunks never decrease along a branch.
pub fn brute_meteor(hyp: &[&str], reference: &[&str]) -> f64 {
    struct Walk<'a> {
        hyp: &'a [&'a str],
        reference: &'a [&'a str],
        best: (usize, usize, i64),
    }

    impl Walk<'_> {
        fn go(&mut self, i: usize, used: u32, last: Option<(usize, usize)>, exact: usize, total: usize, chunks: i64) {
            let rest = self.hyp.len() - i;
            if (exact + rest, total + rest, -chunks) <= self.best && self.best != (0, 0, 0) {
                return;
            }
            if i == self.hyp.len() {
                self.best = self.best.max((exact, total, -chunks));
                return;
            }
            for j in 0..self.reference.len() {
                let rel = relation(self.hyp[i], self.reference[j]);
                if used >> j & 1 == 0 && rel > 0 {
                    let extends = last == Some((i.wrapping_sub(1), j.wrapping_sub(1)));
                    self.go(
                        i + 1,
                        used | 1 << j,
                        Some((i, j)),
                        exact + (rel == 2) as usize,
                        total + 1,
                        chunks + !extends as i64,
                    );
                }
            }
            self.go(i + 1, used, last, exact, total, chunks);
        }
    }

    let mut w = Walk {
        hyp,
        reference,
        best: (0, 0, 0),
    };
    w.go(0, 0, None, 0, 0, 0);
    let (_, m, neg_chunks) = w.best;
    if m == 0 {
        return 0.0;
    }
    let m = m as f64;
    let (p, r) = (m / hyp.len() as f64, m / reference.len() as f64);
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    fmean * (1.0 - 0.5 * (-neg_chunks as f64 / m).powi(3))
}

/// Index tables over the enumerated sequences for transformations that
/// provably leave a metric unchanged. Brute-force results are memoized on
/// the smallest image of a pair; the implementation under test still runs
/// on every pair.
pub struct Symmetries {
    reversed: Vec<usize>,
    /// One table per vocabulary relabelling, identity first.
    relabel: Vec<Vec<usize>>,
}

impl Symmetries {
    pub fn new(seqs: &[Vec<&'static str>]) -> Self {
        let index: HashMap<&[&str], usize> = seqs.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
        let lookup = |s: Vec<&str>| index[s.as_slice()];
        let reversed = seqs.iter().map(|s| lookup(s.iter().rev().copied().collect())).collect();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let relabel = perms
            .iter()
            .map(|p| {
                seqs.iter()
                    .map(|s| {
                        lookup(
                            s.iter()
                                .map(|w| VOCAB[p[VOCAB.iter().position(|v| v == w).unwrap()]])
                                .collect(),
                        )
                    })
                    .collect()
            })
            .collect();
        Self { reversed, relabel }
    }

    /// Smallest image of (h, r) under reversal and the given relabellings.
    pub fn canonical(&self, h: usize, r: usize, relabellings: &[usize]) -> (usize, usize) {
        let mut best = (h, r);
        for &p in relabellings {
            let (a, b) = (self.relabel[p][h], self.relabel[p][r]);
            best = best.min((a, b)).min((self.reversed[a], self.reversed[b]));
        }
        best
    }
}

/// LCS only sees equality, so every relabelling qualifies.
pub const ROUGE_RELABEL: [usize; 6] = [0, 1, 2, 3, 4, 5];
/// Exchanging "run" and "runs" keeps both the exact and the stem relation.
pub const METEOR_RELABEL: [usize; 2] = [0, 2];

pub fn pair(reference: &[&str], hyp: &[&str]) -> EvalPair {
    EvalPair::new("x", reference.join(" "), hyp.join(" "))
}

pub fn ngrams<'a>(toks: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for i in 0..=toks.len() - n {
            *m.entry(toks[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU with uniform weights, no smoothing.
pub fn naive_bleu(corpus: &[(Vec<&str>, Vec<&str>)], n: usize) -> f64 {
    let (mut c, mut r) = (0usize, 0usize);
    let mut precisions = Vec::new();
    for k in 1..=n {
        let (mut hit, mut total) = (0usize, 0usize);
        for (h, rf) in corpus {
            let rc = ngrams(rf, k);
            for (g, cnt) in ngrams(h, k) {
                hit += cnt.min(*rc.get(&g).unwrap_or(&0));
                total += cnt;
            }
        }
        precisions.push((hit, total));
    }
    for (h, rf) in corpus {
        c += h.len();
        r += rf.len();
    }
    if precisions.iter().any(|&(hit, total)| hit == 0 || total == 0) {
        return 0.0;
    }
    let log_mean = precisions.iter().map(|&(h, t)| (h as f64 / t as f64).ln()).sum::<f64>() / n as f64;
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * log_mean.exp()
}

/// Runs `metric` on every ordered pair of sequences up to `max_len` tokens
/// and returns the first disagreement with `reference`.
fn exhaustive(
    max_len: usize,
    relabellings: &[usize],
    metric: fn(&EvalPair) -> f64,
    reference: fn(&[&str], &[&str]) -> f64,
) -> Result<usize, String> {
    let seqs = all_sequences(max_len);
    let sym = Symmetries::new(&seqs);
    let mut memo = HashMap::new();
    for (i, h) in seqs.iter().enumerate() {
        for (j, r) in seqs.iter().enumerate() {
            let got = metric(&pair(r, h));
            let want = *memo
                .entry(sym.canonical(i, j, relabellings))
                .or_insert_with(|| reference(h, r));
            if (got - want).abs() >= 1e-9 {
                return Err(format!("{h:?} vs {r:?}: {got} != {want}"));
            }
        }
    }
    Ok(seqs.len() * seqs.len())
}

/// Pairs checked, or the first mismatch.
pub fn exhaustive_rouge(max_len: usize) -> Result<usize, String> {
    exhaustive(max_len, &ROUGE_RELABEL, rouge_l::<f64>, brute_rouge)
}

pub fn exhaustive_meteor(max_len: usize) -> Result<usize, String> {
    exhaustive(max_len, &METEOR_RELABEL, meteor_lite::<f64>, brute_meteor)
}
