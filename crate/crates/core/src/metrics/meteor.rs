//! METEOR without the synonym stage: exact matches first, then Porter-stem
//! matches among the still-unaligned tokens, fragmentation penalty on the
//! number of contiguous chunks.
//!
//! The alignment maximizes, in order: exact pairs, total pairs, and then
//! minimizes chunks. That is what applying the stages in order and picking
//! the least fragmented alignment amounts to. It is solved exactly by a
//! memoized search over (hypothesis position, used reference positions,
//! previous link); past [`STATE_BUDGET`] states, or for sequences longer
//! than 128 tokens, a greedy contiguity-preferring aligner takes over.

use std::cell::RefCell;

use rustc_hash::FxHashMap;

use super::porter::stem;
use super::{EvalPair, Scalar};
use crate::metrics::tokenize::eval_tokenize;

pub const STATE_BUDGET: usize = 200_000;
const MAX_EXACT_LEN: usize = 128;

/// A one-to-one alignment between hypothesis and reference positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    /// (hyp, ref) pairs ordered by hypothesis position.
    pub links: Vec<(usize, usize)>,
    pub exact: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.links.len()
    }

    pub fn chunks(&self) -> usize {
        chunk_count(&self.links)
    }
}

/// Contiguous runs in a hypothesis-ordered link list.
pub fn chunk_count(links: &[(usize, usize)]) -> usize {
    links
        .iter()
        .enumerate()
        .filter(|&(i, &(h, r))| i == 0 || links[i - 1] != (h.wrapping_sub(1), r.wrapping_sub(1)))
        .count()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Exact,
    Stem,
}

struct Problem {
    /// Eligible reference positions per hypothesis position.
    edges: Vec<Vec<(usize, Kind)>>,
    /// Reference positions still reachable from hypothesis position i on.
    reach: Vec<u128>,
}

impl Problem {
    fn new(hyp: &[String], reference: &[String]) -> Self {
        let hs: Vec<String> = hyp.iter().map(|t| cached_stem(t)).collect();
        let rs: Vec<String> = reference.iter().map(|t| cached_stem(t)).collect();
        let edges: Vec<Vec<_>> = hyp
            .iter()
            .enumerate()
            .map(|(i, h)| {
                reference
                    .iter()
                    .enumerate()
                    .filter_map(|(j, r)| {
                        if h == r {
                            Some((j, Kind::Exact))
                        } else if hs[i] == rs[j] {
                            Some((j, Kind::Stem))
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        let mut reach = vec![0u128; hyp.len() + 1];
        if reference.len() <= MAX_EXACT_LEN {
            for i in (0..hyp.len()).rev() {
                reach[i] = reach[i + 1] | edges[i].iter().fold(0u128, |m, &(j, _)| m | (1u128 << j));
            }
        }
        Self { edges, reach }
    }
}

const STEM_CACHE_CAP: usize = 1 << 16;

thread_local! {
    static STEMS: RefCell<FxHashMap<String, String>> = RefCell::new(FxHashMap::default());
}

/// Corpora reuse a small vocabulary, so stems are memoized per thread. The
/// cache is dropped wholesale when it reaches its cap.
fn cached_stem(word: &str) -> String {
    STEMS.with(|c| {
        let mut c = c.borrow_mut();
        if let Some(s) = c.get(word) {
            return s.clone();
        }
        if c.len() >= STEM_CACHE_CAP {
            c.clear();
        }
        let s = stem(word);
        c.insert(word.to_string(), s.clone());
        s
    })
}

/// (exact, total, -chunks): larger is better.
type Value = (usize, usize, isize);

fn add(v: Value, exact: bool, new_chunk: bool) -> Value {
    (v.0 + exact as usize, v.1 + 1, v.2 - new_chunk as isize)
}

struct Search<'p> {
    p: &'p Problem,
    memo: FxHashMap<(usize, u128, usize), (Value, Option<usize>)>,
    overflow: bool,
}

const NO_PREV: usize = usize::MAX;

impl Search<'_> {
    fn best(&mut self, i: usize, used: u128, prev: usize) -> Value {
        if i == self.p.edges.len() {
            return (0, 0, 0);
        }
        let used = used & self.p.reach[i];
        // the previous link only matters if it can extend a chunk here
        let prev = if prev != NO_PREV
            && prev + 1 < 128
            && used & (1u128 << (prev + 1)) == 0
            && self.p.edges[i].iter().any(|&(j, _)| j == prev + 1)
        {
            prev
        } else {
            NO_PREV
        };
        let key = (i, used, prev);
        if let Some(&(v, _)) = self.memo.get(&key) {
            return v;
        }
        if self.memo.len() >= STATE_BUDGET {
            self.overflow = true;
            return (0, 0, 0);
        }
        let mut best = self.best(i + 1, used, NO_PREV);
        let mut choice = None;
        for &(j, kind) in &self.p.edges[i] {
            if used & (1u128 << j) != 0 {
                continue;
            }
            let rest = self.best(i + 1, used | (1u128 << j), j);
            let v = add(rest, kind == Kind::Exact, prev == NO_PREV || j != prev + 1);
            if v > best {
                best = v;
                choice = Some(j);
            }
        }
        self.memo.insert(key, (best, choice));
        best
    }

    fn trace(&self, hyp_len: usize) -> Vec<(usize, usize)> {
        let mut links = Vec::new();
        let (mut used, mut prev) = (0u128, NO_PREV);
        for i in 0..hyp_len {
            let u = used & self.p.reach[i];
            let pv = if prev != NO_PREV
                && prev + 1 < 128
                && u & (1u128 << (prev + 1)) == 0
                && self.p.edges[i].iter().any(|&(j, _)| j == prev + 1)
            {
                prev
            } else {
                NO_PREV
            };
            match self.memo.get(&(i, u, pv)).and_then(|&(_, c)| c) {
                Some(j) => {
                    links.push((i, j));
                    used |= 1u128 << j;
                    prev = j;
                }
                None => prev = NO_PREV,
            }
        }
        links
    }
}

fn greedy(p: &Problem) -> Vec<(usize, usize)> {
    let n = p.edges.len();
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut used = std::collections::HashSet::new();
    for stage in [Kind::Exact, Kind::Stem] {
        for i in 0..n {
            if assigned[i].is_some() {
                continue;
            }
            let prev = i.checked_sub(1).and_then(|k| assigned[k]);
            let free: Vec<usize> = p.edges[i]
                .iter()
                .filter(|&&(j, k)| k == stage && !used.contains(&j))
                .map(|&(j, _)| j)
                .collect();
            let pick = prev
                .and_then(|pr| free.iter().copied().find(|&j| j == pr + 1))
                .or_else(|| free.first().copied());
            if let Some(j) = pick {
                assigned[i] = Some(j);
                used.insert(j);
            }
        }
    }
    assigned
        .into_iter()
        .enumerate()
        .filter_map(|(i, a)| a.map(|j| (i, j)))
        .collect()
}

fn count_exact(hyp: &[String], reference: &[String], links: &[(usize, usize)]) -> usize {
    links.iter().filter(|&&(i, j)| hyp[i] == reference[j]).count()
}

/// Best alignment under the staged objective. Falls back to greedy on
/// pathological inputs.
pub fn align(hyp: &[String], reference: &[String]) -> Alignment {
    let p = Problem::new(hyp, reference);
    let links = if hyp.len() <= MAX_EXACT_LEN && reference.len() <= MAX_EXACT_LEN {
        let mut s = Search {
            p: &p,
            memo: FxHashMap::with_capacity_and_hasher(64, Default::default()),
            overflow: false,
        };
        s.best(0, 0, NO_PREV);
        if s.overflow {
            greedy(&p)
        } else {
            s.trace(hyp.len())
        }
    } else {
        greedy(&p)
    };
    Alignment {
        exact: count_exact(hyp, reference, &links),
        links,
    }
}

pub(crate) fn score_from_counts<F: Scalar>(m: usize, chunks: usize, hyp_len: usize, ref_len: usize) -> F {
    if m == 0 {
        return F::zero();
    }
    let mf = F::from_usize(m).unwrap();
    let p = mf / F::from_usize(hyp_len).unwrap();
    let r = mf / F::from_usize(ref_len).unwrap();
    let ten = F::from_f64(10.0).unwrap();
    let nine = F::from_f64(9.0).unwrap();
    let half = F::from_f64(0.5).unwrap();
    let fmean = ten * p * r / (r + nine * p);
    let frag = F::from_usize(chunks).unwrap() / mf;
    fmean * (F::one() - half * frag * frag * frag)
}

pub(crate) fn meteor_tokens<F: Scalar>(hyp: &[String], reference: &[String]) -> F {
    let a = align(hyp, reference);
    score_from_counts(a.matches(), a.chunks(), hyp.len(), reference.len())
}

pub fn meteor_lite<F: Scalar>(pair: &EvalPair) -> F {
    meteor_tokens(&eval_tokenize(&pair.hypothesis), &eval_tokenize(&pair.reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn hand_cases() {
        let same = meteor_lite::<f64>(&EvalPair::new("x", "the cat sat", "the cat sat"));
        assert_abs_diff_eq!(same, 1.0 - 0.5 / 27.0, epsilon = 1e-12);
        let stemmed = meteor_lite::<f64>(&EvalPair::new("x", "cats", "cat"));
        assert_abs_diff_eq!(stemmed, 0.5, epsilon = 1e-12);
        assert_eq!(meteor_lite::<f64>(&EvalPair::new("x", "a b", "c d")), 0.0);
        assert_eq!(meteor_lite::<f64>(&EvalPair::new("x", "a b", "")), 0.0);
    }

    #[test]
    fn prefers_contiguous_alignment() {
        // "the" could align to either occurrence; only the second keeps one chunk
        let a = align(&toks("the mat"), &toks("the cat on the mat"));
        assert_eq!(a.links, [(0, 3), (1, 4)]);
        assert_eq!(a.chunks(), 1);
    }

    #[test]
    fn exact_stage_wins_over_stem() {
        // hyp "cat" must take the exact "cat" even though "cats" comes first
        let a = align(&toks("cat"), &toks("cats cat"));
        assert_eq!(a.links, [(0, 1)]);
        assert_eq!(a.exact, 1);
    }

    #[test]
    fn chunks() {
        assert_eq!(chunk_count(&[]), 0);
        assert_eq!(chunk_count(&[(0, 0), (1, 1), (2, 3)]), 2);
        assert_eq!(chunk_count(&[(0, 1), (1, 0)]), 2);
        assert_eq!(chunk_count(&[(0, 0), (2, 1)]), 2);
    }

    #[test]
    fn greedy_fallback_on_long_input() {
        let long: Vec<String> = (0..200).map(|i| format!("w{}", i % 3)).collect();
        let a = align(&long, &long);
        assert_eq!(a.matches(), 200);
    }
}
