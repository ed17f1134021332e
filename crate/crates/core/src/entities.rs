//! Heuristic common-entity finder for the "Common entities found" slot.
//!
//! Candidates are the longest contiguous token spans shared by both
//! passages, reduced to their capitalized runs. Capitalized runs of the first
//! passage that also occur in the second are merged into the same ranking.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::Serialize;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Placeholder slot value when no common entity survives filtering.
pub const NO_ENTITIES: &str = "none";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Lcs,
    CapitalizedRun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityCandidate {
    pub tokens: Vec<String>,
    /// Characters of the tokens joined by single spaces.
    pub char_length: usize,
    pub source: CandidateSource,
    /// Token offset of the span in the first sequence; breaks ranking ties.
    pub position: usize,
}

impl EntityCandidate {
    pub fn new(tokens: Vec<String>, source: CandidateSource, position: usize) -> Self {
        let char_length = joined_len(&tokens);
        Self {
            tokens,
            char_length,
            source,
            position,
        }
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn joined_len(tokens: &[String]) -> usize {
    let chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
    chars + tokens.len().saturating_sub(1)
}

fn rank(a: &EntityCandidate, b: &EntityCandidate) -> Ordering {
    b.char_length.cmp(&a.char_length).then(a.position.cmp(&b.position))
}

/// Case-insensitive stopword set.
#[derive(Debug, Clone)]
pub struct StopWords(HashSet<String>);

impl Default for StopWords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

impl StopWords {
    /// One word per line; blank lines and surrounding whitespace ignored.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

const EDGE_PUNCT: &[char] = &[',', ';', ':', '!', '?', '"', '\'', '(', ')', '[', ']', '{', '}', '`'];

/// Whitespace tokenization for entity matching. Surrounding quotes, brackets
/// and clause punctuation are trimmed; a trailing period is kept only on
/// initials such as `T.` so sentence-final periods do not block matches.
pub fn entity_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let mut t = raw.trim_matches(EDGE_PUNCT);
            let is_initial = {
                let mut cs = t.chars();
                matches!((cs.next(), cs.next(), cs.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
            };
            if !is_initial {
                t = t.trim_end_matches('.').trim_matches(EDGE_PUNCT);
            }
            (!t.is_empty()).then(|| t.to_string())
        })
        .collect()
}

/// Longest shared spans, before filtering: every span of `t1` that occurs in
/// `t2` and cannot be extended on either side at that occurrence, minus spans
/// whose `t1` range lies inside another candidate's. Ranked by character
/// length, then position in `t1`.
pub fn maximal_common_spans(t1: &[String], t2: &[String]) -> Vec<EntityCandidate> {
    let (n1, n2) = (t1.len(), t2.len());
    if n1 == 0 || n2 == 0 {
        return Vec::new();
    }
    // suffix[i][j]: length of the common run ending at t1[i-1], t2[j-1]
    let mut suffix = vec![vec![0usize; n2 + 1]; n1 + 1];
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    for i in 1..=n1 {
        for j in 1..=n2 {
            if t1[i - 1] == t2[j - 1] {
                suffix[i][j] = suffix[i - 1][j - 1] + 1;
            }
        }
    }
    for i in 1..=n1 {
        for j in 1..=n2 {
            let len = suffix[i][j];
            if len == 0 {
                continue;
            }
            let right_max = i == n1 || j == n2 || t1[i] != t2[j];
            if right_max {
                ranges.push((i - len, i));
            }
        }
    }
    ranges.sort_unstable();
    ranges.dedup();
    let kept: Vec<(usize, usize)> = ranges
        .iter()
        .copied()
        .filter(|&(s, e)| !ranges.iter().any(|&(os, oe)| (os, oe) != (s, e) && os <= s && e <= oe))
        .collect();
    let mut out: Vec<EntityCandidate> = kept
        .into_iter()
        .map(|(s, e)| EntityCandidate::new(t1[s..e].to_vec(), CandidateSource::Lcs, s))
        .collect();
    out.sort_by(rank);
    out
}

fn is_capitalized(token: &str, stop: &StopWords) -> bool {
    token
        .chars()
        .find(|c| c.is_alphabetic())
        .is_some_and(|c| c.is_uppercase())
        && !token.chars().next().is_some_and(|c| c.is_ascii_digit())
        && !stop.contains(token)
}

fn is_numeric(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_ascii_digit())
}

/// Capitalized runs within `tokens`, as `(start, end)` ranges. Numeric tokens
/// survive only when next to a capitalized token.
fn capitalized_runs(tokens: &[String], stop: &StopWords) -> Vec<(usize, usize)> {
    let cap: Vec<bool> = tokens.iter().map(|t| is_capitalized(t, stop)).collect();
    let keep: Vec<bool> = (0..tokens.len())
        .map(|i| cap[i] || (is_numeric(&tokens[i]) && ((i > 0 && cap[i - 1]) || (i + 1 < tokens.len() && cap[i + 1]))))
        .collect();
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &k) in keep.iter().chain(std::iter::once(&false)).enumerate() {
        match (k, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    runs
}

fn rank_and_dedup(mut cands: Vec<EntityCandidate>) -> Vec<EntityCandidate> {
    cands.sort_by(rank);
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    cands.retain(|c| seen.insert(c.tokens.clone()));
    cands
}

/// Drops stopwords and non-capitalized tokens from each candidate, splitting
/// it into one candidate per surviving capitalized run. Empty residues are
/// removed and duplicate token sequences keep only their best-ranked copy.
pub fn filter_candidates(cands: &[EntityCandidate], stop: &StopWords) -> Vec<EntityCandidate> {
    let mut out = Vec::new();
    for c in cands {
        for (s, e) in capitalized_runs(&c.tokens, stop) {
            out.push(EntityCandidate::new(c.tokens[s..e].to_vec(), c.source, c.position + s));
        }
    }
    rank_and_dedup(out)
}

fn occurs_in(needle: &[String], hay: &[String]) -> bool {
    !needle.is_empty() && needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Top-`k` common entities between two token sequences, using the built-in
/// stopword list.
pub fn common_spans(t1: &[String], t2: &[String], k: usize) -> Vec<EntityCandidate> {
    common_spans_with(t1, t2, k, &StopWords::default())
}

pub fn common_spans_with(t1: &[String], t2: &[String], k: usize, stop: &StopWords) -> Vec<EntityCandidate> {
    assert!(k >= 1, "k must be at least 1");
    let mut merged = filter_candidates(&maximal_common_spans(t1, t2), stop);
    for (s, e) in capitalized_runs(t1, stop) {
        if occurs_in(&t1[s..e], t2) {
            merged.push(EntityCandidate::new(
                t1[s..e].to_vec(),
                CandidateSource::CapitalizedRun,
                s,
            ));
        }
    }
    let mut ranked = rank_and_dedup(merged);
    ranked.truncate(k);
    ranked
}

/// Slot text for the top three common entities of two passage texts,
/// joined by `", "`, or [`NO_ENTITIES`] when there are none.
pub fn common_entities_slot(p1: &str, p2: &str, stop: &StopWords) -> String {
    let found = common_spans_with(&entity_tokens(p1), &entity_tokens(p2), 3, stop);
    if found.is_empty() {
        NO_ENTITIES.to_string()
    } else {
        found.iter().map(|c| c.text()).collect::<Vec<_>>().join(", ")
    }
}
