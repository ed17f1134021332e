//! Corpus-level BLEU and sentence-averaged ROUGE-L.

use std::collections::HashMap;

use super::{EvalPair, MetricError, Scalar};
use crate::metrics::tokenize::eval_tokenize;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped m-gram matches and total hypothesis m-grams for one sentence.
pub(crate) fn clipped_matches(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matched = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

/// Corpus BLEU-n: uniform weights, clipped counts, no smoothing.
pub fn bleu<F: Scalar>(pairs: &[EvalPair], n: usize) -> Result<F, MetricError> {
    if !(1..=4).contains(&n) {
        return Err(MetricError::BadOrder(n));
    }
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    let toks: Vec<_> = pairs
        .iter()
        .map(|p| (eval_tokenize(&p.hypothesis), eval_tokenize(&p.reference)))
        .collect();
    Ok(bleu_tokens(&toks, n))
}

pub(crate) fn bleu_tokens<F: Scalar>(toks: &[(Vec<String>, Vec<String>)], n: usize) -> F {
    let (c, r) = toks
        .iter()
        .fold((0usize, 0usize), |(c, r), (h, rf)| (c + h.len(), r + rf.len()));
    if c == 0 {
        return F::zero();
    }
    let mut log_sum = F::zero();
    for order in 1..=n {
        let (num, den) = toks
            .iter()
            .map(|(h, rf)| clipped_matches(h, rf, order))
            .fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
        if num == 0 || den == 0 {
            return F::zero();
        }
        log_sum = log_sum + (F::from_usize(num).unwrap() / F::from_usize(den).unwrap()).ln();
    }
    let n_f = F::from_usize(n).unwrap();
    let bp = if c < r {
        (F::one() - F::from_usize(r).unwrap() / F::from_usize(c).unwrap()).exp()
    } else {
        F::one()
    };
    bp * (log_sum / n_f).exp()
}

pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const ROUGE_BETA: f64 = 1.2;

pub(crate) fn rouge_l_tokens<F: Scalar>(hyp: &[String], reference: &[String]) -> F {
    let lcs = lcs_len(hyp, reference);
    if lcs == 0 {
        return F::zero();
    }
    let l = F::from_usize(lcs).unwrap();
    let p = l / F::from_usize(hyp.len()).unwrap();
    let r = l / F::from_usize(reference.len()).unwrap();
    let b2 = F::from_f64(ROUGE_BETA * ROUGE_BETA).unwrap();
    (F::one() + b2) * p * r / (r + b2 * p)
}

/// Sentence ROUGE-L F-score with beta 1.2.
pub fn rouge_l<F: Scalar>(pair: &EvalPair) -> F {
    rouge_l_tokens(&eval_tokenize(&pair.hypothesis), &eval_tokenize(&pair.reference))
}

/// Mean sentence ROUGE-L over the corpus.
pub fn rouge_l_corpus<F: Scalar>(pairs: &[EvalPair]) -> Result<F, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    let sum = pairs.iter().fold(F::zero(), |acc, p| acc + rouge_l::<F>(p));
    Ok(sum / F::from_usize(pairs.len()).unwrap())
}
