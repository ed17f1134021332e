//! Automatic evaluation of generated questions against references.

mod meteor;
mod ngram;
mod porter;
pub mod sheet;
mod tokenize;

use std::fmt::{Debug, Display};
use std::path::Path;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

pub use meteor::{align, chunk_count, meteor_lite, Alignment, STATE_BUDGET};
pub use ngram::{bleu, rouge_l, rouge_l_corpus, ROUGE_BETA};
pub use porter::stem;
pub use tokenize::{contains_span, eval_tokenize};

/// Floating-point type the metrics are computed in.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl<T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static> Scalar for T {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalPair {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
}

impl EvalPair {
    pub fn new(id: impl Into<String>, reference: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            reference: reference.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("no evaluation pairs")]
    Empty,
    #[error("BLEU order must be 1..=4, got {0}")]
    BadOrder(usize),
    #[error("pair '{0}' has an empty reference")]
    EmptyReference(String),
    #[error("predictions line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<F> {
    pub bleu1: F,
    pub bleu2: F,
    pub bleu3: F,
    pub bleu4: F,
    pub meteor: F,
    pub rouge_l: F,
    /// Mean of the six metrics above; the model-selection criterion.
    pub selection_score: F,
    pub n: usize,
}

impl<F: Scalar> MetricReport<F> {
    pub fn metrics(&self) -> [F; 6] {
        [
            self.bleu1,
            self.bleu2,
            self.bleu3,
            self.bleu4,
            self.meteor,
            self.rouge_l,
        ]
    }
}

/// All metrics over a set of pairs.
pub fn evaluate_run<F: Scalar>(pairs: &[EvalPair]) -> Result<MetricReport<F>, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(p) = pairs.iter().find(|p| p.reference.trim().is_empty()) {
        return Err(MetricError::EmptyReference(p.id.clone()));
    }
    let toks: Vec<_> = pairs
        .iter()
        .map(|p| (eval_tokenize(&p.hypothesis), eval_tokenize(&p.reference)))
        .collect();
    let n = F::from_usize(pairs.len()).unwrap();
    let mean = |f: fn(&[String], &[String]) -> F| toks.iter().fold(F::zero(), |a, (h, r)| a + f(h, r)) / n;
    let bleus: Vec<F> = (1..=4).map(|k| ngram::bleu_tokens(&toks, k)).collect();
    let meteor = mean(meteor::meteor_tokens::<F>);
    let rouge = mean(ngram::rouge_l_tokens::<F>);
    let sum = bleus.iter().fold(F::zero(), |a, &b| a + b) + meteor + rouge;
    Ok(MetricReport {
        bleu1: bleus[0],
        bleu2: bleus[1],
        bleu3: bleus[2],
        bleu4: bleus[3],
        meteor,
        rouge_l: rouge,
        selection_score: sum / F::from_usize(6).unwrap(),
        n: pairs.len(),
    })
}

/// Reads evaluation pairs from prediction JSON lines carrying at least
/// `id`, `reference` and `hypothesis`. Other fields are ignored.
pub fn parse_predictions(text: &str) -> Result<Vec<EvalPair>, MetricError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: EvalPair = serde_json::from_str(line).map_err(|e| MetricError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(pair);
    }
    Ok(out)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<EvalPair>, MetricError> {
    parse_predictions(&std::fs::read_to_string(path)?)
}
