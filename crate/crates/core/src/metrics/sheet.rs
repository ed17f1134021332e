//! Spreadsheet export for human rating of generated questions.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng;

pub const HEADER: [&str; 9] = [
    "id",
    "p1",
    "p2",
    "answer",
    "question",
    "multi_hop",
    "well_formed",
    "answerable",
    "answer_matching",
];

/// Allowed values per rating column, in header order after `question`.
pub const RATING_SCALES: [(&str, &[&str]); 4] = [
    ("multi_hop", &["yes", "no"]),
    ("well_formed", &["yes", "acceptable", "no"]),
    ("answerable", &["yes", "no"]),
    ("answer_matching", &["yes", "no"]),
];

/// One generated question with the context a rater needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetItem {
    pub id: String,
    pub p1: String,
    pub p2: String,
    pub answer: String,
    pub question: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SheetError {
    #[error("cannot sample {requested} questions from {available}")]
    TooMany { requested: usize, available: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Seeded sample of `n` items, kept in input order.
pub fn sample_items(items: &[SheetItem], n: usize, seed: u64) -> Result<Vec<&SheetItem>, SheetError> {
    if n > items.len() {
        return Err(SheetError::TooMany {
            requested: n,
            available: items.len(),
        });
    }
    let idx: Vec<usize> = (0..items.len()).collect();
    let mut picked = rng::shuffled_prefix(&idx, n, &mut rng::seeded(seed));
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| &items[i]).collect())
}

/// Writes the rating sheet with every field quoted and the rating columns
/// blank. Returns the number of data rows.
pub fn write_sheet<W: Write>(items: &[&SheetItem], out: W) -> Result<usize, SheetError> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Always)
        .from_writer(out);
    w.write_record(HEADER)?;
    for it in items {
        w.write_record([it.id.as_str(), &it.p1, &it.p2, &it.answer, &it.question, "", "", "", ""])?;
    }
    w.flush()?;
    Ok(items.len())
}

pub fn export_human_eval_sheet(
    items: &[SheetItem],
    n: usize,
    seed: u64,
    path: impl AsRef<Path>,
) -> Result<usize, SheetError> {
    let picked = sample_items(items, n, seed)?;
    let file = std::fs::File::create(path)?;
    write_sheet(&picked, std::io::BufWriter::new(file))
}
