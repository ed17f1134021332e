//! Few-shot multi-hop question generation as a circuit of small reasoning
//! tasks run by a sequence-to-sequence model.
//!
//! The crate covers the data model and annotation checks ([`annotation`]),
//! common-entity extraction ([`entities`]), prompt rendering ([`prompts`]),
//! circuit routing and execution ([`routing`], [`circuit`]), training
//! mixture construction ([`mixture`]), generation backends ([`backends`])
//! and automatic evaluation ([`metrics`]).

pub mod annotation;
pub mod backends;
pub mod circuit;
pub mod entities;
pub mod metrics;
pub mod mixture;
pub mod prompts;
pub mod rng;
pub mod routing;
pub mod types;

/// Written into every emitted file's metadata.
pub const VERSION: &str = concat!("reasoning-circuits ", env!("CARGO_PKG_VERSION"));

/// Scalar used by the concrete metric entry points.
pub type Score = f64;

/// Metric report at the default precision.
pub type Report = metrics::MetricReport<Score>;

pub use circuit::{run_circuit, CircuitTrace, ConfusedPolicy, RunConfig, RunError, ValidatorMode};
pub use prompts::{SentinelConfig, TaskId};
pub use types::{AnnotatedExample, ContextMode, GoldExample, MqgInput, Passage, PassageIndex, QuestionType};
