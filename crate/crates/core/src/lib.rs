//! Detection and correction of token–label dataset artifacts in labeled
//! premise/hypothesis corpora.
//!
//! * [`corpus`] loads and writes JSONL/TSV datasets.
//! * [`tokenizer`] turns a record into its set of normalized tokens.
//! * [`stats`] counts token–label co-occurrences and computes `p*` and `z*`.
//! * [`audac`] up-samples minority-label records of the most biased tokens until
//!   their label distributions are uniform.
//! * [`evaluation`] scores external predictions on majority/minority subsets.
//! * [`report`] reads and writes the CSV/JSON report files.

pub mod audac;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod label;
pub mod report;
pub mod stats;
pub mod synth;
pub mod tokenizer;

pub use audac::{
    build_token_index, compute_targets, plan_correction, run_audac, run_audac_observed, run_audac_on_tokens,
    AudacParams, AudacReport, CorrectionPlan, IterationView, TokenIndex,
};
pub use corpus::{load_dataset, write_dataset, DataFormat, Dataset, LoadedDataset, Record};
pub use error::{Error, Result};
pub use evaluation::{
    accuracy, evaluation_summary, load_predictions, split_majority_minority, token_accuracy_table, PredictionSet,
    TokenAccuracyRow,
};
pub use label::{Label, LabelSet};
pub use stats::{compute_stats, count_token_labels, top_biased_tokens, CountBounds, TokenLabelCounts, TokenStats};
pub use tokenizer::{normalize_token, tokenize_record, TokenSet, TokenizerConfig, TokenizerMode};
