//! Variable-renaming trigger poisoning of Devign-style corpora, and the
//! accuracy / attack-success metrics used to score a poisoned model.

mod corpus;
mod inject;
mod lexer;
mod metrics;

pub use corpus::{
    parse_jsonl, parse_records, read_jsonl, read_records, records_to_jsonl, to_jsonl, write_jsonl,
    CorpusSample, PoisonRecord,
};
pub use inject::{
    find_renameable, inject_trigger, poison_split, RenameScope, SplitOutcome, TriggerSpec,
    PLACEHOLDER_TRIGGERS,
};
pub use lexer::{is_c_keyword, is_identifier, tokenize_c, Token, TokenKind, C11_KEYWORDS};
pub use metrics::{
    eval_metrics, format_percent, parse_predictions, read_predictions, EvalCounts, EvalMetrics,
};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PoisonError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("sample {id}: no renameable identifier")]
    NoRenameableIdentifier { id: u64 },
    #[error("sample {id}: every trigger token already occurs in the source")]
    TriggerCollision { id: u64 },
    #[error("invalid poisoning rate {0}: must be in (0, 1]")]
    InvalidRate(f64),
    #[error("invalid trigger spec: {0}")]
    InvalidSpec(String),
    #[error("no prediction for sample {0}")]
    MissingPrediction(u64),
    #[error("duplicate sample id {0}")]
    DuplicateId(u64),
    #[error("clean test set is empty")]
    EmptyCleanSet,
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, PoisonError> {
    std::fs::read_to_string(path).map_err(|source| PoisonError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn check_label(label: i64, line: usize) -> Result<u8, PoisonError> {
    match label {
        0 | 1 => Ok(label as u8),
        other => Err(PoisonError::Line {
            line,
            reason: format!("label {other} is not 0 or 1"),
        }),
    }
}
