use std::path::PathBuf;

use thiserror::Error;

use crate::ingest::AlignmentReport;
use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("corpus is malformed: {}", summarize(.0))]
    Invalid(Vec<Violation>),

    #[error("gold and prediction corpora are not aligned ({} mismatches)", .0.mismatches.len())]
    Misaligned(AlignmentReport),

    #[error("no scorable annotations")]
    NoScorableAnnotations,

    #[error("invalid perturbation profile: {0}")]
    InvalidProfile(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn summarize(violations: &[Violation]) -> String {
    let mut s = violations
        .iter()
        .take(3)
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ");
    if violations.len() > 3 {
        s.push_str(&format!(" (+{} more)", violations.len() - 3));
    }
    s
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
