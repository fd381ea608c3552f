//! Canonical JSON annotation files and gold/prediction alignment.
//!
//! A canonical file looks like:
//!
//! ```json
//! {
//!   "schema": "sincere/1",
//!   "name": "conll04",
//!   "split": "test",
//!   "docs": [
//!     {
//!       "doc_key": "5121",
//!       "sentences": [
//!         {
//!           "tokens": ["John", "works", "for", "Acme", "."],
//!           "entities": [{"id": "e0", "start": 0, "end": 1, "type": "Peop"}],
//!           "relations": [{"head": "e0", "tail": "e1", "type": "Work_For"}]
//!         }
//!       ]
//!     }
//!   ]
//! }
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_corpus, Corpus, Document, ViolationKind};

pub const SCHEMA_VERSION: &str = "sincere/1";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CanonicalFile {
    schema: String,
    name: String,
    #[serde(default)]
    split: Option<String>,
    docs: Vec<Document>,
}

#[derive(Serialize)]
struct CanonicalRef<'a> {
    schema: &'a str,
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: &'a Option<String>,
    docs: &'a [Document],
}

/// Parses and validates a canonical annotation file from bytes.
pub fn parse_canonical(bytes: &[u8]) -> Result<Corpus> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Syntax {
        line: 0,
        column: e.valid_up_to(),
        message: format!("input is not valid UTF-8: {e}"),
    })?;
    // Syntax first, so malformed JSON reports a position rather than a path.
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let file: CanonicalFile = serde_path_to_error::deserialize(value).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if file.schema != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "schema".into(),
            message: format!("unsupported schema {:?}, expected {SCHEMA_VERSION:?}", file.schema),
        });
    }
    let corpus = Corpus {
        name: file.name,
        split: file.split,
        docs: file.docs,
    };
    let violations = validate_corpus(&corpus);
    if let Some(bounds) = violations.iter().find(|v| v.kind == ViolationKind::SpanOutOfBounds) {
        return Err(Error::Schema {
            path: bounds.location.clone(),
            message: bounds.detail.clone(),
        });
    }
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    Ok(corpus)
}

/// Reads a canonical file from any byte stream.
pub fn read_canonical_from<R: Read>(mut reader: R) -> Result<Corpus> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf).map_err(|source| Error::Io {
        path: "<stream>".into(),
        source,
    })?;
    parse_canonical(&buf)
}

pub fn read_canonical(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_canonical(&bytes)
}

/// Serializes a corpus to the canonical pretty-printed form.
pub fn to_canonical_string(corpus: &Corpus) -> String {
    let file = CanonicalRef {
        schema: SCHEMA_VERSION,
        name: &corpus.name,
        split: &corpus.split,
        docs: &corpus.docs,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("corpus serialization is infallible");
    s.push('\n');
    s
}

pub fn write_canonical_to<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    writer
        .write_all(to_canonical_string(corpus).as_bytes())
        .map_err(|source| Error::Io {
            path: "<stream>".into(),
            source,
        })
}

pub fn write_canonical(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_canonical_string(corpus)).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MismatchReason {
    MissingDoc,
    MissingSentence,
    ExtraSentence,
    /// A prediction document that gold does not contain.
    ExtraDoc,
    TokenMismatch { first_difference: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub doc_key: String,
    pub sentence: Option<usize>,
    pub reason: MismatchReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub matched_sentences: usize,
    pub mismatches: Vec<Mismatch>,
}

impl AlignmentReport {
    pub fn is_aligned(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Pairs gold and prediction sentences by `(doc_key, sentence index)` and
/// reports every place where they disagree.
pub fn align(gold: &Corpus, pred: &Corpus) -> AlignmentReport {
    let mut report = AlignmentReport::default();
    let pred_docs: std::collections::HashMap<&str, &Document> =
        pred.docs.iter().map(|d| (d.doc_key.as_str(), d)).collect();
    for g in &gold.docs {
        let Some(p) = pred_docs.get(g.doc_key.as_str()) else {
            report.mismatches.push(Mismatch {
                doc_key: g.doc_key.clone(),
                sentence: None,
                reason: MismatchReason::MissingDoc,
            });
            continue;
        };
        let n = g.sentences.len().max(p.sentences.len());
        for i in 0..n {
            let reason = match (g.sentences.get(i), p.sentences.get(i)) {
                (Some(gs), Some(ps)) if gs.tokens == ps.tokens => {
                    report.matched_sentences += 1;
                    continue;
                }
                (Some(gs), Some(ps)) => MismatchReason::TokenMismatch {
                    first_difference: gs
                        .tokens
                        .iter()
                        .zip(&ps.tokens)
                        .position(|(a, b)| a != b)
                        .unwrap_or_else(|| gs.tokens.len().min(ps.tokens.len())),
                },
                (Some(_), None) => MismatchReason::MissingSentence,
                (None, Some(_)) => MismatchReason::ExtraSentence,
                (None, None) => unreachable!(),
            };
            report.mismatches.push(Mismatch {
                doc_key: g.doc_key.clone(),
                sentence: Some(i),
                reason,
            });
        }
    }
    let gold_keys: std::collections::HashSet<&str> = gold.docs.iter().map(|d| d.doc_key.as_str()).collect();
    for p in pred.docs.iter().filter(|p| !gold_keys.contains(p.doc_key.as_str())) {
        report.mismatches.push(Mismatch {
            doc_key: p.doc_key.clone(),
            sentence: None,
            reason: MismatchReason::ExtraDoc,
        });
    }
    report
}
