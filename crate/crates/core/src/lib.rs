//! Evaluation toolkit for end-to-end relation extraction.
//!
//! Covers the canonical annotation format ([`ingest`]), the Strict /
//! Boundaries / Relaxed matching criteria plus a LastToken diagnostic
//! ([`scoring`]), dataset statistics and integrity checks ([`stats`]),
//! audits of published result claims ([`audit`]) and a seeded simulator that
//! derives prediction files from gold ([`perturb`]).

pub mod audit;
pub mod error;
pub mod ingest;
pub mod model;
pub mod perturb;
pub mod scoring;
pub mod stats;

pub use error::{Error, Result};
pub use ingest::{align, read_canonical, write_canonical, AlignmentReport};
pub use model::{
    entity_key_set, relation_key_set, validate_corpus, Corpus, Document, EntityKey, Mention, RelationKey,
    RelationMention, Sentence, Violation, ViolationKind,
};
pub use scoring::{score, score_all_settings, Average, Criterion, EvalReport, Prf, ScoreConfig};
