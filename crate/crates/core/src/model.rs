//! In-memory representation of annotated corpora.
//!
//! Token offsets are 0-based and end-exclusive everywhere: a mention covering
//! the first two tokens of a sentence has `start = 0, end = 2`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A typed entity mention over a token span of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub id: String,
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub entity_type: String,
}

impl Mention {
    pub fn new(id: impl Into<String>, start: usize, end: usize, entity_type: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            start,
            end,
            entity_type: entity_type.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the last token covered by the mention.
    pub fn last_token(&self) -> usize {
        self.end.saturating_sub(1)
    }

    /// True when the two spans share at least one token.
    pub fn overlaps(&self, other: &Mention) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains(&self, other: &Mention) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// A directed, typed relation between two mentions of the same sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationMention {
    pub head: String,
    pub tail: String,
    #[serde(rename = "type")]
    pub relation_type: String,
}

impl RelationMention {
    pub fn new(head: impl Into<String>, tail: impl Into<String>, relation_type: impl Into<String>) -> Self {
        Self {
            head: head.into(),
            tail: tail.into(),
            relation_type: relation_type.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub entities: Vec<Mention>,
    #[serde(default)]
    pub relations: Vec<RelationMention>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Self {
        Self {
            tokens,
            ..Default::default()
        }
    }

    /// Builds a sentence from whitespace-separated tokens.
    pub fn from_text(text: &str) -> Self {
        Self::new(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.entities.iter().find(|m| m.id == id)
    }

    /// Copy of the sentence with all annotations removed.
    pub fn stripped(&self) -> Self {
        Self::new(self.tokens.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_key: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn new(doc_key: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Self {
            doc_key: doc_key.into(),
            sentences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub docs: Vec<Document>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, docs: Vec<Document>) -> Self {
        Self {
            name: name.into(),
            split: None,
            docs,
        }
    }

    pub fn with_split(mut self, split: impl Into<String>) -> Self {
        self.split = Some(split.into());
        self
    }

    /// Iterates `(doc_key, sentence index, sentence)` in corpus order.
    pub fn sentences(&self) -> impl Iterator<Item = (&str, usize, &Sentence)> {
        self.docs.iter().flat_map(|d| {
            d.sentences
                .iter()
                .enumerate()
                .map(move |(i, s)| (d.doc_key.as_str(), i, s))
        })
    }

    pub fn sentence_count(&self) -> usize {
        self.docs.iter().map(|d| d.sentences.len()).sum()
    }

    /// Copy of the corpus with every annotation removed, tokens kept.
    pub fn stripped(&self) -> Self {
        Self {
            name: self.name.clone(),
            split: self.split.clone(),
            docs: self
                .docs
                .iter()
                .map(|d| Document::new(d.doc_key.clone(), d.sentences.iter().map(Sentence::stripped).collect()))
                .collect(),
        }
    }

    pub fn entity_types(&self) -> BTreeSet<String> {
        self.sentences()
            .flat_map(|(_, _, s)| s.entities.iter().map(|m| m.entity_type.clone()))
            .collect()
    }

    pub fn relation_types(&self) -> BTreeSet<String> {
        self.sentences()
            .flat_map(|(_, _, s)| s.relations.iter().map(|r| r.relation_type.clone()))
            .collect()
    }
}

/// Identity of an entity mention for scoring purposes.
///
/// `entity_type` is `Some` for typed keys and `None` when types are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityKey {
    pub doc_key: String,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub entity_type: Option<String>,
}

impl EntityKey {
    pub fn of(doc_key: &str, sentence: usize, mention: &Mention, typed: bool) -> Self {
        Self {
            doc_key: doc_key.to_owned(),
            sentence,
            start: mention.start,
            end: mention.end,
            entity_type: typed.then(|| mention.entity_type.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationKey {
    pub doc_key: String,
    pub sentence: usize,
    pub relation_type: String,
    pub head: EntityKey,
    pub tail: EntityKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyDocKey,
    DuplicateDocKey,
    EmptyTokens,
    EmptyMentionId,
    DuplicateMentionId,
    SpanEmpty,
    SpanOutOfBounds,
    DanglingEndpoint,
    SelfRelation,
}

/// A corpus invariant violation with the location it was found at.
///
/// Locations read `doc_key/sent{i}` optionally followed by the entity id or
/// `rel{j}` for the j-th relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.location, self.detail)
    }
}

/// Collects every invariant violation in the corpus. An empty result means the
/// corpus is well-formed.
pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_docs = HashSet::new();
    for (d, doc) in corpus.docs.iter().enumerate() {
        if doc.doc_key.is_empty() {
            out.push(Violation {
                kind: ViolationKind::EmptyDocKey,
                location: format!("docs[{d}]"),
                detail: "document key is empty".into(),
            });
        } else if !seen_docs.insert(doc.doc_key.as_str()) {
            out.push(Violation {
                kind: ViolationKind::DuplicateDocKey,
                location: doc.doc_key.clone(),
                detail: format!("doc_key {:?} appears more than once", doc.doc_key),
            });
        }
        for (i, sent) in doc.sentences.iter().enumerate() {
            validate_sentence(&format!("{}/sent{i}", doc.doc_key), sent, &mut out);
        }
    }
    out
}

fn validate_sentence(loc: &str, sent: &Sentence, out: &mut Vec<Violation>) {
    let n = sent.tokens.len();
    if n == 0 {
        out.push(Violation {
            kind: ViolationKind::EmptyTokens,
            location: loc.to_owned(),
            detail: "sentence has no tokens".into(),
        });
    }
    let mut ids = HashSet::new();
    for (k, m) in sent.entities.iter().enumerate() {
        let here = if m.id.is_empty() {
            format!("{loc}/entities[{k}]")
        } else {
            format!("{loc}/{}", m.id)
        };
        if m.id.is_empty() {
            out.push(Violation {
                kind: ViolationKind::EmptyMentionId,
                location: here.clone(),
                detail: "mention id is empty".into(),
            });
        } else if !ids.insert(m.id.as_str()) {
            out.push(Violation {
                kind: ViolationKind::DuplicateMentionId,
                location: here.clone(),
                detail: format!("mention id {:?} is not unique in the sentence", m.id),
            });
        }
        if m.start >= m.end {
            out.push(Violation {
                kind: ViolationKind::SpanEmpty,
                location: here,
                detail: format!("span [{}, {}) is empty", m.start, m.end),
            });
        } else if m.end > n {
            out.push(Violation {
                kind: ViolationKind::SpanOutOfBounds,
                location: here,
                detail: format!("span [{}, {}) exceeds {} tokens", m.start, m.end, n),
            });
        }
    }
    for (j, r) in sent.relations.iter().enumerate() {
        let here = format!("{loc}/rel{j}");
        for endpoint in [&r.head, &r.tail] {
            if !ids.contains(endpoint.as_str()) {
                out.push(Violation {
                    kind: ViolationKind::DanglingEndpoint,
                    location: here.clone(),
                    detail: format!("endpoint {endpoint:?} does not name a mention in the sentence"),
                });
            }
        }
        if r.head == r.tail {
            out.push(Violation {
                kind: ViolationKind::SelfRelation,
                location: here,
                detail: format!("relation links {:?} to itself", r.head),
            });
        }
    }
}

/// Deduplicated entity keys of the corpus, typed or untyped.
pub fn entity_key_set(corpus: &Corpus, typed: bool) -> BTreeSet<EntityKey> {
    corpus
        .sentences()
        .flat_map(|(doc, i, s)| s.entities.iter().map(move |m| EntityKey::of(doc, i, m, typed)))
        .collect()
}

/// Orders a relation's arguments; symmetric relation types get an
/// order-independent form.
pub(crate) fn orient<T: Ord>(head: T, tail: T, symmetric: bool) -> (T, T) {
    if symmetric && tail < head {
        (tail, head)
    } else {
        (head, tail)
    }
}

/// Deduplicated relation keys. Relation types listed in `symmetric_types` have
/// their arguments canonicalized so `(a, b)` and `(b, a)` collapse.
pub fn relation_key_set(
    corpus: &Corpus,
    typed_args: bool,
    symmetric_types: &BTreeSet<String>,
) -> BTreeSet<RelationKey> {
    let mut keys = BTreeSet::new();
    for (doc, i, s) in corpus.sentences() {
        for r in &s.relations {
            let (Some(h), Some(t)) = (s.mention(&r.head), s.mention(&r.tail)) else {
                continue;
            };
            let (head, tail) = orient(
                EntityKey::of(doc, i, h, typed_args),
                EntityKey::of(doc, i, t, typed_args),
                symmetric_types.contains(&r.relation_type),
            );
            keys.insert(RelationKey {
                doc_key: doc.to_owned(),
                sentence: i,
                relation_type: r.relation_type.clone(),
                head,
                tail,
            });
        }
    }
    keys
}
