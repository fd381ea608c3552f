//! Dataset statistics, reference-manifest integrity checks and relation /
//! argument-type co-occurrence analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Corpus, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub documents: u64,
    pub sentences: u64,
    pub tokens: u64,
    pub entities: u64,
    pub relations: u64,
}

impl SplitCounts {
    fn add(&mut self, other: &SplitCounts) {
        self.documents += other.documents;
        self.sentences += other.sentences;
        self.tokens += other.tokens;
        self.entities += other.entities;
        self.relations += other.relations;
    }

    fn fields(&self) -> [(&'static str, u64); 5] {
        [
            ("documents", self.documents),
            ("sentences", self.sentences),
            ("tokens", self.tokens),
            ("entities", self.entities),
            ("relations", self.relations),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeTriple {
    pub relation_type: String,
    pub head_type: String,
    pub tail_type: String,
}

/// Relation instance counts per (relation type, head type, tail type).
pub type Cooccurrence = BTreeMap<TypeTriple, u64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceEntry {
    #[serde(flatten)]
    pub types: TypeTriple,
    pub count: u64,
}

mod cooccurrence_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &Cooccurrence, s: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<CooccurrenceEntry> = map
            .iter()
            .map(|(k, &count)| CooccurrenceEntry {
                types: k.clone(),
                count,
            })
            .collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Cooccurrence, D::Error> {
        let list = Vec::<CooccurrenceEntry>::deserialize(d)?;
        Ok(list.into_iter().map(|e| (e.types, e.count)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub name: String,
    pub split: Option<String>,
    pub counts: SplitCounts,
    pub entity_types: BTreeMap<String, u64>,
    pub relation_types: BTreeMap<String, u64>,
    /// Number of sentences holding exactly `k` entity mentions, keyed by `k`.
    pub entities_per_sentence: BTreeMap<usize, u64>,
    pub relations_per_sentence: BTreeMap<usize, u64>,
    pub zero_relation_sentences: u64,
    pub zero_relation_fraction: f64,
    /// Mention pairs whose spans share at least one token.
    pub overlapping_mentions: u64,
    /// Mention pairs where one span contains the other (a subset of the
    /// overlapping pairs).
    pub nested_mentions: u64,
    #[serde(with = "cooccurrence_list")]
    pub cooccurrence: Cooccurrence,
}

impl StatsReport {
    fn empty(name: &str, split: Option<String>) -> Self {
        Self {
            name: name.to_owned(),
            split,
            counts: SplitCounts::default(),
            entity_types: BTreeMap::new(),
            relation_types: BTreeMap::new(),
            entities_per_sentence: BTreeMap::new(),
            relations_per_sentence: BTreeMap::new(),
            zero_relation_sentences: 0,
            zero_relation_fraction: 0.0,
            overlapping_mentions: 0,
            nested_mentions: 0,
            cooccurrence: Cooccurrence::new(),
        }
    }

    fn absorb(&mut self, other: &StatsReport) {
        self.counts.add(&other.counts);
        for (dst, src) in [
            (&mut self.entity_types, &other.entity_types),
            (&mut self.relation_types, &other.relation_types),
        ] {
            for (k, v) in src {
                *dst.entry(k.clone()).or_default() += v;
            }
        }
        for (dst, src) in [
            (&mut self.entities_per_sentence, &other.entities_per_sentence),
            (&mut self.relations_per_sentence, &other.relations_per_sentence),
        ] {
            for (k, v) in src {
                *dst.entry(*k).or_default() += v;
            }
        }
        for (k, v) in &other.cooccurrence {
            *self.cooccurrence.entry(k.clone()).or_default() += v;
        }
        self.zero_relation_sentences += other.zero_relation_sentences;
        self.overlapping_mentions += other.overlapping_mentions;
        self.nested_mentions += other.nested_mentions;
        self.refresh_fraction();
    }

    fn refresh_fraction(&mut self) {
        self.zero_relation_fraction = if self.counts.sentences == 0 {
            0.0
        } else {
            self.zero_relation_sentences as f64 / self.counts.sentences as f64
        };
    }

    /// Combines per-split reports into one. The result carries no split and is
    /// checked against a manifest's `total` entry.
    pub fn merge<'a>(name: &str, reports: impl IntoIterator<Item = &'a StatsReport>) -> StatsReport {
        let mut out = StatsReport::empty(name, None);
        for r in reports {
            out.absorb(r);
        }
        out
    }
}

fn add_sentence(report: &mut StatsReport, s: &Sentence) {
    let c = &mut report.counts;
    c.sentences += 1;
    c.tokens += s.tokens.len() as u64;
    c.entities += s.entities.len() as u64;
    c.relations += s.relations.len() as u64;
    for m in &s.entities {
        *report.entity_types.entry(m.entity_type.clone()).or_default() += 1;
    }
    for r in &s.relations {
        *report.relation_types.entry(r.relation_type.clone()).or_default() += 1;
    }
    *report.entities_per_sentence.entry(s.entities.len()).or_default() += 1;
    *report.relations_per_sentence.entry(s.relations.len()).or_default() += 1;
    if s.relations.is_empty() {
        report.zero_relation_sentences += 1;
    }
    for (i, a) in s.entities.iter().enumerate() {
        for b in &s.entities[i + 1..] {
            if a.overlaps(b) {
                report.overlapping_mentions += 1;
                if a.contains(b) || b.contains(a) {
                    report.nested_mentions += 1;
                }
            }
        }
    }
    add_cooccurrence(&mut report.cooccurrence, s);
}

fn add_cooccurrence(map: &mut Cooccurrence, s: &Sentence) {
    for r in &s.relations {
        let (Some(h), Some(t)) = (s.mention(&r.head), s.mention(&r.tail)) else {
            continue;
        };
        *map.entry(TypeTriple {
            relation_type: r.relation_type.clone(),
            head_type: h.entity_type.clone(),
            tail_type: t.entity_type.clone(),
        })
        .or_default() += 1;
    }
}

pub fn compute_stats(corpus: &Corpus) -> StatsReport {
    let mut report = StatsReport::empty(&corpus.name, corpus.split.clone());
    for doc in &corpus.docs {
        let mut partial = StatsReport::empty(&corpus.name, None);
        partial.counts.documents = 1;
        for s in &doc.sentences {
            add_sentence(&mut partial, s);
        }
        report.absorb(&partial);
    }
    report
}

/// Counts every relation instance (duplicates included) by relation type and
/// ordered argument types.
pub fn cooccurrence_matrix(corpus: &Corpus) -> Cooccurrence {
    let mut map = Cooccurrence::new();
    for (_, _, s) in corpus.sentences() {
        add_cooccurrence(&mut map, s);
    }
    map
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingComplexity {
    /// Distinct (head type, tail type) pairs seen with each relation type.
    pub pairs_per_relation: BTreeMap<String, usize>,
    /// Argument type pairs used by more than one relation type.
    pub shared_pairs: Vec<(String, String)>,
    /// Every relation type has exactly one argument type pair and no pair is
    /// shared between relation types.
    pub bijective: bool,
}

pub fn mapping_complexity(coocc: &Cooccurrence) -> MappingComplexity {
    let mut pairs: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
    let mut owners: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for (k, &n) in coocc {
        if n == 0 {
            continue;
        }
        let pair = (k.head_type.clone(), k.tail_type.clone());
        pairs.entry(k.relation_type.clone()).or_default().insert(pair.clone());
        owners.entry(pair).or_default().insert(k.relation_type.clone());
    }
    let pairs_per_relation: BTreeMap<String, usize> = pairs.into_iter().map(|(r, p)| (r, p.len())).collect();
    let shared_pairs: Vec<(String, String)> = owners
        .into_iter()
        .filter(|(_, rels)| rels.len() > 1)
        .map(|(p, _)| p)
        .collect();
    let bijective = shared_pairs.is_empty() && pairs_per_relation.values().all(|&n| n == 1);
    MappingComplexity {
        pairs_per_relation,
        shared_pairs,
        bijective,
    }
}

/// Expected counts for one split; absent fields are not checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ManifestCounts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documents: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentences: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entities: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<u64>,
}

impl ManifestCounts {
    fn fields(&self) -> [(&'static str, Option<u64>); 5] {
        [
            ("documents", self.documents),
            ("sentences", self.sentences),
            ("tokens", self.tokens),
            ("entities", self.entities),
            ("relations", self.relations),
        ]
    }
}

impl From<SplitCounts> for ManifestCounts {
    fn from(c: SplitCounts) -> Self {
        Self {
            documents: Some(c.documents),
            sentences: Some(c.sentences),
            tokens: Some(c.tokens),
            entities: Some(c.entities),
            relations: Some(c.relations),
        }
    }
}

/// Published dataset counts used as an integrity oracle. Splits are keyed by
/// name; `total` covers the whole dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceManifest {
    pub source: String,
    #[serde(default)]
    pub all_relational: bool,
    pub splits: BTreeMap<String, ManifestCounts>,
}

pub const TOTAL_SPLIT: &str = "total";

const CONLL04_MANIFEST: &str = include_str!("../data/conll04.manifest.json");
const ACE05_MANIFEST: &str = include_str!("../data/ace05.manifest.json");

impl ReferenceManifest {
    /// Manifest derived from a report, so that the report checks clean
    /// against it.
    pub fn from_report(report: &StatsReport, source: impl Into<String>) -> Self {
        let split = report.split.clone().unwrap_or_else(|| TOTAL_SPLIT.to_owned());
        Self {
            source: source.into(),
            all_relational: report.counts.sentences > 0 && report.zero_relation_sentences == 0,
            splits: [(split, report.counts.into())].into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Manifests shipped with the crate: `conll04` and `ace05`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name.to_ascii_lowercase().as_str() {
            "conll04" => CONLL04_MANIFEST,
            "ace05" => ACE05_MANIFEST,
            _ => return None,
        };
        Some(Self::parse(text).expect("bundled manifest is valid"))
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["conll04", "ace05"]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub split: String,
    pub field: String,
    pub expected: u64,
    pub actual: u64,
    pub delta: i64,
}

/// Compares report counts with the manifest entry for the report's split
/// (`total` when the report has none). Comparison is exact.
pub fn check_integrity(report: &StatsReport, manifest: &ReferenceManifest) -> Result<Vec<Discrepancy>> {
    let split = report.split.as_deref().unwrap_or(TOTAL_SPLIT);
    let expected = manifest.splits.get(split).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "manifest has no entry for split {split:?} (available: {})",
            manifest.splits.keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })?;
    Ok(expected
        .fields()
        .into_iter()
        .zip(report.counts.fields())
        .filter_map(|((field, exp), (_, actual))| {
            let exp = exp?;
            (exp != actual).then(|| Discrepancy {
                split: split.to_owned(),
                field: field.to_owned(),
                expected: exp,
                actual,
                delta: actual as i64 - exp as i64,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationFinding {
    pub zero_relation_fraction: f64,
    pub suspicious: bool,
}

/// Flags a corpus with no relation-free sentences when the dataset is known
/// to contain some. `all_relational` comes from the dataset's manifest.
pub fn detect_truncation(report: &StatsReport, all_relational: bool) -> TruncationFinding {
    TruncationFinding {
        zero_relation_fraction: report.zero_relation_fraction,
        suspicious: report.counts.sentences > 0 && report.zero_relation_sentences == 0 && !all_relational,
    }
}

/// Statistics for one corpus together with whatever the integrity checks
/// found. This is what the `stats` command reports per input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsAudit {
    pub report: StatsReport,
    #[serde(default)]
    pub discrepancies: Vec<Discrepancy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationFinding>,
}

impl StatsAudit {
    /// Runs every check the manifest allows; without one only statistics
    /// are reported.
    pub fn new(report: StatsReport, manifest: Option<&ReferenceManifest>) -> Result<Self> {
        let (discrepancies, truncation) = match manifest {
            Some(m) => (check_integrity(&report, m)?, Some(detect_truncation(&report, m.all_relational))),
            None => (Vec::new(), None),
        };
        Ok(Self {
            report,
            discrepancies,
            truncation,
        })
    }

    pub fn has_findings(&self) -> bool {
        !self.discrepancies.is_empty() || self.truncation.as_ref().is_some_and(|t| t.suspicious)
    }
}
