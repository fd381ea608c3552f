//! Seeded synthetic predictions derived from gold.
//!
//! Every annotation draws from its own ChaCha stream keyed by
//! `(seed, document, sentence, annotation kind, annotation index)`, so the
//! outcome for one mention never depends on how many random numbers earlier
//! mentions consumed.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audit::{gap, GapReport};
use crate::error::{Error, Result};
use crate::model::{validate_corpus, Corpus, Mention, RelationMention, Sentence};
use crate::scoring::ScoreConfig;

/// Which entities a type swap may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapScope {
    #[default]
    All,
    /// Relation arguments keep their type, mimicking a model that has learned
    /// a one-to-one mapping from relation type to argument types.
    NonArguments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationProfile {
    pub seed: u64,
    #[serde(default)]
    pub p_ent_type_swap: f64,
    #[serde(default)]
    pub p_ent_boundary_shift: f64,
    #[serde(default)]
    pub p_ent_drop: f64,
    #[serde(default)]
    pub p_ent_spurious: f64,
    #[serde(default)]
    pub p_rel_type_swap: f64,
    #[serde(default)]
    pub p_rel_drop: f64,
    #[serde(default)]
    pub p_rel_spurious: f64,
    #[serde(default = "default_max_spurious_len")]
    pub max_spurious_len: usize,
    #[serde(default)]
    pub swap_scope: SwapScope,
}

fn default_max_spurious_len() -> usize {
    3
}

impl Default for PerturbationProfile {
    fn default() -> Self {
        Self::zero(0)
    }
}

impl PerturbationProfile {
    /// Profile that leaves gold untouched.
    pub fn zero(seed: u64) -> Self {
        Self {
            seed,
            p_ent_type_swap: 0.0,
            p_ent_boundary_shift: 0.0,
            p_ent_drop: 0.0,
            p_ent_spurious: 0.0,
            p_rel_type_swap: 0.0,
            p_rel_drop: 0.0,
            p_rel_spurious: 0.0,
            max_spurious_len: default_max_spurious_len(),
            swap_scope: SwapScope::All,
        }
    }

    pub fn probabilities(&self) -> [(&'static str, f64); 7] {
        [
            ("p_ent_type_swap", self.p_ent_type_swap),
            ("p_ent_boundary_shift", self.p_ent_boundary_shift),
            ("p_ent_drop", self.p_ent_drop),
            ("p_ent_spurious", self.p_ent_spurious),
            ("p_rel_type_swap", self.p_rel_type_swap),
            ("p_rel_drop", self.p_rel_drop),
            ("p_rel_spurious", self.p_rel_spurious),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in self.probabilities() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProfile(format!("{name} = {p} is not a probability")));
            }
        }
        if self.max_spurious_len == 0 {
            return Err(Error::InvalidProfile("max_spurious_len must be positive".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let profile: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Loads a JSON array of profiles.
pub fn load_grid(path: impl AsRef<Path>) -> Result<Vec<PerturbationProfile>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let grid: Vec<PerturbationProfile> = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    for p in &grid {
        p.validate()?;
    }
    Ok(grid)
}

#[derive(Clone, Copy)]
#[repr(u32)]
enum Stream {
    Entity = 1,
    Relation = 2,
    SpuriousEntity = 3,
    SpuriousRelation = 4,
}

fn stream(seed: u64, doc: usize, sentence: usize, kind: Stream, index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(doc as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(sentence as u64).to_le_bytes());
    key[24..28].copy_from_slice(&(kind as u32).to_le_bytes());
    key[28..32].copy_from_slice(&(index as u32).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn fires(rng: &mut ChaCha8Rng, p: f64) -> bool {
    // Always draw, so each decision consumes the same stream position.
    rng.gen::<f64>() < p
}

fn pick_other<'a>(rng: &mut ChaCha8Rng, inventory: &'a [String], current: &str) -> Option<&'a String> {
    let others: Vec<&String> = inventory.iter().filter(|t| *t != current).collect();
    others.choose(rng).copied()
}

fn fresh_id(taken: &HashSet<String>, prefix: &str) -> String {
    (0..)
        .map(|n| format!("{prefix}{n}"))
        .find(|id| !taken.contains(id))
        .expect("unbounded id space")
}

struct Inventory {
    entity_types: Vec<String>,
    relation_types: Vec<String>,
}

fn perturb_sentence(
    gold: &Sentence,
    doc: usize,
    sent: usize,
    profile: &PerturbationProfile,
    inv: &Inventory,
) -> Sentence {
    let n = gold.tokens.len();
    let arguments: HashSet<&str> = gold
        .relations
        .iter()
        .flat_map(|r| [r.head.as_str(), r.tail.as_str()])
        .collect();

    let mut entities = Vec::with_capacity(gold.entities.len());
    let mut dropped = HashSet::new();
    for (k, m) in gold.entities.iter().enumerate() {
        let mut rng = stream(profile.seed, doc, sent, Stream::Entity, k);
        let drop = fires(&mut rng, profile.p_ent_drop);
        let swap = fires(&mut rng, profile.p_ent_type_swap);
        let shift = fires(&mut rng, profile.p_ent_boundary_shift);
        if drop {
            dropped.insert(m.id.as_str());
            continue;
        }
        let mut out = m.clone();
        if swap {
            let allowed = profile.swap_scope == SwapScope::All || !arguments.contains(m.id.as_str());
            if allowed {
                if let Some(t) = pick_other(&mut rng, &inv.entity_types, &m.entity_type) {
                    out.entity_type = t.clone();
                }
            }
        } else if shift {
            let move_start = rng.gen_bool(0.5);
            let outward = rng.gen_bool(0.5);
            let (mut start, mut end) = (m.start, m.end);
            match (move_start, outward) {
                (true, true) => start = start.saturating_sub(1),
                (true, false) => start += 1,
                (false, true) => end = (end + 1).min(n),
                (false, false) => end = end.saturating_sub(1),
            }
            if start < end {
                out.start = start;
                out.end = end;
            }
        }
        entities.push(out);
    }

    let mut relations = Vec::with_capacity(gold.relations.len());
    for (j, r) in gold.relations.iter().enumerate() {
        if dropped.contains(r.head.as_str()) || dropped.contains(r.tail.as_str()) {
            continue;
        }
        let mut rng = stream(profile.seed, doc, sent, Stream::Relation, j);
        let drop = fires(&mut rng, profile.p_rel_drop);
        let swap = fires(&mut rng, profile.p_rel_type_swap);
        if drop {
            continue;
        }
        let mut out = r.clone();
        if swap {
            if let Some(t) = pick_other(&mut rng, &inv.relation_types, &r.relation_type) {
                out.relation_type = t.clone();
            }
        }
        relations.push(out);
    }

    let mut rng = stream(profile.seed, doc, sent, Stream::SpuriousEntity, 0);
    if fires(&mut rng, profile.p_ent_spurious) && !inv.entity_types.is_empty() {
        let taken: HashSet<(usize, usize)> = entities.iter().map(|m| (m.start, m.end)).collect();
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|s| (s + 1..=(s + profile.max_spurious_len).min(n)).map(move |e| (s, e)))
            .filter(|span| !taken.contains(span))
            .collect();
        if let Some(&(start, end)) = candidates.choose(&mut rng) {
            let ids: HashSet<String> = entities.iter().map(|m| m.id.clone()).collect();
            let t = inv.entity_types.choose(&mut rng).expect("non-empty inventory");
            entities.push(Mention::new(fresh_id(&ids, "spurious_e"), start, end, t.clone()));
        }
    }

    let mut rng = stream(profile.seed, doc, sent, Stream::SpuriousRelation, 0);
    if fires(&mut rng, profile.p_rel_spurious) && entities.len() >= 2 && !inv.relation_types.is_empty() {
        let i = rng.gen_range(0..entities.len());
        let mut j = rng.gen_range(0..entities.len() - 1);
        if j >= i {
            j += 1;
        }
        let t = inv.relation_types.choose(&mut rng).expect("non-empty inventory");
        relations.push(RelationMention::new(
            entities[i].id.clone(),
            entities[j].id.clone(),
            t.clone(),
        ));
    }

    Sentence {
        tokens: gold.tokens.clone(),
        entities,
        relations,
    }
}

/// Derives a prediction corpus from gold by injecting errors at the rates in
/// `profile`.
///
/// For each gold entity, in order: drop, else swap its type (uniformly among
/// the other gold entity types), else move one boundary by one token.
/// Relations lose their arguments with them; surviving ones may be dropped or
/// retyped. Each sentence may then receive one spurious entity and one
/// spurious relation.
pub fn perturb(gold: &Corpus, profile: &PerturbationProfile) -> Result<Corpus> {
    profile.validate()?;
    let violations = validate_corpus(gold);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let inv = Inventory {
        entity_types: gold.entity_types().into_iter().collect(),
        relation_types: gold.relation_types().into_iter().collect(),
    };
    let mut out = gold.clone();
    for (d, doc) in out.docs.iter_mut().enumerate() {
        for (s, sent) in doc.sentences.iter_mut().enumerate() {
            *sent = perturb_sentence(sent, d, s, profile, &inv);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub profile: PerturbationProfile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn sweep_one(gold: &Corpus, profile: &PerturbationProfile, config: &ScoreConfig) -> Result<GapReport> {
    let pred = perturb(gold, profile)?;
    gap(gold, &pred, config)
}

/// One Strict/Boundaries gap per profile. Failures are reported per row.
pub fn sweep(gold: &Corpus, grid: &[PerturbationProfile]) -> Vec<SweepRow> {
    let config = ScoreConfig::default();
    grid.par_iter()
        .map(|p| match sweep_one(gold, p, &config) {
            Ok(g) => SweepRow {
                profile: p.clone(),
                gap: Some(g),
                error: None,
            },
            Err(e) => SweepRow {
                profile: p.clone(),
                gap: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedSweepRow {
    pub profile: PerturbationProfile,
    pub seeds: u64,
    pub mean_strict_f1: f64,
    pub mean_boundaries_f1: f64,
    pub mean_absolute_gap: f64,
}

/// Like [`sweep`] but averages each row over `seeds` consecutive seeds
/// starting at the profile's own.
pub fn sweep_averaged(gold: &Corpus, grid: &[PerturbationProfile], seeds: u64) -> Result<Vec<AveragedSweepRow>> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("seed count must be positive".into()));
    }
    let config = ScoreConfig::default();
    grid.iter()
        .map(|p| {
            let gaps: Vec<GapReport> = (0..seeds)
                .into_par_iter()
                .map(|k| {
                    let profile = PerturbationProfile {
                        seed: p.seed.wrapping_add(k),
                        ..p.clone()
                    };
                    sweep_one(gold, &profile, &config)
                })
                .collect::<Result<_>>()?;
            let mean = |f: fn(&GapReport) -> f64| gaps.iter().map(f).sum::<f64>() / seeds as f64;
            Ok(AveragedSweepRow {
                profile: p.clone(),
                seeds,
                mean_strict_f1: mean(|g| g.strict_f1),
                mean_boundaries_f1: mean(|g| g.boundaries_f1),
                mean_absolute_gap: mean(|g| g.absolute_gap),
            })
        })
        .collect()
}

/// Entity and relation type inventories of the gold corpus, as used for
/// swaps and spurious annotations.
pub fn type_inventory(gold: &Corpus) -> (BTreeSet<String>, BTreeSet<String>) {
    (gold.entity_types(), gold.relation_types())
}
