#![allow(dead_code)]

//! Fixture builders and a brute-force scoring oracle shared by the
//! integration tests. The oracle works directly from the raw annotations and
//! shares no code with the scorer.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sincere::perturb::{PerturbationProfile, SwapScope};
use sincere::scoring::{Criterion, TypeCounts};
use sincere::{Corpus, Document, Mention, RelationMention, Sentence};

pub fn sentence(n: usize, ents: &[(&str, usize, usize, &str)], rels: &[(&str, &str, &str)]) -> Sentence {
    let mut s = Sentence::new((0..n).map(|i| format!("w{i}")).collect());
    s.entities = ents.iter().map(|&(id, a, b, t)| Mention::new(id, a, b, t)).collect();
    s.relations = rels.iter().map(|&(h, t, r)| RelationMention::new(h, t, r)).collect();
    s
}

const ENT_TYPES: [&str; 4] = ["Peop", "Org", "Loc", "Other"];
const REL_TYPES: [&str; 3] = ["Work_For", "Live_In", "Kill"];

/// Random well-formed corpus with up to 10 sentences. Spans may overlap and
/// repeat, relations may be duplicated.
pub fn random_corpus(seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_docs = rng.gen_range(1..=3);
    let mut budget = 10usize;
    let mut docs = Vec::new();
    for d in 0..n_docs {
        let n_sent = rng.gen_range(1..=budget.min(4));
        budget -= n_sent;
        let sentences = (0..n_sent).map(|_| random_sentence(&mut rng)).collect();
        docs.push(Document::new(format!("doc{d}"), sentences));
        if budget == 0 {
            break;
        }
    }
    Corpus::new(format!("rand{seed}"), docs)
}

fn random_sentence(rng: &mut ChaCha8Rng) -> Sentence {
    let n = rng.gen_range(2..=12);
    let mut s = Sentence::new((0..n).map(|i| format!("t{i}")).collect());
    let n_ent = rng.gen_range(0..=5);
    for k in 0..n_ent {
        let start = rng.gen_range(0..n);
        let end = rng.gen_range(start + 1..=(start + 3).min(n));
        let t = ENT_TYPES.choose(rng).unwrap();
        s.entities.push(Mention::new(format!("e{k}"), start, end, *t));
    }
    if n_ent >= 2 {
        for _ in 0..rng.gen_range(0..=4) {
            let h = rng.gen_range(0..n_ent);
            let mut t = rng.gen_range(0..n_ent - 1);
            if t >= h {
                t += 1;
            }
            let r = REL_TYPES.choose(rng).unwrap();
            s.relations.push(RelationMention::new(format!("e{h}"), format!("e{t}"), *r));
        }
    }
    s
}

pub fn random_profile(seed: u64) -> PerturbationProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut p = || if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() * 0.6 };
    PerturbationProfile {
        seed,
        p_ent_type_swap: p(),
        p_ent_boundary_shift: p(),
        p_ent_drop: p(),
        p_ent_spurious: p(),
        p_rel_type_swap: p(),
        p_rel_drop: p(),
        p_rel_spurious: p(),
        max_spurious_len: 1 + (seed % 3) as usize,
        swap_scope: SwapScope::All,
    }
}

/// Prediction with the same tokens as `gold` but independently random
/// annotations.
pub fn random_prediction(gold: &Corpus, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    let mut pred = gold.stripped();
    for d in &mut pred.docs {
        for s in &mut d.sentences {
            let mut fresh = random_sentence(&mut rng);
            let n = s.tokens.len();
            fresh.entities.retain(|m| m.end <= n);
            let ids: BTreeSet<String> = fresh.entities.iter().map(|m| m.id.clone()).collect();
            fresh.relations.retain(|r| ids.contains(&r.head) && ids.contains(&r.tail));
            s.entities = fresh.entities;
            s.relations = fresh.relations;
        }
    }
    pred
}

// ---------------------------------------------------------------------------
// Oracle

type Span = (usize, usize, String);

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct OracleRel {
    rtype: String,
    head: Span,
    tail: Span,
}

fn sentence_index(c: &Corpus) -> BTreeMap<(String, usize), &Sentence> {
    let mut out = BTreeMap::new();
    for d in &c.docs {
        for (i, s) in d.sentences.iter().enumerate() {
            out.insert((d.doc_key.clone(), i), s);
        }
    }
    out
}

fn oracle_rels(s: &Sentence, symmetric: &BTreeSet<String>) -> Vec<OracleRel> {
    let span = |id: &str| {
        let m = s.entities.iter().find(|m| m.id == id).unwrap();
        (m.start, m.end, m.entity_type.clone())
    };
    let mut out: Vec<OracleRel> = Vec::new();
    for r in &s.relations {
        let (mut h, mut t) = (span(&r.head), span(&r.tail));
        if symmetric.contains(&r.relation_type) && t < h {
            std::mem::swap(&mut h, &mut t);
        }
        let rel = OracleRel {
            rtype: r.relation_type.clone(),
            head: h,
            tail: t,
        };
        if !out.contains(&rel) {
            out.push(rel);
        }
    }
    out
}

fn arg_match(g: &Span, p: &Span, c: Criterion) -> bool {
    match c {
        Criterion::Strict => g == p,
        Criterion::Boundaries => g.0 == p.0 && g.1 == p.1,
        Criterion::LastToken => g.1 - 1 == p.1 - 1,
        Criterion::Relaxed => g.2 == p.2 && g.0 < p.1 && p.0 < g.1,
    }
}

fn rel_match(g: &OracleRel, p: &OracleRel, c: Criterion, symmetric: bool) -> bool {
    g.rtype == p.rtype
        && ((arg_match(&g.head, &p.head, c) && arg_match(&g.tail, &p.tail, c))
            || (symmetric && arg_match(&g.head, &p.tail, c) && arg_match(&g.tail, &p.head, c)))
}

/// Largest one-to-one matching by exhaustive search.
fn best_matching(gold: &[&OracleRel], pred: &[&OracleRel], used: &mut Vec<bool>, i: usize, ok: &dyn Fn(&OracleRel, &OracleRel) -> bool) -> usize {
    if i == gold.len() {
        return 0;
    }
    let mut best = best_matching(gold, pred, used, i + 1, ok);
    for j in 0..pred.len() {
        if !used[j] && ok(gold[i], pred[j]) {
            used[j] = true;
            best = best.max(1 + best_matching(gold, pred, used, i + 1, ok));
            used[j] = false;
        }
    }
    best
}

pub fn oracle_re(gold: &Corpus, pred: &Corpus, c: Criterion, symmetric: &BTreeSet<String>) -> TypeCounts {
    let g_idx = sentence_index(gold);
    let p_idx = sentence_index(pred);
    let mut out: TypeCounts = BTreeMap::new();
    let keys: BTreeSet<_> = g_idx.keys().chain(p_idx.keys()).cloned().collect();
    for k in keys {
        let g = g_idx.get(&k).map(|s| oracle_rels(s, symmetric)).unwrap_or_default();
        let p = p_idx.get(&k).map(|s| oracle_rels(s, symmetric)).unwrap_or_default();
        let types: BTreeSet<String> = g.iter().chain(&p).map(|r| r.rtype.clone()).collect();
        for t in types {
            let gt: Vec<&OracleRel> = g.iter().filter(|r| r.rtype == t).collect();
            let pt: Vec<&OracleRel> = p.iter().filter(|r| r.rtype == t).collect();
            let sym = symmetric.contains(&t);
            let ok = move |a: &OracleRel, b: &OracleRel| rel_match(a, b, c, sym);
            let tp = best_matching(&gt, &pt, &mut vec![false; pt.len()], 0, &ok) as u64;
            let e = out.entry(t).or_default();
            e.tp += tp;
            e.fp += pt.len() as u64 - tp;
            e.fn_ += gt.len() as u64 - tp;
        }
    }
    out
}

pub fn oracle_ner(gold: &Corpus, pred: &Corpus, c: Criterion) -> TypeCounts {
    let g_idx = sentence_index(gold);
    let p_idx = sentence_index(pred);
    let mut out: TypeCounts = BTreeMap::new();
    let keys: BTreeSet<_> = g_idx.keys().chain(p_idx.keys()).cloned().collect();
    let spans = |s: Option<&&Sentence>| -> Vec<Span> {
        let mut v: Vec<Span> = Vec::new();
        for m in s.map(|s| s.entities.as_slice()).unwrap_or_default() {
            let x = (m.start, m.end, m.entity_type.clone());
            if !v.contains(&x) {
                v.push(x);
            }
        }
        v
    };
    for k in keys {
        let g = spans(g_idx.get(&k));
        let p = spans(p_idx.get(&k));
        let same = |a: &Span, b: &Span| match c {
            Criterion::Relaxed => a.2 == b.2 && a.0 < b.1 && b.0 < a.1,
            _ => a == b,
        };
        for a in &g {
            let e = out.entry(a.2.clone()).or_default();
            if p.iter().any(|b| same(a, b)) {
                e.tp += 1;
            } else {
                e.fn_ += 1;
            }
        }
        for b in &p {
            let e = out.entry(b.2.clone()).or_default();
            if !g.iter().any(|a| same(a, b)) {
                e.fp += 1;
            }
        }
    }
    out
}

/// F1 straight from summed counts.
pub fn micro_f1(counts: &TypeCounts) -> f64 {
    let (tp, fp, fn_) = counts
        .values()
        .fold((0u64, 0u64, 0u64), |a, c| (a.0 + c.tp, a.1 + c.fp, a.2 + c.fn_));
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

// ---------------------------------------------------------------------------
// Dataset-shaped fixtures

/// Relation signatures of CoNLL04: each relation type has one ordered pair of
/// argument types.
pub const CONLL04_SIGNATURES: [(&str, &str, &str); 5] = [
    ("Work_For", "Peop", "Org"),
    ("Kill", "Peop", "Peop"),
    ("OrgBased_In", "Org", "Loc"),
    ("Live_In", "Peop", "Loc"),
    ("Located_In", "Loc", "Loc"),
];

#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub sentences: usize,
    pub tokens: usize,
    pub entities: usize,
    pub relations: usize,
}

/// Deterministic CoNLL04-shaped split hitting the target counts exactly:
/// every sentence has at least two entities and one relation, each relation
/// type keeps its CoNLL04 argument signature, mentions never overlap.
pub fn conll04_like(split: &str, t: Target, doc_offset: usize) -> Corpus {
    assert!(t.relations >= t.sentences && t.entities >= 2 * t.relations);
    let extra_rel = t.relations - t.sentences;
    let extra_ent = t.entities - 2 * t.relations;
    let mut rel_counter = 0usize;
    let mut docs = Vec::new();
    for i in 0..t.sentences {
        let r = 1 + usize::from(i < extra_rel);
        let e = 2 * r + extra_ent / t.sentences + usize::from(i < extra_ent % t.sentences);
        let n = t.tokens / t.sentences + usize::from(i < t.tokens % t.sentences);
        assert!(n >= 2 * e, "sentence too short for its mentions");
        let mut s = Sentence::new((0..n).map(|k| format!("{split}{i}_{k}")).collect());
        let mut types = Vec::with_capacity(e);
        for k in 0..r {
            let (rt, h, tl) = CONLL04_SIGNATURES[rel_counter % CONLL04_SIGNATURES.len()];
            rel_counter += 1;
            types.push(h);
            types.push(tl);
            s.relations.push(RelationMention::new(format!("e{}", 2 * k), format!("e{}", 2 * k + 1), rt));
        }
        while types.len() < e {
            types.push("Other");
        }
        for (k, ty) in types.into_iter().enumerate() {
            s.entities.push(Mention::new(format!("e{k}"), 2 * k, 2 * k + 1, ty));
        }
        docs.push(Document::new(format!("{split}{}", doc_offset + i), vec![s]));
    }
    Corpus::new("conll04", docs).with_split(split)
}

pub const CONLL04_TARGETS: [(&str, Target); 3] = [
    ("train", Target { sentences: 922, tokens: 26_525, entities: 3_377, relations: 1_283 }),
    ("dev", Target { sentences: 231, tokens: 6_993, entities: 893, relations: 343 }),
    ("test", Target { sentences: 288, tokens: 8_336, entities: 1_079, relations: 422 }),
];

/// ACE05 argument type pairs of the PART-WHOLE relation used by the fixture.
pub const PART_WHOLE_PAIRS: [(&str, &str); 9] = [
    ("FAC", "FAC"),
    ("FAC", "GPE"),
    ("GPE", "GPE"),
    ("GPE", "LOC"),
    ("LOC", "LOC"),
    ("LOC", "GPE"),
    ("ORG", "ORG"),
    ("ORG", "GPE"),
    ("VEH", "VEH"),
];

const ACE_OTHER: [(&str, &str, &str); 8] = [
    ("PHYS", "PER", "LOC"),
    ("PHYS", "PER", "GPE"),
    ("PHYS", "PER", "FAC"),
    ("ORG-AFF", "PER", "ORG"),
    ("ORG-AFF", "PER", "GPE"),
    ("GEN-AFF", "PER", "GPE"),
    ("ART", "PER", "VEH"),
    ("PER-SOC", "PER", "PER"),
];

/// ACE05-shaped document set: seven entity types, relation types spanning
/// many argument pairs (PART-WHOLE over exactly nine), and a majority of
/// sentences without relations.
pub fn ace05_like(copies: usize) -> Corpus {
    let mut signatures: Vec<(&str, &str, &str)> = PART_WHOLE_PAIRS.iter().map(|&(h, t)| ("PART-WHOLE", h, t)).collect();
    signatures.extend(ACE_OTHER);
    let mut docs = Vec::new();
    for c in 0..copies {
        let mut sentences = Vec::new();
        for (k, &(rt, h, t)) in signatures.iter().enumerate() {
            let mut s = Sentence::new((0..8).map(|i| format!("a{c}_{k}_{i}")).collect());
            s.entities = vec![
                Mention::new("m0", 0, 2, h),
                Mention::new("m1", 4, 5, t),
                Mention::new("m2", 6, 7, "WEA"),
            ];
            s.relations = vec![RelationMention::new("m0", "m1", rt)];
            sentences.push(s);
            // Two relation-free sentences per relational one, one of them
            // with a lone mention.
            let mut quiet = Sentence::new((0..5).map(|i| format!("q{c}_{k}_{i}")).collect());
            quiet.entities = vec![Mention::new("m0", 1, 2, "PER")];
            sentences.push(quiet);
            sentences.push(Sentence::new((0..4).map(|i| format!("z{c}_{k}_{i}")).collect()));
        }
        docs.push(Document::new(format!("ace{c}"), sentences));
    }
    Corpus::new("ace05-like", docs)
}

/// Small CoNLL04-shaped corpus used for mapping-consistency checks.
pub fn conll04_small() -> Corpus {
    conll04_like(
        "test",
        Target {
            sentences: 40,
            tokens: 600,
            entities: 130,
            relations: 55,
        },
        0,
    )
}
