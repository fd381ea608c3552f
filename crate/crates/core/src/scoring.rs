//! Matching criteria and precision / recall / F1 for NER and RE.
//!
//! NER is always scored on typed spans. The criteria differ in how relation
//! arguments are matched:
//!
//! | criterion    | argument match                                   |
//! |--------------|--------------------------------------------------|
//! | `Strict`     | same span and same entity type                   |
//! | `Boundaries` | same span, type ignored                          |
//! | `LastToken`  | same last token, type ignored (diagnostic only)  |
//! | `Relaxed`    | at least one shared token and the gold type      |
//!
//! `Relaxed` additionally changes NER: a gold mention counts as found when a
//! prediction of the same type shares a token with it.
//!
//! Relations are deduplicated on their fully typed key first. Gold and
//! predicted relations are then paired one-to-one, so a criterion can only
//! ever add true positives relative to a stricter one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::align;
use crate::model::{orient, Corpus, Mention};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Strict,
    Boundaries,
    Relaxed,
    LastToken,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::Strict,
        Criterion::Boundaries,
        Criterion::Relaxed,
        Criterion::LastToken,
    ];

    /// `LastToken` reproduces a known evaluation mistake and is never a
    /// legitimate reporting setting.
    pub fn is_diagnostic(self) -> bool {
        matches!(self, Criterion::LastToken)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Strict => "strict",
            Criterion::Boundaries => "boundaries",
            Criterion::Relaxed => "relaxed",
            Criterion::LastToken => "last_token",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "strict" => Ok(Criterion::Strict),
            "boundaries" | "boundary" => Ok(Criterion::Boundaries),
            "relaxed" => Ok(Criterion::Relaxed),
            "last_token" | "lasttoken" => Ok(Criterion::LastToken),
            _ => Err(Error::InvalidArgument(format!("unknown criterion {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Average {
    #[default]
    Micro,
    Macro,
}

impl FromStr for Average {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "micro" => Ok(Average::Micro),
            "macro" => Ok(Average::Macro),
            _ => Err(Error::InvalidArgument(format!("unknown averaging {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub criterion: Criterion,
    #[serde(default)]
    pub average: Average,
    #[serde(default)]
    pub excluded_entity_types: BTreeSet<String>,
    #[serde(default)]
    pub excluded_relation_types: BTreeSet<String>,
    #[serde(default)]
    pub symmetric_types: BTreeSet<String>,
    /// Score even when gold and prediction sentences do not line up.
    #[serde(default)]
    pub allow_misaligned: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self::new(Criterion::Strict)
    }
}

impl ScoreConfig {
    pub fn new(criterion: Criterion) -> Self {
        Self {
            criterion,
            average: Average::Micro,
            excluded_entity_types: BTreeSet::new(),
            excluded_relation_types: BTreeSet::new(),
            symmetric_types: BTreeSet::new(),
            allow_misaligned: false,
        }
    }

    pub fn with_criterion(&self, criterion: Criterion) -> Self {
        Self {
            criterion,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

/// Per-type true/false positive and false negative counts.
pub type TypeCounts = BTreeMap<String, Counts>;

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean with `0/0 = 0`.
pub fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(c: Counts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        Self {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision,
            recall,
            f1: f1_of(precision, recall),
        }
    }

    pub fn counts(&self) -> Counts {
        Counts::new(self.tp, self.fp, self.fn_)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskReport {
    /// Aggregate scores. Counts are always summed over types; the ratios
    /// follow the configured averaging.
    pub overall: Prf,
    pub per_type: BTreeMap<String, Prf>,
    /// Types the macro average runs over: gold types left after exclusions.
    pub averaged_types: Vec<String>,
    /// Types that only occur in the predictions.
    pub spurious_types: Vec<String>,
}

impl TaskReport {
    fn build(counts: &TypeCounts, gold_types: &BTreeSet<String>, average: Average) -> Self {
        let per_type: BTreeMap<String, Prf> = counts.iter().map(|(t, c)| (t.clone(), Prf::from_counts(*c))).collect();
        let mut total = Counts::default();
        for c in counts.values() {
            total += *c;
        }
        let mut overall = Prf::from_counts(total);
        if average == Average::Macro {
            let n = gold_types.len();
            let mean = |f: fn(&Prf) -> f64| {
                if n == 0 {
                    0.0
                } else {
                    gold_types.iter().map(|t| per_type.get(t).map_or(0.0, f)).sum::<f64>() / n as f64
                }
            };
            overall.precision = mean(|p| p.precision);
            overall.recall = mean(|p| p.recall);
            overall.f1 = mean(|p| p.f1);
        }
        Self {
            overall,
            averaged_types: gold_types.iter().cloned().collect(),
            spurious_types: counts.keys().filter(|t| !gold_types.contains(*t)).cloned().collect(),
            per_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ScoreConfig,
    pub diagnostic: bool,
    /// Set for Relaxed RE, whose argument matching is a convention of this
    /// tool rather than an established definition.
    pub non_standard: bool,
    pub ner: TaskReport,
    pub re: TaskReport,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Sentence-local view of a mention used for matching.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Arg {
    start: usize,
    end: usize,
    entity_type: String,
}

impl Arg {
    fn of(m: &Mention) -> Self {
        Self {
            start: m.start,
            end: m.end,
            entity_type: m.entity_type.clone(),
        }
    }

    fn overlaps(&self, other: &Arg) -> bool {
        self.start < other.end && other.start < self.end
    }
}

type Loc<'a> = (&'a str, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Rel {
    relation_type: String,
    head: Arg,
    tail: Arg,
}

/// Argument identity under a projection criterion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ArgProj {
    Typed(usize, usize, String),
    Span(usize, usize),
    Last(usize),
}

fn project(arg: &Arg, criterion: Criterion) -> ArgProj {
    match criterion {
        Criterion::Strict => ArgProj::Typed(arg.start, arg.end, arg.entity_type.clone()),
        Criterion::Boundaries => ArgProj::Span(arg.start, arg.end),
        Criterion::LastToken => ArgProj::Last(arg.end - 1),
        Criterion::Relaxed => unreachable!("relaxed matching is not a projection"),
    }
}

fn ner_items<'a>(corpus: &'a Corpus, excluded: &BTreeSet<String>) -> BTreeMap<Loc<'a>, BTreeSet<Arg>> {
    let mut out: BTreeMap<Loc<'a>, BTreeSet<Arg>> = BTreeMap::new();
    for (doc, i, s) in corpus.sentences() {
        let set = out.entry((doc, i)).or_default();
        set.extend(
            s.entities
                .iter()
                .filter(|m| !excluded.contains(&m.entity_type))
                .map(Arg::of),
        );
    }
    out
}

fn re_items<'a>(
    corpus: &'a Corpus,
    excluded: &BTreeSet<String>,
    symmetric: &BTreeSet<String>,
) -> BTreeMap<Loc<'a>, BTreeSet<Rel>> {
    let mut out: BTreeMap<Loc<'a>, BTreeSet<Rel>> = BTreeMap::new();
    for (doc, i, s) in corpus.sentences() {
        let set = out.entry((doc, i)).or_default();
        for r in s.relations.iter().filter(|r| !excluded.contains(&r.relation_type)) {
            let (Some(h), Some(t)) = (s.mention(&r.head), s.mention(&r.tail)) else {
                continue;
            };
            let (head, tail) = orient(Arg::of(h), Arg::of(t), symmetric.contains(&r.relation_type));
            set.insert(Rel {
                relation_type: r.relation_type.clone(),
                head,
                tail,
            });
        }
    }
    out
}

fn entry<'m>(map: &'m mut TypeCounts, t: &str) -> &'m mut Counts {
    if !map.contains_key(t) {
        map.insert(t.to_owned(), Counts::default());
    }
    map.get_mut(t).unwrap()
}

fn ensure_aligned(gold: &Corpus, pred: &Corpus) -> Result<()> {
    let report = align(gold, pred);
    if report.is_aligned() {
        Ok(())
    } else {
        Err(Error::Misaligned(report))
    }
}

/// Per entity type NER counts. Only `Relaxed` differs from exact typed span
/// matching.
pub fn match_ner(gold: &Corpus, pred: &Corpus, criterion: Criterion) -> Result<TypeCounts> {
    ensure_aligned(gold, pred)?;
    Ok(count_ner(gold, pred, criterion, &BTreeSet::new()))
}

fn count_ner(gold: &Corpus, pred: &Corpus, criterion: Criterion, excluded: &BTreeSet<String>) -> TypeCounts {
    let gold = ner_items(gold, excluded);
    let pred = ner_items(pred, excluded);
    let empty = BTreeSet::new();
    let mut counts = TypeCounts::new();
    let locs: BTreeSet<&Loc> = gold.keys().chain(pred.keys()).collect();
    for loc in locs {
        let g = gold.get(loc).unwrap_or(&empty);
        let p = pred.get(loc).unwrap_or(&empty);
        match criterion {
            Criterion::Relaxed => {
                let hit = |a: &Arg, others: &BTreeSet<Arg>| {
                    others.iter().any(|b| b.entity_type == a.entity_type && a.overlaps(b))
                };
                for a in g {
                    let c = entry(&mut counts, &a.entity_type);
                    if hit(a, p) {
                        c.tp += 1;
                    } else {
                        c.fn_ += 1;
                    }
                }
                for b in p {
                    let c = entry(&mut counts, &b.entity_type);
                    if !hit(b, g) {
                        c.fp += 1;
                    }
                }
            }
            _ => {
                for a in g {
                    let c = entry(&mut counts, &a.entity_type);
                    if p.contains(a) {
                        c.tp += 1;
                    } else {
                        c.fn_ += 1;
                    }
                }
                for b in p.difference(g) {
                    entry(&mut counts, &b.entity_type).fp += 1;
                }
            }
        }
    }
    counts
}

/// Per relation type RE counts under `criterion`.
pub fn match_re(
    gold: &Corpus,
    pred: &Corpus,
    criterion: Criterion,
    symmetric_types: &BTreeSet<String>,
) -> Result<TypeCounts> {
    ensure_aligned(gold, pred)?;
    Ok(count_re(gold, pred, criterion, &BTreeSet::new(), symmetric_types))
}

fn count_re(
    gold: &Corpus,
    pred: &Corpus,
    criterion: Criterion,
    excluded: &BTreeSet<String>,
    symmetric: &BTreeSet<String>,
) -> TypeCounts {
    let gold = re_items(gold, excluded, symmetric);
    let pred = re_items(pred, excluded, symmetric);
    let empty = BTreeSet::new();
    let mut counts = TypeCounts::new();
    let locs: BTreeSet<&Loc> = gold.keys().chain(pred.keys()).collect();
    for loc in locs {
        let g = gold.get(loc).unwrap_or(&empty);
        let p = pred.get(loc).unwrap_or(&empty);
        let mut by_type: BTreeMap<&str, (Vec<&Rel>, Vec<&Rel>)> = BTreeMap::new();
        for r in g {
            by_type.entry(&r.relation_type).or_default().0.push(r);
        }
        for r in p {
            by_type.entry(&r.relation_type).or_default().1.push(r);
        }
        for (rtype, (g, p)) in by_type {
            let sym = symmetric.contains(rtype);
            let tp = match criterion {
                Criterion::Relaxed => {
                    max_matching(g.len(), p.len(), |i, j| relaxed_compatible(g[i], p[j], sym)) as u64
                }
                _ => projected_matches(&g, &p, criterion, sym),
            };
            let c = entry(&mut counts, rtype);
            c.tp += tp;
            c.fp += p.len() as u64 - tp;
            c.fn_ += g.len() as u64 - tp;
        }
    }
    counts
}

/// Under an equivalence criterion the maximum one-to-one matching pairs
/// `min(|gold|, |pred|)` members of every equivalence class.
fn projected_matches(gold: &[&Rel], pred: &[&Rel], criterion: Criterion, symmetric: bool) -> u64 {
    let key = |r: &Rel| orient(project(&r.head, criterion), project(&r.tail, criterion), symmetric);
    let mut classes: HashMap<(ArgProj, ArgProj), (u64, u64)> = HashMap::new();
    for r in gold {
        classes.entry(key(r)).or_default().0 += 1;
    }
    for r in pred {
        classes.entry(key(r)).or_default().1 += 1;
    }
    classes.values().map(|&(g, p)| g.min(p)).sum()
}

fn relaxed_arg(gold: &Arg, pred: &Arg) -> bool {
    gold.entity_type == pred.entity_type && gold.overlaps(pred)
}

fn relaxed_compatible(gold: &Rel, pred: &Rel, symmetric: bool) -> bool {
    (relaxed_arg(&gold.head, &pred.head) && relaxed_arg(&gold.tail, &pred.tail))
        || (symmetric && relaxed_arg(&gold.head, &pred.tail) && relaxed_arg(&gold.tail, &pred.head))
}

/// Size of a maximum bipartite matching (augmenting paths).
fn max_matching(left: usize, right: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    let adj: Vec<Vec<usize>> = (0..left).map(|i| (0..right).filter(|&j| edge(i, j)).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; right];

    fn augment(i: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }

    (0..left)
        .filter(|&i| {
            let mut seen = vec![false; right];
            augment(i, &adj, &mut owner, &mut seen)
        })
        .count()
}

fn gold_types(counts: &TypeCounts) -> BTreeSet<String> {
    counts
        .iter()
        .filter(|(_, c)| c.tp + c.fn_ > 0)
        .map(|(t, _)| t.clone())
        .collect()
}

/// Scores predictions against gold under one configuration.
pub fn score(gold: &Corpus, pred: &Corpus, config: &ScoreConfig) -> Result<EvalReport> {
    if !config.allow_misaligned {
        ensure_aligned(gold, pred)?;
    }
    let ner = count_ner(gold, pred, config.criterion, &config.excluded_entity_types);
    let re = count_re(
        gold,
        pred,
        config.criterion,
        &config.excluded_relation_types,
        &config.symmetric_types,
    );
    let ner_types = gold_types(&ner);
    let re_types = gold_types(&re);
    if ner_types.is_empty() && re_types.is_empty() {
        return Err(Error::NoScorableAnnotations);
    }

    let mut warnings = Vec::new();
    let entity_inventory = gold.entity_types();
    for t in config.excluded_entity_types.difference(&entity_inventory) {
        warnings.push(format!("excluded entity type {t:?} does not occur in gold"));
    }
    let relation_inventory = gold.relation_types();
    for t in config.excluded_relation_types.difference(&relation_inventory) {
        warnings.push(format!("excluded relation type {t:?} does not occur in gold"));
    }

    Ok(EvalReport {
        config: config.clone(),
        diagnostic: config.criterion.is_diagnostic(),
        non_standard: config.criterion == Criterion::Relaxed,
        ner: TaskReport::build(&ner, &ner_types, config.average),
        re: TaskReport::build(&re, &re_types, config.average),
        warnings,
    })
}

/// Runs [`score`] once per criterion, keeping everything else from `base`.
pub fn score_all_settings(
    gold: &Corpus,
    pred: &Corpus,
    base: &ScoreConfig,
) -> Result<BTreeMap<Criterion, EvalReport>> {
    if !base.allow_misaligned {
        ensure_aligned(gold, pred)?;
    }
    let relaxed = ScoreConfig {
        allow_misaligned: true,
        ..base.clone()
    };
    Criterion::ALL
        .iter()
        .map(|&c| {
            let mut report = score(gold, pred, &relaxed.with_criterion(c))?;
            report.config.allow_misaligned = base.allow_misaligned;
            Ok((c, report))
        })
        .collect()
}
