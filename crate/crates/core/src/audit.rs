//! Executable checks for common reporting mistakes: comparing results
//! obtained under different settings, inflating scores with a looser
//! criterion, and averaging NER with RE.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Corpus;
use crate::scoring::{score, Average, Criterion, EvalReport, ScoreConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ner,
    Re,
}

/// Evaluation setting as stated by a published result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingClaim {
    Strict,
    Boundaries,
    Relaxed,
    LastToken,
    Unknown,
}

impl SettingClaim {
    pub fn criterion(self) -> Option<Criterion> {
        match self {
            SettingClaim::Strict => Some(Criterion::Strict),
            SettingClaim::Boundaries => Some(Criterion::Boundaries),
            SettingClaim::Relaxed => Some(Criterion::Relaxed),
            SettingClaim::LastToken => Some(Criterion::LastToken),
            SettingClaim::Unknown => None,
        }
    }

    /// NER has no argument matching, so only Relaxed differs from Strict.
    fn effective(self, task: Task) -> Self {
        match (task, self) {
            (Task::Ner, SettingClaim::Boundaries | SettingClaim::LastToken) => SettingClaim::Strict,
            _ => self,
        }
    }
}

impl From<Criterion> for SettingClaim {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::Strict => SettingClaim::Strict,
            Criterion::Boundaries => SettingClaim::Boundaries,
            Criterion::Relaxed => SettingClaim::Relaxed,
            Criterion::LastToken => SettingClaim::LastToken,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageClaim {
    Micro,
    Macro,
    Unknown,
}

impl AverageClaim {
    pub fn average(self) -> Option<Average> {
        match self {
            AverageClaim::Micro => Some(Average::Micro),
            AverageClaim::Macro => Some(Average::Macro),
            AverageClaim::Unknown => None,
        }
    }
}

/// One published score together with the setting it was obtained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultClaim {
    pub label: String,
    pub dataset: String,
    pub task: Task,
    /// F1 in `[0, 1]`; percentages are normalized when loaded.
    pub value: f64,
    pub claimed_setting: SettingClaim,
    pub claimed_average: AverageClaim,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub excluded_entity_types: BTreeSet<String>,
    /// Whether the final model was trained on train+dev. `None` when unstated.
    #[serde(default)]
    pub train_dev: Option<bool>,
    /// Non-standard partition or data variant; `None` means the usual split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub misreported_as_strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ResultClaim {
    pub fn new(label: &str, dataset: &str, task: Task, value: f64, setting: SettingClaim, average: AverageClaim) -> Self {
        Self {
            label: label.to_owned(),
            dataset: dataset.to_owned(),
            task,
            value,
            claimed_setting: setting,
            claimed_average: average,
            excluded_entity_types: BTreeSet::new(),
            train_dev: None,
            partition: None,
            misreported_as_strict: false,
            note: None,
        }
    }

    /// Rescales percentages to `[0, 1]` and rejects anything out of range.
    pub fn normalized(mut self) -> Result<Self> {
        if self.value > 1.0 && self.value <= 100.0 {
            self.value /= 100.0;
        }
        if !(0.0..=1.0).contains(&self.value) {
            return Err(Error::InvalidArgument(format!(
                "claim {:?} on {} has value {} outside [0, 1] and [0, 100]",
                self.label, self.dataset, self.value
            )));
        }
        Ok(self)
    }
}

const PUBLISHED_CLAIMS: &str = include_str!("../data/published_results.json");

pub fn parse_claims(text: &str) -> Result<Vec<ResultClaim>> {
    let mut de = serde_json::Deserializer::from_str(text);
    let claims: Vec<ResultClaim> = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    claims.into_iter().map(ResultClaim::normalized).collect()
}

pub fn load_claims(path: impl AsRef<Path>) -> Result<Vec<ResultClaim>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_claims(&text)
}

/// Published end-to-end RE results on ACE05, ACE04, CoNLL04, ADE and SciERC,
/// grouped by the setting they were actually obtained under.
pub fn bundled_claims() -> Vec<ResultClaim> {
    parse_claims(PUBLISHED_CLAIMS).expect("bundled claims are valid")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reason {
    DatasetMismatch,
    TaskMismatch,
    SettingMismatch { a: SettingClaim, b: SettingClaim },
    AverageMismatch,
    TypeSetMismatch,
    SplitMismatch,
    InsufficientlySpecified { field: String },
}

impl Reason {
    /// Reasons that stem from the evaluation setting rather than the data.
    pub fn is_setting_related(&self) -> bool {
        matches!(
            self,
            Reason::SettingMismatch { .. } | Reason::AverageMismatch | Reason::TypeSetMismatch
        )
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::DatasetMismatch => f.write_str("dataset mismatch"),
            Reason::TaskMismatch => f.write_str("task mismatch"),
            Reason::SettingMismatch { a, b } => write!(f, "setting mismatch ({a:?} vs {b:?})"),
            Reason::AverageMismatch => f.write_str("average mismatch"),
            Reason::TypeSetMismatch => f.write_str("type-set mismatch"),
            Reason::SplitMismatch => f.write_str("split mismatch"),
            Reason::InsufficientlySpecified { field } => write!(f, "insufficiently specified ({field})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub comparable: bool,
    pub reasons: Vec<Reason>,
    /// Differences worth knowing about that do not by themselves make the
    /// results incomparable, such as train+dev versus train-only training.
    pub notes: Vec<String>,
}

/// Decides whether two published results can be compared directly.
pub fn compare_claims(a: &ResultClaim, b: &ResultClaim) -> ComparisonVerdict {
    let mut reasons = Vec::new();
    let mut notes = Vec::new();
    if a.dataset != b.dataset {
        reasons.push(Reason::DatasetMismatch);
    }
    if a.task != b.task {
        reasons.push(Reason::TaskMismatch);
    }
    if a.claimed_setting == SettingClaim::Unknown || b.claimed_setting == SettingClaim::Unknown {
        reasons.push(Reason::InsufficientlySpecified {
            field: "setting".into(),
        });
    } else {
        let (sa, sb) = (a.claimed_setting.effective(a.task), b.claimed_setting.effective(b.task));
        if sa != sb {
            let (lo, hi) = if sa <= sb { (sa, sb) } else { (sb, sa) };
            reasons.push(Reason::SettingMismatch { a: lo, b: hi });
        }
    }
    if a.claimed_average == AverageClaim::Unknown || b.claimed_average == AverageClaim::Unknown {
        reasons.push(Reason::InsufficientlySpecified {
            field: "average".into(),
        });
    } else if a.claimed_average != b.claimed_average {
        reasons.push(Reason::AverageMismatch);
    }
    if a.excluded_entity_types != b.excluded_entity_types {
        reasons.push(Reason::TypeSetMismatch);
    }
    if a.partition != b.partition {
        reasons.push(Reason::SplitMismatch);
    }
    match (a.train_dev, b.train_dev) {
        (Some(x), Some(y)) if x != y => notes.push("train+dev versus train-only training".into()),
        (None, _) | (_, None) => notes.push("use of the dev set for training is unstated".into()),
        _ => {}
    }
    ComparisonVerdict {
        comparable: reasons.is_empty(),
        reasons,
        notes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub a: usize,
    pub b: usize,
    pub verdict: ComparisonVerdict,
}

/// Compares every pair of claims reported on the same dataset and task.
pub fn compare_all(claims: &[ResultClaim]) -> Vec<PairVerdict> {
    let mut out = Vec::new();
    for (i, a) in claims.iter().enumerate() {
        for (j, b) in claims.iter().enumerate().skip(i + 1) {
            if a.dataset == b.dataset && a.task == b.task {
                out.push(PairVerdict {
                    a: i,
                    b: j,
                    verdict: compare_claims(a, b),
                });
            }
        }
    }
    out
}

/// All pairwise verdicts plus the claims too underspecified to judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub verdicts: Vec<PairVerdict>,
    pub underspecified: Vec<usize>,
}

impl ComparisonReport {
    pub fn new(claims: &[ResultClaim]) -> Self {
        Self {
            verdicts: compare_all(claims),
            underspecified: underspecified(claims),
        }
    }

    pub fn non_comparable(&self) -> impl Iterator<Item = &PairVerdict> {
        self.verdicts.iter().filter(|v| !v.verdict.comparable)
    }

    pub fn has_findings(&self) -> bool {
        !self.underspecified.is_empty() || self.non_comparable().next().is_some()
    }
}

/// Claims that cannot be compared with anything because a setting field is
/// unknown.
pub fn underspecified(claims: &[ResultClaim]) -> Vec<usize> {
    claims
        .iter()
        .enumerate()
        .filter(|(_, c)| c.claimed_setting == SettingClaim::Unknown || c.claimed_average == AverageClaim::Unknown)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub strict_f1: f64,
    pub boundaries_f1: f64,
    pub absolute_gap: f64,
    /// `absolute_gap / strict_f1`; undefined when the Strict score is zero.
    pub relative_overestimation: Option<f64>,
}

impl GapReport {
    pub fn from_scores(strict_f1: f64, boundaries_f1: f64) -> Self {
        let absolute_gap = boundaries_f1 - strict_f1;
        Self {
            strict_f1,
            boundaries_f1,
            absolute_gap,
            relative_overestimation: (strict_f1 > 0.0).then(|| absolute_gap / strict_f1),
        }
    }
}

/// Strict versus Boundaries RE F1 for the same predictions. The criterion in
/// `config` is ignored; everything else applies to both runs.
pub fn gap(gold: &Corpus, pred: &Corpus, config: &ScoreConfig) -> Result<GapReport> {
    let strict = score(gold, pred, &config.with_criterion(Criterion::Strict))?;
    if strict.re.averaged_types.is_empty() {
        return Err(Error::NoScorableAnnotations);
    }
    let boundaries = score(gold, pred, &config.with_criterion(Criterion::Boundaries))?;
    Ok(GapReport::from_scores(strict.re.overall.f1, boundaries.re.overall.f1))
}

pub const DEFAULT_FINGERPRINT_TOLERANCE: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerprintVerdict {
    /// The claimed setting reproduces the reported value.
    Consistent,
    /// Only settings other than the claimed one reproduce it.
    Mismatch,
    /// Every setting reproduces it; nothing can be concluded.
    Indeterminate,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub reported: f64,
    pub tolerance: f64,
    pub scores: BTreeMap<Criterion, f64>,
    pub consistent: BTreeSet<Criterion>,
    pub mismatch_with_claim: bool,
    pub verdict: FingerprintVerdict,
}

/// Finds which criteria reproduce a reported score on the given predictions.
///
/// Averaging and excluded types are taken from the claim (micro when the
/// claim leaves averaging unknown).
pub fn fingerprint_setting(gold: &Corpus, pred: &Corpus, reported: &ResultClaim, tolerance: f64) -> Result<Fingerprint> {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tolerance}")));
    }
    let base = ScoreConfig {
        average: reported.claimed_average.average().unwrap_or_default(),
        excluded_entity_types: reported.excluded_entity_types.clone(),
        ..ScoreConfig::default()
    };
    let mut scores = BTreeMap::new();
    for c in Criterion::ALL {
        let r = score(gold, pred, &base.with_criterion(c))?;
        let f1 = match reported.task {
            Task::Ner => r.ner.overall.f1,
            Task::Re => r.re.overall.f1,
        };
        scores.insert(c, f1);
    }
    let consistent: BTreeSet<Criterion> = scores
        .iter()
        .filter(|(_, &f1)| (f1 - reported.value).abs() <= tolerance)
        .map(|(&c, _)| c)
        .collect();
    let claimed = reported.claimed_setting.criterion();
    let mismatch_with_claim = !consistent.is_empty() && claimed.is_some_and(|c| !consistent.contains(&c));
    let verdict = if consistent.is_empty() {
        FingerprintVerdict::NoMatch
    } else if consistent.len() == Criterion::ALL.len() {
        FingerprintVerdict::Indeterminate
    } else if mismatch_with_claim {
        FingerprintVerdict::Mismatch
    } else {
        FingerprintVerdict::Consistent
    };
    Ok(Fingerprint {
        reported: reported.value,
        tolerance,
        scores,
        consistent,
        mismatch_with_claim,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NerReAverage {
    pub value: f64,
    /// Always set: NER quality is already part of end-to-end RE, so the mean
    /// counts it twice.
    pub discouraged: bool,
}

pub fn ner_re_average(report: &EvalReport) -> NerReAverage {
    NerReAverage {
        value: (report.ner.overall.f1 + report.re.overall.f1) / 2.0,
        discouraged: true,
    }
}
