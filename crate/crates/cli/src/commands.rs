use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sincere::audit::{self, bundled_claims, fingerprint_setting, load_claims, ComparisonReport, FingerprintVerdict, ResultClaim};
use sincere::ingest::{read_canonical, to_canonical_string, AlignmentReport, MismatchReason};
use sincere::perturb::{self, load_grid, PerturbationProfile};
use sincere::scoring::TaskReport;
use sincere::stats::{compute_stats, mapping_complexity, ReferenceManifest, StatsAudit, StatsReport, TOTAL_SPLIT};
use sincere::{Corpus, Criterion, EvalReport, ScoreConfig, Violation};
use thiserror::Error;

use crate::table::{pct, Table};
use crate::{CheckArgs, CompareArgs, FingerprintArgs, Format, PerturbArgs, ProfileArgs, ScoreArgs, StatsArgs, SweepArgs};

pub struct Context {
    pub format: Format,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    Findings,
}

impl Status {
    fn from_findings(found: bool) -> Self {
        if found {
            Status::Findings
        } else {
            Status::Clean
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: sincere::Error,
    },
    #[error(transparent)]
    Core(#[from] sincere::Error),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
}

type CliResult<T> = Result<T, CliError>;

fn load(path: &Path) -> CliResult<Corpus> {
    read_canonical(path).map_err(|source| match source {
        e @ sincere::Error::Io { .. } => CliError::Core(e),
        source => CliError::File {
            path: path.to_owned(),
            source,
        },
    })
}

fn emit(text: &str) -> CliResult<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn emit_json<T: Serialize>(value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    emit(&text)
}

fn render(ctx: &Context, tables: &[Table]) -> CliResult<()> {
    let parts: Vec<String> = tables
        .iter()
        .map(|t| if ctx.format == Format::Tsv { t.tsv() } else { t.aligned() })
        .collect();
    emit(&parts.join("\n"))
}

// score -------------------------------------------------------------------

pub fn score(ctx: &Context, a: &ScoreArgs) -> CliResult<Status> {
    let gold = load(&a.gold)?;
    let pred = load(&a.pred)?;
    let config = ScoreConfig {
        criterion: a.criterion,
        average: a.average,
        excluded_entity_types: a.exclude_entity_types.iter().cloned().collect(),
        excluded_relation_types: a.exclude_relation_types.iter().cloned().collect(),
        symmetric_types: a.symmetric_types.iter().cloned().collect(),
        allow_misaligned: a.allow_misaligned,
    };
    let scored = if a.all_settings {
        sincere::score_all_settings(&gold, &pred, &config)
    } else {
        sincere::score(&gold, &pred, &config).map(|r| BTreeMap::from([(a.criterion, r)]))
    };
    let reports: BTreeMap<Criterion, EvalReport> = match scored {
        Ok(r) => r,
        Err(sincere::Error::Misaligned(report)) => {
            alignment_output(ctx, &report)?;
            return Ok(Status::Findings);
        }
        Err(e) => return Err(e.into()),
    };
    for r in reports.values() {
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
    }
    match ctx.format {
        Format::Json if a.all_settings => emit_json(&reports)?,
        Format::Json => emit_json(&reports[&a.criterion])?,
        _ => {
            let tables: Vec<Table> = reports.values().map(score_table).collect();
            render(ctx, &tables)?;
        }
    }
    Ok(Status::Clean)
}

fn score_table(r: &EvalReport) -> Table {
    let mut title = format!("{} ({})", r.config.criterion, average_name(r));
    if r.diagnostic {
        title.push_str(", diagnostic only");
    }
    if r.non_standard {
        title.push_str(", non-standard RE matching");
    }
    let mut t = Table::new(["task", "type", "P", "R", "F1", "TP", "FP", "FN"]).titled(title);
    for (task, rep) in [("NER", &r.ner), ("RE", &r.re)] {
        task_rows(&mut t, task, rep);
    }
    t
}

fn average_name(r: &EvalReport) -> &'static str {
    match r.config.average {
        sincere::Average::Micro => "micro",
        sincere::Average::Macro => "macro",
    }
}

fn task_rows(t: &mut Table, task: &str, rep: &TaskReport) {
    let o = rep.overall;
    t.row([
        task.to_owned(),
        "(all)".to_owned(),
        pct(o.precision),
        pct(o.recall),
        pct(o.f1),
        o.tp.to_string(),
        o.fp.to_string(),
        o.fn_.to_string(),
    ]);
    for (ty, p) in &rep.per_type {
        t.row([
            task.to_owned(),
            ty.clone(),
            pct(p.precision),
            pct(p.recall),
            pct(p.f1),
            p.tp.to_string(),
            p.fp.to_string(),
            p.fn_.to_string(),
        ]);
    }
}

fn alignment_output(ctx: &Context, report: &AlignmentReport) -> CliResult<()> {
    if ctx.format == Format::Json {
        return emit_json(report);
    }
    let mut t = Table::new(["doc", "sentence", "problem"]).titled(format!(
        "not aligned: {} sentences matched, {} mismatches",
        report.matched_sentences,
        report.mismatches.len()
    ));
    for m in &report.mismatches {
        let problem = match &m.reason {
            MismatchReason::MissingDoc => "missing document in prediction".to_owned(),
            MismatchReason::ExtraDoc => "document absent from gold".to_owned(),
            MismatchReason::MissingSentence => "missing sentence in prediction".to_owned(),
            MismatchReason::ExtraSentence => "sentence absent from gold".to_owned(),
            MismatchReason::TokenMismatch { first_difference } => {
                format!("tokens differ from index {first_difference}")
            }
        };
        t.row([m.doc_key.clone(), m.sentence.map_or("-".into(), |s| s.to_string()), problem]);
    }
    render(ctx, &[t])
}

// stats -------------------------------------------------------------------

fn resolve_manifest(name_or_path: &str) -> CliResult<ReferenceManifest> {
    if let Some(m) = ReferenceManifest::builtin(name_or_path) {
        return Ok(m);
    }
    ReferenceManifest::load(name_or_path).map_err(|source| match source {
        sincere::Error::Io { .. } if !Path::new(name_or_path).exists() => CliError::Core(sincere::Error::InvalidArgument(format!(
            "manifest {name_or_path:?} is neither a file nor a bundled name ({})",
            ReferenceManifest::builtin_names().join(", ")
        ))),
        source => CliError::File {
            path: name_or_path.into(),
            source,
        },
    })
}

pub fn stats(ctx: &Context, a: &StatsArgs) -> CliResult<Status> {
    let manifest = a.manifest.as_deref().map(resolve_manifest).transpose()?;
    let mut reports: Vec<StatsReport> = Vec::new();
    for path in &a.files {
        let mut corpus = load(path)?;
        // Files named after a manifest split are checked against it.
        if corpus.split.is_none() {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if manifest.as_ref().is_some_and(|m| m.splits.contains_key(stem) && stem != TOTAL_SPLIT) {
                corpus.split = Some(stem.to_owned());
            }
        }
        reports.push(compute_stats(&corpus));
    }
    if reports.len() > 1 {
        let name = reports[0].name.clone();
        let merged = StatsReport::merge(&name, &reports);
        reports.push(merged);
    }
    let mut audits = Vec::new();
    for r in reports {
        let has_entry = manifest
            .as_ref()
            .is_some_and(|m| m.splits.contains_key(r.split.as_deref().unwrap_or(TOTAL_SPLIT)));
        // A merged total is only checked when the manifest lists one.
        let is_merged_total = r.split.is_none() && audits.len() == a.files.len() && a.files.len() > 1;
        let m = if is_merged_total && !has_entry { None } else { manifest.as_ref() };
        audits.push(StatsAudit::new(r, m)?);
    }
    let found = audits.iter().any(StatsAudit::has_findings);
    match ctx.format {
        Format::Json => emit_json(&audits)?,
        Format::Tsv => {
            let mut tables = Vec::new();
            for au in &audits {
                let label = split_label(&au.report);
                for (what, hist) in [
                    ("entities_per_sentence", &au.report.entities_per_sentence),
                    ("relations_per_sentence", &au.report.relations_per_sentence),
                ] {
                    let mut t = Table::new([what, "sentences"]).titled(format!("{what} {label}"));
                    for (k, n) in hist {
                        t.row([k.to_string(), n.to_string()]);
                    }
                    tables.push(t);
                }
            }
            tables.extend(discrepancy_table(&audits));
            render(ctx, &tables)?;
        }
        Format::Table => render(ctx, &stats_tables(&audits))?,
    }
    for au in &audits {
        if au.truncation.as_ref().is_some_and(|t| t.suspicious) {
            eprintln!(
                "finding: {} has no relation-free sentences although the dataset contains some; it may have been truncated",
                split_label(&au.report)
            );
        }
    }
    Ok(Status::from_findings(found))
}

fn split_label(r: &StatsReport) -> String {
    format!("{}/{}", r.name, r.split.as_deref().unwrap_or(TOTAL_SPLIT))
}

fn discrepancy_table(audits: &[StatsAudit]) -> Option<Table> {
    let mut t = Table::new(["split", "field", "expected", "actual", "delta"]).titled("manifest discrepancies");
    for d in audits.iter().flat_map(|a| &a.discrepancies) {
        t.row([
            d.split.clone(),
            d.field.clone(),
            d.expected.to_string(),
            d.actual.to_string(),
            format!("{:+}", d.delta),
        ]);
    }
    audits.iter().any(|a| !a.discrepancies.is_empty()).then_some(t)
}

fn stats_tables(audits: &[StatsAudit]) -> Vec<Table> {
    let mut summary = Table::new([
        "corpus",
        "documents",
        "sentences",
        "tokens",
        "entities",
        "relations",
        "no-relation %",
        "overlapping",
        "nested",
    ])
    .titled("counts");
    for au in audits {
        let r = &au.report;
        let c = r.counts;
        summary.row([
            split_label(r),
            c.documents.to_string(),
            c.sentences.to_string(),
            c.tokens.to_string(),
            c.entities.to_string(),
            c.relations.to_string(),
            pct(r.zero_relation_fraction),
            r.overlapping_mentions.to_string(),
            r.nested_mentions.to_string(),
        ]);
    }
    let mut tables = vec![summary];
    let whole = audits.last().map(|a| &a.report);
    if let Some(r) = whole {
        let mut types = Table::new(["kind", "type", "count"]).titled(format!("types in {}", split_label(r)));
        for (t, n) in &r.entity_types {
            types.row(["entity".to_owned(), t.clone(), n.to_string()]);
        }
        for (t, n) in &r.relation_types {
            types.row(["relation".to_owned(), t.clone(), n.to_string()]);
        }
        tables.push(types);

        let mc = mapping_complexity(&r.cooccurrence);
        let mut co = Table::new(["relation", "head", "tail", "count"]).titled(format!(
            "argument types ({})",
            if mc.bijective { "bijective" } else { "not bijective" }
        ));
        for (k, n) in &r.cooccurrence {
            co.row([k.relation_type.clone(), k.head_type.clone(), k.tail_type.clone(), n.to_string()]);
        }
        tables.push(co);
    }
    tables.extend(discrepancy_table(audits));
    tables
}

// check -------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub path: PathBuf,
    pub violations: Vec<Violation>,
}

pub fn check(ctx: &Context, a: &CheckArgs) -> CliResult<Status> {
    let mut results = Vec::new();
    for path in &a.files {
        let violations = match read_canonical(path) {
            Ok(_) => Vec::new(),
            Err(sincere::Error::Invalid(v)) => v,
            Err(e @ sincere::Error::Io { .. }) => return Err(e.into()),
            Err(source) => {
                return Err(CliError::File {
                    path: path.clone(),
                    source,
                })
            }
        };
        results.push(CheckResult {
            path: path.clone(),
            violations,
        });
    }
    let found = results.iter().any(|r| !r.violations.is_empty());
    if ctx.format == Format::Json {
        emit_json(&results)?;
    } else {
        let mut t = Table::new(["file", "location", "violation", "detail"]).titled("validation");
        for r in &results {
            if r.violations.is_empty() {
                t.row([r.path.display().to_string(), "-".into(), "ok".into(), String::new()]);
            }
            for v in &r.violations {
                t.row([
                    r.path.display().to_string(),
                    v.location.clone(),
                    format!("{:?}", v.kind),
                    v.detail.clone(),
                ]);
            }
        }
        render(ctx, &[t])?;
    }
    Ok(Status::from_findings(found))
}

// compare -----------------------------------------------------------------

pub fn compare(ctx: &Context, a: &CompareArgs) -> CliResult<Status> {
    let claims = match &a.claims {
        Some(path) => load_claims(path).map_err(|source| match source {
            e @ sincere::Error::Io { .. } => CliError::Core(e),
            source => CliError::File {
                path: path.clone(),
                source,
            },
        })?,
        None => bundled_claims(),
    };
    let report = ComparisonReport::new(&claims);
    if ctx.format == Format::Json {
        emit_json(&report)?;
        return Ok(Status::from_findings(report.has_findings()));
    }
    let describe = |c: &ResultClaim| {
        let setting = serde_json::to_value(c.claimed_setting).ok();
        let average = serde_json::to_value(c.claimed_average).ok();
        format!(
            "{} ({}, {})",
            c.label,
            setting.as_ref().and_then(|v| v.as_str()).unwrap_or("?"),
            average.as_ref().and_then(|v| v.as_str()).unwrap_or("?")
        )
    };
    let non_comparable = report.non_comparable().count();
    let mut t = Table::new(["dataset", "task", "result A", "result B", "verdict", "reasons"]).titled(format!(
        "{} pairs compared, {non_comparable} not comparable",
        report.verdicts.len()
    ));
    for v in &report.verdicts {
        if v.verdict.comparable && !a.all {
            continue;
        }
        let (x, y) = (&claims[v.a], &claims[v.b]);
        let reasons: Vec<String> = v.verdict.reasons.iter().map(|r| r.to_string()).collect();
        t.row([
            x.dataset.clone(),
            format!("{:?}", x.task).to_uppercase(),
            describe(x),
            describe(y),
            if v.verdict.comparable { "comparable" } else { "not comparable" }.to_owned(),
            reasons.join("; "),
        ]);
    }
    let mut tables = vec![t];
    if !report.underspecified.is_empty() {
        let mut u = Table::new(["result", "dataset", "task"]).titled("insufficiently specified");
        for &i in &report.underspecified {
            let c = &claims[i];
            u.row([describe(c), c.dataset.clone(), format!("{:?}", c.task).to_uppercase()]);
        }
        tables.push(u);
    }
    render(ctx, &tables)?;
    Ok(Status::from_findings(report.has_findings()))
}

// perturb / sweep -----------------------------------------------------------

fn build_profile(ctx: &Context, a: &ProfileArgs) -> CliResult<PerturbationProfile> {
    let mut p = match &a.profile {
        Some(path) => PerturbationProfile::load(path).map_err(|source| match source {
            e @ sincere::Error::Io { .. } => CliError::Core(e),
            source => CliError::File {
                path: path.clone(),
                source,
            },
        })?,
        None => PerturbationProfile::zero(0),
    };
    if let Some(seed) = ctx.seed {
        p.seed = seed;
    }
    for (slot, value) in [
        (&mut p.p_ent_type_swap, a.p_ent_type_swap),
        (&mut p.p_ent_boundary_shift, a.p_ent_boundary_shift),
        (&mut p.p_ent_drop, a.p_ent_drop),
        (&mut p.p_ent_spurious, a.p_ent_spurious),
        (&mut p.p_rel_type_swap, a.p_rel_type_swap),
        (&mut p.p_rel_drop, a.p_rel_drop),
        (&mut p.p_rel_spurious, a.p_rel_spurious),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(n) = a.max_spurious_len {
        p.max_spurious_len = n;
    }
    if let Some(s) = a.swap_scope {
        p.swap_scope = s.into();
    }
    p.validate()?;
    Ok(p)
}

pub fn perturb(ctx: &Context, a: &PerturbArgs) -> CliResult<Status> {
    let profile = build_profile(ctx, &a.profile)?;
    let gold = load(&a.gold)?;
    let pred = perturb::perturb(&gold, &profile)?;
    let text = to_canonical_string(&pred);
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|source| sincere::Error::Io {
            path: path.clone(),
            source,
        })?,
        None => emit(&text)?,
    }
    Ok(Status::Clean)
}

fn profile_summary(p: &PerturbationProfile) -> String {
    let active: Vec<String> = p
        .probabilities()
        .into_iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(k, v)| format!("{}={v}", k.trim_start_matches("p_")))
        .collect();
    if active.is_empty() {
        "none".into()
    } else {
        active.join(",")
    }
}

pub fn sweep(ctx: &Context, a: &SweepArgs) -> CliResult<Status> {
    let gold = load(&a.gold)?;
    let mut grid = load_grid(&a.grid).map_err(|source| match source {
        e @ sincere::Error::Io { .. } => CliError::Core(e),
        source => CliError::File {
            path: a.grid.clone(),
            source,
        },
    })?;
    if let Some(seed) = ctx.seed {
        for p in &mut grid {
            p.seed = seed;
        }
    }
    match a.seeds {
        Some(n) => {
            let rows = perturb::sweep_averaged(&gold, &grid, n)?;
            if ctx.format == Format::Json {
                emit_json(&rows)?;
            } else {
                let mut t = Table::new(["row", "perturbation", "seeds", "Strict F1", "Boundaries F1", "gap"])
                    .titled("seed-averaged RE gap");
                for (i, r) in rows.iter().enumerate() {
                    t.row([
                        i.to_string(),
                        profile_summary(&r.profile),
                        r.seeds.to_string(),
                        pct(r.mean_strict_f1),
                        pct(r.mean_boundaries_f1),
                        pct(r.mean_absolute_gap),
                    ]);
                }
                render(ctx, &[t])?;
            }
            Ok(Status::Clean)
        }
        None => {
            let rows = perturb::sweep(&gold, &grid);
            if ctx.format == Format::Json {
                emit_json(&rows)?;
            } else {
                let mut t = Table::new(["row", "perturbation", "seed", "Strict F1", "Boundaries F1", "gap", "relative %"])
                    .titled("RE gap");
                for (i, r) in rows.iter().enumerate() {
                    let cells: [String; 4] = match (&r.gap, &r.error) {
                        (Some(g), _) => [
                            pct(g.strict_f1),
                            pct(g.boundaries_f1),
                            pct(g.absolute_gap),
                            g.relative_overestimation.map_or("-".into(), pct),
                        ],
                        (None, e) => [
                            "-".into(),
                            "-".into(),
                            "-".into(),
                            e.clone().unwrap_or_default(),
                        ],
                    };
                    let mut row = vec![i.to_string(), profile_summary(&r.profile), r.profile.seed.to_string()];
                    row.extend(cells);
                    t.row(row);
                }
                render(ctx, &[t])?;
            }
            if let Some(e) = rows.iter().find_map(|r| r.error.clone()) {
                return Err(CliError::Core(sincere::Error::InvalidArgument(format!("sweep row failed: {e}"))));
            }
            Ok(Status::Clean)
        }
    }
}

// fingerprint ---------------------------------------------------------------

pub fn fingerprint(ctx: &Context, a: &FingerprintArgs) -> CliResult<Status> {
    let gold = load(&a.gold)?;
    let pred = load(&a.pred)?;
    let mut claim = audit::ResultClaim::new(&a.label, "", a.task, a.value, a.setting, a.average);
    claim.excluded_entity_types = a.exclude_entity_types.iter().cloned().collect();
    let claim = claim.normalized()?;
    let fp = fingerprint_setting(&gold, &pred, &claim, a.tolerance)?;
    let found = matches!(fp.verdict, FingerprintVerdict::Mismatch | FingerprintVerdict::NoMatch);
    if ctx.format == Format::Json {
        emit_json(&fp)?;
    } else {
        let verdict = serde_json::to_value(fp.verdict).ok();
        let mut t = Table::new(["setting", "F1", "matches"]).titled(format!(
            "reported {} (tolerance {}): {}",
            pct(fp.reported),
            fp.tolerance,
            verdict.as_ref().and_then(|v| v.as_str()).unwrap_or("?")
        ));
        for (c, f1) in &fp.scores {
            t.row([
                c.to_string(),
                pct(*f1),
                if fp.consistent.contains(c) { "yes" } else { "no" }.to_owned(),
            ]);
        }
        render(ctx, &[t])?;
    }
    Ok(Status::from_findings(found))
}
