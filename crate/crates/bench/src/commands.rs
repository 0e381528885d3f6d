//! Pipeline stages behind the subcommands.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! run_config.json  stats.json
//! runs/run-<k>/{run_config.json, versions.json, manifest.json, train.jsonl, val.jsonl}
//! runs/run-<k>/<assigner>/{rankings.jsonl, report.json}
//! runs/run-<k>/<assigner>/{model.bin, model.json, loss.csv, epochs.jsonl, checkpoints/}   trainable
//! runs/run-<k>/llm/completions.jsonl
//! reports/<assigner>.json                                                                averaged
//! compare/<subject>_vs_<reference>.{csv,md} and _plot.csv
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use triage_core::corpus::corpus_stats;
use triage_core::eval::{average_runs, evaluate, ColumnSource};
use triage_core::learn::{train, Objective};
use triage_core::pipeline::{chronological_split, filter_by_developer_frequency, multi_run_folds, FilterOutcome};
use triage_core::ranker::{build_candidate_set, build_candidate_set_from, FrequencyAssigner};
use triage_core::{
    Assigner, CandidateSet, ComparisonTable, Corpus, CorpusStats, DeveloperId, EvalReport, IssueReport,
    PromptTemplate, Ranking, SplitManifest, SplitProtocol,
};

use crate::backend::{evaluate_run, BackendClient};
use crate::config::{AssignerKind, RunConfig};
use crate::error::{BenchError, Result};
use crate::formats::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, Sidecar, FORMAT_VERSION};
use crate::formats::published::published;
use crate::formats::report::{emit_report, ReportFormat};
use crate::formats::{self, emit_training_file, write_json, write_jsonl, write_loss_history, write_rankings};
use crate::ingest::{ingest, IngestOptions};

pub fn run_dir(config: &RunConfig, run: usize) -> PathBuf {
    config.out_dir.join("runs").join(format!("run-{run}"))
}

pub fn assigner_dir(config: &RunConfig, run: usize, kind: AssignerKind) -> PathBuf {
    run_dir(config, run).join(kind.name())
}

pub fn averaged_report_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out_dir.join("reports").join(format!("{name}.json"))
}

/// Ingested and filtered corpus.
pub struct Loaded {
    pub raw: Corpus,
    pub dropped: usize,
    pub malformed: usize,
    pub filtered: FilterOutcome,
}

pub fn load(config: &RunConfig) -> Result<Loaded> {
    let path = config.corpus_path()?;
    let options = IngestOptions {
        max_malformed: config.max_malformed,
    };
    let outcome = ingest(path, config.input_format()?, &config.project, &options)?;
    if outcome.corpus.is_empty() {
        return Err(BenchError::format(path, "no usable issue reports"));
    }
    let filtered = filter_by_developer_frequency(&outcome.corpus, config.threshold)?;
    Ok(Loaded {
        raw: outcome.corpus,
        dropped: outcome.dropped,
        malformed: outcome.malformed,
        filtered,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsSummary {
    pub project: String,
    pub threshold: usize,
    pub dropped_records: usize,
    pub malformed_records: usize,
    pub before: CorpusStats,
    pub after: CorpusStats,
    pub removed_reports: usize,
    pub removed_developers: usize,
}

fn grouped(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// `developers / reports / relationships / density`.
pub fn stats_row(s: &CorpusStats) -> String {
    format!(
        "{} / {} / {} / {}",
        grouped(s.developers as u64),
        grouped(s.reports as u64),
        grouped(s.relationships),
        s.density_display()
    )
}

pub fn cmd_stats(config: &RunConfig, out: &mut dyn Write) -> Result<StatsSummary> {
    let loaded = load(config)?;
    let summary = StatsSummary {
        project: config.project.clone(),
        threshold: config.threshold,
        dropped_records: loaded.dropped,
        malformed_records: loaded.malformed,
        before: corpus_stats(&loaded.raw)?,
        after: corpus_stats(&loaded.filtered.corpus)?,
        removed_reports: loaded.filtered.removed_reports,
        removed_developers: loaded.filtered.removed_developers,
    };
    write_json(&config.out_dir.join("stats.json"), &summary)?;
    let _ = writeln!(out, "project {} (threshold {})", summary.project, summary.threshold);
    let _ = writeln!(out, "developers / reports / relationships / density");
    let _ = writeln!(out, "before filtering: {}", stats_row(&summary.before));
    let _ = writeln!(out, "after filtering:  {}", stats_row(&summary.after));
    if summary.dropped_records + summary.malformed_records > 0 {
        let _ = writeln!(
            out,
            "skipped {} records without assignee or timestamp, {} malformed",
            summary.dropped_records, summary.malformed_records
        );
    }
    Ok(summary)
}

fn manifests(config: &RunConfig, corpus: &Corpus) -> Result<Vec<SplitManifest>> {
    match config.protocol {
        SplitProtocol::RotatedFold => Ok(multi_run_folds(corpus, config.runs, config.seed, config.threshold)?),
        SplitProtocol::Chronological => {
            let base = chronological_split(corpus, config.seed, config.threshold)?;
            Ok((0..config.runs)
                .map(|run_index| SplitManifest {
                    run_index,
                    ..base.clone()
                })
                .collect())
        }
    }
}

#[derive(Serialize)]
struct Versions {
    triage_bench: &'static str,
    checkpoint_format: u32,
}

/// Filters, splits and writes each run directory's config and manifest.
pub fn prepare(config: &RunConfig) -> Result<(Loaded, Vec<SplitManifest>)> {
    let loaded = load(config)?;
    let manifests = manifests(config, &loaded.filtered.corpus)?;
    write_json(&config.out_dir.join("run_config.json"), config)?;
    let versions = Versions {
        triage_bench: env!("CARGO_PKG_VERSION"),
        checkpoint_format: FORMAT_VERSION,
    };
    for m in &manifests {
        let dir = run_dir(config, m.run_index);
        write_json(&dir.join("run_config.json"), config)?;
        write_json(&dir.join("versions.json"), &versions)?;
        formats::write_manifest(&dir.join("manifest.json"), m)?;
    }
    Ok((loaded, manifests))
}

pub fn cmd_split(config: &RunConfig, out: &mut dyn Write) -> Result<Vec<SplitManifest>> {
    let (loaded, manifests) = prepare(config)?;
    let _ = writeln!(out, "{} reports after filtering", loaded.filtered.corpus.len());
    for m in &manifests {
        let _ = writeln!(
            out,
            "run {}: train {} / val {} / test {}",
            m.run_index,
            m.train_ids.len(),
            m.val_ids.len(),
            m.test_ids.len()
        );
    }
    Ok(manifests)
}

/// Training and validation files per run; returns `(train, val)` counts.
pub fn cmd_emit_train(config: &RunConfig, out: &mut dyn Write) -> Result<Vec<(usize, usize)>> {
    let (loaded, manifests) = prepare(config)?;
    let template = PromptTemplate::train().with_budget(config.prompt_budget_tokens)?;
    let corpus = &loaded.filtered.corpus;
    let mut counts = Vec::new();
    for m in &manifests {
        let dir = run_dir(config, m.run_index);
        let n_train = emit_training_file(&corpus.select(&m.train_ids), &template, &dir.join("train.jsonl"))?;
        let n_val = emit_training_file(&corpus.select(&m.val_ids), &template, &dir.join("val.jsonl"))?;
        let _ = writeln!(out, "run {}: {n_train} training and {n_val} validation examples", m.run_index);
        counts.push((n_train, n_val));
    }
    Ok(counts)
}

fn candidates_for(config: &RunConfig, corpus: &Corpus, train: &[&IssueReport]) -> Result<CandidateSet> {
    Ok(if config.candidates_from_train {
        build_candidate_set_from(corpus.project(), train.iter().copied())?
    } else {
        build_candidate_set(corpus)?
    })
}

fn objective(kind: AssignerKind) -> Objective {
    match kind {
        AssignerKind::Cbr => Objective::OneVsRest,
        _ => Objective::Softmax,
    }
}

/// Trains `kind` on one manifest, writing per-epoch checkpoints, the final
/// model and the loss history. Checkpoints count completed epochs from 1.
pub fn train_run(
    config: &RunConfig,
    corpus: &Corpus,
    manifest: &SplitManifest,
    kind: AssignerKind,
) -> Result<Checkpoint> {
    let train_reports = corpus.select(&manifest.train_ids);
    let val_reports = corpus.select(&manifest.val_ids);
    let candidates = candidates_for(config, corpus, &train_reports)?;
    let training = *config.training(kind);
    let dir = assigner_dir(config, manifest.run_index, kind);
    let sidecar = |epoch| Sidecar {
        format_version: FORMAT_VERSION,
        name: kind.name().into(),
        project: corpus.project().into(),
        objective: objective(kind),
        epoch,
        config: training,
    };
    let mut hook_error = None;
    let outcome = train(
        &train_reports,
        &val_reports,
        &candidates,
        &training,
        objective(kind),
        |summary, model, featurizer| {
            if hook_error.is_some() {
                return;
            }
            let ck = Checkpoint {
                sidecar: sidecar(summary.epoch + 1),
                model: model.clone(),
                featurizer: featurizer.clone(),
                candidates: candidates.clone(),
            };
            let path = dir.join("checkpoints").join(format!("epoch-{}.bin", summary.epoch + 1));
            if let Err(e) = write_checkpoint(&path, &ck) {
                hook_error = Some(e);
            }
        },
    )?;
    if let Some(e) = hook_error {
        return Err(e);
    }
    let ck = Checkpoint {
        sidecar: sidecar(training.epochs),
        model: outcome.model,
        featurizer: outcome.featurizer,
        candidates,
    };
    write_checkpoint(&dir.join("model.bin"), &ck)?;
    write_loss_history(&dir.join("loss.csv"), &outcome.history)?;
    write_jsonl(&dir.join("epochs.jsonl"), &outcome.epochs)?;
    Ok(ck)
}

pub fn cmd_train(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let kinds: Vec<AssignerKind> = config.assigners.iter().copied().filter(|k| k.is_trainable()).collect();
    if kinds.is_empty() {
        return Err(BenchError::Usage("train needs a trainable assigner (sft or cbr)".into()));
    }
    let (loaded, manifests) = prepare(config)?;
    for kind in kinds {
        for m in &manifests {
            let ck = train_run(config, &loaded.filtered.corpus, m, kind)?;
            let _ = writeln!(
                out,
                "run {}: trained {} over {} candidates and {} features",
                m.run_index,
                kind.name(),
                ck.model.classes(),
                ck.model.features()
            );
        }
    }
    Ok(())
}

fn rank_all<A: Assigner>(assigner: &A, test: &[&IssueReport], candidates: &CandidateSet, k: usize) -> Result<Vec<Ranking>>
where
    BenchError: From<A::Error>,
{
    test.iter()
        .map(|r| assigner.rank(r, candidates, k).map_err(BenchError::from))
        .collect()
}

/// Loads `model.bin` when it exists and matches the run's candidates,
/// otherwise trains.
fn learned(config: &RunConfig, corpus: &Corpus, manifest: &SplitManifest, kind: AssignerKind, candidates: &CandidateSet) -> Result<Checkpoint> {
    let path = assigner_dir(config, manifest.run_index, kind).join("model.bin");
    if path.is_file() {
        let ck = read_checkpoint(&path)?;
        let same = ck.candidates.members().eq(candidates.members())
            && ck.sidecar.config == *config.training(kind)
            && ck.sidecar.objective == objective(kind);
        if same {
            return Ok(ck);
        }
    }
    train_run(config, corpus, manifest, kind)
}

/// Ranks every test issue with every selected assigner, per run, and writes
/// rankings, per-run reports and the averaged report. Returns the averaged
/// reports in assigner order.
pub fn cmd_evaluate(config: &RunConfig, out: &mut dyn Write) -> Result<Vec<EvalReport>> {
    let (loaded, manifests) = prepare(config)?;
    let corpus = &loaded.filtered.corpus;
    let k = config.k_max;
    let client = if config.assigners.contains(&AssignerKind::Llm) {
        Some(BackendClient::new(config.backend.clone())?)
    } else {
        None
    };
    let eval_template = PromptTemplate::eval().with_budget(config.prompt_budget_tokens)?;
    let mut averaged = Vec::new();
    for &kind in &config.assigners {
        let mut per_run = Vec::new();
        for m in &manifests {
            let train_reports = corpus.select(&m.train_ids);
            let test = corpus.select(&m.test_ids);
            let candidates = candidates_for(config, corpus, &train_reports)?;
            let dir = assigner_dir(config, m.run_index, kind);
            let rankings = match kind {
                AssignerKind::Frequency => {
                    rank_all(&FrequencyAssigner::from_training(train_reports.iter().copied()), &test, &candidates, k)?
                }
                AssignerKind::Sft | AssignerKind::Cbr => {
                    let ck = learned(config, corpus, m, kind, &candidates)?;
                    rank_all(&ck.assigner(), &test, &candidates, k)?
                }
                AssignerKind::Llm => {
                    let client = client.as_ref().expect("client built for llm");
                    evaluate_run(client, &test, &candidates, k, &eval_template, m.run_index, Some(&dir))?.rankings
                }
            };
            write_rankings(&dir.join("rankings.jsonl"), &rankings)?;
            let truths: BTreeMap<String, DeveloperId> =
                test.iter().map(|r| (r.id.clone(), r.assignee.clone())).collect();
            let report = evaluate(corpus.project(), kind.name(), &rankings, &truths, k)?;
            write_json(&dir.join("report.json"), &report)?;
            let _ = writeln!(
                out,
                "run {} {}: Hit@1 {:.4} Hit@{k} {:.4}",
                m.run_index,
                kind.name(),
                report.rate(1).unwrap_or(0.0),
                report.rate(k).unwrap_or(0.0)
            );
            per_run.push(report);
        }
        let avg = average_runs(&per_run)?;
        write_json(&averaged_report_path(config, kind.name()), &avg)?;
        let _ = writeln!(
            out,
            "{} averaged over {} runs: {}",
            kind.name(),
            avg.runs,
            avg.rates().iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" ")
        );
        averaged.push(avg);
    }
    Ok(averaged)
}

enum Source {
    Report(EvalReport),
    Published(String, triage_core::eval::Column),
}

fn resolve_source(config: &RunConfig, name: &str) -> Result<Source> {
    if let Some((project, column)) = published().column(name) {
        return Ok(Source::Published(project, column));
    }
    if let Some(kind) = AssignerKind::parse(name) {
        let path = averaged_report_path(config, kind.name());
        if path.is_file() {
            return Ok(Source::Report(formats::read_json(&path)?));
        }
    }
    let path = Path::new(name);
    if path.is_file() {
        return Ok(Source::Report(formats::read_json(path)?));
    }
    Err(BenchError::Usage(format!(
        "`{name}` is neither a published key, an evaluated assigner nor a report file"
    )))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '-' })
        .collect()
}

/// Compares the subject with the reference and writes CSV, markdown and
/// plot data under `compare/`.
pub fn cmd_compare(config: &RunConfig, out: &mut dyn Write) -> Result<ComparisonTable> {
    let subject = config
        .subject
        .clone()
        .or_else(|| config.assigners.first().map(|k| k.name().to_string()))
        .ok_or_else(|| BenchError::Usage("compare needs a subject".into()))?;
    let reference = config
        .reference
        .clone()
        .ok_or_else(|| BenchError::Usage("compare needs --reference".into()))?;
    let sources = [resolve_source(config, &subject)?, resolve_source(config, &reference)?];
    let columns: Vec<ColumnSource<'_>> = sources
        .iter()
        .map(|s| match s {
            Source::Report(r) => ColumnSource::Report(r),
            Source::Published(p, c) => ColumnSource::Fixed {
                project: p,
                column: c.clone(),
            },
        })
        .collect();
    let table = ComparisonTable::from_sources(&columns, 0, 1).map_err(|e| match e {
        triage_core::Error::Incomparable(m) => BenchError::Usage(format!("cannot compare: {m}")),
        other => other.into(),
    })?;
    let stem = format!("{}_vs_{}", file_stem(&subject), file_stem(&reference));
    let dir = config.out_dir.join("compare");
    emit_report(&table, ReportFormat::Csv, &dir.join(format!("{stem}.csv")))?;
    emit_report(&table, ReportFormat::Markdown, &dir.join(format!("{stem}.md")))?;
    emit_report(&table, ReportFormat::Plot, &dir.join(format!("{stem}_plot.csv")))?;
    let _ = write!(out, "{}", crate::formats::report::to_markdown(&table));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouping() {
        assert_eq!(grouped(4017), "4,017");
        assert_eq!(grouped(569289), "569,289");
        assert_eq!(grouped(12), "12");
        assert_eq!(grouped(1000), "1,000");
        let s = CorpusStats::from_counts(4_017, 16_106, 53_985).unwrap();
        assert_eq!(stats_row(&s), "4,017 / 16,106 / 53,985 / 0.0008");
    }
}
