//! On-disk formats: manifests, training files, rankings, checkpoints,
//! loss histories, reports and the published-results constants.

pub mod checkpoint;
pub mod published;
pub mod report;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use triage_core::learn::StepRecord;
use triage_core::promptgen::{render_training_example, TrainingExample};
use triage_core::{CandidateSet, IssueReport, PromptTemplate, Ranking, SplitManifest};

use crate::error::{BenchError, Result};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| BenchError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| BenchError::io(path, e))
}

pub(crate) fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| BenchError::format(path, e))?;
    w.write_all(b"\n").map_err(|e| BenchError::io(path, e))?;
    finish(w, path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::format(path, e))
}

/// One compact JSON object per line, LF endings.
pub fn write_jsonl<'a, T, I>(path: &Path, items: I) -> Result<usize>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = create(path)?;
    let mut count = 0;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| BenchError::format(path, e))?;
        w.write_all(b"\n").map_err(|e| BenchError::io(path, e))?;
        count += 1;
    }
    finish(w, path)?;
    Ok(count)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| BenchError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| BenchError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, manifest: &SplitManifest) -> Result<()> {
    write_json(path, manifest)
}

pub fn read_manifest(path: &Path) -> Result<SplitManifest> {
    read_json(path)
}

/// Writes `{"prompt", "completion"}` per report, in order. Returns the
/// number of records written.
pub fn emit_training_file(reports: &[&IssueReport], template: &PromptTemplate, path: &Path) -> Result<usize> {
    if reports.is_empty() {
        return Err(triage_core::Error::EmptySplit.into());
    }
    let examples = reports
        .iter()
        .map(|r| render_training_example(r, template))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    write_jsonl(path, &examples)
}

pub fn read_training_file(path: &Path) -> Result<Vec<TrainingExample>> {
    read_jsonl(path)
}

pub fn write_rankings(path: &Path, rankings: &[Ranking]) -> Result<usize> {
    write_jsonl(path, rankings)
}

/// Reads rankings and re-resolves every item against `candidates`, so the
/// result carries canonical identifiers.
pub fn read_rankings(path: &Path, candidates: &CandidateSet) -> Result<Vec<Ranking>> {
    let mut rankings: Vec<Ranking> = read_jsonl(path)?;
    for r in &mut rankings {
        for item in &mut r.items {
            *item = candidates
                .resolve(item.key())
                .cloned()
                .ok_or_else(|| BenchError::format(path, format!("`{}` is not a candidate", item.raw())))?;
        }
    }
    Ok(rankings)
}

/// `step,lr,loss` rows.
pub fn write_loss_history(path: &Path, history: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["step", "lr", "loss"])
        .map_err(|e| BenchError::format(path, e))?;
    for rec in history {
        w.write_record([rec.step.to_string(), rec.lr.to_string(), rec.loss.to_string()])
            .map_err(|e| BenchError::format(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}
