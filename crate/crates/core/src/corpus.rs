//! Issue reports, developer identifiers and corpus statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A developer identifier (usually an email address).
///
/// `raw` keeps the original casing for output; `key` is the lowercased form
/// used for every comparison. Equality, ordering and hashing go through
/// `key` only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DeveloperId {
    raw: String,
    key: String,
}

impl DeveloperId {
    /// Trims surrounding whitespace and derives the lowercase matching key.
    pub fn normalize(raw: &str) -> Result<Self> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(Error::EmptyIdentifier);
        }
        Ok(Self {
            raw: String::from(trimmed),
            key: trimmed.to_lowercase(),
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

/// Free-function form of [`DeveloperId::normalize`].
pub fn normalize_identifier(raw: &str) -> Result<DeveloperId> {
    DeveloperId::normalize(raw)
}

impl PartialEq for DeveloperId {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for DeveloperId {}

impl PartialOrd for DeveloperId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DeveloperId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

impl Hash for DeveloperId {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl fmt::Display for DeveloperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl TryFrom<String> for DeveloperId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        DeveloperId::normalize(&value)
    }
}

impl From<DeveloperId> for String {
    fn from(value: DeveloperId) -> Self {
        value.raw
    }
}

/// One resolved issue from a tracker export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueReport {
    pub id: String,
    /// Creation time in UTC seconds since the Unix epoch.
    pub created_at: i64,
    pub title: String,
    pub description: String,
    pub assignee: DeveloperId,
    /// Number of developer-issue interaction records attached to the report,
    /// when the export provides them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactions: Option<u64>,
}

impl IssueReport {
    /// Title and description joined by a newline.
    pub fn issue_text(&self) -> String {
        let mut text = String::with_capacity(self.title.len() + self.description.len() + 1);
        text.push_str(&self.title);
        text.push('\n');
        text.push_str(&self.description);
        text
    }
}

/// An ordered collection of reports for one project.
///
/// Constructed through [`Corpus::new`], which rejects empty and duplicate
/// ids. The developer set is derived and kept in key order, with the first
/// seen raw spelling as the canonical form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CorpusRepr", into = "CorpusRepr")]
pub struct Corpus {
    project: String,
    reports: Vec<IssueReport>,
    developers: BTreeMap<String, DeveloperId>,
}

#[derive(Serialize, Deserialize)]
struct CorpusRepr {
    project: String,
    reports: Vec<IssueReport>,
}

impl TryFrom<CorpusRepr> for Corpus {
    type Error = Error;

    fn try_from(value: CorpusRepr) -> Result<Self> {
        Corpus::new(value.project, value.reports)
    }
}

impl From<Corpus> for CorpusRepr {
    fn from(value: Corpus) -> Self {
        CorpusRepr {
            project: value.project,
            reports: value.reports,
        }
    }
}

impl Corpus {
    pub fn new(project: impl Into<String>, reports: Vec<IssueReport>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut developers = BTreeMap::new();
        for report in &reports {
            if report.id.is_empty() {
                return Err(Error::EmptyReportId);
            }
            if !seen.insert(report.id.as_str()) {
                return Err(Error::DuplicateId(report.id.clone()));
            }
            developers
                .entry(String::from(report.assignee.key()))
                .or_insert_with(|| report.assignee.clone());
        }
        Ok(Self {
            project: project.into(),
            reports,
            developers,
        })
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn reports(&self) -> &[IssueReport] {
        &self.reports
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    /// Distinct developers keyed by their matching key.
    pub fn developers(&self) -> &BTreeMap<String, DeveloperId> {
        &self.developers
    }

    pub fn get(&self, id: &str) -> Option<&IssueReport> {
        self.reports.iter().find(|r| r.id == id)
    }

    /// Reports whose ids appear in `ids`, in the order of `ids`.
    pub fn select(&self, ids: &[String]) -> Vec<&IssueReport> {
        let index: BTreeMap<&str, &IssueReport> =
            self.reports.iter().map(|r| (r.id.as_str(), r)).collect();
        ids.iter()
            .filter_map(|id| index.get(id.as_str()).copied())
            .collect()
    }

    /// Whether every report carries an interaction count.
    pub fn has_interactions(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(|r| r.interactions.is_some())
    }

    pub fn into_reports(self) -> Vec<IssueReport> {
        self.reports
    }
}

/// Table-1 style summary of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub developers: usize,
    pub reports: usize,
    pub relationships: u64,
    pub density: f64,
}

impl CorpusStats {
    /// Computes density = relationships / (developers x reports).
    pub fn from_counts(developers: usize, reports: usize, relationships: u64) -> Result<Self> {
        if developers == 0 || reports == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self {
            developers,
            reports,
            relationships,
            density: relationships as f64 / (developers as f64 * reports as f64),
        })
    }

    /// Density rounded to four decimals, as printed in summaries.
    pub fn density_display(&self) -> alloc::string::String {
        alloc::format!("{:.4}", self.density)
    }
}

/// Relationships are the summed interaction counts when every report has
/// one, otherwise one assignment relationship per report.
pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let relationships = if corpus.has_interactions() {
        corpus
            .reports()
            .iter()
            .map(|r| r.interactions.unwrap_or(0))
            .sum()
    } else {
        corpus.len() as u64
    };
    CorpusStats::from_counts(corpus.developers().len(), corpus.len(), relationships)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::format;

    pub fn report(id: &str, ts: i64, assignee: &str, text: &str) -> IssueReport {
        IssueReport {
            id: String::from(id),
            created_at: ts,
            title: format!("title {id}"),
            description: String::from(text),
            assignee: DeveloperId::normalize(assignee).unwrap(),
            interactions: None,
        }
    }
}
