//! Candidate sets, rankings and the assigner contract.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DeveloperId, IssueReport};
use crate::error::{Error, Result};

/// Longest ranking any assigner may return.
pub const MAX_RANKING: usize = 10;

/// The closed universe of developers an assigner may recommend.
///
/// Members are kept in key order; the position of a member in that order is
/// its class index for the trainable rankers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    project: String,
    lookup: BTreeMap<String, DeveloperId>,
}

impl CandidateSet {
    /// Builds the set from raw identifiers; the first spelling of each key
    /// becomes the canonical member.
    pub fn from_identifiers<'a, I>(project: impl Into<String>, ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DeveloperId>,
    {
        let mut lookup = BTreeMap::new();
        for id in ids {
            lookup
                .entry(String::from(id.key()))
                .or_insert_with(|| id.clone());
        }
        if lookup.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self {
            project: project.into(),
            lookup,
        })
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }

    /// Canonical member for a raw spelling, matched case-insensitively.
    pub fn resolve(&self, raw: &str) -> Option<&DeveloperId> {
        self.lookup.get(raw.to_lowercase().as_str())
    }

    pub fn contains(&self, id: &DeveloperId) -> bool {
        self.lookup.contains_key(id.key())
    }

    /// Members in key order.
    pub fn members(&self) -> impl ExactSizeIterator<Item = &DeveloperId> {
        self.lookup.values()
    }

    pub fn index_of(&self, id: &DeveloperId) -> Option<usize> {
        if !self.contains(id) {
            return None;
        }
        use core::ops::Bound;
        let below = (Bound::Unbounded, Bound::Excluded(id.key()));
        Some(self.lookup.range::<str, _>(below).count())
    }

    pub fn member(&self, index: usize) -> Option<&DeveloperId> {
        self.lookup.values().nth(index)
    }
}

/// Members are every distinct assignee of `corpus`.
pub fn build_candidate_set(corpus: &Corpus) -> Result<CandidateSet> {
    CandidateSet::from_identifiers(corpus.project(), corpus.reports().iter().map(|r| &r.assignee))
}

/// Candidate set restricted to the assignees of the given reports.
pub fn build_candidate_set_from<'a, I>(project: &str, reports: I) -> Result<CandidateSet>
where
    I: IntoIterator<Item = &'a IssueReport>,
{
    CandidateSet::from_identifiers(project, reports.into_iter().map(|r| &r.assignee))
}

/// An ordered, duplicate-free recommendation list for one issue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub issue_id: String,
    pub source: String,
    pub items: Vec<DeveloperId>,
}

impl Ranking {
    pub fn empty(issue_id: impl Into<String>, source: impl Into<String>) -> Self {
        Self {
            issue_id: issue_id.into(),
            source: source.into(),
            items: Vec::new(),
        }
    }

    pub fn truncate(&mut self, k: usize) {
        self.items.truncate(k);
    }

    /// Items joined with `", "`.
    pub fn joined(&self) -> String {
        let mut out = String::new();
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(item.raw());
        }
        out
    }

    /// Checks the ranking invariants against `candidates`.
    pub fn is_valid(&self, candidates: &CandidateSet) -> bool {
        let mut seen = BTreeSet::new();
        self.items.len() <= MAX_RANKING
            && self
                .items
                .iter()
                .all(|d| candidates.contains(d) && seen.insert(d.key()))
    }
}

fn is_delimiter(c: char) -> bool {
    c == ',' || c == ';' || c.is_whitespace()
}

fn is_wrapper(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | '`' | '(' | ')' | '[' | ']' | '{' | '}' | '<' | '>' | '*' | '.' | ':'
    )
}

/// Extracts candidate members from free-form model output.
///
/// The text is split on commas, semicolons and whitespace. A piece is kept
/// when it, or the piece with quoting and bracket characters stripped from
/// both ends, matches a candidate key case-insensitively. Duplicates and
/// unknown pieces are dropped, first-occurrence order is kept and at most
/// [`MAX_RANKING`] items are returned. Short lists are not padded.
pub fn parse_ranked_output(
    issue_id: &str,
    source: &str,
    raw_output: &str,
    candidates: &CandidateSet,
) -> Ranking {
    let mut seen = BTreeSet::new();
    let mut items = Vec::new();
    for piece in raw_output.split(is_delimiter).filter(|p| !p.is_empty()) {
        if items.len() == MAX_RANKING {
            break;
        }
        let hit = candidates
            .resolve(piece)
            .or_else(|| candidates.resolve(piece.trim_matches(is_wrapper)));
        if let Some(id) = hit {
            if seen.insert(id.key()) {
                items.push(id.clone());
            }
        }
    }
    Ranking {
        issue_id: String::from(issue_id),
        source: String::from(source),
        items,
    }
}

/// Content-blind ranking: developers by descending training assignment
/// count, ties by key. Only candidate members are ranked.
pub fn frequency_baseline_rank(
    report: &IssueReport,
    candidates: &CandidateSet,
    k: usize,
    train_counts: &BTreeMap<String, usize>,
) -> Result<Ranking> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    let mut ordered: Vec<(&DeveloperId, usize)> = candidates
        .members()
        .map(|d| (d, train_counts.get(d.key()).copied().unwrap_or(0)))
        .collect();
    // members() is already in key order, so a stable sort on count keeps
    // the lexicographic tie-break
    ordered.sort_by(|a, b| b.1.cmp(&a.1));
    Ok(Ranking {
        issue_id: report.id.clone(),
        source: String::from(FrequencyAssigner::NAME),
        items: ordered
            .into_iter()
            .take(k.min(MAX_RANKING))
            .map(|(d, _)| d.clone())
            .collect(),
    })
}

/// Anything that turns a report into a ranking over a candidate set.
///
/// Implementations must return rankings that satisfy
/// [`Ranking::is_valid`] and be deterministic for fixed inputs.
pub trait Assigner {
    type Error;

    fn name(&self) -> &str;

    fn rank(
        &self,
        report: &IssueReport,
        candidates: &CandidateSet,
        k: usize,
    ) -> core::result::Result<Ranking, Self::Error>;
}

/// [`frequency_baseline_rank`] behind the [`Assigner`] contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyAssigner {
    counts: BTreeMap<String, usize>,
}

impl FrequencyAssigner {
    pub const NAME: &'static str = "frequency";

    pub fn from_training<'a, I>(train: I) -> Self
    where
        I: IntoIterator<Item = &'a IssueReport>,
    {
        Self {
            counts: crate::pipeline::assignment_counts(train),
        }
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }
}

impl Assigner for FrequencyAssigner {
    type Error = Error;

    fn name(&self) -> &str {
        Self::NAME
    }

    fn rank(&self, report: &IssueReport, candidates: &CandidateSet, k: usize) -> Result<Ranking> {
        frequency_baseline_rank(report, candidates, k, &self.counts)
    }
}
