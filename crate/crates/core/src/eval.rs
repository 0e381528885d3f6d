//! Hit@K evaluation and comparison tables.
//!
//! `Hit@K = (1/N) * sum_i 1{ truth_i in top-K prefix of ranking_i }` over
//! the N test issues. A truth outside the candidate set can never appear in
//! a valid ranking and therefore always counts as a miss.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::DeveloperId;
use crate::error::{Error, Result};
use crate::ranker::Ranking;

pub const DEFAULT_K_MAX: usize = 10;

/// 1 when `truth` is among the first `k` items of `ranking`.
pub fn hit_at_k(ranking: &Ranking, truth: &DeveloperId, k: usize) -> u32 {
    ranking.items.iter().take(k).any(|d| d == truth) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStat {
    pub k: usize,
    pub hits: usize,
    pub n: usize,
    pub rate: f64,
}

/// Hit@K for K = 1..=k_max of one assigner on one project.
///
/// For averaged reports `hits` and `n` are summed over runs and `rate` is the
/// mean of the per-run rates (the two agree when runs have equal sizes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub project: String,
    pub assigner: String,
    pub runs: usize,
    pub per_k: Vec<KStat>,
    pub averaged_over_runs: bool,
}

impl EvalReport {
    pub fn k_max(&self) -> usize {
        self.per_k.len()
    }

    /// Rate at `k` (1-based).
    pub fn rate(&self, k: usize) -> Option<f64> {
        self.per_k.get(k.checked_sub(1)?).map(|s| s.rate)
    }

    pub fn rates(&self) -> Vec<f64> {
        self.per_k.iter().map(|s| s.rate).collect()
    }
}

/// Scores `rankings` against `truths`. Both must name exactly the same
/// issue ids.
pub fn evaluate(
    project: &str,
    assigner: &str,
    rankings: &[Ranking],
    truths: &BTreeMap<String, DeveloperId>,
    k_max: usize,
) -> Result<EvalReport> {
    if k_max == 0 {
        return Err(Error::InvalidK);
    }
    let mut by_id: BTreeMap<&str, &Ranking> = BTreeMap::new();
    for r in rankings {
        if by_id.insert(r.issue_id.as_str(), r).is_some() || !truths.contains_key(&r.issue_id) {
            return Err(Error::IdMismatch(r.issue_id.clone()));
        }
    }
    if let Some(missing) = truths.keys().find(|id| !by_id.contains_key(id.as_str())) {
        return Err(Error::IdMismatch(missing.clone()));
    }
    let n = truths.len();
    if n == 0 {
        return Err(Error::EmptySplit);
    }
    // first position of the truth in each ranking, if any
    let mut first_hit = alloc::vec![0usize; k_max + 1];
    for (id, truth) in truths {
        if let Some(pos) = by_id[id.as_str()].items.iter().position(|d| d == truth) {
            if pos < k_max {
                first_hit[pos + 1] += 1;
            }
        }
    }
    let mut hits = 0;
    let per_k = (1..=k_max)
        .map(|k| {
            hits += first_hit[k];
            KStat {
                k,
                hits,
                n,
                rate: hits as f64 / n as f64,
            }
        })
        .collect();
    Ok(EvalReport {
        project: String::from(project),
        assigner: String::from(assigner),
        runs: 1,
        per_k,
        averaged_over_runs: false,
    })
}

/// Per-K mean of the rates of `reports`.
pub fn average_runs(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports.first().ok_or(Error::EmptySplit)?;
    for r in reports {
        if r.project != first.project || r.assigner != first.assigner || r.k_max() != first.k_max() {
            return Err(Error::Incomparable(format!(
                "{}/{} vs {}/{}",
                first.project, first.assigner, r.project, r.assigner
            )));
        }
    }
    let count = reports.len() as f64;
    let per_k = (0..first.k_max())
        .map(|i| KStat {
            k: i + 1,
            hits: reports.iter().map(|r| r.per_k[i].hits).sum(),
            n: reports.iter().map(|r| r.per_k[i].n).sum(),
            rate: reports.iter().map(|r| r.per_k[i].rate).sum::<f64>() / count,
        })
        .collect();
    Ok(EvalReport {
        project: first.project.clone(),
        assigner: first.assigner.clone(),
        runs: reports.iter().map(|r| r.runs).sum(),
        per_k,
        averaged_over_runs: true,
    })
}

/// `100 * (subject - reference) / reference`; `None` when the reference is
/// zero.
pub fn relative_improvement(subject: f64, reference: f64) -> Option<f64> {
    if reference == 0.0 || !reference.is_finite() || !subject.is_finite() {
        return None;
    }
    Some(100.0 * (subject - reference) / reference)
}

/// One decimal, halves away from zero. The nudge absorbs binary
/// representation error such as 6.25 arriving as 6.2499999.
pub fn round_one_decimal(value: f64) -> f64 {
    let scaled = value * 10.0;
    libm::round(scaled + libm::copysign(1e-9, scaled)) / 10.0
}

/// `+187.8%`, `0.0%`, `-3.1%` or `n/a`.
pub fn format_improvement(improvement: Option<f64>) -> String {
    match improvement.map(round_one_decimal) {
        None => String::from("n/a"),
        Some(v) if v > 0.0 => format!("+{v:.1}%"),
        Some(v) if v == 0.0 => String::from("0.0%"),
        Some(v) => format!("{v:.1}%"),
    }
}

/// A named Hit@K curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub rates: Vec<f64>,
}

/// Hit@K curves side by side with the improvement of `subject` over
/// `reference` per K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub project: String,
    pub columns: Vec<Column>,
    pub subject: usize,
    pub reference: usize,
}

/// A column source: a measured report, or a curve taken as given (for
/// example numbers copied from a publication).
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSource<'a> {
    Report(&'a EvalReport),
    Fixed { project: &'a str, column: Column },
}

impl ComparisonTable {
    pub fn new(project: impl Into<String>, columns: Vec<Column>, subject: usize, reference: usize) -> Result<Self> {
        let table = Self {
            project: project.into(),
            columns,
            subject,
            reference,
        };
        table.validate()?;
        Ok(table)
    }

    /// Builds a table from mixed sources, checking that they describe the
    /// same project (case-insensitively) and, for measured reports, the same
    /// number of test issues.
    pub fn from_sources(sources: &[ColumnSource<'_>], subject: usize, reference: usize) -> Result<Self> {
        let mut project: Option<String> = None;
        let mut n: Option<usize> = None;
        let mut columns = Vec::with_capacity(sources.len());
        for source in sources {
            let (p, column) = match source {
                ColumnSource::Report(r) => {
                    let count = r.per_k.first().map(|s| s.n / r.runs.max(1));
                    match (n, count) {
                        (Some(a), Some(b)) if a != b => {
                            return Err(Error::Incomparable(format!("{a} vs {b} test issues")))
                        }
                        (None, Some(b)) => n = Some(b),
                        _ => {}
                    }
                    (
                        r.project.as_str(),
                        Column {
                            name: r.assigner.clone(),
                            rates: r.rates(),
                        },
                    )
                }
                ColumnSource::Fixed { project, column } => (*project, column.clone()),
            };
            match &project {
                Some(existing) if existing.to_lowercase() != p.to_lowercase() => {
                    return Err(Error::Incomparable(format!("projects {existing} and {p}")));
                }
                None => project = Some(String::from(p)),
                _ => {}
            }
            columns.push(column);
        }
        Self::new(project.unwrap_or_default(), columns, subject, reference)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.len() < 2 {
            return Err(Error::Incomparable(String::from("need at least two columns")));
        }
        if self.subject >= self.columns.len() || self.reference >= self.columns.len() {
            return Err(Error::Incomparable(String::from("subject or reference column missing")));
        }
        let k = self.columns[0].rates.len();
        if k == 0 || self.columns.iter().any(|c| c.rates.len() != k) {
            return Err(Error::Incomparable(String::from("columns cover different K ranges")));
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.columns[0].rates.len()
    }

    /// Improvement of subject over reference for K = 1..=k_max.
    pub fn improvements(&self) -> Vec<Option<f64>> {
        let s = &self.columns[self.subject].rates;
        let r = &self.columns[self.reference].rates;
        s.iter().zip(r).map(|(&a, &b)| relative_improvement(a, b)).collect()
    }
}
