//! Developer-frequency filtering and reproducible train/validation/test splits.
//!
//! All splits operate on the corpus sorted by `(created_at, id)`. The first
//! `round(0.8 N)` reports train, the next `round(0.1 N)` validate and the
//! remainder test. Additional evaluation runs rotate a contiguous test window
//! through the chronologically last region (everything after the training
//! prefix), so the training prefix always precedes every evaluation report.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, IssueReport};
use crate::error::{Error, Result};

/// Default minimum number of resolved issues per developer.
pub const DEFAULT_THRESHOLD: usize = 10;
/// Default seed for every seeded component.
pub const DEFAULT_SEED: u64 = 3407;
/// Smallest corpus that gives non-empty train, validation and test parts.
pub const MIN_SPLIT_REPORTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitProtocol {
    /// Earliest 80% train, next 10% validation, last 10% test.
    Chronological,
    /// Training prefix as above; the test window is moved within the last
    /// 20% region, the rest of that region validates.
    RotatedFold,
}

/// Exact id membership of one experimental run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub protocol: SplitProtocol,
    pub run_index: usize,
    pub seed: u64,
    pub threshold: usize,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl SplitManifest {
    pub fn len(&self) -> usize {
        self.train_ids.len() + self.val_ids.len() + self.test_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of [`filter_by_developer_frequency`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub corpus: Corpus,
    pub removed_reports: usize,
    pub removed_developers: usize,
}

/// Drops every report whose assignee resolved fewer than `threshold`
/// reports in `corpus`. Order of the surviving reports is preserved.
pub fn filter_by_developer_frequency(corpus: &Corpus, threshold: usize) -> Result<FilterOutcome> {
    if threshold == 0 {
        return Err(Error::InvalidThreshold);
    }
    let counts = assignment_counts(corpus.reports());
    let kept: Vec<IssueReport> = corpus
        .reports()
        .iter()
        .filter(|r| counts[r.assignee.key()] >= threshold)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::FilterRemovedAll { threshold });
    }
    let removed_reports = corpus.len() - kept.len();
    let filtered = Corpus::new(corpus.project(), kept)?;
    Ok(FilterOutcome {
        removed_developers: corpus.developers().len() - filtered.developers().len(),
        removed_reports,
        corpus: filtered,
    })
}

/// Number of reports per assignee key.
pub fn assignment_counts<'a, I>(reports: I) -> BTreeMap<String, usize>
where
    I: IntoIterator<Item = &'a IssueReport>,
{
    let mut counts = BTreeMap::new();
    for r in reports {
        *counts.entry(String::from(r.assignee.key())).or_insert(0) += 1;
    }
    counts
}

/// Reports sorted by creation time, ties broken by id.
pub fn chronological_order(corpus: &Corpus) -> Vec<&IssueReport> {
    let mut sorted: Vec<&IssueReport> = corpus.reports().iter().collect();
    sorted.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
    sorted
}

/// `(train, val, test)` sizes for `n` reports: round-to-nearest for the
/// 80% and 10% parts, remainder to test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    // round(0.8 n) and round(0.1 n) in exact integer arithmetic, halves up
    let train = (8 * n + 5) / 10;
    let val = (n + 5) / 10;
    (train, val, n - train - val)
}

pub fn chronological_split(corpus: &Corpus, seed: u64, threshold: usize) -> Result<SplitManifest> {
    let sorted = chronological_order(corpus);
    check_size(sorted.len())?;
    let (train, val, _) = split_sizes(sorted.len());
    Ok(SplitManifest {
        protocol: SplitProtocol::Chronological,
        run_index: 0,
        seed,
        threshold,
        train_ids: ids(&sorted[..train]),
        val_ids: ids(&sorted[train..train + val]),
        test_ids: ids(&sorted[train + val..]),
    })
}

/// Number of distinct test windows available for the rotated-fold runs,
/// including the chronological one.
pub fn available_folds(n: usize) -> usize {
    let (train, _, test) = split_sizes(n);
    (n - train) - test + 1
}

/// Manifests for `runs` evaluation runs.
///
/// Run 0 is the chronological split. Run `k >= 1` places the test window at
/// an offset drawn without replacement from a seeded permutation of the
/// remaining window offsets inside the evaluation region, so every manifest
/// is a pure function of `(corpus, seed, run_index)`.
pub fn multi_run_folds(
    corpus: &Corpus,
    runs: usize,
    seed: u64,
    threshold: usize,
) -> Result<Vec<SplitManifest>> {
    if runs == 0 {
        return Err(Error::InvalidRuns);
    }
    let sorted = chronological_order(corpus);
    check_size(sorted.len())?;
    let available = available_folds(sorted.len());
    if runs > available {
        return Err(Error::TooManyRuns {
            requested: runs,
            available,
        });
    }
    let (train, _, test) = split_sizes(sorted.len());
    let region = &sorted[train..];
    let chrono_offset = region.len() - test;
    let mut offsets: Vec<usize> = (0..chrono_offset).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    offsets.shuffle(&mut rng);

    let mut manifests = Vec::with_capacity(runs);
    manifests.push(chronological_split(corpus, seed, threshold)?);
    for (k, &offset) in offsets.iter().take(runs - 1).enumerate() {
        let test_slice = &region[offset..offset + test];
        let mut val = ids(&region[..offset]);
        val.extend(ids(&region[offset + test..]));
        manifests.push(SplitManifest {
            protocol: SplitProtocol::RotatedFold,
            run_index: k + 1,
            seed,
            threshold,
            train_ids: ids(&sorted[..train]),
            val_ids: val,
            test_ids: ids(test_slice),
        });
    }
    Ok(manifests)
}

fn check_size(n: usize) -> Result<()> {
    if n < MIN_SPLIT_REPORTS {
        return Err(Error::TooFewReports {
            required: MIN_SPLIT_REPORTS,
            found: n,
        });
    }
    Ok(())
}

fn ids(reports: &[&IssueReport]) -> Vec<String> {
    reports.iter().map(|r| r.id.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::report;
    use alloc::collections::BTreeSet;
    use alloc::format;
    use alloc::vec;

    fn numbered(n: usize, ts: impl Fn(usize) -> i64) -> Corpus {
        let reports = (1..=n)
            .map(|i| report(&format!("{i:03}"), ts(i), "dev", ""))
            .collect();
        Corpus::new("p", reports).unwrap()
    }

    #[test]
    fn filter_keeps_frequent_developers() {
        let mut reports = Vec::new();
        for i in 0..12 {
            reports.push(report(&format!("a{i}"), i, "A", ""));
        }
        for i in 0..9 {
            reports.push(report(&format!("b{i}"), i, "B", ""));
        }
        let corpus = Corpus::new("p", reports).unwrap();
        let out = filter_by_developer_frequency(&corpus, 10).unwrap();
        assert_eq!(out.corpus.len(), 12);
        assert_eq!(out.removed_reports, 9);
        assert_eq!(out.removed_developers, 1);
        assert!(out.corpus.reports().iter().all(|r| r.assignee.key() == "a"));

        let same = filter_by_developer_frequency(&corpus, 1).unwrap();
        assert_eq!(same.corpus, corpus);
        assert_eq!(
            filter_by_developer_frequency(&corpus, 13),
            Err(Error::FilterRemovedAll { threshold: 13 })
        );
        assert_eq!(filter_by_developer_frequency(&corpus, 0), Err(Error::InvalidThreshold));
    }

    #[test]
    fn split_of_ten() {
        let corpus = numbered(10, |i| i as i64);
        let m = chronological_split(&corpus, 1, 10).unwrap();
        let expect: Vec<String> = (1..=8).map(|i| format!("{i:03}")).collect();
        assert_eq!(m.train_ids, expect);
        assert_eq!(m.val_ids, vec![String::from("009")]);
        assert_eq!(m.test_ids, vec![String::from("010")]);
    }

    #[test]
    fn split_ties_fall_back_to_id() {
        // ids inserted out of order, identical timestamps
        let reports = [7, 3, 10, 1, 5, 2, 9, 4, 8, 6]
            .iter()
            .map(|i| report(&format!("{i:03}"), 42, "dev", ""))
            .collect();
        let corpus = Corpus::new("p", reports).unwrap();
        let m = chronological_split(&corpus, 1, 10).unwrap();
        assert_eq!(m.train_ids.len(), 8);
        assert_eq!(m.train_ids[0], "001");
        assert_eq!(m.val_ids, vec![String::from("009")]);
        assert_eq!(m.test_ids, vec![String::from("010")]);
    }

    #[test]
    fn split_rejects_small_corpora() {
        let corpus = Corpus::new("p", vec![]).unwrap();
        assert!(matches!(
            chronological_split(&corpus, 1, 10),
            Err(Error::TooFewReports { found: 0, .. })
        ));
    }

    #[test]
    fn split_sizes_match_published_counts() {
        assert_eq!(split_sizes(16_106).0, 12_885);
        assert_eq!(split_sizes(10), (8, 1, 1));
        assert_eq!(split_sizes(15), (12, 2, 1));
    }

    #[test]
    fn single_run_is_chronological() {
        let corpus = numbered(30, |i| i as i64);
        let runs = multi_run_folds(&corpus, 1, 3407, 10).unwrap();
        assert_eq!(runs, vec![chronological_split(&corpus, 3407, 10).unwrap()]);
    }

    #[test]
    fn two_runs_on_hundred_reports() {
        let corpus = numbered(100, |i| i as i64);
        let runs = multi_run_folds(&corpus, 2, 3407, 10).unwrap();
        assert_eq!(runs.len(), 2);
        assert_ne!(runs[0].test_ids, runs[1].test_ids);
        assert_eq!(runs[1].protocol, SplitProtocol::RotatedFold);

        // enumerate the admissible folds by rule: a contiguous window of 10
        // among positions 81..=100 other than the last one
        let test: Vec<usize> = runs[1].test_ids.iter().map(|s| s.parse().unwrap()).collect();
        let start = test[0];
        assert!((81..=90).contains(&start));
        assert_eq!(test, (start..start + 10).collect::<Vec<_>>());
        for m in &runs {
            let train_max = m.train_ids.iter().map(|s| s.parse::<usize>().unwrap()).max();
            let eval_min = m
                .val_ids
                .iter()
                .chain(&m.test_ids)
                .map(|s| s.parse::<usize>().unwrap())
                .min();
            assert!(train_max < eval_min);
            let all: BTreeSet<&String> =
                m.train_ids.iter().chain(&m.val_ids).chain(&m.test_ids).collect();
            assert_eq!(all.len(), 100);
        }
        assert_eq!(runs, multi_run_folds(&corpus, 2, 3407, 10).unwrap());
    }

    #[test]
    fn runs_bounded_by_folds() {
        let corpus = numbered(10, |i| i as i64);
        assert_eq!(available_folds(10), 2);
        assert!(multi_run_folds(&corpus, 2, 1, 10).is_ok());
        assert_eq!(
            multi_run_folds(&corpus, 3, 1, 10),
            Err(Error::TooManyRuns { requested: 3, available: 2 })
        );
        assert_eq!(multi_run_folds(&corpus, 0, 1, 10), Err(Error::InvalidRuns));
    }
}
