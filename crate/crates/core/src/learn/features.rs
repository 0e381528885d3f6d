use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::IssueReport;
use crate::error::{Error, Result};

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn report_tokens(report: &IssueReport) -> impl Iterator<Item = String> + '_ {
    tokenize(&report.title).chain(tokenize(&report.description))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    #[default]
    Count,
    Tfidf,
}

/// Token index built from training text only. Indices are dense and follow
/// token order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    min_frequency: usize,
    built_from: String,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from tokens listed in index order.
    pub fn from_parts(
        tokens: Vec<String>,
        doc_freq: Vec<usize>,
        n_docs: usize,
        min_frequency: usize,
        built_from: String,
    ) -> Result<Self> {
        if tokens.len() != doc_freq.len() {
            return Err(Error::Shape("vocabulary tokens vs document frequencies"));
        }
        let index: BTreeMap<String, usize> =
            tokens.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        if index.len() != doc_freq.len() || index.values().enumerate().any(|(i, &j)| i != j) {
            return Err(Error::Shape("vocabulary tokens must be sorted and unique"));
        }
        Ok(Self {
            index,
            doc_freq,
            n_docs,
            min_frequency,
            built_from,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Tokens in index order.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn doc_freq(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn built_from(&self) -> &str {
        &self.built_from
    }

    fn idf(&self, index: usize) -> f64 {
        libm::log(self.n_docs as f64 / self.doc_freq[index] as f64)
    }
}

/// Keeps every token whose total count over `train_reports` reaches
/// `min_frequency`. `built_from` labels the split for provenance.
pub fn build_vocabulary<'a, I>(train_reports: I, min_frequency: usize, built_from: &str) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a IssueReport>,
{
    let mut total: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut n_docs = 0;
    for report in train_reports {
        n_docs += 1;
        let mut in_doc = BTreeSet::new();
        for token in report_tokens(report) {
            let entry = total.entry(token.clone()).or_insert((0, 0));
            entry.0 += 1;
            if in_doc.insert(token) {
                entry.1 += 1;
            }
        }
    }
    if n_docs == 0 {
        return Err(Error::EmptySplit);
    }
    let (tokens, doc_freq): (Vec<String>, Vec<usize>) = total
        .into_iter()
        .filter(|(_, (count, _))| *count >= min_frequency)
        .map(|(t, (_, df))| (t, df))
        .unzip();
    if tokens.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Vocabulary::from_parts(tokens, doc_freq, n_docs, min_frequency, String::from(built_from))
}

/// Sparse bag-of-words vector; indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mode: FeatureMode,
    pub entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            mode: self.mode,
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }
}

/// Counts of in-vocabulary tokens among the first `max_tokens` tokens of
/// title and description. Tfidf mode multiplies by `ln(N / df)` and
/// L2-normalizes; an all-zero vector comes back empty.
pub fn featurize(report: &IssueReport, vocab: &Vocabulary, mode: FeatureMode, max_tokens: usize) -> FeatureVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for token in report_tokens(report).take(max_tokens) {
        if let Some(i) = vocab.get(&token) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let mut entries: Vec<(usize, f64)> = counts.into_iter().collect();
    if mode == FeatureMode::Tfidf {
        for (i, v) in entries.iter_mut() {
            *v *= vocab.idf(*i);
        }
        entries.retain(|&(_, v)| v != 0.0);
        let norm = libm::sqrt(entries.iter().map(|(_, v)| v * v).sum::<f64>());
        if norm > 0.0 {
            for (_, v) in entries.iter_mut() {
                *v /= norm;
            }
        }
    }
    FeatureVector { mode, entries }
}

/// A vocabulary with the feature mode and token cap used to encode reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Featurizer {
    pub vocab: Vocabulary,
    pub mode: FeatureMode,
    pub max_tokens: usize,
}

impl Featurizer {
    pub fn encode(&self, report: &IssueReport) -> FeatureVector {
        featurize(report, &self.vocab, self.mode, self.max_tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::report;
    use alloc::vec;

    fn plain(id: &str, text: &str) -> IssueReport {
        let mut r = report(id, 0, "a", text);
        r.title = String::new();
        r
    }

    #[test]
    fn vocabulary_examples() {
        let reports = vec![plain("1", "fix crash"), plain("2", "fix leak")];
        let v = build_vocabulary(&reports, 1, "train").unwrap();
        assert_eq!(v.tokens().collect::<Vec<_>>(), ["crash", "fix", "leak"]);
        let v = build_vocabulary(&reports, 2, "train").unwrap();
        assert_eq!(v.tokens().collect::<Vec<_>>(), ["fix"]);
        assert_eq!(v.doc_freq(), &[2]);
        assert_eq!(build_vocabulary(&[], 1, "train"), Err(Error::EmptySplit));
        assert_eq!(build_vocabulary(&reports, 5, "train"), Err(Error::EmptyVocabulary));
    }

    #[test]
    fn tokenizer_lowercases_alphanumeric_runs() {
        let t: Vec<String> = tokenize("NullPointer in Foo.bar(); x2!").collect();
        assert_eq!(t, ["nullpointer", "in", "foo", "bar", "x2"]);
    }

    #[test]
    fn count_features() {
        let v = build_vocabulary(&[plain("1", "fix crash")], 1, "t").unwrap();
        let f = featurize(&plain("2", "fix fix crash"), &v, FeatureMode::Count, 2048);
        let fix = v.get("fix").unwrap();
        let crash = v.get("crash").unwrap();
        let mut expect = vec![(fix, 2.0), (crash, 1.0)];
        expect.sort_by_key(|e| e.0);
        assert_eq!(f.entries, expect);
        assert!(featurize(&plain("3", "unseen words"), &v, FeatureMode::Count, 2048).is_empty());
        let f = featurize(&plain("2", "fix fix crash"), &v, FeatureMode::Count, 1);
        assert_eq!(f.entries, vec![(fix, 1.0)]);
    }

    #[test]
    fn tfidf_features() {
        let single = vec![plain("1", "fix crash")];
        let v = build_vocabulary(&single, 1, "t").unwrap();
        assert!(featurize(&single[0], &v, FeatureMode::Tfidf, 2048).is_empty());

        let docs = vec![plain("1", "fix crash"), plain("2", "fix leak")];
        let v = build_vocabulary(&docs, 1, "t").unwrap();
        let f = featurize(&plain("3", "fix crash crash"), &v, FeatureMode::Tfidf, 2048);
        // fix has idf 0 and drops out; crash alone normalizes to 1
        assert_eq!(f.entries, vec![(v.get("crash").unwrap(), 1.0)]);
    }
}
