//! Published Hit@K curves and improvement percentages, shipped as static
//! comparison constants. These numbers are copied, never recomputed.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;
use triage_core::eval::Column;

/// Suffix appended to the name of every published column.
pub const PUBLISHED_TAG: &str = " [published]";
pub const PUBLISHED_NOTE: &str = "published, not reproduced";

const RAW: &str = include_str!("../../data/published_hitk.json");

#[derive(Debug, Deserialize)]
pub struct PublishedResults {
    pub note: String,
    /// dataset -> method -> K -> rate
    pub hit_at_k: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    /// dataset -> "<subject>_vs_<reference>" -> K -> percentage
    pub improve_pct: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
}

/// One published improvement cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementCell {
    pub dataset: String,
    pub subject: String,
    pub reference: String,
    pub k: usize,
    pub subject_rate: f64,
    pub reference_rate: f64,
    pub published_pct: f64,
}

pub fn published() -> &'static PublishedResults {
    static CELL: OnceLock<PublishedResults> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(RAW).expect("bundled constants parse"))
}

fn curve(points: &BTreeMap<String, f64>) -> Option<Vec<f64>> {
    let mut pairs: Vec<(usize, f64)> = points
        .iter()
        .map(|(k, v)| k.parse().ok().map(|k| (k, *v)))
        .collect::<Option<_>>()?;
    pairs.sort_by_key(|p| p.0);
    pairs
        .iter()
        .enumerate()
        .all(|(i, p)| p.0 == i + 1)
        .then(|| pairs.into_iter().map(|p| p.1).collect())
}

impl PublishedResults {
    /// Keys of the form `dataset/method`.
    pub fn keys(&self) -> Vec<String> {
        self.hit_at_k
            .iter()
            .flat_map(|(d, methods)| methods.keys().map(move |m| format!("{d}/{m}")))
            .collect()
    }

    /// Looks up `dataset/method` case-insensitively. Returns the dataset
    /// name and a column tagged as published.
    pub fn column(&self, key: &str) -> Option<(String, Column)> {
        let key = key.trim().to_lowercase();
        let (dataset, method) = key.split_once('/')?;
        let rates = curve(self.hit_at_k.get(dataset)?.get(method)?)?;
        Some((
            dataset.to_string(),
            Column {
                name: format!("{method}{PUBLISHED_TAG}"),
                rates,
            },
        ))
    }

    pub fn rate(&self, dataset: &str, method: &str, k: usize) -> Option<f64> {
        self.hit_at_k.get(dataset)?.get(method)?.get(&k.to_string()).copied()
    }

    /// Every published improvement cell joined with the two rates it was
    /// derived from.
    pub fn improvement_cells(&self) -> Vec<ImprovementCell> {
        let mut out = Vec::new();
        for (dataset, comparisons) in &self.improve_pct {
            for (name, cells) in comparisons {
                let Some((subject, reference)) = name.split_once("_vs_") else {
                    continue;
                };
                for (k, &pct) in cells {
                    let Ok(k) = k.parse::<usize>() else { continue };
                    if let (Some(s), Some(r)) = (self.rate(dataset, subject, k), self.rate(dataset, reference, k)) {
                        out.push(ImprovementCell {
                            dataset: dataset.clone(),
                            subject: subject.into(),
                            reference: reference.into(),
                            k,
                            subject_rate: s,
                            reference_rate: r,
                            published_pct: pct,
                        });
                    }
                }
            }
        }
        out.sort_by(|a, b| {
            (&a.dataset, &a.reference, a.k).cmp(&(&b.dataset, &b.reference, b.k))
        });
        out
    }
}

pub fn is_published(column: &Column) -> bool {
    column.name.ends_with(PUBLISHED_TAG)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let p = published();
        let (dataset, col) = p.column("EclipseJDT/NCGBT").unwrap();
        assert_eq!(dataset, "eclipsejdt");
        assert_eq!(col.rates.len(), 10);
        assert_eq!(col.rates[0], 0.2307);
        assert!(is_published(&col));
        assert!(p.column("eclipsejdt/nope").is_none());
        assert!(p.column("nonsense").is_none());
        assert_eq!(p.keys().len(), 12);
        assert_eq!(p.improvement_cells().len(), 40);
    }
}
