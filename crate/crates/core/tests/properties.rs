use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use triage_core::eval::{average_runs, evaluate, relative_improvement, round_one_decimal, KStat};
use triage_core::pipeline::{assignment_counts, filter_by_developer_frequency, multi_run_folds, available_folds};
use triage_core::ranker::{parse_ranked_output, MAX_RANKING};
use triage_core::{CandidateSet, Corpus, DeveloperId, EvalReport, IssueReport, Ranking};

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((0i64..50, 0usize..8), 1..120).prop_map(|rows| {
        let reports = rows
            .into_iter()
            .enumerate()
            .map(|(i, (ts, d))| IssueReport {
                id: format!("r{i}"),
                created_at: ts,
                title: String::new(),
                description: String::new(),
                assignee: DeveloperId::normalize(&format!("Dev{d}@x")).unwrap(),
                interactions: None,
            })
            .collect();
        Corpus::new("p", reports).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn filter_keeps_exactly_frequent_developers(corpus in corpus_strategy(), threshold in 1usize..12) {
        let before = assignment_counts(corpus.reports());
        match filter_by_developer_frequency(&corpus, threshold) {
            Ok(out) => {
                let after = assignment_counts(out.corpus.reports());
                for (dev, n) in &before {
                    if *n >= threshold {
                        prop_assert_eq!(after.get(dev), Some(n));
                    } else {
                        prop_assert!(!after.contains_key(dev));
                    }
                }
                prop_assert_eq!(out.removed_reports + out.corpus.len(), corpus.len());
            }
            Err(_) => prop_assert!(before.values().all(|n| *n < threshold)),
        }
    }

    #[test]
    fn manifests_partition_without_leakage(corpus in corpus_strategy(), seed in any::<u64>(), runs in 1usize..5) {
        prop_assume!(corpus.len() >= 10);
        let runs = runs.min(available_folds(corpus.len()));
        let manifests = multi_run_folds(&corpus, runs, seed, 1).unwrap();
        prop_assert_eq!(manifests.len(), runs);
        let time: BTreeMap<&str, i64> = corpus.reports().iter().map(|r| (r.id.as_str(), r.created_at)).collect();
        let mut tests = BTreeSet::new();
        for m in &manifests {
            let all: BTreeSet<&String> = m.train_ids.iter().chain(&m.val_ids).chain(&m.test_ids).collect();
            prop_assert_eq!(all.len(), corpus.len());
            let latest_train = m.train_ids.iter().map(|id| time[id.as_str()]).max().unwrap();
            let earliest_eval = m.val_ids.iter().chain(&m.test_ids).map(|id| time[id.as_str()]).min().unwrap();
            prop_assert!(latest_train <= earliest_eval);
            prop_assert!(!m.test_ids.is_empty());
            prop_assert!(tests.insert(m.test_ids.clone()), "repeated test window");
        }
        prop_assert_eq!(multi_run_folds(&corpus, runs, seed, 1).unwrap(), manifests);
    }

    #[test]
    fn rates_bounded_and_monotone(
        cases in prop::collection::vec((prop::collection::vec(0usize..6, 0..10), 0usize..7), 1..30)
    ) {
        let rankings: Vec<Ranking> = cases.iter().enumerate().map(|(i, (items, _))| {
            let mut seen = BTreeSet::new();
            Ranking {
                issue_id: format!("i{i}"),
                source: "t".into(),
                items: items.iter().filter(|d| seen.insert(**d)).map(|d| DeveloperId::normalize(&format!("d{d}")).unwrap()).collect(),
            }
        }).collect();
        let truths: BTreeMap<String, DeveloperId> = cases.iter().enumerate()
            .map(|(i, (_, t))| (format!("i{i}"), DeveloperId::normalize(&format!("d{t}")).unwrap())).collect();
        let r = evaluate("p", "t", &rankings, &truths, 10).unwrap();
        for w in r.per_k.windows(2) {
            prop_assert!(w[0].rate <= w[1].rate);
        }
        for s in &r.per_k {
            prop_assert!(s.hits <= s.n && (0.0..=1.0).contains(&s.rate));
            prop_assert_eq!(s.rate, s.hits as f64 / s.n as f64);
        }
        let same = average_runs(&[r.clone(), r.clone()]).unwrap();
        prop_assert_eq!(same.rates(), r.rates());
    }

    #[test]
    fn averaging_is_permutation_invariant(hits in prop::collection::vec(prop::collection::vec(0usize..=20, 10), 1..5), shift in 0usize..5) {
        let reports: Vec<EvalReport> = hits.iter().map(|h| {
            let mut h = h.clone();
            h.sort();
            EvalReport {
                project: "p".into(),
                assigner: "t".into(),
                runs: 1,
                per_k: h.iter().enumerate().map(|(i, &hits)| KStat { k: i + 1, hits, n: 20, rate: hits as f64 / 20.0 }).collect(),
                averaged_over_runs: false,
            }
        }).collect();
        let mut rotated = reports.clone();
        rotated.rotate_left(shift % reports.len());
        let a = average_runs(&reports).unwrap();
        let b = average_runs(&rotated).unwrap();
        for (x, y) in a.rates().iter().zip(b.rates()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        prop_assert_eq!(a.runs, reports.len());
    }

    #[test]
    fn improvement_sign_and_identity(a in 0.001f64..1.0, b in 0.001f64..1.0) {
        prop_assert_eq!(relative_improvement(a, a), Some(0.0));
        let up = relative_improvement(a.max(b), a.min(b)).unwrap();
        let down = relative_improvement(a.min(b), a.max(b)).unwrap();
        prop_assert!(up >= 0.0 && down <= 0.0);
        prop_assert_eq!(relative_improvement(a, 0.0), None);
        prop_assert!((round_one_decimal(up) - up).abs() <= 0.05 + 1e-9);
    }

    #[test]
    fn parsing_is_closed_world(raw in "\\PC{0,200}", members in prop::collection::btree_set("[a-e]{1,3}@[xy]", 1..15)) {
        let ids: Vec<DeveloperId> = members.iter().map(|m| DeveloperId::normalize(m).unwrap()).collect();
        let cands = CandidateSet::from_identifiers("p", &ids).unwrap();
        let mixed = format!("{raw}, {}", members.iter().cloned().collect::<Vec<_>>().join(" ; "));
        for text in [raw.as_str(), mixed.as_str()] {
            let r = parse_ranked_output("i", "llm", text, &cands);
            prop_assert!(r.items.len() <= MAX_RANKING);
            prop_assert!(r.is_valid(&cands));
            let unique: BTreeSet<_> = r.items.iter().collect();
            prop_assert_eq!(unique.len(), r.items.len());
        }
    }
}
