//! Core algorithms for ranked issue assignment.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds under `#![no_std]` with `alloc`. File formats, ingestion, the HTTP
//! inference client and the command line live in the `triage-bench` crate.
//!
//! Module map:
//!
//! - [`corpus`]: issue reports, developer identifiers, dataset statistics
//! - [`pipeline`]: developer-frequency filtering and leakage-free splits
//! - [`promptgen`]: training / evaluation prompt rendering with a token budget
//! - [`ranker`]: candidate sets, rankings, constrained output parsing, the
//!   frequency baseline and the [`ranker::Assigner`] contract
//! - [`learn`]: bag-of-words features, softmax and one-vs-rest linear
//!   rankers trained with AdamW
//! - [`eval`]: Hit@K, multi-run averaging and comparison tables
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod learn;
pub mod pipeline;
pub mod promptgen;
pub mod ranker;

pub use corpus::{Corpus, CorpusStats, DeveloperId, IssueReport};
pub use error::{Error, Result};
pub use eval::{ComparisonTable, EvalReport};
pub use pipeline::{SplitManifest, SplitProtocol};
pub use promptgen::{PromptKind, PromptTemplate, TrainingExample};
pub use ranker::{Assigner, CandidateSet, Ranking};
