//! Desk-scale trainable rankers.
//!
//! Reports are turned into bag-of-words vectors over a vocabulary built from
//! the training split. A linear model scores every candidate developer; it
//! is trained either with softmax cross-entropy (the supervised fine-tuning
//! analog) or with per-class logistic loss (the one-vs-rest text baseline).
//! Both use AdamW with linear warmup, gradient accumulation and seeded
//! shuffling.

mod features;
mod model;
mod optim;
mod train;

pub use features::{build_vocabulary, featurize, tokenize, FeatureMode, FeatureVector, Featurizer, Vocabulary};
pub use model::{
    model_rank, one_vs_rest_logistic, rank_classes, softmax, softmax_cross_entropy, Gradient,
    LinearModel, LossAndGrad, Objective,
};
pub use optim::{lr_schedule, optimizer_step, warmup_steps, AdamW, TrainingConfig};
pub use train::{train, EpochSummary, LearnedAssigner, StepRecord, TrainOutcome};
