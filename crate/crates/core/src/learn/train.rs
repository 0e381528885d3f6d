use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{build_vocabulary, FeatureVector, Featurizer};
use super::model::{model_rank, Gradient, LinearModel, Objective};
use super::optim::{optimizer_step, AdamW, TrainingConfig};
use crate::corpus::IssueReport;
use crate::error::{Error, Result};
use crate::ranker::{Assigner, CandidateSet, Ranking};

/// Loss and learning rate of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    /// Mean micro-batch loss that produced this step's gradient.
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean loss over validation reports whose assignee is a candidate.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearModel,
    pub featurizer: Featurizer,
    pub history: Vec<StepRecord>,
    pub epochs: Vec<EpochSummary>,
}

fn labelled(
    reports: &[&IssueReport],
    featurizer: &Featurizer,
    candidates: &CandidateSet,
    strict: bool,
) -> Result<Vec<(FeatureVector, usize)>> {
    let mut out = Vec::with_capacity(reports.len());
    for r in reports {
        match candidates.index_of(&r.assignee) {
            Some(label) => out.push((featurizer.encode(r), label)),
            None if strict => return Err(Error::UnknownAssignee(String::from(r.assignee.raw()))),
            None => {}
        }
    }
    Ok(out)
}

fn mean_loss(model: &LinearModel, objective: Objective, data: &[(FeatureVector, usize)]) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    let mut scratch = Gradient::zeros_like(model);
    let mut total = 0.0;
    for (x, label) in data {
        total += objective.accumulate(model, x, *label, &mut scratch, 0.0)?;
    }
    Ok(Some(total / data.len() as f64))
}

/// Trains a linear ranker over `candidates`.
///
/// The vocabulary comes from `train` only. Every epoch visits the training
/// reports in a seeded shuffled order, one report per micro-batch; gradients
/// of `grad_accumulation_steps` consecutive micro-batches are averaged
/// before each AdamW update. Weights start at zero, so the result is a pure
/// function of the inputs and `config`. `on_epoch` runs after each epoch
/// (checkpointing hook).
pub fn train<F>(
    train: &[&IssueReport],
    val: &[&IssueReport],
    candidates: &CandidateSet,
    config: &TrainingConfig,
    objective: Objective,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochSummary, &LinearModel, &Featurizer),
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptySplit);
    }
    let featurizer = Featurizer {
        vocab: build_vocabulary(train.iter().copied(), config.min_frequency, "train")?,
        mode: config.feature_mode,
        max_tokens: config.max_features_tokens,
    };
    let data = labelled(train, &featurizer, candidates, true)?;
    let val_data = labelled(val, &featurizer, candidates, false)?;

    let mut model = LinearModel::zeros(candidates.len(), featurizer.vocab.len());
    let mut state = AdamW::new(model.params().len());
    let mut grad = Gradient::zeros_like(&model);
    let accum = config.grad_accumulation_steps;
    let steps_per_epoch = data.len().div_ceil(accum);
    let total_steps = steps_per_epoch * config.epochs;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(total_steps);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut global_step = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(accum) {
            grad.clear();
            let scale = 1.0 / chunk.len() as f64;
            let mut loss = 0.0;
            for &i in chunk {
                let (x, label) = &data[i];
                loss += objective.accumulate(&model, x, *label, &mut grad, scale)?;
            }
            loss *= scale;
            let lr = optimizer_step(&mut model, &grad, &mut state, config, global_step, total_steps)?;
            history.push(StepRecord {
                step: global_step,
                lr,
                loss,
            });
            epoch_loss += loss * chunk.len() as f64;
            global_step += 1;
        }
        let summary = EpochSummary {
            epoch,
            train_loss: epoch_loss / data.len() as f64,
            val_loss: mean_loss(&model, objective, &val_data)?,
        };
        on_epoch(&summary, &model, &featurizer);
        epochs.push(summary);
    }

    Ok(TrainOutcome {
        model,
        featurizer,
        history,
        epochs,
    })
}

/// A trained linear model behind the [`Assigner`] contract.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedAssigner {
    pub name: String,
    pub model: LinearModel,
    pub featurizer: Featurizer,
}

impl Assigner for LearnedAssigner {
    type Error = Error;

    fn name(&self) -> &str {
        &self.name
    }

    fn rank(&self, report: &IssueReport, candidates: &CandidateSet, k: usize) -> Result<Ranking> {
        if k == 0 {
            return Err(Error::InvalidK);
        }
        model_rank(&self.model, report, &self.featurizer, candidates, k, &self.name)
    }
}
