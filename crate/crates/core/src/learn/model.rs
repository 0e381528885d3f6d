use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, Featurizer};
#[cfg(test)]
use super::features::FeatureMode;
use crate::corpus::IssueReport;
use crate::error::{Error, Result};
use crate::ranker::{CandidateSet, Ranking, MAX_RANKING};

/// Dense linear scorer over `classes` candidates and `features` inputs.
///
/// Parameters are stored flat: the row-major `classes x features` weight
/// matrix followed by the bias vector. Gradients and optimizer moments use
/// the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    classes: usize,
    features: usize,
    params: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            classes,
            features,
            params: vec![0.0; classes * features + classes],
        }
    }

    pub fn from_parts(classes: usize, features: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != classes * features || bias.len() != classes {
            return Err(Error::Shape("weights must be classes x features, bias length classes"));
        }
        let mut params = weights;
        params.extend(bias);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Self {
            classes,
            features,
            params,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.params[..self.classes * self.features]
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        let n = self.classes * self.features;
        &mut self.params[..n]
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.classes * self.features..]
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        let n = self.classes * self.features;
        &mut self.params[n..]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.params[class * self.features + feature]
    }

    pub fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        let w = self.weights();
        self.bias()
            .iter()
            .enumerate()
            .map(|(c, b)| {
                let row = &w[c * self.features..(c + 1) * self.features];
                b + x.entries.iter().map(|&(i, v)| row[i] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.params.iter().map(|p| p * p).sum())
    }

    fn check_input(&self, x: &FeatureVector, label: usize) -> Result<()> {
        if label >= self.classes {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.classes,
            });
        }
        if x.entries.iter().any(|&(i, _)| i >= self.features) {
            return Err(Error::Shape("feature index outside model width"));
        }
        if x.entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(())
    }
}

/// Gradient with the same flat layout as [`LinearModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub classes: usize,
    pub features: usize,
    pub values: Vec<f64>,
}

impl Gradient {
    pub fn zeros_like(model: &LinearModel) -> Self {
        Self {
            classes: model.classes,
            features: model.features,
            values: vec![0.0; model.params.len()],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.values[..self.classes * self.features]
    }

    pub fn bias(&self) -> &[f64] {
        &self.values[self.classes * self.features..]
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Adds `scale * (dlogits outer x)` and `scale * dlogits` to the bias.
    fn add_outer(&mut self, dlogits: &[f64], x: &FeatureVector, scale: f64) {
        let bias_start = self.classes * self.features;
        for (c, d) in dlogits.iter().enumerate() {
            let d = d * scale;
            if d == 0.0 {
                continue;
            }
            let row = c * self.features;
            for &(i, v) in &x.entries {
                self.values[row + i] += d * v;
            }
            self.values[bias_start + c] += d;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: Gradient,
}

/// Training loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Multiclass cross-entropy over a softmax.
    #[default]
    Softmax,
    /// Independent logistic loss per class, the label class positive.
    OneVsRest,
}

impl Objective {
    /// Adds this example's gradient (times `scale`) to `grad` and returns
    /// its loss.
    pub(crate) fn accumulate(
        self,
        model: &LinearModel,
        x: &FeatureVector,
        label: usize,
        grad: &mut Gradient,
        scale: f64,
    ) -> Result<f64> {
        model.check_input(x, label)?;
        let logits = model.logits(x);
        let (loss, dlogits) = match self {
            Objective::Softmax => softmax_loss(&logits, label),
            Objective::OneVsRest => logistic_loss(&logits, label),
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        grad.add_outer(&dlogits, x, scale);
        Ok(loss)
    }

    pub fn loss_and_grad(self, model: &LinearModel, x: &FeatureVector, label: usize) -> Result<LossAndGrad> {
        let mut grad = Gradient::zeros_like(model);
        let loss = self.accumulate(model, x, label, &mut grad, 1.0)?;
        Ok(LossAndGrad { loss, grad })
    }
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn softmax_loss(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = libm::log(logits.iter().map(|z| libm::exp(z - max)).sum::<f64>()) + max;
    let mut p = softmax(logits);
    p[label] -= 1.0;
    (log_sum - logits[label], p)
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn logistic_loss(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let d = logits
        .iter()
        .enumerate()
        .map(|(c, &z)| {
            let target = if c == label { 1.0 } else { 0.0 };
            // -log sigmoid(z) for the positive class, -log(1 - sigmoid(z)) otherwise
            loss += if c == label { softplus(-z) } else { softplus(z) };
            sigmoid(z) - target
        })
        .collect();
    (loss, d)
}

/// `-log softmax(Wx + b)[label]` and its gradient.
pub fn softmax_cross_entropy(model: &LinearModel, x: &FeatureVector, label: usize) -> Result<LossAndGrad> {
    Objective::Softmax.loss_and_grad(model, x, label)
}

/// Sum over classes of the binary logistic loss, label class positive.
pub fn one_vs_rest_logistic(model: &LinearModel, x: &FeatureVector, label: usize) -> Result<LossAndGrad> {
    Objective::OneVsRest.loss_and_grad(model, x, label)
}

/// Class indices by descending score, ties to the lower index, at most `k`.
pub fn rank_classes(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Ranks candidates by model score. Class `i` is the `i`-th candidate in key
/// order, so index ties resolve lexicographically by key.
pub fn model_rank(
    model: &LinearModel,
    report: &IssueReport,
    featurizer: &Featurizer,
    candidates: &CandidateSet,
    k: usize,
    source: &str,
) -> Result<Ranking> {
    if model.classes() != candidates.len() {
        return Err(Error::Shape("model classes differ from candidate set size"));
    }
    if model.features() != featurizer.vocab.len() {
        return Err(Error::Shape("model width differs from vocabulary size"));
    }
    let x = featurizer.encode(report);
    let logits = model.logits(&x);
    let members: Vec<_> = candidates.members().collect();
    let items = rank_classes(&logits, k.min(MAX_RANKING))
        .into_iter()
        .map(|c| members[c].clone())
        .collect();
    Ok(Ranking {
        issue_id: report.id.clone(),
        source: String::from(source),
        items,
    })
}
