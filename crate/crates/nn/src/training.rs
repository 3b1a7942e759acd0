//! Minibatch loop shared by every neural model.

use candle_core::{DType, Tensor, D};
use candle_nn::Optimizer;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sabia_core::{argmax, Label, SeededRng};

use crate::{Error, Result};

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's training posts.
    pub loss: f64,
    /// Accuracy on the training batches as seen during the epoch.
    pub train_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_accuracy: Option<f64>,
}

/// Mean cross-entropy with per-class weights, normalized by the total
/// weight of the batch (unit weights give the plain mean).
pub fn weighted_cross_entropy(logits: &Tensor, targets: &[usize], weights: &[f64], dtype: DType) -> Result<Tensor> {
    let (b, c) = logits.dims2()?;
    let mut onehot = vec![0.0f64; b * c];
    let mut total = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        onehot[i * c + y] = weights[y];
        total += weights[y];
    }
    let onehot = Tensor::from_vec(onehot, (b, c), logits.device())?.to_dtype(dtype)?;
    let logp = candle_nn::ops::log_softmax(logits, D::Minus1)?;
    Ok((logp.mul(&onehot)?.sum_all()? * (-1.0 / total))?)
}

/// Inverse-frequency class weights, `n / (classes * count)`.
pub fn inverse_frequency_weights(counts: &[usize; Label::COUNT]) -> [f64; Label::COUNT] {
    let n: usize = counts.iter().sum();
    std::array::from_fn(|c| if counts[c] == 0 { 0.0 } else { n as f64 / (Label::COUNT as f64 * counts[c] as f64) })
}

pub(crate) struct LoopSpec<'a> {
    pub targets: &'a [usize],
    pub weights: [f64; Label::COUNT],
    pub epochs: usize,
    pub batch_size: usize,
    pub dtype: DType,
}

/// Shuffle, batch, step. `forward` maps a batch of row indices to logits
/// (dropout on), `dev` scores the current model after each epoch.
pub(crate) fn run<O, F, V>(
    spec: LoopSpec,
    opt: &mut O,
    rng: &mut SeededRng,
    mut forward: F,
    mut dev: V,
) -> Result<Vec<EpochStats>>
where
    O: Optimizer,
    F: FnMut(&[usize], &mut SeededRng) -> Result<Tensor>,
    V: FnMut() -> Result<Option<f64>>,
{
    let n = spec.targets.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for epoch in 1..=spec.epochs {
        order.shuffle(rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(spec.batch_size) {
            let logits = forward(batch, rng)?;
            let ys: Vec<usize> = batch.iter().map(|&i| spec.targets[i]).collect();
            let loss = weighted_cross_entropy(&logits, &ys, &spec.weights, spec.dtype)?;
            opt.backward_step(&loss)?;
            let value = loss.to_dtype(DType::F64)?.to_scalar::<f64>()?;
            if !value.is_finite() {
                return Err(Error::Training(format!("loss became {value} in epoch {epoch}")));
            }
            loss_sum += value * batch.len() as f64;
            for (row, &y) in logits.to_dtype(DType::F64)?.to_vec2::<f64>()?.iter().zip(&ys) {
                correct += usize::from(argmax(row) == y);
            }
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            train_accuracy: correct as f64 / n as f64,
            dev_accuracy: dev()?,
        };
        log::info!(
            "epoch {}/{} loss {:.4} train_acc {:.3}{}",
            epoch,
            spec.epochs,
            stats.loss,
            stats.train_accuracy,
            stats.dev_accuracy.map(|a| format!(" dev_acc {a:.3}")).unwrap_or_default()
        );
        history.push(stats);
    }
    Ok(history)
}

pub(crate) fn accuracy(pred: &[Label], gold: &[Label]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    pred.iter().zip(gold).filter(|(a, b)| a == b).count() as f64 / gold.len() as f64
}
