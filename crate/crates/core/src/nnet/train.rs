//! Momentum SGD with early stopping on validation RMSE.

use crate::error::{Error, Result};
use crate::rng::SeededRng;

use super::{rmse_loss, CnnModel, LayerParams, Tensor};

#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// epochs without validation improvement before stopping
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            momentum: 0.9,
            batch_size: 128,
            patience: 50,
            max_epochs: 5000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument("learning rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must be in [0,1)".into()));
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument("batch size, patience and max epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

impl History {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.best_epoch]
    }
}

/// Normalized dataset: stacked inputs [n, c, h, w] and targets [n, 4].
#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gather(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let in_len = self.inputs.item_len();
        let out_len = self.targets.item_len();
        let mut xs = Vec::with_capacity(indices.len() * in_len);
        let mut ys = Vec::with_capacity(indices.len() * out_len);
        for &i in indices {
            xs.extend_from_slice(self.inputs.item(i));
            ys.extend_from_slice(self.targets.item(i));
        }
        let mut xshape = self.inputs.shape().to_vec();
        xshape[0] = indices.len();
        (
            Tensor::from_vec(&xshape, xs).expect("gather shape"),
            Tensor::from_vec(&[indices.len(), out_len], ys).expect("gather shape"),
        )
    }
}

pub fn validation_loss(model: &CnnModel, val: &Dataset) -> Result<f64> {
    let pred = model.forward(&val.inputs)?;
    Ok(rmse_loss(&pred, &val.targets)?.0)
}

/// Minibatch SGD with classical momentum (v <- mu*v - eta*grad; w <- w + v),
/// per-epoch shuffling from the config seed, early stopping on validation
/// RMSE with the configured patience. Returns the best-validation snapshot.
pub fn train(model: &CnnModel, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<(CnnModel, History)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("train and validation sets must be non-empty".into()));
    }

    let mut model = model.clone();
    let mut velocity: Vec<LayerParams> = model
        .layers()
        .iter()
        .map(|l| LayerParams {
            weights: vec![0.0; l.weights.len()],
            bias: vec![0.0; l.bias.len()],
        })
        .collect();

    let mut shuffle_rng = SeededRng::new(cfg.seed).child("shuffle");
    let n = train_set.len();
    let mut history = History::default();
    let mut best: Option<(f64, CnnModel)> = None;
    let mut since_best = 0usize;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        shuffle_rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (xs, ys) = train_set.gather(chunk);
            let (loss, grads) = model.loss_and_gradients(&xs, &ys)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss;
            batches += 1;
            for (li, g) in grads.iter().enumerate() {
                let v = &mut velocity[li];
                let l = &mut model.layers_mut()[li];
                for ((w, vw), gw) in l.weights.iter_mut().zip(&mut v.weights).zip(&g.weights) {
                    *vw = cfg.momentum * *vw - cfg.learning_rate * gw;
                    *w += *vw;
                }
                for ((b, vb), gb) in l.bias.iter_mut().zip(&mut v.bias).zip(&g.bias) {
                    *vb = cfg.momentum * *vb - cfg.learning_rate * gb;
                    *b += *vb;
                }
            }
        }

        let val = validation_loss(&model, val_set)?;
        if !val.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.train_loss.push(epoch_loss / batches.max(1) as f64);
        history.val_loss.push(val);

        let improved = best.as_ref().map_or(true, |(b, _)| val < *b);
        if improved {
            best = Some((val, model.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}
