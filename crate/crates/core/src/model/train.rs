use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::uplift::{Batch, LossParts, UpliftModel};
use crate::datagen::Dataset;
use crate::numkit::{seeded_rng, AdamConfig, AdamState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Share of rows held out for early stopping; 0 disables it.
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 256,
            lr: 1e-4,
            val_fraction: 0.1,
            patience: 30,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "validation fraction {} not in [0, 1)",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Row-weighted means over one epoch of mini-batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub bce: f64,
    pub disc: f64,
    pub total: f64,
    pub val_bce: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, if validation was used.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub steps: u64,
}

/// Mini-batch Adam on `λ1·BCE + λ2·disc`. With a validation split, stops
/// after `patience` epochs without improvement in validation BCE and
/// restores the best parameters seen. Deterministic in the model seed.
pub fn train(model: &mut UpliftModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainHistory> {
    train_with(model, data, cfg, |_, _| {})
}

/// [`train`] with a hook called after every epoch with the record and the
/// current (not best) parameters.
pub fn train_with<F>(
    model: &mut UpliftModel,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainHistory>
where
    F: FnMut(&EpochRecord, &UpliftModel),
{
    cfg.validate()?;
    if data.covariates() != model.covariates() {
        return Err(Error::shape(
            "train (covariates)",
            model.covariates(),
            data.covariates(),
        ));
    }
    if data.arms > model.arms() || data.t.iter().any(|&t| t >= model.arms()) {
        return Err(Error::Config(format!(
            "dataset has treatments beyond the model's {} arms",
            model.arms()
        )));
    }
    let mut history = TrainHistory::default();
    if cfg.epochs == 0 || data.is_empty() {
        return Ok(history);
    }

    let mut rng = seeded_rng(model.spec().seed);
    rng.set_stream(11);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (data.len() as f64 * cfg.val_fraction).floor() as usize;
    let n_val = if data.len() - n_val == 0 { 0 } else { n_val };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val = (n_val > 0).then(|| data.subset(val_idx));
    let val_y = val.as_ref().map(|v| v.y_f64());

    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut since_best = 0;

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut sum = LossParts {
            bce: 0.0,
            disc: 0.0,
            total: 0.0,
        };
        let mut seen = 0usize;
        for (step, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            let part = data.subset(chunk);
            let y = part.y_f64();
            let (loss, grads) = model.total_loss(Batch {
                x: &part.x,
                t: &part.t,
                y: &y,
            })?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step,
                    bce: loss.bce,
                    disc: loss.disc,
                });
            }
            let w = chunk.len() as f64;
            sum.bce += loss.bce * w;
            sum.disc += loss.disc * w;
            sum.total += loss.total * w;
            seen += chunk.len();
            adam.step(model.param_slices_mut(), &grads.slices())?;
        }
        let seen = seen as f64;
        let val_bce = match (&val, &val_y) {
            (Some(v), Some(y)) => Some(model.evaluate_loss(Batch { x: &v.x, t: &v.t, y })?.bce),
            _ => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            bce: sum.bce / seen,
            disc: sum.disc / seen,
            total: sum.total / seen,
            val_bce,
        });
        log::debug!("epoch {epoch}: bce {:.5} val {:?}", sum.bce / seen, val_bce);
        on_epoch(history.epochs.last().expect("just pushed"), model);

        if let Some(vb) = val_bce {
            if !vb.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step: usize::MAX,
                    bce: vb,
                    disc: f64::NAN,
                });
            }
            if best.as_ref().is_none_or(|(b, _, _)| vb < *b) {
                best = Some((vb, epoch, model.flat_params()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    if let Some((_, epoch, params)) = best {
        model.set_flat_params(&params)?;
        history.best_epoch = Some(epoch);
    }
    history.steps = adam.step_count();
    Ok(history)
}
