use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{EpochStats, TrainConfig, TrainReport, Trained};
use super::mmd::{mmd_with_grad, MmdConfig};
use crate::data::{batch_ranges, SampleBatch};
use crate::error::{Error, Result};
use crate::models::{ae_predict, AdaptiveModule, AutoencoderModel, OutputActivation};
use crate::netcore::{mse_grad, mse_loss, Adam, BnMode, Matrix};

// Independent random streams derived from one seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_TARGET: u64 = 2;
const STREAM_HOLDOUT: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seeded random holdout of `ceil(rows · fraction)` rows for validation.
fn random_holdout(
    data: &SampleBatch,
    fraction: f64,
    seed: u64,
) -> Result<(SampleBatch, SampleBatch)> {
    let n = data.rows();
    let n_val = ((n as f64) * fraction).ceil() as usize;
    if n < 3 || n - n_val < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} rows are too few to train with a validation holdout"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, STREAM_HOLDOUT));
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();
    let mut val = val.to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok((data.select_rows(&train), data.select_rows(&val)))
}

/// Final `ceil(rows · fraction)` rows held out, order preserved.
fn tail_holdout(data: &SampleBatch, fraction: f64) -> Result<(SampleBatch, SampleBatch)> {
    let n = data.rows();
    let n_val = ((n as f64) * fraction).ceil() as usize;
    if n < 3 || n - n_val < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} rows are too few to train with a validation holdout"
        )));
    }
    Ok((data.slice_rows(0, n - n_val), data.slice_rows(n - n_val, n)))
}

fn eval_loss(ae: &mut AutoencoderModel, data: &SampleBatch) -> Result<f64> {
    ae.set_bn_mode(BnMode::Eval);
    let pred = ae_predict(data, ae)?;
    mse_loss(&pred, &data.sensors())
}

fn finite_or_diverged(epoch: usize, loss: f64) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Divergence { epoch, loss })
    }
}

struct EarlyStop<M> {
    best: M,
    best_loss: f64,
    best_epoch: usize,
    waited: usize,
    patience: usize,
}

impl<M: Clone> EarlyStop<M> {
    fn new(model: &M, loss: f64, patience: usize) -> Self {
        EarlyStop {
            best: model.clone(),
            best_loss: loss,
            best_epoch: 0,
            waited: 0,
            patience,
        }
    }

    /// Returns true when training should stop.
    fn observe(&mut self, epoch: usize, model: &M, loss: f64) -> bool {
        if loss < self.best_loss {
            self.best = model.clone();
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.waited = 0;
        } else {
            self.waited += 1;
        }
        self.waited >= self.patience
    }
}

/// Reconstruction pretraining on healthy source rows with a seeded random
/// validation holdout. Batch-norm layers are left in Eval mode.
pub fn pretrain_source(
    source: &SampleBatch,
    cfg: &TrainConfig,
) -> Result<Trained<AutoencoderModel>> {
    cfg.validate()?;
    let (train, val) = random_holdout(source, cfg.val_fraction, cfg.seed)?;
    fit_autoencoder(&train, &val, None, cfg)
}

/// Reconstruction pretraining plus `lambda ×` the latent discrepancy between
/// each source minibatch and an equally sized random target minibatch.
pub fn pretrain_mmd(
    source: &SampleBatch,
    target: &SampleBatch,
    cfg: &TrainConfig,
    mmd: &MmdConfig,
) -> Result<Trained<AutoencoderModel>> {
    cfg.validate()?;
    mmd.validate()?;
    if target.rows() < 2 {
        return Err(Error::InsufficientData(
            "discrepancy penalty needs at least 2 target rows".into(),
        ));
    }
    let (train, val) = random_holdout(source, cfg.val_fraction, cfg.seed)?;
    fit_autoencoder(&train, &val, Some((target, mmd)), cfg)
}

/// Training loop on an explicit train/validation pair.
pub fn fit_autoencoder(
    train: &SampleBatch,
    val: &SampleBatch,
    target: Option<(&SampleBatch, &MmdConfig)>,
    cfg: &TrainConfig,
) -> Result<Trained<AutoencoderModel>> {
    cfg.validate()?;
    if train.rows() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 training rows".into(),
        ));
    }
    let schema = &train.schema;
    let mut ae = AutoencoderModel::new(
        schema.sensor_dim(),
        schema.control_dim(),
        &mut stream(cfg.seed, STREAM_INIT),
    );
    if let Some((t, _)) = target {
        ae.check_batch(t)?;
    }
    let target = target.filter(|(_, m)| m.lambda > 0.0);
    let mut shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE);
    let mut target_rng = stream(cfg.seed, STREAM_TARGET);
    let mut adam = Adam::new(cfg.lr);

    let initial_loss = finite_or_diverged(0, eval_loss(&mut ae, train)?)?;
    let initial_val = finite_or_diverged(0, eval_loss(&mut ae, val)?)?;
    let mut stop = EarlyStop::new(&ae, initial_val, cfg.patience);
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.rows()).collect();
    let ranges = batch_ranges(train.rows(), cfg.batch_size)?;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        ae.set_bn_mode(BnMode::Train);
        let mut epoch_loss = 0.0;
        for r in &ranges {
            let batch = train.select_rows(&order[r.clone()]);
            let sensors = batch.sensors();
            let trace = ae.forward_recorded(&batch.model_input())?;
            let mut loss = mse_loss(&trace.output, &sensors)?;
            let dec = ae
                .decoder
                .backward(&trace.decoder_tape, &mse_grad(&trace.output, &sensors)?)?;
            let mut latent_grad = dec.input_grad;
            let mut target_pass = None;
            if let Some((t, mmd)) = target {
                let take = r.len().min(t.rows());
                let mut rows = index::sample(&mut target_rng, t.rows(), take).into_vec();
                rows.sort_unstable();
                // target rows normalize with their own batch statistics but
                // leave the running statistics to the source data
                let saved: Vec<(Vec<f64>, Vec<f64>)> = ae
                    .encoder
                    .batch_norms()
                    .map(|b| (b.running_mean.clone(), b.running_var.clone()))
                    .collect();
                let (z_t, tape_t) = ae
                    .encoder
                    .forward_recorded(&t.select_rows(&rows).model_input())?;
                for (b, (mean, var)) in ae.encoder.batch_norms_mut().zip(saved) {
                    b.running_mean = mean;
                    b.running_var = var;
                }
                let sigmas = mmd.bandwidths(&trace.latent, &z_t);
                let (value, g_s, g_t) = mmd_with_grad(&trace.latent, &z_t, &sigmas)?;
                loss += mmd.lambda * value;
                latent_grad.add_assign(&g_s.scale(mmd.lambda))?;
                target_pass = Some((tape_t, g_t.scale(mmd.lambda)));
            }
            finite_or_diverged(epoch, loss)?;
            let mut enc = ae
                .encoder
                .backward(&trace.encoder_tape, &latent_grad)?
                .grads;
            if let Some((tape_t, g_t)) = target_pass {
                enc.accumulate(&ae.encoder.backward(&tape_t, &g_t)?.grads)?;
            }
            let grads: Vec<&[f64]> = enc.slices().into_iter().chain(dec.grads.slices()).collect();
            let params: Vec<&mut [f64]> = ae
                .encoder
                .params_mut()
                .into_iter()
                .chain(ae.decoder.params_mut())
                .collect();
            adam.step(params, grads)?;
            epoch_loss += loss * r.len() as f64;
        }
        let train_loss = epoch_loss / train.rows() as f64;
        let val_loss = finite_or_diverged(epoch, eval_loss(&mut ae, val)?)?;
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if stop.observe(epoch, &ae, val_loss) {
            stopped_early = epoch < cfg.epochs;
            break;
        }
    }

    let mut model = stop.best;
    let final_loss = eval_loss(&mut model, train)?;
    Ok(Trained {
        model,
        report: TrainReport {
            initial_loss,
            final_loss,
            best_epoch: stop.best_epoch,
            best_val_loss: stop.best_loss,
            stopped_early,
            history,
        },
    })
}

/// Eval-mode backbone predictions, checking that the backbone is unchanged
/// by them.
fn frozen_predictions(frozen: &AutoencoderModel, parts: &[&SampleBatch]) -> Result<Vec<Matrix>> {
    let before = frozen.checksum();
    let mut ae = frozen.clone();
    ae.set_bn_mode(BnMode::Eval);
    let preds = parts
        .iter()
        .map(|b| ae_predict(b, &mut ae))
        .collect::<Result<Vec<_>>>()?;
    if ae.checksum() != before {
        return Err(Error::FrozenModified);
    }
    Ok(preds)
}

/// Mean squared error of `base + h(w)` against the sensors, streaming the
/// rows in contiguous batches with h's batch normalization in AdaBN mode,
/// exactly as at test time.
fn streamed_loss(
    h: &AdaptiveModule,
    controls: &Matrix,
    residual: &Matrix,
    batch_size: usize,
) -> Result<f64> {
    let mut h = h.clone();
    let n = controls.rows();
    if n < 2 {
        h.set_bn_mode(BnMode::Eval);
        return mse_loss(&h.correction(controls)?, residual);
    }
    h.set_bn_mode(BnMode::AdaBn);
    let mut total = 0.0;
    for r in batch_ranges(n, batch_size)? {
        let delta = h.correction(&controls.slice_rows(r.start, r.end))?;
        total += mse_loss(&delta, &residual.slice_rows(r.start, r.end))? * r.len() as f64;
    }
    Ok(total / n as f64)
}

/// Trains the correction module on limited healthy target rows, holding out
/// the final `val_fraction` of them for early stopping.
pub fn train_adaptive(
    target: &SampleBatch,
    frozen: &AutoencoderModel,
    cfg: &TrainConfig,
) -> Result<Trained<AdaptiveModule>> {
    cfg.validate()?;
    let (train, val) = tail_holdout(target, cfg.val_fraction)?;
    train_adaptive_with(&train, &val, frozen, OutputActivation::default(), cfg)
}

/// Correction-module training on an explicit train/validation pair.
///
/// The backbone runs in Eval mode and is never updated; its checksum is
/// verified. Minibatches are contiguous runs of time-ordered rows (visited
/// in shuffled order) so that the module's training-time batch statistics
/// resemble the per-batch statistics it sees when streaming.
pub fn train_adaptive_with(
    train: &SampleBatch,
    val: &SampleBatch,
    frozen: &AutoencoderModel,
    output: OutputActivation,
    cfg: &TrainConfig,
) -> Result<Trained<AdaptiveModule>> {
    cfg.validate()?;
    frozen.check_batch(train)?;
    frozen.check_batch(val)?;
    if train.rows() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 adaptation rows".into(),
        ));
    }
    let checksum = frozen.checksum();
    let preds = frozen_predictions(frozen, &[train, val])?;
    let resid_train = train.sensors().sub(&preds[0])?;
    let resid_val = val.sensors().sub(&preds[1])?;
    let (w_train, w_val) = (train.controls(), val.controls());

    let mut h = AdaptiveModule::new(
        frozen.control_dim(),
        frozen.sensor_dim(),
        output,
        &mut stream(cfg.seed, STREAM_INIT),
    );
    h.start_from_constant(&resid_train.column_means());
    let mut shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE);
    let mut adam = Adam::new(cfg.lr);
    let bs = cfg.batch_size;

    let initial_loss = finite_or_diverged(0, streamed_loss(&h, &w_train, &resid_train, bs)?)?;
    let initial_val = finite_or_diverged(0, streamed_loss(&h, &w_val, &resid_val, bs)?)?;
    let mut stop = EarlyStop::new(&h, initial_val, cfg.patience);
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut ranges = batch_ranges(train.rows(), bs)?;

    for epoch in 1..=cfg.epochs {
        ranges.shuffle(&mut shuffle_rng);
        h.set_bn_mode(BnMode::Train);
        let mut epoch_loss = 0.0;
        for r in &ranges {
            let target = resid_train.slice_rows(r.start, r.end);
            let (delta, tape) = h.correction_recorded(&w_train.slice_rows(r.start, r.end))?;
            let loss = finite_or_diverged(epoch, mse_loss(&delta, &target)?)?;
            let back = h.net.backward(&tape, &mse_grad(&delta, &target)?)?;
            adam.step(h.net.params_mut(), back.grads.slices())?;
            epoch_loss += loss * r.len() as f64;
        }
        let train_loss = epoch_loss / train.rows() as f64;
        let val_loss = finite_or_diverged(epoch, streamed_loss(&h, &w_val, &resid_val, bs)?)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if stop.observe(epoch, &h, val_loss) {
            stopped_early = epoch < cfg.epochs;
            break;
        }
    }

    if frozen.checksum() != checksum {
        return Err(Error::FrozenModified);
    }
    let mut model = stop.best;
    model.set_bn_mode(BnMode::Eval);
    let final_loss = streamed_loss(&model, &w_train, &resid_train, bs)?;
    Ok(Trained {
        model,
        report: TrainReport {
            initial_loss,
            final_loss,
            best_epoch: stop.best_epoch,
            best_val_loss: stop.best_loss,
            stopped_early,
            history,
        },
    })
}
