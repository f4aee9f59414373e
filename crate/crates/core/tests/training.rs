mod common;

use common::synth::{mean_abs, raw, source};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tard_core::adaptation::{
    adabn_transform, mmd_loss, pretrain_mmd, pretrain_source, train_adaptive, MmdConfig,
    TrainConfig,
};
use tard_core::data::SampleBatch;
use tard_core::models::{ae_predict, corrected_predict_parts, AdaptiveModule, AutoencoderModel};
use tard_core::netcore::{mse_loss, BnMode, Layer};

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed: 5,
        ..TrainConfig::default()
    }
}

fn trained_source() -> (tard_core::data::Standardizer, AutoencoderModel) {
    let (_, st, std) = source(1, 2000);
    (st, pretrain_source(&std, &cfg(200)).unwrap().model)
}

/// Replaces the sensor block with `f(sensors)`.
fn map_sensors(b: &SampleBatch, f: impl Fn(usize, f64) -> f64) -> SampleBatch {
    let mut out = b.clone();
    for i in 0..out.rows() {
        for &j in &b.schema.sensor {
            out.values[(i, j)] = f(j, out.values[(i, j)]);
        }
    }
    out
}

fn corrected_residual(batch: &SampleBatch, ae: &AutoencoderModel, h: &AdaptiveModule) -> f64 {
    let (mut ae, mut h) = (ae.clone(), h.clone());
    ae.set_bn_mode(BnMode::Eval);
    h.set_bn_mode(BnMode::Eval);
    let pred = corrected_predict_parts(batch, &mut ae, &mut h).unwrap();
    mean_abs(&pred, &batch.sensors())
}

fn plain_residual(batch: &SampleBatch, ae: &AutoencoderModel) -> f64 {
    let mut ae = ae.clone();
    ae.set_bn_mode(BnMode::Eval);
    mean_abs(&ae_predict(batch, &mut ae).unwrap(), &batch.sensors())
}

#[test]
fn pretraining_reaches_the_noise_floor_on_held_out_rows() {
    let (st, mut ae) = trained_source();
    let held_raw = raw(99, 500, &[]);
    let held = st.transform_batch(&held_raw).unwrap();
    ae.set_bn_mode(BnMode::Eval);
    let pred = ae_predict(&held, &mut ae).unwrap();
    let mse = mse_loss(&pred, &held.sensors()).unwrap();
    assert!(mse < 0.05, "held-out mse {mse}");

    // residual per sensor relative to its raw level
    let pred_raw = st.inverse_sensors(&pred, &held.schema).unwrap();
    let actual = held_raw.sensors();
    for j in 0..actual.cols() {
        let level = actual.column(j).iter().map(|v| v.abs()).sum::<f64>() / actual.rows() as f64;
        let err = (0..actual.rows())
            .map(|i| (pred_raw[(i, j)] - actual[(i, j)]).abs())
            .sum::<f64>()
            / actual.rows() as f64;
        assert!(err < 0.1 * level, "sensor {j}: {err} vs level {level}");
    }
}

#[test]
fn pretraining_is_bit_reproducible() {
    let (_, _, std) = source(2, 600);
    let a = pretrain_source(&std, &cfg(15)).unwrap();
    let b = pretrain_source(&std, &cfg(15)).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.report, b.report);
    let c = pretrain_source(&std, &TrainConfig { seed: 6, ..cfg(15) }).unwrap();
    assert_ne!(a.model.checksum(), c.model.checksum());
}

#[test]
fn zero_epochs_returns_the_seeded_initialization() {
    let (_, _, std) = source(2, 300);
    let t = pretrain_source(&std, &cfg(0)).unwrap();
    let init = AutoencoderModel::new(
        std.schema.sensor_dim(),
        std.schema.control_dim(),
        &mut ChaCha8Rng::seed_from_u64(5),
    );
    assert_eq!(t.model.checksum(), init.checksum());
    assert!(t.report.history.is_empty());
    assert_eq!(t.report.initial_loss, t.report.final_loss);
}

#[test]
fn zero_weight_discrepancy_matches_plain_pretraining() {
    let (_, _, std) = source(3, 600);
    let target = raw(4, 300, &[(0, 0.5, 1.1)]);
    let mmd = MmdConfig {
        lambda: 0.0,
        ..MmdConfig::default()
    };
    let plain = pretrain_source(&std, &cfg(10)).unwrap();
    let zero = pretrain_mmd(&std, &target, &cfg(10), &mmd).unwrap();
    assert_eq!(plain.model, zero.model);
    assert_eq!(plain.report, zero.report);
}

#[test]
fn discrepancy_penalty_aligns_latents() {
    let (_, st, std) = source(3, 1500);
    let shift = [(0, 0.6, 1.2), (2, 0.6, 1.2), (4, 0.6, 1.2)];
    let target = st.transform_batch(&raw(4, 400, &shift)).unwrap();
    let plain = pretrain_source(&std, &cfg(60)).unwrap().model;
    let aligned = pretrain_mmd(&std, &target, &cfg(60), &MmdConfig::default())
        .unwrap()
        .model;
    let latent_gap = |ae: &AutoencoderModel| {
        let mut ae = ae.clone();
        ae.set_bn_mode(BnMode::Eval);
        let s = ae.encode(&std.slice_rows(0, 400).model_input()).unwrap();
        let t = ae.encode(&target.model_input()).unwrap();
        mmd_loss(&s, &t, &MmdConfig::default()).unwrap()
    };
    let (before, after) = (latent_gap(&plain), latent_gap(&aligned));
    assert!(
        after < before,
        "latent discrepancy {after} not below {before}"
    );
}

#[test]
fn adaptation_never_touches_the_backbone() {
    let (st, ae) = trained_source();
    let target = st.transform_batch(&raw(8, 500, &[(1, 0.4, 1.0)])).unwrap();
    let before = ae.clone();
    let h = train_adaptive(&target, &ae, &cfg(50)).unwrap();
    assert_eq!(ae, before);
    assert_eq!(ae.checksum(), before.checksum());
    assert!(h.report.final_loss <= h.report.initial_loss);
}

#[test]
fn constant_offset_is_learned() {
    let (st, ae) = trained_source();
    let delta = 2.0;
    let healthy = st.transform_batch(&raw(11, 800, &[])).unwrap();
    let target = map_sensors(&healthy, |_, v| v + delta);
    let h = train_adaptive(&target.slice_rows(0, 600), &ae, &cfg(300))
        .unwrap()
        .model;
    let test = target.slice_rows(600, 800);
    let adapted = corrected_residual(&test, &ae, &h);
    assert!(
        adapted < 0.2 * delta,
        "adapted residual {adapted}, offset {delta}"
    );
    assert!(adapted < plain_residual(&test, &ae));

    // The backbone reads the shifted sensors too, so part of the residual
    // varies with them; no control-only correction beats the best constant
    // by much, and the learned one should come close to it.
    let mut frozen = ae.clone();
    frozen.set_bn_mode(BnMode::Eval);
    let r = test
        .sensors()
        .sub(&ae_predict(&test, &mut frozen).unwrap())
        .unwrap();
    let means = r.column_means();
    let best_constant = r
        .row_iter()
        .flat_map(|row| row.iter().zip(&means).map(|(v, m)| (v - m).abs()))
        .sum::<f64>()
        / r.as_slice().len() as f64;
    assert!(
        adapted <= 1.25 * best_constant,
        "adapted {adapted}, best constant {best_constant}"
    );
}

#[test]
fn same_domain_adaptation_is_nearly_a_no_op() {
    let (st, ae) = trained_source();
    let target = st.transform_batch(&raw(12, 800, &[])).unwrap();
    let h = train_adaptive(&target.slice_rows(0, 600), &ae, &cfg(200))
        .unwrap()
        .model;
    let test = target.slice_rows(600, 800);
    let (adapted, plain) = (
        corrected_residual(&test, &ae, &h),
        plain_residual(&test, &ae),
    );
    assert!(
        (adapted - plain).abs() <= 0.1 * plain,
        "adapted {adapted} vs unadapted {plain}"
    );
}

#[test]
fn correction_reduces_residual_under_shift() {
    let (st, ae) = trained_source();
    let shift = [(0, 0.5, 1.1), (2, 0.5, 1.1), (4, 0.5, 1.1)];
    let target = st.transform_batch(&raw(13, 1000, &shift)).unwrap();
    let h = train_adaptive(&target.slice_rows(0, 700), &ae, &cfg(200))
        .unwrap()
        .model;
    let test = target.slice_rows(700, 1000);
    let (adapted, plain) = (
        corrected_residual(&test, &ae, &h),
        plain_residual(&test, &ae),
    );
    assert!(adapted < plain, "adapted {adapted} vs unadapted {plain}");
}

fn first_encoder_stats(ae: &AutoencoderModel) -> (Vec<f64>, Vec<f64>) {
    let bn = ae.encoder.batch_norms().next().unwrap();
    (bn.running_mean.clone(), bn.running_var.clone())
}

#[test]
fn statistics_replacement_tracks_the_batch() {
    let (st, ae) = trained_source();
    let healthy = st.transform_batch(&raw(21, 300, &[])).unwrap();
    let shifted = map_sensors(&healthy, |_, v| v + 3.0);

    let adapted = adabn_transform(&ae, &shifted).unwrap();
    let Layer::Dense(first) = &ae.encoder.layers[0] else {
        panic!("encoder starts with a dense layer")
    };
    let h = first.forward(&shifted.model_input()).unwrap();
    let mean = h.column_means();
    let (rm, rv) = first_encoder_stats(&adapted);
    assert_eq!(rm, mean);
    assert_eq!(rv, h.column_variances(&mean));
    assert_eq!(
        adapted.encoder,
        adabn_transform(&adapted, &shifted).unwrap().encoder
    );

    let other = adabn_transform(&ae, &healthy).unwrap();
    assert_ne!(first_encoder_stats(&other), (rm, rv));
    // weights are untouched
    assert_eq!(adapted.decoder, ae.decoder);
    for (a, b) in adapted.encoder.params().iter().zip(ae.encoder.params()) {
        assert_eq!(*a, b);
    }
}

// Replacement erases batch-level mean differences, so residuals only stay
// put when the batch shares the training moments: here a subsample of the
// training rows themselves.
#[test]
fn statistics_replacement_on_source_rows_changes_little() {
    let (_, _, std) = source(1, 2000);
    let ae = pretrain_source(&std, &cfg(200)).unwrap().model;
    let rows: Vec<usize> = (0..std.rows()).step_by(2).collect();
    let half = std.select_rows(&rows);
    let adapted = adabn_transform(&ae, &half).unwrap();
    let (before, after) = (plain_residual(&half, &ae), plain_residual(&half, &adapted));
    assert!(
        (after - before).abs() <= 0.1 * before,
        "{before} -> {after}"
    );
}
