//! Mean-batch triplet gradients and the Adam training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{triplet_loss_grad, TripletLossConfig};
use super::network::{Branch, DescriptorModel, Stage, Trace};
use super::real::Real;
use crate::error::{invalid, Result};
use crate::keypoints::TrainingTriplet;
use crate::volume::PatchPair;

/// Which parameters a training run may update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Freeze {
    #[default]
    None,
    /// Single-scale encoders fixed, only the multi-scale encoder learns.
    SseFrozen,
}

/// Gradients in the layout of [`DescriptorModel::branches`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub branches: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    fn zeros_like(model: &DescriptorModel<T>) -> Self {
        Gradients { branches: model.branches().iter().map(|b| vec![T::zero(); b.params().len()]).collect() }
    }

    fn scale(&mut self, s: T) {
        for g in self.branches.iter_mut().flatten() {
            *g *= s;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.branches.iter().flatten().all(|g| *g == T::zero())
    }
}

/// Mean loss and its gradient over one batch.
#[derive(Debug, Clone)]
pub struct BatchGradients<T> {
    pub loss: f64,
    pub gradients: Gradients<T>,
}

fn to_real<T: Real>(values: &[f32]) -> Vec<T> {
    values.iter().map(|&v| T::from_f32(v)).collect()
}

struct StreamTrace<T> {
    fine: Option<Trace<T>>,
    coarse: Option<Trace<T>>,
    mse: Trace<T>,
}

fn stream_forward<T: Real>(model: &DescriptorModel<T>, pair: &PatchPair, scratch: &mut Vec<T>) -> StreamTrace<T> {
    let fine = model.sse_fine.as_ref().map(|b| b.forward_trace(&to_real(pair.fine.values()), scratch));
    let coarse = model.sse_coarse.as_ref().map(|b| b.forward_trace(&to_real(pair.coarse.values()), scratch));
    let mut emb = Vec::new();
    for t in fine.iter().chain(coarse.iter()) {
        emb.extend_from_slice(&t.output);
    }
    let mse = model.mse.forward_trace(&emb, scratch);
    StreamTrace { fine, coarse, mse }
}

fn stream_backward<T: Real>(
    model: &DescriptorModel<T>,
    trace: &StreamTrace<T>,
    grad: Vec<T>,
    grads: &mut Gradients<T>,
    train_sse: bool,
    scratch: &mut Vec<T>,
) {
    let n = grads.branches.len();
    let g_emb = model.mse.backward(&trace.mse, grad, &mut grads.branches[n - 1], train_sse, scratch);
    let Some(g_emb) = g_emb else { return };
    let mut offset = 0;
    let mut slot = 0;
    for (branch, t) in [(&model.sse_fine, &trace.fine), (&model.sse_coarse, &trace.coarse)] {
        if let (Some(b), Some(t)) = (branch, t) {
            let len = t.output.len();
            let g = g_emb[offset..offset + len].to_vec();
            b.backward(t, g, &mut grads.branches[slot], false, scratch);
            offset += len;
            slot += 1;
        }
    }
}

fn validate_batch<T: Real>(model: &DescriptorModel<T>, batch: &[TrainingTriplet]) -> Result<()> {
    let r = model.spec().input_resolution;
    for (i, t) in batch.iter().enumerate() {
        for p in [&t.anchor, &t.positive, &t.negative] {
            if p.fine.resolution() != r || p.coarse.resolution() != r {
                return invalid(format!("triplet {i}: patch resolution does not match model input {r}"));
            }
        }
    }
    Ok(())
}

/// Exact gradient of the mean triplet loss over `batch` with respect to every
/// parameter.
pub fn backward<T: Real>(
    model: &DescriptorModel<T>,
    batch: &[TrainingTriplet],
    config: &TripletLossConfig,
) -> Result<BatchGradients<T>> {
    validate_batch(model, batch)?;
    let mut grads = Gradients::zeros_like(model);
    let mut scratch = Vec::new();
    let mut total = 0.0;
    for t in batch {
        let traces = [&t.anchor, &t.positive, &t.negative].map(|p| stream_forward(model, p, &mut scratch));
        let (loss, g) = triplet_loss_grad(&traces[0].mse.output, &traces[1].mse.output, &traces[2].mse.output, config.margin)?;
        total += loss;
        if let Some(g) = g {
            for (trace, g) in traces.iter().zip(g) {
                stream_backward(model, trace, g, &mut grads, true, &mut scratch);
            }
        }
    }
    if !batch.is_empty() {
        grads.scale(T::one() / T::from_f32(batch.len() as f32));
        total /= batch.len() as f64;
    }
    Ok(BatchGradients { loss: total, gradients: grads })
}

/// First and second moment estimates per parameter.
struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(model: &DescriptorModel<T>) -> Self {
        let zeros: Vec<Vec<T>> = model.branches().iter().map(|b| vec![T::zero(); b.params().len()]).collect();
        Adam { m: zeros.clone(), v: zeros, t: 0 }
    }

    fn step(&mut self, branches: Vec<&mut Branch<T>>, grads: &Gradients<T>, cfg: &TripletLossConfig, trainable: &[bool]) {
        self.t += 1;
        let b1 = T::from(cfg.beta1).unwrap();
        let b2 = T::from(cfg.beta2).unwrap();
        let lr = T::from(cfg.learning_rate).unwrap();
        let eps = T::from(cfg.eps).unwrap();
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        for (i, b) in branches.into_iter().enumerate() {
            if !trainable[i] {
                continue;
            }
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads.branches[i]);
            for (j, p) in b.params_mut().iter_mut().enumerate() {
                m[j] = b1 * m[j] + (T::one() - b1) * g[j];
                v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                *p = *p - lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Controls for [`train`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub epochs: u32,
    pub freeze: Freeze,
    /// Stage recorded in the model metadata after training.
    pub stage: Stage,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { epochs: 1, freeze: Freeze::None, stage: Stage::Static, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: u32,
    pub step: u32,
    /// Mean loss of the batch before the update.
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub curve: Vec<LossPoint>,
    /// Mean batch loss per epoch.
    pub epoch_means: Vec<f64>,
}

impl TrainReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,step,loss")?;
        for p in &self.curve {
            writeln!(w, "{},{},{}", p.epoch, p.step, p.loss)?;
        }
        Ok(())
    }
}

/// Trains `model` on `triplets` with Adam, shuffling each epoch.
///
/// With [`Freeze::SseFrozen`] the single-scale embeddings are computed once
/// and only the multi-scale encoder is updated. A zero learning rate applies
/// no update at all, so the model (metadata included) is left as it was.
pub fn train<T: Real>(
    model: &mut DescriptorModel<T>,
    triplets: &[TrainingTriplet],
    config: &TripletLossConfig,
    options: &TrainOptions,
) -> Result<TrainReport> {
    config.validate()?;
    if options.freeze == Freeze::SseFrozen && model.meta.stage == Stage::Init {
        return invalid("freezing the single-scale encoders requires a pre-trained model");
    }
    validate_batch(model, triplets)?;
    let mut report = TrainReport::default();
    if triplets.is_empty() || options.epochs == 0 {
        return Ok(report);
    }
    let update = config.learning_rate > 0.0;
    let frozen = options.freeze == Freeze::SseFrozen;
    let n_branches = model.branches().len();
    let trainable: Vec<bool> = (0..n_branches).map(|i| !frozen || i == n_branches - 1).collect();

    let mut scratch = Vec::new();
    // frozen encoders never change, so their outputs are computed once
    let cached: Vec<[Vec<T>; 3]> = if frozen {
        triplets
            .iter()
            .map(|t| {
                [&t.anchor, &t.positive, &t.negative]
                    .map(|p| model.sse_embed(&to_real(p.fine.values()), &to_real(p.coarse.values()), &mut scratch))
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut adam = Adam::new(model);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut step = 0u32;
    for epoch in 0..options.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let bg = if frozen {
                frozen_backward(model, chunk.iter().map(|&i| &cached[i]), config, &mut scratch)?
            } else {
                let batch: Vec<TrainingTriplet> = chunk.iter().map(|&i| triplets[i].clone()).collect();
                backward(model, &batch, config)?
            };
            report.curve.push(LossPoint { epoch, step, loss: bg.loss });
            sum += bg.loss;
            batches += 1;
            step += 1;
            if update {
                adam.step(model.branches_mut(), &bg.gradients, config, &trainable);
            }
        }
        let mean = sum / batches as f64;
        log::info!("epoch {epoch}: mean loss {mean:.4}");
        report.epoch_means.push(mean);
    }
    if update {
        model.meta.stage = options.stage;
        model.meta.epoch += options.epochs;
    }
    Ok(report)
}

fn frozen_backward<'a, T: Real>(
    model: &DescriptorModel<T>,
    batch: impl ExactSizeIterator<Item = &'a [Vec<T>; 3]>,
    config: &TripletLossConfig,
    scratch: &mut Vec<T>,
) -> Result<BatchGradients<T>> {
    let mut grads = Gradients::zeros_like(model);
    let n = grads.branches.len();
    let count = batch.len();
    let mut total = 0.0;
    for emb in batch {
        let traces = [0, 1, 2].map(|s| model.mse.forward_trace(&emb[s], scratch));
        let (loss, g) = triplet_loss_grad(&traces[0].output, &traces[1].output, &traces[2].output, config.margin)?;
        total += loss;
        if let Some(g) = g {
            for (trace, g) in traces.iter().zip(g) {
                model.mse.backward(trace, g, &mut grads.branches[n - 1], false, scratch);
            }
        }
    }
    if count > 0 {
        grads.scale(T::one() / T::from_f32(count as f32));
        total /= count as f64;
    }
    Ok(BatchGradients { loss: total, gradients: grads })
}
