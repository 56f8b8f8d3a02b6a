//! Mini-batch SGD training of the objectness network.

use objectness_tensor::{
    bilinear_resize, bilinear_resize_backward, softmax_xent, Real, Reduction, Sgd, Shape, Tensor, IGNORE_LABEL,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::net::Network;
use crate::raster::{LabelMap, DEFAULT_CHANNEL_MEAN};
use crate::seeds::{SeedStreams, Stream};

/// Resolution at which the loss is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossResolution {
    /// Labels are downsampled (nearest neighbour) to the logit grid.
    #[default]
    Logits,
    /// Softmax probabilities are bilinearly upsampled to the crop, exactly as
    /// at inference, and scored against full-resolution labels.
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: u64,
    pub total_iterations: u64,
    pub mirror_prob: f64,
    pub seed: u64,
    /// Side of the square every training image is resized to.
    pub crop_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub reduction: Reduction,
    pub loss_resolution: LossResolution,
    pub channel_mean: [f32; 3],
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 10,
            base_lr: 0.001,
            lr_decay_factor: 0.1,
            lr_decay_every: 2000,
            total_iterations: 10_000,
            mirror_prob: 0.5,
            seed: 0,
            crop_size: 321,
            momentum: 0.9,
            weight_decay: 5e-4,
            reduction: Reduction::Mean,
            loss_resolution: LossResolution::Logits,
            channel_mean: DEFAULT_CHANNEL_MEAN,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.crop_size == 0 {
            return bad("crop_size must be positive");
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be positive");
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.mirror_prob) {
            return bad("mirror_prob must lie in [0, 1]");
        }
        Ok(())
    }
}

/// `base_lr * decay^floor(iteration / decay_every)`.
pub fn lr_schedule(cfg: &TrainConfig, iteration: u64) -> f64 {
    let steps = (iteration / cfg.lr_decay_every.max(1)) as i32;
    cfg.base_lr * cfg.lr_decay_factor.powi(steps)
}

/// Flips image and labels together with probability `mirror_prob`.
pub fn augment_mirror<R: Rng + ?Sized>(sample: &LabeledSample, mirror_prob: f64, rng: &mut R) -> (LabeledSample, bool) {
    let flip = rng.gen::<f64>() < mirror_prob;
    if flip {
        (sample.flip_horizontal(), true)
    } else {
        (sample.clone(), false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: u64,
    pub lr: f64,
    pub loss: f64,
}

/// Batch ids drawn uniformly with replacement for `iteration`.
pub fn sample_batch(streams: &SeedStreams, iteration: u64, dataset_len: usize, batch: usize) -> Vec<usize> {
    let mut rng = streams.rng(Stream::Sampling, iteration);
    (0..batch).map(|_| rng.gen_range(0..dataset_len)).collect()
}

struct Prepared {
    input: Tensor<f32>,
    labels: Vec<u8>,
}

fn prepare(net: &Network<f32>, dataset: &[LabeledSample], ids: &[usize], cfg: &TrainConfig, iteration: u64) -> Result<Prepared> {
    let streams = SeedStreams::new(cfg.seed);
    let mut aug = streams.rng(Stream::Augmentation, iteration);
    let crop = cfg.crop_size;
    let out = net.config().output_shape(Shape::new(1, net.config().input_channels, crop, crop))?;
    let (lh, lw) = match cfg.loss_resolution {
        LossResolution::Logits => (out.h, out.w),
        LossResolution::Input => (crop, crop),
    };
    let mut inputs = Vec::with_capacity(ids.len());
    let mut labels = Vec::with_capacity(ids.len() * lh * lw);
    for &id in ids {
        let (s, _) = augment_mirror(&dataset[id], cfg.mirror_prob, &mut aug);
        let t: Tensor<f32> = s.tensor(cfg.channel_mean);
        let ts = t.shape();
        inputs.push(if ts.h == crop && ts.w == crop {
            t
        } else {
            bilinear_resize(&t, crop, crop)?
        });
        let l: LabelMap = s.labels.resize_nearest(lw, lh);
        labels.extend_from_slice(l.data());
    }
    Ok(Prepared {
        input: Tensor::concat_batch(&inputs)?,
        labels,
    })
}

/// Cross-entropy of labels at `out_h x out_w` against the bilinearly
/// upsampled softmax probabilities of `logits`, with its logit gradient.
pub fn upsampled_xent<T: Real>(
    logits: &Tensor<T>,
    labels: &[u8],
    out_h: usize,
    out_w: usize,
    reduction: Reduction,
) -> Result<(T, Tensor<T>)> {
    let s = logits.shape();
    if s.c != 2 {
        return Err(Error::contract(format!("upsampled_xent expects 2-channel logits, got {s}")));
    }
    let plane = out_h * out_w;
    if labels.len() != s.n * plane {
        return Err(Error::contract(format!(
            "upsampled_xent: {} labels for {} pixels",
            labels.len(),
            s.n * plane
        )));
    }
    let mut probs = Tensor::<T>::zeros(s);
    for n in 0..s.n {
        for i in 0..s.plane() {
            let (a, b) = (logits.plane(n, 0)[i], logits.plane(n, 1)[i]);
            let m = a.max(b);
            let (ea, eb) = ((a - m).exp(), (b - m).exp());
            let z = ea + eb;
            let base = n * 2 * s.plane();
            probs.data_mut()[base + i] = ea / z;
            probs.data_mut()[base + s.plane() + i] = eb / z;
        }
    }
    let up = bilinear_resize(&probs, out_h, out_w)?;
    let tiny = T::from_f64(1e-30);
    let mut loss = T::ZERO;
    let mut count = 0usize;
    let mut g_up = Tensor::<T>::zeros(up.shape());
    for n in 0..s.n {
        for i in 0..plane {
            let l = labels[n * plane + i];
            if l == IGNORE_LABEL {
                continue;
            }
            if l > 1 {
                return Err(Error::contract(format!("label {l} outside {{0, 1, 255}}")));
            }
            let idx = (n * 2 + l as usize) * plane + i;
            let p = up.data()[idx];
            count += 1;
            if p > tiny {
                loss -= p.ln();
                g_up.data_mut()[idx] = -T::ONE / p;
            } else {
                loss -= tiny.ln();
            }
        }
    }
    if reduction == Reduction::Mean && count > 0 {
        let inv = T::ONE / T::from_f64(count as f64);
        loss *= inv;
        for v in g_up.data_mut() {
            *v *= inv;
        }
    }
    let g_p = bilinear_resize_backward(s, &g_up)?;
    let mut g = Tensor::<T>::zeros(s);
    for n in 0..s.n {
        for i in 0..s.plane() {
            let base = n * 2 * s.plane();
            let (p0, p1) = (probs.data()[base + i], probs.data()[base + s.plane() + i]);
            let (g0, g1) = (g_p.data()[base + i], g_p.data()[base + s.plane() + i]);
            let dot = p0 * g0 + p1 * g1;
            g.data_mut()[base + i] = p0 * (g0 - dot);
            g.data_mut()[base + s.plane() + i] = p1 * (g1 - dot);
        }
    }
    Ok((loss, g))
}

/// Runs iterations `start..cfg.total_iterations`, calling `on_step` after
/// every update. Returns the loss log of the iterations run.
pub fn train_from(
    net: &mut Network<f32>,
    dataset: &[LabeledSample],
    cfg: &TrainConfig,
    start: u64,
    on_step: &mut dyn FnMut(&LossRecord, &Network<f32>) -> Result<()>,
) -> Result<Vec<LossRecord>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::contract("training dataset is empty"));
    }
    for s in dataset {
        s.validate()?;
    }
    net.config()
        .output_shape(Shape::new(1, net.config().input_channels, cfg.crop_size, cfg.crop_size))?;
    let streams = SeedStreams::new(cfg.seed);
    let sgd = Sgd {
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
    };
    let mut log = Vec::new();
    for it in start..cfg.total_iterations {
        let lr = lr_schedule(cfg, it);
        let ids = sample_batch(&streams, it, dataset.len(), cfg.batch_size);
        let batch = prepare(net, dataset, &ids, cfg, it)?;
        let mut drop_rng = streams.rng(Stream::Dropout, it);
        let (logits, trace) = net.forward_train(&batch.input, &mut drop_rng)?;
        let (loss, grad) = match cfg.loss_resolution {
            LossResolution::Logits => softmax_xent(&logits, &batch.labels, cfg.reduction)?,
            LossResolution::Input => upsampled_xent(&logits, &batch.labels, cfg.crop_size, cfg.crop_size, cfg.reduction)?,
        };
        if !loss.is_finite() || !grad.all_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: it,
                lr,
                batch: ids.iter().map(|&i| dataset[i].id.clone()).collect(),
            });
        }
        let grads = net.backward(trace, grad)?;
        net.apply_gradients(&grads, &sgd, lr)?;
        let rec = LossRecord {
            iteration: it,
            lr,
            loss: loss as f64,
        };
        on_step(&rec, net)?;
        log.push(rec);
    }
    Ok(log)
}

/// Trains from iteration 0 and returns the per-iteration loss log.
pub fn train(net: &mut Network<f32>, dataset: &[LabeledSample], cfg: &TrainConfig) -> Result<Vec<LossRecord>> {
    train_from(net, dataset, cfg, 0, &mut |_, _| Ok(()))
}
