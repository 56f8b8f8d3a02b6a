use std::collections::BTreeMap;

use image::RgbImage;
use objectness_tensor::{
    bilinear_resize, conv2d, conv2d_backward, dropout, dropout_backward, maxpool, maxpool_backward, relu,
    relu_backward, ConvParams, PoolIndices, Real, Sgd, Shape, Tensor,
};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use super::config::{LayerSpec, NetworkConfig};
use crate::error::{Error, Result};
use crate::raster::image_to_tensor;
use crate::seeds::{SeedStreams, Stream};

/// Standard deviation of the classifier layer's initial weights, small so the
/// two-way head starts near uniform.
const CLASSIFIER_INIT_STD: f64 = 0.01;

/// Momentum buffers for one convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Parameter gradients keyed by layer index.
pub type Gradients<T> = BTreeMap<usize, (Tensor<T>, Vec<T>)>;

/// Per-pixel foreground probability at source-image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectnessMap {
    pub width: usize,
    pub height: usize,
    pub probs: Vec<f32>,
}

impl ObjectnessMap {
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.probs[y * self.width + x]
    }
}

/// Channel-summed activations of the last pooling stage, upsampled to the
/// image. `raw` is before min-max normalization, `values` after.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub width: usize,
    pub height: usize,
    pub raw: Vec<f32>,
    pub values: Vec<f32>,
}

enum Saved<T> {
    Input(Tensor<T>),
    Pool(PoolIndices),
    Mask(Vec<T>),
}

/// Intermediate state recorded by a training-mode forward pass.
pub struct Trace<T> {
    saved: Vec<Saved<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real = f32> {
    config: NetworkConfig,
    params: BTreeMap<usize, ConvParams<T>>,
    velocity: BTreeMap<usize, Velocity<T>>,
}

impl<T: Real> Network<T> {
    /// He-initialized weights (`N(0, 2 / fan_in)`), zero biases.
    pub fn random<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let classifier = config.classifier();
        let params = Self::allocate(&config, |layer, fan_in, n| {
            let std = if layer == classifier {
                CLASSIFIER_INIT_STD
            } else {
                (2.0 / fan_in as f64).sqrt()
            };
            let normal = Normal::new(0.0, std).expect("finite std");
            (0..n).map(|_| T::from_f64(normal.sample(rng))).collect()
        });
        Ok(Self::assemble(config, params))
    }

    /// [`Network::random`] drawing from the init stream of `seed`.
    pub fn seeded(config: NetworkConfig, seed: u64) -> Result<Self> {
        Self::random(config, &mut SeedStreams::new(seed).rng(Stream::Init, 0))
    }

    /// Every parameter zero.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let params = Self::allocate(&config, |_, _, n| vec![T::ZERO; n]);
        Ok(Self::assemble(config, params))
    }

    fn allocate(
        config: &NetworkConfig,
        mut weights: impl FnMut(usize, usize, usize) -> Vec<T>,
    ) -> BTreeMap<usize, ConvParams<T>> {
        let mut params = BTreeMap::new();
        for (layer, [o, i, k, _]) in config.conv_shapes() {
            let LayerSpec::Conv {
                stride, pad, dilation, ..
            } = config.layers[layer]
            else {
                unreachable!("conv_shapes only lists convolutions");
            };
            let shape = Shape::new(o, i, k, k);
            let w = Tensor::from_vec(shape, weights(layer, i * k * k, shape.len())).expect("sized by shape");
            params.insert(layer, ConvParams::new(w, vec![T::ZERO; o], stride, pad, dilation));
        }
        params
    }

    fn assemble(config: NetworkConfig, params: BTreeMap<usize, ConvParams<T>>) -> Self {
        let velocity = params
            .iter()
            .map(|(&l, p)| {
                (
                    l,
                    Velocity {
                        weights: vec![T::ZERO; p.weights.len()],
                        bias: vec![T::ZERO; p.bias.len()],
                    },
                )
            })
            .collect();
        Network {
            config,
            params,
            velocity,
        }
    }

    /// Builds a network from explicit parameters, checking every shape against
    /// the config.
    pub fn from_parts(
        config: NetworkConfig,
        params: BTreeMap<usize, (Tensor<T>, Vec<T>)>,
        velocity: Option<BTreeMap<usize, Velocity<T>>>,
    ) -> Result<Self> {
        config.validate()?;
        let mut net = Self::zeros(config)?;
        for (layer, [o, i, k, _]) in net.config.conv_shapes() {
            let (w, b) = params.get(&layer).ok_or_else(|| Error::ArchiveShape {
                layer,
                role: "weight".into(),
                expected: vec![o, i, k, k],
                found: vec![],
            })?;
            if w.shape().dims() != [o, i, k, k] {
                return Err(Error::ArchiveShape {
                    layer,
                    role: "weight".into(),
                    expected: vec![o, i, k, k],
                    found: w.shape().dims().to_vec(),
                });
            }
            if b.len() != o {
                return Err(Error::ArchiveShape {
                    layer,
                    role: "bias".into(),
                    expected: vec![o],
                    found: vec![b.len()],
                });
            }
            let p = net.params.get_mut(&layer).expect("allocated");
            p.weights = w.clone();
            p.bias = b.clone();
        }
        if let Some(extra) = params.keys().find(|l| !net.params.contains_key(l)) {
            return Err(Error::ArchiveShape {
                layer: *extra,
                role: "weight".into(),
                expected: vec![],
                found: params[extra].0.shape().dims().to_vec(),
            });
        }
        if let Some(vel) = velocity {
            for (layer, v) in vel {
                let p = net.params.get(&layer).ok_or_else(|| Error::ArchiveShape {
                    layer,
                    role: "velocity".into(),
                    expected: vec![],
                    found: vec![v.weights.len()],
                })?;
                if v.weights.len() != p.weights.len() || v.bias.len() != p.bias.len() {
                    return Err(Error::ArchiveShape {
                        layer,
                        role: "velocity".into(),
                        expected: vec![p.weights.len(), p.bias.len()],
                        found: vec![v.weights.len(), v.bias.len()],
                    });
                }
                net.velocity.insert(layer, v);
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &BTreeMap<usize, ConvParams<T>> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut BTreeMap<usize, ConvParams<T>> {
        &mut self.params
    }

    pub fn velocity(&self) -> &BTreeMap<usize, Velocity<T>> {
        &self.velocity
    }

    pub fn param_count(&self) -> usize {
        self.params.values().map(|p| p.weights.len() + p.bias.len()).sum()
    }

    /// Element-type conversion of every parameter and velocity buffer.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.to_f64())).collect::<Vec<U>>();
        Network {
            config: self.config.clone(),
            params: self
                .params
                .iter()
                .map(|(&l, p)| {
                    (
                        l,
                        ConvParams::new(p.weights.cast(), conv(&p.bias), p.stride, p.pad, p.dilation),
                    )
                })
                .collect(),
            velocity: self
                .velocity
                .iter()
                .map(|(&l, v)| {
                    (
                        l,
                        Velocity {
                            weights: conv(&v.weights),
                            bias: conv(&v.bias),
                        },
                    )
                })
                .collect(),
        }
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        if batch.shape().c != self.config.input_channels {
            return Err(Error::contract(format!(
                "network expects {} input channels, batch is {}",
                self.config.input_channels,
                batch.shape()
            )));
        }
        Ok(())
    }

    fn run(
        &self,
        batch: &Tensor<T>,
        end: usize,
        mut rng: Option<&mut dyn RngCore>,
        mut trace: Option<&mut Trace<T>>,
    ) -> Result<Tensor<T>> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for (i, layer) in self.config.layers.iter().take(end).enumerate() {
            x = match *layer {
                LayerSpec::Conv { .. } => {
                    let y = conv2d(&x, &self.params[&i])?;
                    if let Some(t) = trace.as_deref_mut() {
                        t.saved.push(Saved::Input(x));
                    }
                    y
                }
                LayerSpec::Relu => {
                    let y = relu(&x);
                    if let Some(t) = trace.as_deref_mut() {
                        t.saved.push(Saved::Input(x));
                    }
                    y
                }
                LayerSpec::MaxPool { kernel, stride, pad } => {
                    let (y, idx) = maxpool(&x, kernel, stride, pad)?;
                    if let Some(t) = trace.as_deref_mut() {
                        t.saved.push(Saved::Pool(idx));
                    }
                    y
                }
                LayerSpec::Dropout { rate } => match rng.as_deref_mut() {
                    Some(r) => {
                        let (y, mask) = dropout(&x, rate, true, r)?;
                        if let Some(t) = trace.as_deref_mut() {
                            t.saved.push(Saved::Mask(mask));
                        }
                        y
                    }
                    None => x,
                },
            };
        }
        Ok(x)
    }

    /// Eval-mode logits `n x 2 x h' x w'`; dropout is the identity.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.run(batch, self.config.layers.len(), None, None)
    }

    /// Eval-mode output of layers `0..end`.
    pub fn forward_to(&self, batch: &Tensor<T>, end: usize) -> Result<Tensor<T>> {
        self.run(batch, end.min(self.config.layers.len()), None, None)
    }

    /// Training-mode forward pass; dropout masks are drawn from `rng`.
    pub fn forward_train<R: RngCore>(&self, batch: &Tensor<T>, rng: &mut R) -> Result<(Tensor<T>, Trace<T>)> {
        let mut trace = Trace { saved: Vec::new() };
        let y = self.run(batch, self.config.layers.len(), Some(rng as &mut dyn RngCore), Some(&mut trace))?;
        Ok((y, trace))
    }

    /// Parameter gradients given the gradient of the loss with respect to the
    /// logits of the traced forward pass.
    pub fn backward(&self, trace: Trace<T>, logit_grad: Tensor<T>) -> Result<Gradients<T>> {
        Ok(self.backward_full(trace, logit_grad, false)?.0)
    }

    /// Like [`Network::backward`], additionally returning the input gradient.
    pub fn backward_with_input(&self, trace: Trace<T>, logit_grad: Tensor<T>) -> Result<(Gradients<T>, Tensor<T>)> {
        let (g, input) = self.backward_full(trace, logit_grad, true)?;
        Ok((g, input.expect("requested")))
    }

    fn backward_full(
        &self,
        trace: Trace<T>,
        logit_grad: Tensor<T>,
        want_input: bool,
    ) -> Result<(Gradients<T>, Option<Tensor<T>>)> {
        if trace.saved.len() != self.config.layers.len() {
            return Err(Error::contract("trace does not cover every layer"));
        }
        let mut grads = Gradients::new();
        let mut g = logit_grad;
        for (i, saved) in trace.saved.into_iter().enumerate().rev() {
            g = match (self.config.layers[i], saved) {
                (LayerSpec::Conv { .. }, Saved::Input(x)) => {
                    let need = i > 0 || want_input;
                    let cg = conv2d_backward(&x, &self.params[&i], &g, need)?;
                    grads.insert(i, (cg.weights, cg.bias));
                    match cg.input {
                        Some(gi) => gi,
                        None => return Ok((grads, None)),
                    }
                }
                (LayerSpec::Relu, Saved::Input(x)) => relu_backward(&x, &g)?,
                (LayerSpec::MaxPool { .. }, Saved::Pool(idx)) => maxpool_backward(&idx, &g)?,
                (LayerSpec::Dropout { .. }, Saved::Mask(m)) => dropout_backward(&m, &g)?,
                _ => return Err(Error::contract(format!("trace entry {i} does not match layer kind"))),
            };
        }
        Ok((grads, Some(g)))
    }

    /// One momentum SGD step on every convolution.
    pub fn apply_gradients(&mut self, grads: &Gradients<T>, sgd: &Sgd, lr: f64) -> Result<()> {
        for (layer, p) in self.params.iter_mut() {
            let (gw, gb) = grads
                .get(layer)
                .ok_or_else(|| Error::contract(format!("missing gradient for layer {layer}")))?;
            let v = self.velocity.get_mut(layer).expect("velocity allocated per conv");
            sgd.step(lr, p.weights.data_mut(), gw.data(), &mut v.weights)?;
            sgd.step(lr, &mut p.bias, gb, &mut v.bias)?;
        }
        Ok(())
    }

    /// Foreground probability at the input resolution of `image` (`1 x C x h x w`).
    pub fn predict_objectness(&self, image: &Tensor<T>) -> Result<ObjectnessMap> {
        let s = image.shape();
        if s.n != 1 {
            return Err(Error::contract(format!("predict_objectness takes one image, got {s}")));
        }
        let logits = self.forward(image)?;
        objectness_from_logits(&logits, s.h, s.w)
    }

    pub fn activation_map(&self, image: &Tensor<T>) -> Result<ActivationMap> {
        let s = image.shape();
        let end = self.config.last_pool().map(|i| i + 1).unwrap_or(self.config.layers.len());
        let act = self.forward_to(image, end)?;
        let a = act.shape();
        let mut summed = Tensor::<T>::zeros(Shape::new(1, 1, a.h, a.w));
        for c in 0..a.c {
            for (dst, &v) in summed.data_mut().iter_mut().zip(act.plane(0, c)) {
                *dst += v;
            }
        }
        let up = bilinear_resize(&summed, s.h, s.w)?;
        let raw: Vec<f32> = up.data().iter().map(|v| v.to_f64() as f32).collect();
        let lo = raw.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = raw.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let values = if hi > lo {
            raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
        } else {
            vec![0.0; raw.len()]
        };
        Ok(ActivationMap {
            width: s.w,
            height: s.h,
            raw,
            values,
        })
    }
}

impl Network<f32> {
    pub fn predict_image(&self, img: &RgbImage, mean: [f32; 3]) -> Result<ObjectnessMap> {
        self.predict_objectness(&image_to_tensor(img, mean))
    }
}

/// Per-pixel two-way softmax of `1 x 2 x h x w` logits: `(background, object)`.
pub fn softmax_planes<T: Real>(logits: &Tensor<T>) -> Result<(Vec<T>, Vec<T>)> {
    let s = logits.shape();
    if s.n != 1 || s.c != 2 {
        return Err(Error::contract(format!("expected 1x2xHxW logits, got {s}")));
    }
    let (z0, z1) = (logits.plane(0, 0), logits.plane(0, 1));
    let mut bg = Vec::with_capacity(s.plane());
    let mut fg = Vec::with_capacity(s.plane());
    for (&a, &b) in z0.iter().zip(z1) {
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        bg.push(ea / (ea + eb));
        fg.push(eb / (ea + eb));
    }
    Ok((bg, fg))
}

/// Object-channel probability bilinearly upsampled to `height x width`.
pub fn objectness_from_logits<T: Real>(logits: &Tensor<T>, height: usize, width: usize) -> Result<ObjectnessMap> {
    let s = logits.shape();
    let (_, fg) = softmax_planes(logits)?;
    let fg = Tensor::from_vec(Shape::new(1, 1, s.h, s.w), fg)?;
    let up = bilinear_resize(&fg, height, width)?;
    Ok(ObjectnessMap {
        width,
        height,
        probs: up
            .data()
            .iter()
            .map(|v| (v.to_f64() as f32).clamp(0.0, 1.0))
            .collect(),
    })
}
