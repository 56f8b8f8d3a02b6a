use objectness_tensor::{conv_output_size, pool_output_size, Shape};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of the ordered layer list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        dilation: usize,
    },
    Relu,
    MaxPool {
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    /// Size-preserving `k x k` convolution (`pad = dilation` for k = 3).
    pub const fn conv(channels: usize, kernel: usize, dilation: usize) -> Self {
        LayerSpec::Conv {
            channels,
            kernel,
            stride: 1,
            pad: (kernel - 1) / 2 * dilation,
            dilation,
        }
    }

    pub const fn pool(stride: usize) -> Self {
        LayerSpec::MaxPool {
            kernel: 3,
            stride,
            pad: 1,
        }
    }
}

/// Ordered layer list of a fully convolutional two-way classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub preset: String,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

fn conv_relu(layers: &mut Vec<LayerSpec>, channels: usize, count: usize, dilation: usize) {
    for _ in 0..count {
        layers.push(LayerSpec::conv(channels, 3, dilation));
        layers.push(LayerSpec::Relu);
    }
}

fn head(layers: &mut Vec<LayerSpec>, width: usize, fc_dilation: usize) {
    layers.push(LayerSpec::conv(width, 3, fc_dilation));
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dropout { rate: 0.5 });
    layers.push(LayerSpec::conv(width, 1, 1));
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dropout { rate: 0.5 });
    layers.push(LayerSpec::conv(2, 1, 1));
}

impl NetworkConfig {
    /// VGG-16 derived architecture with output stride 8: the last two pools
    /// keep resolution and the following convolutions are dilated instead.
    pub fn paper() -> Self {
        let mut l = Vec::new();
        conv_relu(&mut l, 64, 2, 1);
        l.push(LayerSpec::pool(2));
        conv_relu(&mut l, 128, 2, 1);
        l.push(LayerSpec::pool(2));
        conv_relu(&mut l, 256, 3, 1);
        l.push(LayerSpec::pool(2));
        conv_relu(&mut l, 512, 3, 1);
        l.push(LayerSpec::pool(1));
        conv_relu(&mut l, 512, 3, 2);
        l.push(LayerSpec::pool(1));
        head(&mut l, 1024, 12);
        NetworkConfig {
            preset: "paper".into(),
            input_channels: 3,
            layers: l,
        }
    }

    /// CPU-trainable miniature: 2-2-3 conv blocks at widths 16/32/64, output
    /// stride 4, and both dilation rates of the full net.
    pub fn toy() -> Self {
        let mut l = Vec::new();
        conv_relu(&mut l, 16, 2, 1);
        l.push(LayerSpec::pool(2));
        conv_relu(&mut l, 32, 2, 1);
        l.push(LayerSpec::pool(2));
        conv_relu(&mut l, 64, 3, 2);
        l.push(LayerSpec::pool(1));
        head(&mut l, 64, 12);
        NetworkConfig {
            preset: "toy".into(),
            input_channels: 3,
            layers: l,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper" => Ok(Self::paper()),
            "toy" => Ok(Self::toy()),
            other => Err(Error::Config(format!("unknown preset {other:?} (expected paper|toy)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let last_conv = self.conv_layers().last().copied();
        let Some(last) = last_conv else {
            return Err(Error::Config("no convolution layers".into()));
        };
        match self.layers.last() {
            Some(LayerSpec::Conv { channels: 2, .. }) if last == self.layers.len() - 1 => {}
            _ => return Err(Error::Config("final layer must be a 2-channel convolution".into())),
        }
        if self.input_channels == 0 {
            return Err(Error::Config("input_channels must be positive".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            match *l {
                LayerSpec::Conv {
                    channels,
                    kernel,
                    stride,
                    dilation,
                    ..
                } => {
                    if channels == 0 || kernel % 2 == 0 || stride == 0 || dilation == 0 {
                        return Err(Error::Config(format!("layer {i}: invalid convolution {l:?}")));
                    }
                }
                LayerSpec::MaxPool { kernel, stride, pad } => {
                    if kernel == 0 || stride == 0 || pad >= kernel {
                        return Err(Error::Config(format!("layer {i}: invalid pooling {l:?}")));
                    }
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::Config(format!("layer {i}: dropout rate {rate} outside [0, 1)")));
                    }
                }
                LayerSpec::Relu => {}
            }
        }
        Ok(())
    }

    /// Indices of convolution layers in order.
    pub fn conv_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerSpec::Conv { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// `(out_c, in_c, k, k)` for every convolution, keyed by layer index.
    pub fn conv_shapes(&self) -> Vec<(usize, [usize; 4])> {
        let mut in_c = self.input_channels;
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            if let LayerSpec::Conv { channels, kernel, .. } = *l {
                out.push((i, [channels, in_c, kernel, kernel]));
                in_c = channels;
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.conv_shapes()
            .iter()
            .map(|(_, [o, i, k, _])| o * i * k * k + o)
            .sum()
    }

    /// Index of the last pooling layer; its output is the activation map source.
    pub fn last_pool(&self) -> Option<usize> {
        self.layers.iter().rposition(|l| matches!(l, LayerSpec::MaxPool { .. }))
    }

    /// Index of the final (classifier) convolution; its input is the shared
    /// feature tensor used for retrieval.
    pub fn classifier(&self) -> usize {
        self.layers.len() - 1
    }

    /// Channel count of the classifier's input.
    pub fn feature_channels(&self) -> usize {
        self.conv_shapes().last().map(|(_, s)| s[1]).unwrap_or(0)
    }

    /// Shape after layers `0..end` for the given input.
    pub fn shape_after(&self, input: Shape, end: usize) -> Result<Shape> {
        let mut s = input;
        for (i, l) in self.layers.iter().take(end).enumerate() {
            s = match *l {
                LayerSpec::Conv {
                    channels,
                    kernel,
                    stride,
                    pad,
                    dilation,
                } => {
                    let ext = (kernel - 1) * dilation + 1;
                    let h = conv_output_size(s.h, ext, stride, pad);
                    let w = conv_output_size(s.w, ext, stride, pad);
                    match (h, w) {
                        (Some(h), Some(w)) => Shape::new(s.n, channels, h, w),
                        _ => return Err(Error::contract(format!("layer {i}: kernel does not fit {s}"))),
                    }
                }
                LayerSpec::MaxPool { kernel, stride, pad } => {
                    let h = pool_output_size(s.h, kernel, stride, pad);
                    let w = pool_output_size(s.w, kernel, stride, pad);
                    match (h, w) {
                        (Some(h), Some(w)) => Shape::new(s.n, s.c, h, w),
                        _ => return Err(Error::contract(format!("layer {i}: pooling invalid for {s}"))),
                    }
                }
                LayerSpec::Relu | LayerSpec::Dropout { .. } => s,
            };
        }
        Ok(s)
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        self.shape_after(input, self.layers.len())
    }

    /// Product of pooling/convolution strides.
    pub fn output_stride(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv { stride, .. } | LayerSpec::MaxPool { stride, .. } => stride,
                _ => 1,
            })
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        NetworkConfig::paper().validate().unwrap();
        NetworkConfig::toy().validate().unwrap();
        assert!(NetworkConfig::preset("vgg").is_err());
    }

    #[test]
    fn paper_stride_and_size() {
        let c = NetworkConfig::paper();
        assert_eq!(c.output_stride(), 8);
        assert_eq!(c.conv_layers().len(), 16);
        assert_eq!(
            c.output_shape(Shape::new(1, 3, 321, 321)).unwrap(),
            Shape::new(1, 2, 41, 41)
        );
    }

    #[test]
    fn toy_stride_and_size() {
        let c = NetworkConfig::toy();
        assert_eq!(c.output_stride(), 4);
        assert_eq!(c.feature_channels(), 64);
        // ceil-mode pooling: 64 -> 33 -> 17
        assert_eq!(c.output_shape(Shape::new(1, 3, 64, 64)).unwrap(), Shape::new(1, 2, 17, 17));
    }

    #[test]
    fn rejects_wrong_head() {
        let mut c = NetworkConfig::toy();
        c.layers.pop();
        c.layers.push(LayerSpec::conv(3, 1, 1));
        assert!(c.validate().is_err());
        let mut c = NetworkConfig::toy();
        c.layers.push(LayerSpec::Relu);
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_serializes() {
        let c = NetworkConfig::toy();
        let text = toml::to_string(&c).unwrap();
        let back: NetworkConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
