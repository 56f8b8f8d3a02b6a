//! Per-pixel maps shared by every stage: label maps, hard masks, and the
//! conversion of RGB images into network input tensors.

use std::path::Path;

use image::{GrayImage, Luma, RgbImage};
use objectness_tensor::{Real, Shape, Tensor};

use crate::error::{Error, Result};

/// Default per-channel mean subtracted after scaling pixels to `[0, 1]`.
pub const DEFAULT_CHANNEL_MEAN: [f32; 3] = [0.5, 0.5, 0.5];

/// Row-major `u8` map, e.g. `{0 background, 1 object, 255 ignore}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        LabelMap {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::contract(format!(
                "label map {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(LabelMap { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            out.data[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }

    /// Nearest-neighbour resampling on a corner-aligned grid; never invents
    /// label values.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Self {
        let xs = nearest_taps(self.width, width);
        let ys = nearest_taps(self.height, height);
        let mut data = Vec::with_capacity(width * height);
        for &y in &ys {
            for &x in &xs {
                data.push(self.get(x, y));
            }
        }
        LabelMap { width, height, data }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length matches dims")
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        LabelMap {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().clone(),
        }
    }
}

fn nearest_taps(input: usize, output: usize) -> Vec<usize> {
    (0..output)
        .map(|o| {
            if output == 1 || input == 1 {
                0
            } else {
                // round(o * (in - 1) / (out - 1)) in integer arithmetic
                (2 * o * (input - 1) + (output - 1)) / (2 * (output - 1))
            }
        })
        .collect()
}

/// Hard foreground/background decision per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask { width, height, bits }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::contract(format!(
                "mask {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(BinaryMask { width, height, bits })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// Label 1 where set; every other pixel background.
    pub fn to_labels(&self) -> LabelMap {
        LabelMap {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| b as u8).collect(),
        }
    }

    /// Object pixels of a `{0, 1, 255}` label map; ignore counts as background.
    pub fn from_labels(labels: &LabelMap) -> Self {
        BinaryMask {
            width: labels.width,
            height: labels.height,
            bits: labels.data.iter().map(|&v| v == 1).collect(),
        }
    }

    /// 0 = background, 255 = foreground.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }

    /// Any non-zero pixel is foreground.
    pub fn from_gray(img: &GrayImage) -> Self {
        BinaryMask {
            width: img.width() as usize,
            height: img.height() as usize,
            bits: img.as_raw().iter().map(|&v| v != 0).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_gray().save(path).map_err(|e| Error::image(path, e))
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Ok(BinaryMask::from_gray(&load_gray(path)?))
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8())
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    Ok(image::open(path).map_err(|e| Error::image(path, e))?.to_luma8())
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::image(path, e))
}

/// `1 x 3 x h x w` tensor with values `pixel / 255 - mean[c]`.
pub fn image_to_tensor<T: Real>(img: &RgbImage, mean: [f32; 3]) -> Tensor<T> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut t = Tensor::zeros(Shape::new(1, 3, h, w));
    let plane = w * h;
    let d = t.data_mut();
    for (i, px) in img.pixels().enumerate() {
        for c in 0..3 {
            d[c * plane + i] = T::from_f64((px.0[c] as f32 / 255.0 - mean[c]) as f64);
        }
    }
    t
}

/// Relative luminance `0.299 R + 0.587 G + 0.114 B` in pixel units.
pub fn luminance(px: [u8; 3]) -> f64 {
    0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64
}
