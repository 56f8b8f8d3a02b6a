//! Procedural stand-in for natural segmentation data: geometric objects on
//! textured backgrounds, with exact ground-truth masks.
//!
//! Foreground pixels take the object's own colour with probability equal to
//! the separation parameter and otherwise a colour sampled from the rendered
//! background, so low separation yields objects whose colour statistics
//! resemble the background while their shape stays intact.

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::raster::LabelMap;
use crate::seeds::{SeedStreams, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Rectangle,
    Ellipse,
    Triangle,
    Ring,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 4] = [
        ShapeFamily::Rectangle,
        ShapeFamily::Ellipse,
        ShapeFamily::Triangle,
        ShapeFamily::Ring,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    Flat,
    Gradient,
    Noise,
    Stripes,
}

impl Texture {
    pub const ALL: [Texture; 4] = [Texture::Flat, Texture::Gradient, Texture::Noise, Texture::Stripes];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Inclusive range of objects per image.
    pub shapes_per_image: (usize, usize),
    pub families: Vec<ShapeFamily>,
    pub textures: Vec<Texture>,
    /// Inclusive range from which each image's colour separation is drawn;
    /// 0 draws every object pixel from the background palette.
    pub separation: (f32, f32),
    /// Object extent as a fraction of the shorter image side.
    pub object_scale: (f32, f32),
    pub count: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            width: 64,
            height: 64,
            shapes_per_image: (1, 2),
            families: ShapeFamily::ALL.to_vec(),
            textures: Texture::ALL.to_vec(),
            separation: (0.5, 1.0),
            object_scale: (0.3, 0.7),
            count: 200,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width < 8 || self.height < 8 {
            return bad(format!("synthetic images must be at least 8x8, got {}x{}", self.width, self.height));
        }
        let (lo, hi) = self.shapes_per_image;
        if lo == 0 || lo > hi {
            return bad(format!("shapes_per_image range {lo}..={hi} is empty or allows zero objects"));
        }
        let (lo, hi) = self.separation;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return bad(format!("separation range {lo}..={hi} must lie in [0, 1]"));
        }
        let (lo, hi) = self.object_scale;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("object_scale range {lo}..={hi} must lie in (0, 1]"));
        }
        if self.families.is_empty() || self.textures.is_empty() {
            return bad("families and textures must be non-empty".into());
        }
        Ok(())
    }
}

/// Overrides for objects drawn in a retrieval benchmark class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectStyle {
    pub family: ShapeFamily,
    pub color: [u8; 3],
}

struct Shape {
    family: ShapeFamily,
    cx: f32,
    cy: f32,
    rx: f32,
    ry: f32,
    flip: bool,
}

impl Shape {
    fn contains(&self, px: f32, py: f32) -> bool {
        let dx = (px - self.cx) / self.rx;
        let dy = (py - self.cy) / self.ry;
        match self.family {
            ShapeFamily::Rectangle => dx.abs() <= 1.0 && dy.abs() <= 1.0,
            ShapeFamily::Ellipse => dx * dx + dy * dy <= 1.0,
            ShapeFamily::Ring => {
                let r2 = dx * dx + dy * dy;
                (0.3..=1.0).contains(&r2)
            }
            ShapeFamily::Triangle => {
                // Apex at dy = -1 (or +1 when flipped), base on the opposite side.
                let t = if self.flip { -dy } else { dy };
                (-1.0..=1.0).contains(&t) && dx.abs() <= (t + 1.0) / 2.0
            }
        }
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f32) -> [u8; 3] {
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (a[c] as f32 + (b[c] as f32 - a[c] as f32) * t).round().clamp(0.0, 255.0) as u8;
    }
    out
}

fn jitter(c: [u8; 3], rng: &mut ChaCha8Rng, amount: i32) -> [u8; 3] {
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = (c[i] as i32 + rng.gen_range(-amount..=amount)).clamp(0, 255) as u8;
    }
    out
}

fn background(w: usize, h: usize, texture: Texture, rng: &mut ChaCha8Rng) -> RgbImage {
    let a = random_color(rng);
    let b = random_color(rng);
    let mut img = RgbImage::new(w as u32, h as u32);
    match texture {
        Texture::Flat => {
            for p in img.pixels_mut() {
                *p = Rgb(a);
            }
        }
        Texture::Gradient => {
            let angle: f32 = rng.gen_range(0.0..std::f32::consts::TAU);
            let (dx, dy) = (angle.cos(), angle.sin());
            let span = (w as f32).abs() * dx.abs() + (h as f32) * dy.abs();
            let (ox, oy) = (w as f32 / 2.0, h as f32 / 2.0);
            for (x, y, p) in img.enumerate_pixels_mut() {
                let t = ((x as f32 - ox) * dx + (y as f32 - oy) * dy) / span + 0.5;
                *p = Rgb(lerp(a, b, t.clamp(0.0, 1.0)));
            }
        }
        Texture::Noise => {
            for p in img.pixels_mut() {
                let t: f32 = rng.gen();
                *p = Rgb(lerp(a, b, t));
            }
        }
        Texture::Stripes => {
            let period = rng.gen_range(4..=10) as f32;
            let vertical: bool = rng.gen();
            for (x, y, p) in img.enumerate_pixels_mut() {
                let coord = if vertical { x } else { y } as f32;
                *p = Rgb(if (coord / period * 2.0).floor() as i64 % 2 == 0 { a } else { b });
            }
        }
    }
    img
}

fn random_shape(spec: &SyntheticSpec, family: ShapeFamily, rng: &mut ChaCha8Rng) -> Shape {
    let (w, h) = (spec.width as f32, spec.height as f32);
    let side = w.min(h);
    let (lo, hi) = spec.object_scale;
    let extent = side * if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let aspect: f32 = rng.gen_range(0.7..=1.0);
    let (mut rx, mut ry) = (extent / 2.0, extent / 2.0 * aspect);
    if rng.gen() {
        std::mem::swap(&mut rx, &mut ry);
    }
    // Keep a one-pixel margin so the object never covers the whole frame.
    rx = rx.clamp(1.0, w / 2.0 - 1.0);
    ry = ry.clamp(1.0, h / 2.0 - 1.0);
    let cx = rng.gen_range(rx + 1.0..=w - rx - 1.0);
    let cy = rng.gen_range(ry + 1.0..=h - ry - 1.0);
    Shape {
        family,
        cx,
        cy,
        rx,
        ry,
        flip: rng.gen(),
    }
}

/// Renders one sample deterministically from `rng`.
pub fn render_sample(spec: &SyntheticSpec, id: String, style: Option<ObjectStyle>, rng: &mut ChaCha8Rng) -> LabeledSample {
    let (w, h) = (spec.width, spec.height);
    loop {
        let texture = *spec.textures.choose(rng).unwrap_or(&Texture::Flat);
        let bg = background(w, h, texture, rng);
        let (slo, shi) = spec.separation;
        let separation = slo + (shi - slo) * rng.gen::<f32>();
        let (nlo, nhi) = spec.shapes_per_image;
        let n = rng.gen_range(nlo.max(1)..=nhi.max(nlo.max(1)));
        let mut img = bg.clone();
        let mut labels = LabelMap::new(w, h, 0);
        for _ in 0..n {
            let (family, color) = match style {
                Some(s) => (s.family, s.color),
                None => (
                    *spec.families.choose(rng).unwrap_or(&ShapeFamily::Rectangle),
                    random_color(rng),
                ),
            };
            let shape = random_shape(spec, family, rng);
            for y in 0..h {
                for x in 0..w {
                    if !shape.contains(x as f32 + 0.5, y as f32 + 0.5) {
                        continue;
                    }
                    labels.set(x, y, 1);
                    // Fixed draw count per pixel keeps renders at different
                    // separations coupled under one seed.
                    let u: f32 = rng.gen();
                    let own = jitter(color, rng, 10);
                    let (sx, sy) = (rng.gen_range(0..w), rng.gen_range(0..h));
                    let px = if u < separation { own } else { bg.get_pixel(sx as u32, sy as u32).0 };
                    img.put_pixel(x as u32, y as u32, Rgb(px));
                }
            }
        }
        if labels.data().contains(&1) {
            return LabeledSample {
                id,
                image: img,
                labels,
                class: None,
            };
        }
    }
}

/// `spec.count` samples; sample `i` depends only on `(spec, seed, i)`.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec) -> Vec<LabeledSample> {
    let streams = SeedStreams::new(spec.seed);
    (0..spec.count)
        .map(|i| render_sample(spec, format!("{i:06}"), None, &mut streams.rng(Stream::Synthesis, i as u64)))
        .collect()
}

/// Per-class object style: family cycles through the shape families and each
/// class gets its own hue.
pub fn class_style(class: usize, classes: usize) -> ObjectStyle {
    let family = ShapeFamily::ALL[class % ShapeFamily::ALL.len()];
    let hue = class as f32 / classes.max(1) as f32;
    ObjectStyle {
        family,
        color: hsv_to_rgb(hue, 0.85, 0.9),
    }
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [u8; 3] {
    let h6 = (h.fract() * 6.0).max(0.0);
    let i = h6.floor() as u32 % 6;
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// Retrieval benchmark: `classes x per_class` single-object images, one
/// object style per class, random backgrounds.
pub fn generate_retrieval_benchmark(spec: &SyntheticSpec, classes: usize, per_class: usize) -> Vec<LabeledSample> {
    let streams = SeedStreams::new(spec.seed);
    let single = SyntheticSpec {
        shapes_per_image: (1, 1),
        ..spec.clone()
    };
    let mut out = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let style = class_style(c, classes);
        for j in 0..per_class {
            let i = c * per_class + j;
            let mut s = render_sample(&single, format!("{i:06}"), Some(style), &mut streams.rng(Stream::Synthesis, i as u64));
            s.class = Some(c as u32);
            out.push(s);
        }
    }
    out
}
