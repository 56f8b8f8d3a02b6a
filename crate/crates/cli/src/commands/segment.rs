use std::fs;
use std::path::Path;
use std::time::Instant;

use image::{GrayImage, Luma, Rgb, RgbImage};
use objectness_core::baseline::color_threshold_segment;
use objectness_core::metrics::jaccard;
use objectness_core::net::{load_weights, Network, ObjectnessMap};
use objectness_core::postprocess::threshold_map;
use objectness_core::raster::{image_to_tensor, load_gray, load_rgb, save_rgb, BinaryMask, LabelMap, DEFAULT_CHANNEL_MEAN};
use objectness_core::training::load_dataset;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{SegmentArgs, SegmentMethod};
use crate::config::write_record;
use crate::error::{CliError, CliResult};
use crate::Verbosity;

/// Foreground predictor: a trained network or the colour baseline.
pub enum Segmenter {
    Net(Box<Network<f32>>),
    Color,
}

impl Segmenter {
    pub fn open(method: SegmentMethod, weights: Option<&Path>) -> CliResult<Self> {
        match method {
            SegmentMethod::Color => Ok(Segmenter::Color),
            SegmentMethod::Net => {
                let w = weights.ok_or_else(|| CliError::usage("--weights is required for the net method"))?;
                Ok(Segmenter::Net(Box::new(load_weights(w)?.0)))
            }
        }
    }

    pub fn objectness(&self, img: &RgbImage) -> CliResult<Option<ObjectnessMap>> {
        match self {
            Segmenter::Net(net) => Ok(Some(net.predict_image(img, DEFAULT_CHANNEL_MEAN)?)),
            Segmenter::Color => Ok(None),
        }
    }

    pub fn mask(&self, img: &RgbImage) -> CliResult<BinaryMask> {
        Ok(match self.objectness(img)? {
            Some(m) => threshold_map(&m),
            None => color_threshold_segment(img),
        })
    }
}

/// Foreground of a mask PNG in either encoding: a label mask (`1` object,
/// `255` ignore) if any pixel is `1`, otherwise any non-zero pixel.
pub fn load_mask(path: &Path) -> CliResult<BinaryMask> {
    let gray = load_gray(path)?;
    Ok(if gray.as_raw().contains(&1) {
        BinaryMask::from_labels(&LabelMap::from_gray(&gray))
    } else {
        BinaryMask::from_gray(&gray)
    })
}

pub fn probability_image(m: &ObjectnessMap) -> GrayImage {
    GrayImage::from_fn(m.width as u32, m.height as u32, |x, y| {
        Luma([(m.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0).round() as u8])
    })
}

/// Image blended half-and-half with a black-red-yellow-white ramp of `values`.
pub fn heatmap_overlay(img: &RgbImage, values: &[f32]) -> RgbImage {
    let w = img.width();
    RgbImage::from_fn(w, img.height(), |x, y| {
        let v = values[(y * w + x) as usize].clamp(0.0, 1.0);
        let ramp = [(3.0 * v).min(1.0), (3.0 * v - 1.0).clamp(0.0, 1.0), (3.0 * v - 2.0).clamp(0.0, 1.0)];
        let p = img.get_pixel(x, y).0;
        Rgb([0, 1, 2].map(|c| (0.5 * p[c] as f32 + 127.5 * ramp[c]).round() as u8))
    })
}

#[derive(Serialize)]
struct SegmentRecord<'a> {
    method: &'a str,
    weights: Option<String>,
    input: String,
}

pub fn run(a: &SegmentArgs, v: Verbosity) -> CliResult<()> {
    let started = Instant::now();
    let seg = Segmenter::open(a.method, a.weights.as_deref())?;
    let record = SegmentRecord {
        method: match a.method {
            SegmentMethod::Net => "net",
            SegmentMethod::Color => "color",
        },
        weights: a.weights.as_ref().map(|p| p.display().to_string()),
        input: a.image.as_ref().or(a.data.as_ref()).map(|p| p.display().to_string()).unwrap_or_default(),
    };
    if let Some(data) = &a.data {
        let samples = load_dataset(data)?;
        fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
        let scores = samples
            .par_iter()
            .map(|s| -> CliResult<f64> {
                let mask = seg.mask(&s.image)?;
                mask.save_png(&a.out.join(format!("{}.png", s.id)))?;
                Ok(jaccard(&mask, &s.mask())?)
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if !scores.is_empty() {
            println!("mean_jaccard\t{:.6}\t{}", scores.iter().sum::<f64>() / scores.len() as f64, scores.len());
        }
        v.info(format_args!("wrote {} masks to {}", samples.len(), a.out.display()));
        return write_record(&a.out, "segment", 0, started, record);
    }
    let path = a.image.as_ref().expect("clap requires --image or --data");
    let img = load_rgb(path)?;
    let map = seg.objectness(&img)?;
    let mask = match &map {
        Some(m) => threshold_map(m),
        None => color_threshold_segment(&img),
    };
    mask.save_png(&a.out)?;
    if let Some(p) = &a.prob {
        let m = map.as_ref().ok_or_else(|| CliError::usage("--prob needs the net method"))?;
        probability_image(m).save(p).map_err(|e| objectness_core::Error::Image {
            path: p.clone(),
            source: e,
        })?;
    }
    if let Some(p) = &a.activation {
        let Segmenter::Net(net) = &seg else {
            return Err(CliError::usage("--activation needs the net method"));
        };
        let act = net.activation_map(&image_to_tensor::<f32>(&img, DEFAULT_CHANNEL_MEAN))?;
        save_rgb(&heatmap_overlay(&img, &act.values), p)?;
    }
    if let Some(gt) = &a.gt {
        println!("jaccard\t{:.6}", jaccard(&mask, &load_mask(gt)?)?);
    }
    write_record(&a.out, "segment", 0, started, record)
}
