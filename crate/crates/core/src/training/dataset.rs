//! Labeled samples and their on-disk layout: `images/*.png`, `masks/*.png`
//! and a `manifest.toml` listing the pairs.

use std::fs;
use std::path::Path;

use image::RgbImage;
use objectness_tensor::{Real, Tensor, IGNORE_LABEL};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{image_to_tensor, load_gray, load_rgb, save_rgb, BinaryMask, LabelMap};

pub const DATASET_MANIFEST: &str = "manifest.toml";

/// Highest class id of the 20-category masks accepted by ingestion.
pub const MAX_CLASS_ID: u8 = 20;

/// An image and its dense `{0 background, 1 object, 255 ignore}` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub id: String,
    pub image: RgbImage,
    pub labels: LabelMap,
    /// Category used by retrieval benchmarks; unrelated to the 2-way labels.
    pub class: Option<u32>,
}

impl LabeledSample {
    pub fn new(id: impl Into<String>, image: RgbImage, labels: LabelMap) -> Result<Self> {
        let s = LabeledSample {
            id: id.into(),
            image,
            labels,
            class: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.image.width() as usize, self.image.height() as usize) != (self.labels.width(), self.labels.height()) {
            return Err(Error::contract(format!(
                "sample {}: image {}x{} vs labels {}x{}",
                self.id,
                self.image.width(),
                self.image.height(),
                self.labels.width(),
                self.labels.height()
            )));
        }
        if let Some(v) = self.labels.data().iter().find(|&&v| v > 1 && v != IGNORE_LABEL) {
            return Err(Error::contract(format!("sample {}: label value {v} outside {{0, 1, 255}}", self.id)));
        }
        Ok(())
    }

    pub fn tensor<T: Real>(&self, mean: [f32; 3]) -> Tensor<T> {
        image_to_tensor(&self.image, mean)
    }

    /// Object pixels; ignore pixels count as background.
    pub fn mask(&self) -> BinaryMask {
        BinaryMask::from_labels(&self.labels)
    }

    pub fn flip_horizontal(&self) -> Self {
        LabeledSample {
            id: self.id.clone(),
            image: image::imageops::flip_horizontal(&self.image),
            labels: self.labels.flip_horizontal(),
            class: self.class,
        }
    }
}

/// Collapses a 20-category class mask into object/background: `0 -> 0`,
/// `1..=20 -> 1`, `255 -> 255`.
pub fn binarize_mask(class_mask: &LabelMap) -> Result<LabelMap> {
    let mut data = Vec::with_capacity(class_mask.data().len());
    for &v in class_mask.data() {
        data.push(match v {
            0 => 0,
            1..=MAX_CLASS_ID => 1,
            IGNORE_LABEL => IGNORE_LABEL,
            other => {
                return Err(Error::contract(format!(
                    "class mask value {other} outside {{0..{MAX_CLASS_ID}, 255}}"
                )))
            }
        });
    }
    LabelMap::from_vec(class_mask.width(), class_mask.height(), data)
}

/// How mask PNGs of a dataset encode their labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskEncoding {
    /// Values `{0, 1, 255}`.
    #[default]
    Binary,
    /// Values `{0..20, 255}`, collapsed on load.
    Classes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: String,
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub mask_encoding: MaskEncoding,
    #[serde(default)]
    pub samples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(DATASET_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Manifest {
            path,
            detail: e.to_string(),
        })
    }
}

/// Writes images, masks and manifest under `dir`.
pub fn save_dataset(dir: &Path, samples: &[LabeledSample]) -> Result<()> {
    for sub in ["images", "masks"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut manifest = DatasetManifest::default();
    for s in samples {
        let image = format!("images/{}.png", s.id);
        let mask = format!("masks/{}.png", s.id);
        save_rgb(&s.image, &dir.join(&image))?;
        let mp = dir.join(&mask);
        s.labels.to_gray().save(&mp).map_err(|e| Error::image(&mp, e))?;
        manifest.samples.push(ManifestEntry {
            id: s.id.clone(),
            image,
            mask,
            class: s.class,
        });
    }
    let path = dir.join(DATASET_MANIFEST);
    let text = toml::to_string(&manifest).map_err(|e| Error::Manifest {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<Vec<LabeledSample>> {
    let manifest = DatasetManifest::read(dir)?;
    manifest
        .samples
        .iter()
        .map(|e| {
            let image = load_rgb(&dir.join(&e.image))?;
            let raw = LabelMap::from_gray(&load_gray(&dir.join(&e.mask))?);
            let labels = match manifest.mask_encoding {
                MaskEncoding::Binary => raw,
                MaskEncoding::Classes => binarize_mask(&raw)?,
            };
            let mut s = LabeledSample::new(e.id.clone(), image, labels)?;
            s.class = e.class;
            Ok(s)
        })
        .collect()
}
