//! From objectness maps to hard masks, regions and boxes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::net::ObjectnessMap;
use crate::raster::BinaryMask;

/// Minimum area fraction for the largest region to count as foreground.
pub const MIN_REGION_FRACTION: f64 = 0.06;

/// Bit set iff the object probability exceeds 0.5.
pub fn threshold_map(m: &ObjectnessMap) -> BinaryMask {
    BinaryMask::from_fn(m.width, m.height, |x, y| m.get(x, y) > 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

/// Region labeling: `labels[y * width + x]` is 0 for background and
/// `1..=areas.len()` otherwise, numbered in raster order of each region's
/// first pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    /// `areas[l - 1]` is the pixel count of region `l`.
    pub areas: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.areas.len()
    }

    pub fn region(&self, label: u32) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.labels[y * self.width + x] == label)
    }
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Components {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut areas = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let label = areas.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut area = 0;
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        areas.push(area);
    }
    Components {
        width: w,
        height: h,
        labels,
        areas,
    }
}

/// Largest 8-connected region (ties to the lower label) if its area is
/// strictly above `min_area_frac` of the frame.
pub fn largest_foreground(mask: &BinaryMask, min_area_frac: f64) -> Option<BinaryMask> {
    largest_foreground_with(mask, min_area_frac, Connectivity::default())
}

pub fn largest_foreground_with(mask: &BinaryMask, min_area_frac: f64, connectivity: Connectivity) -> Option<BinaryMask> {
    let cc = connected_components(mask, connectivity);
    let mut best: Option<(usize, usize)> = None;
    for (i, &a) in cc.areas.iter().enumerate() {
        if best.is_none_or(|(_, ba)| a > ba) {
            best = Some((i, a));
        }
    }
    let (i, area) = best?;
    if area as f64 > min_area_frac * mask.area() as f64 {
        Some(cc.region(i as u32 + 1))
    } else {
        None
    }
}

/// Axis-aligned box with inclusive pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Option<Self> {
        (x_min <= x_max && y_min <= y_max).then_some(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        BBox::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
    }

    pub fn to_mask(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |x, y| self.contains(x, y))
    }
}

pub fn tight_bbox(mask: &BinaryMask) -> Option<BBox> {
    let (w, h) = mask.dims();
    let mut b: Option<BBox> = None;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            b = Some(match b {
                None => BBox {
                    x_min: x,
                    y_min: y,
                    x_max: x,
                    y_max: y,
                },
                Some(b) => BBox {
                    x_min: b.x_min.min(x),
                    y_min: b.y_min.min(y),
                    x_max: b.x_max.max(x),
                    y_max: b.y_max.max(y),
                },
            });
        }
    }
    b
}
