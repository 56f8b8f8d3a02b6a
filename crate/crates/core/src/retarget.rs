//! Seam carving with an optional foreground-boosted energy.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{luminance, BinaryMask};

/// Non-negative per-pixel energy, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl EnergyMap {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::contract(format!(
                "energy map {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::contract("energy values must be finite and non-negative"));
        }
        Ok(EnergyMap { width, height, data })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn transpose(&self) -> EnergyMap {
        let mut data = Vec::with_capacity(self.data.len());
        for x in 0..self.width {
            for y in 0..self.height {
                data.push(self.get(x, y));
            }
        }
        EnergyMap {
            width: self.height,
            height: self.width,
            data,
        }
    }
}

/// `|dL/dx| + |dL/dy|` of luminance, central differences with replicated
/// borders.
pub fn gradient_energy(image: &RgbImage) -> EnergyMap {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let lum: Vec<f64> = image.pixels().map(|p| luminance(p.0)).collect();
    let at = |x: usize, y: usize| lum[y * w + x];
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dx = (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y)) / 2.0;
            let dy = (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1))) / 2.0;
            data.push(dx.abs() + dy.abs());
        }
    }
    EnergyMap {
        width: w,
        height: h,
        data,
    }
}

/// `(e + 1) * 2` on foreground pixels, `e` elsewhere.
pub fn boost_foreground(e: &EnergyMap, fg: &BinaryMask) -> Result<EnergyMap> {
    if fg.dims() != (e.width, e.height) {
        return Err(Error::contract(format!(
            "boost: energy {}x{} vs mask {:?}",
            e.width,
            e.height,
            fg.dims()
        )));
    }
    let data = e
        .data
        .iter()
        .zip(fg.bits())
        .map(|(&v, &f)| if f { (v + 1.0) * 2.0 } else { v })
        .collect();
    Ok(EnergyMap {
        width: e.width,
        height: e.height,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// One column index per row.
    Vertical,
    /// One row index per column.
    Horizontal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seam {
    pub orientation: Orientation,
    pub indices: Vec<usize>,
}

impl Seam {
    pub fn cost(&self, e: &EnergyMap) -> f64 {
        self.indices
            .iter()
            .enumerate()
            .map(|(i, &j)| match self.orientation {
                Orientation::Vertical => e.get(j, i),
                Orientation::Horizontal => e.get(i, j),
            })
            .fold(0.0, |acc, v| acc + v)
    }

    fn validate(&self, width: usize, height: usize) -> Result<()> {
        let (len, span) = match self.orientation {
            Orientation::Vertical => (height, width),
            Orientation::Horizontal => (width, height),
        };
        if self.indices.len() != len {
            return Err(Error::contract(format!("seam length {} for a {width}x{height} image", self.indices.len())));
        }
        if self.indices.iter().any(|&j| j >= span) {
            return Err(Error::contract("seam index outside the image"));
        }
        if self.indices.windows(2).any(|p| p[0].abs_diff(p[1]) > 1) {
            return Err(Error::contract("seam is not 8-connected"));
        }
        Ok(())
    }
}

/// Vertical seam of `e` via the cumulative-cost recurrence; ties go to the
/// smaller column at every choice.
fn min_vertical(e: &EnergyMap) -> Vec<usize> {
    let (w, h) = (e.width, e.height);
    let mut m = e.data[..w].to_vec();
    let mut back = vec![0usize; w * h];
    for y in 1..h {
        let prev = m.clone();
        for x in 0..w {
            let mut best = x.saturating_sub(1);
            for c in best + 1..=(x + 1).min(w - 1) {
                if prev[c] < prev[best] {
                    best = c;
                }
            }
            back[y * w + x] = best;
            m[x] = e.get(x, y) + prev[best];
        }
    }
    let mut x = 0;
    for c in 1..w {
        if m[c] < m[x] {
            x = c;
        }
    }
    let mut seam = vec![0; h];
    for y in (0..h).rev() {
        seam[y] = x;
        x = back[y * w + x];
    }
    seam
}

/// Minimum-energy monotone 8-connected seam.
pub fn min_seam(e: &EnergyMap, orientation: Orientation) -> Result<Seam> {
    let span = match orientation {
        Orientation::Vertical => e.width,
        Orientation::Horizontal => e.height,
    };
    if span < 2 || e.width == 0 || e.height == 0 {
        return Err(Error::contract(format!(
            "min_seam needs at least 2 pixels across the seam, map is {}x{}",
            e.width, e.height
        )));
    }
    let indices = match orientation {
        Orientation::Vertical => min_vertical(e),
        Orientation::Horizontal => min_vertical(&e.transpose()),
    };
    Ok(Seam { orientation, indices })
}

/// Removes one element per seam step from a row-major grid.
fn carve<T: Copy>(data: &[T], width: usize, height: usize, seam: &Seam) -> Result<(Vec<T>, usize, usize)> {
    seam.validate(width, height)?;
    match seam.orientation {
        Orientation::Vertical => {
            if width < 2 {
                return Err(Error::contract("cannot remove a seam from a 1-pixel-wide image"));
            }
            let mut out = Vec::with_capacity((width - 1) * height);
            for y in 0..height {
                let row = &data[y * width..(y + 1) * width];
                let s = seam.indices[y];
                out.extend_from_slice(&row[..s]);
                out.extend_from_slice(&row[s + 1..]);
            }
            Ok((out, width - 1, height))
        }
        Orientation::Horizontal => {
            if height < 2 {
                return Err(Error::contract("cannot remove a seam from a 1-pixel-tall image"));
            }
            let mut out = Vec::with_capacity(width * (height - 1));
            for y in 0..height - 1 {
                for x in 0..width {
                    let src = if y < seam.indices[x] { y } else { y + 1 };
                    out.push(data[src * width + x]);
                }
            }
            Ok((out, width, height - 1))
        }
    }
}

pub fn remove_seam(image: &RgbImage, seam: &Seam) -> Result<RgbImage> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let px: Vec<[u8; 3]> = image.pixels().map(|p| p.0).collect();
    let (out, nw, nh) = carve(&px, w, h, seam)?;
    Ok(RgbImage::from_fn(nw as u32, nh as u32, |x, y| Rgb(out[y as usize * nw + x as usize])))
}

pub fn remove_seam_mask(mask: &BinaryMask, seam: &Seam) -> Result<BinaryMask> {
    let (w, h) = mask.dims();
    let (bits, nw, nh) = carve(mask.bits(), w, h, seam)?;
    BinaryMask::from_bits(nw, nh, bits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetResult {
    pub image: RgbImage,
    /// Input mask carved alongside the image.
    pub mask: Option<BinaryMask>,
    pub seams: Vec<Seam>,
}

/// Carves `image` down to `target_w x target_h`: vertical seams first, then
/// horizontal, recomputing the energy after every removal. With `fg`, the
/// energy is boosted on the (carved) foreground.
pub fn retarget(image: &RgbImage, fg: Option<&BinaryMask>, target_w: usize, target_h: usize) -> Result<RetargetResult> {
    retarget_tracking(image, fg, None, target_w, target_h).map(|(r, _)| r)
}

/// Like [`retarget`], additionally carving `track` (which does not influence
/// the energy) and returning what is left of it.
pub fn retarget_tracking(
    image: &RgbImage,
    fg: Option<&BinaryMask>,
    track: Option<&BinaryMask>,
    target_w: usize,
    target_h: usize,
) -> Result<(RetargetResult, Option<BinaryMask>)> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if target_w == 0 || target_h == 0 || target_w > w || target_h > h {
        return Err(Error::contract(format!("retarget {w}x{h} to {target_w}x{target_h}")));
    }
    for m in [fg, track].into_iter().flatten() {
        if m.dims() != (w, h) {
            return Err(Error::contract(format!("retarget: mask {:?} for a {w}x{h} image", m.dims())));
        }
    }
    let mut img = image.clone();
    let mut mask = fg.cloned();
    let mut tracked = track.cloned();
    let mut seams = Vec::new();
    let steps = std::iter::repeat_n(Orientation::Vertical, w - target_w)
        .chain(std::iter::repeat_n(Orientation::Horizontal, h - target_h));
    for orientation in steps {
        let plain = gradient_energy(&img);
        let e = match &mask {
            Some(m) => boost_foreground(&plain, m)?,
            None => plain,
        };
        let seam = min_seam(&e, orientation)?;
        img = remove_seam(&img, &seam)?;
        if let Some(m) = &mask {
            mask = Some(remove_seam_mask(m, &seam)?);
        }
        if let Some(t) = &tracked {
            tracked = Some(remove_seam_mask(t, &seam)?);
        }
        seams.push(seam);
    }
    Ok((RetargetResult { image: img, mask, seams }, tracked))
}

/// `floor(size * num / den)`, at least 1.
pub fn scaled_dim(size: usize, num: usize, den: usize) -> usize {
    (size * num / den).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, v: &[f64]) -> EnergyMap {
        EnergyMap::from_vec(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn constant_image_has_zero_energy() {
        let img = RgbImage::from_pixel(5, 4, Rgb([30, 200, 7]));
        assert!(gradient_energy(&img).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_edge_energy_sits_beside_the_edge() {
        let img = RgbImage::from_fn(6, 3, |x, _| Rgb(if x < 3 { [0; 3] } else { [200; 3] }));
        let e = gradient_energy(&img);
        for y in 0..3 {
            for x in 0..6 {
                assert_eq!(e.get(x, y) > 0.0, x == 2 || x == 3, "({x},{y})");
            }
        }
    }

    #[test]
    fn boost_arithmetic() {
        let e = map(2, 1, &[0.0, 3.0]);
        let fg = BinaryMask::full(2, 1);
        assert_eq!(boost_foreground(&e, &fg).unwrap().data, vec![2.0, 8.0]);
        assert_eq!(boost_foreground(&e, &BinaryMask::new(2, 1)).unwrap(), e);
        assert!(boost_foreground(&e, &BinaryMask::new(1, 2)).is_err());
    }

    #[test]
    fn seam_fixtures() {
        let s = min_seam(&map(4, 3, &[5.0; 12]), Orientation::Vertical).unwrap();
        assert_eq!(s.indices, vec![0, 0, 0]);
        let e = map(3, 3, &[1.0, 9.0, 9.0, 9.0, 1.0, 9.0, 9.0, 9.0, 1.0]);
        let s = min_seam(&e, Orientation::Vertical).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2]);
        assert_eq!(s.cost(&e), 3.0);
        let h = min_seam(&e, Orientation::Horizontal).unwrap();
        assert_eq!(h.indices, vec![0, 1, 2]);
        assert!(min_seam(&map(1, 3, &[0.0; 3]), Orientation::Vertical).is_err());
    }

    #[test]
    fn removing_leftmost_column() {
        let img = RgbImage::from_fn(3, 2, |x, y| Rgb([x as u8, y as u8, 0]));
        let s = Seam {
            orientation: Orientation::Vertical,
            indices: vec![0, 0],
        };
        let out = remove_seam(&img, &s).unwrap();
        assert_eq!(out, image::imageops::crop_imm(&img, 1, 0, 2, 2).to_image());
    }

    #[test]
    fn removal_keeps_every_other_pixel() {
        let img = RgbImage::from_fn(5, 4, |x, y| Rgb([x as u8, y as u8, (x * y) as u8]));
        for (orientation, indices) in [(Orientation::Vertical, vec![2, 3, 3, 4]), (Orientation::Horizontal, vec![0, 1, 2, 2, 1])] {
            let seam = Seam { orientation, indices };
            let out = remove_seam(&img, &seam).unwrap();
            let mut want: Vec<[u8; 3]> = img
                .enumerate_pixels()
                .filter(|(x, y, _)| match orientation {
                    Orientation::Vertical => seam.indices[*y as usize] != *x as usize,
                    Orientation::Horizontal => seam.indices[*x as usize] != *y as usize,
                })
                .map(|(_, _, p)| p.0)
                .collect();
            let mut got: Vec<[u8; 3]> = out.pixels().map(|p| p.0).collect();
            want.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn width_cannot_reach_zero() {
        let mut img = RgbImage::from_pixel(3, 2, Rgb([1, 2, 3]));
        let s = Seam {
            orientation: Orientation::Vertical,
            indices: vec![0, 0],
        };
        img = remove_seam(&img, &s).unwrap();
        img = remove_seam(&img, &s).unwrap();
        assert_eq!(img.width(), 1);
        assert!(remove_seam(&img, &s).is_err());
    }

    #[test]
    fn retarget_dims() {
        let img = RgbImage::from_fn(99, 12, |x, y| Rgb([(x * 7 % 256) as u8, (y * 13) as u8, 3]));
        assert_eq!(retarget(&img, None, 99, 12).unwrap().image, img);
        let r = retarget(&img, None, scaled_dim(99, 2, 3), 8).unwrap();
        assert_eq!((r.image.width(), r.image.height()), (66, 8));
        assert!(retarget(&img, None, 100, 12).is_err());
        assert!(retarget(&img, None, 0, 12).is_err());
    }
}
