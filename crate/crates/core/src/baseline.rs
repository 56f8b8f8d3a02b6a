//! Colour-threshold foreground segmentation, used as a learning-free
//! reference point.

use image::RgbImage;

use crate::raster::BinaryMask;

/// Mean colour of the one-pixel image border.
pub fn border_color(image: &RgbImage) -> [f64; 3] {
    let (w, h) = image.dimensions();
    let mut sum = [0.0; 3];
    let mut n = 0.0;
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                let p = image.get_pixel(x, y).0;
                for c in 0..3 {
                    sum[c] += p[c] as f64;
                }
                n += 1.0;
            }
        }
    }
    sum.map(|s| s / n)
}

/// Otsu threshold over `values` using a 256-bin histogram on
/// `[min, max]`. Returns `None` if all values are equal.
pub fn otsu_threshold(values: &[f64]) -> Option<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || hi <= lo {
        return None;
    }
    const BINS: usize = 256;
    let scale = (BINS - 1) as f64 / (hi - lo);
    let mut hist = [0usize; BINS];
    for v in values {
        hist[((v - lo) * scale).round() as usize] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_t) = (-1.0, 0);
    for (t, &c) in hist.iter().enumerate().take(BINS - 1) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let (m0, m1) = (sum0 / w0, (sum_all - sum0) / w1);
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t;
        }
    }
    Some(lo + (best_t as f64 + 0.5) / scale)
}

/// Pixels whose RGB distance from the mean border colour exceeds the Otsu
/// threshold of all such distances.
pub fn color_threshold_segment(image: &RgbImage) -> BinaryMask {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let bg = border_color(image);
    let dist: Vec<f64> = image
        .pixels()
        .map(|p| (0..3).map(|c| (p.0[c] as f64 - bg[c]).powi(2)).sum::<f64>().sqrt())
        .collect();
    match otsu_threshold(&dist) {
        Some(t) => BinaryMask::from_bits(w, h, dist.iter().map(|&d| d > t).collect()).expect("dims match"),
        None => BinaryMask::new(w, h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn separates_a_flat_square() {
        let img = RgbImage::from_fn(20, 20, |x, y| {
            if (5..12).contains(&x) && (6..15).contains(&y) {
                Rgb([200, 30, 30])
            } else {
                Rgb([20, 90, 20])
            }
        });
        let m = color_threshold_segment(&img);
        let want = BinaryMask::from_fn(20, 20, |x, y| (5..12).contains(&x) && (6..15).contains(&y));
        assert_eq!(m, want);
    }

    #[test]
    fn uniform_image_has_no_foreground() {
        let img = RgbImage::from_pixel(8, 8, Rgb([7, 7, 7]));
        assert!(color_threshold_segment(&img).is_empty());
        assert_eq!(otsu_threshold(&[1.0, 1.0]), None);
    }

    #[test]
    fn otsu_splits_two_clusters() {
        let v: Vec<f64> = (0..50).map(|i| i as f64 * 0.01).chain((0..50).map(|i| 10.0 + i as f64 * 0.01)).collect();
        let t = otsu_threshold(&v).unwrap();
        assert!(t > 0.49 && t < 10.0, "{t}");
    }
}
