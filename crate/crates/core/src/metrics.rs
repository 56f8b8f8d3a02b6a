//! Evaluation: mask Jaccard, box localization, average precision and the
//! colour separability analysis.

use std::fmt::Write as _;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postprocess::BBox;
use crate::raster::BinaryMask;

/// IoU threshold of the localization criterion (strictly exceeded).
pub const CORLOC_THRESHOLD: f64 = 0.5;
pub const HIST_BINS_PER_CHANNEL: usize = 10;
pub const DEFAULT_BUCKET_WIDTH: f64 = 0.1;

/// `|pred & gt| / |pred | gt|`; two empty masks score 1.
pub fn jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::contract(format!(
            "jaccard of {:?} and {:?} masks",
            pred.dims(),
            gt.dims()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in pred.bits().iter().zip(gt.bits()) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b).map_or(0, |i| i.area());
    inter as f64 / (a.area() + b.area() - inter) as f64
}

/// True iff `pred` overlaps some ground-truth box with IoU above `threshold`.
pub fn corloc(pred: &BBox, gt_boxes: &[BBox], threshold: f64) -> bool {
    gt_boxes.iter().any(|g| box_iou(pred, g) > threshold)
}

/// Mean of precision@k over the relevant positions `k` of a ranking.
pub fn average_precision(ranked_relevance: &[bool]) -> Result<f64> {
    let (mut hits, mut sum) = (0usize, 0.0);
    for (k, &rel) in ranked_relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::NoRelevantItems);
    }
    Ok(sum / hits as f64)
}

pub fn mean_ap(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::contract("mean average precision over zero queries"));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Concatenated per-channel colour histogram (10 uniform bins for each of
/// R, G, B), L1 normalized.
pub fn color_histogram(pixels: impl Iterator<Item = [u8; 3]>) -> [f64; 3 * HIST_BINS_PER_CHANNEL] {
    let mut h = [0.0; 3 * HIST_BINS_PER_CHANNEL];
    for px in pixels {
        for (c, &v) in px.iter().enumerate() {
            h[c * HIST_BINS_PER_CHANNEL + v as usize * HIST_BINS_PER_CHANNEL / 256] += 1.0;
        }
    }
    let total: f64 = h.iter().sum();
    if total > 0.0 {
        for v in &mut h {
            *v /= total;
        }
    }
    h
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (1.0 - dot / (na * nb)).clamp(0.0, 1.0)
}

/// Cosine distance between the foreground and background colour histograms:
/// 0 for identical colour distributions, 1 for disjoint bin support.
pub fn separability(image: &RgbImage, gt: &BinaryMask) -> Result<f64> {
    if (image.width() as usize, image.height() as usize) != gt.dims() {
        return Err(Error::contract("separability: image and mask dims differ"));
    }
    let fg_count = gt.count();
    if fg_count == 0 || fg_count == gt.area() {
        return Err(Error::contract("separability needs both foreground and background pixels"));
    }
    let px = |want: bool| {
        image
            .enumerate_pixels()
            .filter(move |(x, y, _)| gt.get(*x as usize, *y as usize) == want)
            .map(|(_, _, p)| p.0)
    };
    Ok(cosine_distance(&color_histogram(px(true)), &color_histogram(px(false))))
}

/// Edges `0, width, 2 width, ..., 1`.
pub fn uniform_edges(width: f64) -> Vec<f64> {
    let n = (1.0 / width).round().max(1.0) as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Index of the half-open bucket holding `score`; the last bucket is closed.
pub fn bucket_of(edges: &[f64], score: f64) -> Option<usize> {
    let last = edges.len().checked_sub(2)?;
    if score < edges[0] || score > edges[last + 1] {
        return None;
    }
    Some((0..=last).find(|&b| score < edges[b + 1]).unwrap_or(last))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketGain {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub ours_mean: f64,
    /// `(baseline, ours_mean - baseline_mean)`.
    pub gains: Vec<(String, f64)>,
    pub min_gain: f64,
    pub max_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    /// Populated buckets in ascending score order.
    pub buckets: Vec<BucketGain>,
    pub empty_buckets: Vec<(f64, f64)>,
    /// Images without a score (degenerate masks).
    pub skipped: usize,
}

impl SeparabilityReport {
    /// One row per bucket (`lo hi count ours_mean` then one gain column per
    /// baseline); empty buckets show `-`.
    pub fn to_text(&self) -> String {
        let names: Vec<&str> = self
            .buckets
            .first()
            .map(|b| b.gains.iter().map(|g| g.0.as_str()).collect())
            .unwrap_or_default();
        let mut out = String::from("lo\thi\tcount\tours");
        for n in &names {
            let _ = write!(out, "\tgain_{n}");
        }
        out.push('\n');
        let mut rows: Vec<(f64, String)> = self
            .buckets
            .iter()
            .map(|b| {
                let mut row = format!("{:.2}\t{:.2}\t{}\t{:.6}", b.lo, b.hi, b.count, b.ours_mean);
                for g in &b.gains {
                    let _ = write!(row, "\t{:+.6}", g.1);
                }
                (b.lo, row)
            })
            .collect();
        rows.extend(self.empty_buckets.iter().map(|&(lo, hi)| {
            let mut row = format!("{lo:.2}\t{hi:.2}\t0\t-");
            for _ in &names {
                row.push_str("\t-");
            }
            (lo, row)
        }));
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, r) in rows {
            out.push_str(&r);
            out.push('\n');
        }
        let _ = writeln!(out, "# skipped\t{}", self.skipped);
        out
    }
}

/// Groups images by separability score and reports, per bucket, the gain of
/// `ours` over each baseline in mean Jaccard. `scores[i]` is `None` for images
/// whose mask has no foreground or no background.
pub fn separability_report(
    scores: &[Option<f64>],
    ours: &[f64],
    baselines: &[(String, Vec<f64>)],
    edges: &[f64],
) -> Result<SeparabilityReport> {
    if ours.len() != scores.len() || baselines.iter().any(|(_, b)| b.len() != scores.len()) {
        return Err(Error::contract("separability_report: methods scored on different image sets"));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("bucket edges must be increasing with at least two entries"));
    }
    let nb = edges.len() - 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut skipped = 0;
    for (i, s) in scores.iter().enumerate() {
        match s.and_then(|s| bucket_of(edges, s)) {
            Some(b) => members[b].push(i),
            None => skipped += 1,
        }
    }
    let mean = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
    let mut report = SeparabilityReport {
        buckets: Vec::new(),
        empty_buckets: Vec::new(),
        skipped,
    };
    for (b, idx) in members.iter().enumerate() {
        let (lo, hi) = (edges[b], edges[b + 1]);
        if idx.is_empty() {
            report.empty_buckets.push((lo, hi));
            continue;
        }
        let ours_mean = mean(ours, idx);
        let gains: Vec<(String, f64)> = baselines
            .iter()
            .map(|(name, v)| (name.clone(), ours_mean - mean(v, idx)))
            .collect();
        let min_gain = gains.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        let max_gain = gains.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
        report.buckets.push(BucketGain {
            lo,
            hi,
            count: idx.len(),
            ours_mean,
            gains,
            min_gain,
            max_gain,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Jaccard,
    Corloc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Jaccard => "jaccard",
            Metric::Corloc => "corloc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    /// Jaccard in `[0, 1]`, or 1/0 for a localization hit/miss.
    pub score: f64,
    pub bucket: Option<String>,
}

/// Per-image scores and their aggregate: mean Jaccard, or CorLoc as a
/// percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub images: Vec<ImageScore>,
    pub aggregate: f64,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn new(metric: Metric, images: Vec<ImageScore>) -> Self {
        let aggregate = Self::aggregate_of(metric, &images);
        EvalReport {
            metric,
            images,
            aggregate,
            notes: Vec::new(),
        }
    }

    pub fn aggregate_of(metric: Metric, images: &[ImageScore]) -> f64 {
        if images.is_empty() {
            return 0.0;
        }
        let mean = images.iter().map(|s| s.score).sum::<f64>() / images.len() as f64;
        match metric {
            Metric::Jaccard => mean,
            Metric::Corloc => 100.0 * mean,
        }
    }

    /// Tab-separated records `id score bucket`, framed by `#` header and
    /// footer lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("# metric\t{}\n", self.metric.name());
        for n in &self.notes {
            let _ = writeln!(out, "# note\t{n}");
        }
        out.push_str("id\tscore\tbucket\n");
        for s in &self.images {
            let _ = writeln!(out, "{}\t{:.12}\t{}", s.id, s.score, s.bucket.as_deref().unwrap_or("-"));
        }
        let _ = writeln!(out, "# aggregate\t{:.12}\t{}", self.aggregate, self.images.len());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| Error::contract(format!("report line {}: {m}", line + 1));
        let mut metric = None;
        let mut notes = Vec::new();
        let mut images = Vec::new();
        let mut aggregate = None;
        for (ln, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[..] {
                ["# metric", "jaccard"] => metric = Some(Metric::Jaccard),
                ["# metric", "corloc"] => metric = Some(Metric::Corloc),
                ["# note", n] => notes.push(n.to_string()),
                ["# aggregate", v, _] => aggregate = Some(v.parse::<f64>().map_err(|_| bad(ln, "bad aggregate"))?),
                ["id", "score", "bucket"] => {}
                [id, score, bucket] if !id.starts_with('#') => images.push(ImageScore {
                    id: id.to_string(),
                    score: score.parse().map_err(|_| bad(ln, "bad score"))?,
                    bucket: (bucket != "-").then(|| bucket.to_string()),
                }),
                [""] => {}
                _ => return Err(bad(ln, "unrecognized record")),
            }
        }
        let metric = metric.ok_or_else(|| Error::contract("report has no metric header"))?;
        let aggregate = aggregate.ok_or_else(|| Error::contract("report has no aggregate footer"))?;
        Ok(EvalReport {
            metric,
            images,
            aggregate,
            notes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, px: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| px.contains(&(x, y)))
    }

    #[test]
    fn jaccard_fixtures() {
        let a = mask(2, 2, &[(0, 0), (1, 1)]);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &mask(2, 2, &[(1, 0)])).unwrap(), 0.0);
        let pred = mask(2, 2, &[(0, 0), (0, 1)]);
        let gt = mask(2, 2, &[(0, 1), (1, 1)]);
        assert!((jaccard(&pred, &gt).unwrap() - 1.0 / 3.0).abs() <= 1e-12);
        assert_eq!(jaccard(&BinaryMask::new(2, 2), &BinaryMask::new(2, 2)).unwrap(), 1.0);
        assert_eq!(jaccard(&BinaryMask::new(2, 2), &a).unwrap(), 0.0);
        assert!(jaccard(&a, &BinaryMask::new(3, 2)).is_err());
    }

    #[test]
    fn corloc_fixtures() {
        let b = BBox::new(0, 0, 9, 9).unwrap();
        assert!(corloc(&b, &[b], CORLOC_THRESHOLD));
        let half = BBox::new(5, 0, 14, 9).unwrap();
        assert!((box_iou(&b, &half) - 1.0 / 3.0).abs() <= 1e-12);
        assert!(!corloc(&half, &[b], CORLOC_THRESHOLD));
        let others = [BBox::new(20, 20, 30, 30).unwrap(), b, BBox::new(1, 1, 2, 2).unwrap()];
        assert!(corloc(&b, &others, CORLOC_THRESHOLD));
    }

    #[test]
    fn ap_fixtures() {
        assert_eq!(average_precision(&[true, true, true]).unwrap(), 1.0);
        assert!((average_precision(&[false, true]).unwrap() - 0.5).abs() <= 1e-12);
        assert!((average_precision(&[true, false, true]).unwrap() - 5.0 / 6.0).abs() <= 1e-12);
        assert!(matches!(average_precision(&[false, false]), Err(Error::NoRelevantItems)));
        assert!(mean_ap(&[]).is_err());
    }

    #[test]
    fn separability_extremes() {
        let m = BinaryMask::from_fn(4, 4, |x, _| x < 2);
        let flat = RgbImage::from_pixel(4, 4, image::Rgb([90, 90, 90]));
        assert!(separability(&flat, &m).unwrap().abs() < 1e-12);
        let bw = RgbImage::from_fn(4, 4, |x, _| image::Rgb(if x < 2 { [255; 3] } else { [0; 3] }));
        assert!((separability(&bw, &m).unwrap() - 1.0).abs() < 1e-12);
        // Red and blue share the empty green bin in the per-channel layout.
        let rb = RgbImage::from_fn(4, 4, |x, _| image::Rgb(if x < 2 { [255, 0, 0] } else { [0, 0, 255] }));
        assert!((separability(&rb, &m).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(separability(&flat, &BinaryMask::new(4, 4)).is_err());
        assert!(separability(&flat, &BinaryMask::full(4, 4)).is_err());
    }

    #[test]
    fn report_buckets_by_hand() {
        let scores = [Some(0.05), Some(0.95), None, Some(0.08)];
        let ours = [0.8, 0.9, 0.0, 0.6];
        let base = vec![("color".to_string(), vec![0.2, 0.85, 0.0, 0.4])];
        let r = separability_report(&scores, &ours, &base, &uniform_edges(0.1)).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.buckets.len(), 2);
        assert_eq!(r.buckets.iter().map(|b| b.count).sum::<usize>() + r.skipped, 4);
        assert!((r.buckets[0].ours_mean - 0.7).abs() < 1e-12);
        assert!((r.buckets[0].min_gain - 0.4).abs() < 1e-12);
        assert!((r.buckets[1].max_gain - 0.05).abs() < 1e-12);
        assert_eq!(r.empty_buckets.len(), 8);
        let same = separability_report(&scores, &ours, &[("self".into(), ours.to_vec())], &uniform_edges(0.1)).unwrap();
        assert!(same.buckets.iter().all(|b| b.max_gain == 0.0 && b.min_gain == 0.0));
    }

    #[test]
    fn score_one_lands_in_last_bucket() {
        let e = uniform_edges(0.1);
        assert_eq!(e.len(), 11);
        assert_eq!(bucket_of(&e, 1.0), Some(9));
        assert_eq!(bucket_of(&e, 0.0), Some(0));
        assert_eq!(bucket_of(&e, 0.1), Some(1));
    }

    #[test]
    fn report_text_round_trip() {
        let mut r = EvalReport::new(
            Metric::Corloc,
            vec![
                ImageScore {
                    id: "a".into(),
                    score: 1.0,
                    bucket: Some("0.2-0.3".into()),
                },
                ImageScore {
                    id: "b".into(),
                    score: 0.0,
                    bucket: None,
                },
            ],
        );
        r.notes.push("both-empty masks score 1".into());
        assert_eq!(r.aggregate, 50.0);
        assert_eq!(EvalReport::from_text(&r.to_text()).unwrap(), r);
    }

    #[test]
    fn separability_table_lists_every_bucket() {
        let scores = [Some(0.05), Some(0.07), Some(0.95), None];
        let ours = [0.8, 0.6, 0.9, 0.1];
        let base = vec![("color".to_string(), vec![0.5, 0.5, 0.9, 0.0])];
        let r = separability_report(&scores, &ours, &base, &uniform_edges(DEFAULT_BUCKET_WIDTH)).unwrap();
        let text = r.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "lo\thi\tcount\tours\tgain_color");
        assert_eq!(lines[1], "0.00\t0.10\t2\t0.700000\t+0.200000");
        assert_eq!(lines[2], "0.10\t0.20\t0\t-\t-");
        assert_eq!(lines[10], "0.90\t1.00\t1\t0.900000\t+0.000000");
        assert_eq!(lines[11], "# skipped\t1");
    }
}
