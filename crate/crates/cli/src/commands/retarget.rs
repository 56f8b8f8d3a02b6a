use std::time::Instant;

use image::{imageops, Rgb, RgbImage};
use objectness_core::net::load_weights;
use objectness_core::postprocess::threshold_map;
use objectness_core::raster::{load_rgb, save_rgb, BinaryMask, DEFAULT_CHANNEL_MEAN};
use objectness_core::retarget::{retarget_tracking, scaled_dim};
use serde::Serialize;

use crate::args::RetargetArgs;
use crate::commands::segment::load_mask;
use crate::config::write_record;
use crate::error::{CliError, CliResult};
use crate::Verbosity;

/// `p/q` or a decimal fraction in (0, 1].
pub fn parse_fraction(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::usage(format!("fraction {s:?} must be p/q or a decimal in (0, 1]"));
    let (num, den) = match s.split_once('/') {
        Some((p, q)) => (p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?),
        None => {
            let f: f64 = s.trim().parse().map_err(|_| bad())?;
            ((f * 1e6).round() as usize, 1_000_000)
        }
    };
    if num == 0 || den == 0 || num > den {
        return Err(bad());
    }
    Ok((num, den))
}

pub fn target_dims(a: &RetargetArgs, w: usize, h: usize) -> CliResult<(usize, usize)> {
    match (&a.fraction, a.width, a.height) {
        (Some(f), _, _) => {
            let (p, q) = parse_fraction(f)?;
            Ok((scaled_dim(w, p, q), scaled_dim(h, p, q)))
        }
        (None, None, None) => Err(CliError::usage("give --fraction or --width/--height")),
        (None, tw, th) => Ok((tw.unwrap_or(w), th.unwrap_or(h))),
    }
}

/// Input and output next to each other on a black canvas.
pub fn side_by_side(a: &RgbImage, b: &RgbImage) -> RgbImage {
    const GAP: u32 = 4;
    let mut canvas = RgbImage::from_pixel(a.width() + GAP + b.width(), a.height().max(b.height()), Rgb([0, 0, 0]));
    imageops::replace(&mut canvas, a, 0, 0);
    imageops::replace(&mut canvas, b, (a.width() + GAP) as i64, 0);
    canvas
}

#[derive(Serialize)]
struct RetargetRecord {
    image: String,
    foreground: String,
    target_width: usize,
    target_height: usize,
}

pub fn run(a: &RetargetArgs, v: Verbosity) -> CliResult<()> {
    let started = Instant::now();
    let img = load_rgb(&a.image)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (tw, th) = target_dims(a, w, h)?;
    let (fg, source): (Option<BinaryMask>, String) = if a.baseline {
        (None, "none (baseline)".into())
    } else if let Some(m) = &a.mask {
        (Some(load_mask(m)?), m.display().to_string())
    } else if let Some(wp) = &a.weights {
        let (net, _) = load_weights(wp)?;
        let mask = threshold_map(&net.predict_image(&img, DEFAULT_CHANNEL_MEAN)?);
        v.info(format_args!("network foreground covers {} of {} pixels", mask.count(), mask.area()));
        (Some(mask), wp.display().to_string())
    } else {
        return Err(CliError::usage("give --weights, --mask or --baseline"));
    };
    let gt = a.gt.as_deref().map(load_mask).transpose()?;
    let (result, kept) = retarget_tracking(&img, fg.as_ref(), gt.as_ref(), tw, th)?;
    save_rgb(&result.image, &a.out)?;
    if let (Some(gt), Some(kept)) = (&gt, &kept) {
        println!("removed_foreground\t{}\t{}", gt.count() - kept.count(), gt.count());
    }
    if let Some(p) = &a.compare {
        save_rgb(&side_by_side(&img, &result.image), p)?;
    }
    println!("{w}x{h} -> {tw}x{th}");
    write_record(
        &a.out,
        "retarget",
        0,
        started,
        RetargetRecord {
            image: a.image.display().to_string(),
            foreground: source,
            target_width: tw,
            target_height: th,
        },
    )
}
