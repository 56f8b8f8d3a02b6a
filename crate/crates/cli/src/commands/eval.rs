use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use objectness_core::metrics::{
    bucket_of, corloc, jaccard, separability, separability_report, uniform_edges, EvalReport, ImageScore, Metric,
    CORLOC_THRESHOLD, DEFAULT_BUCKET_WIDTH,
};
use objectness_core::postprocess::{
    connected_components, largest_foreground, tight_bbox, BBox, Connectivity, MIN_REGION_FRACTION,
};
use objectness_core::raster::BinaryMask;
use objectness_core::training::{load_dataset, LabeledSample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::{EvalArgs, EvalMode};
use crate::config::write_record;
use crate::error::{CliError, CliResult};
use crate::Verbosity;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxEntry {
    pub id: String,
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxManifest {
    pub boxes: Vec<BoxEntry>,
}

impl BoxManifest {
    pub fn load(path: &Path) -> CliResult<BTreeMap<String, Vec<BBox>>> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let m: BoxManifest = toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let mut out: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
        for b in m.boxes {
            let bb = BBox::new(b.x_min, b.y_min, b.x_max, b.y_max)
                .ok_or_else(|| CliError::usage(format!("{}: inverted box for {}", path.display(), b.id)))?;
            out.entry(b.id).or_default().push(bb);
        }
        Ok(out)
    }
}

/// Tight box of every 8-connected ground-truth region.
pub fn gt_boxes(mask: &BinaryMask) -> Vec<BBox> {
    let cc = connected_components(mask, Connectivity::Eight);
    (1..=cc.count() as u32).filter_map(|l| tight_bbox(&cc.region(l))).collect()
}

/// Tight box of the largest surviving predicted region.
pub fn predicted_box(mask: &BinaryMask) -> Option<BBox> {
    largest_foreground(mask, MIN_REGION_FRACTION).and_then(|m| tight_bbox(&m))
}

fn bucket_label(edges: &[f64], b: usize) -> String {
    format!("{:.2}-{:.2}", edges[b], edges[b + 1])
}

enum Outcome {
    Scored(ImageScore),
    Missing(String),
    Skipped(String),
}

fn load_pred(dir: &Path, id: &str) -> CliResult<Option<BinaryMask>> {
    let p: PathBuf = dir.join(format!("{id}.png"));
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(BinaryMask::load_png(&p)?))
}

fn score_one(
    s: &LabeledSample,
    mode: EvalMode,
    pred_dir: &Path,
    boxes: Option<&BTreeMap<String, Vec<BBox>>>,
    edges: &[f64],
) -> CliResult<Outcome> {
    let Some(pred) = load_pred(pred_dir, &s.id)? else {
        return Ok(Outcome::Missing(s.id.clone()));
    };
    let gt = s.mask();
    Ok(match mode {
        EvalMode::Seg => Outcome::Scored(ImageScore {
            id: s.id.clone(),
            score: jaccard(&pred, &gt)?,
            bucket: None,
        }),
        EvalMode::Separability => {
            let score = jaccard(&pred, &gt)?;
            let bucket = separability(&s.image, &gt)
                .ok()
                .and_then(|sep| bucket_of(edges, sep))
                .map(|b| bucket_label(edges, b));
            Outcome::Scored(ImageScore {
                id: s.id.clone(),
                score,
                bucket,
            })
        }
        EvalMode::Corloc => {
            if pred.dims() != gt.dims() {
                return Err(CliError::usage(format!("{}: prediction {:?} vs ground truth {:?}", s.id, pred.dims(), gt.dims())));
            }
            let truth = match boxes {
                Some(b) => b.get(&s.id).cloned().unwrap_or_default(),
                None => gt_boxes(&gt),
            };
            if truth.is_empty() {
                return Ok(Outcome::Skipped(s.id.clone()));
            }
            let hit = predicted_box(&pred).is_some_and(|b| corloc(&b, &truth, CORLOC_THRESHOLD));
            Outcome::Scored(ImageScore {
                id: s.id.clone(),
                score: if hit { 1.0 } else { 0.0 },
                bucket: None,
            })
        }
    })
}

#[derive(Serialize)]
struct EvalRecord {
    mode: String,
    pred: String,
    gt: String,
    baselines: Vec<String>,
}

pub fn run(a: &EvalArgs, v: Verbosity) -> CliResult<()> {
    let started = Instant::now();
    let samples = load_dataset(&a.gt)?;
    let boxes = a.boxes.as_deref().map(BoxManifest::load).transpose()?;
    let edges = uniform_edges(DEFAULT_BUCKET_WIDTH);
    let baselines: Vec<(String, PathBuf)> = a
        .baselines
        .iter()
        .map(|b| {
            b.split_once('=')
                .map(|(n, d)| (n.to_string(), PathBuf::from(d)))
                .ok_or_else(|| CliError::usage(format!("--baseline expects name=dir, got {b:?}")))
        })
        .collect::<CliResult<_>>()?;
    if !baselines.is_empty() && a.mode != EvalMode::Separability {
        return Err(CliError::usage("--baseline only applies to separability mode"));
    }
    let outcomes = samples
        .par_iter()
        .map(|s| score_one(s, a.mode, &a.pred, boxes.as_ref(), &edges))
        .collect::<CliResult<Vec<_>>>()?;

    let metric = if a.mode == EvalMode::Corloc { Metric::Corloc } else { Metric::Jaccard };
    let mut images = Vec::new();
    let mut notes = Vec::new();
    let mut missing = 0;
    for o in outcomes {
        match o {
            Outcome::Scored(s) => images.push(s),
            Outcome::Missing(id) => {
                missing += 1;
                notes.push(format!("missing prediction {id}"));
            }
            Outcome::Skipped(id) => notes.push(format!("no ground-truth object in {id}")),
        }
    }

    if a.mode == EvalMode::Separability {
        let scored: Vec<&LabeledSample> = samples.iter().filter(|s| images.iter().any(|i| i.id == s.id)).collect();
        let sep: Vec<Option<f64>> = scored.iter().map(|s| separability(&s.image, &s.mask()).ok()).collect();
        let ours: Vec<f64> = images.iter().map(|i| i.score).collect();
        let mut base_scores = Vec::new();
        for (name, dir) in &baselines {
            let mut scores = Vec::with_capacity(scored.len());
            for s in &scored {
                match load_pred(dir, &s.id)? {
                    Some(p) => scores.push(jaccard(&p, &s.mask())?),
                    None => {
                        missing += 1;
                        notes.push(format!("missing {name} prediction {}", s.id));
                        scores.push(0.0);
                    }
                }
            }
            base_scores.push((name.clone(), scores));
        }
        let table = separability_report(&sep, &ours, &base_scores, &edges)?.to_text();
        match &a.table {
            Some(p) => fs::write(p, &table).map_err(|e| CliError::io(p, e))?,
            None => print!("{table}"),
        }
    }

    let mut report = EvalReport::new(metric, images);
    report.notes = notes;
    fs::write(&a.out, report.to_text()).map_err(|e| CliError::io(&a.out, e))?;
    println!("{}\t{:.6}\t{}", metric.name(), report.aggregate, report.images.len());
    v.info(format_args!("report written to {}", a.out.display()));
    write_record(
        &a.out,
        "eval",
        0,
        started,
        EvalRecord {
            mode: format!("{:?}", a.mode).to_lowercase(),
            pred: a.pred.display().to_string(),
            gt: a.gt.display().to_string(),
            baselines: a.baselines.clone(),
        },
    )?;
    if missing > 0 {
        return Err(CliError::Incomplete(format!("{missing} prediction files missing; see notes in {}", a.out.display())));
    }
    Ok(())
}
