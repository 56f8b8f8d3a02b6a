//! Building blocks of the acceptance suite: verdicts, brute-force oracles and
//! the short training runs several criteria share.

use std::fmt;

use objectness_core::metrics::jaccard;
use objectness_core::net::{Network, NetworkConfig};
use objectness_core::postprocess::{connected_components, threshold_map, Connectivity};
use objectness_core::raster::{BinaryMask, DEFAULT_CHANNEL_MEAN};
use objectness_core::retarget::EnergyMap;
use objectness_core::training::{train, LabeledSample, LossResolution, TrainConfig};
use objectness_core::Result;

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }

    /// Passes when at least `need` of the per-seed results pass.
    pub fn from_seeds(per_seed: &[Verdict], need: usize) -> Self {
        let passed = per_seed.iter().filter(|v| v.pass).count();
        let seeds: Vec<String> = per_seed
            .iter()
            .enumerate()
            .map(|(s, v)| format!("seed {s} {}: {}", if v.pass { "ok" } else { "miss" }, v.detail))
            .collect();
        Verdict::new(
            passed >= need,
            format!("{passed}/{} seeds (need {need}); {}", per_seed.len(), seeds.join("; ")),
        )
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// True if `connected_components` induces exactly the partition found by
/// merging every adjacent foreground pair with a union-find, with matching
/// region areas.
pub fn components_match_union_find(mask: &BinaryMask, conn: Connectivity) -> bool {
    let (w, h) = mask.dims();
    let px: Vec<(usize, usize)> = (0..w * h).map(|i| (i % w, i / w)).filter(|&(x, y)| mask.get(x, y)).collect();
    let mut uf = UnionFind {
        parent: (0..px.len()).collect(),
    };
    for i in 0..px.len() {
        for j in i + 1..px.len() {
            let (dx, dy) = (px[i].0.abs_diff(px[j].0), px[i].1.abs_diff(px[j].1));
            let adjacent = match conn {
                Connectivity::Four => dx + dy == 1,
                Connectivity::Eight => dx.max(dy) == 1,
            };
            if adjacent {
                uf.union(i, j);
            }
        }
    }
    let cc = connected_components(mask, conn);
    let label = |p: (usize, usize)| cc.labels[p.1 * w + p.0];
    let roots: Vec<usize> = (0..px.len()).map(|i| uf.find(i)).collect();
    for i in 0..px.len() {
        if label(px[i]) == 0 {
            return false;
        }
        for j in i + 1..px.len() {
            if (roots[i] == roots[j]) != (label(px[i]) == label(px[j])) {
                return false;
            }
        }
    }
    let mut distinct = roots.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mut areas = vec![0; cc.count()];
    for &p in &px {
        areas[label(p) as usize - 1] += 1;
    }
    distinct.len() == cc.count() && areas == cc.areas && cc.labels.iter().filter(|&&l| l != 0).count() == px.len()
}

/// Minimum cost over every monotone 8-connected vertical path, summed top to
/// bottom.
pub fn exhaustive_min_seam(e: &EnergyMap) -> f64 {
    fn walk(e: &EnergyMap, y: usize, x: usize, acc: f64, best: &mut f64) {
        let acc = acc + e.get(x, y);
        if y + 1 == e.height {
            *best = best.min(acc);
            return;
        }
        for nx in x.saturating_sub(1)..=(x + 1).min(e.width - 1) {
            walk(e, y + 1, nx, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    for x in 0..e.width {
        walk(e, 0, x, 0.0, &mut best);
    }
    best
}

/// Schedule of a short toy-network run on square images of side `size`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyRun {
    pub size: usize,
    pub iterations: u64,
    pub lr: f64,
    /// Step of the tenfold learning-rate decay; `None` keeps the rate fixed.
    pub decay_every: Option<u64>,
    pub seed: u64,
}

impl ToyRun {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            base_lr: self.lr,
            lr_decay_every: self.decay_every.unwrap_or(u64::MAX),
            total_iterations: self.iterations,
            seed: self.seed,
            crop_size: self.size,
            loss_resolution: LossResolution::Input,
            ..TrainConfig::default()
        }
    }

    pub fn train(&self, data: &[LabeledSample]) -> Result<Network<f32>> {
        let mut net = Network::seeded(NetworkConfig::toy(), self.seed)?;
        train(&mut net, data, &self.config())?;
        Ok(net)
    }
}

pub fn predicted_mask(net: &Network<f32>, sample: &LabeledSample) -> Result<BinaryMask> {
    Ok(threshold_map(&net.predict_image(&sample.image, DEFAULT_CHANNEL_MEAN)?))
}

/// Per-sample Jaccard of the thresholded network prediction.
pub fn jaccards(net: &Network<f32>, samples: &[LabeledSample]) -> Result<Vec<f64>> {
    samples.iter().map(|s| jaccard(&predicted_mask(net, s)?, &s.mask())).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
