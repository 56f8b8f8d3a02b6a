use std::fs;
use std::time::Instant;

use objectness_core::net::{load_weights, Network};
use objectness_core::raster::{load_rgb, DEFAULT_CHANNEL_MEAN};
use objectness_core::retrieval::{
    evaluate_index, FeatureProvider, rank, IndexEntry, Mode, NetFeatures, Representation, Representer, RetrievalIndex,
};
use objectness_core::training::{load_dataset, LabeledSample};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BuildIndexArgs, RetrieveArgs, RetrieveEvalArgs};
use crate::config::write_record;
use crate::error::{CliError, CliResult};
use crate::Verbosity;

/// Describes every sample in `mode`, in parallel, entries in dataset order.
pub fn index_samples(net: &Network<f32>, input_size: usize, samples: &[LabeledSample], mode: Mode) -> CliResult<RetrievalIndex> {
    let features = NetFeatures {
        net,
        input_size,
        mean: DEFAULT_CHANNEL_MEAN,
    };
    let representer = Representer {
        net,
        features: &features,
        mean: DEFAULT_CHANNEL_MEAN,
    };
    let reps: Vec<Representation> = samples
        .par_iter()
        .map(|s| representer.represent(&s.image, mode))
        .collect::<Result<_, _>>()?;
    let dim = match mode {
        Mode::Ff => 2 * features.dim(),
        _ => features.dim(),
    };
    let mut index = RetrievalIndex::new(mode, dim);
    for (s, r) in samples.iter().zip(reps) {
        index.fallbacks += r.fallback as usize;
        index.insert(IndexEntry {
            id: s.id.clone(),
            class: s.class,
            vector: r.vector,
        })?;
    }
    Ok(index)
}

#[derive(Serialize)]
struct IndexRecord {
    weights: String,
    data: String,
    mode: String,
    input_size: usize,
}

pub fn build_index(a: &BuildIndexArgs, v: Verbosity) -> CliResult<()> {
    let started = Instant::now();
    let mode = Mode::parse(&a.mode)?;
    let (net, _) = load_weights(&a.features.weights)?;
    let samples = load_dataset(&a.data)?;
    let index = index_samples(&net, a.features.input_size, &samples, mode)?;
    index.save(&a.out)?;
    v.info(format_args!(
        "indexed {} images ({} foreground fallbacks)",
        index.entries().len(),
        index.fallbacks
    ));
    write_record(
        &a.out,
        "build-index",
        0,
        started,
        IndexRecord {
            weights: a.features.weights.display().to_string(),
            data: a.data.display().to_string(),
            mode: mode.name().into(),
            input_size: a.features.input_size,
        },
    )
}

pub fn retrieve(a: &RetrieveArgs, _v: Verbosity) -> CliResult<()> {
    let index = RetrievalIndex::load(&a.index)?;
    if let Some(m) = &a.mode {
        let m = Mode::parse(m)?;
        if m != index.mode() {
            return Err(CliError::usage(format!(
                "query mode {} does not match index mode {}",
                m.name(),
                index.mode().name()
            )));
        }
    }
    let (net, _) = load_weights(&a.features.weights)?;
    let features = NetFeatures {
        net: &net,
        input_size: a.features.input_size,
        mean: DEFAULT_CHANNEL_MEAN,
    };
    let representer = Representer {
        net: &net,
        features: &features,
        mean: DEFAULT_CHANNEL_MEAN,
    };
    let query = representer.represent(&load_rgb(&a.query)?, index.mode())?;
    let ranked = rank(&query.vector, &index, None)?;
    if a.k > ranked.len() {
        eprintln!("warning: k = {} exceeds the {} indexed images; returning all", a.k, ranked.len());
    }
    for (i, (id, sim)) in ranked.iter().take(a.k).enumerate() {
        println!("{}\t{id}\t{sim:.6}", i + 1);
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalRecord {
    source: String,
    mode: String,
}

pub fn retrieve_eval(a: &RetrieveEvalArgs, v: Verbosity) -> CliResult<()> {
    let started = Instant::now();
    let (index, source) = match (&a.index, &a.weights, &a.data) {
        (Some(dir), _, _) => (RetrievalIndex::load(dir)?, dir.display().to_string()),
        (None, Some(w), Some(d)) => {
            let mode = Mode::parse(a.mode.as_deref().expect("clap requires --mode"))?;
            let (net, _) = load_weights(w)?;
            let samples = load_dataset(d)?;
            (index_samples(&net, a.input_size, &samples, mode)?, d.display().to_string())
        }
        _ => return Err(CliError::usage("give --index, or --weights with --data")),
    };
    if let Some(m) = &a.mode {
        if Mode::parse(m)? != index.mode() {
            return Err(CliError::usage(format!("index holds {} descriptors, not {m}", index.mode().name())));
        }
    }
    let report = evaluate_index(&index)?;
    fs::write(&a.out, report.to_text()).map_err(|e| CliError::io(&a.out, e))?;
    println!("map\t{}\t{:.6}", report.mode.name(), report.map);
    v.info(format_args!("{} queries, {} skipped", report.queries, report.skipped));
    write_record(
        &a.out,
        "retrieve-eval",
        0,
        started,
        EvalRecord {
            source,
            mode: index.mode().name().into(),
        },
    )
}
