use std::time::Instant;

use objectness_core::training::{
    generate_retrieval_benchmark, generate_synthetic_dataset, save_dataset, ShapeFamily, Texture,
};

use crate::args::SynthArgs;
use crate::config::{write_record, BenchmarkSection, FileConfig};
use crate::error::{CliError, CliResult};
use crate::Verbosity;

pub fn parse_family(s: &str) -> CliResult<ShapeFamily> {
    match s.trim() {
        "rectangle" | "rect" => Ok(ShapeFamily::Rectangle),
        "ellipse" => Ok(ShapeFamily::Ellipse),
        "triangle" => Ok(ShapeFamily::Triangle),
        "ring" => Ok(ShapeFamily::Ring),
        other => Err(CliError::usage(format!("unknown shape family {other:?}"))),
    }
}

pub fn parse_texture(s: &str) -> CliResult<Texture> {
    match s.trim() {
        "flat" => Ok(Texture::Flat),
        "gradient" => Ok(Texture::Gradient),
        "noise" => Ok(Texture::Noise),
        "stripes" => Ok(Texture::Stripes),
        other => Err(CliError::usage(format!("unknown texture {other:?}"))),
    }
}

pub fn resolve(a: &SynthArgs) -> CliResult<FileConfig> {
    let mut cfg = FileConfig::load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let spec = &mut cfg.synth;
    spec.seed = cfg.seed;
    if let Some(v) = a.count {
        spec.count = v;
    }
    if let Some(v) = a.width {
        spec.width = v;
    }
    if let Some(v) = a.height {
        spec.height = v;
    }
    if let Some(v) = &a.families {
        spec.families = v.iter().map(|s| parse_family(s)).collect::<CliResult<_>>()?;
    }
    if let Some(v) = &a.textures {
        spec.textures = v.iter().map(|s| parse_texture(s)).collect::<CliResult<_>>()?;
    }
    if let Some(v) = &a.separation {
        spec.separation = (v[0], v[1]);
    }
    if let Some(v) = &a.shapes {
        spec.shapes_per_image = (v[0], v[1]);
    }
    if let Some(v) = &a.scale {
        spec.object_scale = (v[0], v[1]);
    }
    if let Some(classes) = a.classes {
        cfg.benchmark = Some(BenchmarkSection {
            classes,
            per_class: a.per_class.unwrap_or(20),
        });
    }
    spec.validate()?;
    Ok(cfg)
}

pub fn run(a: &SynthArgs, v: Verbosity) -> CliResult<()> {
    let started = Instant::now();
    let cfg = resolve(a)?;
    let samples = match &cfg.benchmark {
        Some(b) => generate_retrieval_benchmark(&cfg.synth, b.classes, b.per_class),
        None => generate_synthetic_dataset(&cfg.synth),
    };
    save_dataset(&a.out, &samples)?;
    v.info(format_args!("wrote {} samples to {}", samples.len(), a.out.display()));
    write_record(&a.out, "synth", cfg.seed, started, &cfg)
}
