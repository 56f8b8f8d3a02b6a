use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::time::Instant;

use objectness_core::net::{load_weights_for, save_weights, Network, NetworkConfig};
use objectness_core::training::{load_dataset, train_from, LossRecord, LossResolution};
use objectness_core::Error;

use crate::args::{LossResolutionArg, TrainArgs};
use crate::config::{write_record, FileConfig};
use crate::error::{CliError, CliResult};
use crate::Verbosity;

pub const WEIGHTS_DIR: &str = "weights";
pub const LOSS_LOG: &str = "loss.log";

pub fn resolve(a: &TrainArgs) -> CliResult<FileConfig> {
    let mut cfg = FileConfig::load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = &a.preset {
        cfg.preset = p.clone();
    }
    let t = &mut cfg.train;
    t.seed = cfg.seed;
    if let Some(v) = a.iterations {
        t.total_iterations = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lr {
        t.base_lr = v;
    }
    if let Some(v) = a.lr_decay_every {
        t.lr_decay_every = v;
    }
    if let Some(v) = a.crop {
        t.crop_size = v;
    }
    if let Some(v) = a.loss_resolution {
        t.loss_resolution = match v {
            LossResolutionArg::Logits => LossResolution::Logits,
            LossResolutionArg::Input => LossResolution::Input,
        };
    }
    t.validate()?;
    NetworkConfig::preset(&cfg.preset)?;
    Ok(cfg)
}

/// `iteration<TAB>lr<TAB>loss`, shortest round-trip float formatting.
pub fn format_record(r: &LossRecord) -> String {
    format!("{}\t{}\t{}", r.iteration, r.lr, r.loss)
}

pub fn run(a: &TrainArgs, v: Verbosity) -> CliResult<()> {
    let started = Instant::now();
    let cfg = resolve(a)?;
    let net_cfg = NetworkConfig::preset(&cfg.preset)?;
    let data = load_dataset(&a.data)?;
    let (mut net, start, prior) = match &a.resume {
        Some(dir) => {
            let (net, it) = load_weights_for(net_cfg, &dir.join(WEIGHTS_DIR))?;
            let it = it.ok_or_else(|| {
                CliError::usage(format!("{} holds no training checkpoint", dir.join(WEIGHTS_DIR).display()))
            })?;
            let path = dir.join(LOSS_LOG);
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let lines: Vec<String> = text.lines().take(it as usize).map(String::from).collect();
            if lines.len() as u64 != it {
                return Err(CliError::usage(format!(
                    "{}: {} records for a checkpoint at iteration {it}",
                    path.display(),
                    lines.len()
                )));
            }
            (net, it, lines)
        }
        None => (Network::seeded(net_cfg, cfg.seed)?, 0, Vec::new()),
    };
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let log_path = a.out.join(LOSS_LOG);
    let weights = a.out.join(WEIGHTS_DIR);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?);
    let io = |e: std::io::Error| Error::Io {
        path: log_path.clone(),
        source: e,
    };
    for l in &prior {
        writeln!(log, "{l}").map_err(io)?;
    }
    v.info(format_args!(
        "training {} preset on {} samples, iterations {start}..{}",
        cfg.preset,
        data.len(),
        cfg.train.total_iterations
    ));
    let every = a.checkpoint_every;
    train_from(&mut net, &data, &cfg.train, start, &mut |rec, net| {
        writeln!(log, "{}", format_record(rec)).map_err(io)?;
        if every > 0 && (rec.iteration + 1) % every == 0 {
            log.flush().map_err(io)?;
            save_weights(net, &weights, Some(rec.iteration + 1))?;
        }
        if rec.iteration % 50 == 0 {
            v.info(format_args!("iter {} lr {} loss {:.5}", rec.iteration, rec.lr, rec.loss));
        }
        Ok(())
    })?;
    log.flush().map_err(io)?;
    drop(log);
    save_weights(&net, &weights, Some(cfg.train.total_iterations.max(start)))?;
    write_record(&a.out, "train", cfg.seed, started, &cfg)
}
