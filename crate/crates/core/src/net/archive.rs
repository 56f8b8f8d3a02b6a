//! Weight archive: a directory holding `manifest.toml` plus one raw
//! little-endian `f32` blob per tensor (row-major, weights ordered
//! `out_c, in_c, k, k`). Each manifest entry records the layer index, role,
//! shape, dtype, blob file name and SHA-256 of the blob.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use objectness_tensor::{Shape, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::NetworkConfig;
use super::network::{Network, Velocity};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
const FORMAT: &str = "objectness-weights";
const DTYPE: &str = "f32le";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Role {
    Weight,
    Bias,
    WeightVelocity,
    BiasVelocity,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Weight => "weight",
            Role::Bias => "bias",
            Role::WeightVelocity => "weight_velocity",
            Role::BiasVelocity => "bias_velocity",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    layer: usize,
    role: Role,
    shape: Vec<usize>,
    dtype: String,
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    /// Completed training iterations; present when optimizer state is stored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iteration: Option<u64>,
    network: NetworkConfig,
    tensors: Vec<Entry>,
}

fn encode(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_blob(dir: &Path, entries: &mut Vec<Entry>, layer: usize, role: Role, shape: Vec<usize>, values: &[f32]) -> Result<()> {
    let file = format!("layer{layer:03}.{}.bin", role.name());
    let bytes = encode(values);
    let path = dir.join(&file);
    fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    entries.push(Entry {
        layer,
        role,
        shape,
        dtype: DTYPE.into(),
        file,
        sha256: hex::encode(Sha256::digest(&bytes)),
    });
    Ok(())
}

/// Writes `net` to `dir`. With `iteration`, the optimizer velocity is stored
/// as well so training can resume.
pub fn save_weights(net: &Network<f32>, dir: &Path, iteration: Option<u64>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (&layer, p) in net.params() {
        write_blob(dir, &mut entries, layer, Role::Weight, p.weights.shape().dims().to_vec(), p.weights.data())?;
        write_blob(dir, &mut entries, layer, Role::Bias, vec![p.bias.len()], &p.bias)?;
        if iteration.is_some() {
            let v = &net.velocity()[&layer];
            write_blob(
                dir,
                &mut entries,
                layer,
                Role::WeightVelocity,
                p.weights.shape().dims().to_vec(),
                &v.weights,
            )?;
            write_blob(dir, &mut entries, layer, Role::BiasVelocity, vec![v.bias.len()], &v.bias)?;
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: 1,
        iteration,
        network: net.config().clone(),
        tensors: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::Manifest {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::Manifest {
        path: path.clone(),
        detail: e.to_string(),
    })?;
    if m.format != FORMAT || m.version != 1 {
        return Err(Error::Manifest {
            path,
            detail: format!("unsupported format {:?} version {}", m.format, m.version),
        });
    }
    Ok(m)
}

fn read_blob(dir: &Path, e: &Entry) -> Result<Vec<f32>> {
    let path: PathBuf = dir.join(&e.file);
    if e.dtype != DTYPE {
        return Err(Error::Manifest {
            path: dir.join(MANIFEST_FILE),
            detail: format!("layer {} {}: unsupported dtype {:?}", e.layer, e.role.name(), e.dtype),
        });
    }
    let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
    let expected = e.shape.iter().product::<usize>() * 4;
    if bytes.len() != expected {
        return Err(Error::ArchiveTruncated {
            file: path,
            expected,
            found: bytes.len(),
        });
    }
    if hex::encode(Sha256::digest(&bytes)) != e.sha256 {
        return Err(Error::ArchiveChecksum { file: path });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn shape4(e: &Entry) -> Result<Shape> {
    match e.shape[..] {
        [n, c, h, w] => Ok(Shape::new(n, c, h, w)),
        _ => Err(Error::ArchiveShape {
            layer: e.layer,
            role: e.role.name().into(),
            expected: vec![0; 4],
            found: e.shape.clone(),
        }),
    }
}

fn assemble(dir: &Path, config: NetworkConfig, manifest: &Manifest) -> Result<Network<f32>> {
    let expected: BTreeMap<usize, [usize; 4]> = config.conv_shapes().into_iter().collect();
    let mut params: BTreeMap<usize, (Tensor<f32>, Vec<f32>)> = BTreeMap::new();
    let mut vel: BTreeMap<usize, Velocity<f32>> = BTreeMap::new();
    let mut blobs: BTreeMap<(usize, Role), (&Entry, Vec<f32>)> = BTreeMap::new();
    for e in &manifest.tensors {
        // Shape checks against the target config come before touching blobs so
        // that the error names the offending layer.
        let want: Vec<usize> = match (expected.get(&e.layer), e.role) {
            (Some(s), Role::Weight | Role::WeightVelocity) => s.to_vec(),
            (Some(s), Role::Bias | Role::BiasVelocity) => vec![s[0]],
            (None, _) => vec![],
        };
        if want != e.shape {
            return Err(Error::ArchiveShape {
                layer: e.layer,
                role: e.role.name().into(),
                expected: want,
                found: e.shape.clone(),
            });
        }
        blobs.insert((e.layer, e.role), (e, read_blob(dir, e)?));
    }
    let mut take = |layer: usize, role: Role| blobs.remove(&(layer, role));
    for (&layer, &[o, i, k, _]) in &expected {
        let (Some((we, w)), Some((_, b))) = (take(layer, Role::Weight), take(layer, Role::Bias)) else {
            return Err(Error::Manifest {
                path: dir.join(MANIFEST_FILE),
                detail: format!("layer {layer}: missing weight or bias entry"),
            });
        };
        debug_assert_eq!(we.shape, vec![o, i, k, k]);
        params.insert(layer, (Tensor::from_vec(shape4(we)?, w)?, b));
        if let (Some((_, vw)), Some((_, vb))) = (take(layer, Role::WeightVelocity), take(layer, Role::BiasVelocity)) {
            vel.insert(layer, Velocity { weights: vw, bias: vb });
        }
    }
    let velocity = if manifest.iteration.is_some() { Some(vel) } else { None };
    Network::from_parts(config, params, velocity)
}

/// Loads the network described by the archive's own manifest, together with
/// the stored iteration count (if any).
pub fn load_weights(dir: &Path) -> Result<(Network<f32>, Option<u64>)> {
    let m = read_manifest(dir)?;
    let config = m.network.clone();
    let net = assemble(dir, config, &m)?;
    Ok((net, m.iteration))
}

/// Loads archived parameters into a network of the given architecture,
/// failing with a shape error if the archive was written for another one.
pub fn load_weights_for(config: NetworkConfig, dir: &Path) -> Result<(Network<f32>, Option<u64>)> {
    let m = read_manifest(dir)?;
    let net = assemble(dir, config, &m)?;
    Ok((net, m.iteration))
}
