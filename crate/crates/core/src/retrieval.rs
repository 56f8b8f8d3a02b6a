//! Object-aware retrieval: descriptors of the whole image, of the tight box
//! around the segmented foreground, or both, ranked by cosine similarity.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use image::RgbImage;
use objectness_tensor::{bilinear_resize, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{average_precision, mean_ap};
use crate::net::Network;
use crate::postprocess::{largest_foreground, threshold_map, tight_bbox, BBox, MIN_REGION_FRACTION};
use crate::raster::image_to_tensor;

/// Unit-norm descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f32>,
}

impl FeatureVector {
    /// L2-normalizes `values`; an all-zero vector stays zero.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        FeatureVector {
            values: values.iter().map(|v| (v * scale) as f32).collect(),
        }
    }

    pub fn from_raw(values: Vec<f32>) -> Self {
        FeatureVector { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cosine(&self, other: &FeatureVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum()
    }

    /// Concatenation of two vectors, re-normalized.
    pub fn concat(&self, other: &FeatureVector) -> FeatureVector {
        FeatureVector::normalized(self.values.iter().chain(&other.values).map(|&v| v as f64).collect())
    }
}

/// Source of global image descriptors.
pub trait FeatureProvider: Sync {
    /// Descriptor length.
    fn dim(&self) -> usize;
    /// Unit-norm descriptor of `image`.
    fn describe(&self, image: &RgbImage) -> Result<FeatureVector>;
}

/// Average-pooled classifier-input features of an objectness network; images
/// are resized to `input_size x input_size` first.
pub struct NetFeatures<'a> {
    pub net: &'a Network<f32>,
    pub input_size: usize,
    pub mean: [f32; 3],
}

impl FeatureProvider for NetFeatures<'_> {
    fn dim(&self) -> usize {
        self.net.config().feature_channels()
    }

    fn describe(&self, image: &RgbImage) -> Result<FeatureVector> {
        let t: Tensor<f32> = image_to_tensor(image, self.mean);
        let s = t.shape();
        let t = if (s.h, s.w) == (self.input_size, self.input_size) {
            t
        } else {
            bilinear_resize(&t, self.input_size, self.input_size)?
        };
        let feats = self.net.forward_to(&t, self.net.config().classifier())?;
        let fs = feats.shape();
        let pooled = (0..fs.c)
            .map(|c| feats.plane(0, c).iter().map(|&v| v as f64).sum::<f64>() / fs.plane() as f64)
            .collect();
        Ok(FeatureVector::normalized(pooled))
    }
}

/// Descriptor of `region` of `image` (whole image when `None`).
pub fn extract_features(provider: &dyn FeatureProvider, image: &RgbImage, region: Option<BBox>) -> Result<FeatureVector> {
    match region {
        None => provider.describe(image),
        Some(b) => {
            if b.x_max >= image.width() as usize || b.y_max >= image.height() as usize {
                return Err(Error::contract(format!(
                    "region {b:?} outside {}x{} image",
                    image.width(),
                    image.height()
                )));
            }
            let crop =
                image::imageops::crop_imm(image, b.x_min as u32, b.y_min as u32, b.width() as u32, b.height() as u32)
                    .to_image();
            provider.describe(&crop)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Full,
    Fg,
    Ff,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Full, Mode::Fg, Mode::Ff];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::Fg => "fg",
            Mode::Ff => "ff",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Mode::Full),
            "fg" => Ok(Mode::Fg),
            "ff" => Ok(Mode::Ff),
            _ => Err(Error::Config(format!("unknown retrieval mode {s:?} (full, fg, ff)"))),
        }
    }
}

/// Segments images and describes them in any representation mode.
pub struct Representer<'a> {
    pub net: &'a Network<f32>,
    pub features: &'a dyn FeatureProvider,
    pub mean: [f32; 3],
}

/// A representation and whether the foreground path fell back to the whole
/// image.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub vector: FeatureVector,
    pub fallback: bool,
}

impl Representer<'_> {
    /// Tight box of the largest foreground region, if one survives the
    /// minimum-area rule.
    pub fn foreground_box(&self, image: &RgbImage) -> Result<Option<BBox>> {
        let map = self.net.predict_image(image, self.mean)?;
        Ok(largest_foreground(&threshold_map(&map), MIN_REGION_FRACTION).and_then(|m| tight_bbox(&m)))
    }

    pub fn represent(&self, image: &RgbImage, mode: Mode) -> Result<Representation> {
        let full = || extract_features(self.features, image, None);
        let fg = || -> Result<(FeatureVector, bool)> {
            match self.foreground_box(image)? {
                Some(b) => Ok((extract_features(self.features, image, Some(b))?, false)),
                None => Ok((full()?, true)),
            }
        };
        Ok(match mode {
            Mode::Full => Representation {
                vector: full()?,
                fallback: false,
            },
            Mode::Fg => {
                let (vector, fallback) = fg()?;
                Representation { vector, fallback }
            }
            Mode::Ff => {
                let (v, fallback) = fg()?;
                Representation {
                    vector: full()?.concat(&v),
                    fallback,
                }
            }
        })
    }

    /// All three modes, sharing the segmentation and the descriptors.
    pub fn represent_all(&self, image: &RgbImage) -> Result<BTreeMap<Mode, Representation>> {
        let full = extract_features(self.features, image, None)?;
        let (fg, fallback) = match self.foreground_box(image)? {
            Some(b) => (extract_features(self.features, image, Some(b))?, false),
            None => (full.clone(), true),
        };
        let ff = full.concat(&fg);
        Ok(BTreeMap::from([
            (
                Mode::Full,
                Representation {
                    vector: full,
                    fallback: false,
                },
            ),
            (Mode::Fg, Representation { vector: fg, fallback }),
            (Mode::Ff, Representation { vector: ff, fallback }),
        ]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    pub class: Option<u32>,
    pub vector: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    mode: Mode,
    dim: usize,
    entries: Vec<IndexEntry>,
    /// Entries whose foreground path fell back to the whole image.
    pub fallbacks: usize,
}

const INDEX_MANIFEST: &str = "manifest.toml";
const INDEX_RECORDS: &str = "records.bin";

#[derive(Serialize, Deserialize)]
struct IndexManifest {
    format: String,
    mode: Mode,
    dim: usize,
    count: usize,
    fallbacks: usize,
}

impl RetrievalIndex {
    pub fn new(mode: Mode, dim: usize) -> Self {
        RetrievalIndex {
            mode,
            dim,
            entries: Vec::new(),
            fallbacks: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, entry: IndexEntry) -> Result<()> {
        if entry.vector.len() != self.dim {
            return Err(Error::contract(format!(
                "{} index holds {}-d vectors, got {}",
                self.mode.name(),
                self.dim,
                entry.vector.len()
            )));
        }
        if self.entries.iter().any(|e| e.id == entry.id) {
            return Err(Error::contract(format!("duplicate index id {:?}", entry.id)));
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Manifest plus one binary record per entry: `u32` id length, id bytes,
    /// `i64` class (-1 for none), then `dim` little-endian `f32`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = IndexManifest {
            format: "objectness-index".into(),
            mode: self.mode,
            dim: self.dim,
            count: self.entries.len(),
            fallbacks: self.fallbacks,
        };
        let path = dir.join(INDEX_MANIFEST);
        let text = toml::to_string(&manifest).map_err(|e| Error::Manifest {
            path: path.clone(),
            detail: e.to_string(),
        })?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let mut bytes = Vec::new();
        for e in &self.entries {
            bytes.extend_from_slice(&(e.id.len() as u32).to_le_bytes());
            bytes.extend_from_slice(e.id.as_bytes());
            bytes.extend_from_slice(&e.class.map_or(-1i64, |c| c as i64).to_le_bytes());
            for v in e.vector.values() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let path = dir.join(INDEX_RECORDS);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join(INDEX_MANIFEST);
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let bad = |detail: String| Error::Manifest {
            path: mpath.clone(),
            detail,
        };
        let m: IndexManifest = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if m.format != "objectness-index" {
            return Err(bad(format!("unexpected format {:?}", m.format)));
        }
        let rpath = dir.join(INDEX_RECORDS);
        let bytes = fs::read(&rpath).map_err(|e| Error::io(&rpath, e))?;
        let truncated = || Error::ArchiveTruncated {
            file: rpath.clone(),
            expected: 0,
            found: bytes.len(),
        };
        let mut index = RetrievalIndex::new(m.mode, m.dim);
        index.fallbacks = m.fallbacks;
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(truncated)?;
            pos += n;
            Ok(s)
        };
        for _ in 0..m.count {
            let len = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
            let id = String::from_utf8(take(len)?.to_vec()).map_err(|e| bad(format!("entry id: {e}")))?;
            let class = i64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            let values = take(4 * m.dim)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            index.insert(IndexEntry {
                id,
                class: u32::try_from(class).ok(),
                vector: FeatureVector::from_raw(values),
            })?;
        }
        if pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes in {INDEX_RECORDS}", bytes.len() - pos)));
        }
        Ok(index)
    }
}

/// Index ids by descending cosine similarity to `query` (ties by ascending
/// id), leaving out `exclude`.
pub fn rank(query: &FeatureVector, index: &RetrievalIndex, exclude: Option<&str>) -> Result<Vec<(String, f64)>> {
    if query.len() != index.dim {
        return Err(Error::contract(format!(
            "query has {} dims, {} index has {}",
            query.len(),
            index.mode.name(),
            index.dim
        )));
    }
    let mut out: Vec<(String, f64)> = index
        .entries
        .iter()
        .filter(|e| Some(e.id.as_str()) != exclude)
        .map(|e| (e.id.clone(), query.cosine(&e.vector)))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub mode: Mode,
    pub map: f64,
    pub per_class: BTreeMap<u32, f64>,
    pub queries: usize,
    /// Queries without any other image of their class.
    pub skipped: usize,
    pub fallbacks: usize,
}

impl RetrievalReport {
    /// Per-class AP table framed by `#` header and footer lines.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# mode\t{}\n# queries\t{}\n# skipped\t{}\n# fallbacks\t{}\nclass\tap\n",
            self.mode.name(),
            self.queries,
            self.skipped,
            self.fallbacks
        );
        for (c, ap) in &self.per_class {
            out.push_str(&format!("{c}\t{ap:.12}\n"));
        }
        out.push_str(&format!("# map\t{:.12}\n", self.map));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, m: &str| Error::contract(format!("retrieval report line {}: {m}", line + 1));
        let (mut mode, mut map) = (None, None);
        let mut report = RetrievalReport {
            mode: Mode::Full,
            map: 0.0,
            per_class: BTreeMap::new(),
            queries: 0,
            skipped: 0,
            fallbacks: 0,
        };
        for (ln, line) in text.lines().enumerate() {
            let count = |v: &str| v.parse::<usize>().map_err(|_| bad(ln, "bad count"));
            match line.split('\t').collect::<Vec<_>>()[..] {
                ["# mode", m] => mode = Some(Mode::parse(m)?),
                ["# queries", v] => report.queries = count(v)?,
                ["# skipped", v] => report.skipped = count(v)?,
                ["# fallbacks", v] => report.fallbacks = count(v)?,
                ["# map", v] => map = Some(v.parse::<f64>().map_err(|_| bad(ln, "bad map"))?),
                ["class", "ap"] | [""] => {}
                [c, ap] => {
                    let c = c.parse::<u32>().map_err(|_| bad(ln, "bad class"))?;
                    report.per_class.insert(c, ap.parse().map_err(|_| bad(ln, "bad ap"))?);
                }
                _ => return Err(bad(ln, "unrecognized record")),
            }
        }
        report.mode = mode.ok_or_else(|| Error::contract("retrieval report has no mode header"))?;
        report.map = map.ok_or_else(|| Error::contract("retrieval report has no map footer"))?;
        Ok(report)
    }
}

/// Leave-one-out evaluation: every labeled entry queries all others;
/// relevant means same class.
pub fn evaluate_index(index: &RetrievalIndex) -> Result<RetrievalReport> {
    let mut by_class: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut skipped = 0;
    for q in &index.entries {
        let Some(class) = q.class else {
            skipped += 1;
            continue;
        };
        let ranked = rank(&q.vector, index, Some(&q.id))?;
        let relevance: Vec<bool> = ranked
            .iter()
            .map(|(id, _)| index.entries.iter().find(|e| &e.id == id).and_then(|e| e.class) == Some(class))
            .collect();
        match average_precision(&relevance) {
            Ok(ap) => by_class.entry(class).or_default().push(ap),
            Err(Error::NoRelevantItems) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let all: Vec<f64> = by_class.values().flatten().copied().collect();
    Ok(RetrievalReport {
        mode: index.mode,
        map: if all.is_empty() { 0.0 } else { mean_ap(&all)? },
        per_class: by_class
            .iter()
            .map(|(&c, aps)| (c, aps.iter().sum::<f64>() / aps.len() as f64))
            .collect(),
        queries: all.len(),
        skipped,
        fallbacks: index.fallbacks,
    })
}

/// Labeled images to index, one per mode.
pub fn build_indexes<'a>(
    representer: &Representer,
    items: impl IntoIterator<Item = (&'a str, &'a RgbImage, Option<u32>)>,
) -> Result<BTreeMap<Mode, RetrievalIndex>> {
    let dim = representer.features.dim();
    let mut out: BTreeMap<Mode, RetrievalIndex> = BTreeMap::from([
        (Mode::Full, RetrievalIndex::new(Mode::Full, dim)),
        (Mode::Fg, RetrievalIndex::new(Mode::Fg, dim)),
        (Mode::Ff, RetrievalIndex::new(Mode::Ff, 2 * dim)),
    ]);
    for (id, image, class) in items {
        for (mode, r) in representer.represent_all(image)? {
            let index = out.get_mut(&mode).expect("all modes present");
            index.fallbacks += r.fallback as usize;
            index.insert(IndexEntry {
                id: id.to_string(),
                class,
                vector: r.vector,
            })?;
        }
    }
    Ok(out)
}

/// Builds the index of one mode for `items` and evaluates it.
pub fn evaluate_retrieval<'a>(
    representer: &Representer,
    items: impl IntoIterator<Item = (&'a str, &'a RgbImage, Option<u32>)>,
    mode: Mode,
) -> Result<RetrievalReport> {
    let mut indexes = build_indexes(representer, items)?;
    evaluate_index(&indexes.remove(&mode).expect("all modes present"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::normalized(v.to_vec())
    }

    fn index(vs: &[(&str, &[f64], Option<u32>)]) -> RetrievalIndex {
        let mut idx = RetrievalIndex::new(Mode::Full, vs[0].1.len());
        for (id, v, c) in vs {
            idx.insert(IndexEntry {
                id: id.to_string(),
                class: *c,
                vector: fv(v),
            })
            .unwrap();
        }
        idx
    }

    #[test]
    fn normalization_and_concat() {
        let a = fv(&[3.0, 4.0]);
        assert!((a.cosine(&a) - 1.0).abs() < 1e-6);
        let ff = a.concat(&fv(&[0.0, 1.0]));
        assert_eq!(ff.len(), 4);
        assert!((ff.cosine(&ff) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rank_hand_built_index() {
        let idx = index(&[
            ("a", &[1.0, 0.0, 0.0], None),
            ("b", &[0.0, 1.0, 0.0], None),
            ("c", &[1.0, 1.0, 0.0], None),
            ("d", &[1.0, 2.0, 0.0], None),
            ("e", &[0.0, 0.0, 1.0], None),
        ]);
        // Similarities to (2, 1, 0)/sqrt 5: a .894, b .447, c .949, d .8, e 0.
        let r: Vec<String> = rank(&fv(&[2.0, 1.0, 0.0]), &idx, None).unwrap().into_iter().map(|p| p.0).collect();
        assert_eq!(r, ["c", "a", "d", "b", "e"]);
        let r: Vec<String> = rank(&fv(&[0.0, 0.0, 1.0]), &idx, Some("e")).unwrap().into_iter().map(|p| p.0).collect();
        assert_eq!(r, ["a", "b", "c", "d"]);
        assert!(rank(&fv(&[1.0, 0.0]), &idx, None).is_err());
    }

    #[test]
    fn perfect_classes_give_unit_map() {
        let idx = index(&[
            ("0", &[1.0, 0.0], Some(0)),
            ("1", &[1.0, 0.1], Some(0)),
            ("2", &[0.0, 1.0], Some(1)),
            ("3", &[0.1, 1.0], Some(1)),
            ("4", &[0.5, 0.5], Some(2)),
        ]);
        let r = evaluate_index(&idx).unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!(r.queries, 4);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.per_class.len(), 2);
    }

    #[test]
    fn index_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut idx = index(&[("x", &[1.0, 2.0], Some(3)), ("yy", &[2.0, -1.0], None)]);
        idx.fallbacks = 1;
        idx.save(dir.path()).unwrap();
        assert_eq!(RetrievalIndex::load(dir.path()).unwrap(), idx);
        let rec = dir.path().join(INDEX_RECORDS);
        let bytes = fs::read(&rec).unwrap();
        fs::write(&rec, &bytes[..bytes.len() - 3]).unwrap();
        assert!(RetrievalIndex::load(dir.path()).is_err());
    }

    #[test]
    fn report_text_round_trip() {
        let idx = index(&[("a", &[1.0, 0.0], Some(0)), ("b", &[0.9, 0.1], Some(0)), ("c", &[0.0, 1.0], Some(1)), ("d", &[0.5, 0.5], Some(1))]);
        let r = evaluate_index(&idx).unwrap();
        let text = r.to_text();
        let back = RetrievalReport::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.per_class.len(), 2);
        assert!((back.map - r.map).abs() < 1e-12);
    }
}
