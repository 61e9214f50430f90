use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::motion::MotionClass;
use crate::rng::{derive_seed, seeded, stream};
use crate::volume::{
    crop_to_foreground_square, extract_slices, normalize_intensity, resample_bilinear, Slice2D,
    Volume3D,
};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Argument(format!("split must be train, val or test, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Volume path, relative to the manifest's directory.
    pub path: String,
    pub subject: String,
    pub label: MotionClass,
    pub split: Split,
    /// Clean input the volume was synthesized from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Motion curve JSON for audit replay, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub pe_axis: usize,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(pe_axis: usize, entries: Vec<ManifestEntry>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            pe_axis,
            entries,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "manifest schema version {} is not supported",
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = (usize, &ManifestEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.in_split(split).count()
    }
}

/// Resolve a manifest-relative path.
pub fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Split `total / 5` units across classes: floor share per class, then one
/// extra each to the largest remainders (ties to the lower class).
fn fifth_quotas(sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let mut quota: Vec<usize> = sizes.iter().map(|&n| n / 5).collect();
    let mut extra = total / 5 - quota.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(sizes[c] % 5));
    for c in order {
        if extra == 0 {
            break;
        }
        if !sizes[c].is_multiple_of(5) {
            quota[c] += 1;
            extra -= 1;
        }
    }
    quota
}

/// Subject-wise, class-balanced train/val/test split.
///
/// A fifth of all subjects go to test and a fifth of the rest to val. Each
/// class contributes its floored share and the leftover units go to the
/// classes with the largest remainders, so 100 subjects always split
/// 64/16/20 regardless of how they divide across classes.
pub fn split_dataset(manifest: &DatasetManifest, seed: u64) -> Result<DatasetManifest> {
    let mut labels: BTreeMap<&str, MotionClass> = BTreeMap::new();
    for e in &manifest.entries {
        match labels.insert(&e.subject, e.label) {
            Some(prev) if prev != e.label => {
                return Err(Error::Argument(format!(
                    "subject {:?} carries labels {} and {}",
                    e.subject,
                    prev.index(),
                    e.label.index()
                )));
            }
            _ => {}
        }
    }
    let mut by_class: [Vec<&str>; 3] = Default::default();
    for (&s, &c) in &labels {
        by_class[c.index()].push(s);
    }
    for (c, subjects) in by_class.iter().enumerate() {
        if subjects.len() < 5 {
            return Err(Error::Argument(format!(
                "class {c} has {} subjects; at least 5 are needed to split",
                subjects.len()
            )));
        }
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let test = fifth_quotas(&sizes);
    let pool: Vec<usize> = sizes.iter().zip(&test).map(|(n, t)| n - t).collect();
    let val = fifth_quotas(&pool);

    let mut assigned: BTreeMap<&str, Split> = BTreeMap::new();
    for (c, subjects) in by_class.iter_mut().enumerate() {
        subjects.shuffle(&mut seeded(derive_seed(seed, stream::SPLIT, c as u64)));
        for (i, &s) in subjects.iter().enumerate() {
            let split = if i < test[c] {
                Split::Test
            } else if i < test[c] + val[c] {
                Split::Val
            } else {
                Split::Train
            };
            assigned.insert(s, split);
        }
    }
    let entries = manifest
        .entries
        .iter()
        .map(|e| ManifestEntry {
            split: assigned[e.subject.as_str()],
            ..e.clone()
        })
        .collect();
    Ok(DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        pe_axis: manifest.pe_axis,
        entries,
    })
}

/// How slices are taken from a volume and shaped for the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceOptions {
    pub axis: usize,
    /// Centered block size; `None` takes every slice.
    pub count: Option<usize>,
    pub crop: bool,
}

impl Default for SliceOptions {
    fn default() -> Self {
        Self {
            axis: 2,
            count: Some(14),
            crop: false,
        }
    }
}

/// Shape one slice for the network: optional foreground crop, then resample
/// to `size` squared. Input intensities are expected in `[0, 1]`.
pub fn prepare_slice(slice: &Slice2D, size: usize, crop: bool) -> Slice2D {
    if crop {
        crop_to_foreground_square(slice, size).slice
    } else {
        resample_bilinear(slice, size, size)
    }
}

/// Normalize a volume and return its prepared slices.
pub fn volume_slices(vol: &Volume3D, size: usize, opts: &SliceOptions) -> Result<Vec<Slice2D>> {
    let vol = normalize_intensity(vol);
    let n = *vol
        .dims()
        .get(opts.axis)
        .ok_or_else(|| Error::Argument(format!("slice axis must be 0, 1 or 2, got {}", opts.axis)))?;
    let count = opts.count.unwrap_or(n);
    Ok(extract_slices(&vol, opts.axis, count)?
        .iter()
        .map(|s| prepare_slice(s, size, opts.crop))
        .collect())
}

/// Prepared slices with labels, stored contiguously.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SliceSet {
    size: usize,
    pixels: Vec<f32>,
    labels: Vec<usize>,
    /// Index of the source volume for each slice.
    sources: Vec<usize>,
}

impl SliceSet {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            ..Self::default()
        }
    }

    pub fn push(&mut self, slice: &Slice2D, label: usize, source: usize) -> Result<()> {
        if slice.dims() != (self.size, self.size) {
            return Err(Error::Shape(format!(
                "slice is {:?}, set holds {}x{}",
                slice.dims(),
                self.size,
                self.size
            )));
        }
        self.pixels.extend_from_slice(slice.data());
        self.labels.push(label);
        self.sources.push(source);
        Ok(())
    }

    /// Load every volume of `split` from the manifest.
    pub fn from_manifest(
        manifest: &DatasetManifest,
        base: &Path,
        split: Split,
        size: usize,
        opts: &SliceOptions,
    ) -> Result<Self> {
        let mut set = Self::new(size);
        for (i, e) in manifest.in_split(split) {
            let vol = crate::volume::read_volume(resolve(base, &e.path))?;
            for s in volume_slices(&vol, size, opts)? {
                set.push(&s, e.label.index(), i)?;
            }
        }
        Ok(set)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn pixels(&self, i: usize) -> &[f32] {
        let n = self.size * self.size;
        &self.pixels[i * n..(i + 1) * n]
    }

    /// Gather the given slices into a `(k, size, size, 1)` batch.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor4<f32>> {
        let mut data = Vec::with_capacity(indices.len() * self.size * self.size);
        for &i in indices {
            data.extend_from_slice(self.pixels(i));
        }
        Tensor4::new([indices.len(), self.size, self.size, 1], data)
    }
}
