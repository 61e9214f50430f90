use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::motion::{
    assign_balanced_classes, build_curve, sample_events_with, synthesize_motion, CurveFile,
    MotionClass,
};
use crate::nn::{resolve, split_dataset, DatasetManifest, ManifestEntry, Split};
use crate::rng::{derive_seed, stream};
use crate::volume::{normalize_intensity, read_volume, write_mrvol, Volume3D};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Volumes in `dir` (`.mrvol` and `.nii`), sorted by file name.
pub fn list_volumes(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if path.is_file() && matches!(ext, Some("mrvol") | Some("nii")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn read_labelled(path: &Path) -> Result<Volume3D> {
    read_volume(path).map_err(|e| match e {
        Error::Io { .. } => e,
        other => Error::Format(format!("{}: {other}", path.display())),
    })
}

/// Motion-corrupt a normalized volume for `class`. Class 0 is returned
/// unchanged with no curve; other classes are renormalized after synthesis.
pub fn synthesize_class(
    clean: &Volume3D,
    class: MotionClass,
    config: &RunConfig,
    seed: u64,
) -> Result<(Volume3D, Option<CurveFile>)> {
    if class == MotionClass::None {
        return Ok((clean.clone(), None));
    }
    let n = clean.dims()[config.pe_axis];
    let events = sample_events_with(&config.motion, class, n, seed)?;
    let curve = build_curve(&events, n, config.ramp_for(n))?;
    let moved = synthesize_motion(clean, &curve, config.pe_axis)?;
    Ok((normalize_intensity(&moved), Some(curve.to_file())))
}

/// Result of [`build_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub manifest: DatasetManifest,
    pub manifest_path: PathBuf,
}

/// Assign balanced classes to every volume in `src`, corrupt them, write
/// the volumes (and curve JSON for corrupted ones) next to the manifest,
/// split subject-wise and write the manifest.
pub fn build_dataset(src: &Path, manifest_path: &Path, config: &RunConfig) -> Result<DatasetBuild> {
    config.validate()?;
    let sources = list_volumes(src)?;
    if sources.len() < 15 {
        return Err(Error::Argument(format!(
            "{} holds {} volumes; at least 15 are needed",
            src.display(),
            sources.len()
        )));
    }
    let out_dir = manifest_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let src_abs = std::fs::canonicalize(src).map_err(|e| Error::io(src, e))?;

    let ids: Vec<String> = sources
        .iter()
        .map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let classes = assign_balanced_classes(&ids, derive_seed(config.seed, stream::CLASS_ASSIGNMENT, 0))?;

    let entries: Vec<ManifestEntry> = sources
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let id = &ids[i];
            let class = classes[id];
            let clean = normalize_intensity(&read_labelled(path)?);
            let seed = derive_seed(config.seed, stream::MOTION_EVENTS, i as u64);
            let (vol, curve) = synthesize_class(&clean, class, config, seed)?;
            let vol_name = format!("{id}.mrvol");
            write_mrvol(&vol, out_dir.join(&vol_name))?;
            let curve_name = match curve {
                Some(c) => {
                    let name = format!("{id}.curve.json");
                    c.write(out_dir.join(&name))?;
                    Some(name)
                }
                None => None,
            };
            let file_name = path.file_name().unwrap_or_default();
            Ok(ManifestEntry {
                path: vol_name,
                subject: id.clone(),
                label: class,
                split: Split::Train,
                source: Some(src_abs.join(file_name).to_string_lossy().into_owned()),
                curve: curve_name,
            })
        })
        .collect::<Result<_>>()?;

    let manifest = split_dataset(&DatasetManifest::new(config.pe_axis, entries), config.seed)?;
    manifest.write(manifest_path)?;
    Ok(DatasetBuild {
        manifest,
        manifest_path: manifest_path.to_path_buf(),
    })
}

/// Replay one manifest entry from its source and curve; true when the
/// result matches the stored volume bit for bit.
pub fn audit_entry(manifest: &DatasetManifest, base: &Path, index: usize) -> Result<bool> {
    let entry = manifest
        .entries
        .get(index)
        .ok_or_else(|| Error::Argument(format!("manifest has no entry {index}")))?;
    let source = entry
        .source
        .as_ref()
        .ok_or_else(|| Error::Argument(format!("entry {index} records no source volume")))?;
    let clean = normalize_intensity(&read_labelled(&resolve(base, source))?);
    let replayed = match &entry.curve {
        None => clean,
        Some(curve) => {
            let curve = CurveFile::read(resolve(base, curve))?.to_curve()?;
            normalize_intensity(&synthesize_motion(&clean, &curve, manifest.pe_axis)?)
        }
    };
    let stored = read_labelled(&resolve(base, &entry.path))?;
    Ok(stored.dims() == replayed.dims()
        && stored.spacing() == replayed.spacing()
        && stored
            .data()
            .iter()
            .zip(replayed.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()))
}
