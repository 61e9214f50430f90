use crate::error::{Error, Result};
use crate::gradcam::{gradcam_batch, heatmap_stats, HeatmapStats};
use crate::metrics::{
    accuracy, aes, aes_to_classes, cohens_kappa, confusion, macro_pr, roc_auc_ovr, spearman,
    AucByClass, EvalReport, VolumeSummary, REPORT_SCHEMA_VERSION,
};
use crate::nn::{
    predict_batch, resolve, tally, volume_slices, DatasetManifest, ModelParams, SliceOptions,
    Tensor4,
};
use crate::volume::{central_block_start, normalize_intensity, read_volume, slice_at, Volume3D};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const PREDICTION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    /// Position along the slice axis of the source volume.
    pub index: usize,
    pub class: usize,
    pub probs: [f64; 3],
    /// Grad-CAM of the predicted class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradcam: Option<HeatmapStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub id: String,
    pub pct: [f64; 3],
    pub majority: usize,
    pub slices: Vec<SliceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    pub schema_version: u32,
    pub slice_axis: usize,
    pub crop: bool,
    pub volumes: Vec<VolumeReport>,
}

impl PredictionFile {
    pub fn new(opts: &SliceOptions, volumes: Vec<VolumeReport>) -> Self {
        Self {
            schema_version: PREDICTION_SCHEMA_VERSION,
            slice_axis: opts.axis,
            crop: opts.crop,
            volumes,
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Self = serde_json::from_str(&text)?;
        if p.schema_version != PREDICTION_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "prediction schema version {} is not supported",
                p.schema_version
            )));
        }
        Ok(p)
    }
}

/// Classify every selected slice of `vol`, optionally with Grad-CAM
/// statistics for the predicted class of each slice.
pub fn infer_volume(
    params: &ModelParams<f32>,
    vol: &Volume3D,
    id: &str,
    opts: &SliceOptions,
    with_gradcam: bool,
) -> Result<VolumeReport> {
    let size = params.config().input_size;
    let slices = volume_slices(vol, size, opts)?;
    let mut data = Vec::with_capacity(slices.len() * size * size);
    for s in &slices {
        data.extend_from_slice(s.data());
    }
    let x = Tensor4::new([slices.len(), size, size, 1], data)?;
    let preds = predict_batch(params, &x)?;
    let cams = if with_gradcam {
        let classes: Vec<usize> = preds.iter().map(|p| p.class).collect();
        Some(gradcam_batch(params, &x, &classes)?)
    } else {
        None
    };
    let start = central_block_start(vol.dims()[opts.axis], slices.len());
    let (pct, majority) = tally(&preds);
    Ok(VolumeReport {
        id: id.to_string(),
        pct,
        majority,
        slices: preds
            .iter()
            .enumerate()
            .map(|(i, p)| SliceReport {
                index: start + i,
                class: p.class,
                probs: p.probs,
                gradcam: cams.as_ref().map(|c| heatmap_stats(&c[i])),
            })
            .collect(),
    })
}

/// Score predictions against manifest labels. Slice-level metrics use the
/// volume label for every slice; rank correlation and kappa compare the
/// predicted class with each slice's AES.
pub fn evaluate_predictions(pred: &PredictionFile, manifest: &DatasetManifest, base: &Path) -> Result<EvalReport> {
    let mut truth = Vec::new();
    let mut classes = Vec::new();
    let mut scores = Vec::new();
    let mut edge = Vec::new();
    let mut per_volume = Vec::with_capacity(pred.volumes.len());
    for v in &pred.volumes {
        let entry = manifest
            .entries
            .iter()
            .find(|e| e.path == v.id)
            .ok_or_else(|| Error::Argument(format!("volume {:?} is not in the manifest", v.id)))?;
        let vol = normalize_intensity(&read_volume(resolve(base, &entry.path))?);
        for s in &v.slices {
            if s.class > 2 {
                return Err(Error::Format(format!("predicted class {} out of range", s.class)));
            }
            truth.push(entry.label.index());
            classes.push(s.class);
            scores.push(s.probs);
            edge.push(aes(&slice_at(&vol, pred.slice_axis, s.index)?));
        }
        per_volume.push(VolumeSummary {
            id: v.id.clone(),
            pct: v.pct,
            majority: v.majority,
        });
    }
    if truth.is_empty() {
        return Err(Error::Argument("no slice predictions to evaluate".into()));
    }
    let cm = confusion(&classes, &truth)?;
    let (macro_precision, macro_recall) = macro_pr(&cm);
    let roc = roc_auc_ovr(&scores, &truth)?;
    let as_f64: Vec<f64> = classes.iter().map(|&c| c as f64).collect();
    let spearman_rho = spearman(&as_f64, &edge).ok().map(|s| s.rho);
    let kappa = aes_to_classes(&edge)
        .ok()
        .and_then(|aes_classes| cohens_kappa(&classes, &aes_classes).ok());
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        accuracy: accuracy(&cm),
        macro_precision,
        macro_recall,
        auc: AucByClass::from_array(roc.map(|r| r.map(|c| c.auc))),
        confusion: cm,
        spearman_rho,
        kappa,
        per_volume,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AesReport {
    pub schema_version: u32,
    pub slice_axis: usize,
    pub per_slice: Vec<f64>,
    pub mean: f64,
}

/// AES of every slice of the normalized volume along `axis`.
pub fn aes_report(vol: &Volume3D, axis: usize) -> Result<AesReport> {
    let vol = normalize_intensity(vol);
    let n = *vol
        .dims()
        .get(axis)
        .ok_or_else(|| Error::Argument(format!("slice axis must be 0, 1 or 2, got {axis}")))?;
    let per_slice = (0..n)
        .map(|k| Ok(aes(&slice_at(&vol, axis, k)?)))
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_slice.iter().sum::<f64>() / n as f64;
    Ok(AesReport {
        schema_version: REPORT_SCHEMA_VERSION,
        slice_axis: axis,
        per_slice,
        mean,
    })
}
