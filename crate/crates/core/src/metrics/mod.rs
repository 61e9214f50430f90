//! Evaluation statistics: AES, Otsu thresholding, Spearman and Cohen's
//! kappa, confusion matrices with macro precision/recall, and ROC/AUC.

mod aes;
mod classification;
mod otsu;
mod report;
mod stats;

pub use aes::{aes, aes_to_classes, sobel_magnitude};
pub use classification::{
    accuracy, confusion, macro_pr, per_class_pr, roc_auc_ovr, ConfusionMatrix, RocCurve,
    NUM_CLASSES,
};
pub use otsu::{otsu, otsu_thresholds, Histogram, Otsu, HIST_BINS};
pub use report::{AucByClass, EvalReport, VolumeSummary, REPORT_SCHEMA_VERSION};
pub use stats::{cohens_kappa, rank_average, spearman, Spearman};
