use super::classification::ConfusionMatrix;
use serde::{Deserialize, Serialize};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One-vs-rest AUC per class; `null` when a class lacks positives or negatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AucByClass {
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl AucByClass {
    pub fn from_array(a: [Option<f64>; 3]) -> Self {
        Self {
            c0: a[0],
            c1: a[1],
            c2: a[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSummary {
    pub id: String,
    /// Fraction of slices predicted as each class.
    pub pct: [f64; 3],
    pub majority: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub auc: AucByClass,
    pub confusion: ConfusionMatrix,
    pub spearman_rho: Option<f64>,
    pub kappa: Option<f64>,
    pub per_volume: Vec<VolumeSummary>,
}
