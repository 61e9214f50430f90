//! Three-class confusion matrices, macro precision/recall and one-vs-rest ROC.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const NUM_CLASSES: usize = 3;

/// Rows are truth, columns are predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

fn check_labels(labels: &[usize]) -> Result<()> {
    match labels.iter().find(|&&l| l >= NUM_CLASSES) {
        Some(l) => Err(Error::Argument(format!("label {l} outside {{0, 1, 2}}"))),
        None => Ok(()),
    }
}

pub fn confusion(preds: &[usize], truth: &[usize]) -> Result<ConfusionMatrix> {
    if preds.is_empty() || preds.len() != truth.len() {
        return Err(Error::Argument(format!(
            "confusion needs equal, non-empty prediction and truth lists ({} vs {})",
            preds.len(),
            truth.len()
        )));
    }
    check_labels(preds)?;
    check_labels(truth)?;
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in preds.iter().zip(truth) {
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total();
    if total == 0 {
        return 0.0;
    }
    (0..NUM_CLASSES).map(|c| cm.counts[c][c]).sum::<u64>() as f64 / total as f64
}

/// Per-class `(precision, recall)`; `None` where the class is excluded.
///
/// Recall is defined only for classes with truth support. Precision is
/// defined for classes that were predicted or have support; a supported
/// class that was never predicted scores 0.
pub fn per_class_pr(cm: &ConfusionMatrix) -> [(Option<f64>, Option<f64>); NUM_CLASSES] {
    std::array::from_fn(|c| {
        let tp = cm.counts[c][c] as f64;
        let support = cm.support(c);
        let predicted = cm.predicted(c);
        let precision = if predicted > 0 {
            Some(tp / predicted as f64)
        } else if support > 0 {
            Some(0.0)
        } else {
            None
        };
        let recall = (support > 0).then(|| tp / support as f64);
        (precision, recall)
    })
}

/// Macro-averaged `(precision, recall)` over the included classes.
pub fn macro_pr(cm: &ConfusionMatrix) -> (f64, f64) {
    let per = per_class_pr(cm);
    let mean = |vals: Vec<f64>| {
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    (
        mean(per.iter().filter_map(|p| p.0).collect()),
        mean(per.iter().filter_map(|p| p.1).collect()),
    )
}

/// One-vs-rest ROC for a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, non-decreasing in both.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn roc_for_class(scores: &[f64], positive: &[bool]) -> Option<RocCurve> {
    let n_pos = positive.iter().filter(|&&p| p).count() as u64;
    let n_neg = positive.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the trapezoid area in units of one (positive, negative) pair.
    let mut area2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) * (tp + tp0);
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Some(RocCurve {
        points,
        auc: area2 as f64 / (2 * n_pos * n_neg) as f64,
    })
}

/// Per-class one-vs-rest ROC over softmax scores. A class without both
/// positives and negatives yields `None`.
pub fn roc_auc_ovr(scores: &[[f64; NUM_CLASSES]], truth: &[usize]) -> Result<[Option<RocCurve>; NUM_CLASSES]> {
    if scores.len() != truth.len() {
        return Err(Error::Argument(format!(
            "roc needs one score row per label ({} vs {})",
            scores.len(),
            truth.len()
        )));
    }
    check_labels(truth)?;
    if scores.iter().flatten().any(|s| !s.is_finite()) {
        return Err(Error::Argument("roc scores must be finite".into()));
    }
    Ok(std::array::from_fn(|c| {
        let col: Vec<f64> = scores.iter().map(|row| row[c]).collect();
        let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        roc_for_class(&col, &pos)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: [[u64; 3]; 3]) -> ConfusionMatrix {
        ConfusionMatrix { counts: rows }
    }

    #[test]
    fn perfect_predictions() {
        let c = confusion(&[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        assert_eq!(accuracy(&c), 1.0);
        assert_eq!(macro_pr(&c), (1.0, 1.0));
    }

    #[test]
    fn worked_macro_example() {
        let c = cm([[5, 0, 0], [0, 4, 1], [0, 2, 3]]);
        let (p, r) = macro_pr(&c);
        assert!((r - 0.8).abs() < 1e-15);
        assert!((p - (1.0 + 4.0 / 6.0 + 0.75) / 3.0).abs() < 1e-15);
        assert!((accuracy(&c) - 12.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn zero_support_class_is_excluded_from_recall() {
        // Class 2 never occurs in truth and is never predicted.
        let c = cm([[3, 1, 0], [0, 4, 0], [0, 0, 0]]);
        let per = per_class_pr(&c);
        assert_eq!(per[2], (None, None));
        let (p, r) = macro_pr(&c);
        assert!((r - (0.75 + 1.0) / 2.0).abs() < 1e-15);
        assert!((p - (1.0 + 0.8) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn never_predicted_class_scores_zero_precision() {
        let c = cm([[2, 0, 0], [0, 2, 0], [0, 2, 0]]);
        assert_eq!(per_class_pr(&c)[2], (Some(0.0), Some(0.0)));
    }

    #[test]
    fn permuting_labels_keeps_macro() {
        let c = cm([[5, 1, 0], [2, 4, 1], [0, 2, 3]]);
        let perm = [2, 0, 1];
        let mut p = ConfusionMatrix::default();
        for t in 0..3 {
            for q in 0..3 {
                p.counts[perm[t]][perm[q]] = c.counts[t][q];
            }
        }
        let (a, b) = (macro_pr(&c), macro_pr(&p));
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn confusion_errors() {
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[0, 3], &[0, 1]).is_err());
        assert!(confusion(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn separable_and_chance_auc() {
        let scores = [[0.9, 0.05, 0.05], [0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]];
        let rocs = roc_auc_ovr(&scores, &[0, 0, 1, 2]).unwrap();
        assert!(rocs.iter().all(|r| r.as_ref().unwrap().auc == 1.0));

        let flat = [[1.0 / 3.0; 3]; 4];
        let rocs = roc_auc_ovr(&flat, &[0, 1, 2, 0]).unwrap();
        assert!(rocs.iter().all(|r| r.as_ref().unwrap().auc == 0.5));
    }

    #[test]
    fn absent_class_has_no_curve() {
        let scores = [[0.6, 0.3, 0.1], [0.2, 0.7, 0.1]];
        let rocs = roc_auc_ovr(&scores, &[0, 1]).unwrap();
        assert!(rocs[2].is_none());
    }

    #[test]
    fn curve_is_monotone() {
        let scores: Vec<[f64; 3]> = (0..20)
            .map(|i| {
                let a = ((i * 37) % 11) as f64 / 10.0;
                [a, 1.0 - a, 0.0]
            })
            .collect();
        let truth: Vec<usize> = (0..20).map(|i| i % 3).collect();
        for roc in roc_auc_ovr(&scores, &truth).unwrap().into_iter().flatten() {
            assert!(roc.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
            assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
            assert!((0.0..=1.0).contains(&roc.auc));
        }
    }
}
