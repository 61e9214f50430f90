use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Spearman rank correlation with its large-sample t statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// `rho * sqrt((n - 2) / (1 - rho^2))`; absent when `|rho| = 1`.
    pub t: Option<f64>,
}

/// 1-based ranks, ties share the average of the ranks they span.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "spearman inputs differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Argument("spearman needs at least 3 pairs".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Argument("spearman inputs must be finite".into()));
    }
    let rho = pearson(&rank_average(x), &rank_average(y))
        .ok_or_else(|| Error::Degenerate("rank correlation of a constant sequence".into()))?;
    let n = x.len() as f64;
    let t = (rho.abs() < 1.0).then(|| rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt());
    Ok(Spearman { rho, t })
}

/// Unweighted Cohen's kappa for labels in `{0, 1, 2}`.
pub fn cohens_kappa(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Argument(format!(
            "kappa needs two non-empty label lists of equal length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if let Some(bad) = a.iter().chain(b).find(|&&l| l > 2) {
        return Err(Error::Argument(format!("label {bad} outside {{0, 1, 2}}")));
    }
    let n = a.len() as f64;
    let mut ca = [0u64; 3];
    let mut cb = [0u64; 3];
    let mut agree = 0u64;
    for (&x, &y) in a.iter().zip(b) {
        ca[x] += 1;
        cb[y] += 1;
        agree += u64::from(x == y);
    }
    let p_o = agree as f64 / n;
    let p_e = (0..3).map(|c| (ca[c] * cb[c]) as f64).sum::<f64>() / (n * n);
    if p_e >= 1.0 {
        return Err(Error::Degenerate(
            "chance agreement is 1; kappa is undefined".into(),
        ));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_and_antitone() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().rho, 1.0);
        let r = spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap();
        assert_eq!(r.rho, -1.0);
        assert_eq!(r.t, None);
    }

    #[test]
    fn tied_ranks() {
        assert_eq!(rank_average(&[1.0, 2.0, 2.0, 3.0]), vec![1.0, 2.5, 2.5, 4.0]);
        // cov = 4.5, var_x = 4.5, var_y = 5 over the rank vectors.
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r.rho - 4.5 / 22.5f64.sqrt()).abs() < 1e-12);
        let t = r.t.unwrap();
        assert!((t - r.rho * (2.0 / (1.0 - r.rho * r.rho)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(spearman(&[1.0; 3], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kappa_worked_examples() {
        assert_eq!(cohens_kappa(&[0, 1, 2, 1], &[0, 1, 2, 1]).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        assert_eq!(cohens_kappa(&[0, 1, 2, 0], &[0, 0, 0, 0]).unwrap(), 0.0);
        assert!(matches!(cohens_kappa(&[1, 1], &[1, 1]), Err(Error::Degenerate(_))));
        assert!(cohens_kappa(&[0, 3], &[0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn spearman_ignores_monotone_transforms(
            pairs in proptest::collection::vec((-100i32..100, -100i32..100), 3..40),
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            if let Ok(base) = spearman(&x, &y) {
                let fx: Vec<f64> = x.iter().map(|v| (v / 50.0).exp() + 3.0 * v).collect();
                let transformed = spearman(&fx, &y).unwrap();
                prop_assert!((base.rho - transformed.rho).abs() < 1e-12);
                prop_assert!(base.rho.abs() <= 1.0);
            }
        }

        #[test]
        fn kappa_is_symmetric(labels in proptest::collection::vec((0usize..3, 0usize..3), 1..50)) {
            let a: Vec<usize> = labels.iter().map(|p| p.0).collect();
            let b: Vec<usize> = labels.iter().map(|p| p.1).collect();
            match (cohens_kappa(&a, &b), cohens_kappa(&b, &a)) {
                (Ok(x), Ok(y)) => {
                    prop_assert!((x - y).abs() < 1e-12);
                    prop_assert!((-1.0..=1.0).contains(&x));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric failure"),
            }
            if a.iter().any(|&l| l != a[0]) {
                prop_assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
            }
        }
    }
}
