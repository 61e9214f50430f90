//! Average edge strength: mean Sobel magnitude over Otsu-selected edge pixels.

use super::otsu::otsu;
use crate::error::Result;
use crate::volume::Slice2D;

/// Sobel gradient magnitude with replicate-edge padding (unnormalized kernels).
pub fn sobel_magnitude(slice: &Slice2D) -> Vec<f64> {
    let (h, w) = slice.dims();
    let px = |r: isize, c: isize| -> f64 {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        slice.get(r, c) as f64
    };
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let gx = (px(r - 1, c + 1) + 2.0 * px(r, c + 1) + px(r + 1, c + 1))
                - (px(r - 1, c - 1) + 2.0 * px(r, c - 1) + px(r + 1, c - 1));
            let gy = (px(r + 1, c - 1) + 2.0 * px(r + 1, c) + px(r + 1, c + 1))
                - (px(r - 1, c - 1) + 2.0 * px(r - 1, c) + px(r - 1, c + 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Average edge strength of a `[0, 1]` slice. Edge pixels are those whose
/// gradient magnitude lies above the single Otsu threshold of the magnitude
/// histogram. Slices without gradient variation score 0.
pub fn aes(slice: &Slice2D) -> f64 {
    let g = sobel_magnitude(slice);
    let Ok(fit) = otsu(&g, 1) else {
        return 0.0;
    };
    let (sum, n) = g
        .iter()
        .filter(|&&v| fit.class_of(v) == 1)
        .fold((0.0, 0usize), |(s, n), &v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Bin AES values into motion classes with two Otsu thresholds. The
/// highest-AES bin is class 0 (sharpest), the lowest is class 2.
pub fn aes_to_classes(values: &[f64]) -> Result<Vec<usize>> {
    let fit = otsu(values, 2)?;
    Ok(values.iter().map(|&v| 2 - fit.class_of(v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn step(h: usize, w: usize, at: usize) -> Slice2D {
        let data = (0..h * w).map(|i| if i % w >= at { 1.0 } else { 0.0 }).collect();
        Slice2D::new(h, w, data).unwrap()
    }

    fn box_blur(s: &Slice2D) -> Slice2D {
        let (h, w) = s.dims();
        let mut out = vec![0.0f32; h * w];
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                        let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                        acc += s.get(rr, cc);
                    }
                }
                out[r * w + c] = acc / 9.0;
            }
        }
        Slice2D::new(h, w, out).unwrap()
    }

    #[test]
    fn constant_slice_is_zero() {
        assert_eq!(aes(&Slice2D::filled(8, 8, 0.3).unwrap()), 0.0);
    }

    #[test]
    fn vertical_step_scores_four() {
        // Columns 3 and 4 straddle the step; both see |gx| = 1 + 2 + 1.
        let s = step(8, 8, 4);
        let g = sobel_magnitude(&s);
        assert_eq!(g[3], 4.0);
        assert_eq!(g[4], 4.0);
        assert_eq!(g[2], 0.0);
        assert_eq!(aes(&s), 4.0);
    }

    #[test]
    fn blur_lowers_aes() {
        let s = step(16, 16, 7);
        let b = box_blur(&s);
        assert!(aes(&b) < aes(&s));
        assert!(aes(&box_blur(&b)) < aes(&b));
    }

    #[test]
    fn three_clusters_are_recovered() {
        let values = [1.0, 1.1, 0.9, 5.0, 5.2, 4.9, 9.0, 9.1, 8.8];
        assert_eq!(aes_to_classes(&values).unwrap(), vec![2, 2, 2, 1, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn constant_aes_list_is_degenerate() {
        assert!(matches!(aes_to_classes(&[2.0; 5]), Err(Error::Degenerate(_))));
    }
}
