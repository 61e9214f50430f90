//! Corner-aligned bilinear resampling and square foreground cropping.

use super::Slice2D;
use crate::metrics::otsu;

/// Input coordinate sampled by output index `i`.
fn source_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    if n_out == 1 {
        (n_in as f64 - 1.0) / 2.0
    } else {
        i as f64 * (n_in as f64 - 1.0) / (n_out as f64 - 1.0)
    }
}

/// Split a coordinate into `(lower index, upper index, fraction)`.
fn taps(coord: f64, n: usize) -> (usize, usize, f32) {
    let lo = (coord.floor() as usize).min(n - 1);
    let frac = (coord - lo as f64) as f32;
    let hi = (lo + 1).min(n - 1);
    (lo, hi, frac)
}

/// Bilinear resample with corner alignment: output index `i` reads input
/// coordinate `i * (in - 1) / (out - 1)`; a size-1 axis samples the center.
/// Output values are clamped to the input range.
pub fn resample_bilinear(slice: &Slice2D, out_h: usize, out_w: usize) -> Slice2D {
    let (h, w) = slice.dims();
    let out_h = out_h.max(1);
    let out_w = out_w.max(1);
    if (out_h, out_w) == (h, w) {
        return slice.clone();
    }
    let (lo, hi) = slice.min_max();
    let cols: Vec<_> = (0..out_w).map(|j| taps(source_coord(j, w, out_w), w)).collect();
    let mut data = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let (r0, r1, fr) = taps(source_coord(i, h, out_h), h);
        for &(c0, c1, fc) in &cols {
            let v = lerp(
                lerp(slice.get(r0, c0), slice.get(r0, c1), fc),
                lerp(slice.get(r1, c0), slice.get(r1, c1), fc),
                fr,
            );
            data.push(v.clamp(lo, hi));
        }
    }
    Slice2D::new(out_h, out_w, data).expect("output dims are positive")
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// Result of [`crop_to_foreground_square`].
#[derive(Debug, Clone, PartialEq)]
pub struct CropResult {
    pub slice: Slice2D,
    /// `(row0, col0, side)` of the square cut from the input.
    pub window: (usize, usize, usize),
    /// Set when no pixel exceeded the foreground threshold.
    pub no_foreground: bool,
}

/// Crop the Otsu foreground's bounding box, grown to a centered square and
/// clamped to the image, then resample it to `out_size` squared.
///
/// A constant slice has no Otsu threshold; it counts as all foreground when
/// positive and as empty otherwise.
pub fn crop_to_foreground_square(slice: &Slice2D, out_size: usize) -> CropResult {
    let (h, w) = slice.dims();
    let out_size = out_size.max(2);
    let values: Vec<f64> = slice.data().iter().map(|&v| v as f64).collect();
    let fit = otsu(&values, 1).ok();
    let is_foreground = |v: f32| match &fit {
        Some(f) => f.class_of(v as f64) == 1,
        None => v > 0.0,
    };

    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for r in 0..h {
        for c in 0..w {
            if is_foreground(slice.get(r, c)) {
                bbox = Some(match bbox {
                    None => (r, r, c, c),
                    Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
                });
            }
        }
    }
    let Some((r0, r1, c0, c1)) = bbox else {
        let side = h.min(w);
        return CropResult {
            slice: resample_bilinear(slice, out_size, out_size),
            window: (0, 0, side),
            no_foreground: true,
        };
    };

    let side = (r1 - r0 + 1).max(c1 - c0 + 1).min(h).min(w);
    let place = |lo: usize, hi: usize, n: usize| -> usize {
        // Center the square on the box, then clamp it inside [0, n).
        let center2 = lo + hi; // twice the center
        let start = (center2 + 1).saturating_sub(side) / 2;
        start.min(n - side)
    };
    let row0 = place(r0, r1, h);
    let col0 = place(c0, c1, w);
    let mut data = Vec::with_capacity(side * side);
    for r in row0..row0 + side {
        data.extend_from_slice(&slice.data()[r * w + col0..r * w + col0 + side]);
    }
    let cropped = Slice2D::new(side, side, data).expect("side is positive");
    CropResult {
        slice: resample_bilinear(&cropped, out_size, out_size),
        window: (row0, col0, side),
        no_foreground: false,
    }
}
