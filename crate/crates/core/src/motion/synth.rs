use super::{apply_rigid, MotionCurve};
use crate::error::{Error, Result};
use crate::fft::{ComplexVolume, Fft3};
use crate::volume::Volume3D;
use std::collections::BTreeMap;

/// Bookkeeping from one synthesis run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthesisStats {
    pub distinct_poses: usize,
    pub forward_ffts: usize,
}

/// Spectrum plane sampled by acquisition line `k`. Lines run through
/// k-space from the most negative frequency to the most positive, so the
/// zero-frequency plane is acquired at line `n / 2`.
pub fn line_to_plane(k: usize, n: usize) -> usize {
    (k + n.div_ceil(2)) % n
}

/// Flat indices of the plane at position `k` along `axis`.
fn plane_indices(dims: [usize; 3], axis: usize, k: usize) -> impl Iterator<Item = usize> {
    let [nx, ny, nz] = dims;
    let (a_len, b_len) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    (0..b_len).flat_map(move |b| {
        (0..a_len).map(move |a| match axis {
            0 => k + nx * (a + ny * b),
            1 => a + nx * (k + ny * b),
            _ => a + nx * (b + ny * k),
        })
    })
}

pub fn synthesize_motion(vol: &Volume3D, curve: &MotionCurve, pe_axis: usize) -> Result<Volume3D> {
    synthesize_motion_with_stats(vol, curve, pe_axis).map(|(v, _)| v)
}

/// Splice phase-encode planes from the spectra of rigidly moved copies.
///
/// Lines sharing a pose share one moved volume and one forward FFT. The
/// result is the magnitude of the inverse transform, clamped to `[0, 1]`.
pub fn synthesize_motion_with_stats(
    vol: &Volume3D,
    curve: &MotionCurve,
    pe_axis: usize,
) -> Result<(Volume3D, SynthesisStats)> {
    if pe_axis > 2 {
        return Err(Error::Argument(format!("phase-encode axis must be 0, 1 or 2, got {pe_axis}")));
    }
    let dims = vol.dims();
    if curve.len() != dims[pe_axis] {
        return Err(Error::Argument(format!(
            "curve has {} lines but axis {pe_axis} has {}",
            curve.len(),
            dims[pe_axis]
        )));
    }
    if let Some(k) = curve.poses.iter().position(|p| !p.is_finite()) {
        return Err(Error::Argument(format!("pose at line {k} is not finite")));
    }

    // Group lines by exact pose, in order of first appearance.
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut by_key = BTreeMap::new();
    for (k, pose) in curve.poses.iter().enumerate() {
        let g = *by_key.entry(pose.key()).or_insert_with(|| {
            groups.push((k, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(k);
    }

    let fft = Fft3::new(dims);
    let mut spliced = ComplexVolume {
        dims,
        data: vec![Default::default(); vol.len()],
    };
    for (first, lines) in &groups {
        let moved = apply_rigid(vol, &curve.poses[*first]);
        let spectrum = fft.forward(&moved);
        for &k in lines {
            for i in plane_indices(dims, pe_axis, line_to_plane(k, dims[pe_axis])) {
                spliced.data[i] = spectrum.data[i];
            }
        }
    }
    fft.inverse(&mut spliced);
    let out = spliced.data.iter().map(|c| (c.norm() as f32).clamp(0.0, 1.0)).collect();
    let stats = SynthesisStats {
        distinct_poses: groups.len(),
        forward_ffts: groups.len(),
    };
    Ok((vol.with_data(out)?, stats))
}
