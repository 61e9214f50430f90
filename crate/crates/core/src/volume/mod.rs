//! Volume and slice containers plus the preprocessing applied before
//! synthesis and inference.

mod export;
mod mrvol;
mod nifti;
mod resample;

pub use export::{write_pgm, write_ppm_overlay, encode_pgm, encode_ppm_overlay};
pub use mrvol::{decode_mrvol, encode_mrvol, read_mrvol, write_mrvol};
pub use nifti::{parse_nifti, read_nifti, read_nifti_header, ByteOrder, DataType, VolumeHeader};
pub use resample::{crop_to_foreground_square, resample_bilinear, CropResult};

use crate::error::{Error, Result};
use std::path::Path;

/// Real-valued 3D image, x-fastest (`index = x + nx * (y + ny * z)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Shape(format!("volume dims must be positive, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Argument(format!(
                "voxel spacing must be positive and finite, got {spacing:?}"
            )));
        }
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::Shape(format!(
                "volume {dims:?} needs {n} voxels, got {}",
                data.len()
            )));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    /// Zero-filled volume with unit spacing.
    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, [1.0; 3], vec![0.0; n])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f32) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    /// Same geometry, new payload.
    pub fn with_data(&self, data: Vec<f32>) -> Result<Self> {
        Self::new(self.dims, self.spacing, data)
    }

    pub fn min_max(&self) -> (f32, f32) {
        min_max(&self.data)
    }
}

/// Real-valued 2D image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2D {
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl Slice2D {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::Shape(format!("slice dims must be positive, got {h}x{w}")));
        }
        if data.len() != h * w {
            return Err(Error::Shape(format!(
                "slice {h}x{w} needs {} pixels, got {}",
                h * w,
                data.len()
            )));
        }
        Ok(Self { h, w, data })
    }

    pub fn filled(h: usize, w: usize, value: f32) -> Result<Self> {
        Self::new(h, w, vec![value; h * w])
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.w + c]
    }

    pub fn min_max(&self) -> (f32, f32) {
        min_max(&self.data)
    }
}

pub(crate) fn min_max(data: &[f32]) -> (f32, f32) {
    data.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

/// Min-max rescale to `[0, 1]`. Constant volumes map to all zeros.
pub fn normalize_intensity(vol: &Volume3D) -> Volume3D {
    let mut out = vol.clone();
    normalize_in_place(&mut out.data);
    out
}

pub(crate) fn normalize_in_place(data: &mut [f32]) {
    let (lo, hi) = min_max(data);
    if !(hi > lo) {
        data.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let range = hi - lo;
    for v in data.iter_mut() {
        *v = ((*v - lo) / range).clamp(0.0, 1.0);
    }
}

/// First index of the centered block of `count` slices out of `n`.
pub fn central_block_start(n: usize, count: usize) -> usize {
    (n - count) / 2
}

/// `count` contiguous slices centered on the midpoint of `axis`.
///
/// The two remaining axes keep ascending order: the lower-numbered one
/// indexes rows, the higher-numbered one indexes columns.
pub fn extract_slices(vol: &Volume3D, axis: usize, count: usize) -> Result<Vec<Slice2D>> {
    if axis > 2 {
        return Err(Error::Argument(format!("slice axis must be 0, 1 or 2, got {axis}")));
    }
    let n = vol.dims[axis];
    if count == 0 || count > n {
        return Err(Error::Argument(format!(
            "slice count {count} out of range 1..={n} along axis {axis}"
        )));
    }
    let start = central_block_start(n, count);
    (start..start + count)
        .map(|k| slice_at(vol, axis, k))
        .collect()
}

/// Single slice at position `k` along `axis`.
pub fn slice_at(vol: &Volume3D, axis: usize, k: usize) -> Result<Slice2D> {
    let [nx, ny, nz] = vol.dims;
    if axis > 2 || k >= vol.dims[axis] {
        return Err(Error::Argument(format!(
            "slice {k} out of range along axis {axis} of {:?}",
            vol.dims
        )));
    }
    let data: Vec<f32> = match axis {
        0 => (0..ny)
            .flat_map(|y| (0..nz).map(move |z| (y, z)))
            .map(|(y, z)| vol.get(k, y, z))
            .collect(),
        1 => (0..nx)
            .flat_map(|x| (0..nz).map(move |z| (x, z)))
            .map(|(x, z)| vol.get(x, k, z))
            .collect(),
        _ => (0..nx)
            .flat_map(|x| (0..ny).map(move |y| (x, y)))
            .map(|(x, y)| vol.get(x, y, k))
            .collect(),
    };
    let (h, w) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    Slice2D::new(h, w, data)
}

/// Stack equally sized slices along axis 2 (inverse of [`slice_at`] on that axis).
pub fn stack_slices(slices: &[Slice2D], spacing: [f64; 3]) -> Result<Volume3D> {
    let first = slices
        .first()
        .ok_or_else(|| Error::Argument("cannot stack zero slices".into()))?;
    let (nx, ny) = first.dims();
    let mut vol = Volume3D::new([nx, ny, slices.len()], spacing, vec![0.0; nx * ny * slices.len()])?;
    for (z, s) in slices.iter().enumerate() {
        if s.dims() != (nx, ny) {
            return Err(Error::Shape(format!(
                "slice {z} is {:?}, expected {:?}",
                s.dims(),
                (nx, ny)
            )));
        }
        for x in 0..nx {
            for y in 0..ny {
                vol.set(x, y, z, s.get(x, y));
            }
        }
    }
    Ok(vol)
}

/// Read a volume by extension: `.nii` as NIfTI-1, anything else as MRVOL.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => read_nifti(path),
        _ => read_mrvol(path),
    }
}
