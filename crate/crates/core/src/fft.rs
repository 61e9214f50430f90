//! Separable 3D DFT over volumes of any size.
//!
//! One-dimensional transforms come from `rustfft`, which handles arbitrary
//! lengths (mixed radix, Rader and Bluestein). The forward transform is
//! unnormalized; the inverse scales by `1/N`.

use crate::volume::Volume3D;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::sync::Arc;

/// Complex volume sharing the x-fastest layout of [`Volume3D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVolume {
    pub dims: [usize; 3],
    pub data: Vec<Complex64>,
}

impl ComplexVolume {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Stride of `axis` in the flat buffer.
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }
}

/// Cached 1D plans for one volume geometry.
pub struct Fft3 {
    dims: [usize; 3],
    plans: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims,
            plans: dims.map(|n| planner.plan_fft(n, FftDirection::Forward)),
            inverse: dims.map(|n| planner.plan_fft(n, FftDirection::Inverse)),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn forward(&self, vol: &Volume3D) -> ComplexVolume {
        assert_eq!(vol.dims(), self.dims, "plan built for other dims");
        let mut k = ComplexVolume {
            dims: self.dims,
            data: vol.data().iter().map(|&v| Complex64::new(v as f64, 0.0)).collect(),
        };
        self.transform(&mut k, &self.plans);
        k
    }

    pub fn forward_complex(&self, k: &mut ComplexVolume) {
        assert_eq!(k.dims, self.dims, "plan built for other dims");
        self.transform(k, &self.plans);
    }

    pub fn inverse(&self, k: &mut ComplexVolume) {
        assert_eq!(k.dims, self.dims, "plan built for other dims");
        self.transform(k, &self.inverse);
        let scale = 1.0 / k.len() as f64;
        k.data.iter_mut().for_each(|c| *c *= scale);
    }

    fn transform(&self, k: &mut ComplexVolume, plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.dims;
        let scratch_len = plans.iter().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0);
        let mut scratch = vec![Complex64::default(); scratch_len];

        // x lines are contiguous; rustfft walks the buffer line by line.
        plans[0].process_with_scratch(&mut k.data, &mut scratch);

        // For y and z, gather the nx lines sharing an outer index into one
        // line-major block so every transform runs on contiguous memory.
        let mut block = vec![Complex64::default(); nx * ny.max(nz)];
        for axis in 1..3 {
            let n = self.dims[axis];
            if n == 1 {
                continue;
            }
            let stride = k.stride(axis);
            let (outer, outer_stride) = if axis == 1 { (nz, nx * ny) } else { (ny, nx) };
            let block = &mut block[..nx * n];
            for o in 0..outer {
                let base = o * outer_stride;
                for i in 0..n {
                    let row = &k.data[base + i * stride..base + i * stride + nx];
                    for (x, &c) in row.iter().enumerate() {
                        block[x * n + i] = c;
                    }
                }
                plans[axis].process_with_scratch(block, &mut scratch);
                for i in 0..n {
                    let row = &mut k.data[base + i * stride..base + i * stride + nx];
                    for (x, c) in row.iter_mut().enumerate() {
                        *c = block[x * n + i];
                    }
                }
            }
        }
    }
}

pub fn fftn(vol: &Volume3D) -> ComplexVolume {
    Fft3::new(vol.dims()).forward(vol)
}

pub fn ifftn(k: &ComplexVolume) -> ComplexVolume {
    let mut out = k.clone();
    Fft3::new(k.dims).inverse(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_volume(dims: [usize; 3], seed: u64) -> Volume3D {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = dims.iter().product();
        Volume3D::new(dims, [1.0; 3], (0..n).map(|_| rng.gen::<f32>()).collect()).unwrap()
    }

    /// O(N^2) DFT used as the reference.
    fn naive_dft(vol: &Volume3D) -> Vec<Complex64> {
        let [nx, ny, nz] = vol.dims();
        let mut out = vec![Complex64::default(); vol.len()];
        for (kz, ky, kx) in (0..nz).flat_map(|z| (0..ny).flat_map(move |y| (0..nx).map(move |x| (z, y, x)))) {
            let mut acc = Complex64::default();
            for z in 0..nz {
                for y in 0..ny {
                    for x in 0..nx {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((kx * x) as f64 / nx as f64
                                + (ky * y) as f64 / ny as f64
                                + (kz * z) as f64 / nz as f64);
                        acc += Complex64::from_polar(vol.get(x, y, z) as f64, phase);
                    }
                }
            }
            out[kx + nx * (ky + ny * kz)] = acc;
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_odd_dims() {
        let v = random_volume([5, 3, 7], 1);
        let k = fftn(&v);
        for (a, b) in k.data.iter().zip(naive_dft(&v)) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn constant_volume_is_dc_only() {
        let dims = [6, 10, 9];
        let n = 540.0;
        let v = Volume3D::new(dims, [1.0; 3], vec![0.25; 540]).unwrap();
        let k = fftn(&v);
        assert!((k.data[0] - Complex64::new(0.25 * n, 0.0)).norm() < 1e-6 * n);
        assert!(k.data[1..].iter().all(|c| c.norm() < 1e-6 * n));
    }

    #[test]
    fn round_trip_and_parseval() {
        let v = random_volume([12, 9, 14], 2);
        let k = fftn(&v);
        let back = ifftn(&k);
        let err = back
            .data
            .iter()
            .zip(v.data())
            .map(|(c, &x)| (c.re - x as f64).abs().max(c.im.abs()))
            .fold(0.0, f64::max);
        assert!(err < 1e-5);

        let energy: f64 = v.data().iter().map(|&x| (x as f64).powi(2)).sum();
        let spectral: f64 = k.data.iter().map(|c| c.norm_sqr()).sum::<f64>() / v.len() as f64;
        assert!(((energy - spectral) / energy).abs() < 1e-4);
    }

    #[test]
    fn singleton_axes() {
        let v = random_volume([8, 1, 1], 3);
        let back = ifftn(&fftn(&v));
        for (c, &x) in back.data.iter().zip(v.data()) {
            assert!((c.re - x as f64).abs() < 1e-12);
        }
    }
}
