use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::volume::Volume3D;
use rand::Rng;

pub const PHANTOM_MIN_DIM: usize = 32;

/// Voxels kept clear between the head and every face.
const MARGIN: f64 = 8.0;
const HEAD_INTENSITY: f32 = 0.6;
const NOISE: f32 = 0.05;

struct Ellipsoid {
    center: [f64; 3],
    axes: [f64; 3],
    /// Rotation about z, radians.
    angle: f64,
    value: f32,
}

impl Ellipsoid {
    fn contains(&self, p: [f64; 3]) -> bool {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        let (s, c) = self.angle.sin_cos();
        let u = c * d[0] + s * d[1];
        let v = -s * d[0] + c * d[1];
        (u / self.axes[0]).powi(2) + (v / self.axes[1]).powi(2) + (d[2] / self.axes[2]).powi(2) <= 1.0
    }
}

/// Synthetic head: dark noisy background, one large ellipsoid at ~0.6 with
/// `n_ellipsoids - 1` interior ellipsoids of intensity 0.2..1.0, smoothed
/// with a separable `[1/4, 1/2, 1/4]` kernel. Foreground stays at least 8
/// voxels from every face.
pub fn generate_phantom(dims: [usize; 3], n_ellipsoids: usize, seed: u64) -> Result<Volume3D> {
    if dims.iter().any(|&n| n < PHANTOM_MIN_DIM) {
        return Err(Error::Argument(format!(
            "phantom dims must be at least {PHANTOM_MIN_DIM} per axis, got {dims:?}"
        )));
    }
    if n_ellipsoids == 0 {
        return Err(Error::Argument("a phantom needs at least one ellipsoid".into()));
    }
    let mut rng = seeded(seed);
    let mid = dims.map(|n| (n as f64 - 1.0) / 2.0);
    // One voxel of slack for the smoothing spread, one for the center jitter.
    let room = mid.map(|m| m - MARGIN - 2.0);
    let head = Ellipsoid {
        center: std::array::from_fn(|i| mid[i] + rng.gen_range(-1.0..=1.0)),
        axes: std::array::from_fn(|i| room[i] * rng.gen_range(0.8..=1.0)),
        angle: 0.0,
        value: HEAD_INTENSITY,
    };
    let inner: Vec<Ellipsoid> = (1..n_ellipsoids)
        .map(|_| {
            let axes: [f64; 3] = std::array::from_fn(|i| head.axes[i] * rng.gen_range(0.12..0.35));
            // Keep the whole interior ellipsoid inside the head.
            let center = std::array::from_fn(|i| {
                let reach = (head.axes[i] * 0.55 - axes[i]).max(0.0);
                head.center[i] + rng.gen_range(-1.0..=1.0) * reach
            });
            Ellipsoid {
                center,
                axes,
                angle: rng.gen_range(0.0..std::f64::consts::PI),
                value: rng.gen_range(0.2..=1.0),
            }
        })
        .collect();

    let mut vol = Volume3D::zeros(dims)?;
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let p = [x as f64, y as f64, z as f64];
                let noise = rng.gen_range(0.0..NOISE);
                let v = if head.contains(p) {
                    inner
                        .iter()
                        .rev()
                        .find(|e| e.contains(p))
                        .map_or(head.value, |e| e.value)
                } else {
                    noise
                };
                vol.set(x, y, z, v);
            }
        }
    }
    for axis in 0..3 {
        smooth_axis(&mut vol, axis);
    }
    Ok(vol)
}

/// `[1/4, 1/2, 1/4]` along one axis with replicated edges.
fn smooth_axis(vol: &mut Volume3D, axis: usize) {
    let dims = vol.dims();
    let stride = [1, dims[0], dims[0] * dims[1]][axis];
    let n = dims[axis];
    let src = vol.data().to_vec();
    let out = vol.data_mut();
    for (i, o) in out.iter_mut().enumerate() {
        let k = (i / stride) % n;
        let prev = if k == 0 { src[i] } else { src[i - stride] };
        let next = if k + 1 == n { src[i] } else { src[i + stride] };
        *o = 0.25 * prev + 0.5 * src[i] + 0.25 * next;
    }
}
