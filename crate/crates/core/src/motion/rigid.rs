use super::RigidPose;
use crate::volume::Volume3D;

type Mat3 = [[f64; 3]; 3];

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// `Rz * Ry * Rx` for angles in degrees.
pub fn rotation_matrix(rot_deg: [f64; 3]) -> Mat3 {
    let [ax, ay, az] = rot_deg.map(f64::to_radians);
    let (sx, cx) = ax.sin_cos();
    let (sy, cy) = ay.sin_cos();
    let (sz, cz) = az.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    matmul(&rz, &matmul(&ry, &rx))
}

/// Resample `vol` after the rigid motion `pose`.
///
/// The forward map rotates about the voxel-grid center and then translates
/// by `trans / spacing` voxels; each output voxel pulls from the inverse
/// image with trilinear interpolation, reading zeros outside the grid.
pub fn apply_rigid(vol: &Volume3D, pose: &RigidPose) -> Volume3D {
    if pose.is_identity() {
        return vol.clone();
    }
    let [nx, ny, nz] = vol.dims();
    let spacing = vol.spacing();
    let r = rotation_matrix(pose.rot);
    // Inverse rotation is the transpose.
    let inv: Mat3 = std::array::from_fn(|i| std::array::from_fn(|j| r[j][i]));
    let center = [nx, ny, nz].map(|n| (n as f64 - 1.0) / 2.0);
    let shift: [f64; 3] = std::array::from_fn(|i| pose.trans[i] / spacing[i]);

    let src = vol.data();
    let sample = |q: [f64; 3]| -> f32 {
        let fx = q[0].floor();
        let fy = q[1].floor();
        let fz = q[2].floor();
        let (tx, ty, tz) = (q[0] - fx, q[1] - fy, q[2] - fz);
        let (x0, y0, z0) = (fx as i64, fy as i64, fz as i64);
        if x0 < -1 || y0 < -1 || z0 < -1 || x0 >= nx as i64 || y0 >= ny as i64 || z0 >= nz as i64 {
            return 0.0;
        }
        let at = |x: i64, y: i64, z: i64| -> f64 {
            if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
                0.0
            } else {
                src[x as usize + nx * (y as usize + ny * z as usize)] as f64
            }
        };
        let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
        let c00 = lerp(at(x0, y0, z0), at(x0 + 1, y0, z0), tx);
        let c10 = lerp(at(x0, y0 + 1, z0), at(x0 + 1, y0 + 1, z0), tx);
        let c01 = lerp(at(x0, y0, z0 + 1), at(x0 + 1, y0, z0 + 1), tx);
        let c11 = lerp(at(x0, y0 + 1, z0 + 1), at(x0 + 1, y0 + 1, z0 + 1), tx);
        lerp(lerp(c00, c10, ty), lerp(c01, c11, ty), tz) as f32
    };

    let mut out = Vec::with_capacity(vol.len());
    for z in 0..nz {
        for y in 0..ny {
            let d = [
                -center[0] - shift[0],
                y as f64 - center[1] - shift[1],
                z as f64 - center[2] - shift[2],
            ];
            // Source coordinate at x = 0 and its per-x increment.
            let base: [f64; 3] =
                std::array::from_fn(|i| inv[i][0] * d[0] + inv[i][1] * d[1] + inv[i][2] * d[2] + center[i]);
            let step = [inv[0][0], inv[1][0], inv[2][0]];
            for x in 0..nx {
                let xf = x as f64;
                out.push(sample([
                    base[0] + step[0] * xf,
                    base[1] + step[1] * xf,
                    base[2] + step[2] * xf,
                ]));
            }
        }
    }
    vol.with_data(out).expect("geometry unchanged")
}
