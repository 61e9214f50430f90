//! Binary PGM/PPM writers for slices and Grad-CAM overlays.

use super::Slice2D;
use crate::error::{Error, Result};
use std::path::Path;

fn to_byte(v: f32) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// P5, maxval 255, `round(255 * v)`.
pub fn encode_pgm(slice: &Slice2D) -> Vec<u8> {
    let (h, w) = slice.dims();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(slice.data().iter().map(|&v| to_byte(v)));
    out
}

/// P6 overlay with a red "hot" tint proportional to `heat`.
pub fn encode_ppm_overlay(slice: &Slice2D, heat: &Slice2D) -> Result<Vec<u8>> {
    if slice.dims() != heat.dims() {
        return Err(Error::Argument(format!(
            "overlay heatmap {:?} does not match slice {:?}",
            heat.dims(),
            slice.dims()
        )));
    }
    let (h, w) = slice.dims();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for (&g, &q) in slice.data().iter().zip(heat.data()) {
        let g = g.clamp(0.0, 1.0);
        let q = q.clamp(0.0, 1.0);
        let red = to_byte(g + q);
        let other = to_byte(g * (1.0 - 0.5 * q));
        out.extend_from_slice(&[red, other, other]);
    }
    Ok(out)
}

pub fn write_pgm(slice: &Slice2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(slice)).map_err(|e| Error::io(path, e))
}

pub fn write_ppm_overlay(slice: &Slice2D, heat: &Slice2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ppm_overlay(slice, heat)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn payload(bytes: &[u8], header: &str) -> Vec<u8> {
        assert!(bytes.starts_with(header.as_bytes()));
        bytes[header.len()..].to_vec()
    }

    #[test]
    fn pgm_rounding() {
        let s = Slice2D::new(2, 2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        assert_eq!(payload(&encode_pgm(&s), "P5\n2 2\n255\n"), vec![0, 255, 128, 64]);
    }

    #[test]
    fn zero_heat_is_gray() {
        let s = Slice2D::new(1, 3, vec![0.1, 0.5, 0.9]).unwrap();
        let heat = Slice2D::filled(1, 3, 0.0).unwrap();
        let px = payload(&encode_ppm_overlay(&s, &heat).unwrap(), "P6\n3 1\n255\n");
        for rgb in px.chunks(3) {
            assert_eq!(rgb[0], rgb[1]);
            assert_eq!(rgb[1], rgb[2]);
        }
    }

    #[test]
    fn full_heat_saturates_red() {
        let s = Slice2D::new(1, 3, vec![0.0, 0.3, 1.0]).unwrap();
        let heat = Slice2D::filled(1, 3, 1.0).unwrap();
        let px = payload(&encode_ppm_overlay(&s, &heat).unwrap(), "P6\n3 1\n255\n");
        assert!(px.chunks(3).all(|rgb| rgb[0] == 255));
        assert_eq!(&px[3..6], &[255, 38, 38]);
    }

    #[test]
    fn overlay_dim_mismatch() {
        let s = Slice2D::filled(2, 2, 0.0).unwrap();
        let heat = Slice2D::filled(2, 3, 0.0).unwrap();
        assert!(matches!(encode_ppm_overlay(&s, &heat), Err(Error::Argument(_))));
    }
}
