//! MRVOL: a lossless little-endian float32 container with an ASCII header.
//!
//! ```text
//! MRVOL1
//! dims <nx> <ny> <nz>
//! spacing <sx> <sy> <sz>
//! data float32 le
//! <nx*ny*nz little-endian f32, x-fastest>
//! ```

use super::Volume3D;
use crate::error::{Error, Result};
use std::path::Path;

const MAGIC: &[u8] = b"MRVOL1\n";
const DATA_LINE: &str = "data float32 le";

pub fn encode_mrvol(vol: &Volume3D) -> Vec<u8> {
    let [nx, ny, nz] = vol.dims();
    let [sx, sy, sz] = vol.spacing();
    let mut out = Vec::with_capacity(64 + 4 * vol.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(format!("dims {nx} {ny} {nz}\n").as_bytes());
    out.extend_from_slice(format!("spacing {sx} {sy} {sz}\n").as_bytes());
    out.extend_from_slice(DATA_LINE.as_bytes());
    out.push(b'\n');
    for v in vol.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn next_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .take(256)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("MRVOL header line not terminated".into()))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| Error::Format("MRVOL header is not ASCII".into()))
}

fn triple<T: std::str::FromStr>(line: &str, key: &str) -> Result<[T; 3]> {
    let mut parts = line.split(' ');
    if parts.next() != Some(key) {
        return Err(Error::Format(format!("expected `{key}` line, got {line:?}")));
    }
    let vals: Vec<T> = parts
        .map(|p| p.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Format(format!("unparseable `{key}` line {line:?}")))?;
    <[T; 3]>::try_from(vals).map_err(|_| Error::Format(format!("`{key}` needs three values")))
}

pub fn decode_mrvol(bytes: &[u8]) -> Result<Volume3D> {
    if !bytes.starts_with(MAGIC) {
        return Err(Error::Format("missing MRVOL1 magic".into()));
    }
    let mut pos = MAGIC.len();
    let dims: [usize; 3] = triple(next_line(bytes, &mut pos)?, "dims")?;
    let spacing: [f64; 3] = triple(next_line(bytes, &mut pos)?, "spacing")?;
    if next_line(bytes, &mut pos)? != DATA_LINE {
        return Err(Error::Format("MRVOL data line must read `data float32 le`".into()));
    }
    let n = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("MRVOL dims overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() != 4 * n {
        return Err(Error::Format(format!(
            "MRVOL payload has {} bytes, dims {dims:?} need {}",
            payload.len(),
            4 * n
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Volume3D::new(dims, spacing, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_mrvol(vol: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_mrvol(vol)).map_err(|e| Error::io(path, e))
}

pub fn read_mrvol(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mrvol(&bytes)
}
