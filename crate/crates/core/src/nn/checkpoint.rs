//! Binary checkpoint: `MRNET1`, u32 version, the model config as one JSON
//! line, u64 parameter count, little-endian f32 parameters in declaration
//! order, then a flag byte and (when set) the Adam state.

use super::adam::AdamState;
use super::model::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use std::path::Path;

const MAGIC: &[u8; 6] = b"MRNET1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }
}

fn put_f32s(out: &mut Vec<u8>, tensors: &[Vec<f32>]) {
    for t in tensors {
        for &v in t {
            out.write_f32::<LittleEndian>(v).expect("write to vec");
        }
    }
}

pub fn encode_checkpoint(params: &ModelParams<f32>, adam: Option<&AdamState>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(64 + 4 * params.param_count() * if adam.is_some() { 3 } else { 1 });
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(VERSION).expect("write to vec");
    out.extend_from_slice(serde_json::to_string(params.config())?.as_bytes());
    out.push(b'\n');
    out.write_u64::<LittleEndian>(params.param_count() as u64).expect("write to vec");
    put_f32s(&mut out, params.tensors());
    match adam {
        None => out.push(0),
        Some(s) => {
            if !s.matches(params) {
                return Err(Error::Shape("optimizer state does not match the parameters".into()));
            }
            out.push(1);
            out.write_u64::<LittleEndian>(s.t).expect("write to vec");
            for v in [s.lr, s.beta1, s.beta2, s.eps] {
                out.write_f64::<LittleEndian>(v).expect("write to vec");
            }
            put_f32s(&mut out, &s.m);
            put_f32s(&mut out, &s.v);
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("checkpoint truncated in {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(LittleEndian::read_u64(self.take(8, what)?))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(LittleEndian::read_f64(self.take(8, what)?))
    }

    fn tensors(&mut self, shapes: &[usize], what: &str) -> Result<Vec<Vec<f32>>> {
        shapes
            .iter()
            .map(|&n| {
                let raw = self.take(4 * n, what)?;
                let mut t = vec![0.0f32; n];
                LittleEndian::read_f32_into(raw, &mut t);
                Ok(t)
            })
            .collect()
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = LittleEndian::read_u32(r.take(4, "version")?);
    if version != VERSION {
        return Err(Error::Format(format!("checkpoint version {version} is not supported")));
    }
    let rest = &bytes[r.pos..];
    let eol = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("checkpoint truncated in config".into()))?;
    let config: ModelConfig = serde_json::from_slice(&rest[..eol])
        .map_err(|e| Error::Format(format!("bad checkpoint config: {e}")))?;
    r.pos += eol + 1;
    let shapes = config
        .param_shapes()
        .map_err(|e| Error::Format(format!("bad checkpoint config: {e}")))?;
    let count = r.u64("parameter count")?;
    if count != shapes.iter().sum::<usize>() as u64 {
        return Err(Error::Format(format!(
            "checkpoint declares {count} parameters, config implies {}",
            shapes.iter().sum::<usize>()
        )));
    }
    let params = ModelParams::from_tensors(&config, r.tensors(&shapes, "parameters")?)?;
    let adam = match r.take(1, "optimizer flag")?[0] {
        0 => None,
        1 => {
            let t = r.u64("optimizer state")?;
            let lr = r.f64("optimizer state")?;
            let beta1 = r.f64("optimizer state")?;
            let beta2 = r.f64("optimizer state")?;
            let eps = r.f64("optimizer state")?;
            let m = r.tensors(&shapes, "optimizer moments")?;
            let v = r.tensors(&shapes, "optimizer moments")?;
            Some(AdamState { t, lr, beta1, beta2, eps, m, v })
        }
        f => return Err(Error::Format(format!("bad optimizer flag {f}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint { params, adam })
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ModelParams<f32>, adam: Option<&AdamState>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(params, adam)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (ModelParams<f32>, AdamState) {
        let mut p = ModelParams::<f32>::init(&ModelConfig::tiny()).unwrap();
        p.tensors_mut()[1][0] = f32::from_bits(0x7f7f_ffff);
        let mut s = AdamState::new(&p, 2e-3);
        s.t = 7;
        s.m[3][1] = -1.5e-20;
        s.v[0][0] = 3.25;
        (p, s)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (p, s) = sample();
        let bytes = encode_checkpoint(&p, Some(&s)).unwrap();
        let c = decode_checkpoint(&bytes).unwrap();
        assert_eq!(c.params, p);
        assert_eq!(c.adam.as_ref(), Some(&s));
        assert_eq!(encode_checkpoint(&c.params, c.adam.as_ref()).unwrap(), bytes);

        let bare = encode_checkpoint(&p, None).unwrap();
        assert_eq!(decode_checkpoint(&bare).unwrap().adam, None);
    }

    #[test]
    fn header_count_matches_counted_params() {
        let (p, _) = sample();
        let bytes = encode_checkpoint(&p, None).unwrap();
        let eol = bytes.iter().position(|&b| b == b'\n').unwrap();
        let count = LittleEndian::read_u64(&bytes[eol + 1..eol + 9]);
        assert_eq!(count as usize, ModelConfig::tiny().param_count().unwrap());
        assert_eq!(bytes.len(), eol + 9 + 4 * count as usize + 1);
    }

    #[test]
    fn damaged_files_are_format_errors() {
        let (p, s) = sample();
        let bytes = encode_checkpoint(&p, Some(&s)).unwrap();
        for cut in [3, 8, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode_checkpoint(&extra), Err(Error::Format(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_checkpoint(&magic), Err(Error::Format(_))));
        let mut version = bytes;
        version[6] = 2;
        assert!(matches!(decode_checkpoint(&version), Err(Error::Format(_))));
    }
}
