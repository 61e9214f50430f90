//! Minimal NIfTI-1 reader: single-file `n+1`, 3D, int16 or float32.

use super::Volume3D;
use crate::error::{Error, Result};
use byteorder::{BigEndian, ByteOrder as _, LittleEndian};
use std::path::Path;

const HEADER_SIZE: usize = 348;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ByteOrder {
    Little,
    Big,
}

/// Voxel storage types this reader accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    Int16,
    Float32,
}

impl DataType {
    fn from_code(code: i16) -> Result<Self> {
        match code {
            4 => Ok(DataType::Int16),
            16 => Ok(DataType::Float32),
            other => Err(Error::Unsupported(format!(
                "NIfTI datatype {other} (only 4/int16 and 16/float32 are read)"
            ))),
        }
    }

    pub fn code(self) -> i16 {
        match self {
            DataType::Int16 => 4,
            DataType::Float32 => 16,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DataType::Int16 => 2,
            DataType::Float32 => 4,
        }
    }
}

/// The subset of NIfTI-1 header fields the reader uses.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub datatype: DataType,
    /// `(slope, intercept)`; only present when the slope is finite and non-zero.
    pub scaling: Option<(f32, f32)>,
    pub byte_order: ByteOrder,
    pub vox_offset: usize,
}

impl VolumeHeader {
    pub fn payload_len(&self) -> usize {
        self.dims.iter().product::<usize>() * self.datatype.size()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    order: ByteOrder,
}

impl Reader<'_> {
    fn i16(&self, at: usize) -> i16 {
        match self.order {
            ByteOrder::Little => LittleEndian::read_i16(&self.bytes[at..]),
            ByteOrder::Big => BigEndian::read_i16(&self.bytes[at..]),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        match self.order {
            ByteOrder::Little => LittleEndian::read_f32(&self.bytes[at..]),
            ByteOrder::Big => BigEndian::read_f32(&self.bytes[at..]),
        }
    }
}

/// Parse and validate the 348-byte header at the start of `bytes`.
pub fn parse_header(bytes: &[u8]) -> Result<VolumeHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::Format(format!(
            "NIfTI header needs {HEADER_SIZE} bytes, file has {}",
            bytes.len()
        )));
    }
    let raw = &bytes[offsets::SIZEOF_HDR..offsets::SIZEOF_HDR + 4];
    let order = if LittleEndian::read_i32(raw) == HEADER_SIZE as i32 {
        ByteOrder::Little
    } else if BigEndian::read_i32(raw) == HEADER_SIZE as i32 {
        ByteOrder::Big
    } else {
        return Err(Error::Format("sizeof_hdr is not 348 in either byte order".into()));
    };
    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    if magic != b"n+1\0" {
        if magic == b"ni1\0" {
            return Err(Error::Unsupported("two-file (.hdr/.img) NIfTI".into()));
        }
        return Err(Error::Format(format!("bad NIfTI magic {magic:?}")));
    }
    let r = Reader { bytes, order };

    let ndim = r.i16(offsets::DIM);
    if ndim != 3 {
        return Err(Error::Unsupported(format!("dim[0] = {ndim}, only 3D volumes are read")));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let v = r.i16(offsets::DIM + 2 * (i + 1));
        if v <= 0 {
            return Err(Error::Format(format!("dim[{}] = {v} is not positive", i + 1)));
        }
        *d = v as usize;
    }
    let datatype = DataType::from_code(r.i16(offsets::DATATYPE))?;
    let bitpix = r.i16(offsets::BITPIX);
    if bitpix != 0 && bitpix as usize != 8 * datatype.size() {
        return Err(Error::Format(format!(
            "bitpix {bitpix} disagrees with datatype {:?}",
            datatype
        )));
    }
    let mut spacing = [1.0f64; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        let p = r.f32(offsets::PIXDIM + 4 * (i + 1)).abs() as f64;
        // Zero or garbage pixdim is common in the wild; fall back to 1 mm.
        if p > 0.0 && p.is_finite() {
            *s = p;
        }
    }
    let vox_offset = r.f32(offsets::VOX_OFFSET);
    if !(vox_offset >= HEADER_SIZE as f32) || vox_offset.fract() != 0.0 {
        return Err(Error::Format(format!("vox_offset {vox_offset} is invalid")));
    }
    let slope = r.f32(offsets::SCL_SLOPE);
    let inter = r.f32(offsets::SCL_INTER);
    let scaling = (slope != 0.0 && slope.is_finite()).then(|| {
        (slope, if inter.is_finite() { inter } else { 0.0 })
    });
    Ok(VolumeHeader {
        dims,
        spacing,
        datatype,
        scaling,
        byte_order: order,
        vox_offset: vox_offset as usize,
    })
}

/// Decode a complete single-file NIfTI-1 image held in memory.
pub fn parse_nifti(bytes: &[u8]) -> Result<Volume3D> {
    decode(bytes, Path::new("<memory>"))
}

fn decode(bytes: &[u8], origin: &Path) -> Result<Volume3D> {
    let header = parse_header(bytes)?;
    let start = header.vox_offset;
    let end = start + header.payload_len();
    if bytes.len() < end {
        let msg = format!("truncated NIfTI payload: need {end} bytes, have {}", bytes.len());
        return Err(Error::io(
            origin,
            std::io::Error::new(std::io::ErrorKind::UnexpectedEof, msg),
        ));
    }
    let payload = &bytes[start..end];
    let r = Reader {
        bytes: payload,
        order: header.byte_order,
    };
    let n = header.dims.iter().product::<usize>();
    let mut data: Vec<f32> = match header.datatype {
        DataType::Int16 => (0..n).map(|i| r.i16(2 * i) as f32).collect(),
        DataType::Float32 => (0..n).map(|i| r.f32(4 * i)).collect(),
    };
    if let Some((slope, inter)) = header.scaling {
        data.iter_mut().for_each(|v| *v = slope * *v + inter);
    }
    Volume3D::new(header.dims, header.spacing, data)
}

pub fn read_nifti_header(path: impl AsRef<Path>) -> Result<VolumeHeader> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(&bytes)
}

pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use byteorder::WriteBytesExt;

    fn build<B: byteorder::ByteOrder>(
        dims: [i16; 3],
        datatype: i16,
        slope: f32,
        inter: f32,
        payload: &[u8],
    ) -> Vec<u8> {
        let mut h = vec![0u8; 352];
        B::write_i32(&mut h[0..4], 348);
        B::write_i16(&mut h[40..42], 3);
        for i in 0..3 {
            B::write_i16(&mut h[42 + 2 * i..44 + 2 * i], dims[i]);
        }
        B::write_i16(&mut h[70..72], datatype);
        B::write_i16(&mut h[72..74], if datatype == 4 { 16 } else { 32 });
        for i in 0..3 {
            B::write_f32(&mut h[80 + 4 * i..84 + 4 * i], 1.5);
        }
        B::write_f32(&mut h[108..112], 352.0);
        B::write_f32(&mut h[112..116], slope);
        B::write_f32(&mut h[116..120], inter);
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(payload);
        h
    }

    #[test]
    fn float_volume_little_endian() {
        let mut payload = vec![];
        for i in 0..64 {
            payload.write_f32::<LittleEndian>(i as f32).unwrap();
        }
        let bytes = build::<LittleEndian>([4, 4, 4], 16, 0.0, 0.0, &payload);
        let v = parse_nifti(&bytes).unwrap();
        assert_eq!(v.dims(), [4, 4, 4]);
        assert_eq!(v.spacing(), [1.5; 3]);
        assert_eq!(v.get(1, 0, 0), 1.0);
        assert_eq!(v.get(3, 3, 3), 63.0);
    }

    #[test]
    fn int16_slope_and_intercept() {
        let mut payload = vec![];
        payload.write_i16::<LittleEndian>(5).unwrap();
        let bytes = build::<LittleEndian>([1, 1, 1], 4, 2.0, 1.0, &payload);
        assert_eq!(parse_nifti(&bytes).unwrap().data(), &[11.0]);
    }

    #[test]
    fn swapped_header_is_detected() {
        let mut payload = vec![];
        for v in [-3i16, 7] {
            payload.write_i16::<BigEndian>(v).unwrap();
        }
        let bytes = build::<BigEndian>([2, 1, 1], 4, 0.0, 0.0, &payload);
        let header = parse_header(&bytes).unwrap();
        assert_eq!(header.byte_order, ByteOrder::Big);
        assert_eq!(parse_nifti(&bytes).unwrap().data(), &[-3.0, 7.0]);
    }

    #[test]
    fn bad_sizeof_hdr_is_format_error() {
        let mut bytes = build::<LittleEndian>([1, 1, 1], 16, 0.0, 0.0, &[0; 4]);
        bytes[0..4].copy_from_slice(&[1, 2, 3, 4]);
        assert!(matches!(parse_nifti(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn unsupported_datatype() {
        let bytes = build::<LittleEndian>([1, 1, 1], 64, 0.0, 0.0, &[0; 8]);
        assert!(matches!(parse_nifti(&bytes), Err(Error::Unsupported(_))));
    }

    #[test]
    fn truncated_payload() {
        let bytes = build::<LittleEndian>([2, 2, 2], 16, 0.0, 0.0, &[0; 12]);
        assert!(matches!(parse_nifti(&bytes), Err(Error::Io { .. })));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = build::<LittleEndian>([1, 1, 1], 16, 0.0, 0.0, &[0; 4]);
        bytes[344] = b'x';
        assert!(matches!(parse_nifti(&bytes), Err(Error::Format(_))));
    }
}
