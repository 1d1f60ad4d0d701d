//! Minimal single-file NIfTI-1 reader and writer.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::CmrVolume;
use crate::error::{Error, Result};
use crate::scalar::Real;

const HEADER_SIZE: usize = 348;
const MAGIC: &[u8; 4] = b"n+1\0";

/// Voxel encodings this reader accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiftiDataType {
    Int16,
    Uint16,
    Float32,
}

impl NiftiDataType {
    fn code(self) -> i16 {
        match self {
            NiftiDataType::Int16 => 4,
            NiftiDataType::Uint16 => 512,
            NiftiDataType::Float32 => 16,
        }
    }

    fn from_code(code: i16) -> Result<Self> {
        match code {
            4 => Ok(NiftiDataType::Int16),
            512 => Ok(NiftiDataType::Uint16),
            16 => Ok(NiftiDataType::Float32),
            other => Err(Error::UnsupportedDataType(other)),
        }
    }

    fn bytes(self) -> usize {
        match self {
            NiftiDataType::Int16 | NiftiDataType::Uint16 => 2,
            NiftiDataType::Float32 => 4,
        }
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Cursor<'a> {
    buf: &'a [u8],
    endian: Endian,
}

impl Cursor<'_> {
    fn i16(&self, at: usize) -> i16 {
        let b = [self.buf[at], self.buf[at + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn u16(&self, at: usize) -> u16 {
        self.i16(at) as u16
    }

    fn i32(&self, at: usize) -> i32 {
        let b = [self.buf[at], self.buf[at + 1], self.buf[at + 2], self.buf[at + 3]];
        match self.endian {
            Endian::Little => i32::from_le_bytes(b),
            Endian::Big => i32::from_be_bytes(b),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        f32::from_bits(self.i32(at) as u32)
    }
}

fn case_id_from_path(path: &Path) -> String {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("volume");
    name.trim_end_matches(".gz").trim_end_matches(".nii").to_string()
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    let gz = path.extension().map(|e| e == "gz").unwrap_or(false);
    if gz {
        GzDecoder::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
    } else {
        file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(bytes)
}

/// Reads a single-file NIfTI-1 volume; `.gz` suffix selects gzip decoding.
pub fn read_nifti<T: Real>(path: &Path) -> Result<CmrVolume<T>> {
    let bytes = read_all(path)?;
    let mut vol = parse_nifti(&bytes)?;
    vol.case_id = case_id_from_path(path);
    Ok(vol)
}

pub(crate) fn parse_nifti<T: Real>(bytes: &[u8]) -> Result<CmrVolume<T>> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::MalformedHeader(format!("file holds {} bytes, header needs 348", bytes.len())));
    }
    // dim[0] must decode into 1..=7; that fixes the byte order.
    let endian = [Endian::Little, Endian::Big]
        .into_iter()
        .find(|&e| (1..=7).contains(&Cursor { buf: bytes, endian: e }.i16(40)))
        .ok_or_else(|| Error::MalformedHeader("dim[0] is not in 1..7 in either byte order".into()))?;
    let h = Cursor { buf: bytes, endian };
    if h.i32(0) != HEADER_SIZE as i32 {
        return Err(Error::MalformedHeader(format!("sizeof_hdr is {}, expected 348", h.i32(0))));
    }
    if &bytes[344..348] != MAGIC {
        return Err(Error::MalformedHeader(format!("bad magic {:?}", &bytes[344..348])));
    }
    let ndim = h.i16(40) as usize;
    let dim = |i: usize| -> usize {
        if i <= ndim {
            h.i16(40 + 2 * i).max(1) as usize
        } else {
            1
        }
    };
    if (4..=ndim).any(|i| dim(i) > 1) {
        return Err(Error::MalformedHeader("only 2-D and 3-D volumes are supported".into()));
    }
    let (cols, rows, n_slices) = (dim(1), dim(2), dim(3));
    let dtype = NiftiDataType::from_code(h.i16(70))?;
    let vox_offset = h.f32(108);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32) {
        return Err(Error::MalformedHeader(format!("vox_offset {vox_offset} precedes end of header")));
    }
    let offset = vox_offset as usize;
    let count = rows * cols * n_slices;
    let needed = offset + count * dtype.bytes();
    if bytes.len() < needed {
        return Err(Error::MalformedHeader(format!(
            "voxel data truncated: need {needed} bytes, have {}",
            bytes.len()
        )));
    }
    let slope = h.f32(112) as f64;
    let inter = h.f32(116) as f64;
    let scaled = slope.is_finite() && slope != 0.0 && inter.is_finite();
    let raw: Vec<f64> = (0..count)
        .map(|i| {
            let at = offset + i * dtype.bytes();
            match dtype {
                NiftiDataType::Int16 => h.i16(at) as f64,
                NiftiDataType::Uint16 => h.u16(at) as f64,
                NiftiDataType::Float32 => h.f32(at) as f64,
            }
        })
        .collect();
    let voxels = raw
        .into_iter()
        .map(|v| T::lit(if scaled { v * slope + inter } else { v }))
        .collect();
    let mut vol = CmrVolume::new("volume", rows, cols, n_slices, voxels)?;
    let pix = |i: usize| h.f32(76 + 4 * i) as f64;
    if pix(1) > 0.0 && pix(2) > 0.0 {
        vol.spacing_mm = Some([pix(2), pix(1), if pix(3) > 0.0 { pix(3) } else { 1.0 }]);
    }
    Ok(vol)
}

/// Encodes a volume as little-endian NIfTI-1 bytes.
pub(crate) fn encode_nifti<T: Real>(v: &CmrVolume<T>, dtype: NiftiDataType) -> Vec<u8> {
    let mut hdr = vec![0u8; HEADER_SIZE + 4];
    let put_i16 = |h: &mut Vec<u8>, at: usize, x: i16| h[at..at + 2].copy_from_slice(&x.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, at: usize, x: f32| h[at..at + 4].copy_from_slice(&x.to_le_bytes());
    hdr[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    put_i16(&mut hdr, 40, 3);
    put_i16(&mut hdr, 42, v.cols as i16);
    put_i16(&mut hdr, 44, v.rows as i16);
    put_i16(&mut hdr, 46, v.n_slices as i16);
    for i in 4..8 {
        put_i16(&mut hdr, 40 + 2 * i, 1);
    }
    put_i16(&mut hdr, 70, dtype.code());
    put_i16(&mut hdr, 72, (dtype.bytes() * 8) as i16);
    let sp = v.spacing_mm.unwrap_or([1.0, 1.0, 1.0]);
    put_f32(&mut hdr, 76, 1.0);
    put_f32(&mut hdr, 80, sp[1] as f32);
    put_f32(&mut hdr, 84, sp[0] as f32);
    put_f32(&mut hdr, 88, sp[2] as f32);
    put_f32(&mut hdr, 108, (HEADER_SIZE + 4) as f32);
    hdr[344..348].copy_from_slice(MAGIC);
    let mut out = hdr;
    out.reserve(v.voxels.len() * dtype.bytes());
    for &x in &v.voxels {
        let x = x.as_f64();
        match dtype {
            NiftiDataType::Int16 => out.extend_from_slice(&(x.round() as i16).to_le_bytes()),
            NiftiDataType::Uint16 => out.extend_from_slice(&(x.round() as u16).to_le_bytes()),
            NiftiDataType::Float32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
        }
    }
    out
}

/// Writes a little-endian NIfTI-1 file, gzip-compressed when `path` ends in `.gz`.
pub fn write_nifti<T: Real>(v: &CmrVolume<T>, path: &Path, dtype: NiftiDataType) -> Result<()> {
    let bytes = encode_nifti(v, dtype);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = path.extension().map(|e| e == "gz").unwrap_or(false);
    if gz {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?;
    } else {
        let mut file = file;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
