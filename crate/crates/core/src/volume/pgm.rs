//! Binary PGM (P5) images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Reads a P5 image; samples are returned as stored (big-endian when 16-bit).
pub fn read_pgm(path: &Path) -> Result<(Grid<u16>, u16)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|msg| Error::Parse(format!("{}: {msg}", path.display())))
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<(Grid<u16>, u16), String> {
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ascii header")?.to_string());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if tokens[0] != "P5" {
        return Err(format!("expected P5 magic, found {:?}", tokens[0]));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| format!("bad header number {t:?}"));
    let (cols, rows, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    let wide = maxval > 255;
    let need = rows * cols * if wide { 2 } else { 1 };
    let raster = bytes.get(pos..pos + need).ok_or("truncated raster")?;
    let data = if wide {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    Ok((Grid::from_vec(rows, cols, data), maxval as u16))
}

/// Writes a 16-bit P5 image with maxval 65535.
pub fn write_pgm16(path: &Path, img: &Grid<u16>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", img.cols(), img.rows()).into_bytes();
    for &v in img.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit P5 image with maxval 255.
pub fn write_pgm8(path: &Path, img: &Grid<u8>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols(), img.rows()).into_bytes();
    out.extend_from_slice(img.as_slice());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
