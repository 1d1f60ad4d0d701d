//! Slice-directory layout: `manifest.txt`, `slice_NNN.pgm`, `gt_NNN.pgm`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{read_pgm, write_pgm16, CmrVolume};
use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::scalar::Real;

/// Parsed `manifest.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub case_id: String,
    pub n_slices: usize,
    pub rows: usize,
    pub cols: usize,
    pub labels: Option<Vec<SliceClass>>,
}

impl Manifest {
    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "case_id={}", self.case_id);
        let _ = writeln!(s, "n_slices={}", self.n_slices);
        let _ = writeln!(s, "rows={}", self.rows);
        let _ = writeln!(s, "cols={}", self.cols);
        if let Some(labels) = &self.labels {
            let tokens: Vec<&str> = labels.iter().map(|c| c.token()).collect();
            let _ = writeln!(s, "labels={}", tokens.join(","));
        }
        s
    }

    fn parse(text: &str) -> Result<Self> {
        let mut case_id = None;
        let (mut n_slices, mut rows, mut cols) = (None, None, None);
        let mut labels = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("manifest line without '=': {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("manifest value for {key} is not an integer: {v:?}")))
            };
            match key {
                "case_id" => case_id = Some(value.to_string()),
                "n_slices" => n_slices = Some(int(value)?),
                "rows" => rows = Some(int(value)?),
                "cols" => cols = Some(int(value)?),
                "labels" if !value.is_empty() => {
                    labels = Some(value.split(',').map(str::parse).collect::<Result<Vec<SliceClass>>>()?)
                }
                _ => {}
            }
        }
        let missing = |k: &str| Error::Parse(format!("manifest lacks {k}"));
        let m = Manifest {
            case_id: case_id.ok_or_else(|| missing("case_id"))?,
            n_slices: n_slices.ok_or_else(|| missing("n_slices"))?,
            rows: rows.ok_or_else(|| missing("rows"))?,
            cols: cols.ok_or_else(|| missing("cols"))?,
            labels,
        };
        if let Some(l) = &m.labels {
            if l.len() != m.n_slices {
                return Err(Error::LengthMismatch {
                    left: l.len(),
                    right: m.n_slices,
                });
            }
        }
        Ok(m)
    }
}

fn slice_name(prefix: &str, p: usize) -> String {
    format!("{prefix}_{p:03}.pgm")
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Manifest::parse(&text)
}

fn read_checked(dir: &Path, name: &str, m: &Manifest) -> Result<Grid<u16>> {
    let (g, _) = read_pgm(&dir.join(name))?;
    if g.shape() != (m.rows, m.cols) {
        return Err(Error::ShapeMismatch {
            expected: (m.rows, m.cols, 1),
            found: (g.rows(), g.cols(), 1),
        });
    }
    Ok(g)
}

pub(crate) fn read_slice_dir_volume<T: Real>(dir: &Path) -> Result<CmrVolume<T>> {
    let m = read_manifest(dir)?;
    let mut voxels = Vec::with_capacity(m.rows * m.cols * m.n_slices);
    for p in 1..=m.n_slices {
        let g = read_checked(dir, &slice_name("slice", p), &m)?;
        voxels.extend(g.as_slice().iter().map(|&v| T::from_count(v as usize)));
    }
    CmrVolume::new(m.case_id, m.rows, m.cols, m.n_slices, voxels)
}

pub(crate) fn read_gt_masks(dir: &Path, m: &Manifest) -> Result<Vec<BinaryMask>> {
    (1..=m.n_slices)
        .map(|p| {
            let g = read_checked(dir, &slice_name("gt", p), m)?;
            Ok(BinaryMask::from_vec(m.rows, m.cols, g.as_slice().iter().map(|&v| v > 0).collect()))
        })
        .collect()
}

/// Writes a volume (voxels must already be integers in `0..=65535`), with
/// optional ground truth and per-slice class labels.
pub fn write_slice_dir<T: Real>(
    dir: &Path,
    v: &CmrVolume<T>,
    gt: Option<&[BinaryMask]>,
    labels: Option<&[SliceClass]>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        case_id: v.case_id.clone(),
        n_slices: v.n_slices,
        rows: v.rows,
        cols: v.cols,
        labels: labels.map(<[SliceClass]>::to_vec),
    };
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest.render()).map_err(|e| Error::io(&path, e))?;
    for s in 0..v.n_slices {
        let g = v.slice_grid(s);
        let mut bad = None;
        let samples = g.map(|x| {
            let f = x.as_f64();
            if !(0.0..=65535.0).contains(&f) || f.fract() != 0.0 {
                bad = Some(f);
            }
            f as u16
        });
        if let Some(f) = bad {
            return Err(Error::Parse(format!("voxel {f} cannot be stored as a 16-bit PGM sample")));
        }
        write_pgm16(&dir.join(slice_name("slice", s + 1)), &samples)?;
    }
    if let Some(gt) = gt {
        for (i, m) in gt.iter().enumerate() {
            let g = Grid::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|&b| if b { 65535 } else { 0 }).collect());
            write_pgm16(&dir.join(slice_name("gt", i + 1)), &g)?;
        }
    }
    Ok(())
}
