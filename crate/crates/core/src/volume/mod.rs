//! Volume ingestion, slicing and slice geometry.
//!
//! Two on-disk layouts are understood: single-file NIfTI-1 (optionally
//! gzip-compressed) and a portable slice directory of 16-bit PGM images with
//! a `manifest.txt`. Both load into a [`CmrVolume`], which is then cut into
//! ordered [`SliceImage`]s with per-slice min-max normalization.

mod nifti;
mod pgm;
mod slicedir;

use std::path::Path;

pub use nifti::{read_nifti, write_nifti, NiftiDataType};
pub use pgm::{read_pgm, write_pgm16, write_pgm8};
pub use slicedir::{read_manifest, write_slice_dir, Manifest};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::scalar::Real;

/// A 3-D short-axis stack.
///
/// Voxels are stored slice-major: slice `s` occupies the contiguous
/// row-major block `s * rows * cols .. (s + 1) * rows * cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmrVolume<T = f64> {
    pub case_id: String,
    pub rows: usize,
    pub cols: usize,
    pub n_slices: usize,
    pub voxels: Vec<T>,
    pub spacing_mm: Option<[f64; 3]>,
}

impl<T: Real> CmrVolume<T> {
    pub fn new(case_id: impl Into<String>, rows: usize, cols: usize, n_slices: usize, voxels: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || n_slices == 0 {
            return Err(Error::MalformedHeader(format!(
                "volume dims must be positive, got {rows}x{cols}x{n_slices}"
            )));
        }
        if voxels.len() != rows * cols * n_slices {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols, n_slices),
                found: (voxels.len(), 1, 1),
            });
        }
        if voxels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("volume contains non-finite intensities".into()));
        }
        Ok(CmrVolume {
            case_id: case_id.into(),
            rows,
            cols,
            n_slices,
            voxels,
            spacing_mm: None,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.n_slices)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, s: usize) -> T {
        self.voxels[(s * self.rows + r) * self.cols + c]
    }

    /// Raw (unnormalized) slice `s`, zero-based.
    pub fn slice_grid(&self, s: usize) -> Grid<T> {
        let n = self.rows * self.cols;
        Grid::from_vec(self.rows, self.cols, self.voxels[s * n..(s + 1) * n].to_vec())
    }
}

/// One 2-D slice with its 1-based position `p` among `n` siblings.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceImage<T = f64> {
    pub pixels: Grid<T>,
    pub p: usize,
    pub n: usize,
    pub case_id: String,
}

impl<T: Real> SliceImage<T> {
    pub fn new(pixels: Grid<T>, p: usize, n: usize, case_id: impl Into<String>) -> Self {
        SliceImage {
            pixels,
            p,
            n,
            case_id: case_id.into(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pixels.shape()
    }

    pub fn mean(&self) -> T {
        let s: T = self.pixels.as_slice().iter().copied().sum();
        s / T::from_count(self.pixels.len())
    }
}

/// Ground-truth LV cavity for one slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    pub mask: BinaryMask,
    pub p: usize,
    pub n: usize,
    pub case_id: String,
}

/// Loads a NIfTI-1 file (`.nii` / `.nii.gz`) or a slice directory.
pub fn load_volume<T: Real>(path: &Path) -> Result<CmrVolume<T>> {
    if path.is_dir() {
        slicedir::read_slice_dir_volume(path)
    } else {
        read_nifti(path)
    }
}

/// Cuts a volume into slices, min-max rescaling each to `[0, 255]`.
///
/// Constant slices map to all zeros.
pub fn extract_slices<T: Real>(v: &CmrVolume<T>) -> Vec<SliceImage<T>> {
    (0..v.n_slices)
        .map(|s| SliceImage::new(normalize_to_255(&v.slice_grid(s)), s + 1, v.n_slices, v.case_id.clone()))
        .collect()
}

pub fn normalize_to_255<T: Real>(g: &Grid<T>) -> Grid<T> {
    let (lo, hi) = g
        .as_slice()
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > T::zero()) {
        return Grid::filled(g.rows(), g.cols(), T::zero());
    }
    g.map(|v| ((v - lo) * T::lit(255.0) / range).min(T::lit(255.0)))
}

fn check_target(rows: usize, cols: usize) -> Result<()> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidTarget { rows, cols });
    }
    Ok(())
}

/// Corner-aligned source coordinate for output index `i`.
#[inline]
fn source_coord(i: usize, n_out: usize, n_in: usize) -> f64 {
    if n_out <= 1 || n_in <= 1 {
        0.0
    } else {
        i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
    }
}

/// Bilinear resampling with corner-aligned sampling.
pub fn resize_bilinear<T: Real>(s: &SliceImage<T>, rows: usize, cols: usize) -> Result<SliceImage<T>> {
    check_target(rows, cols)?;
    Ok(SliceImage {
        pixels: resize_grid_bilinear(&s.pixels, rows, cols),
        p: s.p,
        n: s.n,
        case_id: s.case_id.clone(),
    })
}

pub fn resize_grid_bilinear<T: Real>(g: &Grid<T>, rows: usize, cols: usize) -> Grid<T> {
    let (in_r, in_c) = g.shape();
    if (in_r, in_c) == (rows, cols) {
        return g.clone();
    }
    Grid::from_fn(rows, cols, |r, c| {
        let y = source_coord(r, rows, in_r);
        let x = source_coord(c, cols, in_c);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(in_r - 1), (x0 + 1).min(in_c - 1));
        let (fy, fx) = (T::lit(y - y0 as f64), T::lit(x - x0 as f64));
        let one = T::one();
        let top = g.get(y0, x0) * (one - fx) + g.get(y0, x1) * fx;
        let bottom = g.get(y1, x0) * (one - fx) + g.get(y1, x1) * fx;
        top * (one - fy) + bottom * fy
    })
}

/// Nearest-neighbour resampling of a mask, corner-aligned like
/// [`resize_bilinear`].
pub fn resize_mask_nearest(m: &BinaryMask, rows: usize, cols: usize) -> Result<BinaryMask> {
    check_target(rows, cols)?;
    let (in_r, in_c) = m.shape();
    if (in_r, in_c) == (rows, cols) {
        return Ok(m.clone());
    }
    Ok(BinaryMask::from_fn(rows, cols, |r, c| {
        let y = source_coord(r, rows, in_r).round() as usize;
        let x = source_coord(c, cols, in_c).round() as usize;
        m.get(y.min(in_r - 1), x.min(in_c - 1))
    }))
}

/// Loads ground-truth masks for one case and resizes them to `working`.
///
/// NIfTI label volumes are compared against `lv_label`; slice-directory
/// ground truth (`gt_NNN.pgm`, binary 0/65535) is foreground wherever the
/// sample is nonzero. `expected` is the `(rows, cols, n_slices)` of the paired
/// image volume.
pub fn load_ground_truth(
    path: &Path,
    lv_label: i64,
    expected: (usize, usize, usize),
    working: (usize, usize),
) -> Result<Vec<GroundTruthMask>> {
    let (masks, case_id) = if path.is_dir() {
        let m = read_manifest(path)?;
        (slicedir::read_gt_masks(path, &m)?, m.case_id)
    } else {
        let labels: CmrVolume<f64> = read_nifti(path)?;
        let masks = (0..labels.n_slices)
            .map(|s| {
                let g = labels.slice_grid(s);
                BinaryMask::from_vec(
                    g.rows(),
                    g.cols(),
                    g.as_slice().iter().map(|&v| v.round() as i64 == lv_label).collect(),
                )
            })
            .collect::<Vec<_>>();
        (masks, labels.case_id)
    };
    let found = masks
        .first()
        .map(|m| (m.rows(), m.cols(), masks.len()))
        .unwrap_or((0, 0, 0));
    if found != expected {
        return Err(Error::ShapeMismatch { expected, found });
    }
    let n = masks.len();
    masks
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(GroundTruthMask {
                mask: resize_mask_nearest(&m, working.0, working.1)?,
                p: i + 1,
                n,
                case_id: case_id.clone(),
            })
        })
        .collect()
}

/// Ground-truth masks from an in-memory label volume.
pub fn ground_truth_from_labels<T: Real>(labels: &CmrVolume<T>, lv_label: i64) -> Vec<GroundTruthMask> {
    (0..labels.n_slices)
        .map(|s| {
            let g = labels.slice_grid(s);
            GroundTruthMask {
                mask: BinaryMask::from_vec(
                    g.rows(),
                    g.cols(),
                    g.as_slice().iter().map(|v| v.as_f64().round() as i64 == lv_label).collect(),
                ),
                p: s + 1,
                n: labels.n_slices,
                case_id: labels.case_id.clone(),
            }
        })
        .collect()
}
