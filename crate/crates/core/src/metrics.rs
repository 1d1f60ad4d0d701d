//! Overlap, confusion and boundary-distance scores between binary masks.
//!
//! Boundary distances are Euclidean, in pixel units:
//!
//! * `hausdorff`: the larger of the two directed worst-case distances;
//! * `mad`: average symmetric surface distance, the mean of the two directed
//!   mean distances;
//! * `bde`: one-directional mean distance from the predicted boundary to the
//!   reference boundary. Unlike the other two it is not symmetric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub dice: f64,
    pub jaccard: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub specificity: f64,
    pub mae: f64,
    pub hausdorff: f64,
    pub mad: f64,
    pub bde: f64,
}

impl MetricReport {
    /// Row labels used in summary tables, in field order.
    pub const ROW_NAMES: [&'static str; 11] = [
        "Dice Score Coefficient (DSC)",
        "Jaccard Index (JI)",
        "Precision",
        "Recall",
        "F1 Score",
        "Accuracy",
        "Specificity",
        "Mean Absolute Error (MAE)",
        "Hausdorff Distance (HD)",
        "Mean Average Distance (MAD)",
        "Boundary Displacement Error (BDE)",
    ];

    pub fn values(&self) -> [f64; 11] {
        [
            self.dice,
            self.jaccard,
            self.precision,
            self.recall,
            self.f1,
            self.accuracy,
            self.specificity,
            self.mae,
            self.hausdorff,
            self.mad,
            self.bde,
        ]
    }

    pub fn from_values(v: [f64; 11]) -> Self {
        MetricReport {
            dice: v[0],
            jaccard: v[1],
            precision: v[2],
            recall: v[3],
            f1: v[4],
            accuracy: v[5],
            specificity: v[6],
            mae: v[7],
            hausdorff: v[8],
            mad: v[9],
            bde: v[10],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
    tn: usize,
}

fn counts(pred: &BinaryMask, truth: &BinaryMask) -> Result<Counts> {
    pred.check_same_shape(truth)?;
    let mut c = Counts {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[inline]
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2|A∩B| / (|A| + |B|)`, 1.0 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = counts(a, b)?;
    let denom = 2 * c.tp + c.fp + c.fn_;
    Ok(if denom == 0 { 1.0 } else { (2 * c.tp) as f64 / denom as f64 })
}

/// `|A∩B| / |A∪B|`, 1.0 when both masks are empty.
pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = counts(a, b)?;
    let union = c.tp + c.fp + c.fn_;
    Ok(if union == 0 { 1.0 } else { c.tp as f64 / union as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub specificity: f64,
    pub mae: f64,
}

/// Pixelwise confusion scores of `pred` against `truth`. Zero denominators
/// report 0.
pub fn confusion_metrics(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionScores> {
    let c = counts(pred, truth)?;
    let total = c.tp + c.fp + c.fn_ + c.tn;
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ConfusionScores {
        precision,
        recall,
        f1,
        accuracy: ratio(c.tp + c.tn, total),
        specificity: ratio(c.tn, c.tn + c.fp),
        mae: ratio(c.fp + c.fn_, total),
    })
}

/// Foreground pixels with a 4-neighbour in the background or off the grid,
/// in row-major order.
pub fn extract_boundary(m: &BinaryMask) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (r, c) in m.pixels() {
        let (ri, ci) = (r as isize, c as isize);
        if !m.get_or_false(ri - 1, ci)
            || !m.get_or_false(ri + 1, ci)
            || !m.get_or_false(ri, ci - 1)
            || !m.get_or_false(ri, ci + 1)
        {
            out.push((r, c));
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDistances {
    pub hausdorff: f64,
    pub mad: f64,
    pub bde: f64,
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
/// Infinite entries carry no site.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let mut k: isize = -1;
    for q in 0..f.len() {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            z[k as usize + 1] = f64::INFINITY;
            break;
        }
    }
    if k < 0 {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every grid pixel to the nearest of
/// `sites`.
pub fn squared_distance_transform(rows: usize, cols: usize, sites: &[(usize, usize)]) -> Vec<f64> {
    let mut grid = vec![f64::INFINITY; rows * cols];
    for &(r, c) in sites {
        grid[r * cols + c] = 0.0;
    }
    let n = rows.max(cols);
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for c in 0..cols {
        for r in 0..rows {
            f[r] = grid[r * cols + c];
        }
        edt_1d(&f[..rows], &mut out[..rows], &mut v, &mut z);
        for r in 0..rows {
            grid[r * cols + c] = out[r];
        }
    }
    for r in 0..rows {
        f[..cols].copy_from_slice(&grid[r * cols..(r + 1) * cols]);
        edt_1d(&f[..cols], &mut out[..cols], &mut v, &mut z);
        grid[r * cols..(r + 1) * cols].copy_from_slice(&out[..cols]);
    }
    grid
}

/// A mask's boundary with the squared distance from every pixel to it.
/// Building one per mask lets many masks be scored against each other
/// without repeating the distance transform.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    rows: usize,
    cols: usize,
    boundary: Vec<(usize, usize)>,
    sq_dist: Vec<f64>,
}

impl BoundaryField {
    pub fn new(m: &BinaryMask) -> Result<Self> {
        let boundary = extract_boundary(m)?;
        let (rows, cols) = m.shape();
        let sq_dist = squared_distance_transform(rows, cols, &boundary);
        Ok(BoundaryField { rows, cols, boundary, sq_dist })
    }

    pub fn boundary(&self) -> &[(usize, usize)] {
        &self.boundary
    }

    /// Row-major squared distances to the nearest boundary pixel.
    pub fn squared_distances(&self) -> &[f64] {
        &self.sq_dist
    }

    /// Largest and mean distance from this boundary to `other`'s.
    fn directed_to(&self, other: &BoundaryField) -> (f64, f64) {
        let mut worst = 0.0f64;
        let mut sum = 0.0f64;
        for &(r, c) in &self.boundary {
            let d = other.sq_dist[r * self.cols + c].sqrt();
            worst = worst.max(d);
            sum += d;
        }
        (worst, sum / self.boundary.len() as f64)
    }
}

/// [`boundary_distances`] from prebuilt fields.
pub fn field_distances(pred: &BoundaryField, truth: &BoundaryField) -> Result<BoundaryDistances> {
    if (pred.rows, pred.cols) != (truth.rows, truth.cols) {
        return Err(Error::ShapeMismatch {
            expected: (truth.rows, truth.cols, 1),
            found: (pred.rows, pred.cols, 1),
        });
    }
    let (max_ab, mean_ab) = pred.directed_to(truth);
    let (max_ba, mean_ba) = truth.directed_to(pred);
    Ok(BoundaryDistances {
        hausdorff: max_ab.max(max_ba),
        mad: 0.5 * (mean_ab + mean_ba),
        bde: mean_ab,
    })
}

/// Hausdorff, mean symmetric and one-directional boundary distances from
/// the boundary of `pred` to the boundary of `truth`.
pub fn boundary_distances(pred: &BinaryMask, truth: &BinaryMask) -> Result<BoundaryDistances> {
    pred.check_same_shape(truth)?;
    field_distances(&BoundaryField::new(pred)?, &BoundaryField::new(truth)?)
}

/// Full score battery. Both masks must be nonempty.
pub fn evaluate(pred: &BinaryMask, truth: &BinaryMask) -> Result<MetricReport> {
    let cm = confusion_metrics(pred, truth)?;
    let bd = boundary_distances(pred, truth)?;
    Ok(MetricReport {
        dice: dice(pred, truth)?,
        jaccard: jaccard(pred, truth)?,
        precision: cm.precision,
        recall: cm.recall,
        f1: cm.f1,
        accuracy: cm.accuracy,
        specificity: cm.specificity,
        mae: cm.mae,
        hausdorff: bd.hausdorff,
        mad: bd.mad,
        bde: bd.bde,
    })
}
