//! Per-slice feature vectors: dense DAISY descriptors plus the inverse
//! position index of the slice within its stack.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::filter::{central_gradient, gaussian_kernel};
use crate::grid::Grid;
use crate::scalar::Real;
use crate::volume::SliceImage;

/// Dense DAISY layout.
///
/// Keypoints form a regular grid with spacing `step`, kept `radius` pixels
/// away from the image border. Each keypoint pools `orientations`
/// gradient-orientation channels at its center and at `histograms_per_ring`
/// points on each of `rings` concentric circles; ring `j` (1-based) has
/// radius `radius * j / rings` and is smoothed with `gaussian_sigmas[j - 1]`.
/// The center shares the first ring's smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaisyConfig {
    pub step: usize,
    pub radius: usize,
    pub rings: usize,
    pub histograms_per_ring: usize,
    pub orientations: usize,
    pub gaussian_sigmas: Vec<f64>,
}

impl Default for DaisyConfig {
    fn default() -> Self {
        DaisyConfig {
            step: 25,
            radius: 24,
            rings: 3,
            histograms_per_ring: 8,
            orientations: 8,
            gaussian_sigmas: vec![2.5, 5.0, 7.5],
        }
    }
}

/// Gaussian support of the descriptor smoothing, in standard deviations.
const DAISY_TRUNCATE: f64 = 3.0;
const NORM_GUARD: f64 = 1e-12;

impl DaisyConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("daisy: {m}")));
        if self.step < 1 {
            return fail("step must be at least 1");
        }
        if self.rings < 1 || self.histograms_per_ring < 1 || self.orientations < 1 {
            return fail("rings, histograms_per_ring and orientations must be at least 1");
        }
        if self.radius < self.rings {
            return fail("radius must be at least the ring count");
        }
        if self.gaussian_sigmas.len() != self.rings || self.gaussian_sigmas.iter().any(|s| !(*s > 0.0)) {
            return fail("need one positive gaussian sigma per ring");
        }
        Ok(())
    }

    /// Values per keypoint.
    pub fn descriptor_len(&self) -> usize {
        (self.rings * self.histograms_per_ring + 1) * self.orientations
    }

    /// Keypoint centers `(row, col)` in row-major order.
    pub fn keypoints(&self, rows: usize, cols: usize) -> Vec<(usize, usize)> {
        let axis = |n: usize| -> Vec<usize> {
            if n < 2 * self.radius + 1 {
                return Vec::new();
            }
            (self.radius..=n - self.radius - 1).step_by(self.step).collect()
        };
        let (rs, cs) = (axis(rows), axis(cols));
        rs.iter().flat_map(|&r| cs.iter().map(move |&c| (r, c))).collect()
    }

    /// Length of a full feature vector for an image of this shape.
    pub fn feature_len(&self, rows: usize, cols: usize) -> usize {
        self.keypoints(rows, cols).len() * self.descriptor_len() + 1
    }

    /// Rounded `(drow, dcol)` offsets of every pooling point, center first.
    fn sample_offsets(&self) -> Vec<(usize, isize, isize)> {
        let mut out = vec![(0usize, 0isize, 0isize)];
        for j in 1..=self.rings {
            let rad = self.radius as f64 * j as f64 / self.rings as f64;
            for k in 0..self.histograms_per_ring {
                let a = std::f64::consts::TAU * k as f64 / self.histograms_per_ring as f64;
                out.push((j - 1, (rad * a.sin()).round() as isize, (rad * a.cos()).round() as isize));
            }
        }
        out
    }
}

/// `(n - p + 1) / n`: 1 for the first slice, decreasing by `1/n` per slice.
pub fn inverse_position_index(p: usize, n: usize) -> Result<f64> {
    if p < 1 || p > n {
        return Err(Error::OutOfRange { p, n });
    }
    Ok((n - p + 1) as f64 / n as f64)
}

/// Half-wave rectified directional derivatives, interleaved per pixel:
/// `maps[(r * cols + c) * o + k]` for orientation `k`.
fn orientation_maps<T: Real>(img: &Grid<T>, orientations: usize) -> Vec<T> {
    let (gr, gc) = central_gradient(img);
    let dirs: Vec<(T, T)> = (0..orientations)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / orientations as f64;
            (T::lit(a.cos()), T::lit(a.sin()))
        })
        .collect();
    let mut maps = Vec::with_capacity(img.len() * orientations);
    for (&dr, &dc) in gr.as_slice().iter().zip(gc.as_slice()) {
        for &(cos, sin) in &dirs {
            maps.push((dc * cos + dr * sin).max(T::zero()));
        }
    }
    maps
}

/// Gaussian-smoothed orientation histogram at one pixel (replicated border).
fn pooled_histogram<T: Real>(
    maps: &[T],
    shape: (usize, usize),
    orientations: usize,
    taps: &[T],
    at: (isize, isize),
    out: &mut [T],
) {
    let (rows, cols) = shape;
    let half = (taps.len() / 2) as isize;
    out.iter_mut().for_each(|v| *v = T::zero());
    let mut row_acc = vec![T::zero(); orientations];
    for (i, &wr) in taps.iter().enumerate() {
        let r = (at.0 + i as isize - half).clamp(0, rows as isize - 1) as usize;
        row_acc.iter_mut().for_each(|v| *v = T::zero());
        for (j, &wc) in taps.iter().enumerate() {
            let c = (at.1 + j as isize - half).clamp(0, cols as isize - 1) as usize;
            let base = (r * cols + c) * orientations;
            for (acc, &g) in row_acc.iter_mut().zip(&maps[base..base + orientations]) {
                *acc = *acc + wc * g;
            }
        }
        for (o, &a) in out.iter_mut().zip(&row_acc) {
            *o = *o + wr * a;
        }
    }
}

fn l2_normalize<T: Real>(v: &mut [T]) {
    let norm = v.iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    if norm < T::lit(NORM_GUARD) {
        v.iter_mut().for_each(|x| *x = T::zero());
    } else {
        v.iter_mut().for_each(|x| *x = *x / norm);
    }
}

/// Dense DAISY descriptors, one per keypoint in row-major keypoint order.
pub fn compute_daisy<T: Real>(s: &SliceImage<T>, cfg: &DaisyConfig) -> Result<Vec<Vec<T>>> {
    cfg.validate()?;
    let (rows, cols) = s.shape();
    let keypoints = cfg.keypoints(rows, cols);
    if keypoints.is_empty() {
        return Err(Error::ImageTooSmall { rows, cols });
    }
    let o = cfg.orientations;
    let maps = orientation_maps(&s.pixels, o);
    let kernels: Vec<Vec<T>> = cfg
        .gaussian_sigmas
        .iter()
        .map(|&sg| gaussian_kernel(T::lit(sg), T::lit(DAISY_TRUNCATE)))
        .collect();
    let offsets = cfg.sample_offsets();
    let descriptors = keypoints
        .iter()
        .map(|&(r, c)| {
            let mut d = vec![T::zero(); cfg.descriptor_len()];
            for (h, &(ring, dr, dc)) in offsets.iter().enumerate() {
                let hist = &mut d[h * o..(h + 1) * o];
                pooled_histogram(&maps, (rows, cols), o, &kernels[ring], (r as isize + dr, c as isize + dc), hist);
                l2_normalize(hist);
            }
            l2_normalize(&mut d);
            d
        })
        .collect();
    Ok(descriptors)
}

/// Flattened descriptors with the inverse position index appended last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T = f64> {
    pub values: Vec<T>,
    pub label: Option<SliceClass>,
    pub case_id: String,
    pub p: usize,
    pub n: usize,
}

impl<T: Real> FeatureVector<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn ipi(&self) -> T {
        *self.values.last().expect("feature vectors are never empty")
    }
}

pub fn build_feature_vector<T: Real>(s: &SliceImage<T>, cfg: &DaisyConfig) -> Result<FeatureVector<T>> {
    let ipi = inverse_position_index(s.p, s.n)?;
    let descriptors = compute_daisy(s, cfg)?;
    let mut values: Vec<T> = descriptors.into_iter().flatten().collect();
    values.push(T::lit(ipi));
    Ok(FeatureVector {
        values,
        label: None,
        case_id: s.case_id.clone(),
        p: s.p,
        n: s.n,
    })
}

/// Writes feature vectors as CSV: `case_id,p,n,f0..f{d-1},label`.
pub fn write_features_csv<T: Real, W: Write>(w: W, rows: &[FeatureVector<T>]) -> Result<()> {
    let dim = rows.first().map(|f| f.dim()).unwrap_or(0);
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["case_id".to_string(), "p".into(), "n".into()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    header.push("label".into());
    out.write_record(&header).map_err(csv_err)?;
    for f in rows {
        if f.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: f.dim(),
            });
        }
        let mut rec = vec![f.case_id.clone(), f.p.to_string(), f.n.to_string()];
        rec.extend(f.values.iter().map(|v| v.to_string()));
        rec.push(f.label.map(|l| l.token().to_string()).unwrap_or_default());
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

pub fn read_features_csv<T: Real, R: Read>(r: R) -> Result<Vec<FeatureVector<T>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let width = rdr.headers().map_err(csv_err)?.len();
    if width < 5 {
        return Err(Error::Parse("feature CSV needs case_id, p, n, values and label columns".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer {:?} in feature CSV", &rec[i])))
        };
        let values = (3..width - 1)
            .map(|i| {
                rec[i]
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| Error::Parse(format!("bad value {:?} in feature CSV", &rec[i])))
            })
            .collect::<Result<Vec<T>>>()?;
        let label = match rec[width - 1].trim() {
            "" => None,
            s => Some(s.parse()?),
        };
        out.push(FeatureVector {
            values,
            label,
            case_id: rec[0].to_string(),
            p: num(1)?,
            n: num(2)?,
        });
    }
    Ok(out)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}
