//! Separable Gaussian filtering and finite-difference operators.

use crate::grid::Grid;
use crate::scalar::Real;

/// How samples outside the grid are treated by a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// Outside samples are zero; sums run over in-grid samples only.
    Zero,
    /// Outside samples repeat the nearest edge sample.
    Replicate,
}

/// Normalized 1-D Gaussian taps with half-width `ceil(truncate * sigma)`.
pub fn gaussian_kernel<T: Real>(sigma: T, truncate: T) -> Vec<T> {
    let half = (truncate * sigma).ceil().to_usize().unwrap_or(0);
    let two_s2 = T::lit(2.0) * sigma * sigma;
    let mut taps: Vec<T> = (0..=2 * half)
        .map(|i| {
            let d = T::from_count(i) - T::from_count(half);
            (-(d * d) / two_s2).exp()
        })
        .collect();
    let total: T = taps.iter().copied().sum();
    for t in &mut taps {
        *t = *t / total;
    }
    taps
}

/// Convolves `src` with the symmetric separable kernel `taps x taps`.
///
/// Rows are filtered first, then columns; the summation order is fixed so
/// results are bitwise reproducible.
pub fn convolve_separable<T: Real>(src: &Grid<T>, taps: &[T], border: Border) -> Grid<T> {
    let (rows, cols) = src.shape();
    let half = taps.len() / 2;
    let mut tmp = vec![T::zero(); rows * cols];
    let mut padded = vec![T::zero(); cols + 2 * half];
    for r in 0..rows {
        let row = src.row(r);
        padded[half..half + cols].copy_from_slice(row);
        for i in 0..half {
            let (left, right) = match border {
                Border::Zero => (T::zero(), T::zero()),
                Border::Replicate => (row[0], row[cols - 1]),
            };
            padded[i] = left;
            padded[half + cols + i] = right;
        }
        let out = &mut tmp[r * cols..(r + 1) * cols];
        for (k, &w) in taps.iter().enumerate() {
            for (o, &v) in out.iter_mut().zip(&padded[k..k + cols]) {
                *o = *o + w * v;
            }
        }
    }

    let mut out = vec![T::zero(); rows * cols];
    for r in 0..rows {
        let dst = &mut out[r * cols..(r + 1) * cols];
        for (k, &w) in taps.iter().enumerate() {
            let sr = r as isize + k as isize - half as isize;
            let sr = if sr < 0 || sr >= rows as isize {
                match border {
                    Border::Zero => continue,
                    Border::Replicate => sr.clamp(0, rows as isize - 1) as usize,
                }
            } else {
                sr as usize
            };
            let srow = &tmp[sr * cols..(sr + 1) * cols];
            for (d, &s) in dst.iter_mut().zip(srow) {
                *d = *d + w * s;
            }
        }
    }
    Grid::from_vec(rows, cols, out)
}

/// Central-difference gradient `(d/drow, d/dcol)` with replicated border.
pub fn central_gradient<T: Real>(g: &Grid<T>) -> (Grid<T>, Grid<T>) {
    let (rows, cols) = g.shape();
    let half = T::lit(0.5);
    let mut gr = Grid::filled(rows, cols, T::zero());
    let mut gc = Grid::filled(rows, cols, T::zero());
    for r in 0..rows {
        let up = r.saturating_sub(1);
        let down = (r + 1).min(rows - 1);
        for c in 0..cols {
            let left = c.saturating_sub(1);
            let right = (c + 1).min(cols - 1);
            gr.set(r, c, (g.get(down, c) - g.get(up, c)) * half);
            gc.set(r, c, (g.get(r, right) - g.get(r, left)) * half);
        }
    }
    (gr, gc)
}

/// Five-point Laplacian with replicated border.
pub fn laplacian<T: Real>(g: &Grid<T>) -> Grid<T> {
    let (rows, cols) = g.shape();
    let four = T::lit(4.0);
    Grid::from_fn(rows, cols, |r, c| {
        let up = g.get(r.saturating_sub(1), c);
        let down = g.get((r + 1).min(rows - 1), c);
        let left = g.get(r, c.saturating_sub(1));
        let right = g.get(r, (c + 1).min(cols - 1));
        up + down + left + right - four * g.get(r, c)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k: Vec<f64> = gaussian_kernel(3.0, 4.0);
        assert_eq!(k.len(), 25);
        let s: f64 = k.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        for i in 0..k.len() {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn zero_border_matches_direct_sum() {
        let g = Grid::from_fn(7, 9, |r, c| ((r * 13 + c * 7) % 11) as f64);
        let k: Vec<f64> = gaussian_kernel(1.2, 3.0);
        let h = k.len() as isize / 2;
        let out = convolve_separable(&g, &k, Border::Zero);
        for r in 0..7isize {
            for c in 0..9isize {
                let mut s = 0.0;
                for dr in -h..=h {
                    for dc in -h..=h {
                        let (rr, cc) = (r + dr, c + dc);
                        if (0..7).contains(&rr) && (0..9).contains(&cc) {
                            s += k[(dr + h) as usize] * k[(dc + h) as usize] * g.get(rr as usize, cc as usize);
                        }
                    }
                }
                assert!((s - out.get(r as usize, c as usize)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn replicate_border_preserves_constants() {
        let g = Grid::filled(5, 6, 3.5f64);
        let out = convolve_separable(&g, &gaussian_kernel(2.0, 4.0), Border::Replicate);
        assert!(out.as_slice().iter().all(|v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn gradient_of_ramp() {
        let g = Grid::from_fn(4, 5, |r, c| 2.0 * r as f64 + 3.0 * c as f64);
        let (gr, gc) = central_gradient(&g);
        assert_eq!(gr.get(1, 2), 2.0);
        assert_eq!(gc.get(1, 2), 3.0);
        // one-sided half differences at the replicated border
        assert_eq!(gr.get(0, 0), 1.0);
        let lap = laplacian(&g);
        assert_eq!(lap.get(2, 2), 0.0);
    }
}
