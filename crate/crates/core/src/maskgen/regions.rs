//! Connected components and their shape descriptors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

const NEIGHBOURS_8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionProps {
    pub area: usize,
    /// `(row, col)`.
    pub centroid: (f64, f64),
    /// Foreground/background pixel-edge crossings; the image border counts.
    pub perimeter: usize,
    /// `4 pi A / P^2`.
    pub circularity: f64,
    pub eccentricity: f64,
    /// `(r0, c0, r1, c1)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
}

/// 8-connected components, each a list of pixels in raster order.
/// Components are ordered by their first pixel in raster order.
pub fn connected_components(m: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (rows, cols) = m.shape();
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if seen[start] || !m.as_slice()[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut comp = Vec::new();
        while let Some(i) = stack.pop() {
            let (r, c) = (i / cols, i % cols);
            comp.push((r, c));
            for (dr, dc) in NEIGHBOURS_8 {
                let (nr, nc) = (r as isize + dr, c as isize + dc);
                if m.get_or_false(nr, nc) {
                    let j = nr as usize * cols + nc as usize;
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Properties of one component given as its pixels; `m` supplies the
/// background for the perimeter count.
pub fn props_of(m: &BinaryMask, pixels: &[(usize, usize)]) -> RegionProps {
    let area = pixels.len();
    let n = area as f64;
    let (mut sr, mut sc) = (0.0, 0.0);
    let mut bbox = (usize::MAX, usize::MAX, 0, 0);
    let mut perimeter = 0;
    for &(r, c) in pixels {
        sr += r as f64;
        sc += c as f64;
        bbox = (bbox.0.min(r), bbox.1.min(c), bbox.2.max(r), bbox.3.max(c));
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            if !m.get_or_false(r as isize + dr, c as isize + dc) {
                perimeter += 1;
            }
        }
    }
    let centroid = (sr / n, sc / n);
    let (mut vrr, mut vcc, mut vrc) = (0.0, 0.0, 0.0);
    for &(r, c) in pixels {
        let (dr, dc) = (r as f64 - centroid.0, c as f64 - centroid.1);
        vrr += dr * dr;
        vcc += dc * dc;
        vrc += dr * dc;
    }
    // Each pixel is a unit square, whose own second moment is 1/12 per axis.
    // This keeps both eigenvalues positive, so eccentricity stays below 1.
    let (a, b, c) = (vrr / n + 1.0 / 12.0, vcc / n + 1.0 / 12.0, vrc / n);
    let half_tr = 0.5 * (a + b);
    let disc = (0.25 * (a - b) * (a - b) + c * c).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    let eccentricity = (1.0 - l2 / l1).max(0.0).sqrt();
    let p = perimeter as f64;
    RegionProps {
        area,
        centroid,
        perimeter,
        circularity: 4.0 * std::f64::consts::PI * n / (p * p),
        eccentricity,
        bbox,
    }
}

/// One [`RegionProps`] per 8-connected component.
pub fn region_properties(m: &BinaryMask) -> Result<Vec<RegionProps>> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(connected_components(m).iter().map(|c| props_of(m, c)).collect())
}

/// Largest 8-connected component; ties go to the one found first in raster
/// order. An empty mask is returned unchanged.
pub fn largest_component(m: &BinaryMask) -> BinaryMask {
    let comps = connected_components(m);
    let mut best: Option<&Vec<(usize, usize)>> = None;
    for c in &comps {
        if best.is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    match best {
        Some(c) => BinaryMask::from_pixels(m.rows(), m.cols(), c),
        None => m.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filled_square() {
        let m = BinaryMask::from_fn(7, 7, |r, c| (2..5).contains(&r) && (2..5).contains(&c));
        let p = region_properties(&m).unwrap();
        assert_eq!(p.len(), 1);
        let p = &p[0];
        assert_eq!((p.area, p.perimeter), (9, 12));
        assert!((p.circularity - 4.0 * std::f64::consts::PI * 9.0 / 144.0).abs() < 1e-12);
        assert!(p.eccentricity.abs() < 1e-12);
        assert_eq!(p.centroid, (3.0, 3.0));
        assert_eq!(p.bbox, (2, 2, 4, 4));
    }

    #[test]
    fn single_and_disjoint_pixels() {
        let one = BinaryMask::from_pixels(5, 5, &[(1, 3)]);
        let p = &region_properties(&one).unwrap()[0];
        assert_eq!((p.area, p.perimeter, p.centroid), (1, 4, (1.0, 3.0)));
        let two = BinaryMask::from_pixels(5, 5, &[(0, 0), (3, 3)]);
        assert_eq!(region_properties(&two).unwrap().len(), 2);
        let diag = BinaryMask::from_pixels(5, 5, &[(0, 0), (1, 1)]);
        assert_eq!(region_properties(&diag).unwrap().len(), 1);
    }

    #[test]
    fn border_counts_toward_perimeter() {
        let m = BinaryMask::full(2, 3);
        assert_eq!(region_properties(&m).unwrap()[0].perimeter, 10);
    }

    #[test]
    fn elongated_shapes_are_eccentric() {
        let bar = BinaryMask::from_fn(3, 20, |r, _| r == 1);
        let e = region_properties(&bar).unwrap()[0].eccentricity;
        assert!(e > 0.99 && e < 1.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(region_properties(&BinaryMask::new(3, 3)), Err(Error::EmptyMask)));
    }

    #[test]
    fn largest_component_is_kept() {
        let m = BinaryMask::from_pixels(6, 6, &[(0, 0), (3, 3), (3, 4), (4, 4)]);
        assert_eq!(largest_component(&m).count(), 3);
        let tie = BinaryMask::from_pixels(6, 6, &[(0, 0), (5, 5)]);
        assert_eq!(largest_component(&tie).pixels(), vec![(0, 0)]);
    }
}
