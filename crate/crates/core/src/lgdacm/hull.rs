//! Convex hull of pixel centres, rasterized back onto the grid.

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

type P = (i64, i64);

fn cross(o: P, a: P, b: P) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Returns the strictly convex hull
/// counter-clockwise in `(row, col)` coordinates; collinear points are
/// dropped, so a segment comes back as its two endpoints.
pub(crate) fn hull_vertices(mut pts: Vec<P>) -> Vec<P> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<P> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<P> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn inside(hull: &[P], p: P) -> bool {
    match hull.len() {
        1 => p == hull[0],
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p) == 0
                && (a.0.min(b.0)..=a.0.max(b.0)).contains(&p.0)
                && (a.1.min(b.1)..=a.1.max(b.1)).contains(&p.1)
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0),
    }
}

/// Every pixel whose centre lies inside or on the convex hull of the
/// foreground pixel centres.
pub fn convex_hull_fill(m: &BinaryMask) -> Result<BinaryMask> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    let pts: Vec<P> = m.pixels().into_iter().map(|(r, c)| (r as i64, c as i64)).collect();
    let hull = hull_vertices(pts);
    let (r0, r1) = (hull.iter().map(|p| p.0).min().unwrap(), hull.iter().map(|p| p.0).max().unwrap());
    let (c0, c1) = (hull.iter().map(|p| p.1).min().unwrap(), hull.iter().map(|p| p.1).max().unwrap());
    let mut out = m.clone();
    for r in r0..=r1 {
        for c in c0..=c1 {
            if inside(&hull, (r, c)) {
                out.set(r as usize, c as usize, true);
            }
        }
    }
    Ok(out)
}
