//! Independent reference implementations shared by the integration tests.
//! Each one follows the definition directly and favours clarity over speed.

#![allow(dead_code)]

use lvseg::classifier::{DecisionTree, Node};
use lvseg::lgdacm::LgdParams;
use lvseg::{BinaryMask, Grid, SliceClass};
use rand::Rng;

pub fn random_mask<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(rows, cols, |_, _| rng.gen_bool(density))
}

/// Random mask with at least one foreground pixel.
pub fn random_nonempty_mask<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> BinaryMask {
    let mut m = random_mask(rng, rows, cols, density);
    if m.is_empty() {
        m.set(rng.gen_range(0..rows), rng.gen_range(0..cols), true);
    }
    m
}

/// Every mask on a `rows x cols` grid with between 1 and `max_on` pixels.
pub fn all_small_masks(rows: usize, cols: usize, max_on: u32) -> Vec<BinaryMask> {
    let n = rows * cols;
    assert!(n <= 32);
    (1u64..(1 << n))
        .filter(|b| b.count_ones() <= max_on)
        .map(|b| BinaryMask::from_fn(rows, cols, |r, c| b >> (r * cols + c) & 1 == 1))
        .collect()
}

// ---- boundary distances -------------------------------------------------

/// Foreground pixels with a 4-neighbour that is background or off-grid.
pub fn brute_boundary(m: &BinaryMask) -> Vec<(usize, usize)> {
    let (rows, cols) = m.shape();
    let on = |r: isize, c: isize| r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols && m.get(r as usize, c as usize);
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let (ri, ci) = (r as isize, c as isize);
            if m.get(r, c) && !(on(ri - 1, ci) && on(ri + 1, ci) && on(ri, ci - 1) && on(ri, ci + 1)) {
                out.push((r, c));
            }
        }
    }
    out
}

pub fn sq_dist(a: (usize, usize), b: (usize, usize)) -> u64 {
    let dr = a.0 as i64 - b.0 as i64;
    let dc = a.1 as i64 - b.1 as i64;
    (dr * dr + dc * dc) as u64
}

/// `(max, mean)` over `from` of the distance to the nearest point of `to`.
pub fn brute_directed(from: &[(usize, usize)], to: &[(usize, usize)]) -> (f64, f64) {
    let mut worst = 0.0f64;
    let mut sum = 0.0f64;
    for &a in from {
        let d = (to.iter().map(|&b| sq_dist(a, b)).min().unwrap() as f64).sqrt();
        worst = worst.max(d);
        sum += d;
    }
    (worst, sum / from.len() as f64)
}

/// `(hausdorff, mad, bde)` by all-pairs search.
pub fn brute_distances(a: &BinaryMask, b: &BinaryMask) -> (f64, f64, f64) {
    let (ba, bb) = (brute_boundary(a), brute_boundary(b));
    let (max_ab, mean_ab) = brute_directed(&ba, &bb);
    let (max_ba, mean_ba) = brute_directed(&bb, &ba);
    (max_ab.max(max_ba), 0.5 * (mean_ab + mean_ba), mean_ab)
}

// ---- convex hull ----------------------------------------------------------

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Hull membership by orientation tests: a pixel is inside when it lies in
/// the bounding box of the foreground and on the inner side of every line
/// through two foreground pixels that has all foreground on one side.
pub fn brute_hull(m: &BinaryMask) -> BinaryMask {
    let pts: Vec<(i64, i64)> = (0..m.rows())
        .flat_map(|r| (0..m.cols()).map(move |c| (r, c)))
        .filter(|&(r, c)| m.get(r, c))
        .map(|(r, c)| (r as i64, c as i64))
        .collect();
    let mut lines = Vec::new();
    for &a in &pts {
        for &b in &pts {
            if a != b && pts.iter().all(|&s| cross(a, b, s) >= 0) {
                lines.push((a, b));
            }
        }
    }
    let rmin = pts.iter().map(|p| p.0).min().unwrap();
    let rmax = pts.iter().map(|p| p.0).max().unwrap();
    let cmin = pts.iter().map(|p| p.1).min().unwrap();
    let cmax = pts.iter().map(|p| p.1).max().unwrap();
    BinaryMask::from_fn(m.rows(), m.cols(), |r, c| {
        let p = (r as i64, c as i64);
        (rmin..=rmax).contains(&p.0) && (cmin..=cmax).contains(&p.1) && lines.iter().all(|&(a, b)| cross(a, b, p) >= 0)
    })
}

// ---- local Gaussian fitting -------------------------------------------------

pub fn h_eps(z: f64, eps: f64) -> f64 {
    0.5 * (1.0 + 2.0 / std::f64::consts::PI * (z / eps).atan())
}

/// Unnormalized-then-normalized 1-D Gaussian weights, half-width `ceil(4 sigma)`.
pub fn window_1d(sigma: f64) -> Vec<f64> {
    let half = (4.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-half..=half).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Window weight between pixels `a` and `b`; zero beyond the support.
pub fn window(w: &[f64], a: (usize, usize), b: (usize, usize)) -> f64 {
    let half = (w.len() / 2) as i64;
    let dr = b.0 as i64 - a.0 as i64;
    let dc = b.1 as i64 - a.1 as i64;
    if dr.abs() > half || dc.abs() > half {
        return 0.0;
    }
    w[(dr + half) as usize] * w[(dc + half) as usize]
}

pub struct OracleStats {
    pub u: [Grid<f64>; 2],
    pub v: [Grid<f64>; 2],
}

/// Local means and floored variances of both regions by direct summation.
pub fn oracle_stats(img: &Grid<f64>, phi: &Grid<f64>, p: &LgdParams) -> OracleStats {
    let (rows, cols) = img.shape();
    let w = window_1d(p.kernel_sigma);
    let region = |inside: bool| {
        let mut u = Grid::filled(rows, cols, 0.0);
        let mut v = Grid::filled(rows, cols, 0.0);
        for yr in 0..rows {
            for yc in 0..cols {
                let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for xr in 0..rows {
                    for xc in 0..cols {
                        let h = h_eps(phi.get(xr, xc), p.epsilon);
                        let m = if inside { h } else { 1.0 - h };
                        let k = window(&w, (yr, yc), (xr, xc)) * m;
                        let i = img.get(xr, xc);
                        s0 += k;
                        s1 += k * i;
                        s2 += k * i * i;
                    }
                }
                let d = s0.max(1e-12);
                let mean = s1 / d;
                u.set(yr, yc, mean);
                v.set(yr, yc, (s2 / d - mean * mean).max(p.sigma_floor));
            }
        }
        (u, v)
    };
    let (u1, v1) = region(true);
    let (u2, v2) = region(false);
    OracleStats { u: [u1, u2], v: [v1, v2] }
}

/// `e_i(x) = sum_y w(y - x) [log sqrt(2 pi v_i(y)) + (u_i(y) - I(x))^2 / (2 v_i(y))]`.
pub fn oracle_energy_fields(img: &Grid<f64>, st: &OracleStats, p: &LgdParams) -> [Grid<f64>; 2] {
    let (rows, cols) = img.shape();
    let w = window_1d(p.kernel_sigma);
    let field = |k: usize| {
        Grid::from_fn(rows, cols, |xr, xc| {
            let i = img.get(xr, xc);
            let mut e = 0.0;
            for yr in 0..rows {
                for yc in 0..cols {
                    let (u, v) = (st.u[k].get(yr, yc), st.v[k].get(yr, yc));
                    e += window(&w, (yr, yc), (xr, xc))
                        * ((2.0 * std::f64::consts::PI * v).sqrt().ln() + (u - i) * (u - i) / (2.0 * v));
                }
            }
            e
        })
    };
    [field(0), field(1)]
}

fn gradient(g: &Grid<f64>, r: usize, c: usize) -> (f64, f64) {
    let (rows, cols) = g.shape();
    let dr = 0.5 * (g.get((r + 1).min(rows - 1), c) - g.get(r.saturating_sub(1), c));
    let dc = 0.5 * (g.get(r, (c + 1).min(cols - 1)) - g.get(r, c.saturating_sub(1)));
    (dr, dc)
}

/// Total energy: weighted data terms, `nu` times the length of `H(phi)`
/// and the `mu` distance penalty, with central differences throughout.
pub fn oracle_energy(img: &Grid<f64>, phi: &Grid<f64>, p: &LgdParams) -> f64 {
    let st = oracle_stats(img, phi, p);
    let [e1, e2] = oracle_energy_fields(img, &st, p);
    let (rows, cols) = img.shape();
    let h = Grid::from_fn(rows, cols, |r, c| h_eps(phi.get(r, c), p.epsilon));
    let mut total = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let m = h.get(r, c);
            total += p.lambda1 * m * e1.get(r, c) + p.lambda2 * (1.0 - m) * e2.get(r, c);
            let (hr, hc) = gradient(&h, r, c);
            total += p.nu * hr.hypot(hc);
            let (pr, pc) = gradient(phi, r, c);
            let g = pr.hypot(pc) - 1.0;
            total += p.mu * 0.5 * g * g;
        }
    }
    total
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---- CART -------------------------------------------------------------------

/// Greedy Gini CART grown by exhaustive enumeration of every feature and
/// every midpoint threshold, compared in floating point on the impurity
/// decrease. Ties keep the first candidate in (feature, threshold) order.
/// Returns the tree's predictions as a closure-friendly node list.
pub enum Cart {
    Leaf([usize; 3]),
    Split { feature: usize, threshold: f64, left: Box<Cart>, right: Box<Cart> },
}

fn gini_weighted(c: &[usize; 3]) -> f64 {
    let n: usize = c.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    n * (1.0 - c.iter().map(|&k| (k as f64 / n).powi(2)).sum::<f64>())
}

pub fn brute_cart(x: &[Vec<f64>], y: &[SliceClass], idx: &[usize]) -> Cart {
    let mut counts = [0usize; 3];
    for &i in idx {
        counts[y[i].index()] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() <= 1 || idx.len() < 2 {
        return Cart::Leaf(counts);
    }
    let dims = x[0].len();
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..dims {
        let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut l, mut r) = ([0usize; 3], [0usize; 3]);
            for &i in idx {
                if x[i][f] <= t {
                    l[y[i].index()] += 1;
                } else {
                    r[y[i].index()] += 1;
                }
            }
            let impurity = gini_weighted(&l) + gini_weighted(&r);
            // Strictly better by more than rounding noise.
            if best.is_none_or(|(b, _, _)| impurity < b - 1e-9) {
                best = Some((impurity, f, t));
            }
        }
    }
    let Some((_, f, t)) = best else { return Cart::Leaf(counts) };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
    Cart::Split { feature: f, threshold: t, left: Box::new(brute_cart(x, y, &l)), right: Box::new(brute_cart(x, y, &r)) }
}

/// Structural equality between the oracle tree and a grown tree.
pub fn same_tree(oracle: &Cart, tree: &DecisionTree<f64>, at: usize) -> bool {
    match (oracle, &tree.nodes[at]) {
        (Cart::Leaf(a), Node::Leaf { counts }) => a == counts,
        (Cart::Split { feature, threshold, left, right }, Node::Split { feature: f, threshold: t, left: l, right: r }) => {
            feature == f && threshold == t && same_tree(left, tree, *l) && same_tree(right, tree, *r)
        }
        _ => false,
    }
}
