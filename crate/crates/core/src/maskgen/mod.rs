//! Seed-mask generation for the contour solver.
//!
//! The slice is brightness-normalized, thresholded at a few upper quantiles,
//! and every connected component of plausible size is scored by how round
//! it is and how close it sits to the image centre and to the previous
//! slice's choice. The winner is eroded into a seed.

mod regions;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use regions::{connected_components, largest_component, props_of, region_properties, RegionProps};

use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::scalar::Real;
use crate::volume::{write_pgm8, SliceImage};

/// Mean-intensity floor below which no gain can be derived.
pub const ZERO_INTENSITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskgenConfig {
    /// Offsets tried in order.
    pub betas: Vec<f64>,
    /// Threshold quantiles of the adjusted slice.
    pub quantiles: Vec<f64>,
    pub min_area: usize,
    pub max_area: usize,
    pub w_circularity: f64,
    pub w_center: f64,
    pub w_prev: f64,
    /// Distinct candidates per slice kept for the first-three-slice search.
    pub top_k: usize,
    /// Largest allowed centroid distance between any two of the first three masks.
    pub max_pair_distance: f64,
}

impl Default for MaskgenConfig {
    fn default() -> Self {
        MaskgenConfig {
            betas: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            quantiles: vec![0.80, 0.85, 0.90, 0.95],
            min_area: 30,
            max_area: 4000,
            w_circularity: 1.0,
            w_center: 2.0,
            w_prev: 3.0,
            top_k: 5,
            max_pair_distance: 20.0,
        }
    }
}

impl MaskgenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.quantiles.is_empty() {
            return Err(Error::Config("maskgen: betas and quantiles must be nonempty".into()));
        }
        if self.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Config("maskgen: quantiles must lie in [0, 1]".into()));
        }
        if self.min_area < 1 || self.min_area > self.max_area {
            return Err(Error::Config("maskgen: need 1 <= min_area <= max_area".into()));
        }
        if self.top_k < 1 {
            return Err(Error::Config("maskgen: top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// `s * alpha + beta` with `alpha = 100 / (2 * mean)`, before clamping.
/// The result has mean `50 + beta`.
pub fn adjust_intensity_unclamped<T: Real>(s: &SliceImage<T>, beta: T) -> Result<SliceImage<T>> {
    let x = s.mean();
    if !(x.as_f64() > ZERO_INTENSITY_TOL) {
        return Err(Error::ZeroIntensity(x.as_f64()));
    }
    let alpha = T::lit(100.0) / (T::lit(2.0) * x);
    Ok(SliceImage {
        pixels: s.pixels.map(|v| v * alpha + beta),
        ..s.clone()
    })
}

/// [`adjust_intensity_unclamped`] clamped to `[0, 255]`.
pub fn adjust_intensity<T: Real>(s: &SliceImage<T>, beta: T) -> Result<SliceImage<T>> {
    let mut out = adjust_intensity_unclamped(s, beta)?;
    let hi = T::lit(255.0);
    out.pixels = out.pixels.map(|v| v.max(T::zero()).min(hi));
    Ok(out)
}

/// Linear-interpolated quantile of ascending `sorted`.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A scored component.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub mask: BinaryMask,
    pub props: RegionProps,
    pub score: f64,
    pub beta: f64,
    pub quantile: f64,
}

/// Round, central and close to `prev` scores highest.
pub fn candidate_score(props: &RegionProps, shape: (usize, usize), prev: Option<(f64, f64)>, cfg: &MaskgenConfig) -> f64 {
    let (rows, cols) = (shape.0 as f64, shape.1 as f64);
    let diag = rows.hypot(cols);
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let center = ((rows - 1.0) / 2.0, (cols - 1.0) / 2.0);
    let mut score = cfg.w_circularity * props.circularity - cfg.w_center * dist(props.centroid, center) / diag;
    if let Some(p) = prev {
        score -= cfg.w_prev * dist(props.centroid, p) / diag;
    }
    score
}

/// Every distinct gated component over the whole beta and threshold sweep,
/// best first. Ties keep sweep order. A slice whose mean is zero has none.
pub fn lv_candidates<T: Real>(s: &SliceImage<T>, prev: Option<(f64, f64)>, cfg: &MaskgenConfig) -> Vec<Candidate> {
    let (rows, cols) = s.shape();
    let mut out: Vec<Candidate> = Vec::new();
    for &beta in &cfg.betas {
        let Ok(adj) = adjust_intensity(s, T::lit(beta)) else {
            return Vec::new();
        };
        let vals: Vec<f64> = adj.pixels.as_slice().iter().map(|v| v.as_f64()).collect();
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        for &q in &cfg.quantiles {
            let t = quantile_sorted(&sorted, q);
            let bin = BinaryMask::from_vec(rows, cols, vals.iter().map(|&v| v >= t).collect());
            for comp in connected_components(&bin) {
                if comp.len() < cfg.min_area || comp.len() > cfg.max_area {
                    continue;
                }
                let mask = BinaryMask::from_pixels(rows, cols, &comp);
                if out.iter().any(|c| c.props.area == comp.len() && c.mask == mask) {
                    continue;
                }
                let props = props_of(&bin, &comp);
                let score = candidate_score(&props, (rows, cols), prev, cfg);
                out.push(Candidate {
                    mask,
                    props,
                    score,
                    beta,
                    quantile: q,
                });
            }
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Best candidate, or `None` when nothing passes the area gate.
pub fn select_lv_mask<T: Real>(s: &SliceImage<T>, prev: Option<(f64, f64)>, cfg: &MaskgenConfig) -> Option<Candidate> {
    lv_candidates(s, prev, cfg).into_iter().next()
}

/// Seed masks for every slice of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSelection {
    /// `None` marks an undetected LV.
    pub masks: Vec<Option<Candidate>>,
    /// The first three slices had no consistent triple and were chosen
    /// independently.
    pub triple_fallback: bool,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Jointly chooses masks for the first three slices: among each slice's
/// top candidates, the triple with the smallest summed pairwise centroid
/// distance, every pair within `max_pair_distance`. `None` if no such
/// triple exists.
pub fn consistent_triple<T: Real>(first: &[SliceImage<T>], cfg: &MaskgenConfig) -> Option<[Candidate; 3]> {
    if first.len() < 3 {
        return None;
    }
    let tops: Vec<Vec<Candidate>> = first[..3]
        .iter()
        .map(|s| lv_candidates(s, None, cfg).into_iter().take(cfg.top_k).collect())
        .collect();
    let mut best: Option<(f64, f64, [usize; 3])> = None;
    for (i, a) in tops[0].iter().enumerate() {
        for (j, b) in tops[1].iter().enumerate() {
            let ab = dist(a.props.centroid, b.props.centroid);
            if ab > cfg.max_pair_distance {
                continue;
            }
            for (k, c) in tops[2].iter().enumerate() {
                let (ac, bc) = (dist(a.props.centroid, c.props.centroid), dist(b.props.centroid, c.props.centroid));
                if ac > cfg.max_pair_distance || bc > cfg.max_pair_distance {
                    continue;
                }
                let total = ab + ac + bc;
                let score = a.score + b.score + c.score;
                let better = match best {
                    None => true,
                    Some((d, s, _)) => total < d || (total == d && score > s),
                };
                if better {
                    best = Some((total, score, [i, j, k]));
                }
            }
        }
    }
    best.map(|(_, _, [i, j, k])| [tops[0][i].clone(), tops[1][j].clone(), tops[2][k].clone()])
}

/// Masks for every slice in order. The first three come from
/// [`consistent_triple`] (or independent selection when it fails); each later
/// slice uses the last detected centroid as its sequential prior.
pub fn sequential_seed_masks<T: Real>(slices: &[SliceImage<T>], cfg: &MaskgenConfig) -> SeedSelection {
    let mut masks: Vec<Option<Candidate>> = Vec::with_capacity(slices.len());
    let mut triple_fallback = false;
    let mut start = 0;
    if slices.len() >= 3 {
        match consistent_triple(slices, cfg) {
            Some(t) => masks.extend(t.map(Some)),
            None => {
                triple_fallback = true;
                masks.extend(slices[..3].iter().map(|s| select_lv_mask(s, None, cfg)));
            }
        }
        start = 3;
    }
    let mut prev = masks.iter().rev().flatten().next().map(|c| c.props.centroid);
    for s in &slices[start..] {
        let c = select_lv_mask(s, prev, cfg);
        if let Some(c) = &c {
            prev = Some(c.props.centroid);
        }
        masks.push(c);
    }
    SeedSelection { masks, triple_fallback }
}

/// When erosion stops. Erosion halts at the first mask satisfying either
/// bound, and never produces an empty mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkRule {
    /// Stop once `area <= fraction * original_area`. Zero disables.
    pub fraction: f64,
    /// Stop once `area < min_area`.
    pub min_area: Option<usize>,
}

impl ShrinkRule {
    pub fn for_class(cls: SliceClass) -> Self {
        match cls {
            SliceClass::Basal | SliceClass::MidVentricle => ShrinkRule {
                fraction: 0.5,
                min_area: None,
            },
            SliceClass::Apical => ShrinkRule {
                fraction: 0.0,
                min_area: Some(120),
            },
        }
    }

    /// Seed rule used by the default parameter registry. Basal and mid
    /// seeds are not eroded: at the published step size the contour moves
    /// roughly one pixel per hundred steps, so an eroded seed cannot grow
    /// back to the cavity wall within the iteration budget.
    pub fn seed_default(cls: SliceClass) -> Self {
        match cls {
            SliceClass::Apical => Self::for_class(cls),
            _ => ShrinkRule {
                fraction: 1.0,
                min_area: None,
            },
        }
    }
}

/// 3x3 erosion; pixels outside the grid count as background.
pub fn erode(m: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(m.rows(), m.cols(), |r, c| {
        (-1..=1).all(|dr| (-1..=1).all(|dc| m.get_or_false(r as isize + dr, c as isize + dc)))
    })
}

pub fn shrink_mask(m: &BinaryMask, rule: &ShrinkRule) -> Result<BinaryMask> {
    if m.is_empty() {
        return Err(Error::EmptyMask);
    }
    let original = m.count() as f64;
    let done = |area: usize| {
        (rule.fraction > 0.0 && area as f64 <= rule.fraction * original) || rule.min_area.is_some_and(|a| area < a)
    };
    let mut cur = m.clone();
    while !done(cur.count()) {
        let next = erode(&cur);
        if next.is_empty() {
            break;
        }
        cur = next;
    }
    Ok(cur)
}

/// 8-bit PGM with foreground at 255.
pub fn write_mask_pgm(path: &Path, m: &BinaryMask) -> Result<()> {
    let g = Grid::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect());
    write_pgm8(path, &g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slice(g: Grid<f64>) -> SliceImage<f64> {
        SliceImage::new(g, 1, 1, "t")
    }

    #[test]
    fn gain_examples() {
        let s = slice(Grid::from_vec(1, 4, vec![20.0, 40.0, 60.0, 80.0]));
        assert_eq!(adjust_intensity(&s, 0.0).unwrap().pixels, s.pixels);
        let s = slice(Grid::from_vec(1, 2, vec![50.0, 150.0]));
        let a = adjust_intensity_unclamped(&s, 0.0).unwrap();
        assert_eq!(a.pixels.as_slice(), &[25.0, 75.0]);
        let s = slice(Grid::from_vec(1, 2, vec![10.0, 40.0]));
        let a = adjust_intensity_unclamped(&s, 10.0).unwrap();
        assert_eq!(a.pixels.as_slice(), &[30.0, 90.0]);
        assert!(matches!(adjust_intensity(&slice(Grid::filled(2, 2, 0.0)), 0.0), Err(Error::ZeroIntensity(_))));
    }

    #[test]
    fn clamping() {
        let s = slice(Grid::from_vec(1, 2, vec![1.0, 199.0]));
        let a = adjust_intensity(&s, 40.0).unwrap();
        assert_eq!(a.pixels.as_slice(), &[40.5, 139.5]);
        let s = slice(Grid::from_vec(1, 3, vec![0.0, 0.0, 255.0]));
        let a = adjust_intensity(&s, 0.0).unwrap();
        assert!((a.pixels.get(0, 2) - 150.0).abs() < 1e-12);
        let s = slice(Grid::from_vec(1, 4, vec![0.0, 0.0, 0.0, 255.0]));
        assert!((adjust_intensity(&s, 40.0).unwrap().pixels.get(0, 3) - 240.0).abs() < 1e-12);
        let s = slice(Grid::from_vec(1, 5, vec![0.0, 0.0, 0.0, 0.0, 255.0]));
        assert_eq!(adjust_intensity(&s, 40.0).unwrap().pixels.get(0, 4), 255.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 10.0, 20.0, 30.0, 40.0];
        assert_eq!(quantile_sorted(&v, 0.0), 0.0);
        assert_eq!(quantile_sorted(&v, 1.0), 40.0);
        assert_eq!(quantile_sorted(&v, 0.8), 32.0);
        assert_eq!(quantile_sorted(&[7.0], 0.9), 7.0);
    }

    fn disc_and_corner() -> SliceImage<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        slice(Grid::from_fn(100, 100, |r, c| {
            let (dr, dc) = (r as f64 - 49.5, c as f64 - 49.5);
            if dr * dr + dc * dc <= 64.0 || (r < 12 && c < 12) {
                200.0
            } else {
                // Faint noise so the upper quantiles fall off the floor.
                rng.gen_range(15.0..25.0)
            }
        }))
    }

    #[test]
    fn central_disc_beats_corner_square() {
        let s = disc_and_corner();
        let cfg = MaskgenConfig::default();
        let cands = lv_candidates(&s, None, &cfg);
        let disc = cands.iter().find(|c| c.props.bbox.0 > 30).unwrap();
        let square = cands
            .iter()
            .find(|c| dist(c.props.centroid, (5.5, 5.5)) < 1.0)
            .unwrap();
        // The square is rounder under the edge-count perimeter; centrality wins.
        assert!(square.props.circularity > disc.props.circularity);
        assert!(disc.score > square.score);
        let best = select_lv_mask(&s, None, &cfg).unwrap();
        assert!(best.props.bbox.0 > 30);
        let (r, c) = best.props.centroid;
        assert!((r - 49.5).abs() < 0.5 && (c - 49.5).abs() < 0.5);
    }

    #[test]
    fn nothing_in_the_gate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let noise = slice(Grid::from_fn(60, 60, |_, _| rng.gen_range(1.0..255.0)));
        let cfg = MaskgenConfig::default();
        assert!(select_lv_mask(&noise, None, &cfg).is_none());
        assert!(select_lv_mask(&slice(Grid::filled(20, 20, 0.0)), None, &cfg).is_none());
    }

    #[test]
    fn score_falls_with_distance_from_center() {
        let cfg = MaskgenConfig::default();
        let mut p = props_of(&BinaryMask::full(1, 1), &[(0, 0)]);
        let mut last = f64::INFINITY;
        for d in 0..10 {
            p.centroid = (50.0 + d as f64, 50.0);
            let s = candidate_score(&p, (101, 101), Some((50.0, 50.0)), &cfg);
            assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn identical_slices_give_zero_drift_triple() {
        let s = disc_and_corner();
        let slices = vec![s.clone(), s.clone(), s];
        let t = consistent_triple(&slices, &MaskgenConfig::default()).unwrap();
        assert_eq!(t[0].mask, t[1].mask);
        assert_eq!(t[1].mask, t[2].mask);
    }

    #[test]
    fn triple_falls_back_when_a_slice_is_blank() {
        let s = disc_and_corner();
        let blank = slice(Grid::filled(100, 100, 0.0));
        let sel = sequential_seed_masks(&[s.clone(), blank, s.clone(), s], &MaskgenConfig::default());
        assert!(sel.triple_fallback);
        assert!(sel.masks[1].is_none());
        assert!(sel.masks[0].is_some() && sel.masks[3].is_some());
    }

    #[test]
    fn erosion_of_a_square() {
        let m = BinaryMask::from_fn(7, 7, |r, c| (1..6).contains(&r) && (1..6).contains(&c));
        let e = erode(&m);
        assert_eq!(e, BinaryMask::from_fn(7, 7, |r, c| (2..5).contains(&r) && (2..5).contains(&c)));
        // Touching the border erodes from that side too.
        assert_eq!(erode(&BinaryMask::full(3, 3)).pixels(), vec![(1, 1)]);
    }

    #[test]
    fn shrink_rules() {
        let small = BinaryMask::from_fn(20, 20, |r, c| r < 10 && c < 10);
        let apical = ShrinkRule::for_class(SliceClass::Apical);
        assert_eq!(shrink_mask(&small, &apical).unwrap(), small);

        let disc = BinaryMask::from_fn(80, 80, |r, c| {
            let (dr, dc) = (r as f64 - 40.0, c as f64 - 40.0);
            dr * dr + dc * dc <= 400.0
        });
        let out = shrink_mask(&disc, &ShrinkRule::for_class(SliceClass::MidVentricle)).unwrap();
        let ratio = out.count() as f64 / disc.count() as f64;
        assert!(ratio > 0.35 && ratio <= 0.5, "{ratio}");
        assert!(out.is_subset_of(&disc));

        let big_apex = shrink_mask(&disc, &apical).unwrap();
        assert!(big_apex.count() < 120 && !big_apex.is_empty());

        let line = BinaryMask::from_fn(5, 5, |r, _| r == 2);
        assert_eq!(shrink_mask(&line, &ShrinkRule::for_class(SliceClass::Basal)).unwrap(), line);
        assert!(matches!(shrink_mask(&BinaryMask::new(3, 3), &apical), Err(Error::EmptyMask)));
    }
}
