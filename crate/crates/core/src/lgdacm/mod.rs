//! Local Gaussian distribution active contour with per-class parameters.

mod hull;
mod solver;

use serde::{Deserialize, Serialize};

pub use hull::convex_hull_fill;
pub use solver::{
    curvature, dirac, evolve_level_set, evolve_with_trace, heaviside, lgd_energy, local_energy_fields,
    local_gaussian_stats, LocalStats, DENOM_FLOOR, GRAD_FLOOR,
};

use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid};
use crate::maskgen::{largest_component, ShrinkRule};
use crate::scalar::Real;
use crate::volume::SliceImage;

/// How many solver steps to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum IterationRule {
    Fixed { count: usize },
    /// `clamp(round(k * sigma_local), min, max)`, where `sigma_local` is the
    /// intensity standard deviation in a disc of `radius` px around the
    /// seed centroid.
    Adaptive { k: f64, min: usize, max: usize, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgdParams {
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Length weight, on the 0..255 intensity scale.
    pub nu: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub kernel_sigma: f64,
    pub sigma_floor: f64,
    /// Binary-step height of the initial level set.
    pub init_height: f64,
    pub iterations: IterationRule,
    /// When set, the solver runs on the seed's bounding box grown by this
    /// many pixels instead of the whole slice.
    #[serde(default)]
    pub roi_margin: Option<usize>,
}

const SCALE2: f64 = 255.0 * 255.0;

impl LgdParams {
    fn base(lambda1: f64, lambda2: f64, nu_scaled: f64, iterations: IterationRule) -> Self {
        LgdParams {
            tau: 0.05,
            lambda1,
            lambda2,
            nu: nu_scaled * SCALE2,
            mu: 1.0,
            epsilon: 1.0,
            kernel_sigma: 3.0,
            sigma_floor: 1e-4 * SCALE2,
            init_height: 20.0,
            iterations,
            roi_margin: Some(32),
        }
    }

    /// Set A, tuned for basal slices.
    pub fn basal() -> Self {
        Self::base(3.0, 2.0, 0.0008, IterationRule::Fixed { count: 150 })
    }

    /// Set B, tuned for mid-ventricular slices.
    pub fn mid_ventricle() -> Self {
        Self::base(
            3.5,
            2.5,
            0.0005,
            IterationRule::Adaptive {
                k: 4.0,
                min: 20,
                max: 300,
                radius: 10.0,
            },
        )
    }

    /// Set C, tuned for apical slices.
    pub fn apical() -> Self {
        Self::base(1.75, 1.5, 0.0005, IterationRule::Fixed { count: 30 })
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("tau", self.tau),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("epsilon", self.epsilon),
            ("kernel_sigma", self.kernel_sigma),
            ("sigma_floor", self.sigma_floor),
            ("init_height", self.init_height),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("lgd: {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("nu", self.nu), ("mu", self.mu)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("lgd: {name} must be non-negative, got {v}")));
            }
        }
        if let IterationRule::Adaptive { min, max, radius, k } = self.iterations {
            if min > max || !(radius > 0.0) || !(k >= 0.0) {
                return Err(Error::Config("lgd: adaptive rule needs min <= max, radius > 0, k >= 0".into()));
            }
        }
        Ok(())
    }
}

/// A named parameter set plus the seed-shrinking rule used with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub name: String,
    pub params: LgdParams,
    pub shrink: ShrinkRule,
}

/// Solver parameters for each slice class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRegistry {
    pub basal: RegistryEntry,
    pub mid: RegistryEntry,
    pub apical: RegistryEntry,
}

impl Default for ParameterRegistry {
    fn default() -> Self {
        let entry = |name: &str, params, cls| RegistryEntry {
            name: name.into(),
            params,
            shrink: ShrinkRule::seed_default(cls),
        };
        ParameterRegistry {
            basal: entry("A", LgdParams::basal(), SliceClass::Basal),
            mid: entry("B", LgdParams::mid_ventricle(), SliceClass::MidVentricle),
            apical: entry("C", LgdParams::apical(), SliceClass::Apical),
        }
    }
}

impl ParameterRegistry {
    pub fn entry(&self, cls: SliceClass) -> &RegistryEntry {
        match cls {
            SliceClass::Basal => &self.basal,
            SliceClass::MidVentricle => &self.mid,
            SliceClass::Apical => &self.apical,
        }
    }

    pub fn entry_mut(&mut self, cls: SliceClass) -> &mut RegistryEntry {
        match cls {
            SliceClass::Basal => &mut self.basal,
            SliceClass::MidVentricle => &mut self.mid,
            SliceClass::Apical => &mut self.apical,
        }
    }

    /// Every class gets the solver parameters of `source`'s entry; names and
    /// shrink rules stay per class so the seeds are unchanged.
    pub fn uniform(&self, source: SliceClass) -> Self {
        let mut out = self.clone();
        let src = self.entry(source);
        for cls in SliceClass::ALL {
            let e = out.entry_mut(cls);
            e.params = src.params;
            e.name = src.name.clone();
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for cls in SliceClass::ALL {
            let e = self.entry(cls);
            e.params.validate()?;
            if !(0.0..=1.0).contains(&e.shrink.fraction) {
                return Err(Error::Config(format!("shrink fraction for {cls} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn params_for(cls: SliceClass, registry: &ParameterRegistry) -> &LgdParams {
    &registry.entry(cls).params
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField<T = f64> {
    pub phi: Grid<T>,
}

impl<T: Real> LevelSetField<T> {
    /// Pixels with `phi > 0`.
    pub fn positive_region(&self) -> BinaryMask {
        BinaryMask::from_vec(
            self.phi.rows(),
            self.phi.cols(),
            self.phi.as_slice().iter().map(|&v| v > T::zero()).collect(),
        )
    }
}

/// `+c` on the seed, `-c` elsewhere.
pub fn init_level_set<T: Real>(seed: &BinaryMask, c: T) -> Result<LevelSetField<T>> {
    if seed.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !(c > T::zero()) {
        return Err(Error::Config(format!("level-set height must be positive, got {c}")));
    }
    let phi = Grid::from_vec(
        seed.rows(),
        seed.cols(),
        seed.as_slice().iter().map(|&b| if b { c } else { -c }).collect(),
    );
    Ok(LevelSetField { phi })
}

/// Population standard deviation of intensities within `radius` of `center`.
pub fn local_std<T: Real>(img: &SliceImage<T>, center: (f64, f64), radius: f64) -> f64 {
    let (rows, cols) = img.shape();
    let r2 = radius * radius;
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    let r_lo = (center.0 - radius).floor().max(0.0) as usize;
    let c_lo = (center.1 - radius).floor().max(0.0) as usize;
    let r_hi = ((center.0 + radius).ceil().max(0.0) as usize).min(rows.saturating_sub(1));
    let c_hi = ((center.1 + radius).ceil().max(0.0) as usize).min(cols.saturating_sub(1));
    for r in r_lo..=r_hi {
        for c in c_lo..=c_hi {
            let (dr, dc) = (r as f64 - center.0, c as f64 - center.1);
            if dr * dr + dc * dc <= r2 {
                let v = img.pixels.get(r, c).as_f64();
                n += 1;
                s += v;
                s2 += v * v;
            }
        }
    }
    if n == 0 {
        return 0.0;
    }
    let mean = s / n as f64;
    (s2 / n as f64 - mean * mean).max(0.0).sqrt()
}

/// Iterations for a given local spread under an adaptive rule.
pub fn adaptive_iterations(sigma_local: f64, k: f64, min: usize, max: usize) -> usize {
    ((k * sigma_local).round().max(0.0) as usize).clamp(min, max)
}

/// Step count from the parameter set's rule; fixed rules ignore the image.
pub fn mid_iteration_count<T: Real>(img: &SliceImage<T>, seed_centroid: (f64, f64), p: &LgdParams) -> usize {
    match p.iterations {
        IterationRule::Fixed { count } => count,
        IterationRule::Adaptive { k, min, max, radius } => {
            adaptive_iterations(local_std(img, seed_centroid, radius), k, min, max)
        }
    }
}

/// Axis-aligned window `[r0, r1) x [c0, c1)`.
#[derive(Debug, Clone, Copy)]
struct Roi {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl Roi {
    fn full((rows, cols): (usize, usize)) -> Self {
        Roi { r0: 0, r1: rows, c0: 0, c1: cols }
    }

    fn around(m: &BinaryMask, margin: usize) -> Self {
        let px = m.pixels();
        let (rows, cols) = m.shape();
        Roi {
            r0: px.iter().map(|p| p.0).min().unwrap_or(0).saturating_sub(margin),
            r1: (px.iter().map(|p| p.0).max().unwrap_or(0) + margin + 1).min(rows),
            c0: px.iter().map(|p| p.1).min().unwrap_or(0).saturating_sub(margin),
            c1: (px.iter().map(|p| p.1).max().unwrap_or(0) + margin + 1).min(cols),
        }
    }

    fn crop<T: Copy>(&self, g: &Grid<T>) -> Grid<T> {
        Grid::from_fn(self.r1 - self.r0, self.c1 - self.c0, |r, c| g.get(r + self.r0, c + self.c0))
    }

    fn crop_mask(&self, m: &BinaryMask) -> BinaryMask {
        BinaryMask::from_fn(self.r1 - self.r0, self.c1 - self.c0, |r, c| m.get(r + self.r0, c + self.c0))
    }

    fn paste(&self, m: &BinaryMask, (rows, cols): (usize, usize)) -> BinaryMask {
        BinaryMask::from_fn(rows, cols, |r, c| {
            (self.r0..self.r1).contains(&r) && (self.c0..self.c1).contains(&c) && m.get(r - self.r0, c - self.c0)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub mask: BinaryMask,
    pub iterations_run: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Energy before each step and after the last, when requested;
    /// otherwise just the initial and final energies.
    pub energy_trace: Vec<f64>,
    pub hull_applied: bool,
}

/// Evolves from `seed` with the class's parameters, keeps the largest
/// component of `phi > 0`, and closes mid-ventricular results with their
/// convex hull.
pub fn segment_slice<T: Real>(
    s: &SliceImage<T>,
    seed: &BinaryMask,
    cls: SliceClass,
    registry: &ParameterRegistry,
) -> Result<SegmentationResult> {
    segment_slice_traced(s, seed, cls, registry, false)
}

/// [`segment_slice`], optionally recording the energy after every step.
pub fn segment_slice_traced<T: Real>(
    s: &SliceImage<T>,
    seed: &BinaryMask,
    cls: SliceClass,
    registry: &ParameterRegistry,
    full_trace: bool,
) -> Result<SegmentationResult> {
    let p = params_for(cls, registry);
    if seed.shape() != s.shape() {
        return Err(Error::ShapeMismatch {
            expected: (s.pixels.rows(), s.pixels.cols(), 1),
            found: (seed.rows(), seed.cols(), 1),
        });
    }
    let centroid = seed.centroid().ok_or(Error::EmptyMask)?;
    let iters = mid_iteration_count(s, centroid, p);
    let window = match p.roi_margin {
        Some(m) => Roi::around(seed, m),
        None => Roi::full(seed.shape()),
    };
    let sub = SliceImage::new(window.crop(&s.pixels), s.p, s.n, s.case_id.clone());
    let phi0 = init_level_set(&window.crop_mask(seed), T::lit(p.init_height))?;
    let (phi, trace) = solver::run(&sub, &phi0, p, iters, full_trace)?;
    let mut mask = largest_component(&window.paste(&phi.positive_region(), s.shape()));
    let hull_applied = cls == SliceClass::MidVentricle && !mask.is_empty();
    if hull_applied {
        mask = convex_hull_fill(&mask)?;
    }
    let trace: Vec<f64> = trace.into_iter().map(Real::as_f64).collect();
    Ok(SegmentationResult {
        mask,
        iterations_run: iters,
        initial_energy: trace[0],
        final_energy: *trace.last().expect("trace holds at least one energy"),
        energy_trace: trace,
        hull_applied,
    })
}
