//! Synthetic short-axis studies with exact ground truth and slice classes.
//!
//! Each slice shows a bright blood pool against a dark myocardial wall on a
//! mid-gray background. Basal slices carry an elliptical cavity (axis ratio
//! 1.4) whose wall is open over most of its circumference, as where the
//! outflow tract interrupts the base; mid-ventricular slices a circular
//! cavity in a closed ring with one dark papillary notch intruding from the
//! wall; apical slices a small ringed disc under 120 pixels. The ground
//! truth is always the full convex cavity, notch included. Stored voxels are `round(256 * intensity)`, so a phantom study
//! survives a 16-bit PGM round trip bit for bit.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::grid::BinaryMask;
use crate::scalar::Real;
use crate::volume::{write_slice_dir, CmrVolume, GroundTruthMask};

/// Voxel units per intensity unit in generated volumes.
pub const INTENSITY_SCALE: f64 = 256.0;

/// Largest apical cavity the generator emits, in pixels (exclusive).
pub const APICAL_AREA_LIMIT: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub n_slices: usize,
    pub image_size: (usize, usize),
    pub noise_sigma: f64,
    pub basal_fraction: f64,
    pub mid_fraction: f64,
    pub apical_fraction: f64,
    pub cavity_intensity: f64,
    pub myocardium_intensity: f64,
    pub background_intensity: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            n_slices: 10,
            image_size: (200, 200),
            noise_sigma: 8.0,
            basal_fraction: 0.3,
            mid_fraction: 0.5,
            apical_fraction: 0.2,
            cavity_intensity: 200.0,
            myocardium_intensity: 30.0,
            background_intensity: 60.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_slices < 3 {
            return bad(format!("n_slices must be at least 3, got {}", self.n_slices));
        }
        let fr = [self.basal_fraction, self.mid_fraction, self.apical_fraction];
        if fr.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return bad("class fractions must be nonnegative".into());
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("class fractions sum to {}, not 1", fr.iter().sum::<f64>()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be nonnegative".into());
        }
        for (name, v) in [
            ("cavity_intensity", self.cavity_intensity),
            ("myocardium_intensity", self.myocardium_intensity),
            ("background_intensity", self.background_intensity),
        ] {
            if !(0.0..=255.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 255], got {v}"));
            }
        }
        let (rows, cols) = self.image_size;
        if rows.min(cols) < 64 {
            return bad(format!("image_size {rows}x{cols} is too small; need at least 64x64"));
        }
        Ok(())
    }

    /// Slice classes, ordered basal then mid then apical.
    pub fn class_layout(&self) -> Vec<SliceClass> {
        let n = self.n_slices;
        let mut nb = (self.basal_fraction * n as f64).round() as usize;
        let mut na = (self.apical_fraction * n as f64).round() as usize;
        if self.basal_fraction > 0.0 {
            nb = nb.max(1);
        }
        if self.apical_fraction > 0.0 {
            na = na.max(1);
        }
        while nb + na > n {
            if nb >= na {
                nb -= 1;
            } else {
                na -= 1;
            }
        }
        let mut nm = n - nb - na;
        if self.mid_fraction > 0.0 && nm == 0 {
            if nb > na {
                nb -= 1;
            } else {
                na -= 1;
            }
            nm = 1;
        }
        let mut out = vec![SliceClass::Basal; nb];
        out.extend(std::iter::repeat_n(SliceClass::MidVentricle, nm));
        out.extend(std::iter::repeat_n(SliceClass::Apical, na));
        out
    }
}

/// One generated study.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomStudy {
    pub volume: CmrVolume<f64>,
    pub ground_truth: Vec<GroundTruthMask>,
    pub classes: Vec<SliceClass>,
}

#[derive(Debug, Clone, Copy)]
enum Cavity {
    Ellipse { a: f64, b: f64, theta: f64 },
    Disc { radius: f64 },
}

impl Cavity {
    /// Normalized radial coordinate: `<= 1` inside the cavity.
    fn level(&self, dr: f64, dc: f64, grow: f64) -> f64 {
        match *self {
            Cavity::Ellipse { a, b, theta } => {
                let (s, c) = theta.sin_cos();
                let u = (dc * c + dr * s) / (a + grow);
                let v = (-dc * s + dr * c) / (b + grow);
                u * u + v * v
            }
            Cavity::Disc { radius } => (dr * dr + dc * dc) / ((radius + grow) * (radius + grow)),
        }
    }
}

/// Half-width of the opening in the basal myocardial ring, in radians.
const BASAL_GAP_HALF_ANGLE: f64 = 2.2;

/// Absolute angle between the direction of `(dr, dc)` and `dir`.
fn angle_gap(dr: f64, dc: f64, dir: f64) -> f64 {
    let d = (dr.atan2(dc) - dir).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Position of slice `i` within its class block, in `[0, 1]`.
fn block_t(classes: &[SliceClass], i: usize) -> f64 {
    let cls = classes[i];
    let first = classes.iter().position(|&c| c == cls).unwrap_or(i);
    let count = classes.iter().filter(|&&c| c == cls).count();
    if count <= 1 {
        0.5
    } else {
        (i - first) as f64 / (count - 1) as f64
    }
}

fn disc_area(radius: f64) -> usize {
    let r = radius.ceil() as i64 + 1;
    let mut n = 0;
    for dr in -r..=r {
        for dc in -r..=r {
            if ((dr * dr + dc * dc) as f64) <= radius * radius {
                n += 1;
            }
        }
    }
    n
}

/// Generates a seeded phantom study. Deterministic for a fixed spec.
pub fn generate_phantom_study(spec: &PhantomSpec) -> Result<PhantomStudy> {
    spec.validate()?;
    let (rows, cols) = spec.image_size;
    let scale = rows.min(cols) as f64 / 200.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = spec.class_layout();
    let n = spec.n_slices;

    let theta = rng.gen_range(0.0..std::f64::consts::PI);
    let mut center = (
        rows as f64 / 2.0 + rng.gen_range(-6.0..6.0) * scale,
        cols as f64 / 2.0 + rng.gen_range(-6.0..6.0) * scale,
    );
    let size_jitter = rng.gen_range(0.92..1.08);
    let gap_dir = rng.gen_range(0.0..std::f64::consts::TAU);
    let wall = 8.0 * scale;

    let mut voxels = Vec::with_capacity(rows * cols * n);
    let mut ground_truth = Vec::with_capacity(n);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).map_err(|e| Error::InvalidSpec(e.to_string()))?;

    for (i, &cls) in classes.iter().enumerate() {
        if i > 0 {
            let step = rng.gen_range(0.0..2.0) * scale;
            let dir = rng.gen_range(0.0..std::f64::consts::TAU);
            center.0 += step * dir.sin();
            center.1 += step * dir.cos();
        }
        let t = block_t(&classes, i);
        let (cavity, ring) = match cls {
            SliceClass::Basal => {
                let a = lerp(30.0, 26.0, t) * scale * size_jitter;
                (Cavity::Ellipse { a, b: a / 1.4, theta }, wall)
            }
            SliceClass::MidVentricle => (
                Cavity::Disc {
                    radius: lerp(22.0, 14.0, t) * scale * size_jitter,
                },
                wall,
            ),
            SliceClass::Apical => {
                let mut radius = lerp(5.6, 4.2, t) * scale;
                while disc_area(radius) >= APICAL_AREA_LIMIT {
                    radius -= 0.1;
                }
                (Cavity::Disc { radius }, 6.0 * scale)
            }
        };
        let notch = if cls == SliceClass::MidVentricle {
            let Cavity::Disc { radius } = cavity else { unreachable!() };
            let nr = rng.gen_range(2.0..=4.0);
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let d = radius - nr + 1.0;
            Some((center.0 + d * ang.sin(), center.1 + d * ang.cos(), nr))
        } else {
            None
        };

        let mut gt = BinaryMask::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let (dr, dc) = (r as f64 - center.0, c as f64 - center.1);
                let inside = cavity.level(dr, dc, 0.0) <= 1.0;
                let open = cls == SliceClass::Basal && angle_gap(dr, dc, gap_dir) < BASAL_GAP_HALF_ANGLE;
                let in_ring = !open && cavity.level(dr, dc, ring) <= 1.0;
                let in_notch = notch
                    .map(|(nr0, nc0, rad)| {
                        let (a, b) = (r as f64 - nr0, c as f64 - nc0);
                        a * a + b * b <= rad * rad
                    })
                    .unwrap_or(false);
                let base = if inside && !in_notch {
                    spec.cavity_intensity
                } else if in_ring || inside {
                    spec.myocardium_intensity
                } else {
                    spec.background_intensity
                };
                gt.set(r, c, inside);
                let v = if spec.noise_sigma > 0.0 {
                    base + noise.sample(&mut rng)
                } else {
                    base
                };
                voxels.push((v * INTENSITY_SCALE).round().clamp(0.0, 65535.0));
            }
        }
        ground_truth.push(GroundTruthMask {
            mask: gt,
            p: i + 1,
            n,
            case_id: String::new(),
        });
    }

    let case_id = format!("phantom_{}", spec.seed);
    for g in &mut ground_truth {
        g.case_id = case_id.clone();
    }
    let volume = CmrVolume::new(case_id, rows, cols, n, voxels)?;
    Ok(PhantomStudy {
        volume,
        ground_truth,
        classes,
    })
}

/// Generates a study and writes it as a slice directory with ground truth
/// and class labels. `case_id` overrides the generated identifier.
pub fn write_phantom_study(dir: &Path, spec: &PhantomSpec, case_id: Option<&str>) -> Result<PhantomStudy> {
    let mut study = generate_phantom_study(spec)?;
    if let Some(id) = case_id {
        study.volume.case_id = id.to_string();
        for g in &mut study.ground_truth {
            g.case_id = id.to_string();
        }
    }
    let masks: Vec<BinaryMask> = study.ground_truth.iter().map(|g| g.mask.clone()).collect();
    write_slice_dir(dir, &study.volume, Some(&masks), Some(&study.classes))?;
    Ok(study)
}

/// Seed for case `index` of a study generated from `base_seed`.
pub fn case_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

/// Converts stored phantom voxels back to intensity units.
pub fn voxel_intensity<T: Real>(v: T) -> f64 {
    v.as_f64() / INTENSITY_SCALE
}
