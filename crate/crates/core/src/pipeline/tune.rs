//! Exhaustive per-class search over solver weights and seed shrinkage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PipelineConfig, StudyCase};
use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::lgdacm::{segment_slice, ParameterRegistry};
use crate::maskgen::{sequential_seed_masks, shrink_mask, Candidate};
use crate::metrics;
use crate::scalar::Real;

/// Candidate values for one class. `nu` is on the 0..255 intensity scale,
/// as in [`crate::lgdacm::LgdParams::nu`]; `shrink` replaces the entry's
/// shrink fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGrid {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub nu: Vec<f64>,
    pub shrink: Vec<f64>,
}

impl ClassGrid {
    fn points(&self) -> Vec<[f64; 4]> {
        let mut v = Vec::new();
        for &l1 in &self.lambda1 {
            for &l2 in &self.lambda2 {
                for &nu in &self.nu {
                    for &sh in &self.shrink {
                        v.push([l1, l2, nu, sh]);
                    }
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub basal: ClassGrid,
    pub mid: ClassGrid,
    pub apical: ClassGrid,
}

impl ParamGrid {
    pub fn class(&self, cls: SliceClass) -> &ClassGrid {
        match cls {
            SliceClass::Basal => &self.basal,
            SliceClass::MidVentricle => &self.mid,
            SliceClass::Apical => &self.apical,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu: f64,
    pub shrink: f64,
    pub mean_dice: f64,
    /// Slices the mean is taken over.
    pub n_slices: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub registry: ParameterRegistry,
    /// Every evaluated point per class, in grid order.
    pub evaluations: [Vec<GridPoint>; 3],
}

/// Orders points by mean Dice, then prefers smaller `nu`, smaller
/// `lambda1`, smaller `lambda2` and smaller shrink fraction.
fn better(a: &GridPoint, b: &GridPoint) -> bool {
    let key = |p: &GridPoint| (-p.mean_dice, p.nu, p.lambda1, p.lambda2, p.shrink);
    key(a).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less)
}

/// For each class independently, evaluates every point of its grid on the
/// slices whose reference class it is and keeps the point with the highest
/// mean Dice. Seeds are selected once per case. A point whose solve
/// diverges scores 0 on that slice.
pub fn grid_search_params<T: Real>(cases: &[StudyCase<T>], grids: &ParamGrid, cfg: &PipelineConfig) -> Result<TuneResult> {
    for cls in SliceClass::ALL {
        let g = grids.class(cls);
        if g.lambda1.is_empty() || g.lambda2.is_empty() || g.nu.is_empty() || g.shrink.is_empty() {
            return Err(Error::EmptyGrid(cls.token()));
        }
    }
    if cases.is_empty() {
        return Err(Error::EmptyStudy);
    }
    for c in cases {
        if c.ground_truth.is_none() {
            return Err(Error::Config(format!("case {} has no ground truth", c.case_id)));
        }
        if c.true_classes.is_none() {
            return Err(Error::MissingLabel { case_id: c.case_id.clone(), p: 1 });
        }
    }
    let seeds: Vec<Vec<Option<Candidate>>> =
        cases.par_iter().map(|c| sequential_seed_masks(&c.slices, &cfg.maskgen).masks).collect();

    let mut registry = cfg.registry.clone();
    let mut evaluations: [Vec<GridPoint>; 3] = Default::default();
    for cls in SliceClass::ALL {
        let tasks: Vec<(usize, usize)> = cases
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| {
                let classes = c.true_classes.as_ref().expect("checked above");
                let gt = c.ground_truth.as_ref().expect("checked above");
                (0..c.slices.len())
                    .filter(|&i| classes[i] == cls && !gt[i].is_empty() && seeds[ci][i].is_some())
                    .map(move |i| (ci, i))
                    .collect::<Vec<_>>()
            })
            .collect();
        let points: Vec<GridPoint> = grids
            .class(cls)
            .points()
            .into_par_iter()
            .map(|[l1, l2, nu, sh]| {
                let mut reg = cfg.registry.clone();
                let e = reg.entry_mut(cls);
                e.params.lambda1 = l1;
                e.params.lambda2 = l2;
                e.params.nu = nu;
                e.shrink.fraction = sh;
                let total: f64 = tasks
                    .iter()
                    .map(|&(ci, i)| {
                        let cand = seeds[ci][i].as_ref().expect("filtered above");
                        let gt = &cases[ci].ground_truth.as_ref().expect("checked above")[i];
                        shrink_mask(&cand.mask, &reg.entry(cls).shrink)
                            .and_then(|seed| segment_slice(&cases[ci].slices[i], &seed, cls, &reg))
                            .and_then(|r| metrics::dice(&r.mask, gt))
                            .unwrap_or(0.0)
                    })
                    .sum();
                GridPoint {
                    lambda1: l1,
                    lambda2: l2,
                    nu,
                    shrink: sh,
                    mean_dice: if tasks.is_empty() { 0.0 } else { total / tasks.len() as f64 },
                    n_slices: tasks.len(),
                }
            })
            .collect();
        let best = points.iter().fold(points[0], |b, p| if better(p, &b) { *p } else { b });
        let e = registry.entry_mut(cls);
        e.params.lambda1 = best.lambda1;
        e.params.lambda2 = best.lambda2;
        e.params.nu = best.nu;
        e.shrink.fraction = best.shrink;
        evaluations[cls.index()] = points;
    }
    registry.validate()?;
    Ok(TuneResult { registry, evaluations })
}
