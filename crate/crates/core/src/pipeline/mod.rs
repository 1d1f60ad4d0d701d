//! End-to-end orchestration: slice classification, seed selection and
//! class-specific segmentation over whole studies, with ablation runs,
//! reporting and the per-class parameter grid search.

mod report;
mod tune;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{
    emit_report, read_slice_csv, summarize, summary_table, write_slice_csv, Aggregate, Summary, SLICE_CSV,
};
pub use tune::{grid_search_params, ClassGrid, GridPoint, ParamGrid, TuneResult};

use crate::class::SliceClass;
use crate::classifier::{predict_class, ForestHyper, RandomForestModel};
use crate::error::{Error, Result};
use crate::features::{build_feature_vector, DaisyConfig, FeatureVector};
use crate::grid::BinaryMask;
use crate::lgdacm::{segment_slice, ParameterRegistry};
use crate::maskgen::{sequential_seed_masks, shrink_mask, write_mask_pgm, MaskgenConfig, SeedSelection};
use crate::metrics::{self, MetricReport};
use crate::phantom::{case_seed, generate_phantom_study, PhantomSpec};
use crate::scalar::Real;
use crate::volume::{
    extract_slices, load_ground_truth, load_volume, read_manifest, read_pgm, resize_bilinear, resize_mask_nearest,
    CmrVolume, GroundTruthMask, SliceImage,
};

/// Everything a run depends on. A study is reproducible from this file
/// alone; every field must be present when it is parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub working_size: (usize, usize),
    /// Label value of the LV cavity in NIfTI label volumes.
    pub lv_label: i64,
    pub seed: u64,
    pub daisy: DaisyConfig,
    pub forest: ForestHyper,
    pub maskgen: MaskgenConfig,
    pub registry: ParameterRegistry,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            working_size: (200, 200),
            lv_label: 3,
            seed: 0,
            daisy: DaisyConfig::default(),
            forest: ForestHyper::default(),
            maskgen: MaskgenConfig::default(),
            registry: ParameterRegistry::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let (r, c) = self.working_size;
        if r < 2 || c < 2 {
            return Err(Error::InvalidTarget { rows: r, cols: c });
        }
        self.daisy.validate()?;
        self.forest.validate()?;
        self.maskgen.validate()?;
        self.registry.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config always serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// One study case, ready for both phases: slices normalized to `[0, 255]`
/// and resized to the working size.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCase<T = f64> {
    pub case_id: String,
    pub slices: Vec<SliceImage<T>>,
    pub ground_truth: Option<Vec<BinaryMask>>,
    /// Reference slice classes, when the source provides them.
    pub true_classes: Option<Vec<SliceClass>>,
}

impl<T: Real> StudyCase<T> {
    pub fn from_volume(
        volume: &CmrVolume<T>,
        ground_truth: Option<Vec<GroundTruthMask>>,
        true_classes: Option<Vec<SliceClass>>,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        let (rows, cols) = cfg.working_size;
        let slices = extract_slices(volume)
            .iter()
            .map(|s| if s.shape() == (rows, cols) { Ok(s.clone()) } else { resize_bilinear(s, rows, cols) })
            .collect::<Result<Vec<_>>>()?;
        if let Some(l) = &true_classes {
            if l.len() != slices.len() {
                return Err(Error::LengthMismatch { left: l.len(), right: slices.len() });
            }
        }
        Ok(StudyCase {
            case_id: volume.case_id.clone(),
            slices,
            ground_truth: ground_truth.map(|g| g.into_iter().map(|m| m.mask).collect()),
            true_classes,
        })
    }

    /// Feature vectors for every slice, labeled with the reference classes
    /// when known.
    pub fn features(&self, cfg: &PipelineConfig) -> Result<Vec<FeatureVector<T>>> {
        let mut out = self
            .slices
            .iter()
            .map(|s| build_feature_vector(s, &cfg.daisy))
            .collect::<Result<Vec<_>>>()?;
        if let Some(labels) = &self.true_classes {
            for (f, &l) in out.iter_mut().zip(labels) {
                f.label = Some(l);
            }
        }
        Ok(out)
    }
}

/// Cases under `dir`, sorted by name: slice directories (holding a
/// `manifest.txt`) and NIfTI files other than `*_gt.nii[.gz]`. A directory
/// that is itself a slice directory is a one-case study.
pub fn discover_cases(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join("manifest.txt").is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if path.is_dir() {
            if path.join("manifest.txt").is_file() {
                out.push(path);
            }
        } else if (name.ends_with(".nii") || name.ends_with(".nii.gz")) && !is_gt_name(&name) {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::EmptyStudy);
    }
    Ok(out)
}

fn is_gt_name(name: &str) -> bool {
    name.ends_with("_gt.nii") || name.ends_with("_gt.nii.gz")
}

/// `case.nii.gz` pairs with `case_gt.nii.gz`.
fn gt_path_for(image: &Path) -> PathBuf {
    let name = image.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let gt = match name.strip_suffix(".nii.gz") {
        Some(stem) => format!("{stem}_gt.nii.gz"),
        None => format!("{}_gt.nii", name.trim_end_matches(".nii")),
    };
    image.with_file_name(gt)
}

/// Loads one case. Ground truth is read only when `with_gt` is set; class
/// labels come from a slice directory's manifest when present.
pub fn load_case<T: Real>(path: &Path, cfg: &PipelineConfig, with_gt: bool) -> Result<StudyCase<T>> {
    let volume: CmrVolume<T> = load_volume(path)?;
    let labels = if path.is_dir() { read_manifest(path)?.labels } else { None };
    let gt = if with_gt {
        let gt_src = if path.is_dir() { path.to_path_buf() } else { gt_path_for(path) };
        Some(load_ground_truth(&gt_src, cfg.lv_label, volume.dims(), cfg.working_size)?)
    } else {
        None
    };
    StudyCase::from_volume(&volume, gt, labels, cfg)
}

/// In-memory phantom study of `n_cases` cases, case `i` seeded with
/// `case_seed(base_seed, i)`.
pub fn phantom_cases(template: &PhantomSpec, n_cases: usize, base_seed: u64, cfg: &PipelineConfig) -> Result<Vec<StudyCase<f64>>> {
    (0..n_cases)
        .into_par_iter()
        .map(|i| {
            let spec = PhantomSpec { seed: case_seed(base_seed, i), ..template.clone() };
            let st = generate_phantom_study(&spec)?;
            StudyCase::from_volume(&st.volume, Some(st.ground_truth), Some(st.classes), cfg)
        })
        .collect()
}

/// Phase 1: one predicted class per slice, in slice order.
pub fn run_phase1<T: Real>(
    slices: &[SliceImage<T>],
    model: &RandomForestModel<T>,
    cfg: &PipelineConfig,
) -> Result<Vec<SliceClass>> {
    let (rows, cols) = cfg.working_size;
    let expected = cfg.daisy.feature_len(rows, cols);
    if model.feature_dim != expected {
        return Err(Error::DimensionMismatch { expected, found: model.feature_dim });
    }
    slices
        .iter()
        .map(|s| predict_class(model, &build_feature_vector(s, &cfg.daisy)?))
        .collect()
}

/// Outcome for one slice of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceOutcome {
    pub case_id: String,
    pub p: usize,
    pub n: usize,
    /// Class whose parameters were used.
    pub predicted: SliceClass,
    pub truth: Option<SliceClass>,
    pub param_set: String,
    /// No LV candidate was found; nothing was segmented.
    pub not_found: bool,
    pub iterations_run: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub hull_applied: bool,
    /// Present when a prediction exists and the reference cavity is
    /// nonempty.
    pub metrics: Option<MetricReport>,
    pub mask: Option<BinaryMask>,
}

impl SliceOutcome {
    /// Class used for aggregation: the reference class when known.
    pub fn group(&self) -> SliceClass {
        self.truth.unwrap_or(self.predicted)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub case_id: String,
    /// The first three seeds were chosen independently.
    pub triple_fallback: bool,
    pub slices: Vec<SliceOutcome>,
}

/// Segments every slice of a case from precomputed seed candidates.
///
/// `seeds` is shared across ablation runs so that only solver parameters
/// differ between them.
pub fn segment_case<T: Real>(
    case: &StudyCase<T>,
    classes: &[SliceClass],
    seeds: &SeedSelection,
    registry: &ParameterRegistry,
    keep_masks: bool,
) -> Result<CaseResult> {
    if classes.len() != case.slices.len() {
        return Err(Error::LengthMismatch { left: classes.len(), right: case.slices.len() });
    }
    let mut out = Vec::with_capacity(case.slices.len());
    for (i, s) in case.slices.iter().enumerate() {
        let cls = classes[i];
        let entry = registry.entry(cls);
        let mut o = SliceOutcome {
            case_id: case.case_id.clone(),
            p: s.p,
            n: s.n,
            predicted: cls,
            truth: case.true_classes.as_ref().map(|t| t[i]),
            param_set: entry.name.clone(),
            not_found: true,
            iterations_run: 0,
            initial_energy: 0.0,
            final_energy: 0.0,
            hull_applied: false,
            metrics: None,
            mask: None,
        };
        if let Some(cand) = &seeds.masks[i] {
            let seed = shrink_mask(&cand.mask, &entry.shrink)?;
            let r = segment_slice(s, &seed, cls, registry)?;
            o.not_found = false;
            o.iterations_run = r.iterations_run;
            o.initial_energy = r.initial_energy;
            o.final_energy = r.final_energy;
            o.hull_applied = r.hull_applied;
            if let Some(gt) = case.ground_truth.as_ref().map(|g| &g[i]) {
                if !gt.is_empty() && !r.mask.is_empty() {
                    o.metrics = Some(metrics::evaluate(&r.mask, gt)?);
                } else if !gt.is_empty() {
                    o.metrics = Some(empty_prediction_metrics(gt));
                }
            }
            if keep_masks {
                o.mask = Some(r.mask);
            }
        }
        out.push(o);
    }
    Ok(CaseResult { case_id: case.case_id.clone(), triple_fallback: seeds.triple_fallback, slices: out })
}

/// Scores of an empty prediction against a nonempty reference. Boundary
/// distances are undefined there and reported as the image diagonal.
fn empty_prediction_metrics(gt: &BinaryMask) -> MetricReport {
    let empty = BinaryMask::new(gt.rows(), gt.cols());
    let c = metrics::confusion_metrics(&empty, gt).expect("same shape");
    let diag = (gt.rows() as f64).hypot(gt.cols() as f64);
    MetricReport {
        dice: 0.0,
        jaccard: 0.0,
        precision: c.precision,
        recall: c.recall,
        f1: c.f1,
        accuracy: c.accuracy,
        specificity: c.specificity,
        mae: c.mae,
        hausdorff: diag,
        mad: diag,
        bde: diag,
    }
}

/// Phase 2 for one volume with the configured registry: seed selection
/// over all slices, then shrink and segment each found slice.
pub fn run_phase2<T: Real>(case: &StudyCase<T>, classes: &[SliceClass], cfg: &PipelineConfig) -> Result<CaseResult> {
    let seeds = sequential_seed_masks(&case.slices, &cfg.maskgen);
    segment_case(case, classes, &seeds, &cfg.registry, false)
}

/// Where phase-2 classes come from.
#[derive(Debug, Clone, Copy)]
pub enum ClassSource<'a, T = f64> {
    /// Precomputed classes per case id, e.g. from `classify`.
    Table(&'a BTreeMap<String, Vec<SliceClass>>),
    /// Run phase 1 with this model.
    Model(&'a RandomForestModel<T>),
    /// Reference classes of each case.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StudyOptions {
    /// Also run every uniform parameter set.
    pub ablation: bool,
    /// Also run the registry with reference classes.
    pub oracle: bool,
    /// Keep the final masks in the results.
    pub keep_masks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassMode {
    Predicted,
    Reference,
}

/// One pass of phase 2 over the whole study.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub name: String,
    pub class_mode: ClassMode,
    pub cases: Vec<CaseResult>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseFailure {
    pub case_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    /// The registry run first, then uniform sets A, B, C when ablating,
    /// then the reference-class run when requested.
    pub runs: Vec<RunResult>,
    /// Cases skipped because a step failed.
    pub failures: Vec<CaseFailure>,
    /// Fraction of slices whose predicted class matched the reference,
    /// over slices with a reference class.
    pub class_accuracy: Option<f64>,
    pub config: PipelineConfig,
}

impl StudyReport {
    pub fn run(&self, name: &str) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.name == name)
    }
}

pub const PROPOSED: &str = "Proposed";
pub const ORACLE: &str = "Proposed (reference classes)";

/// Name of the uniform run built from `cls`'s entry.
pub fn uniform_run_name(registry: &ParameterRegistry, cls: SliceClass) -> String {
    format!("Parameter Set {}", registry.entry(cls).name)
}

struct Plan {
    name: String,
    mode: ClassMode,
    registry: ParameterRegistry,
}

fn plans(cfg: &PipelineConfig, opts: StudyOptions) -> Vec<Plan> {
    let mut v = vec![Plan { name: PROPOSED.into(), mode: ClassMode::Predicted, registry: cfg.registry.clone() }];
    if opts.ablation {
        for cls in SliceClass::ALL {
            v.push(Plan {
                name: uniform_run_name(&cfg.registry, cls),
                mode: ClassMode::Predicted,
                registry: cfg.registry.uniform(cls),
            });
        }
    }
    if opts.oracle {
        v.push(Plan { name: ORACLE.into(), mode: ClassMode::Reference, registry: cfg.registry.clone() });
    }
    v
}

fn case_classes<T: Real>(case: &StudyCase<T>, source: ClassSource<'_, T>, cfg: &PipelineConfig) -> Result<Vec<SliceClass>> {
    match source {
        ClassSource::Table(t) => {
            let c = t.get(&case.case_id).ok_or_else(|| Error::MissingLabel { case_id: case.case_id.clone(), p: 1 })?;
            if c.len() != case.slices.len() {
                return Err(Error::LengthMismatch { left: c.len(), right: case.slices.len() });
            }
            Ok(c.clone())
        }
        ClassSource::Model(m) => run_phase1(&case.slices, m, cfg),
        ClassSource::Truth => reference_classes(case),
    }
}

fn reference_classes<T: Real>(case: &StudyCase<T>) -> Result<Vec<SliceClass>> {
    case.true_classes.clone().ok_or_else(|| Error::MissingLabel { case_id: case.case_id.clone(), p: 1 })
}

/// Runs phase 2 (and phase 1 when `source` is a model) over in-memory
/// cases. Cases run in parallel; results keep case order. A case that
/// fails is recorded in `failures` and left out of every run.
pub fn run_study_cases<T: Real>(
    cases: &[StudyCase<T>],
    source: ClassSource<'_, T>,
    cfg: &PipelineConfig,
    opts: StudyOptions,
) -> Result<StudyReport> {
    if cases.is_empty() {
        return Err(Error::EmptyStudy);
    }
    cfg.validate()?;
    let plans = plans(cfg, opts);
    let per_case: Vec<Result<Vec<CaseResult>>> = cases
        .par_iter()
        .map(|case| {
            let predicted = case_classes(case, source, cfg)?;
            let seeds = sequential_seed_masks(&case.slices, &cfg.maskgen);
            plans
                .iter()
                .map(|plan| {
                    let classes = match plan.mode {
                        ClassMode::Predicted => predicted.clone(),
                        ClassMode::Reference => reference_classes(case)?,
                    };
                    segment_case(case, &classes, &seeds, &plan.registry, opts.keep_masks)
                })
                .collect()
        })
        .collect();

    let mut failures = Vec::new();
    let mut runs: Vec<Vec<CaseResult>> = vec![Vec::new(); plans.len()];
    let mut first_err = None;
    for (case, res) in cases.iter().zip(per_case) {
        match res {
            Ok(results) => {
                for (run, r) in runs.iter_mut().zip(results) {
                    run.push(r);
                }
            }
            Err(e) => {
                failures.push(CaseFailure { case_id: case.case_id.clone(), error: e.to_string() });
                first_err.get_or_insert(e);
            }
        }
    }
    if runs[0].is_empty() {
        return Err(first_err.unwrap_or(Error::EmptyStudy));
    }

    let (mut hits, mut total) = (0usize, 0usize);
    for s in runs[0].iter().flat_map(|c| &c.slices) {
        if let Some(t) = s.truth {
            total += 1;
            hits += usize::from(t == s.predicted);
        }
    }
    let runs = plans
        .into_iter()
        .zip(runs)
        .map(|(plan, cases)| {
            let summary = summarize(cases.iter().flat_map(|c| &c.slices));
            RunResult { name: plan.name, class_mode: plan.mode, cases, summary }
        })
        .collect();
    Ok(StudyReport {
        runs,
        failures,
        class_accuracy: (total > 0).then(|| hits as f64 / total as f64),
        config: cfg.clone(),
    })
}

/// Loads every case under `dataset` and runs [`run_study_cases`].
pub fn run_study<T: Real>(
    dataset: &Path,
    cfg: &PipelineConfig,
    source: ClassSource<'_, T>,
    gt: bool,
    opts: StudyOptions,
) -> Result<StudyReport> {
    let paths = discover_cases(dataset)?;
    let cases = paths
        .par_iter()
        .map(|p| load_case(p, cfg, gt))
        .collect::<Result<Vec<StudyCase<T>>>>()?;
    run_study_cases(&cases, source, cfg, opts)
}

/// Writes the final masks of the registry run as 8-bit PGMs under
/// `dir/<case_id>/mask_NNN.pgm`; undetected slices get an empty mask.
pub fn dump_masks(report: &StudyReport, dir: &Path) -> Result<()> {
    let (rows, cols) = report.config.working_size;
    for case in &report.runs[0].cases {
        let cdir = dir.join(&case.case_id);
        fs::create_dir_all(&cdir).map_err(|e| Error::io(&cdir, e))?;
        for s in &case.slices {
            let m = s.mask.clone().unwrap_or_else(|| BinaryMask::new(rows, cols));
            write_mask_pgm(&cdir.join(format!("mask_{:03}.pgm", s.p)), &m)?;
        }
    }
    Ok(())
}

/// Reads a `case_id,p,n,class` table as written by `classify`.
pub fn read_class_table(path: &Path) -> Result<BTreeMap<String, Vec<SliceClass>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows: BTreeMap<String, Vec<(usize, SliceClass)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if rec.len() < 4 {
            return Err(Error::Parse("class table rows need case_id,p,n,class".into()));
        }
        let p: usize = rec[1].trim().parse().map_err(|_| Error::Parse(format!("bad slice index {:?}", &rec[1])))?;
        rows.entry(rec[0].to_string()).or_default().push((p, rec[3].trim().parse()?));
    }
    Ok(rows
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|x| x.0);
            (k, v.into_iter().map(|x| x.1).collect())
        })
        .collect())
}

/// Writes a `case_id,p,n,class` table.
pub fn write_class_table(path: &Path, rows: &[(String, usize, usize, SliceClass)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["case_id", "p", "n", "class"]).map_err(err)?;
    for (id, p, n, c) in rows {
        w.write_record([id.as_str(), &p.to_string(), &n.to_string(), c.token()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_mask_pgm(path: &Path) -> Result<BinaryMask> {
    let (g, _) = read_pgm(path)?;
    Ok(BinaryMask::from_vec(g.rows(), g.cols(), g.as_slice().iter().map(|&v| v > 0).collect()))
}

/// Scores mask files against a dataset with ground truth.
///
/// Predictions are read from `pred/<case_id>/mask_NNN.pgm`, the layout of
/// [`dump_masks`], or from `pred/mask_NNN.pgm` for a one-case dataset, and
/// resized to the working size. Classes come from `classes` when given,
/// otherwise from each case's reference labels. Unlike a study, an empty
/// prediction cannot be told apart from a missed detection here: it is
/// counted as NotFound and also scored as a miss (Dice 0).
pub fn evaluate_predictions(
    pred: &Path,
    dataset: &Path,
    classes: Option<&BTreeMap<String, Vec<SliceClass>>>,
    cfg: &PipelineConfig,
) -> Result<StudyReport> {
    cfg.validate()?;
    let paths = discover_cases(dataset)?;
    let (rows, cols) = cfg.working_size;
    let cases = paths
        .par_iter()
        .map(|path| {
            let case: StudyCase<f64> = load_case(path, cfg, true)?;
            let gt = case.ground_truth.as_ref().expect("loaded with ground truth");
            let used = match classes {
                Some(t) => t.get(&case.case_id).cloned(),
                None => case.true_classes.clone(),
            }
            .ok_or_else(|| Error::MissingLabel { case_id: case.case_id.clone(), p: 1 })?;
            if used.len() != case.slices.len() {
                return Err(Error::LengthMismatch { left: used.len(), right: case.slices.len() });
            }
            let dir = if pred.join(&case.case_id).is_dir() { pred.join(&case.case_id) } else { pred.to_path_buf() };
            let mut slices = Vec::with_capacity(case.slices.len());
            for (i, s) in case.slices.iter().enumerate() {
                let m = read_mask_pgm(&dir.join(format!("mask_{:03}.pgm", s.p)))?;
                let m = resize_mask_nearest(&m, rows, cols)?;
                let metrics = match (gt[i].is_empty(), m.is_empty()) {
                    (true, _) => None,
                    (false, true) => Some(empty_prediction_metrics(&gt[i])),
                    (false, false) => Some(metrics::evaluate(&m, &gt[i])?),
                };
                slices.push(SliceOutcome {
                    case_id: case.case_id.clone(),
                    p: s.p,
                    n: s.n,
                    predicted: used[i],
                    truth: case.true_classes.as_ref().map(|t| t[i]),
                    param_set: String::new(),
                    not_found: m.is_empty(),
                    iterations_run: 0,
                    initial_energy: 0.0,
                    final_energy: 0.0,
                    hull_applied: false,
                    metrics,
                    mask: None,
                });
            }
            Ok(CaseResult { case_id: case.case_id, triple_fallback: false, slices })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cases.iter().flat_map(|c| &c.slices));
    Ok(StudyReport {
        runs: vec![RunResult { name: "Evaluation".into(), class_mode: ClassMode::Predicted, cases, summary }],
        failures: Vec::new(),
        class_accuracy: None,
        config: cfg.clone(),
    })
}
