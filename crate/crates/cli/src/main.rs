//! `lvseg` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lvseg::classifier::{
    classification_report, cross_validate, read_model, train_forest, write_model, RandomForestModel,
};
use lvseg::features::{read_features_csv, write_features_csv, FeatureVector};
use lvseg::phantom::{case_seed, write_phantom_study, PhantomSpec};
use lvseg::pipeline::{
    discover_cases, dump_masks, emit_report, evaluate_predictions, grid_search_params, load_case, read_class_table,
    run_phase1, run_study, summary_table, write_class_table, write_slice_csv, ClassSource, ParamGrid,
    PipelineConfig, StudyCase, StudyOptions,
};
use lvseg::{ErrorKind, SliceClass};

#[derive(Parser)]
#[command(name = "lvseg", version, about = "Two-stage left-ventricle segmentation for short-axis cardiac MRI")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the default configuration as TOML.
    InitConfig(InitConfigArgs),
    /// Write a seeded phantom dataset of slice directories.
    Synth(SynthArgs),
    /// Write labeled feature vectors for every n-th case.
    Label(LabelArgs),
    /// Train a random forest on a feature CSV.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation on a feature CSV.
    CrossValidate(CvArgs),
    /// Predict slice classes for every case.
    Classify(ClassifyArgs),
    /// Run phase 2 and write a study report.
    Segment(SegmentArgs),
    /// Grid-search the per-class solver parameters.
    Tune(TuneArgs),
    /// Score mask files against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct InitConfigArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    cases: usize,
    #[arg(long, default_value_t = 10)]
    slices: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    rows: usize,
    #[arg(long, default_value_t = 200)]
    cols: usize,
    #[arg(long, default_value_t = 8.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.3)]
    basal_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    mid_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    apical_fraction: f64,
    #[arg(long, default_value_t = 200.0)]
    cavity_intensity: f64,
    #[arg(long, default_value_t = 30.0)]
    myocardium_intensity: f64,
    #[arg(long, default_value_t = 60.0)]
    background_intensity: f64,
}

#[derive(Args)]
struct LabelArgs {
    /// Keep cases 0, n, 2n, ... in sorted order.
    #[arg(long, default_value_t = 5)]
    every: usize,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Source of the remaining forest settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["classes", "model", "reference_classes"]))]
struct SegmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Class table written by `classify`.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Classify on the fly with this model instead.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Use the reference classes from each case's manifest.
    #[arg(long)]
    reference_classes: bool,
    /// Score against ground truth.
    #[arg(long)]
    gt: bool,
    /// Also run uniform parameter sets A, B and C.
    #[arg(long)]
    ablation: bool,
    /// Also run the registry with reference classes.
    #[arg(long)]
    oracle: bool,
    /// Write final masks as PGM under REPORTDIR/masks.
    #[arg(long)]
    dump_masks: bool,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Required: tuning scores against ground truth.
    #[arg(long, required = true)]
    gt: bool,
    #[arg(long)]
    grid: PathBuf,
    /// Written as a complete config carrying the tuned registry.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Group slices by these classes instead of the reference labels.
    #[arg(long)]
    classes: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_model(path: &Path) -> Result<RandomForestModel<f64>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_model(BufReader::new(f))?)
}

fn load_features(path: &Path) -> Result<Vec<FeatureVector<f64>>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_features_csv(BufReader::new(f))?)
}

fn load_cases(dir: &Path, cfg: &PipelineConfig, gt: bool) -> Result<Vec<StudyCase<f64>>> {
    discover_cases(dir)?
        .iter()
        .map(|p| load_case(p, cfg, gt).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn init_config(a: InitConfigArgs) -> Result<()> {
    fs::write(&a.out, PipelineConfig::default().to_toml()).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let template = PhantomSpec {
        n_slices: a.slices,
        image_size: (a.rows, a.cols),
        noise_sigma: a.noise_sigma,
        basal_fraction: a.basal_fraction,
        mid_fraction: a.mid_fraction,
        apical_fraction: a.apical_fraction,
        cavity_intensity: a.cavity_intensity,
        myocardium_intensity: a.myocardium_intensity,
        background_intensity: a.background_intensity,
        seed: a.seed,
    };
    template.validate()?;
    for i in 0..a.cases {
        let id = format!("case_{:03}", i + 1);
        let spec = PhantomSpec { seed: case_seed(a.seed, i), ..template.clone() };
        write_phantom_study(&a.out.join(&id), &spec, Some(&id))?;
    }
    println!("wrote {} cases to {}", a.cases, a.out.display());
    Ok(())
}

fn label(a: LabelArgs) -> Result<()> {
    if a.every == 0 {
        return Err(lvseg::Error::Config("--every must be at least 1".into()).into());
    }
    let cfg = config(a.config.as_deref())?;
    let paths = discover_cases(&a.input)?;
    let mut rows = Vec::new();
    let mut n_cases = 0;
    for p in paths.iter().step_by(a.every) {
        let case: StudyCase<f64> = load_case(p, &cfg, false)?;
        if case.true_classes.is_none() {
            return Err(lvseg::Error::MissingLabel { case_id: case.case_id, p: 1 }.into());
        }
        rows.extend(case.features(&cfg)?);
        n_cases += 1;
    }
    let f = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_features_csv(BufWriter::new(f), &rows)?;
    println!("wrote {} labeled slices from {} of {} cases", rows.len(), n_cases, paths.len());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut hyper = config(a.config.as_deref())?.forest;
    hyper.n_trees = a.trees;
    hyper.seed = a.seed;
    let data = load_features(&a.features)?;
    let model = train_forest(&data, &hyper)?;
    let f = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_model(BufWriter::new(f), &model)?;
    println!("trained {} trees on {} samples of dimension {}", hyper.n_trees, data.len(), model.feature_dim);
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let mut hyper = config(a.config.as_deref())?.forest;
    hyper.seed = a.seed;
    if let Some(t) = a.trees {
        hyper.n_trees = t;
    }
    let data = load_features(&a.features)?;
    let r = cross_validate(&data, a.k, &hyper)?;
    for (i, acc) in r.fold_accuracies.iter().enumerate() {
        println!("fold {:>2}: {acc:.4}", i + 1);
    }
    println!("mean accuracy: {:.4}", r.mean_accuracy);
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let cfg = config(a.config.as_deref())?;
    let model = load_model(&a.model)?;
    let mut rows = Vec::new();
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for case in load_cases(&a.input, &cfg, false)? {
        let classes = run_phase1(&case.slices, &model, &cfg)?;
        if let Some(t) = &case.true_classes {
            pred.extend_from_slice(&classes);
            truth.extend_from_slice(t);
        }
        for (s, c) in case.slices.iter().zip(classes) {
            rows.push((case.case_id.clone(), s.p, s.n, c));
        }
    }
    write_class_table(&a.out, &rows)?;
    println!("classified {} slices", rows.len());
    if !truth.is_empty() {
        let hits = pred.iter().zip(&truth).filter(|(p, t)| p == t).count();
        println!("accuracy against manifest labels: {:.4}", hits as f64 / truth.len() as f64);
        for (cls, s) in SliceClass::ALL.iter().zip(classification_report(&pred, &truth)?) {
            println!("{:<14} precision {:.4} recall {:.4} f1 {:.4}", cls.to_string(), s.precision, s.recall, s.f1);
        }
    }
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&a.config)?;
    let opts = StudyOptions { ablation: a.ablation, oracle: a.oracle, keep_masks: a.dump_masks };
    let table;
    let model;
    let source = if let Some(p) = &a.classes {
        table = read_class_table(p)?;
        ClassSource::Table(&table)
    } else if let Some(p) = &a.model {
        model = load_model(p)?;
        ClassSource::Model(&model)
    } else {
        ClassSource::Truth
    };
    let report = run_study(&a.input, &cfg, source, a.gt, opts)?;
    for f in &report.failures {
        eprintln!("case {} failed: {}", f.case_id, f.error);
    }
    emit_report(&report, &a.out)?;
    if a.dump_masks {
        dump_masks(&report, &a.out.join("masks"))?;
    }
    print!("{}", summary_table(&report));
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let mut cfg = config(a.config.as_deref())?;
    let text = fs::read_to_string(&a.grid).with_context(|| format!("reading {}", a.grid.display()))?;
    let grid = ParamGrid::from_toml(&text)?;
    let cases = load_cases(&a.input, &cfg, a.gt)?;
    let r = grid_search_params(&cases, &grid, &cfg)?;
    for cls in SliceClass::ALL {
        let e = r.registry.entry(cls);
        let pts = &r.evaluations[cls.index()];
        let best = pts.iter().map(|p| p.mean_dice).fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{:<14} lambda1 {} lambda2 {} nu {} shrink {}  mean Dice {:.4} over {} slices, {} points",
            cls.to_string(),
            e.params.lambda1,
            e.params.lambda2,
            e.params.nu,
            e.shrink.fraction,
            best,
            pts.first().map_or(0, |p| p.n_slices),
            pts.len()
        );
    }
    cfg.registry = r.registry;
    fs::write(&a.out, cfg.to_toml()).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = config(a.config.as_deref())?;
    let table = a.classes.as_deref().map(read_class_table).transpose()?;
    let report = evaluate_predictions(&a.pred, &a.gt, table.as_ref(), &cfg)?;
    let f = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_slice_csv(BufWriter::new(f), &report)?;
    print!("{}", summary_table(&report));
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<lvseg::Error>()).map(|e| e.kind()) {
        Some(ErrorKind::Usage) => 1,
        Some(ErrorKind::Numerical) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let res = match cli.command {
        Command::InitConfig(a) => init_config(a),
        Command::Synth(a) => synth(a),
        Command::Label(a) => label(a),
        Command::Train(a) => train(a),
        Command::CrossValidate(a) => cv(a),
        Command::Classify(a) => classify(a),
        Command::Segment(a) => segment(a),
        Command::Tune(a) => tune(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
