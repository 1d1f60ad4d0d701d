//! Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//!
//! Run with `cargo test -p lvseg --test acceptance`. The ACDC check runs
//! only when `LVSEG_ACDC_DIR` names a dataset directory and
//! `LVSEG_ACDC_LABELS` a `case_id,p,n,class` table for it.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use lvseg::classifier::{cross_validate, train_forest, write_model, FeaturesPerSplit, ForestHyper};
use lvseg::features::FeatureVector;
use lvseg::lgdacm::*;
use lvseg::maskgen::{adjust_intensity_unclamped, sequential_seed_masks, shrink_mask, MaskgenConfig};
use lvseg::metrics::{self, BoundaryField};
use lvseg::phantom::{generate_phantom_study, PhantomSpec};
use lvseg::pipeline::*;
use lvseg::volume::{extract_slices, SliceImage};
use lvseg::{BinaryMask, Grid, SliceClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

struct Suite {
    failed: usize,
}

impl Suite {
    fn run(&mut self, id: &str, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let t = Instant::now();
        let out = f();
        let took = t.elapsed();
        let over = limit.is_some_and(|l| took > l);
        let time = match limit {
            Some(l) => format!("{:.1}s, limit {}s", took.as_secs_f64(), l.as_secs()),
            None => format!("{:.1}s", took.as_secs_f64()),
        };
        let (tag, detail) = match out {
            Outcome::Pass(d) if over => ("FAIL", format!("{d}; over time")),
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        if tag == "FAIL" {
            self.failed += 1;
        }
        println!("{tag} [{id}] {name}: {detail} ({time})");
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn c1_metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_j = 0.0f64;
    let mut bad = 0;
    for _ in 0..1000 {
        let (da, db) = (rng.gen_range(0.02..0.9), rng.gen_range(0.02..0.9));
        let a = random_nonempty_mask(&mut rng, 64, 64, da);
        let b = random_nonempty_mask(&mut rng, 64, 64, db);
        let r = metrics::evaluate(&a, &b).unwrap();
        worst_j = worst_j.max((r.jaccard - r.dice / (2.0 - r.dice)).abs());
        let overlaps = [r.dice, r.jaccard, r.precision, r.recall, r.f1, r.accuracy, r.specificity, r.mae];
        if r.mad > r.hausdorff || overlaps.iter().any(|v| !(0.0..=1.0).contains(v)) {
            bad += 1;
        }
    }
    verdict(worst_j <= 1e-12 && bad == 0, format!("max |J - D/(2-D)| = {worst_j:.1e}, {bad} pairs violating bounds"))
}

fn c2_boundary_oracle() -> Outcome {
    let masks = all_small_masks(5, 5, 4);
    let fields: Vec<BoundaryField> = masks.iter().map(|m| BoundaryField::new(m).unwrap()).collect();
    let boundaries: Vec<Vec<(usize, usize)>> = masks.iter().map(brute_boundary).collect();
    let mut mismatches = 0usize;
    // Each mask's boundary and distance field against the definition.
    for (f, b) in fields.iter().zip(&boundaries) {
        let exact = f.boundary() == b.as_slice()
            && (0..25).all(|k| f.squared_distances()[k] == b.iter().map(|&q| sq_dist((k / 5, k % 5), q)).min().unwrap() as f64);
        mismatches += usize::from(!exact);
    }
    // Every ordered pair against the all-pairs oracle.
    let mut pairs = 0u64;
    for (i, fa) in fields.iter().enumerate() {
        for (j, fb) in fields.iter().enumerate() {
            let d = metrics::field_distances(fa, fb).unwrap();
            let (max_ab, mean_ab) = brute_directed(&boundaries[i], &boundaries[j]);
            let (max_ba, mean_ba) = brute_directed(&boundaries[j], &boundaries[i]);
            let exact = d.hausdorff == max_ab.max(max_ba) && d.mad == 0.5 * (mean_ab + mean_ba) && d.bde == mean_ab;
            mismatches += usize::from(!exact);
            pairs += 1;
        }
    }
    // The mask-level entry point on a sample of pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200_000 {
        let (i, j) = (rng.gen_range(0..masks.len()), rng.gen_range(0..masks.len()));
        let d = metrics::boundary_distances(&masks[i], &masks[j]).unwrap();
        let (h, mad, bde) = brute_distances(&masks[i], &masks[j]);
        mismatches += usize::from(!(d.hausdorff == h && d.mad == mad && d.bde == bde));
    }
    verdict(mismatches == 0, format!("{} masks, {pairs} ordered pairs, {mismatches} mismatches", masks.len()))
}

fn c3_hull_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    for _ in 0..1000 {
        let (r, c) = (rng.gen_range(1..=12), rng.gen_range(1..=12));
        let d = rng.gen_range(0.02..0.5);
        let m = random_nonempty_mask(&mut rng, r, c, d);
        let h = convex_hull_fill(&m).unwrap();
        let ok = h == brute_hull(&m) && m.is_subset_of(&h) && convex_hull_fill(&h).unwrap() == h;
        bad += usize::from(!ok);
    }
    verdict(bad == 0, format!("{bad} of 1000 masks disagree"))
}

fn c4_lgd_numerics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tol = 1e-8;
    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    for _ in 0..50 {
        let n = 16;
        let img = SliceImage::new(Grid::from_fn(n, n, |_, _| rng.gen_range(0.0..255.0)), 1, 1, "r");
        let phi = LevelSetField { phi: Grid::from_fn(n, n, |_, _| rng.gen_range(-4.0..4.0)) };
        let mut p = LgdParams::mid_ventricle();
        p.kernel_sigma = rng.gen_range(0.8..3.0);
        p.epsilon = rng.gen_range(0.5..2.0);
        p.lambda1 = rng.gen_range(0.5..4.0);
        p.lambda2 = rng.gen_range(0.5..4.0);
        let st = local_gaussian_stats(&img, &phi, &p).unwrap();
        let o = oracle_stats(&img.pixels, &phi.phi, &p);
        let (e1, e2) = local_energy_fields(&img, &phi, &p).unwrap();
        let [o1, o2] = oracle_energy_fields(&img.pixels, &o, &p);
        for k in 0..n * n {
            for (a, b) in [
                (&st.u1, &o.u[0]),
                (&st.u2, &o.u[1]),
                (&st.var1, &o.v[0]),
                (&st.var2, &o.v[1]),
                (&e1, &o1),
                (&e2, &o2),
            ] {
                worst = worst.max(rel(a.as_slice()[k], b.as_slice()[k]));
            }
        }
        worst = worst.max(rel(lgd_energy(&img, &phi, &p).unwrap(), oracle_energy(&img.pixels, &phi.phi, &p)));
    }

    let h = 1e-4;
    let mut fd_worst = 0.0f64;
    for eps in [0.5, 1.0, 2.0] {
        for i in 0..=2000 {
            let z = -10.0 + 0.01 * i as f64;
            let fd = (heaviside(z + h, eps) - heaviside(z - h, eps)) / (2.0 * h);
            fd_worst = fd_worst.max((fd - dirac(z, eps)).abs());
        }
    }

    let n = 64;
    let ctr = 31.5;
    let cone = Grid::from_fn(n, n, |r, c| (r as f64 - ctr).hypot(c as f64 - ctr));
    let k = curvature(&cone);
    let mut curv_worst = 0.0f64;
    for r in 3..n - 3 {
        for c in 3..n - 3 {
            let rad = (r as f64 - ctr).hypot(c as f64 - ctr);
            if rad > 5.0 {
                curv_worst = curv_worst.max((k.get(r, c) * rad - 1.0).abs());
            }
        }
    }
    verdict(
        worst <= tol && fd_worst <= 1e-6 && curv_worst < 0.05,
        format!("oracle rel. error {worst:.1e}, H/delta FD error {fd_worst:.1e}, curvature rel. error {:.2}%", 100.0 * curv_worst),
    )
}

fn c5_variance_discrimination() -> Outcome {
    let n = 96;
    let ctr = (n as f64 - 1.0) / 2.0;
    let disc = |shift: f64, rad: f64| {
        BinaryMask::from_fn(n, n, |r, c| (r as f64 - ctr - shift).powi(2) + (c as f64 - ctr - shift).powi(2) <= rad * rad)
    };
    let truth = disc(0.0, 25.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (inner, outer) = (Normal::new(120.0, 5.0).unwrap(), Normal::new(120.0, 40.0).unwrap());
    let img = Grid::from_fn(n, n, |r, c| if truth.get(r, c) { inner.sample(&mut rng) } else { outer.sample(&mut rng) });
    let s = SliceImage::new(img, 1, 1, "variance");
    let p = LgdParams {
        lambda1: 1.0,
        lambda2: 1.0,
        nu: 0.00003 * 255.0 * 255.0,
        init_height: 2.0,
        roi_margin: None,
        iterations: IterationRule::Fixed { count: 2500 },
        ..LgdParams::basal()
    };
    let seed = disc(3.0, 25.0);
    let phi = evolve_level_set(&s, &init_level_set(&seed, p.init_height).unwrap(), &p, 2500).unwrap();
    let before = metrics::dice(&seed, &truth).unwrap();
    let d = metrics::dice(&phi.positive_region(), &truth).unwrap();
    verdict(d >= 0.95, format!("Dice {d:.4} (seed {before:.4}), means 120/120, stds 5/40"))
}

fn c6_energy_descent() -> Outcome {
    let reg = ParameterRegistry::default();
    let st = generate_phantom_study(&PhantomSpec { seed: 6, ..PhantomSpec::default() }).unwrap();
    let slices = extract_slices(&st.volume);
    let seeds = sequential_seed_masks(&slices, &MaskgenConfig::default());
    let mut lines = Vec::new();
    let mut ok = true;
    for (i, s) in slices.iter().enumerate() {
        let cls = st.classes[i];
        assert_eq!(reg.entry(cls).params.tau, 0.05);
        let cand = seeds.masks[i].as_ref().expect("phantom cavity detected");
        let seed = shrink_mask(&cand.mask, &reg.entry(cls).shrink).unwrap();
        let r = segment_slice_traced(s, &seed, cls, &reg, true).unwrap();
        let steps = r.energy_trace.len() - 1;
        let down = r.energy_trace.windows(2).filter(|w| w[1] <= w[0]).count();
        let frac = down as f64 / steps as f64;
        ok &= r.final_energy < r.initial_energy && frac >= 0.95;
        lines.push(format!("{:.0}%", 100.0 * frac));
    }
    verdict(ok, format!("10 slices, non-increasing steps per slice: {}", lines.join(" ")))
}

fn c7_intensity_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let st = generate_phantom_study(&PhantomSpec { seed: 700 + i / 10, n_slices: 10, ..PhantomSpec::default() }).unwrap();
        let s = &extract_slices(&st.volume)[(i % 10) as usize];
        let beta = rng.gen_range(0.0..40.0);
        let adj = adjust_intensity_unclamped(s, beta).unwrap();
        worst = worst.max((adj.mean() - (50.0 + beta)).abs());
    }
    verdict(worst <= 1e-9, format!("max |mean - (50 + beta)| = {worst:.1e} over 100 slices"))
}

struct Trained {
    features: Vec<FeatureVector<f64>>,
    model: lvseg::classifier::RandomForestModel<f64>,
}

fn c8_classifier(cfg: &PipelineConfig, trained: &mut Option<Trained>) -> Outcome {
    let train = phantom_cases(&PhantomSpec::default(), 30, 1, cfg).unwrap();
    let features: Vec<_> = train.iter().flat_map(|c| c.features(cfg).unwrap()).collect();
    let cv = cross_validate(&features, 10, &cfg.forest).unwrap();
    let bytes = |m: &lvseg::classifier::RandomForestModel<f64>| {
        let mut v = Vec::new();
        write_model(&mut v, m).unwrap();
        v
    };
    let model = train_forest(&features, &cfg.forest).unwrap();
    let same = bytes(&model) == bytes(&train_forest(&features, &cfg.forest).unwrap());

    let single = ForestHyper {
        n_trees: 1,
        max_depth: None,
        min_samples_split: 2,
        features_per_split: FeaturesPerSplit::All,
        bootstrap: false,
        seed: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut cart_bad = 0;
    for trial in 0..500 {
        let n = rng.gen_range(2..=20);
        let dims = rng.gen_range(1..=3);
        let levels = if trial % 2 == 0 { 4 } else { 40 };
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.gen_range(0..levels) as f64 * 0.5).collect()).collect();
        let y: Vec<SliceClass> = (0..n).map(|_| SliceClass::ALL[rng.gen_range(0..3)]).collect();
        let data: Vec<_> = x
            .iter()
            .zip(&y)
            .enumerate()
            .map(|(i, (v, &c))| FeatureVector { values: v.clone(), label: Some(c), case_id: format!("t{i}"), p: 1, n: 1 })
            .collect();
        let tree = &train_forest(&data, &single).unwrap().trees[0];
        cart_bad += usize::from(!same_tree(&brute_cart(&x, &y, &(0..n).collect::<Vec<_>>()), tree, 0));
    }
    let n = features.len();
    *trained = Some(Trained { features, model });
    verdict(
        n == 300 && cv.mean_accuracy >= 0.95 && same && cart_bad == 0,
        format!(
            "{n} slices, 10-fold CV accuracy {:.4}, same-seed model bytes identical: {same}, CART oracle mismatches {cart_bad}/500",
            cv.mean_accuracy
        ),
    )
}

fn study(cfg: &PipelineConfig, model: &lvseg::classifier::RandomForestModel<f64>, threads: usize) -> (StudyReport, Duration) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let t = Instant::now();
        let test = phantom_cases(&PhantomSpec::default(), 20, 7, cfg).unwrap();
        let rep = run_study_cases(&test, ClassSource::Model(model), cfg, StudyOptions { ablation: true, ..StudyOptions::default() }).unwrap();
        (rep, t.elapsed())
    })
}

fn csv_bytes(r: &StudyReport) -> Vec<u8> {
    let mut v = Vec::new();
    write_slice_csv(&mut v, r).unwrap();
    v
}

fn overall(r: &RunResult) -> f64 {
    r.summary.dice(None).unwrap_or(0.0)
}

fn c9_study(rep: &StudyReport, took: Duration) -> Outcome {
    let main = &rep.runs[0];
    let dice = overall(main);
    let nf = main.summary.not_found_rate;
    verdict(
        dice >= 0.90 && nf <= 0.05 && rep.failures.is_empty() && took <= Duration::from_secs(300),
        format!(
            "20 cases, {} slices, Dice {dice:.4}, NotFound {:.1}%, class accuracy {:.3}, single-threaded study {:.0}s of 300s",
            main.summary.n_slices,
            100.0 * nf,
            rep.class_accuracy.unwrap_or(0.0),
            took.as_secs_f64()
        ),
    )
}

fn c10_ablation(rep: &StudyReport) -> Outcome {
    let reg = &rep.config.registry;
    let proposed = overall(&rep.runs[0]);
    let mut ok = true;
    let mut parts = vec![format!("Proposed {proposed:.4}")];
    let uniform: Vec<&RunResult> = SliceClass::ALL.iter().map(|&c| rep.run(&uniform_run_name(reg, c)).unwrap()).collect();
    for u in &uniform {
        ok &= proposed >= overall(u) - 0.01;
        parts.push(format!("{} {:.4}", u.name, overall(u)));
    }
    for cls in SliceClass::ALL {
        let own = uniform[cls.index()].summary.dice(Some(cls)).unwrap_or(0.0);
        let best = uniform.iter().map(|u| u.summary.dice(Some(cls)).unwrap_or(0.0)).fold(f64::MIN, f64::max);
        ok &= own >= best - 0.01;
        parts.push(format!("{cls}: own {own:.4} best {best:.4}"));
    }
    verdict(ok, parts.join(", "))
}

fn c11_determinism(single: &StudyReport, cfg: &PipelineConfig, model: &lvseg::classifier::RandomForestModel<f64>) -> Outcome {
    let n = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let (multi, _) = study(cfg, model, n);
    let (a, b) = (csv_bytes(single), csv_bytes(&multi));
    verdict(a == b, format!("slice CSV at 1 and {n} threads: {} bytes, identical: {}", a.len(), a == b))
}

fn c12_acdc(cfg: &PipelineConfig) -> Outcome {
    let (Ok(dir), Ok(labels)) = (std::env::var("LVSEG_ACDC_DIR"), std::env::var("LVSEG_ACDC_LABELS")) else {
        return Outcome::Skip("set LVSEG_ACDC_DIR and LVSEG_ACDC_LABELS to run".into());
    };
    let table = read_class_table(Path::new(&labels)).unwrap();
    let mut cases = Vec::new();
    for path in discover_cases(Path::new(&dir)).unwrap() {
        let mut case: StudyCase<f64> = load_case(&path, cfg, true).unwrap();
        case.true_classes = table.get(&case.case_id).cloned();
        if case.true_classes.is_some() {
            cases.push(case);
        }
    }
    let features: Vec<_> = cases.iter().flat_map(|c| c.features(cfg).unwrap()).collect();
    let cv = cross_validate(&features, 10, &cfg.forest).unwrap().mean_accuracy;
    let model = train_forest(&features, &cfg.forest).unwrap();
    let rep = run_study_cases(&cases, ClassSource::Model(&model), cfg, StudyOptions { ablation: true, ..StudyOptions::default() }).unwrap();
    let proposed = overall(&rep.runs[0]);
    let ordered = rep.runs[1..].iter().all(|u| proposed >= overall(u));
    let cv_note = if (cv - 0.9228).abs() <= 0.03 { "within" } else { "outside" };
    let dice_note = if (proposed - 0.88).abs() <= 0.05 { "within" } else { "outside" };
    let uniform: Vec<String> = rep.runs[1..].iter().map(|u| format!("{} {:.4}", u.name, overall(u))).collect();
    verdict(
        ordered,
        format!(
            "{} cases, CV accuracy {cv:.4} ({cv_note} 0.9228 +- 0.03), Dice {proposed:.4} ({dice_note} 0.88 +- 0.05), {}; ordering holds: {ordered}",
            cases.len(),
            uniform.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let mut suite = Suite { failed: 0 };
    let cfg = PipelineConfig::default();
    suite.run("1", "metric identities", secs(5), c1_metric_identities);
    suite.run("2", "boundary-distance oracle", secs(60), c2_boundary_oracle);
    suite.run("3", "convex-hull oracle", secs(10), c3_hull_oracle);
    suite.run("4", "LGD numerics", secs(30), c4_lgd_numerics);
    suite.run("5", "variance discrimination", secs(60), c5_variance_discrimination);
    suite.run("6", "energy descent", secs(120), c6_energy_descent);
    suite.run("7", "intensity-adjustment identity", None, c7_intensity_identity);
    let mut trained = None;
    suite.run("8", "classifier", secs(180), || c8_classifier(&cfg, &mut trained));
    let Trained { model, features } = trained.expect("classifier criterion trains the model");
    drop(features);
    let (single, took) = study(&cfg, &model, 1);
    suite.run("9", "end-to-end phantom study", None, || c9_study(&single, took));
    suite.run("10", "ablation ordering", None, || c10_ablation(&single));
    suite.run("11", "determinism across thread counts", None, || c11_determinism(&single, &cfg, &model));
    suite.run("12", "ACDC (dataset-gated)", None, || c12_acdc(&cfg));
    println!();
    print!("{}", summary_table(&single));
    if suite.failed == 0 {
        println!("acceptance: all criteria passed or skipped");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", suite.failed);
        ExitCode::FAILURE
    }
}
