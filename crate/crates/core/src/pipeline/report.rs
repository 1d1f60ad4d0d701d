//! Study aggregation and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{SliceOutcome, StudyReport};
use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;

/// Per-slice CSV file name inside a report directory.
pub const SLICE_CSV: &str = "slices.csv";

/// Mean of every metric over `count` evaluated slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub count: usize,
    pub mean: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Indexed by [`SliceClass::index`]; `None` when no slice of the class
    /// was evaluated.
    pub per_class: [Option<Aggregate>; 3],
    pub overall: Option<Aggregate>,
    pub n_slices: usize,
    pub n_not_found: usize,
    pub not_found_rate: f64,
}

impl Summary {
    pub fn dice(&self, cls: Option<SliceClass>) -> Option<f64> {
        match cls {
            Some(c) => self.per_class[c.index()].map(|a| a.mean.dice),
            None => self.overall.map(|a| a.mean.dice),
        }
    }
}

fn mean_of(sums: [f64; 11], count: usize) -> Option<Aggregate> {
    (count > 0).then(|| Aggregate { count, mean: MetricReport::from_values(sums.map(|s| s / count as f64)) })
}

/// Aggregates slice outcomes. Undetected slices count toward the NotFound
/// rate only; slices are grouped by [`SliceOutcome::group`]. The overall
/// mean is taken over all evaluated slices, which equals the slice-count
/// weighted mean of the class means.
pub fn summarize<'a>(slices: impl IntoIterator<Item = &'a SliceOutcome>) -> Summary {
    let mut sums = [[0.0; 11]; 3];
    let mut counts = [0usize; 3];
    let mut all = [0.0; 11];
    let (mut n, mut missing) = (0usize, 0usize);
    for s in slices {
        n += 1;
        missing += usize::from(s.not_found);
        if let Some(m) = &s.metrics {
            let k = s.group().index();
            counts[k] += 1;
            for (j, v) in m.values().into_iter().enumerate() {
                sums[k][j] += v;
                all[j] += v;
            }
        }
    }
    let total: usize = counts.iter().sum();
    Summary {
        per_class: [0, 1, 2].map(|k| mean_of(sums[k], counts[k])),
        overall: mean_of(all, total),
        n_slices: n,
        n_not_found: missing,
        not_found_rate: if n > 0 { missing as f64 / n as f64 } else { 0.0 },
    }
}

const FIXED_COLUMNS: [&str; 12] = [
    "run",
    "case_id",
    "p",
    "n",
    "class",
    "reference_class",
    "param_set",
    "not_found",
    "iterations",
    "initial_energy",
    "final_energy",
    "hull_applied",
];

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// One row per slice and run. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_slice_csv<W: std::io::Write>(w: W, report: &StudyReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
    header.extend(MetricReport::ROW_NAMES);
    out.write_record(&header).map_err(csv_err)?;
    for run in &report.runs {
        for s in run.cases.iter().flat_map(|c| &c.slices) {
            let mut rec = vec![
                run.name.clone(),
                s.case_id.clone(),
                s.p.to_string(),
                s.n.to_string(),
                s.predicted.token().to_string(),
                s.truth.map(|t| t.token().to_string()).unwrap_or_default(),
                s.param_set.clone(),
                s.not_found.to_string(),
                s.iterations_run.to_string(),
                s.initial_energy.to_string(),
                s.final_energy.to_string(),
                s.hull_applied.to_string(),
            ];
            match &s.metrics {
                Some(m) => rec.extend(m.values().iter().map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 11)),
            }
            out.write_record(&rec).map_err(csv_err)?;
        }
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Reads a slice CSV back as `(run name, outcome)` pairs; masks are not
/// stored and come back as `None`.
pub fn read_slice_csv(path: &Path) -> Result<Vec<(String, SliceOutcome)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let bad = |what: &str, v: &str| Error::Parse(format!("slice CSV: bad {what} {v:?}"));
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != FIXED_COLUMNS.len() + 11 {
            return Err(Error::Parse(format!("slice CSV row has {} fields", rec.len())));
        }
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad("integer", &rec[i]));
        let real = |i: usize| rec[i].parse::<f64>().map_err(|_| bad("number", &rec[i]));
        let flag = |i: usize| rec[i].parse::<bool>().map_err(|_| bad("flag", &rec[i]));
        let metrics = if rec[12].is_empty() {
            None
        } else {
            let mut v = [0.0; 11];
            for (j, slot) in v.iter_mut().enumerate() {
                *slot = real(12 + j)?;
            }
            Some(MetricReport::from_values(v))
        };
        let outcome = SliceOutcome {
            case_id: rec[1].to_string(),
            p: int(2)?,
            n: int(3)?,
            predicted: rec[4].parse()?,
            truth: if rec[5].is_empty() { None } else { Some(rec[5].parse()?) },
            param_set: rec[6].to_string(),
            not_found: flag(7)?,
            iterations_run: int(8)?,
            initial_energy: real(9)?,
            final_energy: real(10)?,
            hull_applied: flag(11)?,
            metrics,
            mask: None,
        };
        out.push((rec[0].to_string(), outcome));
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

const CLASS_HEADS: [&str; 3] = ["Basal", "Mid-ventricle", "Apical"];

/// Plain-text summary: a Dice table with one row per run, then every
/// metric by class for the registry run.
pub fn summary_table(report: &StudyReport) -> String {
    let mut s = String::new();
    let main = &report.runs[0];
    let _ = writeln!(s, "cases: {}", main.cases.len());
    let _ = writeln!(s, "slices: {}", main.summary.n_slices);
    if let Some(a) = report.class_accuracy {
        let _ = writeln!(s, "slice classification accuracy: {a:.4}");
    }
    for f in &report.failures {
        let _ = writeln!(s, "failed case {}: {}", f.case_id, f.error);
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Dice by parameter setting");
    let _ = writeln!(
        s,
        "{:<30} {:>10} {:>14} {:>10} {:>10} {:>10}",
        "Setting", CLASS_HEADS[0], CLASS_HEADS[1], CLASS_HEADS[2], "Overall", "NotFound"
    );
    for run in &report.runs {
        let d = |c| cell(run.summary.dice(c));
        let _ = writeln!(
            s,
            "{:<30} {:>10} {:>14} {:>10} {:>10} {:>10.4}",
            run.name,
            d(Some(SliceClass::Basal)),
            d(Some(SliceClass::MidVentricle)),
            d(Some(SliceClass::Apical)),
            d(None),
            run.summary.not_found_rate
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Evaluation scores ({})", main.name);
    let _ = writeln!(
        s,
        "{:<36} {:>10} {:>14} {:>10} {:>10}",
        "Metric", CLASS_HEADS[0], CLASS_HEADS[1], CLASS_HEADS[2], "Overall"
    );
    let sm = &main.summary;
    for (j, name) in MetricReport::ROW_NAMES.iter().enumerate() {
        let v = |a: &Option<super::Aggregate>| cell(a.map(|a| a.mean.values()[j]));
        let _ = writeln!(
            s,
            "{:<36} {:>10} {:>14} {:>10} {:>10}",
            name,
            v(&sm.per_class[0]),
            v(&sm.per_class[1]),
            v(&sm.per_class[2]),
            v(&sm.overall)
        );
    }
    let counts: Vec<String> = sm.per_class.iter().map(|a| a.map_or(0, |a| a.count).to_string()).collect();
    let _ = writeln!(s, "{:<36} {:>10} {:>14} {:>10} {:>10}", "Evaluated slices", counts[0], counts[1], counts[2], sm.overall.map_or(0, |a| a.count));
    let _ = writeln!(s);
    let _ = writeln!(s, "Notes");
    let _ = writeln!(s, "MAD is the average symmetric boundary distance; BDE is the mean distance from the predicted boundary to the reference boundary. Both are in pixels.");
    let _ = writeln!(s, "Slices are grouped by reference class when known, otherwise by predicted class.");
    let _ = writeln!(s, "Undetected slices count toward NotFound only. A contour that vanished scores Dice 0 with distances set to the image diagonal.");
    let _ = writeln!(s, "Slices whose reference cavity is empty are not scored.");
    s
}

/// Per-class means in long form: one row per run and metric.
fn write_summary_csv(path: &Path, report: &StudyReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["run", "metric", "basal", "mid", "apical", "overall"]).map_err(csv_err)?;
    for run in &report.runs {
        let sm = &run.summary;
        let fmt = |a: &Option<Aggregate>, j: usize| a.map(|a| a.mean.values()[j].to_string()).unwrap_or_default();
        for (j, name) in MetricReport::ROW_NAMES.iter().enumerate() {
            w.write_record([
                run.name.clone(),
                name.to_string(),
                fmt(&sm.per_class[0], j),
                fmt(&sm.per_class[1], j),
                fmt(&sm.per_class[2], j),
                fmt(&sm.overall, j),
            ])
            .map_err(csv_err)?;
        }
        w.write_record([
            run.name.clone(),
            "NotFound rate".into(),
            String::new(),
            String::new(),
            String::new(),
            sm.not_found_rate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `slices.csv`, `summary.csv`, `summary.txt` and the exact
/// `config.toml` into `dir`.
pub fn emit_report(report: &StudyReport, dir: &Path) -> Result<()> {
    if report.runs.first().is_none_or(|r| r.cases.is_empty()) {
        return Err(Error::EmptyStudy);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let slices = dir.join(SLICE_CSV);
    let f = fs::File::create(&slices).map_err(|e| Error::io(&slices, e))?;
    write_slice_csv(std::io::BufWriter::new(f), report)?;
    write_summary_csv(&dir.join("summary.csv"), report)?;
    let txt = dir.join("summary.txt");
    fs::write(&txt, summary_table(report)).map_err(|e| Error::io(&txt, e))?;
    let cfg = dir.join("config.toml");
    fs::write(&cfg, report.config.to_toml()).map_err(|e| Error::io(&cfg, e))
}
