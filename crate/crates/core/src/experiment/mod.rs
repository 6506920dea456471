//! Monte-Carlo studies comparing the motion priors: estimation accuracy,
//! interpolation quality and computational cost.

mod config;
mod studies;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::Method;

pub use config::ExperimentConfig;
pub use studies::{
    fine_times, interpolate, interpolation_times, run_accuracy_study, run_cost_study, run_interpolation_study,
    solve_trial, TrialInput,
};

/// Version of the CSV and manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Accuracy,
    Interp,
    Cost,
}

impl Study {
    pub const ALL: [Study; 3] = [Study::Accuracy, Study::Interp, Study::Cost];

    pub fn name(self) -> &'static str {
        match self {
            Study::Accuracy => "accuracy",
            Study::Interp => "interp",
            Study::Cost => "cost",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig, allow_nonconverged: bool) -> Result<Vec<Row>> {
        match self {
            Study::Accuracy => run_accuracy_study(cfg, allow_nonconverged),
            Study::Interp => run_interpolation_study(cfg, allow_nonconverged),
            Study::Cost => run_cost_study(cfg, allow_nonconverged),
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Study {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Study::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown study '{s}'")))
    }
}

/// One value of one metric for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    pub k_meas: usize,
    pub trial: usize,
    pub metric: String,
    pub value: f64,
}

impl Row {
    pub fn new(method: Method, k_meas: usize, trial: usize, metric: &str, value: f64) -> Self {
        Row { method: method.name().into(), k_meas, trial, metric: metric.into(), value }
    }

    pub fn key_cmp(a: &Row, b: &Row) -> Ordering {
        (&a.method, a.k_meas, a.trial, &a.metric).cmp(&(&b.method, b.k_meas, b.trial, &b.metric))
    }
}

/// Distribution of one metric over the trials of a sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub k_meas: usize,
    pub metric: String,
    pub stat: String,
    pub value: f64,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Median, quartiles and range per (method, k_meas, metric), in long format.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.clone(), r.k_meas, r.metric.clone())).or_default().push(r.value);
    }
    let mut out = Vec::new();
    for ((method, k_meas, metric), mut v) in groups {
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let stats = [
            ("n", n),
            ("min", v[0]),
            ("q1", quantile(&v, 0.25)),
            ("median", quantile(&v, 0.5)),
            ("q3", quantile(&v, 0.75)),
            ("max", v[v.len() - 1]),
        ];
        for (stat, value) in stats {
            out.push(SummaryRow { method: method.clone(), k_meas, metric: metric.clone(), stat: stat.into(), value });
        }
    }
    out
}

/// Median of `metric` for one sweep point.
pub fn median_of(rows: &[Row], method: Method, k_meas: usize, metric: &str) -> f64 {
    let mut v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method.name() && r.k_meas == k_meas && r.metric == metric)
        .map(|r| r.value)
        .collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub const ROW_HEADER: [&str; 5] = ["method", "k_meas", "trial", "metric", "value"];
pub const SUMMARY_HEADER: [&str; 5] = ["method", "k_meas", "metric", "stat", "value"];

/// Reproducibility record written next to the tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub package: String,
    pub version: String,
    pub studies: Vec<Study>,
    pub allow_nonconverged: bool,
    pub config: ExperimentConfig,
    pub seeds: SeedInfo,
    pub fine_reference: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedInfo {
    pub base: u64,
    pub truth: u64,
    pub trial_rule: String,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, studies: &[Study], allow_nonconverged: bool) -> Self {
        let files = studies
            .iter()
            .flat_map(|s| [format!("{s}.csv"), format!("{s}_summary.csv")])
            .chain(std::iter::once("manifest.json".to_string()))
            .collect();
        Manifest {
            schema_version: SCHEMA_VERSION,
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            studies: studies.to_vec(),
            allow_nonconverged,
            config: cfg.clone(),
            seeds: SeedInfo {
                base: cfg.seed,
                truth: cfg.seed,
                trial_rule: "base * 1000000 + k_meas * 1000 + trial".into(),
            },
            fine_reference: format!(
                "steam with knots at {}*k_meas evenly spaced times merged with the measurement times; \
                 measurements only at the original measurement times",
                cfg.fine_factor
            ),
            files,
        }
    }
}

/// Writes one study's raw and summary tables; returns their paths.
pub fn emit_study(dir: &Path, study: Study, rows: &[Row]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let raw = dir.join(format!("{study}.csv"));
    let summary = dir.join(format!("{study}_summary.csv"));
    write_csv(&raw, rows, &ROW_HEADER)?;
    write_csv(&summary, &summarize(rows), &SUMMARY_HEADER)?;
    Ok(vec![raw, summary])
}

pub fn emit_manifest(dir: &Path, manifest: &Manifest) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

/// Runs the studies in order and writes every output file.
pub fn run(cfg: &ExperimentConfig, studies: &[Study], out: &Path, allow_nonconverged: bool) -> Result<()> {
    cfg.validate()?;
    for &study in studies {
        let rows = study.run(cfg, allow_nonconverged)?;
        emit_study(out, study, &rows)?;
    }
    emit_manifest(out, &Manifest::new(cfg, studies, allow_nonconverged))?;
    Ok(())
}
