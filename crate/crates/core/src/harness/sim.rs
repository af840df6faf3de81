use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{fmt_f64, write_json};
use crate::config::EstimatorConfig;
use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::estimators::{estimate_ate, EstimateResult};
use crate::metrics::{aggregate, SummaryStats};
use crate::seed::mix64;

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const TIMINGS_FILE: &str = "timings.csv";

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dgp: DgpSpec,
    pub estimators: Vec<EstimatorConfig>,
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "one")]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Write wall-clock times into the results table. Off by default so the
    /// table is byte-reproducible; timings always go to a separate file.
    #[serde(default)]
    pub record_runtime: bool,
}

impl SimConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.estimators.is_empty() {
            return Err(Error::InvalidConfig("estimator list is empty".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        for e in &self.estimators {
            e.validate()?;
        }
        Ok(())
    }

    /// Estimator labels, with a `#i` suffix on repeats so every label is unique.
    pub fn labels(&self) -> Vec<String> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        self.estimators
            .iter()
            .map(|e| {
                let base = e.label();
                let c = seen.entry(base.clone()).or_insert(0);
                *c += 1;
                if *c == 1 {
                    base
                } else {
                    format!("{base} #{c}")
                }
            })
            .collect()
    }
}

/// Column order of the per-repetition results table.
pub const REP_RECORD_FIELDS: [&str; 26] = [
    "rep",
    "dgp",
    "dgp_params",
    "n",
    "p",
    "model",
    "algorithm",
    "calibration",
    "learner_m",
    "learner_g",
    "clip",
    "theta_true",
    "theta_hat",
    "se",
    "ci_low",
    "ci_high",
    "covered",
    "abs_error",
    "ece_uniform",
    "ece_quantile",
    "norm_treated",
    "norm_control",
    "warnings",
    "runtime_ms",
    "estimator",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub dgp: String,
    pub dgp_params: String,
    pub n: usize,
    pub p: usize,
    pub model: String,
    pub algorithm: String,
    pub calibration: String,
    pub learner_m: String,
    pub learner_g: String,
    pub clip: f64,
    pub theta_true: f64,
    pub theta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub covered: u8,
    pub abs_error: f64,
    pub ece_uniform: f64,
    pub ece_quantile: f64,
    pub norm_treated: f64,
    pub norm_control: f64,
    pub warnings: usize,
    pub runtime_ms: f64,
    pub estimator: String,
    pub error: String,
}

impl RepRecord {
    pub fn to_fields(&self) -> Vec<String> {
        vec![
            self.rep.to_string(),
            self.dgp.clone(),
            self.dgp_params.clone(),
            self.n.to_string(),
            self.p.to_string(),
            self.model.clone(),
            self.algorithm.clone(),
            self.calibration.clone(),
            self.learner_m.clone(),
            self.learner_g.clone(),
            fmt_f64(self.clip),
            fmt_f64(self.theta_true),
            fmt_f64(self.theta_hat),
            fmt_f64(self.se),
            fmt_f64(self.ci_low),
            fmt_f64(self.ci_high),
            self.covered.to_string(),
            fmt_f64(self.abs_error),
            fmt_f64(self.ece_uniform),
            fmt_f64(self.ece_quantile),
            fmt_f64(self.norm_treated),
            fmt_f64(self.norm_control),
            self.warnings.to_string(),
            fmt_f64(self.runtime_ms),
            self.estimator.clone(),
            self.error.clone(),
        ]
    }

    pub fn failed(&self) -> bool {
        !self.error.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub records: Vec<RepRecord>,
    pub summary: BTreeMap<String, SummaryStats>,
    /// Wall-clock milliseconds per record, aligned with `records`.
    pub timings: Vec<f64>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

fn run_rep(config: &SimConfig, labels: &[String], rep: usize) -> Vec<(RepRecord, f64)> {
    let seed_r = mix64(config.base_seed, rep as u64);
    let generated = config.dgp.generate(mix64(seed_r, 0));
    let est_seed = mix64(seed_r, 1);
    let dgp = &config.dgp;
    config
        .estimators
        .iter()
        .zip(labels)
        .map(|(est, label)| {
            let start = Instant::now();
            let (theta_true, outcome) = match &generated {
                Ok((data, truth)) => {
                    let r = catch_unwind(AssertUnwindSafe(|| {
                        estimate_ate(data, est, est_seed, Some(truth))
                    }));
                    let r = match r {
                        Ok(r) => r.map_err(|e| e.to_string()),
                        Err(p) => Err(format!("panic: {}", panic_message(p))),
                    };
                    (truth.ate, r)
                }
                Err(e) => (f64::NAN, Err(format!("data generation: {e}"))),
            };
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let mut rec = RepRecord {
                rep,
                dgp: dgp.name().to_string(),
                dgp_params: dgp.params_label(),
                n: dgp.n(),
                p: dgp.p(),
                model: est.model.name().to_string(),
                algorithm: est.algorithm.name().to_string(),
                calibration: est.calibration.name().to_string(),
                learner_m: est.learner_m.kind_name().to_string(),
                learner_g: est.learner_g.kind_name().to_string(),
                clip: est.clip,
                theta_true,
                theta_hat: f64::NAN,
                se: f64::NAN,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
                covered: 0,
                abs_error: f64::NAN,
                ece_uniform: f64::NAN,
                ece_quantile: f64::NAN,
                norm_treated: f64::NAN,
                norm_control: f64::NAN,
                warnings: 0,
                runtime_ms: if config.record_runtime { ms } else { 0.0 },
                estimator: label.clone(),
                error: String::new(),
            };
            match outcome {
                Ok(r) => fill(&mut rec, &r),
                Err(e) => rec.error = e.replace(['\n', '\r'], " "),
            }
            (rec, ms)
        })
        .collect()
}

fn fill(rec: &mut RepRecord, r: &EstimateResult) {
    let diag = |k: &str| r.diagnostics.get(k).copied().unwrap_or(f64::NAN);
    rec.theta_hat = r.theta_hat;
    rec.se = r.se;
    rec.ci_low = r.ci_low;
    rec.ci_high = r.ci_high;
    rec.covered = (r.ci_low <= rec.theta_true && rec.theta_true <= r.ci_high) as u8;
    rec.abs_error = (r.theta_hat - rec.theta_true).abs();
    rec.ece_uniform = diag("ece_uniform");
    rec.ece_quantile = diag("ece_quantile");
    rec.norm_treated = diag("norm_treated");
    rec.norm_control = diag("norm_control");
    rec.warnings = r.warnings.len();
}

/// Summaries per estimator label from a list of records. Failed repetitions
/// are left out of the statistics.
pub fn summarize(records: &[RepRecord]) -> BTreeMap<String, SummaryStats> {
    let mut groups: BTreeMap<&str, (f64, Vec<(f64, f64, f64)>)> = BTreeMap::new();
    for r in records {
        let g = groups
            .entry(&r.estimator)
            .or_insert((r.theta_true, Vec::new()));
        if !r.failed() {
            g.1.push((r.theta_hat, r.ci_low, r.ci_high));
        }
    }
    groups
        .into_iter()
        .map(|(k, (t, v))| (k.to_string(), aggregate(&v, t)))
        .collect()
}

/// Runs every repetition on a pool of `config.threads` workers. Output order
/// is repetition-major, estimator order within a repetition.
pub fn run_simulation(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let labels = config.labels();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let per_rep: Vec<Vec<(RepRecord, f64)>> = pool.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|r| run_rep(config, &labels, r))
            .collect()
    });
    let (records, timings): (Vec<RepRecord>, Vec<f64>) = per_rep.into_iter().flatten().unzip();
    let summary = summarize(&records);
    Ok(SimOutput {
        records,
        summary,
        timings,
    })
}

pub fn write_results_csv(path: &Path, records: &[RepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REP_RECORD_FIELDS)?;
    for r in records {
        w.write_record(r.to_fields())?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(s: &str, row: usize, col: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Ingest {
        row,
        msg: format!("column `{col}`: cannot parse `{s}`"),
    })
}

pub fn read_results_csv(path: &Path) -> Result<Vec<RepRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    for f in REP_RECORD_FIELDS {
        if !header.iter().any(|h| h == f) {
            return Err(Error::MissingColumn(f.to_string()));
        }
    }
    let idx = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Ingest {
            row,
            msg: e.to_string(),
        })?;
        let s = |name: &str| rec.get(idx(name)).unwrap_or("").to_string();
        let f = |name: &str| parse_f64(rec.get(idx(name)).unwrap_or(""), row, name);
        let u = |name: &str| -> Result<usize> {
            s(name).parse().map_err(|_| Error::Ingest {
                row,
                msg: format!("column `{name}` is not an integer"),
            })
        };
        out.push(RepRecord {
            rep: u("rep")?,
            dgp: s("dgp"),
            dgp_params: s("dgp_params"),
            n: u("n")?,
            p: u("p")?,
            model: s("model"),
            algorithm: s("algorithm"),
            calibration: s("calibration"),
            learner_m: s("learner_m"),
            learner_g: s("learner_g"),
            clip: f("clip")?,
            theta_true: f("theta_true")?,
            theta_hat: f("theta_hat")?,
            se: f("se")?,
            ci_low: f("ci_low")?,
            ci_high: f("ci_high")?,
            covered: u("covered")? as u8,
            abs_error: f("abs_error")?,
            ece_uniform: f("ece_uniform")?,
            ece_quantile: f("ece_quantile")?,
            norm_treated: f("norm_treated")?,
            norm_control: f("norm_control")?,
            warnings: u("warnings")?,
            runtime_ms: f("runtime_ms")?,
            estimator: s("estimator"),
            error: s("error"),
        });
    }
    Ok(out)
}

/// Writes the results table, summary, resolved config and timings into `dir`.
pub fn write_outputs(dir: &Path, config: &SimConfig, out: &SimOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(&dir.join(RESULTS_FILE), &out.records)?;
    write_json(&dir.join(SUMMARY_FILE), &out.summary)?;
    write_json(&dir.join(RESOLVED_CONFIG_FILE), config)?;
    let mut w = csv::Writer::from_path(dir.join(TIMINGS_FILE))?;
    w.write_record(["rep", "estimator", "runtime_ms"])?;
    for (r, ms) in out.records.iter().zip(&out.timings) {
        w.write_record([r.rep.to_string(), r.estimator.clone(), format!("{ms:.3}")])?;
    }
    w.flush()?;
    Ok(())
}
