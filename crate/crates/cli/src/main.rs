use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use caldml::calibration::clip_probs;
use caldml::config::DEFAULT_CLIP;
use caldml::estimators::fit_nuisances;
use caldml::harness::{
    estimate_from_file, read_dataset_csv, read_results_csv, read_scores_csv, run_simulation,
    summarize, write_bins_csv, write_outputs, write_smd_csv, RESULTS_FILE,
};
use caldml::learners::LearnerSpec;
use caldml::metrics::{ece, ipw_weights, overlap_ratio_bins, smd, Binning};
use caldml::{Algorithm, CalibrationMethod, Error, EstimatorConfig, Model, SimConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "caldml",
    version,
    about = "Calibrated propensity scores for DML ATE estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo simulation grid from a JSON config.
    Simulate(SimulateArgs),
    /// Estimate the ATE on a CSV dataset.
    Estimate(EstimateArgs),
    /// Calibration and balance diagnostics for propensity scores.
    Diagnose(DiagnoseArgs),
    /// Summarize a results directory written by `simulate`.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "CALDML_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: Model,
    #[arg(long)]
    algorithm: Algorithm,
    #[arg(long)]
    calibration: CalibrationMethod,
    /// Learner name (`logit`, `linear`, `gbt`, `rf`) or a JSON spec.
    #[arg(long)]
    learner_m: LearnerSpec,
    #[arg(long)]
    learner_g: LearnerSpec,
    #[arg(long, default_value_t = DEFAULT_CLIP)]
    clip: f64,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    data: PathBuf,
    /// One propensity score per data row.
    #[arg(
        long,
        required_unless_present = "learner_m",
        conflicts_with = "learner_m"
    )]
    scores: Option<PathBuf>,
    /// Cross-fit propensity scores with this learner instead.
    #[arg(long)]
    learner_m: Option<LearnerSpec>,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidData(_)
            | Error::InvalidPartition(_)
            | Error::InvalidSplit(_)
            | Error::InvalidConfig(_)
            | Error::DimensionMismatch { .. }
            | Error::Ingest { .. }
            | Error::MissingColumn(_)
            | Error::Csv(_)
            | Error::Json(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "cannot read `{}`: no such file",
            path.display()
        )))
    }
}

fn simulate(args: SimulateArgs) -> CliResult {
    require_file(&args.config)?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Usage(format!("cannot read `{}`: {e}", args.config.display())))?;
    let mut config: SimConfig = serde_json::from_str(&text).map_err(Error::from)?;
    if let Some(r) = args.reps {
        config.reps = r;
    }
    if let Some(s) = args.seed {
        config.base_seed = s;
    }
    if let Some(t) = args.threads {
        config.threads = t;
    }
    if let Some(o) = args.out {
        config.output_dir = Some(o);
    }
    config.validate()?;
    let Some(dir) = config.output_dir.clone() else {
        return Err(Failure::Usage(
            "no output directory: pass --out or set output_dir".into(),
        ));
    };
    let out = run_simulation(&config)?;
    write_outputs(&dir, &config, &out)?;
    let failed = out.records.iter().filter(|r| r.failed()).count();
    eprintln!(
        "wrote {} records ({failed} failed) to {}",
        out.records.len(),
        dir.display()
    );
    for (label, s) in &out.summary {
        let line = json!({ "estimator": label, "summary": s });
        println!("{line}");
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> CliResult {
    require_file(&args.data)?;
    let mut config = EstimatorConfig::new(
        args.model,
        args.algorithm,
        args.calibration,
        args.learner_m,
        args.learner_g,
    )
    .with_clip(args.clip);
    if let Some(k) = args.folds {
        config = config.with_folds(k);
    }
    let r = estimate_from_file(&args.data, &config, args.seed)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", serde_json::to_string(&r).map_err(Error::from)?);
    Ok(())
}

fn diagnose(args: DiagnoseArgs) -> CliResult {
    require_file(&args.data)?;
    if args.bins == 0 {
        return Err(Failure::Usage("--bins must be >= 1".into()));
    }
    let data = read_dataset_csv(&args.data)?;
    let scores = match (&args.scores, args.learner_m) {
        (Some(path), _) => {
            require_file(path)?;
            let s = read_scores_csv(path)?;
            if s.len() != data.n() {
                return Err(Failure::Usage(format!(
                    "{} scores for {} data rows",
                    s.len(),
                    data.n()
                )));
            }
            if s.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Failure::Usage("scores must lie in [0, 1]".into()));
            }
            s
        }
        (None, Some(spec)) => {
            let c = EstimatorConfig::new(
                Model::Ipw,
                Algorithm::Alg1,
                CalibrationMethod::None,
                spec,
                LearnerSpec::Linear,
            );
            let mut warnings = Vec::new();
            let nu = fit_nuisances(&data, &c, args.seed, None, &mut warnings)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            nu.m_raw
        }
        (None, None) => unreachable!("clap enforces one score source"),
    };
    let d = data.d();
    let ece_u = ece(&scores, d, args.bins, Binning::Uniform, 1.0)?;
    let ece_q = ece(&scores, d, args.bins, Binning::Quantile, 1.0)?;
    let table = overlap_ratio_bins(&scores, d, args.bins)?;
    let clipped = clip_probs(&scores, DEFAULT_CLIP)?;
    let (smd_values, degenerate) = smd(data.x(), d, &ipw_weights(d, &clipped))?;
    for k in degenerate {
        eprintln!(
            "warning: covariate x{} has zero pooled variance; SMD is NaN",
            k + 1
        );
    }
    std::fs::create_dir_all(&args.out).map_err(Error::from)?;
    write_bins_csv(&args.out.join("bins.csv"), &table)?;
    write_smd_csv(&args.out.join("smd.csv"), &smd_values)?;
    let max_smd = smd_values
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let line = json!({
        "n": data.n(),
        "bins": args.bins,
        "ece_uniform": ece_u,
        "ece_quantile": ece_q,
        "bin_counts_total": table.total(),
        "max_abs_smd": max_smd,
    });
    println!("{line}");
    eprintln!("wrote bins.csv and smd.csv to {}", args.out.display());
    Ok(())
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "NaN".into()
    }
}

fn report(args: ReportArgs) -> CliResult {
    let path = args.input.join(RESULTS_FILE);
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "no {RESULTS_FILE} in `{}`",
            args.input.display()
        )));
    }
    let records = read_results_csv(&path)?;
    if records.is_empty() {
        return Err(Failure::Usage(format!(
            "`{}` has no result rows",
            path.display()
        )));
    }
    let summary = summarize(&records);
    let mut failures: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &records {
        *failures.entry(&r.estimator).or_default() += r.failed() as usize;
    }
    let width = summary.keys().map(String::len).max().unwrap_or(9).max(9);
    eprintln!(
        "{:<width$}  {:>10}  {:>10}  {:>10}  {:>8}  {:>9}  {:>5}  {:>8}",
        "estimator", "MAE", "RMSE", "std", "coverage", "CI length", "reps", "failures"
    );
    for (label, s) in &summary {
        let f = failures[label.as_str()];
        eprintln!(
            "{label:<width$}  {:>10}  {:>10}  {:>10}  {:>8}  {:>9}  {:>5}  {:>8}",
            cell(s.mae),
            cell(s.rmse),
            cell(s.std_dev),
            cell(s.coverage),
            cell(s.mean_ci_length),
            s.reps,
            f
        );
        println!(
            "{}",
            json!({ "estimator": label, "summary": s, "failures": f })
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
