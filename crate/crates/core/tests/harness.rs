use std::fs;

use caldml::dgp::DgpSpec;
use caldml::harness::{
    estimate_from_file, read_dataset_csv, read_results_csv, run_simulation, summarize,
    write_dataset_csv, write_outputs, REP_RECORD_FIELDS, RESULTS_FILE, SUMMARY_FILE,
};
use caldml::learners::LearnerSpec;
use caldml::metrics::SummaryStats;
use caldml::{
    estimate_ate, Algorithm, CalibrationMethod, Error, EstimatorConfig, Model, SimConfig,
};
use std::collections::BTreeMap;

fn est(model: Model, alg: Algorithm, cal: CalibrationMethod) -> EstimatorConfig {
    EstimatorConfig::new(model, alg, cal, LearnerSpec::logit(), LearnerSpec::Linear)
}

fn small_config(estimators: Vec<EstimatorConfig>, reps: usize) -> SimConfig {
    SimConfig {
        dgp: DgpSpec::Dgp2 {
            n: 300,
            p: None,
            overlap: 0.3,
            theta0: 1.0,
        },
        estimators,
        reps,
        base_seed: 17,
        threads: 1,
        output_dir: None,
        record_runtime: false,
    }
}

#[test]
fn single_rep_is_reproducible() {
    let c = small_config(
        vec![est(
            Model::Irm,
            Algorithm::Alg5,
            CalibrationMethod::Isotonic,
        )],
        1,
    );
    let a = run_simulation(&c).unwrap();
    assert_eq!(a.records.len(), 1);
    assert_eq!(a.records, run_simulation(&c).unwrap().records);
}

#[test]
fn estimators_share_each_dataset() {
    let c = small_config(
        vec![
            est(Model::Irm, Algorithm::Alg1, CalibrationMethod::None),
            est(Model::Irm, Algorithm::Alg5, CalibrationMethod::Isotonic),
        ],
        3,
    );
    let out = run_simulation(&c).unwrap();
    assert_eq!(out.records.len(), 6);
    for pair in out.records.chunks(2) {
        assert_eq!(pair[0].rep, pair[1].rep);
        assert_eq!(pair[0].theta_true, pair[1].theta_true);
    }
    // Alone, the second estimator sees the same data and seeds.
    let alone = run_simulation(&small_config(vec![c.estimators[1].clone()], 3)).unwrap();
    for (a, b) in alone
        .records
        .iter()
        .zip(out.records.iter().skip(1).step_by(2))
    {
        assert_eq!(a.theta_hat.to_bits(), b.theta_hat.to_bits());
    }
}

#[test]
fn failures_stay_inside_their_records() {
    let dgp = DgpSpec::Dgp4 {
        n: 16,
        p: None,
        alpha: 0.01,
    };
    let ipw = est(Model::Ipw, Algorithm::Alg1, CalibrationMethod::None);
    let mut c = small_config(
        vec![
            est(Model::Irm, Algorithm::Alg1, CalibrationMethod::None),
            ipw.clone(),
        ],
        6,
    );
    c.dgp = dgp.clone();
    let out = run_simulation(&c).unwrap();
    let failed: Vec<_> = out.records.iter().filter(|r| r.failed()).collect();
    assert!(!failed.is_empty());
    assert!(failed
        .iter()
        .all(|r| r.theta_hat.is_nan() && !r.error.contains('\n')));

    let mut solo = small_config(vec![ipw], 6);
    solo.dgp = dgp;
    let alone = run_simulation(&solo).unwrap();
    for (a, b) in alone
        .records
        .iter()
        .zip(out.records.iter().skip(1).step_by(2))
    {
        assert_eq!(a.to_fields()[..24], b.to_fields()[..24]);
    }
    let s = &out.summary[&out.records[0].estimator];
    assert_eq!(
        s.reps,
        6 - out.records.iter().step_by(2).filter(|r| r.failed()).count()
    );
}

#[test]
fn summary_matches_results_file() {
    let c = small_config(
        vec![
            est(Model::Irm, Algorithm::Alg3, CalibrationMethod::Isotonic),
            est(Model::Plr, Algorithm::Alg2, CalibrationMethod::Platt),
        ],
        8,
    );
    let out = run_simulation(&c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &c, &out).unwrap();

    let text = fs::read_to_string(dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(text.lines().next().unwrap(), REP_RECORD_FIELDS.join(","));
    let records = read_results_csv(&dir.path().join(RESULTS_FILE)).unwrap();
    assert_eq!(records, out.records);
    let emitted: BTreeMap<String, SummaryStats> =
        serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    let recomputed = summarize(&records);
    assert_eq!(
        emitted.keys().collect::<Vec<_>>(),
        recomputed.keys().collect::<Vec<_>>()
    );
    for (k, a) in &emitted {
        let b = &recomputed[k];
        for (x, y) in [
            (a.mae, b.mae),
            (a.rmse, b.rmse),
            (a.std_dev, b.std_dev),
            (a.coverage, b.coverage),
            (a.mean_ci_length, b.mean_ci_length),
        ] {
            assert!((x - y).abs() <= 1e-12);
        }
        assert_eq!(a.reps, b.reps);
    }
    for r in &records {
        assert_eq!(
            r.covered == 1,
            r.ci_low <= r.theta_true && r.theta_true <= r.ci_high
        );
        assert!((r.abs_error - (r.theta_hat - r.theta_true).abs()).abs() <= 1e-15);
    }
}

#[test]
fn dataset_roundtrip_gives_identical_estimate() {
    let (data, _) = DgpSpec::Dgp1 {
        n: 400,
        p: 20,
        r2_d: 0.5,
        r2_y: 0.5,
        theta0: 0.5,
    }
    .generate(3)
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    write_dataset_csv(&path, &data).unwrap();
    assert_eq!(read_dataset_csv(&path).unwrap(), data);
    let c = est(Model::Irm, Algorithm::Alg5, CalibrationMethod::VennAbers);
    let from_file = estimate_from_file(&path, &c, 8).unwrap();
    let direct = estimate_ate(&data, &c, 8, None).unwrap();
    assert_eq!(from_file.theta_hat.to_bits(), direct.theta_hat.to_bits());
    assert_eq!(from_file.se.to_bits(), direct.se.to_bits());
    let oracle = est(Model::Irm, Algorithm::Oracle, CalibrationMethod::None);
    assert!(matches!(
        estimate_from_file(&path, &oracle, 8),
        Err(Error::InvalidConfig(_))
    ));
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn ingestion_errors_are_specific() {
    let dir = tempfile::tempdir().unwrap();
    let missing = write(&dir, "a.csv", "y,x1\n1.0,2.0\n");
    assert!(matches!(read_dataset_csv(&missing), Err(Error::MissingColumn(c)) if c == "d"));
    let nan = write(&dir, "b.csv", "y,d,x1\n1.0,1,0.5\n2.0,0,NaN\n");
    assert!(matches!(
        read_dataset_csv(&nan),
        Err(Error::Ingest { row: 2, .. })
    ));
    let nonbinary = write(&dir, "c.csv", "y,d,x1\n1.0,2,0.5\n");
    assert!(matches!(
        read_dataset_csv(&nonbinary),
        Err(Error::Ingest { row: 1, .. })
    ));
    let garbage = write(&dir, "d.csv", "y,d,x1\n1.0,1,0.5\n1.0,0,abc\n0.0,1,1\n");
    assert!(matches!(
        read_dataset_csv(&garbage),
        Err(Error::Ingest { row: 2, .. })
    ));
}

#[test]
fn constant_treatment_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("y,d,x1,x2\n");
    for i in 0..40 {
        body.push_str(&format!(
            "{},1,{},{}\n",
            i as f64 * 0.1,
            (i % 7) as f64,
            (i % 3) as f64
        ));
    }
    let path = write(&dir, "const.csv", &body);
    let plr = est(Model::Plr, Algorithm::Alg1, CalibrationMethod::None);
    let r = estimate_from_file(&path, &plr, 0).unwrap();
    assert!(!r.warnings.is_empty());
    let irm = est(Model::Irm, Algorithm::Alg1, CalibrationMethod::None);
    assert!(estimate_from_file(&path, &irm, 0).is_err());
}

#[test]
fn config_json_is_strict() {
    let good = r#"{"dgp":{"name":"dgp2","n":200,"overlap":0.5},
        "estimators":[{"model":"irm","algorithm":"alg5","calibration":"isotonic",
        "learner_m":{"kind":"logit"},"learner_g":{"kind":"linear"}}],"reps":2}"#;
    let c = SimConfig::from_json(good).unwrap();
    assert_eq!((c.reps, c.threads, c.base_seed), (2, 1, 0));
    let extra_top = good.replacen("\"reps\":2", "\"reps\":2,\"color\":1", 1);
    assert!(SimConfig::from_json(&extra_top).is_err());
    let extra_dgp = good.replacen("\"overlap\":0.5", "\"overlap\":0.5,\"omega\":1", 1);
    assert!(SimConfig::from_json(&extra_dgp).is_err());
    let extra_learner = good.replacen(
        "{\"kind\":\"logit\"}",
        "{\"kind\":\"logit\",\"depth\":2}",
        1,
    );
    assert!(SimConfig::from_json(&extra_learner).is_err());
    let zero = good.replacen("\"reps\":2", "\"reps\":0", 1);
    assert!(SimConfig::from_json(&zero).is_err());
}
