use caldml::dgp::{gen_dgp1, gen_dgp3};
use caldml::learners::{fit_classifier, fit_regressor, fit_tree, FittedModel, LearnerSpec};
use caldml::Error;
use nalgebra::DMatrix;

fn specs() -> [LearnerSpec; 4] {
    [
        LearnerSpec::logit(),
        LearnerSpec::gbt(),
        LearnerSpec::rf(),
        LearnerSpec::Linear,
    ]
}

#[test]
fn constant_treatment_gives_equal_probabilities_above_half() {
    let (data, _) = gen_dgp3(200, 1).unwrap();
    let ones = vec![1.0; data.n()];
    for spec in specs() {
        let fit = fit_classifier(&spec, data.x(), &ones, 3).unwrap();
        let p = fit.model.predict(data.x()).unwrap();
        assert!(p.iter().all(|&v| v > 0.5 && v == p[0]), "{spec}");
        assert!(fit.warning.is_some());
    }
}

#[test]
fn classifier_outputs_are_finite_probabilities() {
    let (data, _) = gen_dgp1(800, 20, 0.5, 0.5, 0.5, 2).unwrap();
    for spec in specs() {
        let fit = fit_classifier(&spec, data.x(), data.d(), 11).unwrap();
        let p = fit.model.predict(data.x()).unwrap();
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)), "{spec}");
        assert_eq!(
            fit_classifier(&spec, data.x(), data.d(), 11).unwrap().model,
            fit.model
        );
    }
}

#[test]
fn regressors_fit_finite_values() {
    let (data, _) = gen_dgp1(600, 20, 0.5, 0.5, 0.5, 5).unwrap();
    for spec in [LearnerSpec::gbt(), LearnerSpec::rf(), LearnerSpec::Linear] {
        let fit = fit_regressor(&spec, data.x(), data.y(), 1).unwrap();
        assert!(fit
            .model
            .predict(data.x())
            .unwrap()
            .iter()
            .all(|v| v.is_finite()));
    }
    assert!(fit_regressor(&LearnerSpec::logit(), data.x(), data.y(), 1).is_err());
}

#[test]
fn tree_beats_best_single_split() {
    let (data, _) = gen_dgp1(30, 3, 0.5, 0.5, 0.5, 9).unwrap();
    let (x, y) = (data.x(), data.y());
    let n = data.n();
    let sse = |pred: &[f64]| {
        pred.iter()
            .zip(y)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
    };
    let mean = |idx: &[usize]| idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    let mut best = f64::INFINITY;
    for j in 0..x.ncols() {
        for i in 0..n {
            let thr = x[(i, j)];
            let (l, r): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| x[(k, j)] <= thr);
            if l.is_empty() || r.is_empty() {
                continue;
            }
            let (ml, mr) = (mean(&l), mean(&r));
            let pred: Vec<f64> = (0..n)
                .map(|k| if x[(k, j)] <= thr { ml } else { mr })
                .collect();
            best = best.min(sse(&pred));
        }
    }
    for depth in [1, 2, 4] {
        let t = fit_tree(x, y, &vec![1.0; n], depth, 1);
        assert!(sse(&t.predict(x)) <= best + 1e-9);
    }
}

#[test]
fn prediction_width_is_checked() {
    let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
    let fit = fit_classifier(&LearnerSpec::logit(), &x, &[0.0, 1.0, 0.0, 1.0], 0).unwrap();
    assert!(!matches!(fit.model, FittedModel::Constant { .. }));
    let wide = DMatrix::zeros(2, 3);
    assert!(matches!(
        fit.model.predict(&wide),
        Err(Error::DimensionMismatch { .. })
    ));
}
