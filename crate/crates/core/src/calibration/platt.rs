//! Platt scaling with smoothed targets.

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-10;

/// Probability map `1 / (1 + exp(a·s + b))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattFit {
    pub a: f64,
    pub b: f64,
    /// Set when one class was absent and the map is the constant smoothed rate.
    pub degenerate: bool,
}

impl PlattFit {
    pub fn predict(&self, s: f64) -> f64 {
        let z = self.a * s + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Smoothed targets for labels 0 and 1.
pub fn platt_targets(n0: usize, n1: usize) -> (f64, f64) {
    (
        1.0 / (n0 as f64 + 2.0),
        (n1 as f64 + 1.0) / (n1 as f64 + 2.0),
    )
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Cross-entropy of the map `(a, b)` against smoothed targets `t`.
pub fn platt_nll(s: &[f64], t: &[f64], a: f64, b: f64) -> f64 {
    s.iter()
        .zip(t)
        .map(|(&s, &t)| {
            let z = a * s + b;
            t * softplus(z) + (1.0 - t) * softplus(-z)
        })
        .sum()
}

pub fn platt_fit(scores: &[f64], labels: &[f64]) -> Result<PlattFit> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidData(
            "platt scaling needs at least one point".into(),
        ));
    }
    if scores.iter().any(|v| !v.is_finite()) || labels.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidData(
            "platt scaling needs finite scores and 0/1 labels".into(),
        ));
    }
    let n1 = labels.iter().filter(|&&v| v == 1.0).count();
    let n0 = labels.len() - n1;
    let b0 = ((n0 as f64 + 1.0) / (n1 as f64 + 1.0)).ln();
    if n0 == 0 || n1 == 0 {
        return Ok(PlattFit {
            a: 0.0,
            b: b0,
            degenerate: true,
        });
    }
    let (t_neg, t_pos) = platt_targets(n0, n1);
    let t: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1.0 { t_pos } else { t_neg })
        .collect();

    let (mut a, mut b) = (0.0, b0);
    let mut f = platt_nll(scores, &t, a, b);
    for _ in 0..MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let p = PlattFit {
                a,
                b,
                degenerate: false,
            }
            .predict(s);
            let r = ti - p;
            let h = (p * (1.0 - p)).max(1e-300);
            ga += r * s;
            gb += r;
            haa += h * s * s;
            hab += h * s;
            hbb += h;
        }
        if ga.abs().max(gb.abs()) < TOL {
            break;
        }
        let mut lambda = 1e-12 * (haa + hbb);
        let (da, db) = loop {
            let det = (haa + lambda) * (hbb + lambda) - hab * hab;
            if det > 0.0 {
                break (
                    -((hbb + lambda) * ga - hab * gb) / det,
                    -((haa + lambda) * gb - hab * ga) / det,
                );
            }
            lambda = (lambda * 10.0).max(1e-10);
        };
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_nll(scores, &t, na, nb);
            if nf <= f + 1e-4 * step * (ga * da + gb * db) {
                a = na;
                b = nb;
                f = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved || (step * da).abs().max((step * db).abs()) < TOL {
            break;
        }
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Solver("platt scaling diverged".into()));
    }
    Ok(PlattFit {
        a,
        b,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn smoothed_targets() {
        assert_eq!(platt_targets(8, 2), (0.1, 0.75));
    }

    #[test]
    fn single_class_gives_smoothed_rate() {
        let f = platt_fit(&[0.1, 0.5, 0.9], &[0.0; 3]).unwrap();
        assert!(f.degenerate);
        assert!((f.predict(0.3) - 0.2).abs() < 1e-12);
        let g = platt_fit(&[0.1, 0.5], &[1.0; 2]).unwrap();
        assert!((g.predict(0.3) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let mut rng = crate::seed::rng_from(5);
        let s: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let l: Vec<f64> = s
            .iter()
            .map(|&v| (rng.random::<f64>() < v) as u8 as f64)
            .collect();
        let f = platt_fit(&s, &l).unwrap();
        let n1 = l.iter().filter(|&&v| v == 1.0).count();
        let (tn, tp) = platt_targets(l.len() - n1, n1);
        let t: Vec<f64> = l.iter().map(|&v| if v == 1.0 { tp } else { tn }).collect();
        let base = platt_nll(&s, &t, f.a, f.b);
        for (da, db) in [(1e-4, 0.0), (-1e-4, 0.0), (0.0, 1e-4), (0.0, -1e-4)] {
            assert!(platt_nll(&s, &t, f.a + da, f.b + db) >= base);
        }
        assert!(f.a < 0.0);
    }
}
