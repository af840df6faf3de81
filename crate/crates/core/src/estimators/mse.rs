use crate::error::{Error, Result};
use crate::metrics::quantile_edges;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseDecomposition {
    pub total_mse: f64,
    pub sharpness_term: f64,
    pub calibration_term: f64,
}

/// Splits the propensity MSE into within-bin spread of `m0` and the squared
/// gap between bin means, with bins at quantiles of `m_hat`.
pub fn decompose_mse(m_hat: &[f64], m0: &[f64], n_bins: usize) -> Result<MseDecomposition> {
    if m_hat.len() != m0.len() {
        return Err(Error::DimensionMismatch {
            expected: m_hat.len(),
            got: m0.len(),
        });
    }
    if m_hat.is_empty() || n_bins == 0 {
        return Err(Error::InvalidData("need rows and at least one bin".into()));
    }
    let n = m_hat.len() as f64;
    let total_mse = m_hat
        .iter()
        .zip(m0)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    let edges = quantile_edges(m_hat, n_bins);
    let bins = edges.len() - 1;
    let mut cnt = vec![0.0; bins];
    let mut s_hat = vec![0.0; bins];
    let mut s0 = vec![0.0; bins];
    let mut s00 = vec![0.0; bins];
    for (&h, &t) in m_hat.iter().zip(m0) {
        let b = edges[1..].partition_point(|&e| e < h).min(bins - 1);
        cnt[b] += 1.0;
        s_hat[b] += h;
        s0[b] += t;
        s00[b] += t * t;
    }
    let (mut sharp, mut calib) = (0.0, 0.0);
    for b in 0..bins {
        if cnt[b] == 0.0 {
            continue;
        }
        let mean0 = s0[b] / cnt[b];
        let var0 = (s00[b] / cnt[b] - mean0 * mean0).max(0.0);
        sharp += cnt[b] / n * var0;
        calib += cnt[b] / n * (mean0 - s_hat[b] / cnt[b]).powi(2);
    }
    Ok(MseDecomposition {
        total_mse,
        sharpness_term: sharp,
        calibration_term: calib,
    })
}
