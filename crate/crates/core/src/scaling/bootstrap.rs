use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Curve;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub mean: f64,
    /// Standard deviation over successful resamples.
    pub err: f64,
    /// Resamples whose statistic could be evaluated.
    pub n_ok: usize,
    pub n_total: usize,
}

/// Nonparametric bootstrap over `n_items` units. Resample `r` draws its
/// indices from stream `r` of `seed`, so results do not depend on thread
/// scheduling. A statistic returning `None` drops that resample.
pub fn bootstrap<F>(n_items: usize, resamples: usize, seed: u64, stat: F) -> BootstrapEstimate
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    let values: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = RngStream::new(seed, r);
            let idx: Vec<usize> = (0..n_items).map(|_| rng.below(n_items)).collect();
            stat(&idx).filter(|v| v.is_finite())
        })
        .collect();
    summarize(&values, resamples)
}

fn summarize(values: &[f64], total: usize) -> BootstrapEstimate {
    let n = values.len();
    let mean = if n > 0 { values.iter().sum::<f64>() / n as f64 } else { f64::NAN };
    let err = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    BootstrapEstimate { mean, err, n_ok: n, n_total: total }
}

/// Column means of the selected per-trajectory series.
pub fn resample_mean(series: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let len = series.first().map_or(0, Vec::len);
    let mut out = vec![0.0; len];
    for &i in idx {
        out.iter_mut().zip(&series[i]).for_each(|(o, v)| *o += v);
    }
    let n = idx.len().max(1) as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Gaussian redraw of a curve from its mean and standard error, for data
/// known only through aggregated columns.
pub fn parametric_resample(c: &Curve, seed: u64, r: u64) -> Curve {
    let mut rng = RngStream::new(seed, r);
    let mean = c
        .mean
        .iter()
        .zip(&c.stderr)
        .map(|(&m, &s)| match Normal::new(m, s) {
            Ok(d) if s > 0.0 => d.sample(&mut rng),
            _ => m,
        })
        .collect();
    Curve { t: c.t.clone(), mean, stderr: c.stderr.clone() }
}
