use crate::error::ExactError;

use super::RateMatrix;

/// Poisson mass per uniformization chunk.
const CHUNK: f64 = 30.0;
/// Sparse multiply-adds allowed per call.
const WORK_LIMIT: f64 = 2e11;

fn check_len(m: &RateMatrix, p: &[f64]) -> Result<(), ExactError> {
    if p.len() != m.dim() {
        return Err(ExactError::LengthMismatch { got: p.len(), dim: m.dim() });
    }
    Ok(())
}

fn check_distribution(p: &[f64]) -> Result<(), ExactError> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(sum - 1.0).abs().le(&1e-10) || min < -1e-12 {
        return Err(ExactError::StepFailure(format!("sum {sum}, min entry {min}")));
    }
    Ok(())
}

/// `exp(M t) p0` by uniformization: with `P = I + M / lambda`,
/// `exp(M t) = sum_k Pois(k; lambda t) P^k`, evaluated in chunks of mean
/// at most 30 so no weight underflows.
pub fn evolve_exact(m: &RateMatrix, p0: &[f64], t: f64) -> Result<Vec<f64>, ExactError> {
    check_len(m, p0)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(ExactError::StepFailure(format!("invalid time {t}")));
    }
    let lambda = m.max_exit_rate();
    let mut p = p0.to_vec();
    if lambda == 0.0 || t == 0.0 {
        return Ok(p);
    }
    let total = lambda * t;
    let work = (total + 10.0 * (total / CHUNK).ceil() * CHUNK.sqrt()) * m.nnz() as f64;
    if work > WORK_LIMIT {
        return Err(ExactError::StepFailure(format!("lambda t = {total:.3e} needs too many products")));
    }
    let mut remaining = total;
    let mut v = vec![0.0; m.dim()];
    let mut mv = vec![0.0; m.dim()];
    let mut acc = vec![0.0; m.dim()];
    while remaining > 0.0 {
        let a = remaining.min(CHUNK);
        remaining -= a;
        v.copy_from_slice(&p);
        let mut w = (-a).exp();
        let mut mass = w;
        acc.iter_mut().zip(&v).for_each(|(x, y)| *x = w * y);
        let mut k = 0u32;
        while mass < 1.0 - 1e-16 || (k as f64) < a {
            k += 1;
            m.apply(&v, &mut mv);
            v.iter_mut().zip(&mv).for_each(|(x, y)| *x += y / lambda);
            w *= a / k as f64;
            mass += w;
            acc.iter_mut().zip(&v).for_each(|(x, y)| *x += w * y);
            if k > 10_000 {
                return Err(ExactError::StepFailure("Poisson series did not terminate".into()));
            }
        }
        // Renormalize the truncated tail.
        acc.iter().zip(p.iter_mut()).for_each(|(x, y)| *y = x / mass);
    }
    check_distribution(&p)?;
    Ok(p)
}

/// Law after `sweeps` random-sequential sweeps: each elementary step is
/// `I + step_scale * M`, and a sweep is `steps_per_sweep` steps.
pub fn evolve_sweeps(m: &RateMatrix, p0: &[f64], sweeps: u64) -> Result<Vec<f64>, ExactError> {
    check_len(m, p0)?;
    let s = m.step_scale();
    if s * m.max_exit_rate() > 1.0 + 1e-12 {
        return Err(ExactError::StepFailure("step operator is not stochastic".into()));
    }
    let mut p = p0.to_vec();
    let mut mp = vec![0.0; m.dim()];
    for _ in 0..sweeps * m.steps_per_sweep() as u64 {
        m.apply(&p, &mut mp);
        p.iter_mut().zip(&mp).for_each(|(x, y)| *x += s * y);
    }
    check_distribution(&p)?;
    Ok(p)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
