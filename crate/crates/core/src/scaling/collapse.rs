use serde::{Deserialize, Serialize};

use super::{interp, Curve};
use crate::error::ScalingError;

/// Grid points per overlapping pair.
const GRID: usize = 32;
/// Coarse scan points before the golden-section refinement.
const SCAN: usize = 31;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffCriticalCurve {
    pub eta: f64,
    pub curve: Curve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeCurve {
    pub l: usize,
    pub curve: Curve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub exponent: f64,
    pub cost: f64,
    /// Coarse scan `(exponent, cost)`; infeasible points are omitted.
    pub scan: Vec<(f64, f64)>,
}

/// Mean squared vertical distance between two sorted curves, sampled on
/// an even grid over their common x range.
fn pair_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<f64> {
    let (a0, a1) = (a.first()?.0, a.last()?.0);
    let (b0, b1) = (b.first()?.0, b.last()?.0);
    let (lo, hi) = (a0.max(b0), a1.min(b1));
    if hi <= lo {
        return None;
    }
    let mut s = 0.0;
    for k in 0..GRID {
        let x = lo + (hi - lo) * k as f64 / (GRID - 1) as f64;
        let d = interp(a, x)? - interp(b, x)?;
        s += d * d;
    }
    Some(s / GRID as f64)
}

fn mean_pair_cost(sets: &[(i8, Vec<(f64, f64)>)]) -> Result<f64, ScalingError> {
    let mut pairs = 0usize;
    let mut total = 0.0;
    let mut n = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if sets[i].0 != sets[j].0 {
                continue;
            }
            pairs += 1;
            if let Some(d) = pair_distance(&sets[i].1, &sets[j].1) {
                total += d;
                n += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(ScalingError::NoPairs);
    }
    if n == 0 {
        return Err(ScalingError::InsufficientOverlap);
    }
    Ok(total / n as f64)
}

fn rescale(c: &Curve, delta: f64, x_shift: f64) -> Vec<(f64, f64)> {
    c.log_points().into_iter().map(|(lt, lo)| (lt + x_shift, lo + delta * lt)).collect()
}

/// Off-critical collapse cost: curves are mapped to
/// `x = ln(t |eta - eta_c|^nu_t)`, `y = ln(O t^delta)` and compared pairwise
/// on the same side of `eta_c`. The result is the mean over overlapping pairs.
pub fn collapse_cost(curves: &[OffCriticalCurve], eta_c: f64, delta: f64, nu_t: f64) -> Result<f64, ScalingError> {
    let sets: Vec<(i8, Vec<(f64, f64)>)> = curves
        .iter()
        .filter(|c| c.eta != eta_c)
        .map(|c| {
            let g = c.eta - eta_c;
            (g.signum() as i8, rescale(&c.curve, delta, nu_t * g.abs().ln()))
        })
        .collect();
    mean_pair_cost(&sets)
}

/// Finite-size collapse cost with `x = ln(t / L^z)`, `y = ln(O t^delta)`.
pub fn fss_cost(curves: &[SizeCurve], delta: f64, z: f64) -> Result<f64, ScalingError> {
    let sets: Vec<(i8, Vec<(f64, f64)>)> =
        curves.iter().map(|c| (0, rescale(&c.curve, delta, -z * (c.l as f64).ln()))).collect();
    mean_pair_cost(&sets)
}

/// Coarse scan over `[lo, hi]`, then golden-section search around the best point.
fn minimize_1d(f: impl Fn(f64) -> Result<f64, ScalingError>, lo: f64, hi: f64) -> Result<CollapseFit, ScalingError> {
    let step = (hi - lo) / (SCAN - 1) as f64;
    let mut scan = Vec::with_capacity(SCAN);
    let mut last_err = None;
    for k in 0..SCAN {
        let x = lo + step * k as f64;
        match f(x) {
            Ok(c) if c.is_finite() => scan.push((x, c)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let Some(&(best_x, best_c)) = scan.iter().min_by(|a, b| a.1.total_cmp(&b.1)) else {
        return Err(last_err.unwrap_or(ScalingError::InsufficientOverlap));
    };
    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let cost = |x: f64| f(x).ok().filter(|c| c.is_finite()).unwrap_or(f64::INFINITY);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while b - a > 1e-7 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = cost(x);
    let (exponent, cost) = if fx <= best_c { (x, fx) } else { (best_x, best_c) };
    Ok(CollapseFit { exponent, cost, scan })
}

/// Best `nu_t` in `[lo, hi]` for fixed `eta_c` and `delta`.
pub fn optimize_collapse(
    curves: &[OffCriticalCurve],
    eta_c: f64,
    delta: f64,
    range: (f64, f64),
) -> Result<CollapseFit, ScalingError> {
    if curves.len() < 2 {
        return Err(ScalingError::TooFewCurves { got: curves.len(), need: 2 });
    }
    minimize_1d(|nu| collapse_cost(curves, eta_c, delta, nu), range.0, range.1)
}

/// Best `z` in `[lo, hi]` for fixed `delta`.
pub fn optimize_fss(curves: &[SizeCurve], delta: f64, range: (f64, f64)) -> Result<CollapseFit, ScalingError> {
    if curves.len() < 2 {
        return Err(ScalingError::TooFewCurves { got: curves.len(), need: 2 });
    }
    minimize_1d(|z| fss_cost(curves, delta, z), range.0, range.1)
}
