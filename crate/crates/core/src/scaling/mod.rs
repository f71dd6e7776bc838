//! Running exponents, critical-point selection, data collapse and decay fits.

mod bootstrap;
mod collapse;
mod fit;

pub use bootstrap::{bootstrap, parametric_resample, resample_mean, BootstrapEstimate};
pub use collapse::{
    collapse_cost, fss_cost, optimize_collapse, optimize_fss, CollapseFit, OffCriticalCurve, SizeCurve,
};
pub use fit::{fit_decay, DecayFit, DecayModel};

use serde::{Deserialize, Serialize};

use crate::error::ScalingError;

/// Trajectory-averaged series of one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Curve {
    pub fn new(t: Vec<f64>, mean: Vec<f64>, stderr: Vec<f64>) -> Result<Self, ScalingError> {
        if t.len() != mean.len() || t.len() != stderr.len() {
            return Err(ScalingError::TooFewPoints(t.len().min(mean.len()).min(stderr.len())));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ScalingError::NonMonotoneTime);
        }
        Ok(Curve { t, mean, stderr })
    }

    pub fn from_fn(t: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let mean = t.iter().map(|&x| f(x)).collect();
        let stderr = vec![0.0; t.len()];
        Curve { t, mean, stderr }
    }

    /// Pointwise transform of the mean, e.g. `1 - n_e`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Curve { t: self.t.clone(), mean: self.mean.iter().map(|&x| f(x)).collect(), stderr: self.stderr.clone() }
    }

    /// Points with `t >= t_min`.
    pub fn after(&self, t_min: f64) -> Self {
        let k = self.t.iter().position(|&x| x >= t_min).unwrap_or(self.t.len());
        Curve { t: self.t[k..].to_vec(), mean: self.mean[k..].to_vec(), stderr: self.stderr[k..].to_vec() }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `(ln t, ln O)` for the points with `O > 0`.
    pub fn log_points(&self) -> Vec<(f64, f64)> {
        self.t
            .iter()
            .zip(&self.mean)
            .filter(|(t, o)| **t > 0.0 && **o > 0.0)
            .map(|(t, o)| (t.ln(), o.ln()))
            .collect()
    }
}

/// Parameter-tagged curves of one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub observable: String,
    pub cells: Vec<SeriesCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesCell {
    pub eta: f64,
    pub l: usize,
    pub f_e: f64,
    pub curve: Curve,
}

/// Linear interpolation of sorted `(x, y)` points at `x`; `None` outside.
pub fn interp(points: &[(f64, f64)], x: f64) -> Option<f64> {
    let n = points.len();
    if n == 0 || x < points[0].0 || x > points[n - 1].0 {
        return None;
    }
    let k = points.partition_point(|p| p.0 < x);
    if k == 0 {
        return Some(points[0].1);
    }
    let (x0, y0) = points[k - 1];
    let (x1, y1) = points[k.min(n - 1)];
    if x1 == x0 {
        return Some(y1);
    }
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// `delta(t) = log(O(t) / O(b t)) / log b`, with `O(b t)` interpolated
/// linearly in `(ln t, ln O)`. Returns `(1/t, delta)` for every sample time
/// with `b t` inside the series. Non-positive values are dropped.
pub fn running_exponent(c: &Curve, b: f64) -> Result<Vec<(f64, f64)>, ScalingError> {
    if c.t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScalingError::NonMonotoneTime);
    }
    let pts = c.log_points();
    if pts.len() < c.len() {
        log::warn!("running_exponent: dropped {} non-positive points", c.len() - pts.len());
    }
    if pts.len() < 2 {
        return Err(ScalingError::TooFewPoints(2));
    }
    let lb = b.ln();
    let out: Vec<(f64, f64)> = pts
        .iter()
        .filter_map(|&(lt, lo)| interp(&pts, lt + lb).map(|lob| ((-lt).exp(), (lo - lob) / lb)))
        .collect();
    if out.is_empty() {
        return Err(ScalingError::TooFewPoints(1));
    }
    Ok(out)
}

/// Ordinary least squares `y = a + s x`; returns `(a, s)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let s = sxy / sxx;
    Some((my - s * mx, s))
}

/// Late-time behavior of one running-exponent curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LateSlope {
    pub eta: f64,
    /// `d delta / d(1/t)` over the window.
    pub slope: f64,
    /// Mean of `delta(t)` over the window.
    pub plateau: f64,
    /// Standard deviation of `delta(t)` over the window.
    pub spread: f64,
    pub window: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    /// Grid value with the flattest late-time running exponent.
    pub eta_c: f64,
    pub eta_c_err: f64,
    pub delta: f64,
    pub delta_err: f64,
    /// Zero of the slope, linearly interpolated between the bracketing grid points.
    pub eta_c_interpolated: Option<f64>,
    /// Plateau interpolated to `eta_c_interpolated`.
    pub delta_interpolated: Option<f64>,
    pub slopes: Vec<LateSlope>,
}

/// Late-time slope of `delta(t)` against `1/t`, least squares over the last
/// `decades` decades of sample times.
pub fn late_slope(eta: f64, c: &Curve, b: f64, decades: f64) -> Result<LateSlope, ScalingError> {
    let re = running_exponent(c, b)?;
    let t_last = re.iter().map(|p| 1.0 / p.0).fold(0.0, f64::max);
    let t_min = t_last / 10f64.powf(decades);
    let win: Vec<(f64, f64)> = re.into_iter().filter(|p| 1.0 / p.0 >= t_min * (1.0 - 1e-12)).collect();
    let (_, slope) = linear_fit(&win).ok_or(ScalingError::TooFewPoints(2))?;
    let n = win.len() as f64;
    let plateau = win.iter().map(|p| p.1).sum::<f64>() / n;
    let spread = (win.iter().map(|p| (p.1 - plateau).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    Ok(LateSlope { eta, slope, plateau, spread, window: (t_min, t_last) })
}

/// Picks the curve whose running exponent is flattest at late times.
///
/// Active curves saturate, so `delta(t)` falls toward zero as `1/t -> 0`
/// (positive slope); absorbing curves decay faster than a power law
/// (negative slope). A family whose slopes all share a sign does not
/// bracket the transition.
pub fn find_critical(family: &[(f64, Curve)], b: f64, decades: f64) -> Result<CriticalEstimate, ScalingError> {
    if family.len() < 2 {
        return Err(ScalingError::TooFewCurves { got: family.len(), need: 2 });
    }
    let mut slopes = family
        .iter()
        .map(|(eta, c)| late_slope(*eta, c, b, decades))
        .collect::<Result<Vec<_>, _>>()?;
    slopes.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let pos = slopes.iter().any(|s| s.slope > 0.0);
    let neg = slopes.iter().any(|s| s.slope < 0.0);
    if !(pos && neg) {
        return Err(ScalingError::NoBracket);
    }
    let best = slopes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.slope.abs().total_cmp(&b.1.slope.abs()))
        .map(|x| x.0)
        .unwrap_or(0);
    let spacing = |i: usize| -> f64 {
        let left = if i > 0 { slopes[i].eta - slopes[i - 1].eta } else { f64::INFINITY };
        let right = if i + 1 < slopes.len() { slopes[i + 1].eta - slopes[i].eta } else { f64::INFINITY };
        left.min(right)
    };
    let crossing = slopes.windows(2).find(|w| w[0].slope > 0.0 && w[1].slope <= 0.0).map(|w| {
        let (a, b) = (&w[0], &w[1]);
        let u = a.slope / (a.slope - b.slope);
        (a.eta + (b.eta - a.eta) * u, a.plateau + (b.plateau - a.plateau) * u)
    });
    let s = &slopes[best];
    // Plateau uncertainty: window spread plus the change across the grid step.
    let neighbor_shift = [best.checked_sub(1), Some(best + 1)]
        .iter()
        .flatten()
        .filter_map(|&i| slopes.get(i))
        .map(|n| (n.plateau - s.plateau).abs() / 2.0)
        .fold(0.0, f64::max);
    Ok(CriticalEstimate {
        eta_c: s.eta,
        eta_c_err: spacing(best) / 2.0,
        delta: s.plateau,
        delta_err: (s.spread.powi(2) + neighbor_shift.powi(2)).sqrt(),
        eta_c_interpolated: crossing.map(|c| c.0),
        delta_interpolated: crossing.map(|c| c.1),
        slopes,
    })
}

/// Value with uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl Estimate {
    pub fn new(value: f64, err: f64) -> Self {
        Estimate { value, err }
    }
}

/// Exponent report written by the analysis command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub eta_c: Option<Estimate>,
    pub delta: Option<Estimate>,
    pub nu_t: Option<Estimate>,
    pub z: Option<Estimate>,
    pub tau: Option<Estimate>,
    pub xi: Option<Estimate>,
    pub amplitudes: Vec<(String, Estimate)>,
    /// Free-form diagnostics: residual norms, windows, costs.
    pub diagnostics: Vec<(String, f64)>,
}
