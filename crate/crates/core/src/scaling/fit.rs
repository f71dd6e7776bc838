use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use serde::{Deserialize, Serialize};

use super::linear_fit;
use crate::error::ScalingError;

/// Decay shapes for `y(x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DecayModel {
    /// `a exp(-x / tau)`; parameters `[a, tau]`.
    Exp,
    /// `a exp(-(x - 1) / xi) + c`; parameters `[a, xi, c]`.
    ExpPlateau,
    /// `a x^(-delta) exp(-x / tau)` with `delta` held fixed; parameters `[a, tau]`.
    PowerExp { delta: f64 },
}

impl DecayModel {
    fn n_params(self) -> usize {
        match self {
            DecayModel::ExpPlateau => 3,
            _ => 2,
        }
    }

    /// Model value and gradient with respect to the parameters.
    fn eval(self, p: &[f64], x: f64) -> (f64, [f64; 3]) {
        match self {
            DecayModel::Exp => {
                let e = (-x / p[1]).exp();
                (p[0] * e, [e, p[0] * e * x / (p[1] * p[1]), 0.0])
            }
            DecayModel::ExpPlateau => {
                let s = x - 1.0;
                let e = (-s / p[1]).exp();
                (p[0] * e + p[2], [e, p[0] * e * s / (p[1] * p[1]), 1.0])
            }
            DecayModel::PowerExp { delta } => {
                let e = x.powf(-delta) * (-x / p[1]).exp();
                (p[0] * e, [e, p[0] * e * x / (p[1] * p[1]), 0.0])
            }
        }
    }

    pub fn value(self, p: &[f64], x: f64) -> f64 {
        self.eval(p, x).0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub params: Vec<f64>,
    pub errors: Vec<f64>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub n: usize,
}

impl DecayFit {
    /// Decay length: `tau` or `xi`.
    pub fn scale(&self) -> f64 {
        self.params[1]
    }

    pub fn scale_err(&self) -> f64 {
        self.errors[1]
    }
}

struct Problem<'a> {
    model: DecayModel,
    x: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    p: DVector<f64>,
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, p: &DVector<f64>) {
        self.p.copy_from(p);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let p = self.p.as_slice();
        let r = DVector::from_iterator(
            self.x.len(),
            (0..self.x.len()).map(|i| self.w[i] * (self.model.value(p, self.x[i]) - self.y[i])),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let k = self.model.n_params();
        let p = self.p.as_slice();
        let mut j = DMatrix::zeros(self.x.len(), k);
        for i in 0..self.x.len() {
            let (_, g) = self.model.eval(p, self.x[i]);
            for c in 0..k {
                j[(i, c)] = self.w[i] * g[c];
            }
        }
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

/// Log-linear initial guess for `y - c = a exp(-(x - x0) / tau) * x^(-delta)`.
fn log_linear(x: &[f64], y: &[f64], c: f64, x0: f64, delta: f64) -> Option<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(x, y)| **y - c > 0.0 && (delta == 0.0 || **x > 0.0))
        .map(|(x, y)| (x - x0, (y - c).ln() + if delta == 0.0 { 0.0 } else { delta * x.ln() }))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (a, s) = linear_fit(&pts)?;
    let tau = if s < 0.0 { -1.0 / s } else { 10.0 * (x[x.len() - 1] - x[0]).abs().max(1.0) };
    let rss = pts.iter().map(|(u, v)| (a + s * u - v).powi(2)).sum::<f64>();
    Some((a.exp(), tau, rss))
}

fn initial_guesses(model: DecayModel, x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    match model {
        DecayModel::Exp => log_linear(x, y, 0.0, 0.0, 0.0).map(|(a, t, _)| vec![a, t]).into_iter().collect(),
        DecayModel::PowerExp { delta } => {
            log_linear(x, y, 0.0, 0.0, delta).map(|(a, t, _)| vec![a, t]).into_iter().collect()
        }
        DecayModel::ExpPlateau => {
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(f64::MIN_POSITIVE);
            let mut cands: Vec<(f64, Vec<f64>)> = [1e-3, 1e-2, 0.05, 0.1, 0.3, 1.0]
                .iter()
                .filter_map(|f| {
                    let c = lo - f * span;
                    log_linear(x, y, c, 1.0, 0.0).map(|(a, t, rss)| (rss, vec![a, t, c]))
                })
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0));
            cands.into_iter().map(|c| c.1).collect()
        }
    }
}

/// Weighted nonlinear least squares for a decay profile. Weights are
/// `1/stderr` when every error bar is positive, uniform otherwise.
/// Reported errors are `sqrt(diag(s^2 (J^T J)^-1))` with `s^2 = rss / (n - p)`.
pub fn fit_decay(model: DecayModel, x: &[f64], y: &[f64], stderr: Option<&[f64]>) -> Result<DecayFit, ScalingError> {
    let k = model.n_params();
    if x.len() != y.len() || x.len() <= k {
        return Err(ScalingError::TooFewPoints(k + 1));
    }
    let w: Vec<f64> = match stderr {
        Some(s) if s.len() == x.len() && s.iter().all(|v| *v > 0.0) => s.iter().map(|v| 1.0 / v).collect(),
        _ => vec![1.0; x.len()],
    };
    let guesses = initial_guesses(model, x, y);
    if guesses.is_empty() {
        return Err(ScalingError::FitFailed("no positive points for the initial guess".into()));
    }
    let mut starts = Vec::new();
    for g in guesses {
        for f in [1.0, 0.5, 2.0] {
            let mut s = g.clone();
            s[1] *= f;
            starts.push(s);
        }
    }
    let lm = LevenbergMarquardt::new();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for s in starts {
        let problem = Problem { model, x, y, w: &w, p: DVector::from_vec(s) };
        let (solved, report) = lm.minimize(problem);
        if !report.termination.was_successful() || solved.p[1] <= 0.0 {
            continue;
        }
        let Some(r) = solved.residuals() else { continue };
        let rss = r.norm_squared();
        if best.as_ref().map_or(true, |b| rss < b.0) {
            best = Some((rss, solved.p));
        }
    }
    let (rss, p) = best.ok_or_else(|| ScalingError::FitFailed(format!("{model:?}: no start converged")))?;
    let problem = Problem { model, x, y, w: &w, p: p.clone() };
    let j = problem.jacobian().ok_or_else(|| ScalingError::FitFailed("non-finite Jacobian".into()))?;
    let dof = (x.len() - k) as f64;
    let s2 = rss / dof;
    let errors = (j.transpose() * &j)
        .try_inverse()
        .map(|c| (0..k).map(|i| (s2 * c[(i, i)]).max(0.0).sqrt()).collect())
        .unwrap_or_else(|| vec![f64::INFINITY; k]);
    Ok(DecayFit { model, params: p.as_slice().to_vec(), errors, rss, n: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs() -> Vec<f64> {
        (1..=40).map(|i| i as f64).collect()
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let x = xs();
        let y: Vec<f64> = x.iter().map(|x| 0.8 * (-x / 7.5).exp()).collect();
        let f = fit_decay(DecayModel::Exp, &x, &y, None).unwrap();
        assert!((f.params[0] - 0.8).abs() < 1e-6);
        assert!((f.scale() - 7.5).abs() < 1e-6);
        assert!(f.rss < 1e-20);
    }

    #[test]
    fn exponential_starting_at_origin() {
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.2 * (-x / 0.75).exp()).collect();
        let f = fit_decay(DecayModel::Exp, &x, &y, None).unwrap();
        assert!((f.scale() - 0.75).abs() < 1e-6, "{:?}", f.params);
    }

    #[test]
    fn plateau_and_length_are_separated() {
        let x = xs();
        let y: Vec<f64> = x.iter().map(|x| 0.3 * (-(x - 1.0) / 4.0).exp() + 0.12).collect();
        let f = fit_decay(DecayModel::ExpPlateau, &x, &y, None).unwrap();
        assert!((f.params[0] - 0.3).abs() < 1e-6, "{:?}", f.params);
        assert!((f.scale() - 4.0).abs() < 1e-6);
        assert!((f.params[2] - 0.12).abs() < 1e-6);
    }

    #[test]
    fn power_exponential_recovers_tau() {
        let x: Vec<f64> = (0..60).map(|i| 10f64.powf(i as f64 / 20.0)).collect();
        let m = DecayModel::PowerExp { delta: 0.16 };
        let y: Vec<f64> = x.iter().map(|&x| m.value(&[1.3, 55.0], x)).collect();
        let f = fit_decay(m, &x, &y, None).unwrap();
        assert!((f.scale() - 55.0).abs() < 1e-5);
    }

    #[test]
    fn noisy_fit_has_honest_error_bars() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(5);
        let x = xs();
        let sigma = 0.01;
        let y: Vec<f64> = x.iter().map(|x| (-x / 10.0).exp() + sigma * (rng.gen::<f64>() - 0.5) * 12f64.sqrt()).collect();
        let f = fit_decay(DecayModel::Exp, &x, &y, Some(&vec![sigma; x.len()])).unwrap();
        assert!((f.scale() - 10.0).abs() < 4.0 * f.scale_err(), "{} +- {}", f.scale(), f.scale_err());
        assert!(f.scale_err() > 0.0 && f.scale_err() < 2.0);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(fit_decay(DecayModel::ExpPlateau, &[1.0, 2.0], &[1.0, 0.5], None), Err(ScalingError::TooFewPoints(4))));
        assert!(matches!(fit_decay(DecayModel::Exp, &[1.0, 2.0, 3.0], &[-1.0, -1.0, -1.0], None), Err(ScalingError::FitFailed(_))));
    }
}
