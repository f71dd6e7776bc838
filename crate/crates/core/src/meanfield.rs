//! Mean-field rate equations and their steady states.
//!
//! Densities evolve as
//!
//! ```text
//! dn_e/dt = (eta f_e - 2 gamma n_e)(1 - n_e)
//! dn_d/dt = eta (1 - 2 n_d) - 2 gamma n_e (1 - n_e)
//! dh/dt   = 2 eta (1-f_e)(1+n_e)(1-n_e)^2 - 4 eta (1-f_e) h - 2 eta f_e h^2
//! db/dt   = eta f_e (h(1-h) - 2b) + eta (1-f_e)(n_e (1-n_e)^2 - 2b) - 2 gamma b
//! ```
//!
//! The `n_d` noise term uses the coefficient whose fixed point is the closed
//! form `(1 - f_e)/2 + eta f_e^2 / (4 gamma)`; at `f_e = 1` it is the plain
//! two-density model.

use std::fmt::Write as _;

use crate::error::MeanFieldError;
use crate::params::SimParams;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanFieldState {
    pub n_e: f64,
    pub n_d: f64,
    pub h: f64,
    pub b: f64,
}

impl MeanFieldState {
    pub fn new(n_e: f64, n_d: f64, h: f64, b: f64) -> Self {
        MeanFieldState { n_e, n_d, h, b }
    }

    fn axpy(&self, k: f64, d: &MeanFieldState) -> MeanFieldState {
        MeanFieldState {
            n_e: self.n_e + k * d.n_e,
            n_d: self.n_d + k * d.n_d,
            h: self.h + k * d.h,
            b: self.b + k * d.b,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 4] {
        [("n_e", self.n_e), ("n_d", self.n_d), ("h", self.h), ("b", self.b)]
    }

    pub fn max_abs_diff(&self, o: &MeanFieldState) -> f64 {
        (self.n_e - o.n_e)
            .abs()
            .max((self.n_d - o.n_d).abs())
            .max((self.h - o.h).abs())
            .max((self.b - o.b).abs())
    }
}

/// Treatment of the five-site correlation `b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BMode {
    /// `b` is slaved to its quasi-steady value after every step.
    #[default]
    Adiabatic,
    /// `b` follows its own rate equation.
    Dynamic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub eta: f64,
    pub gamma: f64,
    pub f_e: f64,
}

impl From<&SimParams> for Rates {
    fn from(p: &SimParams) -> Self {
        Rates { eta: p.eta, gamma: p.gamma, f_e: p.f_e }
    }
}

impl Rates {
    pub fn new(eta: f64, gamma: f64, f_e: f64) -> Self {
        Rates { eta, gamma, f_e }
    }

    pub fn active(&self) -> bool {
        self.eta * self.f_e < 2.0 * self.gamma
    }
}

/// Time derivatives of all four densities. In [`BMode::Adiabatic`] the `b`
/// component is zero.
pub fn mf_rhs(s: &MeanFieldState, r: &Rates, mode: BMode) -> MeanFieldState {
    let Rates { eta, gamma, f_e } = *r;
    let q = 1.0 - s.n_e;
    let n_e = (eta * f_e - 2.0 * gamma * s.n_e) * q;
    let n_d = eta * (1.0 - 2.0 * s.n_d) - 2.0 * gamma * s.n_e * q;
    let h = 2.0 * eta * (1.0 - f_e) * (1.0 + s.n_e) * q * q
        - 4.0 * eta * (1.0 - f_e) * s.h
        - 2.0 * eta * f_e * s.h * s.h;
    let b = match mode {
        BMode::Adiabatic => 0.0,
        BMode::Dynamic => {
            eta * f_e * (s.h * (1.0 - s.h) - 2.0 * s.b)
                + eta * (1.0 - f_e) * (s.n_e * q * q - 2.0 * s.b)
                - 2.0 * gamma * s.b
        }
    };
    MeanFieldState { n_e, n_d, h, b }
}

/// Quasi-steady `b` to first order in `eta / gamma`.
pub fn b_adiabatic(h: f64, n_e: f64, r: &Rates) -> f64 {
    if r.gamma == 0.0 {
        return 0.0;
    }
    let q = 1.0 - n_e;
    r.eta * r.f_e / (2.0 * r.gamma) * h * (1.0 - h) + r.eta * (1.0 - r.f_e) / (2.0 * r.gamma) * n_e * q * q
}

/// Fixed point of the dynamic `b` equation.
pub fn b_dynamic_fixed_point(h: f64, n_e: f64, r: &Rates) -> f64 {
    let q = 1.0 - n_e;
    let den = 2.0 * r.eta + 2.0 * r.gamma;
    if den == 0.0 {
        return 0.0;
    }
    (r.eta * r.f_e * h * (1.0 - h) + r.eta * (1.0 - r.f_e) * n_e * q * q) / den
}

/// Non-negative root of `dh/dt = 0` at erasure density `n_e`:
/// `f_e h^2 + 2(1-f_e) h - (1-f_e)(1+n_e)(1-n_e)^2 = 0`.
pub fn h_fixed_point(f_e: f64, n_e: f64) -> f64 {
    let g = 1.0 - f_e;
    let c = g * (1.0 + n_e) * (1.0 - n_e) * (1.0 - n_e);
    if c <= 0.0 {
        return 0.0;
    }
    if f_e == 0.0 {
        return c / 2.0;
    }
    // Rationalized to avoid cancellation for small c.
    c / (g + (g * g + f_e * c).sqrt())
}

/// Small-noise unheralded density `(f_e - 1 + sqrt(1 - f_e)) / f_e`.
pub fn h_small_noise(f_e: f64) -> f64 {
    h_fixed_point(f_e, 0.0)
}

/// Stable steady state. Active branch (`eta f_e < 2 gamma`):
/// `n_e = eta f_e / (2 gamma)`, `n_d = (1-f_e)/2 + eta f_e^2 / (4 gamma)`;
/// absorbing branch: `n_e = 1`, `n_d = 1/2`. `h` and `b` are the fixed
/// points at that `n_e`.
pub fn mf_steady(r: &Rates) -> MeanFieldState {
    let (n_e, n_d) = if r.active() {
        (
            r.eta * r.f_e / (2.0 * r.gamma),
            (1.0 - r.f_e) / 2.0 + r.eta * r.f_e * r.f_e / (4.0 * r.gamma),
        )
    } else {
        (1.0, 0.5)
    };
    let h = if r.eta > 0.0 { h_fixed_point(r.f_e, n_e) } else { 0.0 };
    MeanFieldState { n_e, n_d, h, b: b_adiabatic(h, n_e, r) }
}

/// Default step `0.01 / max(eta, gamma)`.
pub fn default_dt(r: &Rates) -> f64 {
    0.01 / r.eta.max(r.gamma).max(1e-12)
}

/// Fixed-step RK4 from `start` up to `t_max`, recording every `record_every`
/// steps plus the final state.
pub fn mf_integrate(
    start: MeanFieldState,
    r: &Rates,
    t_max: f64,
    dt: f64,
    mode: BMode,
    record_every: usize,
) -> Result<Vec<(f64, MeanFieldState)>, MeanFieldError> {
    if !(dt > 0.0 && dt.is_finite() && t_max >= 0.0 && t_max.is_finite()) {
        return Err(MeanFieldError::BadStep(dt));
    }
    let steps = (t_max / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_max / steps as f64 };
    let mut s = start;
    if mode == BMode::Adiabatic {
        s.b = b_adiabatic(s.h, s.n_e, r);
    }
    let mut out = vec![(0.0, s)];
    let every = record_every.max(1);
    for k in 1..=steps {
        let k1 = mf_rhs(&s, r, mode);
        let k2 = mf_rhs(&s.axpy(h / 2.0, &k1), r, mode);
        let k3 = mf_rhs(&s.axpy(h / 2.0, &k2), r, mode);
        let k4 = mf_rhs(&s.axpy(h, &k3), r, mode);
        s = MeanFieldState {
            n_e: s.n_e + h / 6.0 * (k1.n_e + 2.0 * k2.n_e + 2.0 * k3.n_e + k4.n_e),
            n_d: s.n_d + h / 6.0 * (k1.n_d + 2.0 * k2.n_d + 2.0 * k3.n_d + k4.n_d),
            h: s.h + h / 6.0 * (k1.h + 2.0 * k2.h + 2.0 * k3.h + k4.h),
            b: s.b + h / 6.0 * (k1.b + 2.0 * k2.b + 2.0 * k3.b + k4.b),
        };
        if mode == BMode::Adiabatic {
            s.b = b_adiabatic(s.h, s.n_e, r);
        }
        let t = k as f64 * h;
        for (field, value) in s.fields() {
            if !(-1e-9..=1.0 + 1e-9).contains(&value) || !value.is_finite() {
                return Err(MeanFieldError::OutOfBounds { t, field, value });
            }
        }
        if k % every == 0 || k == steps {
            out.push((t, s));
        }
    }
    Ok(out)
}

/// Final state of [`mf_integrate`].
pub fn mf_relax(start: MeanFieldState, r: &Rates, t_max: f64, mode: BMode) -> Result<MeanFieldState, MeanFieldError> {
    let traj = mf_integrate(start, r, t_max, default_dt(r), mode, usize::MAX)?;
    Ok(traj.last().map(|x| x.1).unwrap_or(start))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiralMeanField {
    pub n_d_bulk: f64,
    pub n_d_edge: f64,
    pub xi: f64,
}

/// Bulk and edge defect densities and the string-order length of the
/// center-biased chain.
///
/// The edge density `(2eta + gamma mu - sqrt(4 gamma eta + 4 eta^2 + gamma^2 mu^2)) / (2 gamma (mu - 1))`
/// is evaluated as `2 eta / (A + sqrt(A^2 + 4 gamma eta (1 - mu)))`,
/// `A = 2 eta + gamma mu`, which is the same function and finite at `mu = 1`.
pub fn mf_chiral(eta: f64, gamma: f64, mu: f64) -> ChiralMeanField {
    let r = eta / gamma;
    let n_d_bulk = -r + (r * (1.0 + r)).sqrt();
    let a = 2.0 * eta + gamma * mu;
    let root = (a * a + 4.0 * gamma * eta * (1.0 - mu)).sqrt();
    let n_d_edge = if eta == 0.0 { 0.0 } else { 2.0 * eta / (a + root) };
    // 1 / (2 (sqrt(4r + mu^2) - mu)), rationalized.
    let xi = if r == 0.0 { f64::INFINITY } else { ((4.0 * r + mu * mu).sqrt() + mu) / (8.0 * r) };
    ChiralMeanField { n_d_bulk, n_d_edge, xi }
}

/// Literal edge-density expression; undefined at `mu = 1`.
pub fn chiral_edge_literal(eta: f64, gamma: f64, mu: f64) -> f64 {
    (2.0 * eta + gamma * mu - (4.0 * gamma * eta + 4.0 * eta * eta + gamma * gamma * mu * mu).sqrt())
        / (2.0 * gamma * (mu - 1.0))
}

/// Steady states on a rectangular `(eta, f_e)` grid, `eta` varying fastest.
pub fn phase_diagram(etas: &[f64], fes: &[f64], gamma: f64) -> Vec<(f64, f64, MeanFieldState)> {
    let mut out = Vec::with_capacity(etas.len() * fes.len());
    for &f_e in fes {
        for &eta in etas {
            out.push((eta, f_e, mf_steady(&Rates::new(eta, gamma, f_e))));
        }
    }
    out
}

pub fn phase_diagram_csv(rows: &[(f64, f64, MeanFieldState)], gamma: f64) -> String {
    let mut s = String::from("eta,f_e,gamma,n_e,n_d,h,b,phase\n");
    for (eta, f_e, m) in rows {
        let phase = if Rates::new(*eta, gamma, *f_e).active() { "active" } else { "absorbing" };
        let _ = writeln!(s, "{eta},{f_e},{gamma},{},{},{},{},{phase}", m.n_e, m.n_d, m.h, m.b);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_steady_states() {
        let a = mf_steady(&Rates::new(1.0, 1.0, 1.0));
        assert_eq!((a.n_e, a.n_d), (0.5, 0.25));
        let b = mf_steady(&Rates::new(3.0, 1.0, 1.0));
        assert_eq!((b.n_e, b.n_d), (1.0, 0.5));
        let c = mf_steady(&Rates::new(1.0, 1.0, 0.5));
        assert!((c.n_e - 0.25).abs() < 1e-15 && (c.n_d - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn rhs_at_origin() {
        let d = mf_rhs(&MeanFieldState::default(), &Rates::new(1.0, 1.0, 1.0), BMode::Adiabatic);
        assert_eq!((d.n_e, d.n_d), (1.0, 1.0));
    }

    #[test]
    fn small_noise_h() {
        for f in [0.5, 0.9, 0.99] {
            let direct = (f - 1.0 + (1.0f64 - f).sqrt()) / f;
            assert!((h_small_noise(f) - direct).abs() < 1e-14);
        }
        assert_eq!(h_small_noise(1.0), 0.0);
        assert_eq!(h_small_noise(0.0), 0.5);
    }

    #[test]
    fn chiral_values() {
        let m = mf_chiral(0.1, 1.0, 0.5);
        assert!((m.n_d_bulk - 0.231_662_479).abs() < 1e-8);
        assert!((mf_chiral(0.1, 1.0, 0.0).xi - 1.0 / (2.0 * 0.4f64.sqrt())).abs() < 1e-12);
        // Continuous extension at mu = 1.
        let edge = mf_chiral(0.1, 1.0, 1.0).n_d_edge;
        assert!((edge - 0.1 / 1.2).abs() < 1e-14);
        assert!((chiral_edge_literal(0.1, 1.0, 1.0 - 1e-6) - edge).abs() < 1e-6);
        for mu in [0.0, 0.25, 0.5, 0.9] {
            let lit = chiral_edge_literal(0.1, 1.0, mu);
            assert!((mf_chiral(0.1, 1.0, mu).n_d_edge - lit).abs() < 1e-13);
        }
        // At mu = 0 the edge obeys the bulk equation.
        let z = mf_chiral(0.1, 1.0, 0.0);
        assert!((z.n_d_edge - z.n_d_bulk).abs() < 1e-14);
        assert!(mf_chiral(0.0, 1.0, 0.5).xi.is_infinite());
        assert_eq!(mf_chiral(0.0, 1.0, 0.5).n_d_bulk, 0.0);
    }

    #[test]
    fn absorbing_state_is_fixed() {
        let r = Rates::new(0.5, 1.0, 1.0);
        let end = mf_relax(MeanFieldState::new(1.0, 0.5, 0.0, 0.0), &r, 50.0, BMode::Adiabatic).unwrap();
        assert_eq!(end.n_e, 1.0);
        assert!((end.n_d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integration_reaches_active_branch() {
        let r = Rates::new(0.4, 1.0, 0.9);
        let end = mf_relax(MeanFieldState::default(), &r, 200.0, BMode::Adiabatic).unwrap();
        assert!(end.max_abs_diff(&mf_steady(&r)) < 1e-6, "{end:?}");
        let dynamic = mf_relax(MeanFieldState::default(), &r, 200.0, BMode::Dynamic).unwrap();
        assert!((dynamic.b - b_dynamic_fixed_point(dynamic.h, dynamic.n_e, &r)).abs() < 1e-9);
    }

    #[test]
    fn bad_step_and_divergence() {
        let r = Rates::new(0.4, 1.0, 1.0);
        assert!(matches!(
            mf_integrate(MeanFieldState::default(), &r, 1.0, 0.0, BMode::Adiabatic, 1),
            Err(MeanFieldError::BadStep(_))
        ));
        let huge = mf_integrate(MeanFieldState::default(), &Rates::new(100.0, 1.0, 1.0), 1.0, 0.5, BMode::Adiabatic, 1);
        assert!(matches!(huge, Err(MeanFieldError::OutOfBounds { .. })));
    }

    #[test]
    fn csv_layout() {
        let rows = phase_diagram(&[0.5, 3.0], &[1.0], 1.0);
        let csv = phase_diagram_csv(&rows, 1.0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "eta,f_e,gamma,n_e,n_d,h,b,phase");
        assert!(lines[1].ends_with("active") && lines[2].ends_with("absorbing"));
    }

    proptest! {
        #[test]
        fn active_fixed_points_are_stationary(eta in 0.01f64..4.0, f_e in 0.0f64..1.0) {
            let r = Rates::new(eta, 1.0, f_e);
            prop_assume!(r.active());
            let s = mf_steady(&r);
            let d = mf_rhs(&s, &r, BMode::Adiabatic);
            prop_assert!(d.n_e.abs() < 1e-12 && d.n_d.abs() < 1e-12 && d.h.abs() < 1e-12, "{:?}", d);
            prop_assert!((0.0..=1.0).contains(&s.h) && (0.0..=1.0).contains(&s.b));
        }

        #[test]
        fn steady_state_is_continuous_across_the_line(f_e in 0.05f64..1.0) {
            let eta = 2.0 / f_e;
            let below = mf_steady(&Rates::new(eta * (1.0 - 1e-9), 1.0, f_e));
            let above = mf_steady(&Rates::new(eta, 1.0, f_e));
            prop_assert!(below.max_abs_diff(&above) < 1e-6);
        }
    }
}
