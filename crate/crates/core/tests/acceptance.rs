//! Acceptance criteria, one `[PASS]` or `[FAIL]` line each.
//!
//! `cargo test -p herald-core --test acceptance` runs the desk-scale
//! variants. Pass `-- --full` for the full-size runs and `-- --only 3,4`
//! to select criteria.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use herald_core::ensemble::{run_ensemble, EnsembleConfig, EnsembleStats};
use herald_core::exact::{build_generator, evolve_sweeps, spectrum, RateMatrix, Sector};
use herald_core::harness::{cmd_chiral, cmd_run, load_ensembles, Config, EnsembleTable};
use herald_core::kernel::{mc_sweep, EventTable, Schedule};
use herald_core::meanfield::{mf_relax, mf_rhs, mf_steady, BMode, MeanFieldState, Rates};
use herald_core::observables::ObservableSet;
use herald_core::scaling::{
    find_critical, fit_decay, late_slope, linear_fit, optimize_collapse, optimize_fss, Curve, DecayModel,
    OffCriticalCurve, SizeCurve,
};
use herald_core::{init_state, InitialState, RngStream, Semantics, SimParams};

const ETA_C: f64 = 0.6065;

struct Outcome {
    pass: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, notes: vec![] }
    }

    /// Records a named check and its detail.
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.notes.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
        self.pass &= ok;
    }

    fn note(&mut self, what: impl Into<String>) {
        self.notes.push(format!("     {}", what.into()));
    }
}

/// Results shared between criteria.
struct Ctx {
    full: bool,
    dir: tempfile::TempDir,
    critical: Option<Critical>,
}

#[derive(Clone)]
struct Critical {
    eta_c: f64,
    eta_c_err: f64,
    eta_c_interp: Option<f64>,
    delta_interp: Option<f64>,
    delta: f64,
    delta_err: f64,
    eta_c_d: f64,
    eta_c_d_err: f64,
    delta_d: f64,
    delta_d_err: f64,
    delta_omega: f64,
    delta_omega_err: f64,
    nu_t: Option<f64>,
    z: Option<f64>,
    l_main: usize,
}

impl Ctx {
    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn cfg(text: &str) -> Config {
    Config::parse(text).expect("acceptance config")
}

fn steady_params(stats: &EnsembleStats, name: &str) -> (f64, f64) {
    stats.steady(name).unwrap_or((f64::NAN, f64::NAN))
}

fn slope_loglog(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect();
    linear_fit(&pts).map_or(f64::NAN, |f| f.1)
}

// ---------------------------------------------------------------- 1

fn criterion_1(_: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    // Closed forms written out independently of the library.
    let closed = |eta: f64, gamma: f64, f: f64| -> (f64, f64) {
        if eta * f < 2.0 * gamma {
            (eta * f / (2.0 * gamma), (1.0 - f) / 2.0 + eta * f * f / (4.0 * gamma))
        } else {
            (1.0, 0.5)
        }
    };
    let mut worst_closed = 0.0f64;
    let mut worst_rhs = 0.0f64;
    let mut worst_relax = 0.0f64;
    let mut n = 0;
    for i in 0..10 {
        for &f in &[0.25, 0.5, 0.75, 0.9, 1.0] {
            let eta = 0.1 + 0.3 * i as f64;
            let r = Rates::new(eta, 1.0, f);
            let s = mf_steady(&r);
            let (ne, nd) = closed(eta, 1.0, f);
            worst_closed = worst_closed.max((s.n_e - ne).abs()).max((s.n_d - nd).abs());
            let d = mf_rhs(&s, &r, BMode::Adiabatic);
            worst_rhs = worst_rhs.max(d.n_e.abs()).max(d.n_d.abs()).max(d.h.abs());
            let end = mf_relax(MeanFieldState::new(0.0, 0.0, 0.0, 0.0), &r, 3000.0, BMode::Adiabatic);
            match end {
                Ok(e) => worst_relax = worst_relax.max(e.max_abs_diff(&s)),
                Err(err) => {
                    o.check(false, format!("integration failed at eta={eta}, f_e={f}: {err}"));
                }
            }
            n += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    o.check(worst_closed <= 1e-12, format!("steady vs closed forms on {n} points: max dev {worst_closed:.2e} (tol 1e-12)"));
    o.check(worst_rhs <= 1e-12, format!("rhs at steady state: max {worst_rhs:.2e}"));
    o.check(worst_relax <= 1e-6, format!("RK4 limit vs steady: max dev {worst_relax:.2e} (tol 1e-6)"));
    o.check(secs < 1.0, format!("runtime {secs:.3} s (limit 1 s)"));
    o
}

// ---------------------------------------------------------------- 2

/// Pearson statistic with bins of expected count below 5 pooled.
fn chi_square(counts: &[u64], probs: &[f64], n: u64) -> (f64, usize) {
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut po, mut pe) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            po += *c as f64;
            pe += e;
        } else {
            bins.push((*c as f64, e));
        }
    }
    if pe > 0.0 || po > 0.0 {
        if pe >= 5.0 || bins.is_empty() {
            bins.push((po, pe));
        } else {
            let k = (0..bins.len()).min_by(|&a, &b| bins[a].1.total_cmp(&bins[b].1)).unwrap();
            bins[k].0 += po;
            bins[k].1 += pe;
        }
    }
    let chi: f64 = bins.iter().filter(|b| b.1 > 0.0).map(|(o, e)| (o - e).powi(2) / e).sum();
    (chi, bins.len().saturating_sub(1))
}

fn histogram(p: &SimParams, m: &RateMatrix, sweeps: &[u64], n: u64) -> Vec<Vec<u64>> {
    let table = EventTable::new(p).unwrap();
    let mut h = vec![vec![0u64; m.dim()]; sweeps.len()];
    for k in 0..n {
        let mut rng = RngStream::new(p.master_seed, k);
        let mut s = init_state(p, &mut rng).unwrap();
        let mut done = 0;
        for (j, &target) in sweeps.iter().enumerate() {
            while done < target {
                mc_sweep(&mut s, &table, &mut rng);
                done += 1;
            }
            h[j][m.index_of(&s).expect("state in sector")] += 1;
        }
    }
    h
}

fn criterion_2(_: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let n: u64 = 100_000;
    let sweeps = [1u64, 6];
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2024);
    let (mut chi_joint, mut dof_joint) = (0.0, 0usize);
    let (mut chi_marg, mut dof_marg) = (0.0, 0usize);
    let mut worst_cell = (0.0f64, String::new());
    let mut cells = 0;
    for l in [3usize, 4, 5] {
        for sem in [Semantics::AsPublished, Semantics::FullChannel] {
            for _ in 0..10 {
                let p = SimParams::periodic(l, rng.gen_range(0.05..1.5), rng.gen_range(0.3..1.5), rng.gen_range(0.3..1.0))
                    .with_semantics(sem)
                    .with_initial(InitialState::RandomEvenParity)
                    .with_seed(rng.gen());
                let m = build_generator(&p, Sector::EvenParity).unwrap();
                let p0 = m.initial_distribution(InitialState::RandomEvenParity).unwrap();
                let h = histogram(&p, &m, &sweeps, n);
                for (j, &s) in sweeps.iter().enumerate() {
                    let q = evolve_sweeps(&m, &p0, s).unwrap();
                    let (c, d) = chi_square(&h[j], &q, n);
                    chi_joint += c;
                    dof_joint += d;
                    let z = (c - d as f64) / (2.0 * d.max(1) as f64).sqrt();
                    if z > worst_cell.0 {
                        worst_cell = (z, format!("L={l} {sem} eta={:.3} gamma={:.3} f_e={:.3} sweeps={s}", p.eta, p.gamma, p.f_e));
                    }
                    // Site marginals of defects and erasures.
                    for site in 0..l {
                        for which in 0..2 {
                            let bit = |st: &herald_core::SublatticeState| {
                                if which == 0 { st.d.get(site) } else { st.e.get(site) }
                            };
                            let pe = m.expect(&q, |st| bit(st) as u8 as f64);
                            let hits: u64 = (0..m.dim()).filter(|&i| bit(&m.state(i))).map(|i| h[j][i]).sum();
                            let var = pe * (1.0 - pe) / n as f64;
                            if var > 0.0 {
                                chi_marg += (hits as f64 / n as f64 - pe).powi(2) / var;
                                dof_marg += 1;
                            } else if (hits as f64 / n as f64 - pe).abs() > 1e-12 {
                                o.check(false, format!("deterministic marginal violated at L={l}"));
                            }
                        }
                    }
                }
                cells += 1;
            }
        }
    }
    let zj = (chi_joint - dof_joint as f64) / (2.0 * dof_joint as f64).sqrt();
    let zm = (chi_marg - dof_marg as f64) / (2.0 * dof_marg as f64).sqrt();
    o.note(format!("{cells} parameter sets, {n} trajectories each, sweeps {sweeps:?}"));
    o.check(zj.abs() < 3.0, format!("joint law: chi2 {chi_joint:.1} on {dof_joint} dof, z = {zj:.2}"));
    o.check(zm.abs() < 3.0, format!("site marginals: chi2 {chi_marg:.1} on {dof_marg} dof, z = {zm:.2}"));
    o.note(format!("largest single-cell z = {:.2} ({})", worst_cell.0, worst_cell.1));
    o
}

// ---------------------------------------------------------------- 3 and 4

fn critical(ctx: &mut Ctx) -> Result<Critical, String> {
    if let Some(c) = &ctx.critical {
        return Ok(c.clone());
    }
    let (l, traj, grid) = if ctx.full { (512, 20000, "0.59:0.62:7") } else { (256, 1000, "0.59:0.62:7") };
    let dir = ctx.out("critical");
    let base = format!("L={l}\ngamma=1\nf_e=1\ntraj={traj}\nzeta=false\nseed=11\n");
    cmd_run(&cfg(&format!("{base}eta_grid={grid}\n")), &dir).map_err(|e| e.to_string())?;
    let tables = load_ensembles(&dir, false).map_err(|e| e.to_string())?;
    let family = |obs: &str, f: fn(f64) -> f64| -> Vec<(f64, Curve)> {
        let mut v: Vec<(f64, Curve)> = tables.iter().map(|t| (t.eta(), t.curve(obs, f).unwrap())).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let erasures = family("n_e", |x| 1.0 - x);
    let defects = family("n_d", |x| 0.5 - x);
    let half = format!("omega_{}", l / 2);
    let omega = family(&half, |x| x);
    let est = find_critical(&erasures, 10.0, 1.0).map_err(|e| e.to_string())?;
    let est_d = find_critical(&defects, 10.0, 1.0).map_err(|e| e.to_string())?;
    let at = |fam: &[(f64, Curve)]| fam.iter().find(|(e, _)| *e == est.eta_c).map(|(_, c)| c.clone()).unwrap();
    let sd = late_slope(est.eta_c, &at(&defects), 10.0, 1.0).map_err(|e| e.to_string())?;
    let so = late_slope(est.eta_c, &at(&omega), 10.0, 1.0).map_err(|e| e.to_string())?;
    // The off-critical collapse also needs cells farther from the transition.
    let wide = ctx.out("wide");
    cmd_run(&cfg(&format!("{base}eta_grid=0.57,0.58,0.63,0.64\n")), &wide).map_err(|e| e.to_string())?;
    let mut off: Vec<OffCriticalCurve> = erasures
        .iter()
        .map(|(eta, c)| OffCriticalCurve { eta: *eta, curve: c.clone() })
        .collect();
    for t in load_ensembles(&wide, false).map_err(|e| e.to_string())? {
        off.push(OffCriticalCurve { eta: t.eta(), curve: t.curve("n_e", |x| 1.0 - x).unwrap() });
    }
    // Collapses are anchored at the interpolated slope zero.
    let eta_fss = est.eta_c_interpolated.unwrap_or(est.eta_c);
    let delta_fss = est.delta_interpolated.unwrap_or(est.delta);
    let nu_t = optimize_collapse(&off, eta_fss, delta_fss, (1.0, 2.5)).ok().map(|f| f.exponent);
    let sizes: &[usize] = if ctx.full { &[32, 64, 128, 256] } else { &[16, 32, 64, 128] };
    let fss_dir = ctx.out("fss");
    for &size in sizes {
        // The horizon must pass the finite-size crossover at t ~ L^z.
        let dt = 1.0 / (eta_fss + 4.0);
        let sweeps = (8.0 * (size as f64).powf(1.5) / dt).ceil() as u64;
        let text = format!("L={size}\ngamma=1\nf_e=1\ntraj={traj}\nzeta=false\nseed=12\neta={eta_fss}\nsweeps={sweeps}\nlengths=1\n");
        cmd_run(&cfg(&text), &fss_dir).map_err(|e| e.to_string())?;
    }
    let size_curves: Vec<SizeCurve> = load_ensembles(&fss_dir, false)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|t: &EnsembleTable| SizeCurve { l: t.l(), curve: t.curve("n_e", |x| 1.0 - x).unwrap() })
        .collect();
    let z = optimize_fss(&size_curves, delta_fss, (1.0, 2.5)).ok().map(|f| f.exponent);
    let c = Critical {
        eta_c: est.eta_c,
        eta_c_err: est.eta_c_err,
        eta_c_interp: est.eta_c_interpolated,
        delta_interp: est.delta_interpolated,
        delta: est.delta,
        delta_err: est.delta_err,
        eta_c_d: est_d.eta_c,
        eta_c_d_err: est_d.eta_c_err,
        delta_d: sd.plateau,
        delta_d_err: sd.spread.max(est_d.delta_err),
        delta_omega: so.plateau,
        delta_omega_err: so.spread,
        nu_t,
        z,
        l_main: l,
    };
    for s in &est.slopes {
        log_line(&format!("    eta={:.4} late slope {:+.4e} plateau {:.4}", s.eta, s.slope, s.plateau));
    }
    ctx.critical = Some(c.clone());
    Ok(c)
}

fn log_line(s: &str) {
    println!("{s}");
}

fn criterion_3(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let tol = if ctx.full { 0.010 } else { 0.02 };
    match critical(ctx) {
        Ok(c) => {
            o.note(format!(
                "L = {}, interpolated slope zero at {:.4}, plateau there {:.4}",
                c.l_main,
                c.eta_c_interp.unwrap_or(f64::NAN),
                c.delta_interp.unwrap_or(f64::NAN)
            ));
            o.check(
                (c.eta_c - ETA_C).abs() <= tol,
                format!("eta_c = {:.4} +- {:.4} vs {ETA_C} (tol {tol})", c.eta_c, c.eta_c_err),
            );
        }
        Err(e) => o.check(false, format!("critical-point search failed: {e}")),
    }
    o
}

fn synthetic_recovery(o: &mut Outcome) {
    let times: Vec<f64> = (0..121).map(|i| 10f64.powf(i as f64 / 24.0)).collect();
    let delta = 0.1607;
    let off: Vec<OffCriticalCurve> = [0.55, 0.57, 0.59, 0.62, 0.64, 0.66]
        .iter()
        .map(|&eta| {
            let g: f64 = eta - ETA_C;
            OffCriticalCurve {
                eta,
                curve: Curve::from_fn(times.clone(), |t| {
                    let u = t * g.abs().powf(1.73);
                    let f = if g < 0.0 { (1.0 + u).powf(delta) } else { (-u).exp() };
                    let v = t.powf(-delta) * f;
                    if v > 1e-4 { v } else { 0.0 }
                }),
            }
        })
        .collect();
    let nu = optimize_collapse(&off, ETA_C, delta, (1.0, 2.5)).map(|f| f.exponent).unwrap_or(f64::NAN);
    o.check((nu / 1.73 - 1.0).abs() < 0.02, format!("synthetic nu_t: planted 1.73, recovered {nu:.4}"));
    let sizes: Vec<SizeCurve> = [32usize, 64, 128, 256]
        .iter()
        .map(|&l| SizeCurve {
            l,
            curve: Curve::from_fn(times.clone(), |t| {
                let s = t / (l as f64).powf(1.58);
                t.powf(-delta) * (1.0 + s).powf(delta) * (-s).exp()
            }),
        })
        .collect();
    let z = optimize_fss(&sizes, delta, (1.0, 2.5)).map(|f| f.exponent).unwrap_or(f64::NAN);
    o.check((z / 1.58 - 1.0).abs() < 0.02, format!("synthetic z: planted 1.58, recovered {z:.4}"));
}

fn criterion_4(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    synthetic_recovery(&mut o);
    let c = match critical(ctx) {
        Ok(c) => c,
        Err(e) => {
            o.check(false, format!("critical-point search failed: {e}"));
            return o;
        }
    };
    o.check((c.delta - 0.1607).abs() <= 0.03, format!("delta = {:.4} +- {:.4} vs 0.1607 (tol 0.03)", c.delta, c.delta_err));
    let joint = (c.delta_err.powi(2) + c.delta_d_err.powi(2)).sqrt();
    o.check(
        (c.delta_d - c.delta).abs() <= joint,
        format!("delta_d = {:.4} +- {:.4} vs delta, joint error {joint:.4}", c.delta_d, c.delta_d_err),
    );
    let joint_eta = (c.eta_c_err.powi(2) + c.eta_c_d_err.powi(2)).sqrt();
    o.check(
        (c.eta_c_d - c.eta_c).abs() <= joint_eta,
        format!("defect eta_c = {:.4} vs erasure eta_c {:.4}, joint error {joint_eta:.4}", c.eta_c_d, c.eta_c),
    );
    let ratio = c.delta_omega / (2.0 * c.delta_d);
    o.check(
        (ratio - 1.0).abs() <= 0.2,
        format!("delta_Omega = {:.4} +- {:.4}, ratio to 2 delta_d = {ratio:.3} (tol 20%)", c.delta_omega, c.delta_omega_err),
    );
    match c.nu_t {
        Some(nu) => o.check((nu - 1.73).abs() <= 0.15, format!("nu_t = {nu:.3} vs 1.73 (tol 0.15)")),
        None => o.check(false, "nu_t collapse failed"),
    }
    match c.z {
        Some(z) => o.check((z - 1.58).abs() <= 0.12, format!("z = {z:.3} vs 1.58 (tol 0.12)")),
        None => o.check(false, "z collapse failed"),
    }
    o
}

// ---------------------------------------------------------------- 5

fn criterion_5(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let (l, traj) = if ctx.full { (256, 2000) } else { (128, 400) };
    for eta in [0.2, 0.4, 0.55] {
        let c = cfg(&format!(
            "L={l}\neta={eta}\ngamma=1\nf_e=1\ntraj={traj}\nlengths=all\nzeta=false\nstride=20\nseed=5\n"
        ));
        let p = c.sim_params().unwrap();
        let ec = EnsembleConfig::default().steady_from(p.t_max_sweeps / 2);
        let stats = run_ensemble(&p, &c.schedule(&p).unwrap(), &c.observables(&p).unwrap(), &ec).unwrap();
        let mut worst = (0.0f64, 0usize);
        // A string over the whole ring is the global charge, so l < L.
        for w in 1..l {
            let (a, ea) = steady_params(&stats, &format!("omega_{w}"));
            let (b, eb) = steady_params(&stats, &format!("corr_e_{w}"));
            let z = (a - b).abs() / (ea * ea + eb * eb).sqrt().max(1e-300);
            if z > worst.0 {
                worst = (z, w);
            }
        }
        o.check(worst.0 < 3.0, format!("eta={eta}: max_l |Omega - corr_e| / sigma = {:.2} at l={}", worst.0, worst.1));
        let (om, eom) = steady_params(&stats, &format!("omega_{}", l / 2));
        let (ne, ene) = steady_params(&stats, "n_e");
        let want = (1.0 - ne).powi(2);
        let sigma = (eom * eom + (2.0 * (1.0 - ne) * ene).powi(2)).sqrt();
        o.check(
            (om - want).abs() < 3.0 * sigma,
            format!("eta={eta}: Omega(L/2) = {om:.4} +- {eom:.4} vs (1-n_e)^2 = {want:.4}, z = {:.2}", (om - want).abs() / sigma),
        );
    }
    o
}

// ---------------------------------------------------------------- 6

fn criterion_6(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let (l, traj) = if ctx.full { (256, 2000) } else { (128, 400) };
    let eta = 0.3;
    let fes = [0.99, 0.98, 0.96, 0.92];
    let (mut one_minus, mut taus, mut xis, mut hs) = (vec![], vec![], vec![], vec![]);
    for &f_e in &fes {
        let c = cfg(&format!("L={l}\neta={eta}\ngamma=1\nf_e={f_e}\ntraj={traj}\nlengths=all\nzeta=false\nseed=6\n"));
        let p = c.sim_params().unwrap();
        let ec = EnsembleConfig::default().steady_from(p.t_max_sweeps / 2);
        let stats = run_ensemble(&p, &c.schedule(&p).unwrap(), &c.observables(&p).unwrap(), &ec).unwrap();
        // Temporal decay of the half-system string order, past the heralded transient.
        let (m, s) = stats.series(&format!("omega_{}", l / 2)).unwrap();
        let (mut x, mut y, mut e) = (vec![], vec![], vec![]);
        for (i, &t) in stats.times().iter().enumerate() {
            if t >= 5.0 && m[i] > 3.0 * s[i] {
                x.push(t);
                y.push(m[i]);
                e.push(s[i]);
            }
        }
        let tau = fit_decay(DecayModel::Exp, &x, &y, Some(&e)).map(|f| f.scale()).unwrap_or(f64::NAN);
        // Steady spatial profile.
        let (lx, ly, le): (Vec<f64>, Vec<f64>, Vec<f64>) = (1..=l / 2)
            .map(|w| {
                let (a, b) = steady_params(&stats, &format!("omega_{w}"));
                (w as f64, a, b)
            })
            .fold((vec![], vec![], vec![]), |mut acc, (a, b, c)| {
                acc.0.push(a);
                acc.1.push(b);
                acc.2.push(c);
                acc
            });
        let xi = fit_decay(DecayModel::ExpPlateau, &lx, &ly, Some(&le)).map(|f| f.scale()).unwrap_or(f64::NAN);
        let h = steady_params(&stats, "h").0;
        o.note(format!("f_e={f_e}: tau_Omega = {tau:.3}, xi_Omega = {xi:.3}, h = {h:.4}"));
        one_minus.push(1.0 - f_e);
        taus.push(tau);
        xis.push(xi);
        hs.push(h);
    }
    let st = slope_loglog(&one_minus, &taus);
    let sx = slope_loglog(&one_minus, &xis);
    let sh = slope_loglog(&one_minus, &hs);
    o.check((st + 1.0).abs() <= 0.1, format!("tau_Omega log-log slope {st:.3} (want -1 +- 0.1)"));
    o.check((sx + 0.5).abs() <= 0.07, format!("xi_Omega log-log slope {sx:.3} (want -0.5 +- 0.07)"));
    o.check((sh - 0.5).abs() <= 0.05, format!("h log-log slope {sh:.3} (want 0.5 +- 0.05)"));
    // Crossover at the critical point.
    let model = DecayModel::PowerExp { delta: 0.32 };
    for &f_e in &fes {
        let c = cfg(&format!("L={l}\neta={ETA_C}\ngamma=1\nf_e={f_e}\ntraj={traj}\nlengths={}\nzeta=false\nseed=7\n", l / 2));
        let p = c.sim_params().unwrap();
        let stats =
            run_ensemble(&p, &c.schedule(&p).unwrap(), &c.observables(&p).unwrap(), &EnsembleConfig::default()).unwrap();
        let (m, s) = stats.series(&format!("omega_{}", l / 2)).unwrap();
        let (mut x, mut y, mut e) = (vec![], vec![], vec![]);
        for (i, &t) in stats.times().iter().enumerate() {
            if t >= 1.0 && m[i] > 3.0 * s[i] {
                x.push(t);
                y.push(m[i]);
                e.push(s[i]);
            }
        }
        let want = 4.0 * ETA_C * (1.0 - f_e);
        match fit_decay(model, &x, &y, Some(&e)) {
            Ok(f) => {
                let b = 1.0 / f.scale();
                o.check(
                    (b / want - 1.0).abs() <= 0.15,
                    format!("f_e={f_e}: crossover b = {b:.4} vs 4 eta (1-f_e) = {want:.4}, a = {:.3}", f.params[0]),
                );
            }
            Err(e) => o.check(false, format!("f_e={f_e}: crossover fit failed: {e}")),
        }
    }
    o
}

// ---------------------------------------------------------------- 7

fn criterion_7(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let (l, traj) = if ctx.full { (256, 1000) } else { (128, 300) };
    let step = 0.05;
    let etas: Vec<f64> = (0..13).map(|i| 0.45 + step * i as f64).collect();
    for f_e in [0.7, 0.8, 0.9, 1.0] {
        let mut slopes = Vec::new();
        for &eta in &etas {
            let p = SimParams::periodic(l, eta, 1.0, f_e).with_traj(traj).with_seed(7);
            let sched = Schedule::geometric(p.t_max_sweeps, 20);
            let stats = run_ensemble(&p, &sched, &ObservableSet::densities(), &EnsembleConfig::default()).unwrap();
            let (m, s) = stats.series("n_e").unwrap();
            let curve = Curve::new(stats.times().to_vec(), m.iter().map(|x| 1.0 - x).collect(), s).unwrap();
            let sl = late_slope(eta, &curve, 10.0, 1.0).map(|x| x.slope).unwrap_or(f64::NEG_INFINITY);
            slopes.push(sl);
        }
        // First sign change of the late-time running-exponent slope.
        let k = slopes.windows(2).position(|w| w[0] > 0.0 && w[1] <= 0.0);
        match k {
            Some(k) => {
                let (a, b) = (etas[k], etas[k + 1]);
                let eta_b = a + (b - a) * slopes[k] / (slopes[k] - slopes[k + 1]);
                let res = step * f_e;
                o.check(
                    (eta_b * f_e - ETA_C).abs() <= res,
                    format!("f_e={f_e}: boundary eta = {eta_b:.4}, f_e eta = {:.4} vs {ETA_C} (grid resolution {res:.3})", eta_b * f_e),
                );
            }
            None => o.check(false, format!("f_e={f_e}: no active-to-absorbing change on the grid")),
        }
    }
    o
}

// ---------------------------------------------------------------- 8

fn criterion_8(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let traj = if ctx.full { 4000 } else { 500 };
    let c = cfg(&format!(
        "L=256\neta=0.1\ngamma=1\nmu_grid=0,0.25,0.5,1\ntraj={traj}\nsweeps=1000\nsteady_from=200\nstride=5\nseed=8\n"
    ));
    match cmd_chiral(&c, &ctx.out("chiral")) {
        Ok((_, rows)) => {
            for s in rows {
                let mu = s.mu;
                o.check(s.omega1_pinned, format!("mu={mu}: Omega_(1,L-1) = 1 at every sample"));
                let dx = s.xi.value / s.mf_xi - 1.0;
                o.check(dx.abs() <= 0.10, format!("mu={mu}: xi = {:.4} vs {:.4} ({:+.1}%)", s.xi.value, s.mf_xi, 100.0 * dx));
                let db = s.n_d_bulk.0 / s.mf_bulk - 1.0;
                o.check(db.abs() <= 0.05, format!("mu={mu}: bulk n_d = {:.4} vs {:.4} ({:+.1}%)", s.n_d_bulk.0, s.mf_bulk, 100.0 * db));
                let de = s.n_d_edge.0 / s.mf_edge - 1.0;
                o.check(de.abs() <= 0.10, format!("mu={mu}: edge n_d = {:.4} vs {:.4} ({:+.1}%)", s.n_d_edge.0, s.mf_edge, 100.0 * de));
            }
        }
        Err(e) => o.check(false, format!("chiral run failed: {e}")),
    }
    o
}

// ---------------------------------------------------------------- 9

fn criterion_9(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let traj = if ctx.full { 4000 } else { 1000 };
    for l in [32usize, 64] {
        // Unpaired defects of a random start annihilate diffusively, so the
        // horizon is 3 L^2 in physical time and the steady window its last third.
        let sweeps = (3.0 * (l * l) as f64 * (0.3 + 4.0)).ceil() as u64;
        let run = |init: InitialState, seed: u64| {
            let p = SimParams::periodic(l, 0.3, 1.0, 1.0)
                .with_initial(init)
                .with_traj(traj)
                .with_seed(seed)
                .with_sweeps(sweeps);
            let sched = Schedule::geometric(p.t_max_sweeps, 20);
            let ec = EnsembleConfig::default().steady_from(2 * sweeps / 3);
            run_ensemble(&p, &sched, &ObservableSet::standard(l), &ec).unwrap()
        };
        let a = run(InitialState::Cluster, 91);
        let b = run(InitialState::RandomEvenParity, 92);
        let mut worst = (0.0f64, String::new());
        for col in a.columns() {
            let (x, ex) = steady_params(&a, col);
            let (y, ey) = steady_params(&b, col);
            let sigma = (ex * ex + ey * ey).sqrt();
            let z = if sigma > 0.0 { (x - y).abs() / sigma } else if x == y { 0.0 } else { f64::INFINITY };
            if z > worst.0 {
                worst = (z, col.clone());
            }
        }
        o.check(
            worst.0 < 3.0,
            format!("L={l}: {} observables, largest |difference| / sigma = {:.2} ({})", a.columns().len(), worst.0, worst.1),
        );
    }
    o
}

// ---------------------------------------------------------------- 10

fn criterion_10(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let z = match critical(ctx) {
        Ok(Critical { z: Some(z), .. }) => z,
        _ => {
            o.note("no measured z; using 1.58");
            1.58
        }
    };
    let mut gaps = Vec::new();
    for l in [4usize, 5, 6] {
        let p = SimParams::periodic(l, ETA_C, 1.0, 1.0);
        let m = build_generator(&p, Sector::EvenParity).unwrap();
        let t = Instant::now();
        let s = spectrum(&m, 0).unwrap();
        let tol = 1e-9 * m.max_exit_rate();
        let g = s.gap(tol).unwrap_or(f64::NAN);
        o.note(format!("L={l}: dim {}, {} zero modes, gap {g:.5e} ({:.1} s)", m.dim(), s.zero_modes(tol), t.elapsed().as_secs_f64()));
        gaps.push((l as f64, g));
    }
    let decreasing = gaps.windows(2).all(|w| w[1].1 < w[0].1);
    o.check(decreasing, "gap decreases with L");
    // Spread of ln(gap L^z) relative to the spread of ln(gap).
    let spread = |zz: f64| {
        let v: Vec<f64> = gaps.iter().map(|(l, g)| (g * l.powf(zz)).ln()).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (raw, collapsed) = (spread(0.0), spread(z));
    let fitted = -slope_loglog(&gaps.iter().map(|g| g.0).collect::<Vec<_>>(), &gaps.iter().map(|g| g.1).collect::<Vec<_>>());
    o.note(format!("log-log gap exponent over L=4..6: {fitted:.3}"));
    o.check(
        collapsed <= 0.25 * raw,
        format!("ln(gap L^z) spread {collapsed:.4} vs ln(gap) spread {raw:.4} with z = {z:.3} (threshold: 25% of raw)"),
    );
    o
}

// ---------------------------------------------------------------- 11

fn criterion_11(ctx: &mut Ctx) -> Outcome {
    let mut o = Outcome::new();
    let mut bodies: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    for threads in [1usize, 4, 16] {
        let dir = ctx.out(&format!("det{threads}"));
        let c = cfg(&format!("L=64\neta=0.5\ngamma=1\nf_e=0.95\ntraj=96\nchunk=8\nseed=99\nthreads={threads}\n"));
        let p = cmd_run(&c, &dir).unwrap();
        bodies.insert(threads, std::fs::read(&p[0]).unwrap());
    }
    let reference = &bodies[&1];
    for (t, b) in &bodies {
        o.check(b == reference, format!("{t} workers: {} bytes, identical to 1 worker", b.len()));
    }
    o
}

type Criterion = fn(&mut Ctx) -> Outcome;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let full = args.iter().any(|a| a == "--full");
    let only: Option<Vec<u32>> = args
        .iter()
        .position(|a| a == "--only")
        .and_then(|i| args.get(i + 1))
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, Criterion); 11] = [
        (1, "mean-field exactness", criterion_1),
        (2, "kernel vs exact generator", criterion_2),
        (3, "critical point", criterion_3),
        (4, "critical exponents", criterion_4),
        (5, "string-order / erasure-correlator identity", criterion_5),
        (6, "heralding stability", criterion_6),
        (7, "erasure transition line", criterion_7),
        (8, "chiral protocol", criterion_8),
        (9, "initial-state independence", criterion_9),
        (10, "exact spectrum gap scaling", criterion_10),
        (11, "determinism across worker counts", criterion_11),
    ];
    let mut ctx = Ctx { full, dir: tempfile::tempdir().expect("temp dir"), critical: None };
    let mut failed = Vec::new();
    println!("acceptance ({} scale)", if full { "full" } else { "desk" });
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let out = f(&mut ctx);
        for n in &out.notes {
            println!("    {n}");
        }
        let tag = if out.pass { "[PASS]" } else { "[FAIL]" };
        println!("{tag} criterion {id}: {name} ({:.1} s)", t.elapsed().as_secs_f64());
        if !out.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("all selected criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
