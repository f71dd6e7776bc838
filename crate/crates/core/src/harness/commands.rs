use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::ensemble::{run_ensemble, EnsembleConfig, EnsembleStats};
use crate::error::HarnessError;
use crate::exact::{build_generator, spectrum, Sector};
use crate::meanfield::{mf_chiral, phase_diagram, phase_diagram_csv};
use crate::params::{Boundary, SimParams};
use crate::scaling::{
    find_critical, fit_decay, optimize_collapse, optimize_fss, parametric_resample, Curve, DecayModel, Estimate,
    OffCriticalCurve, ScalingFit, SizeCurve,
};

use super::config::Config;
use super::io::{load_ensembles, write_with_manifest, EnsembleTable, OutputDigest, RunManifest, DT_CONVENTION};

/// Keys that change how work is scheduled but not what is computed.
const EXECUTION_KEYS: &[&str] = &["threads"];

fn digest(cfg: &Config) -> String {
    let mut c = cfg.clone();
    for k in EXECUTION_KEYS {
        c.remove(k);
    }
    c.digest()
}

fn manifest(command: &str, cfg: &Config, p: Option<&SimParams>, first: Option<u64>, wall: f64) -> RunManifest {
    RunManifest {
        command: command.into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.canonical(),
        config_sha256: digest(cfg),
        params: p.cloned(),
        semantics: p.map(|p| p.semantics.to_string()),
        dt_convention: DT_CONVENTION.into(),
        master_seed: p.map(|p| p.master_seed),
        n_traj: p.map(|p| p.n_traj),
        first_traj: first,
        wall_time_s: wall,
        output: OutputDigest { file: String::new(), sha256: String::new() },
    }
}

fn ensemble_config(cfg: &Config, p: &SimParams) -> Result<EnsembleConfig, HarnessError> {
    Ok(EnsembleConfig {
        threads: cfg.get_or("threads", 1)?,
        chunk: cfg.get_or("chunk", 16)?,
        first: cfg.get_or("first_traj", 0)?,
        steady_from: Some(cfg.get_or("steady_from", p.t_max_sweeps / 2)?),
        keep: vec![],
    })
}

/// Values of a scalar key or its grid.
fn axis(cfg: &Config, scalar: &str, grid: &str) -> Result<Vec<f64>, HarnessError> {
    match cfg.grid(grid)? {
        Some(g) => Ok(g),
        None => Ok(vec![cfg.require(scalar)?]),
    }
}

fn sizes(cfg: &Config) -> Result<Vec<usize>, HarnessError> {
    match cfg.usize_list("L_grid")? {
        Some(g) => Ok(g),
        None => Ok(vec![cfg.require("L")?]),
    }
}

/// `cfg` narrowed to one grid cell.
fn cell(cfg: &Config, l: usize, eta: f64) -> Result<Config, HarnessError> {
    let mut c = cfg.clone();
    for k in ["L_grid", "eta_grid", "fe_grid", "mu_grid"] {
        c.remove(k);
    }
    c.set_value("L", l)?;
    c.set_value("eta", eta)?;
    Ok(c)
}

pub fn ensemble_file_name(p: &SimParams) -> String {
    match p.boundary {
        Boundary::Periodic => format!("ens_L{}_eta{}_fe{}.csv", p.l, p.eta, p.f_e),
        Boundary::ChiralOpen => format!("chiral_L{}_eta{}_mu{}.csv", p.l, p.eta, p.mu),
    }
}

/// Runs one configured cell and writes its ensemble CSV.
pub fn run_cell(cfg: &Config, out: &Path) -> Result<(PathBuf, EnsembleStats), HarnessError> {
    let p = cfg.sim_params()?;
    let ec = ensemble_config(cfg, &p)?;
    let start = Instant::now();
    let stats = run_ensemble(&p, &cfg.schedule(&p)?, &cfg.observables(&p)?, &ec)?;
    let d = digest(cfg);
    let table = EnsembleTable::from_stats(&stats, &p, ec.first, &d);
    let m = manifest("run", cfg, Some(&p), Some(ec.first), start.elapsed().as_secs_f64());
    let path = write_with_manifest(out, &ensemble_file_name(&p), &table.to_csv(), m)?;
    Ok((path, stats))
}

/// One ensemble file per `(eta, L)` cell.
pub fn cmd_run(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut paths = Vec::new();
    for l in sizes(cfg)? {
        for eta in axis(cfg, "eta", "eta_grid")? {
            let (path, _) = run_cell(&cell(cfg, l, eta)?, out)?;
            log::info!("wrote {}", path.display());
            paths.push(path);
        }
    }
    Ok(paths)
}

fn check_axis(name: &str, v: &[f64]) -> Result<(), HarnessError> {
    if v.len() == 2 {
        return Err(HarnessError::Config(format!(
            "{name} has 2 points; use 1 for a fixed value or at least 3 for a scan"
        )));
    }
    Ok(())
}

/// Steady-state phase diagram over `eta_grid x fe_grid`.
pub fn cmd_sweep(cfg: &Config, out: &Path) -> Result<PathBuf, HarnessError> {
    let etas = axis(cfg, "eta", "eta_grid")?;
    let fes = axis(cfg, "f_e", "fe_grid")?;
    check_axis("eta_grid", &etas)?;
    check_axis("fe_grid", &fes)?;
    let l: usize = cfg.require("L")?;
    let half = (l / 2).max(1);
    let names = ["n_e", "n_d", "h", "zeta"];
    let omega = format!("omega_{half}");
    let corr = format!("corr_e_{half}");
    let mut csv = String::from("eta,f_e,L,n_traj");
    for n in names.iter().copied().chain([omega.as_str(), corr.as_str()]) {
        let _ = write!(csv, ",{n},{n}_err");
    }
    csv.push('\n');
    let start = Instant::now();
    for &f_e in &fes {
        for &eta in &etas {
            let mut c = cell(cfg, l, eta)?;
            c.set_value("f_e", f_e)?;
            if !c.contains("lengths") {
                c.set_value("lengths", half)?;
            }
            let p = c.sim_params()?;
            let stats = run_ensemble(&p, &c.schedule(&p)?, &c.observables(&p)?, &ensemble_config(&c, &p)?)?;
            let _ = write!(csv, "{eta},{f_e},{l},{}", stats.n_traj());
            for n in names.iter().copied().chain([omega.as_str(), corr.as_str()]) {
                let (m, e) = stats.steady(n).unwrap_or((f64::NAN, f64::NAN));
                let _ = write!(csv, ",{m},{e}");
            }
            csv.push('\n');
        }
    }
    let m = manifest("sweep", cfg, None, None, start.elapsed().as_secs_f64());
    write_with_manifest(out, &format!("sweep_L{l}.csv"), &csv, m)
}

/// Mean-field steady states on `eta_grid x fe_grid`.
pub fn cmd_meanfield(cfg: &Config, out: &Path) -> Result<PathBuf, HarnessError> {
    let etas = axis(cfg, "eta", "eta_grid")?;
    let fes = axis(cfg, "f_e", "fe_grid")?;
    let gamma: f64 = cfg.require("gamma")?;
    let csv = phase_diagram_csv(&phase_diagram(&etas, &fes, gamma), gamma);
    write_with_manifest(out, "meanfield.csv", &csv, manifest("meanfield", cfg, None, None, 0.0))
}

/// Generator spectra: zero-mode count, `lambda_0` and the slowest nonzero mode.
pub fn cmd_exact(cfg: &Config, out: &Path) -> Result<PathBuf, HarnessError> {
    let sector = match cfg.raw("sector").unwrap_or("even") {
        "even" => Sector::EvenParity,
        "full" => Sector::Full,
        s => return Err(HarnessError::Config(format!("unknown sector '{s}' (even|full)"))),
    };
    let mut csv = String::from("L,eta,f_e,dim,zero_modes,lambda0,lambda1_re,lambda1_im,gap\n");
    let start = Instant::now();
    for l in sizes(cfg)? {
        for eta in axis(cfg, "eta", "eta_grid")? {
            let p = cell(cfg, l, eta)?.sim_params()?;
            let m = build_generator(&p, sector)?;
            let s = spectrum(&m, 0)?;
            let tol = 1e-9 * m.max_exit_rate().max(1.0);
            let l1 = s.first_nonzero(tol);
            let _ = writeln!(
                csv,
                "{l},{eta},{},{},{},{},{},{},{}",
                p.f_e,
                m.dim(),
                s.zero_modes(tol),
                s.values[0].re,
                l1.map_or(f64::NAN, |z| z.re),
                l1.map_or(f64::NAN, |z| z.im),
                s.gap(tol).unwrap_or(f64::NAN)
            );
        }
    }
    let m = manifest("exact", cfg, None, None, start.elapsed().as_secs_f64());
    write_with_manifest(out, "spectrum.csv", &csv, m)
}

/// Summary of one chiral cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiralSummary {
    pub mu: f64,
    pub n_d_bulk: (f64, f64),
    pub n_d_edge: (f64, f64),
    pub xi: Estimate,
    /// `Omega_{1,L-1}` is exactly one at every sample.
    pub omega1_pinned: bool,
    pub mf_bulk: f64,
    pub mf_edge: f64,
    pub mf_xi: f64,
}

/// Mean and stderr of several steady columns averaged together.
fn steady_avg(stats: &EnsembleStats, cols: &[String]) -> (f64, f64) {
    let v: Vec<(f64, f64)> = cols.iter().filter_map(|c| stats.steady(c)).collect();
    let n = v.len() as f64;
    let m = v.iter().map(|x| x.0).sum::<f64>() / n;
    // Columns from the same trajectories are correlated; the mean error is a safe bound.
    let e = v.iter().map(|x| x.1).sum::<f64>() / n;
    (m, e)
}

/// Steady profile and string-order decay of one chiral ensemble.
pub fn chiral_summary(stats: &EnsembleStats, p: &SimParams) -> Result<ChiralSummary, HarnessError> {
    let l = p.l;
    let bulk: Vec<String> = (l / 4..3 * l / 4).map(|i| format!("profile_{i}")).collect();
    let edge = vec!["profile_1".to_string(), format!("profile_{}", l - 2)];
    let omega1_pinned = stats
        .series("omega_c_1")
        .is_some_and(|(m, s)| m.iter().all(|&x| x == 1.0) && s.iter().all(|&x| x == 0.0));
    // k = 1 is pinned to 1 by the conserved boundary parity and is left out;
    // the decay length comes from k >= 2 with a free amplitude.
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for k in 2..=l / 2 {
        let Some((m, e)) = stats.steady(&format!("omega_c_{k}")) else { break };
        if m <= 3.0 * e {
            break;
        }
        x.push((k - 1) as f64);
        y.push(m);
        w.push(e);
    }
    let xi = match fit_decay(DecayModel::Exp, &x, &y, Some(&w)) {
        Ok(f) => Estimate::new(f.scale(), f.scale_err()),
        // Two points determine the decay exactly.
        Err(_) if y.len() == 2 && y[1] > 0.0 => Estimate::new(-1.0 / (y[1] / y[0]).ln(), f64::NAN),
        Err(e) => return Err(e.into()),
    };
    let mf = mf_chiral(p.eta, p.gamma, p.mu);
    Ok(ChiralSummary {
        mu: p.mu,
        n_d_bulk: steady_avg(stats, &bulk),
        n_d_edge: steady_avg(stats, &edge),
        xi,
        omega1_pinned,
        mf_bulk: mf.n_d_bulk,
        mf_edge: mf.n_d_edge,
        mf_xi: mf.xi,
    })
}

/// Chiral-drift ensembles over `mu_grid`, plus a summary CSV.
pub fn cmd_chiral(cfg: &Config, out: &Path) -> Result<(PathBuf, Vec<ChiralSummary>), HarnessError> {
    let mut base = cfg.clone();
    base.set_value("boundary", "chiral")?;
    let l: usize = base.require("L")?;
    let eta: f64 = base.require("eta")?;
    let mut rows = Vec::new();
    let mut csv = String::from(
        "mu,n_d_bulk,n_d_bulk_err,mf_bulk,n_d_edge,n_d_edge_err,mf_edge,xi,xi_err,mf_xi,omega1_pinned\n",
    );
    let start = Instant::now();
    for mu in axis(&base, "mu", "mu_grid")? {
        let mut c = cell(&base, l, eta)?;
        c.set_value("mu", mu)?;
        let (_, stats) = run_cell(&c, out)?;
        let s = chiral_summary(&stats, &c.sim_params()?)?;
        let _ = writeln!(
            csv,
            "{mu},{},{},{},{},{},{},{},{},{},{}",
            s.n_d_bulk.0, s.n_d_bulk.1, s.mf_bulk, s.n_d_edge.0, s.n_d_edge.1, s.mf_edge, s.xi.value, s.xi.err,
            s.mf_xi, s.omega1_pinned
        );
        rows.push(s);
    }
    let m = manifest("chiral", &base, None, None, start.elapsed().as_secs_f64());
    Ok((write_with_manifest(out, &format!("chiral_summary_L{l}.csv"), &csv, m)?, rows))
}

/// Curves of one observable grouped by lattice size.
struct Family {
    l: usize,
    curves: Vec<(f64, Curve)>,
}

fn transform(name: &str) -> Result<fn(f64) -> f64, HarnessError> {
    match name {
        "identity" => Ok(|x| x),
        "one-minus" => Ok(|x| 1.0 - x),
        "half-minus" => Ok(|x| 0.5 - x),
        _ => Err(HarnessError::Config(format!("unknown transform '{name}' (identity|one-minus|half-minus)"))),
    }
}

struct AnalyzeOptions {
    b: f64,
    decades: f64,
    eta_c: Option<f64>,
    delta: Option<f64>,
    nu_range: (f64, f64),
    z_range: (f64, f64),
}

/// Point estimates for one realization of the data.
#[derive(Default)]
struct Point {
    eta_c: Option<(f64, f64)>,
    delta: Option<(f64, f64)>,
    nu: Option<(f64, f64)>,
    z: Option<(f64, f64)>,
    window: Option<(f64, f64)>,
}

fn analyze_once(families: &[Family], o: &AnalyzeOptions) -> Result<Point, HarnessError> {
    let mut pt = Point::default();
    let main = families.last().ok_or(HarnessError::Config("no ensembles".into()))?;
    // The collapse is anchored at the interpolated slope zero when one exists.
    let (eta_c, delta, anchor) = match (o.eta_c, o.delta) {
        (Some(e), Some(d)) => (e, d, (e, d)),
        _ => {
            let est = find_critical(&main.curves, o.b, o.decades)?;
            pt.eta_c = Some((est.eta_c, est.eta_c_err));
            pt.delta = Some((est.delta, est.delta_err));
            pt.window = est.slopes.first().map(|s| s.window);
            let e = o.eta_c.unwrap_or(est.eta_c);
            let d = o.delta.unwrap_or(est.delta);
            let anchor = match (o.eta_c, est.eta_c_interpolated, est.delta_interpolated) {
                (None, Some(ei), Some(di)) => (ei, o.delta.unwrap_or(di)),
                _ => (e, d),
            };
            (e, d, anchor)
        }
    };
    let off: Vec<OffCriticalCurve> = main
        .curves
        .iter()
        .filter(|(e, _)| (e - anchor.0).abs() > 1e-9)
        .map(|(eta, c)| OffCriticalCurve { eta: *eta, curve: c.clone() })
        .collect();
    if off.len() >= 2 {
        if let Ok(f) = optimize_collapse(&off, anchor.0, anchor.1, o.nu_range) {
            pt.nu = Some((f.exponent, f.cost));
        }
    }
    let at_c: Vec<SizeCurve> = families
        .iter()
        .filter_map(|f| {
            f.curves.iter().find(|(e, _)| (e - eta_c).abs() <= 1e-9).map(|(_, c)| SizeCurve { l: f.l, curve: c.clone() })
        })
        .collect();
    if at_c.len() >= 3 {
        if let Ok(f) = optimize_fss(&at_c, delta, o.z_range) {
            pt.z = Some((f.exponent, f.cost));
        }
    }
    Ok(pt)
}

fn spread(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Critical point, `delta`, `nu_t` and `z` from a directory of ensemble files.
/// Uncertainties combine the method error with a parametric bootstrap over
/// the stored error bars.
pub fn analyze_tables(tables: &[EnsembleTable], cfg: &Config) -> Result<ScalingFit, HarnessError> {
    let observable = cfg.raw("observable").unwrap_or("n_e").to_string();
    let f = transform(cfg.raw("transform").unwrap_or("one-minus"))?;
    let o = AnalyzeOptions {
        b: cfg.get_or("b", 10.0)?,
        decades: cfg.get_or("decades", 1.0)?,
        eta_c: cfg.get("eta_c")?,
        delta: cfg.get("delta")?,
        nu_range: cfg.range("nu_range", (1.0, 2.5))?,
        z_range: cfg.range("z_range", (1.0, 2.5))?,
    };
    let resamples: usize = cfg.get_or("bootstrap", 200)?;
    let seed: u64 = cfg.get_or("seed", 1)?;
    let mut ls: Vec<usize> = tables.iter().map(EnsembleTable::l).collect();
    ls.sort_unstable();
    ls.dedup();
    let mut families = Vec::new();
    for &l in &ls {
        let mut curves: Vec<(f64, Curve)> = tables
            .iter()
            .filter(|t| t.l() == l)
            .map(|t| {
                t.curve(&observable, f)
                    .map(|c| (t.eta(), c))
                    .ok_or_else(|| HarnessError::Config(format!("observable '{observable}' not in ensemble")))
            })
            .collect::<Result<_, _>>()?;
        curves.sort_by(|a, b| a.0.total_cmp(&b.0));
        families.push(Family { l, curves });
    }
    let base = analyze_once(&families, &o)?;
    // Resampled realizations; each draws every point from its error bar.
    let mut draws: Vec<Point> = Vec::new();
    for r in 0..resamples as u64 {
        let fam: Vec<Family> = families
            .iter()
            .enumerate()
            .map(|(i, fa)| Family {
                l: fa.l,
                curves: fa
                    .curves
                    .iter()
                    .enumerate()
                    .map(|(j, (e, c))| (*e, parametric_resample(c, seed, (r << 20) | ((i as u64) << 10) | j as u64)))
                    .collect(),
            })
            .collect();
        if let Ok(p) = analyze_once(&fam, &o) {
            draws.push(p);
        }
    }
    let boot = |g: fn(&Point) -> Option<(f64, f64)>| spread(&draws.iter().filter_map(|p| g(p).map(|x| x.0)).collect::<Vec<_>>());
    let combine = |a: f64, b: f64| if b.is_finite() { (a * a + b * b).sqrt() } else { a };
    let mut fit = ScalingFit::default();
    if let Some((v, e)) = base.eta_c {
        fit.eta_c = Some(Estimate::new(v, combine(e, boot(|p| p.eta_c))));
    }
    if let Some((v, e)) = base.delta {
        fit.delta = Some(Estimate::new(v, combine(e, boot(|p| p.delta))));
    }
    // The collapse optimum carries no intrinsic error; use the bootstrap spread
    // and never less than the golden-section tolerance.
    if let Some((v, cost)) = base.nu {
        fit.nu_t = Some(Estimate::new(v, boot(|p| p.nu).max(1e-6)));
        fit.diagnostics.push(("nu_collapse_cost".into(), cost));
    }
    if let Some((v, cost)) = base.z {
        fit.z = Some(Estimate::new(v, boot(|p| p.z).max(1e-6)));
        fit.diagnostics.push(("z_collapse_cost".into(), cost));
    }
    if let Some((a, b)) = base.window {
        fit.diagnostics.push(("window_t_min".into(), a));
        fit.diagnostics.push(("window_t_max".into(), b));
    }
    fit.diagnostics.push(("bootstrap_ok".into(), draws.len() as f64));
    fit.diagnostics.push(("bootstrap_total".into(), resamples as f64));
    Ok(fit)
}

/// Writes `scaling_fit.json` and its manifest.
pub fn cmd_analyze(cfg: &Config, out: &Path) -> Result<(PathBuf, ScalingFit), HarnessError> {
    let input: String = cfg.require("input")?;
    let tables = load_ensembles(Path::new(&input), cfg.flag("force")?)?;
    let start = Instant::now();
    let fit = analyze_tables(&tables, cfg)?;
    let json = serde_json::to_string_pretty(&fit)? + "\n";
    let m = manifest("analyze", cfg, None, None, start.elapsed().as_secs_f64());
    Ok((write_with_manifest(out, "scaling_fit.json", &json, m)?, fit))
}
