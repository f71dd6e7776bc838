//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key must appear in
//! [`KEYS`]; unknown or repeated keys are errors. Physics parameters have no
//! defaults: `L`, `eta`, `gamma` and either `f_e` (ring) or `mu` (chiral
//! chain) must be given by a preset, the file, or `--set`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::HarnessError;
use crate::kernel::Schedule;
use crate::observables::{geometric_lengths, ObservableSet};
use crate::params::{default_sweeps, Boundary, InitialState, Semantics, SimParams};

/// Recognized keys with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("L", "sublattice length"),
    ("eta", "noise rate"),
    ("gamma", "correction rate"),
    ("f_e", "heralded fraction (ring only)"),
    ("mu", "chiral bias (chain only)"),
    ("boundary", "periodic | chiral"),
    ("semantics", "as-published | full-channel (default as-published)"),
    ("initial", "cluster | random-even-parity | all-erased (default cluster)"),
    ("sweeps", "run length in sweeps (default ceil(2 L^1.5))"),
    ("stride", "linear sampling stride; 0 samples ~per_decade points per decade (default 0)"),
    ("per_decade", "samples per decade for the geometric schedule (default 20)"),
    ("seed", "master seed (default 1)"),
    ("traj", "trajectory count (default 100)"),
    ("first_traj", "first trajectory index, for resuming a seed range (default 0)"),
    ("threads", "worker threads (default 1)"),
    ("chunk", "trajectories per work unit (default 16)"),
    ("lengths", "string-order lengths: geometric | all | comma list (default geometric)"),
    ("zeta", "record the matched-pair separation (default true)"),
    ("steady_from", "first sweep of the steady-state window (default sweeps / 2)"),
    ("eta_grid", "eta values: comma list or start:stop:n"),
    ("fe_grid", "f_e values: comma list or start:stop:n"),
    ("L_grid", "lattice sizes: comma list"),
    ("mu_grid", "chiral biases: comma list or start:stop:n"),
    ("sector", "exact generator sector: even | full (default even)"),
    ("input", "directory of ensemble CSVs to analyze"),
    ("observable", "column analyzed (default n_e)"),
    ("transform", "identity | one-minus | half-minus (default one-minus)"),
    ("b", "running-exponent ratio (default 10)"),
    ("decades", "late-time window in decades (default 1)"),
    ("eta_c", "critical point used for collapses; found from data when absent"),
    ("delta", "decay exponent used for collapses; found from data when absent"),
    ("nu_range", "collapse search bracket lo:hi (default 1.0:2.5)"),
    ("z_range", "size-collapse search bracket lo:hi (default 1.0:2.5)"),
    ("bootstrap", "bootstrap resamples (default 200)"),
    ("force", "accept ensemble files without a manifest (default false)"),
];

/// `quick` (desk-scale) and `full` (production-scale) presets.
pub fn preset(name: &str) -> Result<Config, HarnessError> {
    let text = match name {
        // About a minute per (eta, L) cell on one core.
        "quick" => "L = 128\ngamma = 1\ntraj = 1000\n",
        // Hours per cell; intended for multi-core machines.
        "full" => "L = 512\ngamma = 1\ntraj = 20000\n",
        _ => return Err(HarnessError::Config(format!("unknown preset '{name}' (quick|full)"))),
    };
    Config::parse(text)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn split_pair(line: &str) -> Result<(String, String), HarnessError> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("expected key = value, got '{line}'")))?;
    let (k, v) = (k.trim(), v.trim());
    if !known(k) {
        return Err(HarnessError::Config(format!("unknown key '{k}'")));
    }
    if v.is_empty() {
        return Err(HarnessError::Config(format!("empty value for '{k}'")));
    }
    Ok((k.to_string(), v.to_string()))
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, HarnessError> {
        let mut c = Config::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line)?;
            if c.entries.insert(k.clone(), v).is_some() {
                return Err(HarnessError::Config(format!("key '{k}' given twice")));
            }
        }
        Ok(c)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, kv: &str) -> Result<(), HarnessError> {
        let (k, v) = split_pair(kv)?;
        self.entries.insert(k, v);
        Ok(())
    }

    pub fn set_value(&mut self, key: &str, value: impl ToString) -> Result<(), HarnessError> {
        self.set(&format!("{key}={}", value.to_string()))
    }

    /// Entries of `other` override those of `self`.
    pub fn overlay(mut self, other: &Config) -> Config {
        self.entries.extend(other.entries.iter().map(|(k, v)| (k.clone(), v.clone())));
        self
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| HarnessError::Config(format!("cannot parse {key} = '{v}'"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, HarnessError> {
        self.get(key)?.ok_or_else(|| HarnessError::Config(format!("missing required key '{key}'")))
    }

    /// `key=value` lines in key order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// Float grid under `key`: `a,b,c` or `start:stop:n` (inclusive).
    pub fn grid(&self, key: &str) -> Result<Option<Vec<f64>>, HarnessError> {
        self.raw(key).map(|v| parse_grid(key, v)).transpose()
    }

    pub fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, HarnessError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse().map_err(|_| HarnessError::Config(format!("bad entry '{x}' in {key}"))))
                    .collect()
            })
            .transpose()
    }

    /// `lo:hi` bracket.
    pub fn range(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64), HarnessError> {
        let Some(v) = self.raw(key) else { return Ok(default) };
        let bad = || HarnessError::Config(format!("{key} must be lo:hi with lo < hi, got '{v}'"));
        let (a, b) = v.split_once(':').ok_or_else(bad)?;
        let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        Ok((a, b))
    }

    pub fn boundary(&self) -> Result<Boundary, HarnessError> {
        self.raw("boundary").map_or(Ok(Boundary::Periodic), |v| v.parse().map_err(HarnessError::Config))
    }

    /// Simulation parameters; grids are ignored, so scalar `L` and `eta` must be present.
    pub fn sim_params(&self) -> Result<SimParams, HarnessError> {
        let l: usize = self.require("L")?;
        let eta: f64 = self.require("eta")?;
        let gamma: f64 = self.require("gamma")?;
        let mut p = match self.boundary()? {
            Boundary::Periodic => {
                if self.contains("mu") {
                    return Err(HarnessError::Config("mu applies only to boundary = chiral".into()));
                }
                SimParams::periodic(l, eta, gamma, self.require("f_e")?)
            }
            Boundary::ChiralOpen => {
                if self.contains("f_e") {
                    return Err(HarnessError::Config("f_e applies only to boundary = periodic".into()));
                }
                SimParams::chiral(l, eta, gamma, self.require("mu")?)
            }
        };
        if let Some(s) = self.raw("semantics") {
            p.semantics = s.parse::<Semantics>().map_err(HarnessError::Config)?;
        }
        if let Some(s) = self.raw("initial") {
            p.initial = s.parse::<InitialState>().map_err(HarnessError::Config)?;
        }
        p.t_max_sweeps = self.get_or("sweeps", default_sweeps(l))?;
        p.measure_stride = self.get_or("stride", 0)?;
        p.master_seed = self.get_or("seed", 1)?;
        p.n_traj = self.get_or("traj", 100)?;
        p.validate()?;
        Ok(p)
    }

    pub fn schedule(&self, p: &SimParams) -> Result<Schedule, HarnessError> {
        let per_decade: u32 = self.get_or("per_decade", 20)?;
        Ok(if p.measure_stride > 0 {
            Schedule::linear(p.t_max_sweeps, p.measure_stride)
        } else {
            Schedule::geometric(p.t_max_sweeps, per_decade)
        })
    }

    pub fn observables(&self, p: &SimParams) -> Result<ObservableSet, HarnessError> {
        let lengths = match self.raw("lengths").unwrap_or("geometric") {
            "geometric" => geometric_lengths(p.l),
            "all" => (1..=p.l).collect(),
            _ => self.usize_list("lengths")?.unwrap_or_default(),
        };
        if let Some(bad) = lengths.iter().find(|&&w| w == 0 || w > p.l) {
            return Err(HarnessError::Config(format!("length {bad} outside [1, {}]", p.l)));
        }
        let zeta = parse_bool("zeta", self.raw("zeta").unwrap_or("true"))?;
        Ok(ObservableSet::standard(p.l).with_lengths(lengths).with_zeta(zeta))
    }

    pub fn flag(&self, key: &str) -> Result<bool, HarnessError> {
        parse_bool(key, self.raw(key).unwrap_or("false"))
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, HarnessError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Config(format!("{key} must be true or false, got '{v}'"))),
    }
}

fn round_sig(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = || HarnessError::Config(format!("bad grid {key} = '{v}'"));
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    let g: Vec<f64> = match parts.as_slice() {
        [a, b, n] => {
            let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
            let n: usize = n.parse().map_err(|_| bad())?;
            match n {
                0 => return Err(bad()),
                1 => vec![a],
                // Rounded to 12 significant digits so that 0.5:0.7:5 yields 0.65, not 0.6499999999999999.
                _ => (0..n).map(|i| round_sig(a + (b - a) * i as f64 / (n - 1) as f64)).collect(),
            }
        }
        [_] => v.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if g.iter().any(|x| !x.is_finite()) {
        return Err(bad());
    }
    Ok(g)
}
