//! Ensemble CSV files and run manifests.
//!
//! An ensemble file starts with `# key=value` header lines (format tag,
//! config digest, parameters, column schema) followed by a long-format
//! table `time,sweep,observable,mean,stderr,n_traj`. Each output file `F`
//! has a sibling `F.manifest.json` holding its SHA-256 digest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::EnsembleStats;
use crate::error::HarnessError;
use crate::params::SimParams;
use crate::scaling::Curve;

pub const FORMAT: &str = "herald-ensemble-1";
pub const SCHEMA: &str = "time,sweep,observable,mean,stderr,n_traj";

/// One `(eta, L)` cell: every recorded observable at every sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleTable {
    pub meta: BTreeMap<String, String>,
    pub sweeps: Vec<u64>,
    pub times: Vec<f64>,
    pub observables: Vec<String>,
    /// `mean[o][i]` for observable `o` at sample `i`.
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub n_traj: u64,
}

fn input_err(path: &Path, msg: impl Into<String>) -> HarnessError {
    HarnessError::Input { path: path.display().to_string(), msg: msg.into() }
}

impl EnsembleTable {
    pub fn from_stats(stats: &EnsembleStats, p: &SimParams, first_traj: u64, config_digest: &str) -> Self {
        let mut meta = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            meta.insert(k.to_string(), v);
        };
        put("format", FORMAT.into());
        put("config_sha256", config_digest.into());
        put("L", p.l.to_string());
        put("eta", p.eta.to_string());
        put("gamma", p.gamma.to_string());
        put("f_e", p.f_e.to_string());
        put("mu", p.mu.to_string());
        put("boundary", p.boundary.to_string());
        put("semantics", p.semantics.to_string());
        put("initial", p.initial.to_string());
        put("seed", p.master_seed.to_string());
        put("first_traj", first_traj.to_string());
        put("dt_per_sweep", p.sweep_dt().to_string());
        put("schema", SCHEMA.into());
        let observables: Vec<String> = stats.columns().to_vec();
        let (mean, stderr) = observables
            .iter()
            .map(|o| stats.series(o).unwrap_or_default())
            .unzip();
        EnsembleTable {
            meta,
            sweeps: stats.sweeps().to_vec(),
            times: stats.times().to_vec(),
            observables,
            mean,
            stderr,
            n_traj: stats.n_traj(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# format={FORMAT}\n");
        for (k, v) in self.meta.iter().filter(|(k, _)| *k != "format") {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "{SCHEMA}");
        for i in 0..self.times.len() {
            for (o, name) in self.observables.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    self.times[i], self.sweeps[i], name, self.mean[o][i], self.stderr[o][i], self.n_traj
                );
            }
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, HarnessError> {
        let mut meta = BTreeMap::new();
        let mut lines = text.lines().peekable();
        while let Some(l) = lines.peek() {
            let Some(h) = l.strip_prefix('#') else { break };
            if let Some((k, v)) = h.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            lines.next();
        }
        if meta.get("format").map(String::as_str) != Some(FORMAT) {
            return Err(input_err(path, format!("not a {FORMAT} file")));
        }
        if lines.next().map(str::trim) != Some(SCHEMA) {
            return Err(input_err(path, "missing column header"));
        }
        let mut t = EnsembleTable {
            meta,
            sweeps: vec![],
            times: vec![],
            observables: vec![],
            mean: vec![],
            stderr: vec![],
            n_traj: 0,
        };
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || input_err(path, format!("malformed row {}: '{line}'", ln + 1));
            if f.len() != 6 {
                return Err(bad());
            }
            let time: f64 = f[0].parse().map_err(|_| bad())?;
            let sweep: u64 = f[1].parse().map_err(|_| bad())?;
            let (mean, se): (f64, f64) = (f[3].parse().map_err(|_| bad())?, f[4].parse().map_err(|_| bad())?);
            t.n_traj = f[5].parse().map_err(|_| bad())?;
            if t.sweeps.last() != Some(&sweep) {
                if t.sweeps.last().is_some_and(|&s| s > sweep) {
                    return Err(input_err(path, "sweeps not increasing"));
                }
                t.sweeps.push(sweep);
                t.times.push(time);
            }
            let o = *index.entry(f[2].to_string()).or_insert_with(|| {
                t.observables.push(f[2].to_string());
                t.mean.push(vec![]);
                t.stderr.push(vec![]);
                t.observables.len() - 1
            });
            t.mean[o].push(mean);
            t.stderr[o].push(se);
        }
        if t.mean.iter().any(|m| m.len() != t.times.len()) {
            return Err(input_err(path, "observables have unequal lengths"));
        }
        Ok(t)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key)?.parse().ok()
    }

    pub fn eta(&self) -> f64 {
        self.meta_f64("eta").unwrap_or(f64::NAN)
    }

    pub fn l(&self) -> usize {
        self.meta.get("L").and_then(|v| v.parse().ok()).unwrap_or(0)
    }

    pub fn series(&self, name: &str) -> Option<(&[f64], &[f64])> {
        let o = self.observables.iter().position(|x| x == name)?;
        Some((&self.mean[o], &self.stderr[o]))
    }

    /// Positive-time samples of `name` with `f` applied to the mean.
    pub fn curve(&self, name: &str, f: impl Fn(f64) -> f64) -> Option<Curve> {
        let (m, s) = self.series(name)?;
        let k = self.times.iter().position(|&t| t > 0.0).unwrap_or(self.times.len());
        Some(Curve {
            t: self.times[k..].to_vec(),
            mean: m[k..].iter().map(|&x| f(x)).collect(),
            stderr: s[k..].to_vec(),
        })
    }

    /// Pools two tables over disjoint trajectory ranges of the same cell.
    pub fn merge(&self, other: &EnsembleTable) -> Result<EnsembleTable, HarnessError> {
        let same = |k: &str| self.meta.get(k) == other.meta.get(k);
        let keys = ["L", "eta", "gamma", "f_e", "mu", "boundary", "semantics", "initial", "seed"];
        if let Some(k) = keys.iter().find(|k| !same(k)) {
            return Err(HarnessError::Config(format!("cannot merge cells differing in {k}")));
        }
        if self.sweeps != other.sweeps || self.observables != other.observables {
            return Err(HarnessError::Config("cannot merge cells with different schedules or columns".into()));
        }
        let (na, nb) = (self.n_traj as f64, other.n_traj as f64);
        let n = na + nb;
        let mut out = self.clone();
        out.n_traj = self.n_traj + other.n_traj;
        let first = |t: &EnsembleTable| t.meta.get("first_traj").and_then(|v| v.parse::<u64>().ok()).unwrap_or(0);
        out.meta.insert("first_traj".into(), first(self).min(first(other)).to_string());
        for o in 0..self.observables.len() {
            for i in 0..self.times.len() {
                let (ma, mb) = (self.mean[o][i], other.mean[o][i]);
                let m2a = self.stderr[o][i].powi(2) * na * (na - 1.0);
                let m2b = other.stderr[o][i].powi(2) * nb * (nb - 1.0);
                let d = mb - ma;
                let m2 = m2a + m2b + d * d * na * nb / n;
                out.mean[o][i] = ma + d * nb / n;
                out.stderr[o][i] = if n > 1.0 { (m2 / (n - 1.0) / n).sqrt() } else { 0.0 };
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: String,
    pub config_sha256: String,
    pub params: Option<SimParams>,
    pub semantics: Option<String>,
    pub dt_convention: String,
    pub master_seed: Option<u64>,
    pub n_traj: Option<u64>,
    pub first_traj: Option<u64>,
    pub wall_time_s: f64,
    pub output: OutputDigest,
}

pub const DT_CONVENTION: &str =
    "one sweep = L elementary steps (ring) or L-3 steps (chain); dt per sweep = 1/(eta+4 gamma) (ring), 1/(eta+2 gamma) (chain)";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest_path(file: &Path) -> PathBuf {
    let mut s = file.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes `contents` to `dir/name` and its manifest; returns the data path.
pub fn write_with_manifest(
    dir: &Path,
    name: &str,
    contents: &str,
    mut manifest: RunManifest,
) -> Result<PathBuf, HarnessError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    manifest.output = OutputDigest { file: name.to_string(), sha256: sha256_hex(contents.as_bytes()) };
    fs::write(manifest_path(&path), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

/// Reads a data file after checking its manifest digest. With `force`, a
/// missing manifest is accepted but a mismatching one is not.
pub fn read_verified(path: &Path, force: bool) -> Result<String, HarnessError> {
    let text = fs::read_to_string(path)?;
    let mp = manifest_path(path);
    match fs::read_to_string(&mp) {
        Ok(m) => {
            let m: RunManifest = serde_json::from_str(&m)?;
            if m.output.sha256 != sha256_hex(text.as_bytes()) {
                return Err(input_err(path, "content does not match its manifest digest"));
            }
        }
        Err(_) if force => log::warn!("{}: no manifest, accepted because force = true", path.display()),
        Err(_) => return Err(input_err(path, "no manifest; set force = true to accept")),
    }
    Ok(text)
}

/// Every `*.csv` ensemble file in `dir`, sorted by name.
pub fn load_ensembles(dir: &Path, force: bool) -> Result<Vec<EnsembleTable>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| input_err(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = read_verified(&p, force)?;
        if !text.starts_with(&format!("# format={FORMAT}")) {
            continue;
        }
        out.push(EnsembleTable::parse(&text, &p)?);
    }
    if out.is_empty() {
        return Err(input_err(dir, "no ensemble files"));
    }
    Ok(out)
}
