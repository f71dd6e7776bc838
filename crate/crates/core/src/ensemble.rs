//! Deterministic parallel trajectory ensembles.
//!
//! Trajectory `k` always uses `RngStream::new(master_seed, k)`. Trajectories
//! are grouped into fixed-size chunks; each chunk is reduced sequentially and
//! the chunk partials are merged in chunk order, so every floating-point sum
//! is evaluated in the same order whatever the worker count.

use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::ParamError;
use crate::kernel::{run_chiral, run_trajectory, Schedule};
use crate::observables::{ObservableSet, TimeSeries};
use crate::params::{Boundary, SimParams};
use crate::rng::RngStream;

/// Runs one trajectory of either kernel with stream `k`.
pub fn simulate(
    params: &SimParams,
    k: u64,
    schedule: &Schedule,
    obs: &ObservableSet,
) -> Result<TimeSeries, ParamError> {
    let mut rng = RngStream::new(params.master_seed, k);
    match params.boundary {
        Boundary::Periodic => run_trajectory(params, &mut rng, schedule, obs),
        Boundary::ChiralOpen => run_chiral(params, &mut rng, schedule, obs),
    }
}

/// Maps `f` over consecutive chunks of `range` on a pool of `threads`
/// workers and returns the results in chunk order.
pub fn map_chunks<T, F>(range: Range<u64>, chunk: u64, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks: Vec<Range<u64>> = (range.start..range.end)
        .step_by(chunk as usize)
        .map(|a| a..(a + chunk).min(range.end))
        .collect();
    let run = || chunks.clone().into_par_iter().map(&f).collect::<Vec<T>>();
    match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => chunks.into_iter().map(&f).collect(),
    }
}

/// Running count, mean and sum of squared deviations for a block of values.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Moments {
    pub fn new(width: usize) -> Self {
        Moments { n: 0, mean: vec![0.0; width], m2: vec![0.0; width] }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Pairwise merge; `self` is taken to precede `other`.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    /// Standard error of the mean, `sd / sqrt(n)` with the `n - 1` variance.
    pub fn stderr(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub threads: usize,
    /// Trajectories per work unit.
    pub chunk: u64,
    /// First trajectory index; trajectories `first..first + n_traj` are run.
    pub first: u64,
    /// Also average each trajectory over samples at sweeps `>= steady_from`.
    pub steady_from: Option<u64>,
    /// Columns whose per-trajectory series are kept for resampling.
    pub keep: Vec<String>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { threads: 1, chunk: 16, first: 0, steady_from: None, keep: vec![] }
    }
}

impl EnsembleConfig {
    pub fn threads(mut self, n: usize) -> Self {
        self.threads = n;
        self
    }

    pub fn steady_from(mut self, sweep: u64) -> Self {
        self.steady_from = Some(sweep);
        self
    }

    pub fn keep(mut self, cols: &[&str]) -> Self {
        self.keep = cols.iter().map(|s| s.to_string()).collect();
        self
    }
}

/// Trajectory-averaged observables.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    columns: Arc<Vec<String>>,
    sweeps: Vec<u64>,
    times: Vec<f64>,
    /// One entry per sample time, each over all columns.
    series: Vec<Moments>,
    steady: Option<Moments>,
    /// `kept[c][k][t]` for the `c`-th kept column and trajectory `k`.
    kept: Vec<(String, Vec<Vec<f64>>)>,
}

struct Partial {
    series: Vec<Moments>,
    steady: Option<Moments>,
    kept: Vec<Vec<Vec<f64>>>,
    template: Option<TimeSeries>,
}

impl EnsembleStats {
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn sweeps(&self) -> &[u64] {
        &self.sweeps
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_traj(&self) -> u64 {
        self.series.first().map_or(0, |m| m.n)
    }

    pub fn moments(&self) -> &[Moments] {
        &self.series
    }

    /// `(mean, stderr)` of column `name` at every sample time.
    pub fn series(&self, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let c = self.column_index(name)?;
        let mean = self.series.iter().map(|m| m.mean[c]).collect();
        let se = self.series.iter().map(|m| m.stderr()[c]).collect();
        Some((mean, se))
    }

    pub fn mean(&self, name: &str) -> Option<Vec<f64>> {
        self.series(name).map(|s| s.0)
    }

    pub fn final_value(&self, name: &str) -> Option<(f64, f64)> {
        let (m, s) = self.series(name)?;
        Some((*m.last()?, *s.last()?))
    }

    /// Steady-window `(mean, stderr)`; the error treats each trajectory's
    /// time average as one independent sample.
    pub fn steady(&self, name: &str) -> Option<(f64, f64)> {
        let c = self.column_index(name)?;
        let m = self.steady.as_ref()?;
        Some((m.mean[c], m.stderr()[c]))
    }

    pub fn steady_moments(&self) -> Option<&Moments> {
        self.steady.as_ref()
    }

    /// Per-trajectory series of a kept column.
    pub fn kept(&self, name: &str) -> Option<&[Vec<f64>]> {
        self.kept.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Runs `params.n_traj` trajectories and reduces them deterministically.
pub fn run_ensemble(
    params: &SimParams,
    schedule: &Schedule,
    obs: &ObservableSet,
    cfg: &EnsembleConfig,
) -> Result<EnsembleStats, ParamError> {
    params.validate()?;
    let columns = obs.columns(params);
    let width = columns.len();
    let keep_idx: Vec<usize> = cfg
        .keep
        .iter()
        .filter_map(|k| columns.iter().position(|c| c == k))
        .collect();
    let range = cfg.first..cfg.first + params.n_traj;
    let partials = map_chunks(range, cfg.chunk, cfg.threads, |r| -> Result<Partial, ParamError> {
        let mut p = Partial {
            series: vec![Moments::new(width); schedule.len()],
            steady: cfg.steady_from.map(|_| Moments::new(width)),
            kept: vec![vec![]; keep_idx.len()],
            template: None,
        };
        let mut avg = vec![0.0; width];
        for k in r {
            let ts = simulate(params, k, schedule, obs)?;
            for (i, m) in p.series.iter_mut().enumerate() {
                m.push(ts.row(i));
            }
            if let (Some(from), Some(st)) = (cfg.steady_from, p.steady.as_mut()) {
                avg.iter_mut().for_each(|a| *a = 0.0);
                let mut n = 0usize;
                for i in (0..ts.len()).filter(|&i| ts.sweeps()[i] >= from) {
                    avg.iter_mut().zip(ts.row(i)).for_each(|(a, v)| *a += v);
                    n += 1;
                }
                if n > 0 {
                    avg.iter_mut().for_each(|a| *a /= n as f64);
                    st.push(&avg);
                }
            }
            for (slot, &c) in p.kept.iter_mut().zip(&keep_idx) {
                slot.push((0..ts.len()).map(|i| ts.row(i)[c]).collect());
            }
            if p.template.is_none() {
                p.template = Some(ts);
            }
        }
        Ok(p)
    });

    let mut series = vec![Moments::new(width); schedule.len()];
    let mut steady = cfg.steady_from.map(|_| Moments::new(width));
    let mut kept: Vec<(String, Vec<Vec<f64>>)> =
        keep_idx.iter().map(|&c| (columns[c].clone(), vec![])).collect();
    let mut template = None;
    for p in partials {
        let p = p?;
        for (a, b) in series.iter_mut().zip(&p.series) {
            a.merge(b);
        }
        if let (Some(a), Some(b)) = (steady.as_mut(), p.steady.as_ref()) {
            a.merge(b);
        }
        for (slot, v) in kept.iter_mut().zip(p.kept) {
            slot.1.extend(v);
        }
        if template.is_none() {
            template = p.template;
        }
    }
    let (sweeps, times) = match template {
        Some(t) => (t.sweeps().to_vec(), t.times().to_vec()),
        None => {
            let dt = params.sweep_dt();
            let s = schedule.sweeps().to_vec();
            let t = s.iter().map(|&x| x as f64 * dt).collect();
            (s, t)
        }
    };
    Ok(EnsembleStats { columns: Arc::new(columns), sweeps, times, series, steady, kept })
}
