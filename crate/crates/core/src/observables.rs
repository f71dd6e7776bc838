//! Measured quantities and per-trajectory time series.

use std::sync::Arc;

use crate::error::ObservableError;
use crate::params::{Boundary, SimParams};
use crate::state::SublatticeState;

/// Snapshot of every observable at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub n_e: f64,
    pub n_d: f64,
    pub omega: Vec<(usize, f64)>,
    pub h: f64,
    pub zeta: f64,
    pub corr_e: Vec<(usize, f64)>,
    pub profile: Option<Vec<f64>>,
}

/// `parity[k]` is the parity of `d[0..k)`, `k = 0..=L`.
fn prefix_parity(s: &SublatticeState) -> Vec<bool> {
    let l = s.l();
    let mut p = Vec::with_capacity(l + 1);
    let mut acc = false;
    p.push(false);
    for k in 0..l {
        acc ^= s.d.get(k);
        p.push(acc);
    }
    p
}

fn window_sum(prefix: &[bool], l: usize, w: usize) -> f64 {
    let total = prefix[l];
    let mut sum = 0i64;
    for i in 0..l {
        let j = i + w;
        let odd = if j <= l { prefix[j] ^ prefix[i] } else { total ^ prefix[i] ^ prefix[j - l] };
        sum += if odd { -1 } else { 1 };
    }
    sum as f64 / l as f64
}

/// Spatially averaged string order `(1/L) sum_i prod_{k=i}^{i+l-1} (1 - 2 d[k mod L])`.
pub fn string_order(s: &SublatticeState, l: usize) -> Result<f64, ObservableError> {
    let len = s.l();
    if l == 0 || l > len {
        return Err(ObservableError::BadLength { l, len });
    }
    Ok(window_sum(&prefix_parity(s), len, l))
}

/// Density of defects with no erasure flag on either neighbouring qubit.
pub fn unheralded_density(s: &SublatticeState) -> f64 {
    let l = s.l();
    let mut n = 0usize;
    for m in 0..l {
        let right = if m + 1 == l { 0 } else { m + 1 };
        if s.d.get(m) && !s.e.get(m) && !s.e.get(right) {
            n += 1;
        }
    }
    n as f64 / l as f64
}

/// `(1/L) sum_i (1 - e[i]) (1 - e[(i + l) mod L])`.
pub fn erasure_correlator(s: &SublatticeState, l: usize) -> f64 {
    let len = s.l();
    let mut n = 0usize;
    for i in 0..len {
        if !s.e.get(i) && !s.e.get((i + l) % len) {
            n += 1;
        }
    }
    n as f64 / len as f64
}

pub fn ring_distance(a: usize, b: usize, l: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(l - d)
}

/// Largest pair separation in a minimum-weight perfect matching of the defects
/// on the ring.
///
/// Every minimum-weight matching of distinct points on a cycle pairs cyclic
/// neighbours (uncrossing and unnesting both strictly lower the weight), so
/// only the two alternating pairings of the sorted positions compete. On a tie
/// the pairing `(p0,p1),(p2,p3),...` is lexicographically first and wins.
pub fn zeta(s: &SublatticeState) -> Result<usize, ObservableError> {
    let pos = s.d.ones_positions();
    zeta_of_positions(&pos, s.l())
}

pub fn zeta_of_positions(pos: &[usize], l: usize) -> Result<usize, ObservableError> {
    let k = pos.len();
    if k % 2 == 1 {
        return Err(ObservableError::OddDefects(k));
    }
    if k == 0 {
        return Ok(0);
    }
    let (mut wa, mut ma, mut wb, mut mb) = (0usize, 0usize, 0usize, 0usize);
    for i in (0..k).step_by(2) {
        let da = ring_distance(pos[i], pos[i + 1], l);
        let db = ring_distance(pos[i + 1], pos[(i + 2) % k], l);
        wa += da;
        ma = ma.max(da);
        wb += db;
        mb = mb.max(db);
    }
    Ok(if wa <= wb { ma } else { mb })
}

/// Centered string `prod_{i=k}^{L-k} (1 - 2 d[i])` on the open chain, `1 <= k <= L/2`.
pub fn centered_string(s: &SublatticeState, k: usize) -> f64 {
    let l = s.l();
    assert!(k >= 1 && 2 * k <= l);
    let mut odd = false;
    for i in k..=l - k {
        odd ^= s.d.get(i);
    }
    if odd {
        -1.0
    } else {
        1.0
    }
}

/// Powers of two below `L/2`, then `L/2` and `L`.
pub fn geometric_lengths(l: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut w = 1;
    while w < l / 2 {
        out.push(w);
        w *= 2;
    }
    out.push((l / 2).max(1));
    out.push(l);
    out.dedup();
    out
}

/// Which observables a run records.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSet {
    pub omega_lengths: Vec<usize>,
    pub corr_lengths: Vec<usize>,
    pub zeta: bool,
    /// Chiral chain: record the per-site defect profile.
    pub profile: bool,
}

impl ObservableSet {
    /// Densities, `h`, `zeta`, and string order / erasure correlator on the
    /// geometric length grid.
    pub fn standard(l: usize) -> Self {
        let ls = geometric_lengths(l);
        ObservableSet { omega_lengths: ls.clone(), corr_lengths: ls, zeta: true, profile: true }
    }

    /// Densities and `h` only.
    pub fn densities() -> Self {
        ObservableSet { omega_lengths: vec![], corr_lengths: vec![], zeta: false, profile: false }
    }

    /// Every length `1..=L` for both string order and correlator.
    pub fn all_lengths(l: usize) -> Self {
        let ls: Vec<usize> = (1..=l).collect();
        ObservableSet { omega_lengths: ls.clone(), corr_lengths: ls, zeta: false, profile: false }
    }

    pub fn with_lengths(mut self, ls: Vec<usize>) -> Self {
        self.omega_lengths = ls.clone();
        self.corr_lengths = ls;
        self
    }

    pub fn with_zeta(mut self, on: bool) -> Self {
        self.zeta = on;
        self
    }

    /// Column names of the flat sample row.
    ///
    /// Periodic: `n_e, n_d, h, [zeta], omega_<l>..., corr_e_<l>...`.
    /// Chiral: `n_d, omega_c_<k>` for `k = 1..=L/2`, then `profile_<i>` if enabled.
    pub fn columns(&self, p: &SimParams) -> Vec<String> {
        let mut c = Vec::new();
        match p.boundary {
            Boundary::Periodic => {
                c.extend(["n_e", "n_d", "h"].map(String::from));
                if self.zeta {
                    c.push("zeta".into());
                }
                c.extend(self.omega_lengths.iter().map(|l| format!("omega_{l}")));
                c.extend(self.corr_lengths.iter().map(|l| format!("corr_e_{l}")));
            }
            Boundary::ChiralOpen => {
                c.push("n_d".into());
                c.extend((1..=p.l / 2).map(|k| format!("omega_c_{k}")));
                if self.profile {
                    c.extend((0..p.l).map(|i| format!("profile_{i}")));
                }
            }
        }
        c
    }

    /// Appends the row described by [`ObservableSet::columns`].
    pub fn measure(&self, s: &SublatticeState, boundary: Boundary, out: &mut Vec<f64>) {
        let l = s.l();
        match boundary {
            Boundary::Periodic => {
                out.push(s.erasure_count() as f64 / l as f64);
                out.push(s.defect_count() as f64 / l as f64);
                out.push(unheralded_density(s));
                if self.zeta {
                    // Parity is conserved by every event, so the count stays even.
                    out.push(zeta(s).expect("even defect parity") as f64);
                }
                if !self.omega_lengths.is_empty() {
                    let prefix = prefix_parity(s);
                    out.extend(self.omega_lengths.iter().map(|&w| window_sum(&prefix, l, w)));
                }
                out.extend(self.corr_lengths.iter().map(|&w| erasure_correlator(s, w)));
            }
            Boundary::ChiralOpen => {
                // Dynamic cells are 1..=L-2; the density excludes the sealed ends.
                out.push(s.defect_count() as f64 / (l - 2) as f64);
                let prefix = prefix_parity(s);
                for k in 1..=l / 2 {
                    let odd = prefix[l - k + 1] ^ prefix[k];
                    out.push(if odd { -1.0 } else { 1.0 });
                }
                if self.profile {
                    out.extend(s.d.iter().map(|b| if b { 1.0 } else { 0.0 }));
                }
            }
        }
    }

    /// Structured form of one measurement on the periodic ring.
    pub fn sample(&self, s: &SublatticeState) -> Sample {
        let l = s.l();
        let prefix = prefix_parity(s);
        Sample {
            time: s.time,
            n_e: s.erasure_count() as f64 / l as f64,
            n_d: s.defect_count() as f64 / l as f64,
            omega: self.omega_lengths.iter().map(|&w| (w, window_sum(&prefix, l, w))).collect(),
            h: unheralded_density(s),
            zeta: if self.zeta { zeta(s).map(|z| z as f64).unwrap_or(f64::NAN) } else { f64::NAN },
            corr_e: self.corr_lengths.iter().map(|&w| (w, erasure_correlator(s, w))).collect(),
            profile: None,
        }
    }
}

/// Observable rows of a single trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    columns: Arc<Vec<String>>,
    sweeps: Vec<u64>,
    times: Vec<f64>,
    rows: Vec<f64>,
}

impl TimeSeries {
    pub fn new(columns: Vec<String>) -> Self {
        TimeSeries { columns: Arc::new(columns), sweeps: vec![], times: vec![], rows: vec![] }
    }

    pub fn push(&mut self, sweep: u64, time: f64, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len());
        self.sweeps.push(sweep);
        self.times.push(time);
        self.rows.extend_from_slice(row);
    }

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

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.rows[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column_index(name)?;
        Some((0..self.len()).map(|i| self.row(i)[c]).collect())
    }
}
