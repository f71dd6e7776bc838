//! Exact classical generator over the configuration space of a small chain.
//!
//! Configuration codes pack defect bits low and erasure bits high:
//! `code = d | e << L` on the ring, `code = d` on the open chain. Columns are
//! built by applying the kernels' own event functions with the kernels' own
//! rate tables, so the generator and the Monte Carlo share one transition
//! table.

mod evolve;
mod spectrum;

pub use evolve::{evolve_exact, evolve_sweeps, total_variation};
pub use spectrum::{eigenvector, spectrum, steady_states, Spectrum, DENSE_LIMIT};

use nalgebra::DMatrix;

use crate::error::ExactError;
use crate::kernel::chiral::{bond_range, chiral_event, chiral_rates, ChiralEvent};
use crate::kernel::periodic::{event_rates, mc_event, EventKind};
use crate::lattice::BitLattice;
use crate::params::{Boundary, InitialState, Semantics, SimParams};
use crate::state::SublatticeState;

/// Largest ring length accepted by [`build_generator`].
pub const MAX_RING: usize = 8;
/// Largest open-chain length accepted by [`build_generator`].
pub const MAX_CHAIN: usize = 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    /// Even defect parity only.
    EvenParity,
    Full,
}

/// Sparse generator `dp/dt = M p`. Column `j` lists the outgoing transitions
/// of configuration `j`; the diagonal is minus their total.
#[derive(Clone, Debug)]
pub struct RateMatrix {
    l: usize,
    boundary: Boundary,
    semantics: Semantics,
    sector: Sector,
    configs: Vec<u32>,
    index: Vec<u32>,
    cols: Vec<Vec<(u32, f64)>>,
    diag: Vec<f64>,
    step_scale: f64,
    steps_per_sweep: usize,
}

const ABSENT: u32 = u32::MAX;

impl RateMatrix {
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// Configuration code of index `i`.
    pub fn config(&self, i: usize) -> u32 {
        self.configs[i]
    }

    pub fn index_of_code(&self, code: u32) -> Option<usize> {
        match self.index.get(code as usize) {
            Some(&i) if i != ABSENT => Some(i as usize),
            _ => None,
        }
    }

    pub fn encode(&self, s: &SublatticeState) -> u32 {
        match self.boundary {
            Boundary::Periodic => (s.d.to_u64() | s.e.to_u64() << self.l) as u32,
            Boundary::ChiralOpen => s.d.to_u64() as u32,
        }
    }

    pub fn decode(&self, code: u32) -> SublatticeState {
        let mask = (1u64 << self.l) - 1;
        let code = code as u64;
        let e = match self.boundary {
            Boundary::Periodic => code >> self.l,
            Boundary::ChiralOpen => 0,
        };
        SublatticeState {
            d: BitLattice::from_u64(code & mask, self.l),
            e: BitLattice::from_u64(e & mask, self.l),
            time: 0.0,
        }
    }

    pub fn index_of(&self, s: &SublatticeState) -> Option<usize> {
        self.index_of_code(self.encode(s))
    }

    pub fn state(&self, i: usize) -> SublatticeState {
        self.decode(self.configs[i])
    }

    /// Off-diagonal entries `(row, rate)` of column `j`.
    pub fn column(&self, j: usize) -> &[(u32, f64)] {
        &self.cols[j]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Largest total exit rate.
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |a, &d| a.max(-d))
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum::<usize>() + self.dim()
    }

    /// `out = M v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (j, (o, &d)) in out.iter_mut().zip(&self.diag).enumerate() {
            *o = d * v[j];
        }
        for (j, col) in self.cols.iter().enumerate() {
            let x = v[j];
            if x != 0.0 {
                for &(i, r) in col {
                    out[i as usize] += r * x;
                }
            }
        }
    }

    /// Column sums, all zero up to rounding.
    pub fn column_sums(&self) -> Vec<f64> {
        self.cols
            .iter()
            .zip(&self.diag)
            .map(|(c, d)| c.iter().map(|x| x.1).sum::<f64>() + d)
            .collect()
    }

    /// Random-sequential step operator is `I + step_scale * M`.
    pub fn step_scale(&self) -> f64 {
        self.step_scale
    }

    pub fn steps_per_sweep(&self) -> usize {
        self.steps_per_sweep
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>, ExactError> {
        let n = self.dim();
        if n > DENSE_LIMIT {
            return Err(ExactError::TooLargeForDense { dim: n, limit: DENSE_LIMIT });
        }
        let mut m = DMatrix::zeros(n, n);
        for (j, col) in self.cols.iter().enumerate() {
            m[(j, j)] = self.diag[j];
            for &(i, r) in col {
                m[(i as usize, j)] += r;
            }
        }
        Ok(m)
    }

    /// Delta distribution on `s`.
    pub fn delta(&self, s: &SublatticeState) -> Option<Vec<f64>> {
        let i = self.index_of(s)?;
        let mut p = vec![0.0; self.dim()];
        p[i] = 1.0;
        Some(p)
    }

    /// Law of `init_state` for these parameters.
    pub fn initial_distribution(&self, initial: InitialState) -> Option<Vec<f64>> {
        let l = self.l;
        match initial {
            InitialState::Cluster => self.delta(&SublatticeState::cluster(l)),
            InitialState::AllErased => {
                let mut s = SublatticeState::cluster(l);
                s.e.fill(true);
                self.delta(&s)
            }
            InitialState::RandomEvenParity => {
                let support: Vec<usize> = (0..self.dim())
                    .filter(|&i| {
                        let s = self.state(i);
                        s.e.count_ones() == 0 && s.defect_count() % 2 == 0
                    })
                    .collect();
                if support.is_empty() {
                    return None;
                }
                let mut p = vec![0.0; self.dim()];
                let w = 1.0 / support.len() as f64;
                support.iter().for_each(|&i| p[i] = w);
                Some(p)
            }
        }
    }

    /// `sum_i p_i f(state_i)`.
    pub fn expect<F: Fn(&SublatticeState) -> f64>(&self, p: &[f64], f: F) -> f64 {
        p.iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(i, &w)| w * f(&self.state(i)))
            .sum()
    }
}

fn ring_configs(l: usize, sector: Sector) -> Vec<u32> {
    let dmask = (1u32 << l) - 1;
    (0..1u32 << (2 * l))
        .filter(|c| sector == Sector::Full || (c & dmask).count_ones() % 2 == 0)
        .collect()
}

fn chain_configs(l: usize, sector: Sector) -> Vec<u32> {
    let inner = ((1u32 << l) - 1) & !1 & !(1 << (l - 1));
    (0..1u32 << l)
        .filter(|c| c & !inner == 0)
        .filter(|c| sector == Sector::Full || c.count_ones() % 2 == 0)
        .collect()
}

/// Builds the generator of `params` restricted to `sector`.
pub fn build_generator(params: &SimParams, sector: Sector) -> Result<RateMatrix, ExactError> {
    params.validate()?;
    let l = params.l;
    let (configs, bits) = match params.boundary {
        Boundary::Periodic if l > MAX_RING => return Err(ExactError::DimensionOverflow(l)),
        Boundary::ChiralOpen if l > MAX_CHAIN => return Err(ExactError::DimensionOverflow(l)),
        Boundary::Periodic => (ring_configs(l, sector), 2 * l),
        Boundary::ChiralOpen => (chain_configs(l, sector), l),
    };
    let mut index = vec![ABSENT; 1usize << bits];
    for (i, &c) in configs.iter().enumerate() {
        index[c as usize] = i as u32;
    }
    let mut m = RateMatrix {
        l,
        boundary: params.boundary,
        semantics: params.semantics,
        sector,
        configs,
        index,
        cols: vec![],
        diag: vec![],
        step_scale: 0.0,
        steps_per_sweep: 0,
    };
    let mut cols = Vec::with_capacity(m.dim());
    let mut diag = Vec::with_capacity(m.dim());
    let mut moves: Vec<(u32, f64)> = Vec::new();
    for j in 0..m.dim() {
        let src = m.configs[j];
        let base = m.decode(src);
        moves.clear();
        let push = |s: SublatticeState, rate: f64, moves: &mut Vec<(u32, f64)>| {
            let dst = m.encode(&s);
            if dst != src {
                let i = m.index_of_code(dst).expect("transition leaves the sector");
                moves.push((i as u32, rate));
            }
        };
        match params.boundary {
            Boundary::Periodic => {
                let rates = event_rates(params);
                for cell in 0..l {
                    for (k, &kind) in EventKind::ALL.iter().enumerate() {
                        if rates[k] > 0.0 {
                            let mut s = base.clone();
                            if mc_event(&mut s, cell, kind, params.semantics) {
                                push(s, rates[k], &mut moves);
                            }
                        }
                    }
                }
            }
            Boundary::ChiralOpen => {
                let (lo, hi) = bond_range(l);
                for b in lo..=hi {
                    let rates = chiral_rates(params, b);
                    for (k, &ev) in ChiralEvent::ALL.iter().enumerate() {
                        if rates[k] > 0.0 {
                            let mut s = base.clone();
                            if chiral_event(&mut s, b, ev) {
                                push(s, rates[k], &mut moves);
                            }
                        }
                    }
                }
            }
        }
        moves.sort_by_key(|x| x.0);
        let mut col: Vec<(u32, f64)> = Vec::with_capacity(moves.len());
        for &(i, r) in moves.iter() {
            match col.last_mut() {
                Some(last) if last.0 == i => last.1 += r,
                _ => col.push((i, r)),
            }
        }
        diag.push(-col.iter().map(|x| x.1).sum::<f64>());
        cols.push(col);
    }
    m.cols = cols;
    m.diag = diag;
    let (steps, dt) = match params.boundary {
        Boundary::Periodic => (l, 1.0 / (params.eta + 4.0 * params.gamma)),
        Boundary::ChiralOpen => {
            let (lo, hi) = bond_range(l);
            (hi - lo + 1, 1.0 / (params.eta + 2.0 * params.gamma))
        }
    };
    m.steps_per_sweep = steps;
    m.step_scale = dt / steps as f64;
    Ok(m)
}
