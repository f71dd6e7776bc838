//! Open chain with center-biased defect hopping.
//!
//! Cells `d[0]` and `d[L-1]` are sealed. Bond `b` in `2..=L-2` carries the
//! qubit between `d[b-1]` and `d[b]` (physical qubit `2b - 1`). A bond lies in
//! the left half when its midpoint `b - 1/2` does not exceed the chain center
//! `(L - 1)/2`, i.e. `2b <= L`; halves are half-open so the central bond of an
//! even chain counts as left. Hops toward the center have rate `gamma (1 + mu)/2`,
//! hops away `gamma (1 - mu)/2`, noise toggles both neighbours at rate `eta`.

use crate::error::ParamError;
use crate::observables::{ObservableSet, TimeSeries};
use crate::params::{Boundary, SimParams};
use crate::rng::RngStream;
use crate::state::{init_state, SublatticeState};

use super::{Schedule, Thresholds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChiralEvent {
    Noise,
    HopLeft,
    HopRight,
    Idle,
}

impl ChiralEvent {
    pub const ALL: [ChiralEvent; 4] =
        [ChiralEvent::Noise, ChiralEvent::HopLeft, ChiralEvent::HopRight, ChiralEvent::Idle];
}

/// First and last active bond.
pub fn bond_range(l: usize) -> (usize, usize) {
    (2, l - 2)
}

pub fn in_left_half(l: usize, b: usize) -> bool {
    2 * b <= l
}

/// Continuous-time rates `[noise, hop_left, hop_right, idle]` on bond `b`.
pub fn chiral_rates(p: &SimParams, b: usize) -> [f64; 4] {
    let toward = p.gamma * (1.0 + p.mu) / 2.0;
    let away = p.gamma * (1.0 - p.mu) / 2.0;
    if in_left_half(p.l, b) {
        [p.eta, away, toward, 0.0]
    } else {
        [p.eta, toward, away, 0.0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiralTable {
    left: Thresholds<4>,
    right: Thresholds<4>,
    probs_left: [f64; 4],
    probs_right: [f64; 4],
    dt: f64,
    fires: [u8; 16],
}

/// Whether [`chiral_event`] fires, tabulated over `(event, d[b-1], d[b])`.
fn compile_fires() -> [u8; 16] {
    let mut t = [0u8; 16];
    for (k, &ev) in ChiralEvent::ALL.iter().enumerate() {
        for code in 0..4usize {
            let mut s = SublatticeState::cluster(5);
            s.d.set(1, code & 2 != 0);
            s.d.set(2, code & 1 != 0);
            t[k * 4 + code] = chiral_event(&mut s, 2, ev) as u8;
        }
    }
    t
}

impl ChiralTable {
    /// Per-step probabilities `c * rate` with `c = 1/(eta + 2 gamma)`.
    pub fn new(p: &SimParams) -> Result<Self, ParamError> {
        p.validate()?;
        if p.boundary != Boundary::ChiralOpen {
            return Err(ParamError::WrongBoundary("chiral-open"));
        }
        let c = 1.0 / (p.eta + 2.0 * p.gamma);
        let mk = |b: usize| {
            let r = chiral_rates(p, b);
            let mut probs = [c * r[0], c * r[1], c * r[2], 0.0];
            probs[3] = (1.0 - probs[0] - probs[1] - probs[2]).max(0.0);
            probs
        };
        let probs_left = mk(2);
        let probs_right = mk(p.l - 2);
        Ok(ChiralTable {
            left: Thresholds::new(&probs_left),
            right: Thresholds::new(&probs_right),
            probs_left,
            probs_right,
            dt: c,
            fires: compile_fires(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn probabilities(&self, left_half: bool) -> &[f64; 4] {
        if left_half {
            &self.probs_left
        } else {
            &self.probs_right
        }
    }

    #[inline(always)]
    pub fn draw(&self, left_half: bool, r: u64) -> ChiralEvent {
        let t = if left_half { &self.left } else { &self.right };
        ChiralEvent::ALL[t.pick(r)]
    }

    #[inline(always)]
    fn apply_fast(&self, s: &mut SublatticeState, b: usize, left_half: bool, r: u64) {
        let t = if left_half { &self.left } else { &self.right };
        let k = t.pick(r);
        let f = self.fires[k * 4 + ((s.d.bit(b - 1) as usize) << 1) + s.d.bit(b) as usize] as u64;
        s.d.xor_bit(b - 1, f);
        s.d.xor_bit(b, f);
    }
}

/// Applies one event on bond `b`; returns whether the configuration changed.
#[inline(always)]
pub fn chiral_event(s: &mut SublatticeState, b: usize, ev: ChiralEvent) -> bool {
    debug_assert!(b >= 2 && b + 2 <= s.l());
    let fire = match ev {
        ChiralEvent::Noise => true,
        ChiralEvent::HopLeft => s.d.get(b),
        ChiralEvent::HopRight => s.d.get(b - 1),
        ChiralEvent::Idle => false,
    };
    if fire {
        s.d.toggle(b - 1);
        s.d.toggle(b);
    }
    fire
}

/// One sweep of `L - 3` steps (one per active bond on average).
#[inline]
pub fn chiral_sweep(s: &mut SublatticeState, table: &ChiralTable, rng: &mut RngStream) {
    let l = s.l();
    let (lo, hi) = bond_range(l);
    let n = hi - lo + 1;
    for _ in 0..n {
        let b = lo + rng.below(n);
        table.apply_fast(s, b, in_left_half(l, b), rand::RngCore::next_u64(rng));
    }
    s.time += table.dt;
}

pub fn run_chiral(
    params: &SimParams,
    rng: &mut RngStream,
    schedule: &Schedule,
    obs: &ObservableSet,
) -> Result<TimeSeries, ParamError> {
    let table = ChiralTable::new(params)?;
    let mut s = init_state(params, rng)?;
    let mut ts = TimeSeries::new(obs.columns(params));
    let mut row = Vec::with_capacity(ts.columns().len());
    let mut done = 0u64;
    for &target in schedule.sweeps() {
        while done < target {
            chiral_sweep(&mut s, &table, rng);
            done += 1;
        }
        s.time = done as f64 * table.dt;
        row.clear();
        obs.measure(&s, params.boundary, &mut row);
        ts.push(done, s.time, &row);
    }
    Ok(ts)
}
