//! Heralded-noise kernel on the periodic sublattice.

use crate::error::ParamError;
use crate::observables::{ObservableSet, TimeSeries};
use crate::params::{Boundary, Semantics, SimParams};
use crate::rng::RngStream;
use crate::state::{init_state, SublatticeState};

use super::{Schedule, Thresholds};

/// Elementary events, in the order of the cumulative draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    NoiseSyndrome,
    NoiseSilent,
    CorrLeft,
    CorrRight,
    FlagDropLeft,
    FlagDropRight,
    Unheralded,
    Idle,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::NoiseSyndrome,
        EventKind::NoiseSilent,
        EventKind::CorrLeft,
        EventKind::CorrRight,
        EventKind::FlagDropLeft,
        EventKind::FlagDropRight,
        EventKind::Unheralded,
        EventKind::Idle,
    ];
}

/// Continuous-time rate of each event at a single cell (`Idle` has none).
/// The kernel and the exact generator both derive from this table.
pub fn event_rates(p: &SimParams) -> [f64; 8] {
    let heralded = p.eta * p.f_e / 2.0;
    [heralded, heralded, p.gamma, p.gamma, p.gamma, p.gamma, p.eta * (1.0 - p.f_e), 0.0]
}

/// Per-step event probabilities `c0 * rate`, `c0 = 1/(eta + 4 gamma)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EventTable {
    probs: [f64; 8],
    thresholds: Thresholds<8>,
    semantics: Semantics,
    dt: f64,
    actions: [u8; 64],
}

/// Action bits of the compiled table: toggles of `d[m-1]`, `d[m]`, `d[m+1]`,
/// `e[m]`, `e[m+1]`.
const A_DL: u8 = 1;
const A_DM: u8 = 2;
const A_DR: u8 = 4;
const A_EM: u8 = 8;
const A_ER: u8 = 16;

#[inline(always)]
fn local_index(kind: usize, e_m: u64, d_m: u64, e_r: u64) -> usize {
    (kind << 3) | ((e_m as usize) << 2) | ((d_m as usize) << 1) | e_r as usize
}

/// Tabulates [`mc_event`] on every local neighbourhood. Events only read
/// `e[m]`, `d[m]`, `e[m+1]` and only write cells `m-1..=m+1`, so a three-cell
/// ring covers all cases.
fn compile_actions(semantics: Semantics) -> [u8; 64] {
    let mut table = [0u8; 64];
    for (k, &kind) in EventKind::ALL.iter().enumerate() {
        for code in 0..8u64 {
            let (e_m, d_m, e_r) = ((code >> 2) & 1, (code >> 1) & 1, code & 1);
            let mut s = SublatticeState::cluster(3);
            s.e.set(1, e_m == 1);
            s.d.set(1, d_m == 1);
            s.e.set(2, e_r == 1);
            let before = s.clone();
            mc_event(&mut s, 1, kind, semantics);
            let mut a = 0u8;
            for (bit, changed) in [
                (A_DL, s.d.get(0) != before.d.get(0)),
                (A_DM, s.d.get(1) != before.d.get(1)),
                (A_DR, s.d.get(2) != before.d.get(2)),
                (A_EM, s.e.get(1) != before.e.get(1)),
                (A_ER, s.e.get(2) != before.e.get(2)),
            ] {
                if changed {
                    a |= bit;
                }
            }
            debug_assert!(s.e.get(0) == before.e.get(0));
            table[local_index(k, e_m, d_m, e_r)] = a;
        }
    }
    table
}

impl EventTable {
    pub fn new(p: &SimParams) -> Result<Self, ParamError> {
        p.validate()?;
        if p.boundary != Boundary::Periodic {
            return Err(ParamError::WrongBoundary("periodic"));
        }
        let c0 = 1.0 / (p.eta + 4.0 * p.gamma);
        let rates = event_rates(p);
        let mut probs = [0.0; 8];
        let mut used = 0.0;
        for k in 0..7 {
            probs[k] = c0 * rates[k];
            used += probs[k];
        }
        let idle = 1.0 - used;
        debug_assert!(idle > -1e-12, "event probabilities exceed one by {}", -idle);
        probs[7] = idle.max(0.0);
        Ok(EventTable {
            probs,
            thresholds: Thresholds::new(&probs),
            semantics: p.semantics,
            dt: c0,
            actions: compile_actions(p.semantics),
        })
    }

    pub fn probabilities(&self) -> &[f64; 8] {
        &self.probs
    }

    pub fn prob(&self, k: EventKind) -> f64 {
        self.probs[k as usize]
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    /// Simulation time per sweep.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline(always)]
    pub fn draw(&self, r: u64) -> EventKind {
        EventKind::ALL[self.thresholds.pick(r)]
    }

    /// Applies a drawn event through the compiled action table; equivalent to
    /// [`mc_event`] without data-dependent branches.
    #[inline(always)]
    fn apply_fast(&self, s: &mut SublatticeState, m: usize, r: u64) {
        let l = s.l();
        let left = if m == 0 { l - 1 } else { m - 1 };
        let right = if m + 1 == l { 0 } else { m + 1 };
        let k = self.thresholds.pick(r);
        let a = self.actions[local_index(k, s.e.bit(m), s.d.bit(m), s.e.bit(right))] as u64;
        s.d.xor_bit(left, a);
        s.d.xor_bit(m, a >> 1);
        s.d.xor_bit(right, a >> 2);
        s.e.xor_bit(m, a >> 3);
        s.e.xor_bit(right, a >> 4);
    }
}

/// Applies one event at cell `m`; returns whether the configuration changed.
#[inline(always)]
pub fn mc_event(s: &mut SublatticeState, m: usize, kind: EventKind, semantics: Semantics) -> bool {
    let l = s.l();
    let left = if m == 0 { l - 1 } else { m - 1 };
    let right = if m + 1 == l { 0 } else { m + 1 };
    match kind {
        EventKind::NoiseSyndrome => {
            if !s.e.get(m) {
                s.e.set(m, true);
            } else if semantics == Semantics::AsPublished {
                return false;
            }
            s.d.toggle(left);
            s.d.toggle(m);
            true
        }
        EventKind::NoiseSilent => {
            if s.e.get(m) {
                return false;
            }
            s.e.set(m, true);
            true
        }
        EventKind::CorrLeft => {
            if s.e.get(m) && s.d.get(m) && !s.e.get(right) {
                s.e.set(m, false);
                s.d.toggle(left);
                s.d.toggle(m);
                true
            } else {
                false
            }
        }
        EventKind::CorrRight => {
            if s.e.get(right) && s.d.get(m) && !s.e.get(m) {
                s.e.set(right, false);
                s.d.toggle(m);
                s.d.toggle(right);
                true
            } else {
                false
            }
        }
        EventKind::FlagDropLeft => {
            if s.e.get(m) && !s.d.get(m) && !s.e.get(right) {
                s.e.set(m, false);
                true
            } else {
                false
            }
        }
        EventKind::FlagDropRight => {
            if s.e.get(right) && !s.d.get(m) && !s.e.get(m) {
                s.e.set(right, false);
                true
            } else {
                false
            }
        }
        EventKind::Unheralded => {
            s.d.toggle(left);
            s.d.toggle(m);
            true
        }
        EventKind::Idle => false,
    }
}

/// `L` random-sequential steps, then time advances by `1/(eta + 4 gamma)`.
#[inline]
pub fn mc_sweep(s: &mut SublatticeState, table: &EventTable, rng: &mut RngStream) {
    let l = s.l();
    for _ in 0..l {
        let m = rng.below(l);
        table.apply_fast(s, m, rand::RngCore::next_u64(rng));
    }
    s.time += table.dt;
}

/// Runs one trajectory from `params.initial`, sampling at every scheduled sweep.
pub fn run_trajectory(
    params: &SimParams,
    rng: &mut RngStream,
    schedule: &Schedule,
    obs: &ObservableSet,
) -> Result<TimeSeries, ParamError> {
    let table = EventTable::new(params)?;
    let mut s = init_state(params, rng)?;
    let mut ts = TimeSeries::new(obs.columns(params));
    let mut row = Vec::with_capacity(ts.columns().len());
    let mut done = 0u64;
    for &target in schedule.sweeps() {
        while done < target {
            mc_sweep(&mut s, &table, rng);
            done += 1;
        }
        s.time = done as f64 * table.dt;
        row.clear();
        obs.measure(&s, params.boundary, &mut row);
        ts.push(done, s.time, &row);
    }
    Ok(ts)
}
