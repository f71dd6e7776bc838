//! Sublattice configuration.
//!
//! One of the two decoupled sublattices is simulated. In cell coordinates
//! `d[m]` is the stabilizer defect on physical site `2m` and `e[m]` the erasure
//! flag on physical site `2m - 1`, so `e[m]` sits between `d[m-1]` and `d[m]`.
//! Periodic lattices index modulo `L`.

use serde::{Deserialize, Serialize};

use crate::error::{ObservableError, ParamError};
use crate::lattice::BitLattice;
use crate::params::{InitialState, SimParams};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct SublatticeState {
    pub d: BitLattice,
    pub e: BitLattice,
    pub time: f64,
}

/// Hex snapshot: bit `i` of each string is site `i`, see [`BitLattice::to_hex`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub l: usize,
    pub d: String,
    pub e: String,
    pub time: f64,
}

impl SublatticeState {
    pub fn cluster(l: usize) -> Self {
        SublatticeState { d: BitLattice::zeros(l), e: BitLattice::zeros(l), time: 0.0 }
    }

    /// Builds a state from `0`/`1` strings, e.g. `from_strings("010", "010")`.
    pub fn from_strings(d: &str, e: &str) -> Option<Self> {
        let d = BitLattice::from_bitstring(d)?;
        let e = BitLattice::from_bitstring(e)?;
        (d.len() == e.len()).then_some(SublatticeState { d, e, time: 0.0 })
    }

    #[inline]
    pub fn l(&self) -> usize {
        self.d.len()
    }

    pub fn defect_count(&self) -> usize {
        self.d.count_ones()
    }

    pub fn erasure_count(&self) -> usize {
        self.e.count_ones()
    }

    /// `+1` for even total defect number, `-1` for odd.
    pub fn global_parity(&self) -> i8 {
        if self.defect_count() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// `prod_{k=i}^{i+l-1} (1 - 2 d[k mod L])`.
    pub fn region_parity(&self, i: usize, l: usize) -> Result<i8, ObservableError> {
        let len = self.l();
        if l == 0 || l > len {
            return Err(ObservableError::BadLength { l, len });
        }
        let mut odd = false;
        for k in i..i + l {
            odd ^= self.d.get(k % len);
        }
        Ok(if odd { -1 } else { 1 })
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { l: self.l(), d: self.d.to_hex(), e: self.e.to_hex(), time: self.time }
    }

    pub fn from_snapshot(s: &Snapshot) -> Option<Self> {
        Some(SublatticeState {
            d: BitLattice::from_hex(&s.d, s.l)?,
            e: BitLattice::from_hex(&s.e, s.l)?,
            time: s.time,
        })
    }
}

/// Initial configuration. `RandomEvenParity` draws each defect from a fair
/// coin and then flips `d[0]` if the total is odd; on the chiral chain the
/// sealed end cells stay empty and the repair flips `d[1]` instead.
pub fn init_state(params: &SimParams, rng: &mut RngStream) -> Result<SublatticeState, ParamError> {
    params.validate()?;
    let l = params.l;
    let mut s = SublatticeState::cluster(l);
    match params.initial {
        InitialState::Cluster => {}
        InitialState::AllErased => s.e.fill(true),
        InitialState::RandomEvenParity => {
            let (lo, hi) = match params.boundary {
                crate::params::Boundary::Periodic => (0, l),
                crate::params::Boundary::ChiralOpen => (1, l - 1),
            };
            for m in lo..hi {
                if rng.next_bit() {
                    s.d.toggle(m);
                }
            }
            if s.defect_count() % 2 == 1 {
                s.d.toggle(lo);
            }
        }
    }
    Ok(s)
}
