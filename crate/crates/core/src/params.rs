//! Simulation parameters and their validation.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::ParamError;

/// Boundary mode of the simulated sublattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Ring of `L` cells with erasure flags (heralded-noise kernel).
    Periodic,
    /// Open chain with sealed end cells and center-biased hopping.
    ChiralOpen,
}

/// How noise acting on an already-erased site is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Semantics {
    /// Update listing verbatim: noise on an erased site is a no-op.
    AsPublished,
    /// All four heralded jump operators, including dephasing of erased sites.
    FullChannel,
}

/// Initial configuration of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialState {
    Cluster,
    RandomEvenParity,
    AllErased,
}

/// Full description of one ensemble experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub l: usize,
    pub eta: f64,
    pub gamma: f64,
    pub f_e: f64,
    pub boundary: Boundary,
    pub mu: f64,
    pub semantics: Semantics,
    pub initial: InitialState,
    pub t_max_sweeps: u64,
    /// Linear stride between samples; 0 selects the geometric schedule.
    pub measure_stride: u64,
    pub master_seed: u64,
    pub n_traj: u64,
}

impl SimParams {
    /// Periodic heralded-noise parameters with cluster start and the listing semantics.
    pub fn periodic(l: usize, eta: f64, gamma: f64, f_e: f64) -> Self {
        SimParams {
            l,
            eta,
            gamma,
            f_e,
            boundary: Boundary::Periodic,
            mu: 0.0,
            semantics: Semantics::AsPublished,
            initial: InitialState::Cluster,
            t_max_sweeps: default_sweeps(l),
            measure_stride: 0,
            master_seed: 1,
            n_traj: 1,
        }
    }

    /// Open-chain parameters for the chiral-drift protocol.
    pub fn chiral(l: usize, eta: f64, gamma: f64, mu: f64) -> Self {
        SimParams {
            boundary: Boundary::ChiralOpen,
            mu,
            f_e: 1.0,
            ..SimParams::periodic(l, eta, gamma, 1.0)
        }
    }

    pub fn with_semantics(mut self, s: Semantics) -> Self {
        self.semantics = s;
        self
    }

    pub fn with_initial(mut self, i: InitialState) -> Self {
        self.initial = i;
        self
    }

    pub fn with_sweeps(mut self, sweeps: u64) -> Self {
        self.t_max_sweeps = sweeps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_traj(mut self, n: u64) -> Self {
        self.n_traj = n;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.l < 3 {
            return Err(ParamError::LatticeTooSmall(self.l));
        }
        if self.boundary == Boundary::ChiralOpen && self.l < 5 {
            return Err(ParamError::LatticeTooSmall(self.l));
        }
        for (name, v) in [("eta", self.eta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ParamError::NegativeRate { name, value: v });
            }
        }
        if self.eta + self.gamma <= 0.0 {
            return Err(ParamError::NoDynamics);
        }
        if !(0.0..=1.0).contains(&self.f_e) {
            return Err(ParamError::OutOfUnitInterval { name: "f_e", value: self.f_e });
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(ParamError::OutOfUnitInterval { name: "mu", value: self.mu });
        }
        match self.boundary {
            Boundary::Periodic if self.mu != 0.0 => Err(ParamError::MuWithPeriodic(self.mu)),
            Boundary::ChiralOpen if self.initial == InitialState::AllErased => {
                Err(ParamError::ErasuresOnChiral)
            }
            _ => Ok(()),
        }
    }

    /// Simulation time elapsed per sweep.
    pub fn sweep_dt(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => 1.0 / (self.eta + 4.0 * self.gamma),
            Boundary::ChiralOpen => 1.0 / (self.eta + 2.0 * self.gamma),
        }
    }
}

/// `2 L^{1.5}` sweeps, the standard run length.
pub fn default_sweeps(l: usize) -> u64 {
    (2.0 * (l as f64).powf(1.5)).ceil() as u64
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::ChiralOpen => "chiral-open",
        })
    }
}

impl FromStr for Boundary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "chiral-open" | "chiral" => Ok(Boundary::ChiralOpen),
            _ => Err(format!("unknown boundary '{s}' (periodic|chiral-open)")),
        }
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Semantics::AsPublished => "as-published",
            Semantics::FullChannel => "full-channel",
        })
    }
}

impl FromStr for Semantics {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "as-published" => Ok(Semantics::AsPublished),
            "full-channel" => Ok(Semantics::FullChannel),
            _ => Err(format!("unknown semantics '{s}' (as-published|full-channel)")),
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialState::Cluster => "cluster",
            InitialState::RandomEvenParity => "random-even-parity",
            InitialState::AllErased => "all-erased",
        })
    }
}

impl FromStr for InitialState {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cluster" => Ok(InitialState::Cluster),
            "random-even-parity" => Ok(InitialState::RandomEvenParity),
            "all-erased" => Ok(InitialState::AllErased),
            _ => Err(format!(
                "unknown initial state '{s}' (cluster|random-even-parity|all-erased)"
            )),
        }
    }
}
