//! Population dynamics of the heralded-noise, locally corrected 1D cluster
//! state: Monte Carlo kernels, observables, mean-field equations, an exact
//! small-system generator and directed-percolation scaling analysis.

pub mod ensemble;
pub mod error;
pub mod exact;
pub mod harness;
pub mod kernel;
pub mod lattice;
pub mod meanfield;
pub mod observables;
pub mod params;
pub mod rng;
pub mod scaling;
pub mod state;

pub use ensemble::{run_ensemble, EnsembleConfig, EnsembleStats};
pub use error::*;
pub use params::{Boundary, InitialState, Semantics, SimParams};
pub use rng::RngStream;
pub use state::{init_state, SublatticeState};
