//! Information-theoretic lower bounds on `L_p` norms of signals in
//! discrete-time stochastic feedback loops, and a Monte Carlo engine that
//! checks them against simulated closed loops.
//!
//! - [`plant`]: poles, zeros, relative degree and leading Markov gain of a SISO
//!   state-space plant.
//! - [`disturbance`]: parametric disturbance processes with samplers, entropy
//!   rates, power spectra and the Szegő log-integral.
//! - [`bounds`]: the bound formulas with factor breakdowns.
//! - [`simulation`]: closed-loop Monte Carlo and bound certification.

pub mod bounds;
pub mod disturbance;
pub mod error;
pub mod norm;
pub mod plant;
pub mod simulation;

pub use bounds::{BoundFactors, BoundReport, Theorem};
pub use disturbance::{DisturbanceModel, EntropySummary, SpectralDensity};
pub use error::{Error, Result};
pub use norm::NormOrder;
pub use plant::{PlantCharacteristics, StateSpaceModel};
pub use simulation::{
    BuiltinController, CausalController, Certification, LinearFilter, Signal, SimulationConfig,
    SimulationResult, StaticGain, ZeroController,
};
