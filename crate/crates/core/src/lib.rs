//! Bayesian inference for discrete-time, individual-based colonisation models
//! observed through imperfect, sparse diagnostic tests.
//!
//! The crate is organised around the two-state (uncolonised / colonised)
//! household transmission model in [`model`], and three interchangeable
//! latent-state updates that plug into the same Metropolis-within-Gibbs
//! chain ([`chain::Chain`]):
//!
//! * [`rippler`]: the non-centred "ripple" update. The current latent lattice
//!   is mapped to a lattice of uniform draws consistent with it, one (or a
//!   few) draws are moved to the complement of their consistency interval,
//!   and the lattice is re-simulated forward in time.
//! * [`baseline::rj`]: reversible-jump moves of colonisation / clearance
//!   event times for one individual.
//! * [`baseline::iffbs`]: individual forward-filtering backward-sampling, an
//!   exact Gibbs draw of one individual's whole path.
//!
//! Parameters are updated by an adaptive random-walk Metropolis step
//! ([`params`]). [`diagnostics`] holds chain summaries and the brute-force
//! enumeration oracle used to check all three samplers on tiny instances.

pub mod baseline;
pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod model;
pub mod params;
pub mod rippler;
pub mod rng;
pub mod synthetic;

pub use baseline::iffbs::IffbsKernel;
pub use baseline::rj::{RjConfig, RjKernel};
pub use chain::{Chain, IterationRecord, LatentStats, LatentUpdater};
pub use error::{ModelError, Result};
pub use model::{
    ColonisationMatrix, Context, FixedModel, ModelParams, NoncentredMatrix, ObservationMatrix,
    Population, ProposalBounds, TestResult,
};
pub use params::{AdaptConfig, AdaptState, PriorSpec};
pub use rippler::{RipplerConfig, RipplerKernel};
pub use rng::ChainRng;
