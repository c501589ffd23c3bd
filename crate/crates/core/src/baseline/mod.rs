//! Comparison latent updates: reversible-jump event moves and individual
//! forward-filtering backward-sampling.

pub mod events;
pub mod iffbs;
pub mod rj;

pub use events::EventSequence;
