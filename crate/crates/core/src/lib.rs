//! Equilibria and learning dynamics for linear-quadratic network games with
//! payoff feedback.
//!
//! Agents are indexed from 0 throughout the API. Agent sets print 1-based.

pub mod agents;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod global;
pub mod learning;
pub mod net;
mod par;
pub mod random;

pub use agents::AgentSet;
pub use equilibrium::{EquilibriumKind, EquilibriumRecord, EquilibriumSet};
pub use error::{Error, Result};
pub use game::GameSpec;
pub use net::{Assumption, WeightedNetwork};
