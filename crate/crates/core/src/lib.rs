//! Goal-oriented co-design of sensor scheduling, remote estimation and
//! event-triggered control for a two-sensor wireless networked control
//! system.

pub mod channel;
pub mod control;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod io;
pub mod mdp;
pub mod model;
pub mod par;
pub mod policies;
pub mod sim;

pub use error::{Error, Result};
