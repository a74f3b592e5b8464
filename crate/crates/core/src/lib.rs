//! Monte Carlo simulation of the SABR model with exact CEV transitions.

pub mod cev;
pub mod condvar;
pub mod engine;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod sampling;
pub mod summation;

pub use cev::CevParams;
pub use condvar::{CondVarInputs, MomentSet, SlnMethod, SlnParams};
pub use engine::{PathState, SabrParams, Scheme};
pub use error::{Result, SabrError};
pub use sampling::RngStream;
