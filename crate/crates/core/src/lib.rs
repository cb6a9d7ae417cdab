//! Numerical pipeline for the compass-gait passive walker: switched-pendula
//! dynamics, the heelstrike return map, closed-form unperturbed analysis,
//! verification of the bifurcation conditions that select the walking cycle,
//! and continuation of that cycle in the slope parameter.

pub mod closedform;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod melnikov;
pub mod poincare;
mod roots;

pub use error::{Error, Result};
