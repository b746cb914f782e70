//! Exact simulation of drifted Brownian motion on boxes and time-space
//! parallelepipeds, with importance sampling of the exit time, exit side and
//! exit position. Built on top of closed-form one-dimensional densities
//! ([`series1d`]), the crate provides single-step samplers ([`boxstep`]),
//! domain decompositions into overlapping boxes ([`geometry`]), path-level
//! Feynman-Kac estimators ([`walker`]), interacting-particle resampling
//! ([`population`]) and reference schemes for validation ([`baselines`]).

pub mod baselines;
pub mod boxstep;
pub mod error;
pub mod geometry;
pub mod population;
pub mod sampling;
pub mod series1d;
pub mod util;
pub mod walker;

pub use error::{Result, WalkError};
