//! Beam propagation, run configuration, CSV artifacts and command dispatch
//! on top of [`ptcrystal_core`].

pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod propagator;

pub use ptcrystal_core as core;
pub mod validation;
