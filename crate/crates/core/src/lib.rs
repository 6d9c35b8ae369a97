//! Langevin Monte Carlo samplers driven by random coordinate fluxes.

pub mod algorithm;
pub mod estimators;
pub mod harness;
pub mod kernels;
pub mod metrics;
pub mod potentials;
pub mod rng;
pub mod theory;
