//! Simulation laboratory for autonomous pricing and production agents in
//! multi-commodity oligopoly markets.

pub mod agent;
pub mod bertrand;
pub mod equilibrium;
pub mod error;
pub mod gateway;
pub mod market;
pub mod qp;
pub mod runner;
pub mod stats;

pub use error::ModelError;
