pub mod braid;
pub mod classical;
pub mod config;
pub mod constructions;
pub mod currents;
pub mod error;
pub mod fields;
pub mod flows;
pub mod group;
pub mod harness;
mod ode;
pub mod rng;

pub use error::{KinematError, Result};
