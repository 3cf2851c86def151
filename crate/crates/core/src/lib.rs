//! Simulation and verification of lane-free cruise controllers on a ring road.
//!
//! Vehicles follow a kinematic bicycle model in polar coordinates around the
//! ring centre. Two decentralized controller families are provided:
//! Newtonian (NCC) and pseudo-relativistic (PRCC), each with or without
//! viscous neighbour coupling. Both are built from a control Lyapunov
//! function, and [`clf`] exposes the functions together with a
//! finite-difference dissipation check.

pub mod clf;
pub mod controllers;
pub mod dynamics;
mod error;
pub mod geometry;
pub mod model;
pub mod potentials;
pub mod simulation;
pub mod verify;

pub use controllers::{ControlInput, Controller, Family, Fault};
pub use error::{Error, Result};
pub use geometry::{FleetState, RingConfig, VehicleState};
pub use model::Model;
pub use potentials::PotentialConfig;
