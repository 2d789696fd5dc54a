//! Adaptive mini-element solver for the steady Brinkman–Darcy–Forchheimer
//! equations with variable porosity.
//!
//! The pipeline is: build a [`mesh::Mesh`], set up a problem from
//! [`cases`], iterate the Picard scheme in [`solver`], estimate with
//! [`estimators`] and refine with [`adapt`].

pub mod error;
pub mod fields;
pub mod mesh;
pub mod coeffs;
pub mod quadrature;
pub mod fespace;
pub mod sparse;
pub mod assembly;
pub mod solver;
pub mod estimators;
pub mod cases;
pub mod adapt;

pub use error::{Error, Result};
