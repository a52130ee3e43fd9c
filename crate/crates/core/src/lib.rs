//! Lagrangian solver and verification lab for the two-dimensional viscous
//! shallow-water equations with a physical-vacuum free boundary on the slab
//! `𝕋 × (0, 1)`.

pub mod calculus;
pub mod cli;
pub mod config;
pub mod eigenbasis;
pub mod energy;
pub mod error;
pub mod eulerian;
pub mod export;
pub mod galerkin;
pub mod grid;
pub mod kinematics;
pub mod picard;
pub mod pipeline;
pub mod quadrature;

pub use error::{Error, Result};
