//! Discrete machinery for locating multiple critical points of a perturbed
//! quadratic energy on a weighted grid: mesh and quadrature, the two bilinear
//! forms, a generalized eigensolver, nonlinearity hypotheses, the energy
//! functional, and the geometry/existence toolchain built on top of them.

pub mod config;
pub mod critical;
pub mod error;
pub mod functional;
pub mod grid;
pub mod linalg;
pub mod nonlinearity;
pub mod operators;
pub mod spectrum;

pub use error::{Result, SmsError};
