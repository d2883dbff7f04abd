//! Least-energy solutions of `(−Δ)^s u + u = |u|^{q−2}u` for spectral
//! fractional Laplacians on rectangles, strips, parallelograms and triangles,
//! with reflection tilings, concentration diagnostics and an independent
//! half-cylinder extension oracle.

pub mod diagnostics;
pub mod domain;
pub mod energy;
mod error;
pub mod io;
pub mod solver;
pub mod spectral;
pub mod stx;
pub mod tiling;

pub use error::{Error, Result};
