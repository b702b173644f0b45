//! Numerical laboratory for small solutions of the 1D nonlinear Klein-Gordon system
//! `u̇ = J(L₁u + f[u])` with a trapping potential: spectral data, resonance tables,
//! Darboux chains, refined profiles, time integration and the virial/FGR diagnostics.

pub mod banded;
pub mod darboux;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod multiindex;
pub mod profile;
pub mod scenario;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub type Grid = field::Grid<f64>;
pub type Grid32 = field::Grid<f32>;
pub type Field = field::RealField<f64>;
pub type Field32 = field::RealField<f32>;
pub type CField = field::ComplexField<f64>;
pub type Pair = field::RealPair<f64>;
pub type Pair32 = field::RealPair<f32>;
pub type CPair = field::ComplexPair<f64>;
