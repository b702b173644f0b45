//! Grid, sampled fields, pairings, differential and Fourier operators, weighted norms.

mod grid;
pub mod io;
mod norms;
mod ops;
mod samples;

pub use grid::{Boundary, Grid, Real};
pub use norms::{sech_weight, weighted_norm, NormKind, WeightParams};
pub use ops::{
    bessel_multiplier, derivative, pairing, periodize, reattach, real_pairing, smoothstep, spectral_apply,
    symplectic_form, window, Bilinear,
};
pub use samples::{ComplexField, ComplexPair, RealField, RealPair, Sample, Samples, StatePair};
