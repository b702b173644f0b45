use serde::{Deserialize, Serialize};

use super::grid::Real;
use super::ops::derivative;
use super::samples::{RealField, RealPair, Samples};
use crate::error::{Error, Result};

/// Rates and scales of the weighted norms and virial functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightParams {
    /// Rate of the `H¹₋ₐ` weight `sech(a x)`.
    pub a: f64,
    /// Rate κ of `L²₋κ`.
    pub kappa: f64,
    /// Virial scale A.
    #[serde(rename = "A")]
    pub big_a: f64,
    /// Inner virial scale B.
    #[serde(rename = "B")]
    pub big_b: f64,
    /// Smoothing ε of the transformed variable.
    pub eps: f64,
    /// Rate a₂ of the exponential Σ weight.
    pub a2: f64,
}

impl WeightParams {
    /// Defaults for a spectrum with top frequency `lambda_top`, mass `mass` and potential decay rate `a1`.
    pub fn defaults_for(mass: f64, lambda_top: f64, a1: f64) -> Self {
        let kappa = Self::kappa_max(mass, lambda_top, a1);
        Self {
            a: kappa,
            kappa,
            big_a: (2.0 / kappa).max(40.0),
            big_b: 8.0,
            eps: 0.25,
            a2: 0.5 * (mass * mass - lambda_top * lambda_top).sqrt(),
        }
    }

    pub fn kappa_max(mass: f64, lambda_top: f64, a1: f64) -> f64 {
        (mass - lambda_top).min(a1) / 10.0
    }

    /// Checks the invariants tying the weights to the spectrum.
    pub fn validate(&self, mass: f64, lambda_top: f64, a1: f64) -> Result<()> {
        let kmax = Self::kappa_max(mass, lambda_top, a1);
        if !(self.kappa > 0.0 && self.kappa <= kmax * (1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!("kappa = {} outside (0, {kmax}]", self.kappa)));
        }
        let a2 = 0.5 * (mass * mass - lambda_top * lambda_top).sqrt();
        if (self.a2 - a2).abs() > 1e-12 * a2.max(1.0) {
            return Err(Error::InvalidInput(format!("a2 = {} but the spectrum requires {a2}", self.a2)));
        }
        if self.big_a < 2.0 / self.kappa * (1.0 - 1e-12) {
            return Err(Error::InvalidInput(format!("A = {} below 2/kappa = {}", self.big_a, 2.0 / self.kappa)));
        }
        if !(self.a > 0.0 && self.big_b > 0.0 && self.eps >= 0.0) {
            return Err(Error::InvalidInput("a, B must be positive and eps nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    H1,
    H1MinusA,
    SigmaA,
    L2MinusKappa,
    SigmaExp,
}

fn sech<T: Real>(x: T) -> T {
    T::one() / x.cosh()
}

/// `sech(rate·x)` sampled on the grid of `like`.
pub fn sech_weight<T: Real>(like: &RealField<T>, rate: T) -> RealField<T> {
    Samples::from_fn(*like.grid(), |x| sech(rate * x))
}

fn h1_sq<T: Real>(f: &RealField<T>) -> Result<T> {
    Ok(f.norm_sq() + derivative(f, 1)?.norm_sq())
}

/// The weighted norms of a real two-component state.
pub fn weighted_norm<T: Real>(u: &RealPair<T>, kind: NormKind, params: &WeightParams) -> Result<T> {
    let p = |v: f64| T::of(v);
    match kind {
        NormKind::H1 => Ok((h1_sq(&u.first)? + u.second.norm_sq()).sqrt()),
        NormKind::H1MinusA => {
            let w = sech_weight(&u.first, p(params.a));
            Ok((h1_sq(&u.first.weighted(&w))? + u.second.weighted(&w).norm_sq()).sqrt())
        }
        NormKind::SigmaA => {
            let w = sech_weight(&u.first, p(2.0 / params.big_a));
            let d1 = derivative(&u.first, 1)?.weighted(&w).norm();
            let l2 = u.weighted(&w).norm();
            Ok(d1 + l2 / p(params.big_a))
        }
        NormKind::L2MinusKappa => {
            let w = sech_weight(&u.first, p(params.kappa));
            Ok(u.weighted(&w).norm())
        }
        NormKind::SigmaExp => {
            let g = *u.first.grid();
            let xw = g.half_width();
            if p(params.a2) * (T::one() + xw * xw).sqrt() > p(700.0) {
                return Err(Error::Overflow(format!(
                    "exp(a2<x>) overflows on a box of half width {xw:?}; shrink the box"
                )));
            }
            let cut = p(0.8) * xw;
            let w = Samples::from_fn(g, |x| (p(params.a2) * (T::one() + x * x).sqrt()).exp());
            let inside = Samples::from_fn(g, |x| if x.abs() <= cut { T::one() } else { T::zero() });
            let mut total = T::zero();
            for c in [&u.first, &u.second] {
                let wc = c.weighted(&w);
                let dwc = derivative(&wc, 1)?;
                total = total + wc.weighted(&inside).norm_sq() + dwc.weighted(&inside).norm_sq();
            }
            Ok(total.sqrt())
        }
    }
}
