use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, Real};
use crate::error::{Error, Result};

/// Per-point sample type: a real scalar or a complex number over it.
pub trait Sample<T: Real>:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + num_traits::Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Mul<T, Output = Self>
{
    fn to_complex(self) -> Complex<T>;
    /// Real part for real samples, identity for complex ones.
    fn from_complex(c: Complex<T>) -> Self;
    fn from_real(r: T) -> Self;
    fn conj(self) -> Self;
    fn abs_sq(self) -> T;
    fn is_finite_sample(self) -> bool;
}

impl<T: Real> Sample<T> for T {
    fn to_complex(self) -> Complex<T> {
        Complex::new(self, T::zero())
    }
    fn from_complex(c: Complex<T>) -> Self {
        c.re
    }
    fn from_real(r: T) -> Self {
        r
    }
    fn conj(self) -> Self {
        self
    }
    fn abs_sq(self) -> T {
        self * self
    }
    fn is_finite_sample(self) -> bool {
        self.is_finite()
    }
}

impl<T: Real> Sample<T> for Complex<T> {
    fn to_complex(self) -> Complex<T> {
        self
    }
    fn from_complex(c: Complex<T>) -> Self {
        c
    }
    fn from_real(r: T) -> Self {
        Complex::new(r, T::zero())
    }
    fn conj(self) -> Self {
        Complex::conj(&self)
    }
    fn abs_sq(self) -> T {
        self.norm_sqr()
    }
    fn is_finite_sample(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Samples of a scalar function on a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples<S, T: Real = f64> {
    grid: Grid<T>,
    values: Vec<S>,
}

pub type RealField<T = f64> = Samples<T, T>;
pub type ComplexField<T = f64> = Samples<Complex<T>, T>;

impl<S: Sample<T>, T: Real> Samples<S, T> {
    pub fn new(grid: Grid<T>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        Self { grid, values: vec![S::zero(); grid.len()] }
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> S) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn map_indexed(&self, f: impl Fn(usize, T, S) -> S) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(i, self.grid.x(i), v)).collect();
        Self { grid: self.grid, values }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert!(self.grid.same_as(&other.grid), "field grids differ");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|v| v * c)
    }

    pub fn scale_real(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    /// Pointwise product with a real weight field.
    pub fn weighted(&self, w: &RealField<T>) -> Self {
        assert!(self.grid.same_as(w.grid()), "weight grid differs");
        let values = self.values.iter().zip(w.values()).map(|(&a, &b)| a * b).collect();
        Self { grid: self.grid, values }
    }

    pub fn axpy(&mut self, a: S, x: &Self) {
        assert!(self.grid.same_as(&x.grid), "field grids differ");
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y = *y + a * xv;
        }
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Quadrature of the samples.
    pub fn integrate(&self) -> S {
        let mut acc = S::zero();
        for (i, &v) in self.values.iter().enumerate() {
            acc = acc + v * self.grid.weight(i);
        }
        acc
    }

    pub fn norm_sq(&self) -> T {
        let mut acc = T::zero();
        for (i, &v) in self.values.iter().enumerate() {
            acc = acc + v.abs_sq() * self.grid.weight(i);
        }
        acc
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs_sq().sqrt()))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite_sample())
    }

    pub fn to_complex(&self) -> ComplexField<T> {
        Samples { grid: self.grid, values: self.values.iter().map(|v| v.to_complex()).collect() }
    }
}

impl<T: Real> ComplexField<T> {
    pub fn from_real(f: &RealField<T>) -> Self {
        f.to_complex()
    }

    pub fn from_parts(re: &RealField<T>, im: &RealField<T>) -> Self {
        assert!(re.grid().same_as(im.grid()), "field grids differ");
        let values = re.values().iter().zip(im.values()).map(|(&a, &b)| Complex::new(a, b)).collect();
        Samples { grid: *re.grid(), values }
    }

    pub fn re(&self) -> RealField<T> {
        Samples { grid: self.grid, values: self.values.iter().map(|c| c.re).collect() }
    }

    pub fn im(&self) -> RealField<T> {
        Samples { grid: self.grid, values: self.values.iter().map(|c| c.im).collect() }
    }
}

impl<S: Sample<T>, T: Real> Add for &Samples<S, T> {
    type Output = Samples<S, T>;
    fn add(self, rhs: Self) -> Samples<S, T> {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<S: Sample<T>, T: Real> Sub for &Samples<S, T> {
    type Output = Samples<S, T>;
    fn sub(self, rhs: Self) -> Samples<S, T> {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl<S: Sample<T>, T: Real> Mul for &Samples<S, T> {
    type Output = Samples<S, T>;
    fn mul(self, rhs: Self) -> Samples<S, T> {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl<S: Sample<T>, T: Real> Neg for &Samples<S, T> {
    type Output = Samples<S, T>;
    fn neg(self) -> Samples<S, T> {
        self.map(|a| -a)
    }
}

/// Two-component state `(u1, u2)`: position and momentum components on one grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePair<F> {
    pub first: F,
    pub second: F,
}

pub type RealPair<T = f64> = StatePair<RealField<T>>;
pub type ComplexPair<T = f64> = StatePair<ComplexField<T>>;

impl<S: Sample<T>, T: Real> StatePair<Samples<S, T>> {
    pub fn new(first: Samples<S, T>, second: Samples<S, T>) -> Result<Self> {
        first.grid().check_same(second.grid())?;
        Ok(Self { first, second })
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        Self { first: Samples::zeros(grid), second: Samples::zeros(grid) }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.first.grid()
    }

    pub fn map(&self, f: impl Fn(&Samples<S, T>) -> Samples<S, T>) -> Self {
        Self { first: f(&self.first), second: f(&self.second) }
    }

    pub fn scale(&self, c: S) -> Self {
        Self { first: self.first.scale(c), second: self.second.scale(c) }
    }

    pub fn scale_real(&self, c: T) -> Self {
        Self { first: self.first.scale_real(c), second: self.second.scale_real(c) }
    }

    pub fn axpy(&mut self, a: S, x: &Self) {
        self.first.axpy(a, &x.first);
        self.second.axpy(a, &x.second);
    }

    pub fn conj(&self) -> Self {
        Self { first: self.first.conj(), second: self.second.conj() }
    }

    pub fn weighted(&self, w: &RealField<T>) -> Self {
        Self { first: self.first.weighted(w), second: self.second.weighted(w) }
    }

    /// Applies `J = [[0, 1], [-1, 0]]`.
    pub fn apply_j(&self) -> Self {
        Self { first: self.second.clone(), second: -&self.first }
    }

    /// Applies `J⁻¹ = -J`.
    pub fn apply_j_inv(&self) -> Self {
        Self { first: -&self.second, second: self.first.clone() }
    }

    /// Applies `σ₃ = diag(1, -1)`.
    pub fn apply_sigma3(&self) -> Self {
        Self { first: self.first.clone(), second: -&self.second }
    }

    pub fn norm_sq(&self) -> T {
        self.first.norm_sq() + self.second.norm_sq()
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.first.all_finite() && self.second.all_finite()
    }

    pub fn to_complex(&self) -> ComplexPair<T> {
        StatePair { first: self.first.to_complex(), second: self.second.to_complex() }
    }
}

impl<T: Real> ComplexPair<T> {
    pub fn re(&self) -> RealPair<T> {
        StatePair { first: self.first.re(), second: self.second.re() }
    }

    pub fn im(&self) -> RealPair<T> {
        StatePair { first: self.first.im(), second: self.second.im() }
    }
}

impl<S: Sample<T>, T: Real> Add for &StatePair<Samples<S, T>> {
    type Output = StatePair<Samples<S, T>>;
    fn add(self, rhs: Self) -> Self::Output {
        StatePair { first: &self.first + &rhs.first, second: &self.second + &rhs.second }
    }
}

impl<S: Sample<T>, T: Real> Sub for &StatePair<Samples<S, T>> {
    type Output = StatePair<Samples<S, T>>;
    fn sub(self, rhs: Self) -> Self::Output {
        StatePair { first: &self.first - &rhs.first, second: &self.second - &rhs.second }
    }
}

impl<S: Sample<T>, T: Real> Neg for &StatePair<Samples<S, T>> {
    type Output = StatePair<Samples<S, T>>;
    fn neg(self) -> Self::Output {
        StatePair { first: -&self.first, second: -&self.second }
    }
}
