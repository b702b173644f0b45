use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar types the grid and field primitives are generic over.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + rustfft::FftNum + Debug + Default + Send + Sync + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("representable constant")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Clamped,
}

/// Uniform grid on [-X, X].
///
/// Periodic grids hold `n` points `-X + i h` with `h = 2X/n` (the point `X` is identified with `-X`);
/// clamped grids hold both endpoints with `h = 2X/(n-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T = f64> {
    half_width: T,
    points: usize,
    spacing: T,
    boundary: Boundary,
}

impl<T: Real> Grid<T> {
    pub fn new(half_width: T, points: usize, boundary: Boundary) -> Result<Self> {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width:?}")));
        }
        let spacing = match boundary {
            Boundary::Periodic => {
                if points < 64 || points % 2 != 0 {
                    return Err(Error::InvalidGrid(format!(
                        "periodic grids need an even point count >= 64, got {points}"
                    )));
                }
                T::of(2.0) * half_width / T::from_usize(points).unwrap()
            }
            Boundary::Clamped => {
                if points < 8 {
                    return Err(Error::InvalidGrid(format!("clamped grids need at least 8 points, got {points}")));
                }
                T::of(2.0) * half_width / T::from_usize(points - 1).unwrap()
            }
        };
        Ok(Self { half_width, points, spacing, boundary })
    }

    pub fn periodic(half_width: T, points: usize) -> Result<Self> {
        Self::new(half_width, points, Boundary::Periodic)
    }

    pub fn clamped(half_width: T, points: usize) -> Result<Self> {
        Self::new(half_width, points, Boundary::Clamped)
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn x(&self, i: usize) -> T {
        -self.half_width + T::from_usize(i).unwrap() * self.spacing
    }

    pub fn xs(&self) -> Vec<T> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Quadrature weight of node `i`: trapezoid on clamped grids, plain Riemann sum on periodic ones.
    pub fn weight(&self, i: usize) -> T {
        match self.boundary {
            Boundary::Periodic => self.spacing,
            Boundary::Clamped => {
                if i == 0 || i + 1 == self.points {
                    self.spacing * T::of(0.5)
                } else {
                    self.spacing
                }
            }
        }
    }

    /// Same nodes viewed as one period of a periodic sampling (used after windowing).
    pub fn as_periodic_view(&self) -> Grid<T> {
        Grid { boundary: Boundary::Periodic, ..*self }
    }

    /// Angular wavenumbers in FFT order for a periodic sampling of these nodes.
    pub fn wavenumbers(&self) -> Vec<T> {
        let n = self.points;
        let period = self.spacing * T::from_usize(n).unwrap();
        let base = T::of(2.0 * std::f64::consts::PI) / period;
        (0..n)
            .map(|j| {
                let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                base * T::of(jj)
            })
            .collect()
    }

    pub fn same_as(&self, other: &Grid<T>) -> bool {
        self.points == other.points
            && self.boundary == other.boundary
            && (self.half_width - other.half_width).abs() <= T::epsilon() * self.half_width * T::of(16.0)
    }

    pub fn check_same(&self, other: &Grid<T>) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Japanese bracket ⟨x⟩ = sqrt(1 + x²) at node `i`.
    pub fn bracket(&self, i: usize) -> T {
        let x = self.x(i);
        (T::one() + x * x).sqrt()
    }
}
