use num_complex::Complex;
use rustfft::FftPlanner;

use super::grid::{Boundary, Real};
use super::samples::{RealField, Sample, Samples, StatePair};
use crate::error::{Error, Result};

/// Objects carrying the bilinear pairing `(u, v) = ∫ ᵗu v dx` (no conjugation).
pub trait Bilinear<S>: Sized {
    fn pairing(&self, other: &Self) -> Result<S>;
    fn conjugate(&self) -> Self;
}

impl<S: Sample<T>, T: Real> Bilinear<S> for Samples<S, T> {
    fn pairing(&self, other: &Self) -> Result<S> {
        self.grid().check_same(other.grid())?;
        let g = self.grid();
        let mut acc = S::zero();
        for (i, (&a, &b)) in self.values().iter().zip(other.values()).enumerate() {
            acc = acc + a * b * g.weight(i);
        }
        Ok(acc)
    }

    fn conjugate(&self) -> Self {
        self.conj()
    }
}

impl<S: Sample<T>, T: Real> Bilinear<S> for StatePair<Samples<S, T>> {
    fn pairing(&self, other: &Self) -> Result<S> {
        Ok(self.first.pairing(&other.first)? + self.second.pairing(&other.second)?)
    }

    fn conjugate(&self) -> Self {
        self.conj()
    }
}

pub fn pairing<S, X: Bilinear<S>>(u: &X, v: &X) -> Result<S> {
    u.pairing(v)
}

/// `⟨u, v⟩ = Re (u, v̄)`.
pub fn real_pairing<S: Sample<T>, T: Real, X: Bilinear<S>>(u: &X, v: &X) -> Result<T> {
    Ok(u.pairing(&v.conjugate())?.to_complex().re)
}

/// `Ω(u, v) = ⟨J⁻¹u, v⟩`.
pub fn symplectic_form<S: Sample<T>, T: Real>(
    u: &StatePair<Samples<S, T>>,
    v: &StatePair<Samples<S, T>>,
) -> Result<T> {
    real_pairing(&u.apply_j_inv(), v)
}

/// First or second derivative: 4th-order finite differences on clamped grids
/// (one-sided near the ends), spectral on periodic grids.
pub fn derivative<S: Sample<T>, T: Real>(f: &Samples<S, T>, order: u8) -> Result<Samples<S, T>> {
    if order != 1 && order != 2 {
        return Err(Error::InvalidInput(format!("derivative order must be 1 or 2, got {order}")));
    }
    match f.grid().boundary() {
        Boundary::Periodic => {
            let out = if order == 1 {
                let n = f.len();
                spectral_apply(f, |j, k| {
                    if 2 * j == n {
                        Complex::new(T::zero(), T::zero())
                    } else {
                        Complex::new(T::zero(), k)
                    }
                })
            } else {
                spectral_apply(f, |_, k| Complex::new(-k * k, T::zero()))
            };
            Ok(out)
        }
        Boundary::Clamped => Ok(fd_derivative(f, order)),
    }
}

fn fd_derivative<S: Sample<T>, T: Real>(f: &Samples<S, T>, order: u8) -> Samples<S, T> {
    let v = f.values();
    let n = v.len();
    let h = f.grid().spacing();
    let c = |x: f64| T::of(x);
    let mut out = vec![S::zero(); n];
    if order == 1 {
        let s = T::one() / (c(12.0) * h);
        for i in 2..n - 2 {
            out[i] = (v[i - 2] - v[i - 1] * c(8.0) + v[i + 1] * c(8.0) - v[i + 2]) * s;
        }
        out[0] = (v[0] * c(-25.0) + v[1] * c(48.0) + v[2] * c(-36.0) + v[3] * c(16.0) + v[4] * c(-3.0)) * s;
        out[1] = (v[0] * c(-3.0) + v[1] * c(-10.0) + v[2] * c(18.0) + v[3] * c(-6.0) + v[4]) * s;
        let m = n - 1;
        out[m] = -(v[m] * c(-25.0) + v[m - 1] * c(48.0) + v[m - 2] * c(-36.0) + v[m - 3] * c(16.0)
            + v[m - 4] * c(-3.0))
            * s;
        out[m - 1] =
            -(v[m] * c(-3.0) + v[m - 1] * c(-10.0) + v[m - 2] * c(18.0) + v[m - 3] * c(-6.0) + v[m - 4]) * s;
    } else {
        let s = T::one() / (c(12.0) * h * h);
        for i in 2..n - 2 {
            out[i] = (-v[i - 2] + v[i - 1] * c(16.0) + v[i] * c(-30.0) + v[i + 1] * c(16.0) - v[i + 2]) * s;
        }
        let m = n - 1;
        let one_sided0 = |a: &dyn Fn(usize) -> S| {
            a(0) * c(45.0) + a(1) * c(-154.0) + a(2) * c(214.0) + a(3) * c(-156.0) + a(4) * c(61.0)
                + a(5) * c(-10.0)
        };
        let one_sided1 = |a: &dyn Fn(usize) -> S| {
            a(0) * c(10.0) + a(1) * c(-15.0) + a(2) * c(-4.0) + a(3) * c(14.0) + a(4) * c(-6.0) + a(5)
        };
        out[0] = one_sided0(&|k| v[k]) * s;
        out[1] = one_sided1(&|k| v[k]) * s;
        out[m] = one_sided0(&|k| v[m - k]) * s;
        out[m - 1] = one_sided1(&|k| v[m - k]) * s;
    }
    Samples::new(*f.grid(), out).expect("same length")
}

/// Applies a Fourier symbol `σ(j, k)` mode-wise (`j` FFT index, `k` angular wavenumber)
/// treating the samples as one period.
pub fn spectral_apply<S: Sample<T>, T: Real>(
    f: &Samples<S, T>,
    symbol: impl Fn(usize, T) -> Complex<T>,
) -> Samples<S, T> {
    let n = f.len();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<T>> = f.values().iter().map(|v| v.to_complex()).collect();
    fwd.process(&mut buf);
    let ks = f.grid().wavenumbers();
    let inv_n = T::one() / T::from_usize(n).unwrap();
    for (j, (b, &k)) in buf.iter_mut().zip(&ks).enumerate() {
        *b = *b * symbol(j, k) * inv_n;
    }
    inv.process(&mut buf);
    let values = buf.into_iter().map(S::from_complex).collect();
    Samples::new(*f.grid(), values).expect("same length")
}

/// Fourier multiplier `⟨iε∂ₓ⟩^exponent = (1 + ε²k²)^(exponent/2)`; periodic grids only.
pub fn bessel_multiplier<S: Sample<T>, T: Real>(f: &Samples<S, T>, eps: T, exponent: i32) -> Result<Samples<S, T>> {
    if !f.grid().is_periodic() {
        return Err(Error::Unsupported(
            "Fourier multipliers need a periodic grid; window the field and use a periodic view".into(),
        ));
    }
    if eps < T::zero() {
        return Err(Error::InvalidInput("eps must be nonnegative".into()));
    }
    if eps == T::zero() || exponent == 0 {
        return Ok(f.clone());
    }
    let half = T::of(exponent as f64 / 2.0);
    Ok(spectral_apply(f, |_, k| {
        let s = (T::one() + eps * eps * k * k).powf(half);
        Complex::new(s, T::zero())
    }))
}

/// Quintic smoothstep on [0, 1] (C² at both ends).
pub fn smoothstep<T: Real>(t: T) -> T {
    if t <= T::zero() {
        T::zero()
    } else if t >= T::one() {
        T::one()
    } else {
        t * t * t * (T::of(10.0) + t * (T::of(-15.0) + t * T::of(6.0)))
    }
}

/// Smooth cutoff equal to 1 on |x| ≤ (fraction - 0.1)·X and 0 for |x| ≥ fraction·X.
pub fn window<T: Real>(grid: &super::grid::Grid<T>, fraction: T) -> RealField<T> {
    let x_hi = fraction * grid.half_width();
    let x_lo = (fraction - T::of(0.1)).max(T::zero()) * grid.half_width();
    Samples::from_fn(*grid, |x| T::one() - smoothstep((x.abs() - x_lo) / (x_hi - x_lo)))
}

/// Windows `f` inside 0.9·X and reinterprets the samples as one period.
pub fn periodize<S: Sample<T>, T: Real>(f: &Samples<S, T>) -> Samples<S, T> {
    let w = window(f.grid(), T::of(0.9));
    let values: Vec<S> = f.values().iter().zip(w.values()).map(|(&a, &b)| a * b).collect();
    Samples::new(f.grid().as_periodic_view(), values).expect("same length")
}

/// Undoes the grid reinterpretation of [`periodize`].
pub fn reattach<S: Sample<T>, T: Real>(f: Samples<S, T>, grid: &super::grid::Grid<T>) -> Samples<S, T> {
    Samples::new(*grid, f.into_values()).expect("same length")
}
