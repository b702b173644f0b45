//! Banded linear algebra: LU with partial pivoting (real or complex) and
//! LDLᵀ inertia counts for symmetric real band matrices.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

pub trait BandScalar:
    Copy
    + Zero
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn magnitude(self) -> f64;
}

impl BandScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl BandScalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug)]
pub struct BandMatrix<E> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<E>,
}

impl<E: BandScalar> BandMatrix<E> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // room for the kl extra superdiagonals created by row interchanges
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![E::zero(); n * width] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.kl + self.ku {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> E {
        self.slot(i, j).map_or(E::zero(), |s| self.data[s])
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: E) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i},{j}) outside the band");
        let s = self.slot(i, j).unwrap();
        self.data[s] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: E) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn matvec(&self, x: &[E]) -> Vec<E> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                let mut acc = E::zero();
                for j in lo..=hi {
                    acc = acc + self.get(i, j) * x[j];
                }
                acc
            })
            .collect()
    }

    /// LU factorization with partial pivoting.
    pub fn factor(&self) -> Result<BandLu<E>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut a = self.clone();
        let mut piv = vec![0usize; n];
        let mut mult = vec![E::zero(); n * kl.max(1)];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.magnitude())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).magnitude();
            for r in k + 1..=last_row {
                let m = a.get(r, k).magnitude();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if best <= scale * 1e-300 {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            piv[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (sk, sp) = (a.slot(k, j), a.slot(p, j));
                    match (sk, sp) {
                        (Some(sk), Some(sp)) => a.data.swap(sk, sp),
                        (Some(sk), None) => {
                            a.data[sk] = E::zero();
                        }
                        (None, Some(sp)) => {
                            a.data[sp] = E::zero();
                        }
                        (None, None) => {}
                    }
                }
            }
            let pivot = a.get(k, k);
            for r in k + 1..=last_row {
                let arj = a.get(r, k);
                if arj.magnitude() == 0.0 {
                    continue;
                }
                let l = arj / pivot;
                mult[k * kl + (r - k - 1)] = l;
                let s = a.slot(r, k).unwrap();
                a.data[s] = E::zero();
                for j in k + 1..=last_col {
                    let akj = a.get(k, j);
                    if let Some(s) = a.slot(r, j) {
                        a.data[s] = a.data[s] - l * akj;
                    }
                }
            }
        }
        Ok(BandLu { u: a, piv, mult })
    }

    pub fn solve(&self, b: &[E]) -> Result<Vec<E>> {
        self.factor()?.solve(b)
    }
}

#[derive(Clone, Debug)]
pub struct BandLu<E> {
    u: BandMatrix<E>,
    piv: Vec<usize>,
    mult: Vec<E>,
}

impl<E: BandScalar> BandLu<E> {
    pub fn solve(&self, b: &[E]) -> Result<Vec<E>> {
        let n = self.u.n;
        if b.len() != n {
            return Err(Error::InvalidInput(format!("rhs has {} entries, matrix has {n}", b.len())));
        }
        let kl = self.u.kl;
        let mut y = b.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                y[r] = y[r] - self.mult[k * kl + (r - k - 1)] * yk;
            }
        }
        let span = self.u.kl + self.u.ku;
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..=(i + span).min(n - 1) {
                acc = acc - self.u.get(i, j) * y[j];
            }
            y[i] = acc / self.u.get(i, i);
        }
        Ok(y)
    }
}

/// Symmetric real band matrix with half bandwidth `bw`.
#[derive(Clone, Debug)]
pub struct SymBand {
    n: usize,
    bw: usize,
    /// `diag[d][i]` holds entry `(i, i + d)`.
    diag: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, diag: (0..=bw).map(|d| vec![0.0; n - d.min(n)]).collect() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j - i <= self.bw, "entry outside the band");
        self.diag[j - i][i] = v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw {
            0.0
        } else {
            self.diag[j - i][i]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] += self.diag[0][i] * x[i];
            for d in 1..=self.bw {
                if i + d < n {
                    let a = self.diag[d][i];
                    y[i] += a * x[i + d];
                    y[i + d] += a * x[i];
                }
            }
        }
        y
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut r = 0.0;
            for j in i.saturating_sub(self.bw)..=(i + self.bw).min(self.n - 1) {
                if j != i {
                    r += self.get(i, j).abs();
                }
            }
            lo = lo.min(self.get(i, i) - r);
            hi = hi.max(self.get(i, i) + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `sigma` (inertia of the LDLᵀ factorization of `A − σ`).
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.n;
        let b = self.bw;
        let scale = self.gershgorin().1.abs().max(self.gershgorin().0.abs()).max(1.0);
        let tiny = scale * 1e-300;
        let mut d = vec![0.0; n];
        // l[i][k] = L(i, i - 1 - k)
        let mut l = vec![vec![0.0; b]; n];
        let mut negatives = 0;
        for i in 0..n {
            let mut di = self.get(i, i) - sigma;
            for k in 1..=b.min(i) {
                let lik = l[i][k - 1];
                di -= lik * lik * d[i - k];
            }
            if di.abs() < tiny {
                di = -tiny;
            }
            d[i] = di;
            if di < 0.0 {
                negatives += 1;
            }
            for j in i + 1..=(i + b).min(n - 1) {
                let mut v = self.get(j, i);
                for k in (j.saturating_sub(b))..i {
                    v -= l[j][j - k - 1] * l[i][i - k - 1] * d[k];
                }
                l[j][j - i - 1] = v / di;
            }
        }
        negatives
    }

    pub fn to_band_matrix(&self, shift: f64) -> BandMatrix<f64> {
        let mut m = BandMatrix::zeros(self.n, self.bw, self.bw);
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=(i + self.bw).min(self.n - 1) {
                let v = self.get(i, j) - if i == j { shift } else { 0.0 };
                m.set(i, j, v);
            }
        }
        m
    }
}
