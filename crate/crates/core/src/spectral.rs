//! Discretized Schrödinger operators `L = −∂ₓ² + V + m²`: bound states, the
//! continuous-spectrum projection, resolvents and scattering states.
//!
//! All solves use the Dirichlet band matrix of the finite-difference stencil
//! (values outside the box are taken to be zero), whatever the grid boundary.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::banded::{BandLu, BandMatrix, SymBand};
use crate::error::{Error, Result};
use crate::field::{Bilinear, Sample, Samples};
use crate::{CField, CPair, Field, Grid};

/// Relative distance to an eigenvalue below which a plain resolvent solve is refused.
pub const SINGULAR_TOL: f64 = 1e-9;
/// Eigenvalues within this fraction of `m²` below the threshold are rejected.
pub const THRESHOLD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchrodingerOperator {
    grid: Grid,
    potential: Field,
    mass_sq: f64,
    stencil_order: usize,
}

impl SchrodingerOperator {
    pub fn new(potential: Field, mass_sq: f64, stencil_order: usize) -> Result<Self> {
        if stencil_order != 2 && stencil_order != 4 {
            return Err(Error::InvalidInput(format!("stencil order must be 2 or 4, got {stencil_order}")));
        }
        if !(mass_sq > 0.0) {
            return Err(Error::InvalidInput(format!("mass squared must be positive, got {mass_sq}")));
        }
        if !potential.all_finite() {
            return Err(Error::InvalidInput("potential has non-finite samples".into()));
        }
        let min_points = if stencil_order == 4 { 5 } else { 3 };
        if potential.len() < min_points {
            return Err(Error::InvalidGrid(format!("need at least {min_points} points")));
        }
        Ok(Self { grid: *potential.grid(), potential, mass_sq, stencil_order })
    }

    pub fn from_fn(grid: Grid, v: impl Fn(f64) -> f64, mass_sq: f64, stencil_order: usize) -> Result<Self> {
        Self::new(Field::from_fn(grid, v), mass_sq, stencil_order)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn mass_sq(&self) -> f64 {
        self.mass_sq
    }

    pub fn stencil_order(&self) -> usize {
        self.stencil_order
    }

    /// Same operator with another potential.
    pub fn with_potential(&self, potential: Field) -> Result<Self> {
        self.grid.check_same(potential.grid())?;
        Self::new(potential, self.mass_sq, self.stencil_order)
    }

    /// `−∂ₓ²` stencil: coefficient of offsets 0, ±1, ±2.
    pub fn stencil(&self) -> Vec<f64> {
        let h2 = self.grid.spacing() * self.grid.spacing();
        match self.stencil_order {
            2 => vec![2.0 / h2, -1.0 / h2],
            _ => vec![2.5 / h2, -4.0 / 3.0 / h2, 1.0 / 12.0 / h2],
        }
    }

    /// Symbol of the discrete `−∂ₓ²` at `θ = kh`, times `h²`.
    fn symbol_scaled(&self, theta: f64) -> f64 {
        match self.stencil_order {
            2 => 2.0 - 2.0 * theta.cos(),
            _ => 2.5 - 8.0 / 3.0 * theta.cos() + (2.0 * theta).cos() / 6.0,
        }
    }

    /// Checks `|V| ≤ C e^{−a₁|x|}` at the box edge, `C` fitted on the inner half of the box.
    pub fn check_decay(&self, a1: f64) -> Result<()> {
        let g = &self.grid;
        let v = self.potential.values();
        let x_max = g.half_width();
        let c = (0..g.len())
            .filter(|&i| g.x(i).abs() <= 0.5 * x_max)
            .map(|i| v[i].abs() * (a1 * g.x(i).abs()).exp())
            .fold(0.0, f64::max);
        let bound = 10.0 * c.max(f64::MIN_POSITIVE) * (-a1 * x_max).exp() + 1e-14;
        let edge = v[0].abs().max(v[g.len() - 1].abs());
        if edge > bound {
            return Err(Error::Assumption(format!(
                "potential does not decay at rate {a1}: |V(±X)| = {edge:e} exceeds {bound:e}"
            )));
        }
        Ok(())
    }

    /// `(L − shift)` as a symmetric band matrix.
    pub fn to_symband(&self, shift: f64) -> SymBand {
        let n = self.grid.len();
        let st = self.stencil();
        let bw = st.len() - 1;
        let mut a = SymBand::zeros(n, bw);
        let v = self.potential.values();
        for i in 0..n {
            a.set(i, i, st[0] + v[i] + self.mass_sq - shift);
            for d in 1..=bw {
                if i + d < n {
                    a.set(i, i + d, st[d]);
                }
            }
        }
        a
    }

    /// `L f` with zero extension outside the box.
    pub fn apply<S: Sample<f64>>(&self, f: &Samples<S>) -> Result<Samples<S>> {
        self.grid.check_same(f.grid())?;
        let n = self.grid.len();
        let st = self.stencil();
        let bw = st.len() - 1;
        let v = self.potential.values();
        let x = f.values();
        let out = (0..n)
            .map(|i| {
                let mut acc = x[i] * (st[0] + v[i] + self.mass_sq);
                for d in 1..=bw {
                    if i >= d {
                        acc = acc + x[i - d] * st[d];
                    }
                    if i + d < n {
                        acc = acc + x[i + d] * st[d];
                    }
                }
                acc
            })
            .collect();
        Samples::new(self.grid, out)
    }

    /// Number of discrete eigenvalues strictly below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        self.to_symband(0.0).count_below(sigma)
    }

    fn near_eigenvalue(&self, omega: f64) -> bool {
        let tol = SINGULAR_TOL * omega.abs().max(1.0);
        let a = self.to_symband(0.0);
        a.count_below(omega - tol) != a.count_below(omega + tol)
    }

    fn factor_shifted(&self, omega: f64) -> Result<BandLu<f64>> {
        self.to_symband(0.0).to_band_matrix(omega).factor()
    }

    /// Solves `(L − ω) g = f`.
    pub fn resolvent_apply<S: Sample<f64>>(&self, omega: f64, f: &Samples<S>) -> Result<Samples<S>> {
        self.grid.check_same(f.grid())?;
        if self.near_eigenvalue(omega) {
            return Err(Error::Singular(format!("ω = {omega} is an eigenvalue of the discretized operator")));
        }
        let lu = self.factor_shifted(omega)?;
        solve_split(&lu, f)
    }

    /// Solves `(L − ω) g = P_c f` on the range of `P_c`; `ω` may be a discrete eigenvalue.
    pub fn resolvent_projected<S: Sample<f64>>(
        &self,
        spec: &Spectrum,
        omega: f64,
        f: &Samples<S>,
    ) -> Result<Samples<S>> {
        self.grid.check_same(f.grid())?;
        let rhs = spec.project_pc(f)?;
        let shift = if self.near_eigenvalue(omega) { omega + 1e-7 * omega.abs().max(1.0) } else { omega };
        let lu = self.factor_shifted(shift)?;
        let mut g = spec.project_pc(&solve_split(&lu, &rhs)?)?;
        let scale = rhs.norm().max(f64::MIN_POSITIVE);
        for _ in 0..8 {
            let lg = self.apply(&g)?;
            let mut r = rhs.clone();
            r.axpy(S::from_real(-1.0), &lg);
            r.axpy(S::from_real(omega), &g);
            let r = spec.project_pc(&r)?;
            if r.norm() <= 1e-14 * scale {
                break;
            }
            let dg = spec.project_pc(&solve_split(&lu, &r)?)?;
            g.axpy(S::from_real(1.0), &dg);
        }
        Ok(g)
    }

    /// Discrete wavenumber `k_h` with symbol equal to `Ω² − m²`.
    pub fn discrete_wavenumber(&self, omega: f64) -> Result<f64> {
        let target = (omega * omega - self.mass_sq) * self.grid.spacing().powi(2);
        let top = self.symbol_scaled(std::f64::consts::PI);
        if !(target > 0.0) || target >= top {
            return Err(Error::InvalidInput(format!("Ω = {omega} is outside the discrete continuum")));
        }
        let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.symbol_scaled(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi) / self.grid.spacing())
    }

    /// Bounded solution of `(L − Ω²) g = 0` with unit incoming wave `e^{ikx}` from the left
    /// and outgoing radiation at both ends. Negative `Ω` returns the conjugate state.
    pub fn scattering_state(&self, omega: f64) -> Result<Scattering> {
        if !(omega * omega > self.mass_sq) {
            return Err(Error::InvalidInput(format!("Ω² = {} must exceed m² = {}", omega * omega, self.mass_sq)));
        }
        if omega < 0.0 {
            let s = self.scattering_state(-omega)?;
            return Ok(Scattering {
                field: s.field.conj(),
                transmission: s.transmission.conj(),
                reflection: s.reflection.conj(),
                wavenumber: s.wavenumber,
            });
        }
        let g = &self.grid;
        let n = g.len();
        let h = g.spacing();
        let k = self.discrete_wavenumber(omega)?;
        let mu = Complex64::from_polar(1.0, k * h);
        let st = self.stencil();
        let bw = st.len() - 1;
        let v = self.potential.values();
        let inc = |x: f64| Complex64::from_polar(1.0, k * x);
        let mut a = BandMatrix::<Complex64>::zeros(n, bw, bw);
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            a.set(i, i, Complex64::new(st[0] + v[i] + self.mass_sq - omega * omega, 0.0));
            for d in 1..=bw {
                if i + d < n {
                    a.set(i, i + d, Complex64::new(st[d], 0.0));
                }
                if i >= d {
                    a.set(i, i - d, Complex64::new(st[d], 0.0));
                }
            }
        }
        // ghost nodes: outgoing continuation of the scattered part beyond each edge
        for i in 0..bw {
            for d in (i + 1)..=bw {
                let depth = (d - i) as i32;
                let c = st[d];
                // left: g_{-p} = inc_{-p} + μ^p (g_0 − inc_0)
                let xg = g.x(0) - depth as f64 * h;
                let mp = mu.powi(depth);
                a.add_to(i, 0, mp * c);
                b[i] -= (inc(xg) - mp * inc(g.x(0))) * c;
                // right: g_{n-1+p} = μ^p g_{n-1}
                let r = n - 1 - i;
                a.add_to(r, n - 1, mp * c);
            }
        }
        let sol = a.solve(&b)?;
        let field = CField::new(*g, sol)?;
        let vals = field.values();
        let reflection = (vals[0] - inc(g.x(0))) * Complex64::from_polar(1.0, k * g.x(0));
        let transmission = vals[n - 1] * Complex64::from_polar(1.0, -k * g.x(n - 1));
        Ok(Scattering { field, transmission, reflection, wavenumber: k })
    }
}

fn solve_split<S: Sample<f64>>(lu: &BandLu<f64>, f: &Samples<S>) -> Result<Samples<S>> {
    let c: Vec<Complex64> = f.values().iter().map(|v| v.to_complex()).collect();
    let re = lu.solve(&c.iter().map(|z| z.re).collect::<Vec<_>>())?;
    let im = if c.iter().any(|z| z.im != 0.0) {
        lu.solve(&c.iter().map(|z| z.im).collect::<Vec<_>>())?
    } else {
        vec![0.0; c.len()]
    };
    Samples::new(
        *f.grid(),
        re.iter().zip(&im).map(|(&r, &i)| S::from_complex(Complex64::new(r, i))).collect(),
    )
}

#[derive(Clone, Debug)]
pub struct Scattering {
    /// `g¹` on the grid.
    pub field: CField,
    pub transmission: Complex64,
    pub reflection: Complex64,
    /// Discrete wavenumber used for the radiation conditions.
    pub wavenumber: f64,
}

/// Bound states below the threshold.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Field>,
    pub residuals: Vec<f64>,
    pub mass_sq: f64,
}

impl Spectrum {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `λⱼ = √(eigenvalue)`.
    pub fn frequencies(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.sqrt()).collect()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.count() {
            return Err(Error::InvalidInput(format!("mode {j} out of range (N = {})", self.count())));
        }
        Ok(())
    }

    /// `Φⱼ = (φⱼ, iλⱼφⱼ)` for the 0-based mode `j`.
    pub fn matrix_eigvector(&self, j: usize) -> Result<CPair> {
        self.check_index(j)?;
        let phi = CField::from_real(&self.eigenfunctions[j]);
        let lam = self.eigenvalues[j].sqrt();
        let second = phi.scale(Complex64::new(0.0, lam));
        CPair::new(phi, second)
    }

    /// `f − Σⱼ (φⱼ, f) φⱼ`.
    pub fn project_pc<S: Sample<f64>>(&self, f: &Samples<S>) -> Result<Samples<S>> {
        let mut out = f.clone();
        for phi in &self.eigenfunctions {
            let phis: Samples<S> = Samples::new(*phi.grid(), phi.values().iter().map(|&v| S::from_real(v)).collect())?;
            let c = phis.pairing(f)?;
            out.axpy(-c, &phis);
        }
        Ok(out)
    }

    pub fn report(&self) -> serde_json::Value {
        json!({
            "mass_sq": self.mass_sq,
            "count": self.count(),
            "eigenvalues": self.eigenvalues,
            "frequencies": self.frequencies(),
            "norms": self.eigenfunctions.iter().map(|f| f.norm()).collect::<Vec<_>>(),
            "residuals": self.residuals,
        })
    }
}

/// All eigenvalues of the discretized operator strictly below `m²`, with normalized eigenfunctions.
pub fn discrete_spectrum(op: &SchrodingerOperator) -> Result<Spectrum> {
    let a = op.to_symband(0.0);
    let m2 = op.mass_sq;
    let count = a.count_below(m2);
    if count != a.count_below(m2 * (1.0 - THRESHOLD_TOL)) {
        return Err(Error::Degenerate(format!("eigenvalue within {THRESHOLD_TOL}·m² of the threshold")));
    }
    let (lo0, _) = a.gershgorin();
    let mut eigenvalues = Vec::with_capacity(count);
    for j in 0..count {
        let (mut lo, mut hi) = (lo0 - 1.0, m2);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if a.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
                break;
            }
        }
        eigenvalues.push(0.5 * (lo + hi));
    }
    if let Some(&e) = eigenvalues.first() {
        if e <= 0.0 {
            return Err(Error::Assumption(format!("lowest eigenvalue {e} is not positive")));
        }
    }
    let grid = op.grid;
    let n = grid.len();
    let mut eigenfunctions: Vec<Field> = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for (j, &lam) in eigenvalues.iter().enumerate() {
        let lu = a.to_band_matrix(lam - 1e-11 * lam.abs().max(1.0)).factor()?;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * ((i as f64 + 0.5) * (j as f64 + 1.3) * 0.017).sin()).collect();
        for _ in 0..4 {
            v = lu.solve(&v)?;
            // keep the iterate orthogonal to the modes already found
            let f = Field::new(grid, v.clone())?;
            let mut f = f;
            for prev in &eigenfunctions {
                let c = prev.pairing(&f)?;
                f.axpy(-c, prev);
            }
            let nrm = f.norm();
            v = f.values().iter().map(|x| x / nrm).collect();
        }
        let mut f = Field::new(grid, v)?;
        orient(&mut f);
        let r = op.apply(&f)?;
        let mut res = r.clone();
        res.axpy(-lam, &f);
        residuals.push(res.norm());
        eigenfunctions.push(f);
    }
    Ok(Spectrum { eigenvalues, eigenfunctions, residuals, mass_sq: m2 })
}

/// Positive at the first significant extremum from the left.
fn orient(f: &mut Field) {
    let v = f.values();
    let peak = f.max_abs();
    let n = v.len();
    let mut sign = 1.0;
    for i in 1..n.saturating_sub(1) {
        let a = v[i].abs();
        if a >= 1e-3 * peak && a >= v[i - 1].abs() && a >= v[i + 1].abs() {
            sign = v[i].signum();
            break;
        }
    }
    if sign < 0.0 {
        for x in f.values_mut() {
            *x = -*x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(depth: f64, mass_sq: f64, x: f64, n: usize) -> SchrodingerOperator {
        let g = Grid::clamped(x, n).unwrap();
        SchrodingerOperator::from_fn(g, |x| -depth / x.cosh().powi(2), mass_sq, 4).unwrap()
    }

    #[test]
    fn bound_state_counts() {
        let s = discrete_spectrum(&pt(1.44, 1.0, 30.0, 2001)).unwrap();
        assert_eq!(s.count(), 1);
        assert!((s.eigenvalues[0] - 0.36).abs() < 1e-3);
        let s = discrete_spectrum(&pt(-1.0, 1.0, 30.0, 1001)).unwrap();
        assert_eq!(s.count(), 0);
    }

    #[test]
    fn plain_resolvent_refuses_eigenvalue() {
        let op = pt(1.44, 1.0, 30.0, 1001);
        let s = discrete_spectrum(&op).unwrap();
        let e = op.resolvent_apply(s.eigenvalues[0], &s.eigenfunctions[0]);
        assert!(matches!(e, Err(Error::Singular(_))));
    }
}
