//! Iterated Darboux chain `V₁ → … → V_{N+1} = V_D`, the first-order factors
//! `A_k f = f' + w_k f`, `A_k* f = −f' + w_k f` (`w_k = ψ_k'/ψ_k`), the smoothing
//! conjugation `𝒯 = ⟨iε∂ₓ⟩^{−N} 𝒜*` with its left inverse, and the `V_D` commutator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{bessel_multiplier, derivative, periodize, reattach, Sample, Samples};
use crate::spectral::{discrete_spectrum, SchrodingerOperator, Spectrum};
use crate::{Field, Pair};

/// Largest allowed gap between the lowest eigenvalue of `L_{k+1}` and the next original one.
pub const REMOVAL_TOL: f64 = 1e-5;

/// Normalized, strictly positive ground state of `op`.
pub fn ground_state(op: &SchrodingerOperator) -> Result<Field> {
    let spec = discrete_spectrum(op)?;
    let psi = spec
        .eigenfunctions
        .into_iter()
        .next()
        .ok_or_else(|| Error::Degenerate("no eigenvalue below the threshold".into()))?;
    let floor = 1e-10 * psi.max_abs();
    if psi.values().iter().any(|&v| v < -floor) {
        return Err(Error::Internal("ground state changes sign".into()));
    }
    let (w, e, _) = riccati_log_derivative(op, spec.eigenvalues[0], &psi)?;
    Ok(integrate_log_derivative(&w, &riccati_rhs(op, e, &w), argmax(&psi)))
}

fn argmax(f: &Field) -> usize {
    let v = f.values();
    (0..v.len()).max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap()).unwrap_or(0)
}

/// `ψ = exp(∫ w)` normalized in L², anchored at node `anchor`; `dw` is `w'`
/// (corrected trapezoid rule).
fn integrate_log_derivative(w: &Field, dw: &[f64], anchor: usize) -> Field {
    let g = *w.grid();
    let h = g.spacing();
    let wv = w.values();
    let n = wv.len();
    let step = |i: usize| 0.5 * h * (wv[i] + wv[i + 1]) - h * h / 12.0 * (dw[i + 1] - dw[i]);
    let mut logpsi = vec![0.0; n];
    for i in anchor + 1..n {
        logpsi[i] = logpsi[i - 1] + step(i - 1);
    }
    for i in (0..anchor).rev() {
        logpsi[i] = logpsi[i + 1] - step(i);
    }
    let psi = Field::new(g, logpsi.iter().map(|l| l.exp()).collect()).expect("same length");
    let nrm = psi.norm();
    psi.scale_real(1.0 / nrm)
}

/// `w' = V + m² − λ² − w²`.
fn riccati_rhs(op: &SchrodingerOperator, lambda_sq: f64, w: &Field) -> Vec<f64> {
    let shift = op.mass_sq() - lambda_sq;
    op.potential().values().iter().zip(w.values()).map(|(v, wi)| v + shift - wi * wi).collect()
}

/// Potential at the midpoint between nodes `i` and `i + 1`.
fn midpoint(v: &[f64], i: usize) -> f64 {
    let n = v.len();
    if i >= 1 && i + 2 < n {
        (-v[i - 1] + 9.0 * v[i] + 9.0 * v[i + 1] - v[i + 2]) / 16.0
    } else {
        0.5 * (v[i] + v[i + 1])
    }
}

/// Integrates `w' = Q − w²`, `Q = V + m² − λ²`, inward from both edges (the stable direction)
/// and returns `w` together with the mismatch at the anchor node.
fn riccati_sweep(op: &SchrodingerOperator, lambda_sq: f64, anchor: usize) -> Result<(Vec<f64>, f64)> {
    let v = op.potential().values();
    let n = v.len();
    let h = op.grid().spacing();
    let shift = op.mass_sq() - lambda_sq;
    let q = |val: f64| val + shift;
    let edge_q = |val: f64| -> Result<f64> {
        let qq = q(val);
        if qq <= 0.0 {
            return Err(Error::Assumption("potential has not decayed at the box edge".into()));
        }
        Ok(qq.sqrt())
    };
    let f = |qq: f64, w: f64| qq - w * w;
    let mut w = vec![0.0; n];
    w[0] = edge_q(v[0])?;
    for i in 0..anchor {
        let (q0, qm, q1) = (q(v[i]), q(midpoint(v, i)), q(v[i + 1]));
        let k1 = f(q0, w[i]);
        let k2 = f(qm, w[i] + 0.5 * h * k1);
        let k3 = f(qm, w[i] + 0.5 * h * k2);
        let k4 = f(q1, w[i] + h * k3);
        w[i + 1] = w[i] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let from_left = w[anchor];
    w[n - 1] = -edge_q(v[n - 1])?;
    for i in (anchor + 1..n).rev() {
        let (q0, qm, q1) = (q(v[i]), q(midpoint(v, i - 1)), q(v[i - 1]));
        let k1 = f(q0, w[i]);
        let k2 = f(qm, w[i] - 0.5 * h * k1);
        let k3 = f(qm, w[i] - 0.5 * h * k2);
        let k4 = f(q1, w[i] - h * k3);
        w[i - 1] = w[i] - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let from_right = w[anchor];
    w[anchor] = 0.5 * (from_left + from_right);
    Ok((w, from_left - from_right))
}

/// Log-derivative of the ground state at (refined) energy `lambda_sq`; returns `(w, λ², mismatch)`.
fn riccati_log_derivative(op: &SchrodingerOperator, lambda_sq: f64, psi: &Field) -> Result<(Field, f64, f64)> {
    let anchor = argmax(psi);
    let mismatch = |e: f64| riccati_sweep(op, e, anchor).map(|r| r.1);
    // secant on the matching condition starting from the discrete eigenvalue
    let mut e0 = lambda_sq;
    let mut f0 = mismatch(e0)?;
    let mut e1 = lambda_sq * (1.0 + 1e-7) + 1e-12;
    let mut f1 = mismatch(e1)?;
    for _ in 0..30 {
        if f1.abs() <= 1e-14 || f1 == f0 {
            break;
        }
        let e2 = e1 - f1 * (e1 - e0) / (f1 - f0);
        e0 = e1;
        f0 = f1;
        e1 = e2;
        f1 = mismatch(e1)?;
    }
    if (e1 - lambda_sq).abs() > 1e-3 * lambda_sq.abs().max(1.0) {
        return Err(Error::NotConverged(format!(
            "log-derivative matching drifted from {lambda_sq} to {e1}"
        )));
    }
    let (w, mis) = riccati_sweep(op, e1, anchor)?;
    Ok((Field::new(*op.grid(), w)?, e1, mis))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepulsiveReport {
    pub pass: bool,
    /// max of `x V_D'`.
    pub max_value: f64,
    /// min of `x V_D'`.
    pub min_value: f64,
    pub tolerance: f64,
    pub sign_ok: bool,
    pub nontrivial: bool,
}

#[derive(Clone, Debug)]
pub struct DarbouxChain {
    base: SchrodingerOperator,
    /// `V₁ … V_{N+1}`.
    potentials: Vec<Field>,
    ground_states: Vec<Field>,
    log_derivs: Vec<Field>,
    /// Energy removed at each step.
    removed: Vec<f64>,
    matching: Vec<f64>,
}

impl DarbouxChain {
    pub fn build(op: &SchrodingerOperator, spec: &Spectrum) -> Result<Self> {
        let n_modes = spec.count();
        let mut potentials = vec![op.potential().clone()];
        let mut ground_states = Vec::with_capacity(n_modes);
        let mut log_derivs = Vec::with_capacity(n_modes);
        let mut removed = Vec::with_capacity(n_modes);
        let mut matching = Vec::with_capacity(n_modes);
        let mut current = op.clone();
        let mut current_spec = spec.clone();
        for k in 0..n_modes {
            if current_spec.count() != n_modes - k {
                return Err(Error::Internal(format!(
                    "step {k}: expected {} bound states, found {}",
                    n_modes - k,
                    current_spec.count()
                )));
            }
            let lowest = current_spec.eigenvalues[0];
            if (lowest - spec.eigenvalues[k]).abs() > REMOVAL_TOL * op.mass_sq() {
                return Err(Error::Internal(format!(
                    "step {k}: lowest eigenvalue {lowest} differs from {}",
                    spec.eigenvalues[k]
                )));
            }
            let psi0 = &current_spec.eigenfunctions[0];
            let (w, lam_sq, mis) = riccati_log_derivative(&current, lowest, psi0)
                .map_err(|e| Error::Internal(format!("step {k}: ground state log-derivative failed: {e}")))?;
            let psi = integrate_log_derivative(&w, &riccati_rhs(&current, lam_sq, &w), argmax(psi0));
            let shift = 2.0 * (op.mass_sq() - lam_sq);
            let vk = current.potential();
            let next = Field::new(
                *op.grid(),
                w.values().iter().zip(vk.values()).map(|(&wi, &vi)| 2.0 * wi * wi - vi - shift).collect(),
            )?;
            current = current.with_potential(next.clone())?;
            current_spec = discrete_spectrum(&current)?;
            potentials.push(next);
            ground_states.push(psi);
            log_derivs.push(w);
            removed.push(lam_sq);
            matching.push(mis);
        }
        if current_spec.count() != 0 {
            return Err(Error::Internal(format!("{} bound states survive the chain", current_spec.count())));
        }
        Ok(Self { base: op.clone(), potentials, ground_states, log_derivs, removed, matching })
    }

    pub fn len(&self) -> usize {
        self.log_derivs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_derivs.is_empty()
    }

    pub fn base(&self) -> &SchrodingerOperator {
        &self.base
    }

    pub fn potentials(&self) -> &[Field] {
        &self.potentials
    }

    pub fn ground_states(&self) -> &[Field] {
        &self.ground_states
    }

    pub fn log_derivs(&self) -> &[Field] {
        &self.log_derivs
    }

    pub fn removed(&self) -> &[f64] {
        &self.removed
    }

    /// Mismatch of the two inward log-derivative sweeps at the matching node, per step.
    pub fn matching_residuals(&self) -> &[f64] {
        &self.matching
    }

    pub fn v_d(&self) -> &Field {
        self.potentials.last().expect("chain has at least V₁")
    }

    /// `L_k` for `k = 0 … N` (0-based, `k = N` is `L_D`).
    pub fn operator(&self, k: usize) -> Result<SchrodingerOperator> {
        self.base.with_potential(self.potentials[k].clone())
    }

    pub fn operator_d(&self) -> Result<SchrodingerOperator> {
        self.operator(self.len())
    }

    fn check_step(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::InvalidInput(format!("step {k} out of range (N = {})", self.len())));
        }
        Ok(())
    }

    fn times_w<S: Sample<f64>>(&self, k: usize, f: &Samples<S>) -> Samples<S> {
        let w = self.log_derivs[k].values();
        f.map_indexed(|i, _, v| v * w[i])
    }

    /// `A_k f = f' + w_k f` (0-based `k`).
    pub fn apply_a<S: Sample<f64>>(&self, k: usize, f: &Samples<S>) -> Result<Samples<S>> {
        self.check_step(k)?;
        self.base.grid().check_same(f.grid())?;
        Ok(&derivative(f, 1)? + &self.times_w(k, f))
    }

    /// `A_k* f = −f' + w_k f` (0-based `k`).
    pub fn apply_a_star<S: Sample<f64>>(&self, k: usize, f: &Samples<S>) -> Result<Samples<S>> {
        self.check_step(k)?;
        self.base.grid().check_same(f.grid())?;
        Ok(&self.times_w(k, f) - &derivative(f, 1)?)
    }

    /// `𝒜 = A_1 ⋯ A_N`.
    pub fn big_a<S: Sample<f64>>(&self, f: &Samples<S>) -> Result<Samples<S>> {
        let mut out = f.clone();
        for k in (0..self.len()).rev() {
            out = self.apply_a(k, &out)?;
        }
        Ok(out)
    }

    /// `𝒜* = A_N* ⋯ A_1*`.
    pub fn big_a_star<S: Sample<f64>>(&self, f: &Samples<S>) -> Result<Samples<S>> {
        let mut out = f.clone();
        for k in 0..self.len() {
            out = self.apply_a_star(k, &out)?;
        }
        Ok(out)
    }

    /// `‖𝒜*L₁f − L_D𝒜*f‖ / ‖f‖`.
    pub fn check_conjugation(&self, f: &Field) -> Result<f64> {
        let lhs = self.big_a_star(&self.base.apply(f)?)?;
        let rhs = self.operator_d()?.apply(&self.big_a_star(f)?)?;
        Ok((&lhs - &rhs).norm() / f.norm().max(f64::MIN_POSITIVE))
    }

    /// `‖𝒜𝒜*f − Π(L₁ − λⱼ²)f‖ / ‖f‖`.
    pub fn check_factorization(&self, f: &Field) -> Result<f64> {
        let lhs = self.big_a(&self.big_a_star(f)?)?;
        let mut rhs = f.clone();
        for &e in &self.removed {
            let mut next = self.base.apply(&rhs)?;
            next.axpy(-e, &rhs);
            rhs = next;
        }
        Ok((&lhs - &rhs).norm() / f.norm().max(f64::MIN_POSITIVE))
    }

    /// `x V_D' ≤ tol` everywhere and `< −tol` somewhere.
    pub fn check_repulsive(&self, tol: f64) -> Result<RepulsiveReport> {
        let vd = self.v_d();
        let dv = derivative(vd, 1)?;
        let g = vd.grid();
        // the outermost nodes carry one-sided stencils and the zero-extension artifacts
        let xs: Vec<f64> = (0..g.len())
            .filter(|&i| g.x(i).abs() <= 0.95 * g.half_width())
            .map(|i| g.x(i) * dv.values()[i])
            .collect();
        let max_value = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_value = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let sign_ok = max_value <= tol;
        let nontrivial = min_value < -tol;
        Ok(RepulsiveReport { pass: sign_ok && nontrivial, max_value, min_value, tolerance: tol, sign_ok, nontrivial })
    }

    /// Checks `|V_D(±X)| ≤ C e^{−rate·X}` with `C` fitted on the inner half of the box.
    pub fn check_vd_decay(&self, rate: f64) -> Result<()> {
        self.base.with_potential(self.v_d().clone())?.check_decay(rate)
    }

    fn multiplier<S: Sample<f64>>(&self, f: &Samples<S>, eps: f64, exponent: i32) -> Result<Samples<S>> {
        if self.is_empty() || eps == 0.0 {
            return Ok(f.clone());
        }
        let p = bessel_multiplier(&periodize(f), eps, exponent)?;
        Ok(reattach(p, f.grid()))
    }

    /// `⟨iε∂ₓ⟩^{−N} 𝒜* f` for a scalar field.
    pub fn t_scalar<S: Sample<f64>>(&self, eps: f64, f: &Samples<S>) -> Result<Samples<S>> {
        self.multiplier(&self.big_a_star(f)?, eps, -(self.len() as i32))
    }

    /// `v = 𝒯η`, componentwise.
    pub fn t_apply(&self, eps: f64, eta: &Pair) -> Result<Pair> {
        Pair::new(self.t_scalar(eps, &eta.first)?, self.t_scalar(eps, &eta.second)?)
    }

    /// `Π R_{L₁}(λⱼ²) P_c 𝒜 ⟨iε∂ₓ⟩^N v`.
    pub fn t_left_inverse<S: Sample<f64>>(&self, spec: &Spectrum, eps: f64, v: &Samples<S>) -> Result<Samples<S>> {
        let up = self.multiplier(v, eps, self.len() as i32)?;
        let mut u = spec.project_pc(&self.big_a(&up)?)?;
        for &e in &self.removed {
            u = self.base.resolvent_projected(spec, e, &u)?;
        }
        Ok(u)
    }

    /// `⟨iε∂ₓ⟩^{−N}(V_D 𝒜*f) − V_D ⟨iε∂ₓ⟩^{−N}(𝒜*f)`.
    pub fn commutator_vd<S: Sample<f64>>(&self, eps: f64, f: &Samples<S>) -> Result<Samples<S>> {
        let af = self.big_a_star(f)?;
        let vd = self.v_d().values();
        let n = -(self.len() as i32);
        let left = self.multiplier(&af.map_indexed(|i, _, s| s * vd[i]), eps, n)?;
        let right = self.multiplier(&af, eps, n)?.map_indexed(|i, _, s| s * vd[i]);
        Ok(&left - &right)
    }
}

pub fn build_chain(op: &SchrodingerOperator, spec: &Spectrum) -> Result<DarbouxChain> {
    DarbouxChain::build(op, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Grid;

    #[test]
    fn single_step_removes_the_well() {
        let g = Grid::clamped(20.0, 1601).unwrap();
        let op = SchrodingerOperator::from_fn(g, |x| -2.0 / x.cosh().powi(2), 4.0, 4).unwrap();
        let spec = discrete_spectrum(&op).unwrap();
        let chain = build_chain(&op, &spec).unwrap();
        assert_eq!(chain.len(), 1);
        assert!(chain.v_d().max_abs() < 1e-5, "{}", chain.v_d().max_abs());
    }
}
