//! Refined profile `φ[z] = Σ_{m∈NR} zᵐ φ_m`, the frequency corrections `λ_{n,j}`,
//! the vector field `z̃(z)`, the remainder `R[z]`, the sources `G_m` and the
//! coefficients `γ_m` of the Fermi Golden Rule.
//!
//! Conventions: `J(a, b) = (b, −a)`, the linear part is `𝐋₁ = diag(L₁, 1)`,
//! `f[u] = (f(u₁), 0)` and `Ω(u, v) = ⟨J⁻¹u, v⟩`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::field::{symplectic_form, Bilinear};
use crate::multiindex::{build_tables, IndexTables, MultiIndex};
use crate::spectral::{SchrodingerOperator, Spectrum};
use crate::{CField, CPair, Complex64, Field, Pair};

/// Pairing-vector size below which the Fermi Golden Rule assumption is reported as failed.
pub const FGR_TOL: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Polynomial nonlinearity `f(u) = Σ_ℓ c_ℓ u^ℓ` with `c₀ = c₁ = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nonlinearity {
    coeffs: Vec<f64>,
}

impl Nonlinearity {
    /// `coeffs[ℓ]` multiplies `u^ℓ`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().take(2).any(|&c| c != 0.0) {
            return Err(Error::InvalidInput("nonlinearity must satisfy f(0) = f'(0) = 0".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite nonlinearity coefficient".into()));
        }
        let mut coeffs = coeffs;
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Ok(Self { coeffs })
    }

    /// `c·u^p`.
    pub fn monomial(p: usize, c: f64) -> Result<Self> {
        let mut v = vec![0.0; p + 1];
        v[p] = c;
        Self::new(v)
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn coeff(&self, l: usize) -> f64 {
        self.coeffs.get(l).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (l, &c)| acc * u + l as f64 * c)
    }

    /// `F(u) = ∫₀ᵘ f`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        self.coeffs.iter().enumerate().map(|(l, &c)| c * u.powi(l as i32 + 1) / (l as f64 + 1.0)).sum()
    }

    pub fn apply(&self, u: &Field) -> Field {
        u.map(|v| self.eval(v))
    }
}

/// `m₊ₖ z^{m−eᵏ}` (or `m₋ₖ z^{m−ēᵏ}` when `bar`), computed by decrementing the exponent.
fn dz_power(m: &MultiIndex, z: &[Complex64], k: usize, bar: bool) -> Complex64 {
    let e = if bar { m.minus[k] } else { m.plus[k] };
    if e == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut d = m.clone();
    if bar {
        d.minus[k] -= 1;
    } else {
        d.plus[k] -= 1;
    }
    d.z_power(z) * e as f64
}

/// `∂²zᵐ` along the directions `(k, bar_k)` and `(l, bar_l)`.
fn dz2_power(m: &MultiIndex, z: &[Complex64], k: usize, bk: bool, l: usize, bl: bool) -> Complex64 {
    let e1 = if bk { m.minus[k] } else { m.plus[k] };
    if e1 == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let mut d = m.clone();
    if bk {
        d.minus[k] -= 1;
    } else {
        d.plus[k] -= 1;
    }
    dz_power(&d, z, l, bl) * e1 as f64
}

/// Tangent basis `e₁, ie₁, …, e_N, ie_N` as complex vectors.
pub fn tangent_basis(n: usize) -> Vec<Vec<Complex64>> {
    (0..2 * n)
        .map(|b| {
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            w[b / 2] = if b % 2 == 0 { Complex64::new(1.0, 0.0) } else { I };
            w
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FgrEntry {
    pub index: MultiIndex,
    /// `m·λ`.
    pub omega: f64,
    pub gamma: f64,
    /// `(G_m, conj lift(g¹))` for unit incoming waves from the left and from the right.
    pub pairing_left: Complex64,
    pub pairing_right: Complex64,
    /// Phase `θ` with `g_m = e^{iθ} lift(g¹_left)`.
    pub phase: f64,
    pub assumption_ok: bool,
}

#[derive(Clone, Debug)]
pub struct RefinedProfile {
    op: SchrodingerOperator,
    spec: Spectrum,
    tables: IndexTables,
    lambda: Vec<f64>,
    nonlinearity: Nonlinearity,
    coeffs: BTreeMap<MultiIndex, CPair>,
    sources: BTreeMap<MultiIndex, CPair>,
    freq_corrections: BTreeMap<(MultiIndex, usize), f64>,
    fgr_sources: BTreeMap<MultiIndex, CPair>,
    fgr: Vec<FgrEntry>,
    fgr_modes: BTreeMap<MultiIndex, CPair>,
    delta1: f64,
}

#[derive(Serialize, Deserialize)]
struct StoredProfile {
    op: SchrodingerOperator,
    spec: Spectrum,
    tables: IndexTables,
    lambda: Vec<f64>,
    nonlinearity: Nonlinearity,
    coeffs: Vec<(MultiIndex, CPair)>,
    sources: Vec<(MultiIndex, CPair)>,
    freq_corrections: Vec<(MultiIndex, usize, f64)>,
    fgr_sources: Vec<(MultiIndex, CPair)>,
    fgr: Vec<FgrEntry>,
    fgr_modes: Vec<(MultiIndex, CPair)>,
    delta1: f64,
}

struct Builder<'a> {
    op: &'a SchrodingerOperator,
    spec: &'a Spectrum,
    tables: &'a IndexTables,
    lambda: &'a [f64],
    nonlinearity: &'a Nonlinearity,
    coeffs: BTreeMap<MultiIndex, CPair>,
    sources: BTreeMap<MultiIndex, CPair>,
    freq: BTreeMap<(MultiIndex, usize), f64>,
    powers: HashMap<(usize, MultiIndex), Option<CField>>,
}

impl<'a> Builder<'a> {
    fn zero_field(&self) -> CField {
        CField::zeros(*self.op.grid())
    }

    /// Coefficient of `zᵐ` in `(Σ_{NR} zᵐ φ₁_m)^ℓ`.
    fn power(&mut self, l: usize, m: &MultiIndex) -> Option<CField> {
        if let Some(p) = self.powers.get(&(l, m.clone())) {
            return p.clone();
        }
        let out = if l == 1 {
            self.coeffs.get(m).filter(|_| !m.is_zero()).map(|c| c.first.clone())
        } else {
            let parts: Vec<MultiIndex> = self
                .coeffs
                .keys()
                .filter(|k| !k.is_zero() && (k.order() as usize) + (l - 1) <= m.order() as usize)
                .cloned()
                .collect();
            let mut acc: Option<CField> = None;
            for k in parts {
                let Some(rest) = m.checked_sub(&k) else { continue };
                let Some(tail) = self.power(l - 1, &rest) else { continue };
                let head = &self.coeffs[&k].first;
                let prod = head * &tail;
                match acc.as_mut() {
                    Some(a) => a.axpy(Complex64::new(1.0, 0.0), &prod),
                    None => acc = Some(prod),
                }
            }
            acc
        };
        self.powers.insert((l, m.clone()), out.clone());
        out
    }

    fn h(&mut self, m: &MultiIndex) -> CField {
        let mut acc = self.zero_field();
        for l in 2..=(m.order() as usize).min(self.tables.big_m as usize) {
            let c = self.nonlinearity.coeff(l);
            if c == 0.0 {
                continue;
            }
            if let Some(p) = self.power(l, m) {
                acc.axpy(Complex64::new(c, 0.0), &p);
            }
        }
        acc
    }

    /// `λ_n · m' = Σₖ (m'₊ₖ − m'₋ₖ) λ_{n,k}`.
    fn correction_dot(&self, n: &MultiIndex, mp: &MultiIndex) -> f64 {
        (0..self.lambda.len())
            .map(|k| {
                let lnk = self.freq.get(&(n.clone(), k)).copied().unwrap_or(0.0);
                (mp.plus[k] as f64 - mp.minus[k] as f64) * lnk
            })
            .sum()
    }

    /// `ℰ_m = J h_m − Σ_{m'+n'=m, n'∈Λ₀} i(λ_{n'}·m') φ_{m'}`, skipping the order-one term `skip`.
    fn source(&mut self, m: &MultiIndex, skip: Option<&MultiIndex>) -> Result<CPair> {
        let h = self.h(m);
        let mut e = CPair::new(self.zero_field(), -&h)?;
        for n in self.tables.lambda0.clone() {
            let Some(mp) = m.checked_sub(&n) else { continue };
            if Some(&mp) == skip || mp.is_zero() {
                continue;
            }
            let Some(phi) = self.coeffs.get(&mp) else { continue };
            let c = self.correction_dot(&n, &mp);
            if c != 0.0 {
                let phi = phi.clone();
                e.axpy(-I * c, &phi);
            }
        }
        Ok(e)
    }

    /// Solves `(J𝐋₁ − iΩ)φ = b`; with `mode = Some(j)` the kernel direction `φⱼ` is excluded.
    fn solve(&self, b: &CPair, omega: f64, mode: Option<usize>) -> Result<CPair> {
        let r = &(-&b.second) - &b.first.scale(I * omega);
        let phi1 = match mode {
            None => self.op.resolvent_apply(omega * omega, &r).map_err(|e| match e {
                Error::Singular(s) => Error::Internal(format!("resolvent at an excluded frequency: {s}")),
                other => other,
            })?,
            Some(j) => {
                let mut out = self.op.resolvent_projected(self.spec, omega * omega, &r)?;
                let scale = r.norm().max(f64::MIN_POSITIVE);
                for (k, phik) in self.spec.eigenfunctions.iter().enumerate() {
                    let phic = CField::from_real(phik);
                    let c = phic.pairing(&r)?;
                    if k == j {
                        if c.norm() > 1e-8 * scale {
                            return Err(Error::Internal(format!(
                                "solvability fails for mode {j}: residual pairing {c}"
                            )));
                        }
                        continue;
                    }
                    out.axpy(c / (self.spec.eigenvalues[k] - omega * omega), &phic);
                }
                out
            }
        };
        let phi2 = &b.first + &phi1.scale(I * omega);
        CPair::new(phi1, phi2)
    }

    fn compute(&mut self, m: &MultiIndex) -> Result<()> {
        let omega = m.dot_lambda(self.lambda);
        if let Some(j) = self.tables.lambda_mode(m) {
            let ej = MultiIndex::unit(self.lambda.len(), j);
            let n = m.checked_sub(&ej).expect("Λⱼ members contain eʲ");
            let k = self.source(m, Some(&ej))?;
            let phi_j = self.spec.matrix_eigvector(j)?;
            let bar = phi_j.conj();
            let num = k.apply_j().pairing(&bar)?;
            let den = I * phi_j.apply_j().pairing(&bar)?;
            let lnj = num / den;
            if lnj.im.abs() > 1e-10 * lnj.norm().max(1.0) {
                return Err(Error::Internal(format!("frequency correction for {m} is not real: {lnj}")));
            }
            self.freq.insert((n, j), lnj.re);
            let mut src = k.clone();
            src.axpy(-I * lnj.re, &phi_j);
            let phi = self.solve(&(-&src), omega, Some(j))?;
            self.sources.insert(m.clone(), src);
            self.coeffs.insert(m.clone(), phi);
        } else {
            let src = self.source(m, None)?;
            let phi = self.solve(&(-&src), omega, None)?;
            self.sources.insert(m.clone(), src);
            self.coeffs.insert(m.clone(), phi);
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        let n = self.lambda.len();
        let grid = *self.op.grid();
        let max_order = self.tables.big_m;
        for order in 0..=max_order {
            let level: Vec<MultiIndex> = self.tables.nr.iter().filter(|m| m.order() == order).cloned().collect();
            for m in &level {
                if self.coeffs.contains_key(m) {
                    continue;
                }
                if order == 0 {
                    self.coeffs.insert(m.clone(), CPair::zeros(grid));
                    continue;
                }
                if order == 1 {
                    let j = (0..n).find(|&j| m.plus[j] == 1 || m.minus[j] == 1).unwrap();
                    let phi = self.spec.matrix_eigvector(j)?;
                    let phi = if m.plus[j] == 1 { phi } else { phi.conj() };
                    self.coeffs.insert(m.clone(), phi);
                    continue;
                }
                let mb = m.conjugate();
                let target = if self.tables.lambda_bar_mode(m).is_some() { mb.clone() } else { m.clone() };
                if !self.coeffs.contains_key(&target) {
                    self.compute(&target)?;
                }
                if target != *m {
                    let c = self.coeffs[&target].conj();
                    let s = self.sources[&target].conj();
                    self.coeffs.insert(m.clone(), c);
                    self.sources.insert(m.clone(), s);
                } else if !self.coeffs.contains_key(&mb) && mb != *m {
                    let c = self.coeffs[m].conj();
                    let s = self.sources[m].conj();
                    self.coeffs.insert(mb.clone(), c);
                    self.sources.insert(mb, s);
                }
            }
        }
        Ok(())
    }
}

impl RefinedProfile {
    pub fn build(op: &SchrodingerOperator, spec: &Spectrum, nonlinearity: &Nonlinearity) -> Result<Self> {
        let lambda = spec.frequencies();
        if lambda.is_empty() {
            return Err(Error::InvalidInput("no discrete modes: nothing to build".into()));
        }
        let tables = build_tables(&lambda, op.mass_sq().sqrt())?;
        Self::build_with_tables(op, spec, tables, nonlinearity)
    }

    pub fn build_with_tables(
        op: &SchrodingerOperator,
        spec: &Spectrum,
        tables: IndexTables,
        nonlinearity: &Nonlinearity,
    ) -> Result<Self> {
        let lambda = spec.frequencies();
        let mut b = Builder {
            op,
            spec,
            tables: &tables,
            lambda: &lambda,
            nonlinearity,
            coeffs: BTreeMap::new(),
            sources: BTreeMap::new(),
            freq: BTreeMap::new(),
            powers: HashMap::new(),
        };
        b.run()?;
        let mut fgr_sources = BTreeMap::new();
        for m in &tables.r_min {
            let e = b.source(m, None)?;
            let pe = CPair::new(spec.project_pc(&e.first)?, spec.project_pc(&e.second)?)?;
            fgr_sources.insert(m.clone(), pe.apply_j_inv());
        }
        let Builder { coeffs, sources, freq, .. } = b;
        let max_norm = coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
        let mut profile = Self {
            op: op.clone(),
            spec: spec.clone(),
            tables,
            lambda,
            nonlinearity: nonlinearity.clone(),
            coeffs,
            sources,
            freq_corrections: freq,
            fgr_sources,
            fgr: Vec::new(),
            fgr_modes: BTreeMap::new(),
            delta1: 0.1 / max_norm.max(f64::MIN_POSITIVE),
        };
        profile.compute_fgr()?;
        Ok(profile)
    }

    pub fn tables(&self) -> &IndexTables {
        &self.tables
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spec
    }

    pub fn operator(&self) -> &SchrodingerOperator {
        &self.op
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiIndex, CPair> {
        &self.coeffs
    }

    pub fn coeff(&self, m: &MultiIndex) -> Option<&CPair> {
        self.coeffs.get(m)
    }

    /// `ℰ_m` of the recursion for each computed coefficient.
    pub fn sources(&self) -> &BTreeMap<MultiIndex, CPair> {
        &self.sources
    }

    pub fn freq_corrections(&self) -> &BTreeMap<(MultiIndex, usize), f64> {
        &self.freq_corrections
    }

    /// `λ_{n,j}` (0-based `j`), zero when undefined.
    pub fn freq_correction(&self, n: &MultiIndex, j: usize) -> f64 {
        self.freq_corrections.get(&(n.clone(), j)).copied().unwrap_or(0.0)
    }

    pub fn fgr_sources(&self) -> &BTreeMap<MultiIndex, CPair> {
        &self.fgr_sources
    }

    pub fn fgr(&self) -> &[FgrEntry] {
        &self.fgr
    }

    pub fn gammas(&self) -> BTreeMap<MultiIndex, f64> {
        self.fgr.iter().map(|e| (e.index.clone(), e.gamma)).collect()
    }

    pub fn fgr_modes(&self) -> &BTreeMap<MultiIndex, CPair> {
        &self.fgr_modes
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    /// Lossless JSON form for caching.
    pub fn to_json(&self) -> Result<String> {
        let entries = |m: &BTreeMap<MultiIndex, CPair>| m.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let stored = StoredProfile {
            op: self.op.clone(),
            spec: self.spec.clone(),
            tables: self.tables.clone(),
            lambda: self.lambda.clone(),
            nonlinearity: self.nonlinearity.clone(),
            coeffs: entries(&self.coeffs),
            sources: entries(&self.sources),
            freq_corrections: self.freq_corrections.iter().map(|((m, j), v)| (m.clone(), *j, *v)).collect(),
            fgr_sources: entries(&self.fgr_sources),
            fgr: self.fgr.clone(),
            fgr_modes: entries(&self.fgr_modes),
            delta1: self.delta1,
        };
        Ok(serde_json::to_string(&stored)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: StoredProfile = serde_json::from_str(text)?;
        Ok(Self {
            op: s.op,
            spec: s.spec,
            tables: s.tables,
            lambda: s.lambda,
            nonlinearity: s.nonlinearity,
            coeffs: s.coeffs.into_iter().collect(),
            sources: s.sources.into_iter().collect(),
            freq_corrections: s.freq_corrections.into_iter().map(|(m, j, v)| ((m, j), v)).collect(),
            fgr_sources: s.fgr_sources.into_iter().collect(),
            fgr: s.fgr,
            fgr_modes: s.fgr_modes.into_iter().collect(),
            delta1: s.delta1,
        })
    }

    fn check_z(&self, z: &[Complex64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::InvalidInput(format!("expected {} amplitudes, got {}", self.dim(), z.len())));
        }
        Ok(())
    }

    fn sum_real(&self, terms: impl Iterator<Item = (Complex64, CPair)>) -> Pair {
        let grid = *self.op.grid();
        let mut a = vec![0.0; grid.len()];
        let mut b = vec![0.0; grid.len()];
        for (c, phi) in terms {
            if c.norm() == 0.0 {
                continue;
            }
            for (i, (p, q)) in phi.first.values().iter().zip(phi.second.values()).enumerate() {
                a[i] += (c * p).re;
                b[i] += (c * q).re;
            }
        }
        Pair::new(Field::new(grid, a).unwrap(), Field::new(grid, b).unwrap()).unwrap()
    }

    /// `φ[z]` (real by the conjugation symmetry).
    pub fn eval_phi(&self, z: &[Complex64]) -> Result<Pair> {
        self.check_z(z)?;
        Ok(self.sum_real(self.coeffs.iter().map(|(m, phi)| (m.z_power(z), phi.clone()))))
    }

    /// `Dφ[z]w`, the derivative along `w` with `z` and `z̄` varied together.
    pub fn eval_dphi(&self, z: &[Complex64], w: &[Complex64]) -> Result<Pair> {
        self.check_z(z)?;
        self.check_z(w)?;
        let n = self.dim();
        Ok(self.sum_real(self.coeffs.iter().map(|(m, phi)| {
            let c: Complex64 = (0..n)
                .map(|k| dz_power(m, z, k, false) * w[k] + dz_power(m, z, k, true) * w[k].conj())
                .sum();
            (c, phi.clone())
        })))
    }

    /// `D²φ[z](w, v)`.
    pub fn eval_d2phi(&self, z: &[Complex64], w: &[Complex64], v: &[Complex64]) -> Result<Pair> {
        self.check_z(z)?;
        let n = self.dim();
        Ok(self.sum_real(self.coeffs.iter().map(|(m, phi)| {
            let mut c = Complex64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    for (bk, wk) in [(false, w[k]), (true, w[k].conj())] {
                        for (bl, vl) in [(false, v[l]), (true, v[l].conj())] {
                            c += dz2_power(m, z, k, bk, l, bl) * wk * vl;
                        }
                    }
                }
            }
            (c, phi.clone())
        })))
    }

    /// `z̃₀ + z̃₁`.
    pub fn ztilde01(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_z(z)?;
        Ok((0..self.dim())
            .map(|k| {
                let mut s = Complex64::new(self.lambda[k], 0.0);
                for ((n, j), l) in &self.freq_corrections {
                    if *j == k {
                        s += n.z_power(z) * *l;
                    }
                }
                I * s * z[k]
            })
            .collect())
    }

    /// `𝐋₁u + f[u]` for a real state.
    pub fn hamiltonian_field(&self, u: &Pair) -> Result<Pair> {
        let mut first = self.op.apply(&u.first)?;
        first.axpy(1.0, &self.nonlinearity.apply(&u.first));
        Pair::new(first, u.second.clone())
    }

    /// `𝓡[z] = J(𝐋₁φ + f[φ]) − Dφ[z](z̃₀ + z̃₁)`.
    pub fn curly_r(&self, z: &[Complex64]) -> Result<Pair> {
        let phi = self.eval_phi(z)?;
        let lhs = self.hamiltonian_field(&phi)?.apply_j();
        let d = self.eval_dphi(z, &self.ztilde01(z)?)?;
        Ok(&lhs - &d)
    }

    /// Gram matrix `M[a][b] = Ω(Dφ w_b, Dφ w_a)` over the tangent basis.
    pub fn gram(&self, z: &[Complex64]) -> Result<(DMatrix<f64>, Vec<Pair>)> {
        let basis = tangent_basis(self.dim());
        let dphis: Vec<Pair> = basis.iter().map(|w| self.eval_dphi(z, w)).collect::<Result<_>>()?;
        let nb = basis.len();
        let mut m = DMatrix::zeros(nb, nb);
        for a in 0..nb {
            for b in 0..nb {
                m[(a, b)] = symplectic_form(&dphis[b], &dphis[a])?;
            }
        }
        Ok((m, dphis))
    }

    /// `z̃₂` from `Ω(𝓡[z] − Dφ z̃₂, Dφ w) = 0` for every basis `w`.
    pub fn ztilde2(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let r = self.curly_r(z)?;
        let (m, dphis) = self.gram(z)?;
        let rhs = DVector::from_iterator(dphis.len(), dphis.iter().map(|d| symplectic_form(&r, d)).collect::<Result<Vec<_>>>()?);
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("symplectic Gram matrix of the tangent space is singular".into()))?;
        Ok((0..self.dim()).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect())
    }

    pub fn ztilde(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let a = self.ztilde01(z)?;
        let b = self.ztilde2(z)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }

    /// `Σ_{R_min} zᵐ G_m`.
    pub fn fgr_term(&self, z: &[Complex64]) -> Result<Pair> {
        self.check_z(z)?;
        Ok(self.sum_real(self.fgr_sources.iter().map(|(m, g)| (m.z_power(z), g.clone()))))
    }

    /// `R[z] = 𝐋₁φ + f[φ] − Σ zᵐG_m − J⁻¹Dφ[z]z̃`.
    pub fn residual_r(&self, z: &[Complex64]) -> Result<Pair> {
        let phi = self.eval_phi(z)?;
        let hf = self.hamiltonian_field(&phi)?;
        let g = self.fgr_term(z)?;
        let d = self.eval_dphi(z, &self.ztilde(z)?)?.apply_j_inv();
        Ok(&(&hf - &g) - &d)
    }

    fn compute_fgr(&mut self) -> Result<()> {
        let mirrored = {
            let v = self.op.potential().values();
            let rev: Vec<f64> = v.iter().rev().copied().collect();
            self.op.with_potential(Field::new(*self.op.grid(), rev)?)?
        };
        let mut entries = Vec::new();
        let mut modes = BTreeMap::new();
        for (m, g) in &self.fgr_sources {
            let omega = m.dot_lambda(&self.lambda);
            let lift = |g1: CField| -> Result<CPair> {
                let g2 = g1.scale(I * omega);
                CPair::new(g1, g2)
            };
            let left = lift(self.op.scattering_state(omega)?.field)?;
            let right = {
                let s = mirrored.scattering_state(omega)?.field;
                let rev: Vec<Complex64> = s.values().iter().rev().copied().collect();
                lift(CField::new(*self.op.grid(), rev)?)?
            };
            let pl = g.pairing(&left.conj())?;
            let pr = g.pairing(&right.conj())?;
            let gamma = pl.norm();
            let phase = pl.arg();
            let ok = (pl.norm_sqr() + pr.norm_sqr()).sqrt() > FGR_TOL;
            modes.insert(m.clone(), left.scale(Complex64::from_polar(1.0, phase)));
            entries.push(FgrEntry {
                index: m.clone(),
                omega,
                gamma,
                pairing_left: pl,
                pairing_right: pr,
                phase,
                assumption_ok: ok,
            });
        }
        self.fgr = entries;
        self.fgr_modes = modes;
        Ok(())
    }

    /// Pointwise-in-`z` checks of the recursion: `‖(J𝐋₁ − iλ·m)φ_m + ℰ_m‖ / ‖ℰ_m‖` per index.
    pub fn recursion_residuals(&self) -> Result<Vec<(MultiIndex, f64)>> {
        let mut out = Vec::new();
        for (m, src) in &self.sources {
            let phi = &self.coeffs[m];
            let omega = m.dot_lambda(&self.lambda);
            let l1 = self.op.apply(&phi.first)?;
            let jl = CPair::new(phi.second.clone(), -&l1)?;
            let mut r = &jl + src;
            r.axpy(-I * omega, phi);
            out.push((m.clone(), r.norm() / src.norm().max(f64::MIN_POSITIVE)));
        }
        Ok(out)
    }

    pub fn report(&self) -> serde_json::Value {
        let norms: Vec<_> = self
            .coeffs
            .iter()
            .map(|(m, c)| json!({"index": m.flat(), "norm": c.norm()}))
            .collect();
        let corr: Vec<_> = self
            .freq_corrections
            .iter()
            .map(|((n, j), v)| json!({"n": n.flat(), "mode": j + 1, "value": v}))
            .collect();
        let fgr: Vec<_> = self
            .fgr
            .iter()
            .map(|e| {
                json!({
                    "index": e.index.flat(),
                    "omega": e.omega,
                    "gamma": e.gamma,
                    "pairing_left": [e.pairing_left.re, e.pairing_left.im],
                    "pairing_right": [e.pairing_right.re, e.pairing_right.im],
                    "source_norm": self.fgr_sources[&e.index].norm(),
                    "assumption_ok": e.assumption_ok,
                })
            })
            .collect();
        json!({
            "tables": self.tables.report(),
            "nonlinearity": self.nonlinearity.coeffs(),
            "coefficient_norms": norms,
            "frequency_corrections": corr,
            "fgr": fgr,
            "delta1": self.delta1,
        })
    }
}

pub fn build_profile(op: &SchrodingerOperator, spec: &Spectrum, nonlinearity: &Nonlinearity) -> Result<RefinedProfile> {
    RefinedProfile::build(op, spec, nonlinearity)
}
