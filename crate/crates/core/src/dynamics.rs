//! Time integration of `u̇ = J(𝐋₁u + f[u])`, the energy, the modulation
//! decomposition `u = φ[z] + η` and initial data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{pairing, smoothstep, symplectic_form, weighted_norm, NormKind, WeightParams};
use crate::profile::{tangent_basis, Nonlinearity, RefinedProfile};
use crate::spectral::SchrodingerOperator;
use crate::{Complex64, Field, Pair};

pub const NEWTON_TOL: f64 = 1e-11;
pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sponge {
    None,
    Layer { strength: f64, onset: f64 },
}

impl Default for Sponge {
    fn default() -> Self {
        Sponge::Layer { strength: 0.5, onset: 0.75 }
    }
}

impl Sponge {
    /// Damping rate `σ(x)`, rising smoothly from 0 at `onset·X` to `strength` at `X`.
    pub fn rate(&self, grid: &crate::Grid) -> Field {
        match *self {
            Sponge::None => Field::zeros(*grid),
            Sponge::Layer { strength, onset } => {
                let xw = grid.half_width();
                let x0 = onset * xw;
                Field::from_fn(*grid, |x| strength * smoothstep((x.abs() - x0) / (xw - x0)))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Sponge::Layer { strength, onset } = *self {
            if !(strength >= 0.0 && strength.is_finite()) || !(0.0..1.0).contains(&onset) {
                return Err(Error::InvalidInput(format!(
                    "sponge needs strength >= 0 and onset in [0, 1), got {strength}, {onset}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub sponge: Sponge,
    pub sample_every: usize,
    pub delta: f64,
}

impl SimConfig {
    pub fn validate(&self, op: &SchrodingerOperator) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidInput(format!("need dt > 0 and t_end >= 0, got {} and {}", self.dt, self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidInput("sample_every must be at least 1".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be nonnegative, got {}", self.delta)));
        }
        self.sponge.validate()?;
        let w = max_frequency(op);
        if self.dt * w >= 2.0 {
            return Err(Error::InvalidInput(format!(
                "dt = {} violates the stability bound dt < 2/{w:.4} = {:.4e}",
                self.dt,
                2.0 / w
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Upper bound for the largest frequency `√λ_max` of the discretized `L₁`.
pub fn max_frequency(op: &SchrodingerOperator) -> f64 {
    let st = op.stencil();
    let gersh: f64 = st[0].abs() + 2.0 * st[1..].iter().map(|c| c.abs()).sum::<f64>();
    let vmax = op.potential().values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (gersh + vmax + op.mass_sq()).max(0.0).sqrt()
}

/// `L₁f` with the stencil wrapped around on periodic grids and zero extension otherwise.
pub fn apply_l1(op: &SchrodingerOperator, f: &Field) -> Result<Field> {
    let g = op.grid();
    if !g.is_periodic() {
        return op.apply(f);
    }
    g.check_same(f.grid())?;
    let n = g.len();
    let st = op.stencil();
    let v = op.potential().values();
    let x = f.values();
    let m2 = op.mass_sq();
    let out = (0..n)
        .map(|i| {
            let mut acc = x[i] * (st[0] + v[i] + m2);
            for (d, c) in st.iter().enumerate().skip(1) {
                acc += c * (x[(i + n - d) % n] + x[(i + d) % n]);
            }
            acc
        })
        .collect();
    Field::new(*g, out)
}

/// `J(𝐋₁u + f[u]) = (u₂, −(L₁u₁ + f(u₁)))`.
pub fn rhs(op: &SchrodingerOperator, f: &Nonlinearity, u: &Pair) -> Result<Pair> {
    let mut a = apply_l1(op, &u.first)?;
    a.axpy(1.0, &f.apply(&u.first));
    Pair::new(u.second.clone(), -&a)
}

/// `E(u) = ½⟨L₁u₁, u₁⟩ + ½‖u₂‖² + ∫F(u₁)`.
pub fn energy(op: &SchrodingerOperator, f: &Nonlinearity, u: &Pair) -> Result<f64> {
    let lu = apply_l1(op, &u.first)?;
    let quad = 0.5 * pairing(&lu, &u.first)? + 0.5 * pairing(&u.second, &u.second)?;
    Ok(quad + u.first.map(|v| f.antiderivative(v)).integrate())
}

pub fn h1_norm(u: &Pair) -> Result<f64> {
    weighted_norm(u, NormKind::H1, &unit_params())
}

fn unit_params() -> WeightParams {
    WeightParams { a: 1.0, kappa: 1.0, big_a: 1.0, big_b: 1.0, eps: 0.0, a2: 0.0 }
}

/// Störmer–Verlet for `u₁̈ = −(L₁u₁ + f(u₁))` with an optional multiplicative sponge.
#[derive(Clone, Debug)]
pub struct Integrator {
    op: SchrodingerOperator,
    nonlinearity: Nonlinearity,
    dt: f64,
    damping: Option<Vec<f64>>,
    force: Option<Field>,
    t: f64,
}

impl Integrator {
    pub fn new(op: &SchrodingerOperator, nonlinearity: &Nonlinearity, dt: f64, sponge: Sponge) -> Result<Self> {
        sponge.validate()?;
        if !(dt != 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid time step {dt}")));
        }
        if dt.abs() * max_frequency(op) >= 2.0 {
            return Err(Error::InvalidInput(format!("time step {dt} is above the stability bound")));
        }
        let damping = match sponge {
            Sponge::None => None,
            s => Some(s.rate(op.grid()).values().iter().map(|r| (-dt.abs() * r).exp()).collect()),
        };
        Ok(Self { op: op.clone(), nonlinearity: nonlinearity.clone(), dt, damping, force: None, t: 0.0 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    /// Reverses the direction of time.
    pub fn reverse(&mut self) {
        self.dt = -self.dt;
        self.force = None;
    }

    fn force(&self, q: &Field) -> Result<Field> {
        let mut a = apply_l1(&self.op, q)?;
        a.axpy(1.0, &self.nonlinearity.apply(q));
        Ok(-&a)
    }

    pub fn step(&mut self, u: &mut Pair) -> Result<()> {
        let h = self.dt;
        let f0 = match self.force.take() {
            Some(f) => f,
            None => self.force(&u.first)?,
        };
        u.second.axpy(0.5 * h, &f0);
        u.first.axpy(h, &u.second);
        let f1 = self.force(&u.first)?;
        u.second.axpy(0.5 * h, &f1);
        self.t += h;
        match &self.damping {
            Some(d) => {
                for c in [&mut u.first, &mut u.second] {
                    for (v, k) in c.values_mut().iter_mut().zip(d) {
                        *v *= k;
                    }
                }
            }
            None => self.force = Some(f1),
        }
        if !(u.first.all_finite() && u.second.all_finite()) || u.first.max_abs() > 1e150 {
            return Err(Error::BlowUp { t: self.t });
        }
        Ok(())
    }

    pub fn run(&mut self, u: &mut Pair, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step(u)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ModulationPoint {
    pub z: Vec<Complex64>,
    pub eta: Pair,
    pub newton_residual: f64,
    pub iterations: usize,
    /// Largest `|Ω(η, Dφ[z]w)|` over the tangent basis.
    pub orthogonality: f64,
}

/// `z` with `u ≈ zΦ + z̄Φ̄` on the discrete modes.
pub fn linear_guess(profile: &RefinedProfile, u: &Pair) -> Result<Vec<Complex64>> {
    let spec = profile.spectrum();
    spec.eigenfunctions
        .iter()
        .zip(profile.frequencies())
        .map(|(phi, lam)| {
            let re = pairing(&u.first, phi)? / 2.0;
            let im = -pairing(&u.second, phi)? / (2.0 * lam);
            Ok(Complex64::new(re, im))
        })
        .collect()
}

struct Tangent {
    dphis: Vec<Pair>,
}

fn tangents(profile: &RefinedProfile, z: &[Complex64]) -> Result<Tangent> {
    let basis = tangent_basis(profile.dim());
    Ok(Tangent { dphis: basis.iter().map(|w| profile.eval_dphi(z, w)).collect::<Result<_>>()? })
}

fn residual_vector(eta: &Pair, t: &Tangent) -> Result<Vec<f64>> {
    t.dphis.iter().map(|d| symplectic_form(eta, d)).collect()
}

fn jacobian(profile: &RefinedProfile, z: &[Complex64], eta: &Pair, t: &Tangent) -> Result<DMatrix<f64>> {
    let basis = tangent_basis(profile.dim());
    let nb = basis.len();
    let mut m = DMatrix::zeros(nb, nb);
    for a in 0..nb {
        for b in 0..nb {
            let d2 = profile.eval_d2phi(z, &basis[a], &basis[b])?;
            m[(a, b)] = -symplectic_form(&t.dphis[b], &t.dphis[a])? + symplectic_form(eta, &d2)?;
        }
    }
    Ok(m)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Newton iteration for `Ω(u − φ[z], Dφ[z]w) = 0`, started from `guess` or the linear projection.
pub fn modulate(profile: &RefinedProfile, u: &Pair, guess: Option<&[Complex64]>) -> Result<ModulationPoint> {
    let n = profile.dim();
    let mut z = match guess {
        Some(g) => g.to_vec(),
        None => linear_guess(profile, u)?,
    };
    for it in 0..=NEWTON_MAX_ITER {
        let eta = u - &profile.eval_phi(&z)?;
        let t = tangents(profile, &z)?;
        let r = residual_vector(&eta, &t)?;
        let res = max_abs(&r);
        if res < NEWTON_TOL {
            return Ok(ModulationPoint { z, eta, newton_residual: res, iterations: it, orthogonality: res });
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let jac = jacobian(profile, &z, &eta, &t)?;
        let dx = jac
            .lu()
            .solve(&DVector::from_vec(r))
            .ok_or_else(|| Error::NotConverged("singular modulation Jacobian".into()))?;
        for k in 0..n {
            z[k] -= Complex64::new(dx[2 * k], dx[2 * k + 1]);
        }
        if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            break;
        }
    }
    Err(Error::NotConverged(format!(
        "modulation Newton did not reach {NEWTON_TOL:e} in {NEWTON_MAX_ITER} iterations; the state left the small-data regime"
    )))
}

/// `ż` from differentiating the orthogonality conditions along `u̇`.
pub fn modulation_velocity(profile: &RefinedProfile, point: &ModulationPoint, udot: &Pair) -> Result<Vec<Complex64>> {
    let t = tangents(profile, &point.z)?;
    let jac = jacobian(profile, &point.z, &point.eta, &t)?;
    let rhs = DVector::from_vec(t.dphis.iter().map(|d| symplectic_form(udot, d).map(|v| -v)).collect::<Result<Vec<_>>>()?);
    let x = jac.lu().solve(&rhs).ok_or_else(|| Error::NotConverged("singular modulation Jacobian".into()))?;
    Ok((0..profile.dim()).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect())
}

/// Gaussian wave packet `A e^{−((x−c)/w)²}(cos k(x−c), ω sin k(x−c))` moving right for `k > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub wavenumber: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn sample(&self, grid: &crate::Grid, mass: f64) -> Pair {
        let omega = (self.wavenumber * self.wavenumber + mass * mass).sqrt();
        let env = |x: f64| self.amplitude * (-((x - self.center) / self.width).powi(2)).exp();
        let first = Field::from_fn(*grid, |x| env(x) * (self.wavenumber * (x - self.center)).cos());
        let second = Field::from_fn(*grid, |x| env(x) * omega * (self.wavenumber * (x - self.center)).sin());
        Pair::new(first, second).expect("same grid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialKind {
    SingleMode { z0: Vec<[f64; 2]> },
    ModePlusRadiation { z0: Vec<[f64; 2]>, bump: Bump },
    PureRadiation { bump: Bump },
}

#[derive(Clone, Debug)]
pub struct InitialData {
    pub u: Pair,
    /// Modulation parameter of `u` by construction.
    pub z: Vec<Complex64>,
    pub scale: f64,
}

/// Removes the tangent components: the part of `eta` in `𝓗_c[z]`.
pub fn project_continuous(profile: &RefinedProfile, z: &[Complex64], eta: &Pair) -> Result<Pair> {
    let (gram, dphis) = profile.gram(z)?;
    let rhs = DVector::from_vec(dphis.iter().map(|d| symplectic_form(eta, d)).collect::<Result<Vec<_>>>()?);
    let c = gram.lu().solve(&rhs).ok_or_else(|| Error::Degenerate("singular tangent Gram matrix".into()))?;
    let mut out = eta.clone();
    for (b, d) in dphis.iter().enumerate() {
        out.first.axpy(-c[b], &d.first);
        out.second.axpy(-c[b], &d.second);
    }
    Ok(out)
}

fn to_complex(z0: &[[f64; 2]], n: usize) -> Result<Vec<Complex64>> {
    if z0.len() > n {
        return Err(Error::InvalidInput(format!("{} amplitudes given for {n} modes", z0.len())));
    }
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for (k, v) in z0.iter().enumerate() {
        z[k] = Complex64::new(v[0], v[1]);
    }
    Ok(z)
}

/// Builds `φ[s z₀] + P_{s z₀}(s·bump)`, with `s` chosen so that `‖u‖_{𝓗¹} = δ` when `delta` is given.
pub fn make_initial_data(profile: &RefinedProfile, kind: &InitialKind, delta: Option<f64>) -> Result<InitialData> {
    let n = profile.dim();
    let grid = *profile.operator().grid();
    let mass = profile.operator().mass_sq().sqrt();
    let (z0, bump) = match kind {
        InitialKind::SingleMode { z0 } => (to_complex(z0, n)?, None),
        InitialKind::ModePlusRadiation { z0, bump } => (to_complex(z0, n)?, Some(bump.sample(&grid, mass))),
        InitialKind::PureRadiation { bump } => (vec![Complex64::new(0.0, 0.0); n], Some(bump.sample(&grid, mass))),
    };
    let build = |s: f64| -> Result<(Pair, Vec<Complex64>)> {
        let z: Vec<Complex64> = z0.iter().map(|v| v * s).collect();
        let mut u = profile.eval_phi(&z)?;
        if let Some(b) = &bump {
            let eta = project_continuous(profile, &z, &b.scale_real(s))?;
            u = &u + &eta;
        }
        Ok((u, z))
    };
    let Some(delta) = delta else {
        let (u, z) = build(1.0)?;
        return Ok(InitialData { u, z, scale: 1.0 });
    };
    if delta < 0.0 {
        return Err(Error::InvalidInput(format!("delta must be nonnegative, got {delta}")));
    }
    let (u1, _) = build(1.0)?;
    let n1 = h1_norm(&u1)?;
    if delta == 0.0 || n1 == 0.0 {
        return Ok(InitialData { u: Pair::zeros(grid), z: vec![Complex64::new(0.0, 0.0); n], scale: 0.0 });
    }
    // secant on s ↦ ‖u(s)‖ − δ starting from the small-amplitude estimate
    let zero = vec![Complex64::new(0.0, 0.0); n];
    let lin = {
        let mut l = profile.eval_dphi(&zero, &z0)?;
        if let Some(b) = &bump {
            l = &l + &project_continuous(profile, &zero, b)?;
        }
        h1_norm(&l)?
    };
    let mut s0 = delta / if lin > 0.0 { lin } else { n1 };
    let mut f0 = h1_norm(&build(s0)?.0)? - delta;
    let mut s1 = s0 * 1.01;
    let mut f1 = h1_norm(&build(s1)?.0)? - delta;
    for _ in 0..60 {
        if f1.abs() <= 1e-14 * delta {
            break;
        }
        if f1 == f0 {
            break;
        }
        let s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
        s0 = s1;
        f0 = f1;
        s1 = s2;
        f1 = h1_norm(&build(s1)?.0)? - delta;
    }
    if f1.abs() > 1e-12 * delta {
        return Err(Error::NotConverged(format!("could not normalize the initial data to delta = {delta}")));
    }
    let (u, z) = build(s1)?;
    Ok(InitialData { u, z, scale: s1 })
}

/// One sampled point of a trajectory.
#[derive(Clone, Debug)]
pub struct Snapshot<'a> {
    pub step: usize,
    pub t: f64,
    pub u: &'a Pair,
    pub modulation: &'a ModulationPoint,
    pub zdot: &'a [Complex64],
}

/// Integrates from `u0` and hands every `sample_every`-th state, with its modulation, to `observer`.
pub fn simulate(
    profile: &RefinedProfile,
    op: &SchrodingerOperator,
    config: &SimConfig,
    u0: &Pair,
    mut observer: impl FnMut(&Snapshot) -> Result<()>,
) -> Result<Pair> {
    config.validate(op)?;
    let f = profile.nonlinearity();
    let mut integ = Integrator::new(op, f, config.dt, config.sponge)?;
    let mut u = u0.clone();
    let steps = config.steps();
    for step in 0..=steps {
        if step % config.sample_every == 0 {
            let m = modulate(profile, &u, None)?;
            let udot = rhs(op, f, &u)?;
            let zdot = modulation_velocity(profile, &m, &udot)?;
            observer(&Snapshot { step, t: integ.time(), u: &u, modulation: &m, zdot: &zdot })?;
        }
        if step < steps {
            integ.step(&mut u)?;
        }
    }
    Ok(u)
}
