//! Virial weights and functionals, the FGR functional and its correction, the
//! transformed variable and the per-sample diagnostics records.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::darboux::DarbouxChain;
use crate::dynamics::{energy, h1_norm, Snapshot};
use crate::error::{Error, Result};
use crate::field::{derivative, symplectic_form, weighted_norm, Bilinear, NormKind, WeightParams};
use crate::multiindex::MultiIndex;
use crate::profile::RefinedProfile;
use crate::{CPair, Complex64, Field, Grid, Pair};

/// Even cutoff with `1_{[-1,1]} ≤ χ ≤ 1_{[-2,2]}`, C² with `xχ' ≤ 0`.
pub fn chi(x: f64) -> f64 {
    1.0 - crate::field::smoothstep(x.abs() - 1.0)
}

fn chi_d1(x: f64) -> f64 {
    let t = x.abs() - 1.0;
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    -30.0 * t * t * (1.0 - t) * (1.0 - t) * x.signum()
}

/// `∫₀ˣ w` by the trapezoid rule, anchored at the node nearest to 0 and corrected to the exact origin.
fn primitive_from_origin(w: &Field) -> Field {
    let g = w.grid();
    let h = g.spacing();
    let v = w.values();
    let n = v.len();
    // trapezoid with the Euler-Maclaurin end correction
    let dv: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h),
            _ if i == n - 1 => (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * h),
            _ => (v[i + 1] - v[i - 1]) / (2.0 * h),
        })
        .collect();
    let mut cum = vec![0.0; n];
    for i in 1..n {
        cum[i] = cum[i - 1] + 0.5 * h * (v[i - 1] + v[i]) - h * h / 12.0 * (dv[i] - dv[i - 1]);
    }
    let i0 = (0..v.len()).min_by(|&a, &b| g.x(a).abs().partial_cmp(&g.x(b).abs()).unwrap()).unwrap();
    let x0 = g.x(i0);
    let offset = cum[i0] - x0 * v[i0];
    Field::new(*g, cum.iter().map(|c| c - offset).collect()).unwrap()
}

#[derive(Clone, Debug)]
pub struct VirialWeights {
    pub chi_a: Field,
    pub zeta_a: Field,
    pub varphi_a: Field,
    pub zeta_b: Field,
    pub varphi_b: Field,
    pub psi_ab: Field,
    /// `ψ_{A,B}'`.
    pub psi_ab_d: Field,
    pub params: WeightParams,
    /// Whether ζ uses `χ(x/A)` instead of the literal `χ(x)`.
    pub scaled_cutoff: bool,
}

impl VirialWeights {
    pub fn new(grid: &Grid, params: WeightParams, scaled_cutoff: bool) -> Self {
        let a = params.big_a;
        let b = params.big_b;
        let zeta = |s: f64| {
            Field::from_fn(*grid, move |x| {
                let c = if scaled_cutoff { chi(x / s) } else { chi(x) };
                (-x.abs() * (1.0 - c) / s).exp()
            })
        };
        let zeta_a = zeta(a);
        let zeta_b = zeta(b);
        let varphi_a = primitive_from_origin(&(&zeta_a * &zeta_a));
        let varphi_b = primitive_from_origin(&(&zeta_b * &zeta_b));
        let chi_a = Field::from_fn(*grid, |x| chi(x / a));
        let chi_a_d = Field::from_fn(*grid, |x| chi_d1(x / a) / a);
        let psi_ab = &(&chi_a * &chi_a) * &varphi_b;
        // ψ' = 2χ_Aχ_A'φ_B + χ_A²ζ_B²
        let psi_ab_d = &(&(&chi_a * &chi_a_d) * &varphi_b).scale_real(2.0) + &(&(&chi_a * &chi_a) * &(&zeta_b * &zeta_b));
        Self { chi_a, zeta_a, varphi_a, zeta_b, varphi_b, psi_ab, psi_ab_d, params, scaled_cutoff }
    }

    fn dilation(weight: &Field, weight_d: &Field, f: &Field) -> Result<Field> {
        let df = derivative(f, 1)?;
        Ok(&(&(weight_d * f)).scale_real(0.5) + &(weight * &df))
    }

    /// `S_A f = ½φ_A'f + φ_A f'`.
    pub fn s_a(&self, f: &Field) -> Result<Field> {
        Self::dilation(&self.varphi_a, &(&self.zeta_a * &self.zeta_a), f)
    }

    /// `S̃_{A,B} f = ½ψ'f + ψf'`.
    pub fn s_tilde(&self, f: &Field) -> Result<Field> {
        Self::dilation(&self.psi_ab, &self.psi_ab_d, f)
    }

    /// `V_B = ½(ζ_B''/ζ_B − (ζ_B'/ζ_B)²) − ½φ_B V_D'/ζ_B²`.
    pub fn virial_potential(&self, v_d: &Field) -> Result<Field> {
        let lz = self.zeta_b.map(|v| v.ln());
        // ζ''/ζ − (ζ'/ζ)² = (log ζ)''
        let d2 = derivative(&lz, 2)?;
        let dv = derivative(v_d, 1)?;
        let ratio = self.varphi_b.zip_map(&(&self.zeta_b * &self.zeta_b), |p, z| p / z);
        Ok(&d2.scale_real(0.5) - &(&ratio * &dv).scale_real(0.5))
    }
}

fn pair_map(u: &Pair, f: impl Fn(&Field) -> Result<Field>) -> Result<Pair> {
    Pair::new(f(&u.first)?, f(&u.second)?)
}

/// `𝓘_{1st,1} = ½Ω(η, S_Aη)` and `𝓘_{1st,2} = ½Ω(η, σ₃ζ_A⁴η)`.
pub fn virial_first(w: &VirialWeights, eta: &Pair) -> Result<(f64, f64)> {
    let s = pair_map(eta, |f| w.s_a(f))?;
    let z4 = w.zeta_a.map(|v| v.powi(4));
    let t = eta.weighted(&z4).apply_sigma3();
    Ok((0.5 * symplectic_form(eta, &s)?, 0.5 * symplectic_form(eta, &t)?))
}

/// `𝓘_{2nd,1} = ½Ω(v, S̃v)` and `𝓘_{2nd,2} = ½Ω(v, σ₃e^{−κ⟨x⟩}v)`.
pub fn virial_second(w: &VirialWeights, v: &Pair) -> Result<(f64, f64)> {
    let s = pair_map(v, |f| w.s_tilde(f))?;
    let k = w.params.kappa;
    let e = Field::from_fn(*v.grid(), |x| (-k * (1.0 + x * x).sqrt()).exp());
    let t = v.weighted(&e).apply_sigma3();
    Ok((0.5 * symplectic_form(v, &s)?, 0.5 * symplectic_form(v, &t)?))
}

fn complex_sum(profile: &RefinedProfile, z: &[Complex64], items: impl Iterator<Item = (MultiIndex, CPair)>) -> CPair {
    let mut acc = CPair::zeros(*profile.operator().grid());
    for (m, g) in items {
        acc.axpy(m.z_power(z), &g);
    }
    acc
}

/// `𝓙_FGR = Ω(η, χ_A Σ_{R_min} zᵐg_m)` with its imaginary residue.
pub fn fgr_functional(w: &VirialWeights, profile: &RefinedProfile, z: &[Complex64], eta: &Pair) -> Result<(f64, f64)> {
    let sum = complex_sum(profile, z, profile.fgr_modes().iter().map(|(m, g)| (m.clone(), g.clone())));
    let re = sum.re().weighted(&w.chi_a);
    let im = sum.im().weighted(&w.chi_a);
    Ok((symplectic_form(eta, &re)?, symplectic_form(eta, &im)?))
}

/// `Γ = Σ_{m≠n} ⟨zᵐz^{n̄}/(i(m·λ − n·λ)) G_m, g_n⟩` with `⟨u, v⟩ = Re(u, v̄)`; returns the real value and the
/// imaginary part of the complex sum.
pub fn gamma_correction(profile: &RefinedProfile, z: &[Complex64]) -> Result<(f64, f64)> {
    let lam = profile.frequencies();
    let mut total = Complex64::new(0.0, 0.0);
    for (m, gm) in profile.fgr_sources() {
        for (n, gn) in profile.fgr_modes() {
            if m == n {
                continue;
            }
            let d = m.dot_lambda(&lam) - n.dot_lambda(&lam);
            if d.abs() < 1e-12 {
                continue;
            }
            let c = m.z_power(z) * n.z_power(z).conj() / Complex64::new(0.0, d);
            let p = gm.pairing(&gn.conj())?;
            total += c * p;
        }
    }
    Ok((total.re, total.im))
}

/// `F₁ = f(φ₁ + η₁) − f(φ₁) − f'(φ₁)η₁`.
pub fn nonlinear_remainder(profile: &RefinedProfile, z: &[Complex64], eta1: &Field) -> Result<Field> {
    let phi = profile.eval_phi(z)?.first;
    let f = profile.nonlinearity();
    Ok(phi.zip_map(eta1, |p, e| f.eval(p + e) - f.eval(p) - f.derivative(p) * e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormsRecord {
    #[serde(rename = "H1")]
    pub h1: f64,
    #[serde(rename = "SigmaA")]
    pub sigma_a: f64,
    #[serde(rename = "L2_minus_kappa")]
    pub l2_minus_kappa: f64,
    #[serde(rename = "H1_minus_a")]
    pub h1_minus_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalsRecord {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "I1st1")]
    pub i1st1: f64,
    #[serde(rename = "I1st2")]
    pub i1st2: f64,
    #[serde(rename = "J_FGR")]
    pub j_fgr: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "I2nd1")]
    pub i2nd1: f64,
    #[serde(rename = "I2nd2")]
    pub i2nd2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub z: Vec<Complex64>,
    pub z_monomials: Vec<f64>,
    pub norms: NormsRecord,
    pub functionals: FunctionalsRecord,
    pub zdot_gap: f64,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// Flat values in column order.
    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![self.t];
        for z in &self.z {
            out.push(z.re);
            out.push(z.im);
        }
        out.extend(&self.z_monomials);
        let n = &self.norms;
        out.extend([n.h1, n.sigma_a, n.l2_minus_kappa, n.h1_minus_a]);
        let f = &self.functionals;
        out.extend([f.energy, f.i1st1, f.i1st2, f.j_fgr, f.gamma, f.i2nd1, f.i2nd2]);
        out.push(self.zdot_gap);
        out
    }
}

/// Column names matching [`DiagnosticsRecord::values`].
pub fn csv_header(n_modes: usize, r_min: &[MultiIndex]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for k in 1..=n_modes {
        h.push(format!("z{k}_re"));
        h.push(format!("z{k}_im"));
    }
    for m in r_min {
        let flat: Vec<String> = m.flat().iter().map(|v| v.to_string()).collect();
        h.push(format!("zm_{}", flat.join("_")));
    }
    for s in ["H1", "SigmaA", "L2_minus_kappa", "H1_minus_a", "E", "I1st1", "I1st2", "J_FGR", "Gamma", "I2nd1", "I2nd2", "zdot_gap"] {
        h.push(s.to_string());
    }
    h
}

/// Evaluates all per-sample quantities of a trajectory.
pub struct Diagnostics<'a> {
    pub profile: &'a RefinedProfile,
    pub chain: &'a DarbouxChain,
    pub sim_op: &'a crate::spectral::SchrodingerOperator,
    pub weights: VirialWeights,
    /// Largest imaginary residue seen in 𝓙_FGR and Γ.
    pub max_imag: f64,
}

impl<'a> Diagnostics<'a> {
    pub fn new(
        profile: &'a RefinedProfile,
        chain: &'a DarbouxChain,
        sim_op: &'a crate::spectral::SchrodingerOperator,
        params: WeightParams,
        scaled_cutoff: bool,
    ) -> Self {
        let weights = VirialWeights::new(sim_op.grid(), params, scaled_cutoff);
        Self { profile, chain, sim_op, weights, max_imag: 0.0 }
    }

    pub fn transformed(&self, eta: &Pair) -> Result<Pair> {
        self.chain.t_apply(self.weights.params.eps, eta)
    }

    pub fn record(&mut self, snap: &Snapshot) -> Result<DiagnosticsRecord> {
        let p = self.profile;
        let z = &snap.modulation.z;
        let eta = &snap.modulation.eta;
        let params = &self.weights.params;
        let z_monomials = p.tables().r_min.iter().map(|m| m.z_power(z).norm()).collect();
        let norms = NormsRecord {
            h1: h1_norm(snap.u)?,
            sigma_a: weighted_norm(eta, NormKind::SigmaA, params)?,
            l2_minus_kappa: weighted_norm(eta, NormKind::L2MinusKappa, params)?,
            h1_minus_a: weighted_norm(eta, NormKind::H1MinusA, params)?,
        };
        let (i1, i2) = virial_first(&self.weights, eta)?;
        let (j, j_im) = fgr_functional(&self.weights, p, z, eta)?;
        let (g, g_im) = gamma_correction(p, z)?;
        let v = self.transformed(eta)?;
        let (k1, k2) = virial_second(&self.weights, &v)?;
        self.max_imag = self.max_imag.max(j_im.abs()).max(g_im.abs());
        let zt = p.ztilde(z)?;
        let gap = snap.zdot.iter().zip(&zt).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let rec = DiagnosticsRecord {
            t: snap.t,
            z: z.clone(),
            z_monomials,
            norms,
            functionals: FunctionalsRecord {
                energy: energy(self.sim_op, p.nonlinearity(), snap.u)?,
                i1st1: i1,
                i1st2: i2,
                j_fgr: j,
                gamma: g,
                i2nd1: k1,
                i2nd2: k2,
            },
            zdot_gap: gap,
        };
        if !rec.is_finite() {
            return Err(Error::Overflow(format!("non-finite diagnostics at t = {}", snap.t)));
        }
        Ok(rec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationQuantities {
    pub t0: f64,
    pub t1: f64,
    pub zdot_gap_l2: f64,
    pub monomial_l2s: Vec<f64>,
    pub eta_l2_sigma_a: f64,
    pub eta_l2_kappa: f64,
    pub warning: Option<String>,
}

/// Trapezoid rule of `f` over the samples with `t ∈ [t0, t1]`.
fn time_integral(series: &[DiagnosticsRecord], t0: f64, t1: f64, f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
    let pts: Vec<&DiagnosticsRecord> = series.iter().filter(|r| r.t >= t0 - 1e-12 && r.t <= t1 + 1e-12).collect();
    pts.windows(2).map(|w| 0.5 * (w[1].t - w[0].t) * (f(w[0]) + f(w[1]))).sum()
}

/// L²-in-time norms of `ż − z̃`, of each `zᵐ`, and of `η` in `Σ_A` and `L²_{−κ}` over `[t0, t1]`.
pub fn continuation_quantities(series: &[DiagnosticsRecord], t0: f64, t1: f64, lambda_top: f64) -> ContinuationQuantities {
    let nm = series.first().map(|r| r.z_monomials.len()).unwrap_or(0);
    let dt = series.windows(2).map(|w| w[1].t - w[0].t).fold(0.0, f64::max);
    let quarter = 0.25 * 2.0 * std::f64::consts::PI / lambda_top.max(f64::MIN_POSITIVE);
    let warning = (dt > quarter).then(|| {
        format!("sampling interval {dt:.4} exceeds a quarter period {quarter:.4} of the fastest mode; time integrals are aliased")
    });
    ContinuationQuantities {
        t0,
        t1,
        zdot_gap_l2: time_integral(series, t0, t1, |r| r.zdot_gap.powi(2)).sqrt(),
        monomial_l2s: (0..nm).map(|k| time_integral(series, t0, t1, |r| r.z_monomials[k].powi(2)).sqrt()).collect(),
        eta_l2_sigma_a: time_integral(series, t0, t1, |r| r.norms.sigma_a.powi(2)).sqrt(),
        eta_l2_kappa: time_integral(series, t0, t1, |r| r.norms.l2_minus_kappa.powi(2)).sqrt(),
        warning,
    }
}

/// Continuation quantities over consecutive windows of length `window`.
pub fn windowed(series: &[DiagnosticsRecord], window: f64, lambda_top: f64) -> Vec<ContinuationQuantities> {
    let Some(last) = series.last() else { return Vec::new() };
    let t_start = series[0].t;
    let count = ((last.t - t_start) / window + 1e-9).floor() as usize;
    (0..count)
        .map(|k| {
            let t0 = t_start + k as f64 * window;
            continuation_quantities(series, t0, t0 + window, lambda_top)
        })
        .collect()
}

pub fn write_series_csv<W: Write>(out: W, header: &[String], series: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in series {
        let vals = r.values();
        if vals.len() != header.len() {
            return Err(Error::Internal(format!("record has {} values for {} columns", vals.len(), header.len())));
        }
        w.write_record(vals.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary(series: &[DiagnosticsRecord], window: f64, lambda_top: f64, max_imag: f64) -> serde_json::Value {
    let full = series
        .first()
        .zip(series.last())
        .map(|(a, b)| continuation_quantities(series, a.t, b.t, lambda_top));
    json!({
        "samples": series.len(),
        "whole_run": full,
        "windows": windowed(series, window, lambda_top),
        "max_imaginary_residue": max_imag,
    })
}

/// Centered differences `d/dt` of a sampled quantity (one-sided at the ends).
pub fn time_derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                0.0
            } else if i == 0 {
                (y[1] - y[0]) / (t[1] - t[0])
            } else if i == n - 1 {
                (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2])
            } else {
                (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1])
            }
        })
        .collect()
}
