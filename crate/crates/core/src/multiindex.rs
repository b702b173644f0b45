//! Resonance combinatorics over ℕ₀^{2N}: the sets R, R_min, I, NR, Λ₀, Λⱼ,
//! the partial order, the order bound M and the genericity checks.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};

/// Absolute tolerance for `m·λ = 0` and `m·λ = λⱼ` tests.
pub const FREQ_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
}

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        Self { plus: vec![0; n], minus: vec![0; n] }
    }

    pub fn new(plus: Vec<u32>, minus: Vec<u32>) -> Self {
        assert_eq!(plus.len(), minus.len(), "plus and minus parts differ in length");
        Self { plus, minus }
    }

    /// `eʲ` (0-based `j`).
    pub fn unit(n: usize, j: usize) -> Self {
        let mut m = Self::zero(n);
        m.plus[j] = 1;
        m
    }

    /// Flat `[m₊ | m₋]` form.
    pub fn from_flat(flat: &[u32]) -> Self {
        let n = flat.len() / 2;
        Self::new(flat[..n].to_vec(), flat[n..].to_vec())
    }

    pub fn flat(&self) -> Vec<u32> {
        self.plus.iter().chain(&self.minus).copied().collect()
    }

    pub fn dim(&self) -> usize {
        self.plus.len()
    }

    /// ‖m‖ = Σ (m₊ⱼ + m₋ⱼ).
    pub fn order(&self) -> u32 {
        self.plus.iter().sum::<u32>() + self.minus.iter().sum::<u32>()
    }

    pub fn conjugate(&self) -> Self {
        Self { plus: self.minus.clone(), minus: self.plus.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.order() == 0
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            plus: self.plus.iter().zip(&other.plus).map(|(a, b)| a + b).collect(),
            minus: self.minus.iter().zip(&other.minus).map(|(a, b)| a + b).collect(),
        }
    }

    /// `self − other` when every entry stays nonnegative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let sub = |a: &[u32], b: &[u32]| -> Option<Vec<u32>> {
            a.iter().zip(b).map(|(&x, &y)| x.checked_sub(y)).collect()
        };
        Some(Self { plus: sub(&self.plus, &other.plus)?, minus: sub(&self.minus, &other.minus)? })
    }

    /// Σⱼ (m₊ⱼ − m₋ⱼ) λⱼ.
    pub fn dot_lambda(&self, lambda: &[f64]) -> f64 {
        assert_eq!(lambda.len(), self.dim(), "frequency vector length differs from index dimension");
        self.plus
            .iter()
            .zip(&self.minus)
            .zip(lambda)
            .map(|((&p, &m), &l)| (p as f64 - m as f64) * l)
            .sum()
    }

    /// `n ≺ m`: total degree per mode dominated and strictly smaller order.
    pub fn precedes(&self, m: &Self) -> bool {
        let dominated = (0..self.dim()).all(|j| self.plus[j] + self.minus[j] <= m.plus[j] + m.minus[j]);
        dominated && self.order() < m.order()
    }

    /// `z^m = Π zⱼ^{m₊ⱼ} z̄ⱼ^{m₋ⱼ}`.
    pub fn z_power(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.dim(), "amplitude vector length differs from index dimension");
        let mut acc = Complex64::new(1.0, 0.0);
        for (j, zj) in z.iter().enumerate() {
            acc *= zj.powu(self.plus[j]) * zj.conj().powu(self.minus[j]);
        }
        acc
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        if self.dim() == 1 {
            write!(f, "({},{})", self.plus[0], self.minus[0])
        } else {
            write!(f, "({}|{})", join(&self.plus), join(&self.minus))
        }
    }
}

pub fn dot_lambda(m: &MultiIndex, lambda: &[f64]) -> f64 {
    m.dot_lambda(lambda)
}

pub fn precedes(n: &MultiIndex, m: &MultiIndex) -> bool {
    n.precedes(m)
}

pub fn z_power(z: &[Complex64], m: &MultiIndex) -> Complex64 {
    m.z_power(z)
}

/// All multi-indices of dimension `n` with order at most `max_order`, sorted by order then entries.
pub fn enumerate(n: usize, max_order: u32) -> Vec<MultiIndex> {
    fn rec(slots: usize, budget: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == slots {
            out.push(cur.clone());
            return;
        }
        for v in 0..=budget {
            cur.push(v);
            rec(slots, budget - v, cur, out);
            cur.pop();
        }
    }
    let mut flat = Vec::new();
    rec(2 * n, max_order, &mut Vec::new(), &mut flat);
    let mut all: Vec<MultiIndex> = flat.iter().map(|f| MultiIndex::from_flat(f)).collect();
    all.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| b.cmp(a)));
    all
}

fn check_lambda(lambda: &[f64], mass: f64) -> Result<()> {
    if lambda.is_empty() {
        return Err(Error::InvalidInput("empty frequency vector".into()));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidInput(format!("mass must be positive, got {mass}")));
    }
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidInput("frequencies must be positive".into()));
    }
    if lambda.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("frequencies must be strictly increasing".into()));
    }
    Ok(())
}

fn order_bound(lambda: &[f64], mass: f64) -> Result<(u32, bool)> {
    check_lambda(lambda, mass)?;
    let ratio = mass / lambda[0];
    let k = ratio.round();
    if (ratio - k).abs() <= FREQ_TOL * ratio.max(1.0) {
        Ok((k as u32, true))
    } else {
        Ok((ratio.floor() as u32 + 1, false))
    }
}

/// Largest M with (M − 1)λ₁ < mass. A multiple of λ₁ landing on the mass is refused.
pub fn compute_m(lambda: &[f64], mass: f64) -> Result<u32> {
    match order_bound(lambda, mass)? {
        (m, false) => Ok(m),
        (m, true) => Err(Error::Degenerate(format!("{m}·λ₁ equals the mass"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenericRule {
    /// (m·λ)² ≠ mass² for ‖m‖ ≤ M.
    NoThresholdResonance,
    /// m·λ = 0 forces m₊ = m₋ for ‖m‖ ≤ 2M.
    ZeroFrequencyBalanced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: MultiIndex,
    pub rule: GenericRule,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericReport {
    pub big_m: u32,
    pub violations: Vec<Violation>,
}

impl GenericReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_generic(lambda: &[f64], mass: f64) -> Result<GenericReport> {
    let (big_m, _) = order_bound(lambda, mass)?;
    let n = lambda.len();
    let mut violations = Vec::new();
    for m in enumerate(n, 2 * big_m) {
        let w = m.dot_lambda(lambda);
        if m.order() <= big_m && (w * w - mass * mass).abs() <= FREQ_TOL {
            violations.push(Violation { index: m.clone(), rule: GenericRule::NoThresholdResonance, value: w });
        }
        if w.abs() <= FREQ_TOL && m.plus != m.minus {
            violations.push(Violation { index: m, rule: GenericRule::ZeroFrequencyBalanced, value: w });
        }
    }
    Ok(GenericReport { big_m, violations })
}

/// The finite resonance tables for a frequency vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexTables {
    pub lambda: Vec<f64>,
    pub mass: f64,
    pub big_m: u32,
    pub nr: Vec<MultiIndex>,
    pub r_min: Vec<MultiIndex>,
    pub lambda0: Vec<MultiIndex>,
    /// `lambda_j[j]` is Λ_{j+1}.
    pub lambda_j: Vec<Vec<MultiIndex>>,
}

impl IndexTables {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn in_nr(&self, m: &MultiIndex) -> bool {
        self.nr.contains(m)
    }

    pub fn in_lambda0(&self, m: &MultiIndex) -> bool {
        self.lambda0.contains(m)
    }

    /// The mode `j` with `m ∈ Λⱼ`, if any.
    pub fn lambda_mode(&self, m: &MultiIndex) -> Option<usize> {
        self.lambda_j.iter().position(|set| set.contains(m))
    }

    /// The mode `j` with `m ∈ Λ̄ⱼ`, if any.
    pub fn lambda_bar_mode(&self, m: &MultiIndex) -> Option<usize> {
        self.lambda_mode(&m.conjugate())
    }

    pub fn report(&self) -> serde_json::Value {
        let flat = |v: &[MultiIndex]| v.iter().map(|m| m.flat()).collect::<Vec<_>>();
        json!({
            "lambda": self.lambda,
            "mass": self.mass,
            "M": self.big_m,
            "NR": flat(&self.nr),
            "R_min": flat(&self.r_min),
            "Lambda_0": flat(&self.lambda0),
            "Lambda_j": self.lambda_j.iter().map(|s| flat(s)).collect::<Vec<_>>(),
        })
    }
}

pub fn build_tables(lambda: &[f64], mass: f64) -> Result<IndexTables> {
    let (tables, report) = build_tables_unchecked(lambda, mass)?;
    if !report.ok() {
        let list: Vec<String> =
            report.violations.iter().map(|v| format!("{} ({:?})", v.index, v.rule)).collect();
        return Err(Error::Assumption(format!("genericity violated at {}", list.join(", "))));
    }
    Ok(tables)
}

/// The tables from the set definitions alone, together with the genericity report, for frequency vectors that
/// fail the genericity check.
pub fn build_tables_unchecked(lambda: &[f64], mass: f64) -> Result<(IndexTables, GenericReport)> {
    let report = check_generic(lambda, mass)?;
    let big_m = report.big_m;
    let n = lambda.len();
    let all = enumerate(n, big_m);
    let resonant = |m: &MultiIndex| m.dot_lambda(lambda).abs() > mass;
    let r: Vec<&MultiIndex> = all.iter().filter(|m| resonant(m)).collect();
    let r_min: Vec<MultiIndex> =
        r.iter().filter(|m| !r.iter().any(|q| q.precedes(m))).map(|m| (*m).clone()).collect();
    let nr: Vec<MultiIndex> = all
        .iter()
        .filter(|m| !r_min.contains(m) && !r_min.iter().any(|q| q.precedes(m)))
        .cloned()
        .collect();
    let lambda0 = nr
        .iter()
        .filter(|m| !m.is_zero() && m.dot_lambda(lambda).abs() <= FREQ_TOL)
        .cloned()
        .collect();
    let lambda_j = (0..n)
        .map(|j| {
            nr.iter().filter(|m| (m.dot_lambda(lambda) - lambda[j]).abs() <= FREQ_TOL).cloned().collect()
        })
        .collect();
    Ok((IndexTables { lambda: lambda.to_vec(), mass, big_m, nr, r_min, lambda0, lambda_j }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(p: &[u32], m: &[u32]) -> MultiIndex {
        MultiIndex::new(p.to_vec(), m.to_vec())
    }

    #[test]
    fn dot_examples() {
        assert!((mi(&[2], &[0]).dot_lambda(&[0.6]) - 1.2).abs() < 1e-15);
        assert_eq!(mi(&[1], &[1]).dot_lambda(&[0.6]), 0.0);
        assert!((mi(&[1, 1], &[0, 0]).dot_lambda(&[0.4, 0.7]) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn order_relation() {
        assert!(mi(&[2], &[0]).precedes(&mi(&[3], &[1])));
        assert!(!mi(&[2], &[0]).precedes(&mi(&[1], &[1])));
        let m = mi(&[1], &[2]);
        assert!(!m.precedes(&m));
    }

    #[test]
    fn m_examples() {
        assert_eq!(compute_m(&[0.6], 1.0).unwrap(), 2);
        assert_eq!(compute_m(&[0.9], 1.0).unwrap(), 2);
        assert_eq!(compute_m(&[0.4, 0.7], 1.0).unwrap(), 3);
        assert!(matches!(compute_m(&[0.5], 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn monomials() {
        let z = [Complex64::new(0.1, 0.0)];
        assert!((mi(&[2], &[0]).z_power(&z) - Complex64::new(0.01, 0.0)).norm() < 1e-16);
        let z = [Complex64::new(0.0, 0.1)];
        assert!((mi(&[0], &[2]).z_power(&z) - Complex64::new(-0.01, 0.0)).norm() < 1e-16);
        assert_eq!(MultiIndex::zero(1).z_power(&z), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn threshold_violation_at_half() {
        let rep = check_generic(&[0.5], 1.0).unwrap();
        assert_eq!(rep.big_m, 2);
        assert!(rep.violations.iter().any(|v| v.rule == GenericRule::NoThresholdResonance && v.index == mi(&[2], &[0])));
        assert!(check_generic(&[0.6], 1.0).unwrap().ok());
    }

    #[test]
    fn balanced_violation() {
        let rep = check_generic(&[0.3, 0.6], 1.0).unwrap();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.rule == GenericRule::ZeroFrequencyBalanced && v.index == mi(&[2, 0], &[0, 1])));
    }
}
