use nalgebra::DMatrix;
use nlkg_core::field::{pairing, Bilinear};
use nlkg_core::spectral::{discrete_spectrum, SchrodingerOperator};
use nlkg_core::{CField, Complex64, Error, Field, Grid};
use proptest::prelude::*;

fn pt(depth: f64, mass_sq: f64, x: f64, n: usize, order: usize) -> SchrodingerOperator {
    let g = Grid::clamped(x, n).unwrap();
    SchrodingerOperator::from_fn(g, |x| -depth / x.cosh().powi(2), mass_sq, order).unwrap()
}

#[test]
fn poschl_teller_eigenvalues() {
    let s = discrete_spectrum(&pt(1.44, 1.0, 30.0, 4096, 4)).unwrap();
    assert_eq!(s.count(), 1);
    assert!((s.eigenvalues[0] - 0.36).abs() < 1e-3, "{}", s.eigenvalues[0]);
    let s = discrete_spectrum(&pt(2.0, 4.0, 30.0, 4096, 4)).unwrap();
    assert_eq!(s.count(), 1);
    assert!((s.eigenvalues[0] - 3.0).abs() < 1e-3);
    let s = discrete_spectrum(&pt(-1.0, 1.0, 30.0, 2048, 4)).unwrap();
    assert_eq!(s.count(), 0);
}

#[test]
fn dense_diagonalization_agrees() {
    for order in [2, 4] {
        let op = pt(6.0, 9.0, 12.0, 301, order);
        let s = discrete_spectrum(&op).unwrap();
        let a = op.to_symband(0.0);
        let n = a.size();
        let m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().filter(|&e| e < 9.0).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(ev.len(), s.count());
        for (a, b) in ev.iter().zip(&s.eigenvalues) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn eigenfunctions_orthonormal_and_oriented() {
    let op = pt(6.0, 9.0, 15.0, 1501, 4);
    let s = discrete_spectrum(&op).unwrap();
    // s(s+1) = 6, s = 2: bound states at m² − 4 and m² − 1
    assert_eq!(s.count(), 2);
    assert!((s.eigenvalues[0] - 5.0).abs() < 1e-3);
    assert!((s.eigenvalues[1] - 8.0).abs() < 1e-3);
    for i in 0..2 {
        for j in 0..2 {
            let p = s.eigenfunctions[i].pairing(&s.eigenfunctions[j]).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((p - want).abs() < 1e-10);
        }
        assert!(s.residuals[i] < 1e-8);
    }
    assert!(s.eigenfunctions[0].values().iter().all(|&v| v > -1e-12));
    // odd state: first extremum from the left is positive
    let v = s.eigenfunctions[1].values();
    let imin = (0..v.len()).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap()).unwrap();
    assert!(v[imin.min(v.len() - 1 - imin)] > 0.0);
}

#[test]
fn eigenvalue_convergence_rate() {
    for order in [2usize, 4] {
        let ns = [201usize, 401, 801];
        let ev: Vec<f64> = ns.iter().map(|&n| discrete_spectrum(&pt(1.44, 1.0, 20.0, n, order)).unwrap().eigenvalues[0]).collect();
        let e1 = (ev[0] - 0.36).abs();
        let e2 = (ev[1] - 0.36).abs();
        let rate = (e1 / e2).log2();
        assert!(rate >= order as f64 - 0.5, "order {order}: rate {rate}");
    }
}

#[test]
fn matrix_eigvector_relation() {
    let op = pt(1.44, 1.0, 30.0, 2001, 4);
    let s = discrete_spectrum(&op).unwrap();
    let phi = s.matrix_eigvector(0).unwrap();
    let lam = s.frequencies()[0];
    // J diag(L₁, 1) Φ with J(a, b) = (b, −a)
    let l1 = op.apply(&phi.first).unwrap();
    let jl = nlkg_core::CPair::new(phi.second.clone(), -&l1).unwrap();
    let res = &jl - &phi.scale(Complex64::new(0.0, lam));
    assert!(res.norm() < 1e-8);
    let bar = phi.conj();
    let l1 = op.apply(&bar.first).unwrap();
    let jl = nlkg_core::CPair::new(bar.second.clone(), -&l1).unwrap();
    assert!((&jl - &bar.scale(Complex64::new(0.0, -lam))).norm() < 1e-8);
    assert!(s.matrix_eigvector(1).is_err());
}

#[test]
fn projection_properties() {
    let op = pt(6.0, 9.0, 15.0, 1001, 4);
    let s = discrete_spectrum(&op).unwrap();
    let g = *op.grid();
    let f = Field::from_fn(g, |x| (-(x - 0.7).powi(2)).exp() * (1.0 + x));
    let w = Field::from_fn(g, |x| (0.3 * x).sin() / (1.0 + x * x));
    let pf = s.project_pc(&f).unwrap();
    assert!((&s.project_pc(&pf).unwrap() - &pf).max_abs() < 1e-12);
    assert!(s.project_pc(&s.eigenfunctions[0]).unwrap().max_abs() < 1e-12);
    let a = pairing(&pf, &w).unwrap();
    let b = pairing(&f, &s.project_pc(&w).unwrap()).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn free_resolvent_on_plane_wave() {
    let g = Grid::periodic(8.0 * std::f64::consts::PI, 512).unwrap();
    let op = SchrodingerOperator::from_fn(g, |_| 0.0, 1.0, 4).unwrap();
    // a compactly supported packet keeps the Dirichlet edges irrelevant
    let k = 1.0;
    let f = CField::from_fn(g, |x| Complex64::from_polar((-(x / 5.0).powi(2)).exp(), k * x));
    let r = op.resolvent_apply(0.0, &f).unwrap();
    let back = op.apply(&r).unwrap();
    assert!((&back - &f).max_abs() < 1e-10 * f.max_abs());
}

#[test]
fn singular_and_projected_resolvent() {
    let op = pt(1.44, 1.0, 30.0, 2001, 4);
    let s = discrete_spectrum(&op).unwrap();
    let lam2 = s.eigenvalues[0];
    assert!(matches!(op.resolvent_apply(lam2, &s.eigenfunctions[0]), Err(Error::Singular(_))));
    let f = Field::from_fn(*op.grid(), |x| (-x * x).exp() * (1.0 + 0.5 * x));
    let g = op.resolvent_projected(&s, lam2, &f).unwrap();
    let pf = s.project_pc(&f).unwrap();
    let mut r = op.apply(&g).unwrap();
    r.axpy(-lam2, &g);
    assert!((&r - &pf).norm() < 1e-10 * pf.norm());
}

#[test]
fn free_scattering_is_plane_wave() {
    let op = SchrodingerOperator::from_fn(Grid::clamped(30.0, 4096).unwrap(), |_| 0.0, 1.0, 4).unwrap();
    let sc = op.scattering_state(1.2).unwrap();
    let k = 0.44f64.sqrt();
    assert!((k - 0.66332).abs() < 1e-5);
    let g = op.grid();
    let err = sc.field.values().iter().enumerate().map(|(i, v)| (v - Complex64::from_polar(1.0, k * g.x(i))).norm()).fold(0.0, f64::max);
    assert!(err < 1e-6, "{err}");
}

/// Shooting oracle: integrate ψ'' = (V + m² − Ω²)ψ from the right with ψ = e^{ikx} and read off
/// the incoming/reflected amplitudes on the left.
fn shooting_unitarity(depth: f64, mass_sq: f64, omega: f64) -> (f64, f64) {
    let k = (omega * omega - mass_sq).sqrt();
    let x0 = 25.0;
    let steps = 200_000;
    let h = -2.0 * x0 / steps as f64;
    let q = |x: f64| -depth / x.cosh().powi(2) + mass_sq - omega * omega;
    let mut y = [Complex64::from_polar(1.0, k * x0), Complex64::new(0.0, k) * Complex64::from_polar(1.0, k * x0)];
    let mut x = x0;
    let f = |x: f64, y: [Complex64; 2]| [y[1], y[0] * q(x)];
    for _ in 0..steps {
        let k1 = f(x, y);
        let k2 = f(x + h / 2.0, [y[0] + k1[0] * (h / 2.0), y[1] + k1[1] * (h / 2.0)]);
        let k3 = f(x + h / 2.0, [y[0] + k2[0] * (h / 2.0), y[1] + k2[1] * (h / 2.0)]);
        let k4 = f(x + h, [y[0] + k3[0] * h, y[1] + k3[1] * h]);
        for c in 0..2 {
            y[c] += (k1[c] + k2[c] * 2.0 + k3[c] * 2.0 + k4[c]) * (h / 6.0);
        }
        x += h;
    }
    let ik = Complex64::new(0.0, k);
    let a = (y[1] + ik * y[0]) / (ik * 2.0) * Complex64::from_polar(1.0, -k * x);
    let b = (ik * y[0] - y[1]) / (ik * 2.0) * Complex64::from_polar(1.0, k * x);
    ((1.0 / a).norm_sqr(), (b / a).norm_sqr())
}

#[test]
fn scattering_unitarity_matches_shooting() {
    let op = pt(1.44, 1.0, 30.0, 4096, 4);
    let sc = op.scattering_state(1.2).unwrap();
    let t2 = sc.transmission.norm_sqr();
    let r2 = sc.reflection.norm_sqr();
    assert!((t2 + r2 - 1.0).abs() < 1e-4, "{t2} + {r2}");
    let (t2o, r2o) = shooting_unitarity(1.44, 1.0, 1.2);
    assert!((t2o + r2o - 1.0).abs() < 1e-6);
    assert!((t2 - t2o).abs() < 1e-4, "{t2} vs {t2o}");
    // interior residual
    let g = op.grid();
    let mut lg = op.apply(&sc.field).unwrap();
    lg.axpy(Complex64::new(-1.44, 0.0), &sc.field);
    let half: f64 = (0..g.len()).filter(|&i| g.x(i).abs() <= 15.0).map(|i| lg.values()[i].norm_sqr() * g.spacing()).sum();
    assert!(half.sqrt() < 1e-8 * sc.field.norm());
    let neg = op.scattering_state(-1.2).unwrap();
    assert!((&neg.field - &sc.field.conj()).max_abs() < 1e-12);
    assert!(op.scattering_state(0.9).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn resolvent_round_trip(omega in -3.0f64..0.9, c in -1.0f64..1.0, s in 0.5f64..3.0) {
        let op = pt(1.44, 1.0, 20.0, 801, 4);
        prop_assume!((omega - 0.36).abs() > 1e-3);
        let f = Field::from_fn(*op.grid(), |x| (-(x - c).powi(2) / s).exp());
        let g = op.resolvent_apply(omega, &f).unwrap();
        let mut back = op.apply(&g).unwrap();
        back.axpy(-omega, &g);
        prop_assert!((&back - &f).max_abs() < 1e-10 * f.max_abs().max(1.0));
    }
}
