use nlkg_core::darboux::{build_chain, ground_state, DarbouxChain};
use nlkg_core::field::{derivative, pairing, sech_weight};
use nlkg_core::spectral::{discrete_spectrum, SchrodingerOperator, Spectrum};
use nlkg_core::{Field, Grid, Pair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(depth: f64, mass_sq: f64, x: f64, n: usize) -> SchrodingerOperator {
    SchrodingerOperator::from_fn(Grid::clamped(x, n).unwrap(), |x| -depth / x.cosh().powi(2), mass_sq, 4).unwrap()
}

fn chain_for(op: &SchrodingerOperator) -> (Spectrum, DarbouxChain) {
    let s = discrete_spectrum(op).unwrap();
    let c = build_chain(op, &s).unwrap();
    (s, c)
}

fn bump(g: Grid, c: f64, w: f64) -> Field {
    Field::from_fn(g, |x| (-(x - c).powi(2) / w).exp())
}

/// Sum of a few randomly placed gaussians.
fn random_smooth(g: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Field::zeros(g);
    for _ in 0..4 {
        let c: f64 = rng.gen_range(-4.0..4.0);
        let a: f64 = rng.gen_range(-1.0..1.0);
        let w: f64 = rng.gen_range(0.5..3.0);
        f.axpy(a, &bump(g, c, w));
    }
    f
}

#[test]
fn ground_state_closed_forms() {
    let op = pt(2.0, 4.0, 20.0, 2001);
    let psi = ground_state(&op).unwrap();
    let err = psi.values().iter().enumerate().map(|(i, v)| (v - 1.0 / op.grid().x(i).cosh() / 2f64.sqrt()).abs()).fold(0.0, f64::max);
    assert!(err < 1e-5, "{err}");
    assert!(psi.values().iter().all(|&v| v > 0.0));

    let op = pt(1.44, 1.0, 30.0, 3001);
    let psi = ground_state(&op).unwrap();
    let exact = Field::from_fn(*op.grid(), |x| x.cosh().powf(-0.8));
    let exact = exact.scale_real(1.0 / exact.norm());
    assert!((&psi - &exact).max_abs() < 1e-4);
    assert!(psi.values().iter().cloned().fold(f64::INFINITY, f64::min) > 0.0);

    let free = SchrodingerOperator::from_fn(Grid::clamped(10.0, 201).unwrap(), |_| 0.0, 1.0, 4).unwrap();
    assert!(ground_state(&free).is_err());
}

#[test]
fn chain_closed_forms() {
    let (_, c) = chain_for(&pt(2.0, 4.0, 20.0, 2001));
    assert!(c.v_d().max_abs() < 1e-5);
    let (_, c) = chain_for(&pt(1.44, 1.0, 30.0, 3001));
    let exact = Field::from_fn(*c.v_d().grid(), |x| 0.16 / x.cosh().powi(2));
    assert!((c.v_d() - &exact).max_abs() < 1e-4);
    assert_eq!(discrete_spectrum(&c.operator_d().unwrap()).unwrap().count(), 0);
    // V_D = V − 2 Σ (log ψⱼ)''
    let op = pt(6.0, 9.0, 15.0, 1501);
    let (s, c) = chain_for(&op);
    assert_eq!(c.len(), 2);
    let mid = Field::from_fn(*op.grid(), |x| -2.0 / x.cosh().powi(2));
    assert!((&c.potentials()[1] - &mid).max_abs() < 1e-5);
    let mut sum = op.potential().clone();
    for psi in c.ground_states() {
        let lp = Field::new(*op.grid(), psi.values().iter().map(|v| v.ln()).collect()).unwrap();
        let d2 = derivative(&lp, 2).unwrap();
        sum.axpy(-2.0, &d2);
    }
    let g = op.grid();
    let err = (0..g.len()).filter(|&i| g.x(i).abs() < 10.0).map(|i| (sum.values()[i] - c.v_d().values()[i]).abs()).fold(0.0, f64::max);
    assert!(err < 1e-5, "{err}");
    for (k, e) in c.removed().iter().enumerate() {
        assert!((e - s.eigenvalues[k]).abs() < 1e-6);
    }
    // after step k the lowest remaining eigenvalue is the next one
    let s2 = discrete_spectrum(&c.operator(1).unwrap()).unwrap();
    assert_eq!(s2.count(), 1);
    assert!((s2.eigenvalues[0] - s.eigenvalues[1]).abs() < 1e-6);
}

#[test]
fn ground_states_span_the_kernels() {
    let op = pt(6.0, 9.0, 12.0, 4801);
    let (_, c) = chain_for(&op);
    for k in 0..c.len() {
        let r = c.apply_a_star(k, &c.ground_states()[k]).unwrap();
        assert!(r.norm() < 1e-8, "{}", r.norm());
    }
    assert!(c.matching_residuals().iter().all(|m| m.abs() < 1e-10));
}

#[test]
fn factor_identities() {
    let op = pt(6.0, 9.0, 15.0, 3001);
    let (s, c) = chain_for(&op);
    let g = *op.grid();
    for k in 0..c.len() {
        let f = bump(g, 0.3, 1.0);
        let h = bump(g, -0.5, 2.0);
        let lhs = pairing(&c.apply_a(k, &f).unwrap(), &h).unwrap();
        let rhs = pairing(&f, &c.apply_a_star(k, &h).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-8);
        // A A* = L_k − λ², A* A = L_{k+1} − λ²
        let e = c.removed()[k];
        let aa = c.apply_a(k, &c.apply_a_star(k, &f).unwrap()).unwrap();
        let mut lf = c.operator(k).unwrap().apply(&f).unwrap();
        lf.axpy(-e, &f);
        assert!((&aa - &lf).norm() < 1e-5 * f.norm(), "{}", (&aa - &lf).norm());
        let aa = c.apply_a_star(k, &c.apply_a(k, &f).unwrap()).unwrap();
        let mut lf = c.operator(k + 1).unwrap().apply(&f).unwrap();
        lf.axpy(-e, &f);
        assert!((&aa - &lf).norm() < 1e-5 * f.norm(), "{}", (&aa - &lf).norm());
    }
    let f = bump(g, 0.2, 1.5);
    assert!(c.check_conjugation(&f).unwrap() < 2e-6);
    assert!(c.check_factorization(&f).unwrap() < 5e-6);
    let phi = &s.eigenfunctions[0];
    assert!(c.big_a_star(phi).unwrap().norm() < 1e-6);
    assert!(c.check_conjugation(phi).unwrap() < 1e-5, "{}", c.check_conjugation(phi).unwrap());
    assert!(c.check_factorization(phi).unwrap() < 1e-5, "{}", c.check_factorization(phi).unwrap());
    for seed in 0..4 {
        let f = random_smooth(g, seed);
        assert!(c.check_conjugation(&f).unwrap() < 1e-5);
    }
}

#[test]
fn empty_chain_is_identity() {
    let op = pt(-1.0, 1.0, 15.0, 801);
    let (s, c) = chain_for(&op);
    assert!(c.is_empty());
    let f = bump(*op.grid(), 0.0, 1.0);
    assert_eq!(c.check_conjugation(&f).unwrap(), 0.0);
    assert_eq!(c.check_factorization(&f).unwrap(), 0.0);
    let eta = Pair::new(f.clone(), f.scale_real(2.0)).unwrap();
    let v = c.t_apply(0.3, &eta).unwrap();
    assert_eq!(v.first.values(), eta.first.values());
    let back = c.t_left_inverse(&s, 0.3, &f).unwrap();
    assert!((&back - &f).max_abs() < 1e-14);
    assert_eq!(c.commutator_vd(0.3, &f).unwrap().max_abs(), 0.0);
}

#[test]
fn repulsivity() {
    let (_, c) = chain_for(&pt(1.44, 1.0, 30.0, 3001));
    assert!(c.check_repulsive(1e-6).unwrap().pass);
    c.check_vd_decay(0.4).unwrap();
    let (_, c) = chain_for(&pt(2.0, 4.0, 20.0, 2001));
    let r = c.check_repulsive(1e-6).unwrap();
    assert!(r.sign_ok && !r.nontrivial && !r.pass);
    // a well added on top of a repulsive V_D: operator with V = 0.16 sech² − 0.5 e^{−(x−3)²}
    let op = SchrodingerOperator::from_fn(
        Grid::clamped(20.0, 1601).unwrap(),
        |x| 0.16 / x.cosh().powi(2) - 0.5 * (-(x - 3.0).powi(2)).exp(),
        1.0,
        4,
    )
    .unwrap();
    let s = discrete_spectrum(&op).unwrap();
    if s.count() == 0 {
        let c = build_chain(&op, &s).unwrap();
        assert!(!c.check_repulsive(1e-6).unwrap().sign_ok);
    } else {
        let c = build_chain(&op, &s).unwrap();
        assert!(!c.check_repulsive(1e-6).unwrap().pass);
    }
}

#[test]
fn smoothing_conjugation() {
    let op = pt(1.44, 1.0, 30.0, 3001);
    let (s, c) = chain_for(&op);
    let g = *op.grid();
    let f = bump(g, 0.2, 1.5);
    assert!(c.check_conjugation(&f).unwrap() < 1e-6);
    assert!(c.check_factorization(&f).unwrap() < 1e-6);
    let eta = Pair::new(s.eigenfunctions[0].clone(), Field::zeros(g)).unwrap();
    assert!(c.t_apply(0.25, &eta).unwrap().first.norm() < 1e-6);
    let u = s.project_pc(&bump(g, 0.5, 1.0)).unwrap();
    let v = c.t_scalar(0.25, &u).unwrap();
    let back = c.t_left_inverse(&s, 0.25, &v).unwrap();
    assert!((&back - &u).norm() < 1e-6 * u.norm(), "{}", (&back - &u).norm());
    let v = c.t_scalar(0.25, &s.eigenfunctions[0]).unwrap();
    assert!(c.t_left_inverse(&s, 0.25, &v).unwrap().norm() < 1e-6);
    assert_eq!(c.commutator_vd(0.0, &u).unwrap().max_abs(), 0.0);
    let (_, free) = chain_for(&pt(2.0, 4.0, 20.0, 2001));
    let f = bump(*free.base().grid(), 0.0, 1.0);
    assert!(free.commutator_vd(0.25, &f).unwrap().max_abs() < 1e-4);
}

#[test]
fn commutator_scales_with_eps() {
    let op = pt(1.44, 1.0, 30.0, 3001);
    let (_, c) = chain_for(&op);
    let g = *op.grid();
    let kappa = 0.04;
    let w = sech_weight(&Field::zeros(g), kappa);
    let ratio = |eps: f64, f: &Field| {
        let num = c.commutator_vd(eps, f).unwrap().norm();
        let den = c.t_scalar(eps, f).unwrap().weighted(&w).norm();
        num / den
    };
    for seed in 0..3 {
        let f = random_smooth(g, 10 + seed);
        let r: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&e| ratio(e, &f)).collect();
        assert!(r[1] <= 0.5 * r[0] * 1.05 && r[2] <= 0.5 * r[1] * 1.05, "{r:?}");
    }
}
