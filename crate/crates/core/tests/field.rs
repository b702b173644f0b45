use nlkg_core::field::io::{decode_dump, encode_dump, read_field_csv, read_field_dump, write_field_csv, write_field_dump};
use nlkg_core::field::{
    bessel_multiplier, derivative, pairing, real_pairing, sech_weight, symplectic_form, weighted_norm, Boundary,
    NormKind, WeightParams,
};
use nlkg_core::{CField, CPair, Complex64, Field, Field32, Grid, Grid32, Pair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

fn random_h1(g: Grid, rng: &mut ChaCha8Rng) -> Field {
    let mut f = Field::zeros(g);
    for _ in 0..4 {
        let c: f64 = rng.gen_range(-15.0..15.0);
        let w: f64 = rng.gen_range(0.3..6.0);
        let k: f64 = rng.gen_range(0.0..3.0);
        let a: f64 = rng.gen_range(-1.0..1.0);
        f.axpy(a, &Field::from_fn(g, |x| (-(x - c).powi(2) / (w * w)).exp() * (k * x).cos()));
    }
    f
}

#[test]
fn grid_shapes() {
    let g = Grid::periodic(10.0, 64).unwrap();
    assert!((g.spacing() - 20.0 / 64.0).abs() < 1e-15);
    assert_eq!(g.x(32), 0.0);
    let c = Grid::clamped(10.0, 101).unwrap();
    assert!((c.spacing() - 0.2).abs() < 1e-15);
    assert!((c.x(0) + 10.0).abs() < 1e-15 && (c.x(100) - 10.0).abs() < 1e-12);
    assert!(Grid::periodic(10.0, 63).is_err());
    assert!(Grid::periodic(10.0, 32).is_err());
    assert!(Grid::clamped(-1.0, 100).is_err());
    let a = Field::zeros(g);
    let b = Field::zeros(c);
    assert!(pairing(&a, &b).is_err());
}

#[test]
fn pairing_examples() {
    let g = Grid::clamped(20.0, 2048).unwrap();
    let s = Field::from_fn(g, sech);
    assert!((pairing(&s, &s).unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(pairing(&s, &Field::zeros(g)).unwrap(), 0.0);
    let odd = Field::from_fn(g, |x| x * sech(x * x));
    assert!(pairing(&odd, &Field::from_fn(g, |_| 1.0)).unwrap().abs() < 1e-12);

    let p = Grid::periodic(20.0, 2048).unwrap();
    let s = Field::from_fn(p, sech);
    assert!((pairing(&s, &s).unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn symplectic_examples() {
    let g = Grid::periodic(20.0, 1024).unwrap();
    let f = Field::from_fn(g, sech);
    let u = Pair::new(f.clone(), Field::zeros(g)).unwrap();
    let v = Pair::new(Field::zeros(g), f.clone()).unwrap();
    assert!((symplectic_form(&u, &v).unwrap() - 2.0).abs() < 1e-6);
    let w = Pair::new(f.clone(), Field::from_fn(g, |x| x.sin() * sech(x))).unwrap();
    assert!(symplectic_form(&w, &w).unwrap().abs() < 1e-15);
    // Φ = (φ, iλφ)
    let lam = 0.6;
    let phi = Field::from_fn(g, |x| sech(x).powf(0.8));
    let big_phi = CPair::new(phi.to_complex(), phi.to_complex().scale(Complex64::new(0.0, lam))).unwrap();
    assert!(symplectic_form(&big_phi, &big_phi.conj()).unwrap().abs() < 1e-14);
}

#[test]
fn derivative_examples() {
    let g = Grid::periodic(std::f64::consts::PI * 4.0, 256).unwrap();
    let k = 1.5;
    let f = Field::from_fn(g, |x| (k * x).sin());
    let d = derivative(&f, 1).unwrap();
    let want = Field::from_fn(g, |x| k * (k * x).cos());
    assert!((&d - &want).max_abs() < 1e-8);
    assert!(derivative(&Field::from_fn(g, |_| 3.0), 1).unwrap().max_abs() < 1e-12);
    assert!(derivative(&f, 3).is_err());

    // clamped: tanh' = sech² at O(h⁴)
    let err = |n: usize| {
        let g = Grid::clamped(8.0, n).unwrap();
        let d = derivative(&Field::from_fn(g, |x| x.tanh()), 1).unwrap();
        (&d - &Field::from_fn(g, |x| sech(x).powi(2))).max_abs()
    };
    let (e1, e2) = (err(201), err(401));
    assert!(e1 < 1e-4, "{e1}");
    assert!((e1 / e2).log2() > 3.5, "{e1} {e2}");

    // first derivative twice against the second derivative
    let g = Grid::clamped(8.0, 401).unwrap();
    let f = Field::from_fn(g, |x| (-x * x).exp());
    let dd = derivative(&derivative(&f, 1).unwrap(), 1).unwrap();
    let d2 = derivative(&f, 2).unwrap();
    assert!((&dd - &d2).max_abs() < 1e-4);
}

#[test]
fn bessel_multiplier_examples() {
    let g = Grid::periodic(10.0, 128).unwrap();
    let k = 2.0 * std::f64::consts::PI * 3.0 / 20.0;
    let wave = CField::from_fn(g, |x| Complex64::new(0.0, k * x).exp());
    for exp in [-2, -1, 1, 3] {
        let out = bessel_multiplier(&wave, 0.3, exp).unwrap();
        let want = wave.scale(Complex64::new((1.0 + 0.09 * k * k).powf(exp as f64 / 2.0), 0.0));
        assert!((&out - &want).max_abs() < 1e-12);
    }
    let f = Field::from_fn(g, sech);
    assert_eq!(bessel_multiplier(&f, 0.0, 2).unwrap(), f);
    let c = Grid::clamped(10.0, 128).unwrap();
    assert!(bessel_multiplier(&Field::from_fn(c, sech), 0.2, 1).is_err());
    let round = bessel_multiplier(&bessel_multiplier(&f, 0.4, 2).unwrap(), 0.4, -2).unwrap();
    assert!((&round - &f).max_abs() < 1e-10);
}

/// `(⟨iε∂⟩^{-1} sech)(x)` from the transform `π sech(πk/2)` by direct quadrature in k.
fn smoothed_sech(x: f64, eps: f64) -> f64 {
    let (kmax, m) = (40.0, 8000);
    let dk = 2.0 * kmax / m as f64;
    (0..=m)
        .map(|i| {
            let k = -kmax + i as f64 * dk;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            w * std::f64::consts::PI * sech(std::f64::consts::PI * k / 2.0) * (k * x).cos() / (1.0 + eps * eps * k * k).sqrt()
        })
        .sum::<f64>()
        * dk
        / (2.0 * std::f64::consts::PI)
}

#[test]
fn multiplier_matches_sech_transform() {
    let g = Grid::periodic(30.0, 1024).unwrap();
    let out = bessel_multiplier(&Field::from_fn(g, sech), 0.5, -1).unwrap();
    for i in (0..g.len()).step_by(37) {
        let want = smoothed_sech(g.x(i), 0.5);
        assert!((out.values()[i] - want).abs() < 1e-8, "{} {} {}", g.x(i), out.values()[i], want);
    }
}

#[test]
fn norm_examples() {
    let g = Grid::clamped(20.0, 4001).unwrap();
    let p = WeightParams::defaults_for(1.0, 0.6, 2.0);
    for kind in [NormKind::H1, NormKind::H1MinusA, NormKind::SigmaA, NormKind::L2MinusKappa] {
        assert_eq!(weighted_norm(&Pair::zeros(g), kind, &p).unwrap(), 0.0);
    }
    let u = Pair::new(Field::from_fn(g, sech), Field::zeros(g)).unwrap();
    assert!((weighted_norm(&u, NormKind::H1, &p).unwrap() - (8.0f64 / 3.0).sqrt()).abs() < 1e-5);
    // ‖sech(κx) sech‖ by the same quadrature of the product
    let prod = Field::from_fn(g, |x| sech(p.kappa * x) * sech(x));
    assert!((weighted_norm(&u, NormKind::L2MinusKappa, &p).unwrap() - prod.norm()).abs() < 1e-14);
    let wide = Grid::clamped(2000.0, 4001).unwrap();
    assert!(weighted_norm(&Pair::zeros(wide), NormKind::SigmaExp, &p).is_err());
}

#[test]
fn weight_comparison_inequality() {
    let g = Grid::periodic(60.0, 2048).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for kappa in [0.04, 0.1] {
        for big_a in [2.0 / kappa, 4.0 / kappa] {
            let p = WeightParams { kappa, big_a, ..WeightParams::defaults_for(1.0, 0.6, 2.0) };
            for _ in 0..100 {
                let u = Pair::new(random_h1(g, &mut rng), random_h1(g, &mut rng)).unwrap();
                let lhs = weighted_norm(&u, NormKind::L2MinusKappa, &p).unwrap();
                let rhs = weighted_norm(&u, NormKind::SigmaA, &p).unwrap();
                assert!(lhs <= big_a * rhs * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn localized_weight_inequality() {
    // ⟨Wf,f⟩ ≤ C(‖⟨x⟩W‖₁‖f'‖² + ‖W‖₁⟨Uf,f⟩) with U = W = sech²; the pointwise argument on [-1, 1] gives C = 4
    let g = Grid::clamped(40.0, 4001).unwrap();
    let w = Field::from_fn(g, |x| sech(x).powi(2));
    let bracket_w = Field::from_fn(g, |x| (1.0 + x * x).sqrt() * sech(x).powi(2));
    let (l1_xw, l1_w) = (bracket_w.integrate(), w.integrate());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut c: f64 = 0.0;
    for _ in 0..100 {
        let f = random_h1(g, &mut rng);
        let lhs = pairing(&(&w * &f), &f).unwrap();
        let df = derivative(&f, 1).unwrap();
        let rhs = l1_xw * df.norm_sq() + l1_w * pairing(&(&w * &f), &f).unwrap();
        c = c.max(lhs / rhs);
    }
    assert!(c > 0.0 && c <= 4.0, "{c}");
}

#[test]
fn field_files_round_trip() {
    let dir = std::env::temp_dir().join(format!("nlkg-field-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let g = Grid::periodic(12.5, 128).unwrap();
    let f = Field::from_fn(g, |x| sech(x) * (3.0 * x).sin());
    let csv = dir.join("f.csv");
    write_field_csv(&csv, &f).unwrap();
    let (xs, vs) = read_field_csv(&csv).unwrap();
    assert_eq!(xs, g.xs());
    assert_eq!(vs, f.values());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x,value"));

    let bin = dir.join("f.bin");
    write_field_dump(&bin, &f).unwrap();
    let bytes = std::fs::read(&bin).unwrap();
    assert_eq!(&bytes[..4], b"NLKG");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(bytes.len(), 22 + 8 * 128);
    let back = read_field_dump(&bin).unwrap().into_field(Boundary::Periodic).unwrap();
    assert_eq!(back, f);
    let mut bad = encode_dump(&f);
    bad[0] = b'X';
    assert!(decode_dump(&bad).is_err());
    assert!(decode_dump(&encode_dump(&f)[..40]).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn single_precision_fields() {
    let g = Grid32::periodic(20.0, 512).unwrap();
    let s = Field32::from_fn(g, |x| 1.0 / x.cosh());
    assert!((pairing(&s, &s).unwrap() - 2.0).abs() < 1e-5);
    let d = derivative(&s, 1).unwrap();
    let want = Field32::from_fn(g, |x| -x.tanh() / x.cosh());
    assert!((&d - &want).max_abs() < 1e-4);
}

fn smooth_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-8.0..8.0f64, 0.5..3.0f64, -1.0..1.0f64), 1..4)
}

fn build(g: Grid, spec: &[(f64, f64, f64)]) -> Field {
    let mut f = Field::zeros(g);
    for &(c, w, a) in spec {
        f.axpy(a, &Field::from_fn(g, |x| (-(x - c).powi(2) / w).exp()));
    }
    f
}

proptest! {
    #[test]
    fn pairing_is_symmetric_and_bilinear(a in smooth_strategy(), b in smooth_strategy(), s in -2.0..2.0f64) {
        let g = Grid::periodic(20.0, 256).unwrap();
        let (f, h) = (build(g, &a), build(g, &b));
        let ab = pairing(&f, &h).unwrap();
        prop_assert!((ab - pairing(&h, &f).unwrap()).abs() < 1e-13);
        let lhs = pairing(&f.scale_real(s), &h).unwrap();
        prop_assert!((lhs - s * ab).abs() < 1e-12 * (1.0 + ab.abs()));
        prop_assert!((real_pairing(&f, &h).unwrap() - ab).abs() < 1e-14 * (1.0 + ab.abs()));
    }

    #[test]
    fn symplectic_form_is_antisymmetric(a in smooth_strategy(), b in smooth_strategy(), c in smooth_strategy(), d in smooth_strategy()) {
        let g = Grid::periodic(20.0, 256).unwrap();
        let u = Pair::new(build(g, &a), build(g, &b)).unwrap();
        let v = Pair::new(build(g, &c), build(g, &d)).unwrap();
        let s = symplectic_form(&u, &v).unwrap() + symplectic_form(&v, &u).unwrap();
        prop_assert!(s.abs() < 1e-13);
    }

    #[test]
    fn multiplier_powers_compose(a in smooth_strategy(), eps in 0.0..1.0f64, n in 1i32..4) {
        let g = Grid::periodic(20.0, 256).unwrap();
        let f = build(g, &a);
        let up = bessel_multiplier(&f, eps, n).unwrap();
        let back = bessel_multiplier(&up, eps, -n).unwrap();
        prop_assert!((&back - &f).max_abs() < 1e-10);
    }

    #[test]
    fn sech_weights_are_bounded(rate in 0.01..2.0f64) {
        let g = Grid::periodic(20.0, 256).unwrap();
        let w = sech_weight(&Field::zeros(g), rate);
        prop_assert!(w.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        prop_assert_eq!(w.values()[128], 1.0);
    }
}
