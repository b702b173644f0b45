use std::fs;
use std::path::PathBuf;

use nlkg_core::dynamics::Sponge;
use nlkg_core::field::io::{read_field_csv, read_field_dump};
use nlkg_core::scenario::{parse_override, parse_scenario, parse_scenario_with, run, Context, Manifest, PotentialSpec, Subcommand, Verdict};

const SMALL: &str = r#"
mass = 1.0
nonlinearity = { c2 = 1.0 }
seed = 3

[potential]
kind = "pt_well"
depth = 1.44

[grid]
half_width = 30.0
points = 600

[sim]
dt = 0.05
t_end = 20.0
sample_every = 10
"#;

fn canonical_text() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/canonical.toml");
    fs::read_to_string(path).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nlkg-scenario-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn with(overrides: &[(&str, &str)]) -> nlkg_core::scenario::Scenario {
    let ov: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    parse_scenario_with(SMALL, &ov).unwrap()
}

#[test]
fn canonical_file_resolves_one_mode() {
    let s = parse_scenario(&canonical_text()).unwrap();
    assert_eq!(s.mass, 1.0);
    assert_eq!(s.potential, PotentialSpec::PtWell { depth: 1.44 });
    assert_eq!(s.nonlinearity.get("c2"), Some(&1.0));
    assert_eq!(s.sim.sponge, Sponge::Layer { strength: 0.5, onset: 0.75 });
    // the spectrum pass on a smaller box of the same scenario: one eigenvalue, λ₁² = 1 − 0.8²
    let s = parse_scenario_with(&canonical_text(), &[("grid.half_width".into(), "30".into()), ("grid.points".into(), "3000".into())]).unwrap();
    let ctx = Context::new(&s, &scratch("canonical")).unwrap();
    assert_eq!(ctx.spectrum.count(), 1);
    assert!((ctx.spectrum.eigenvalues[0] - 0.36).abs() < 1e-5);
    let w = ctx.scenario.weights.clone();
    assert!((w.kappa.unwrap() - 0.04).abs() < 1e-4);
    assert!(w.big_a.unwrap() >= 2.0 / w.kappa.unwrap() * (1.0 - 1e-12));
    assert!(ctx.scenario.initial.is_some() && ctx.scenario.decay_rate == Some(2.0));
}

#[test]
fn malformed_scenarios_name_the_field() {
    let missing = SMALL.replace("nonlinearity = { c2 = 1.0 }", "");
    let e = parse_scenario(&missing).unwrap_err().to_string();
    assert!(e.contains("nonlinearity"), "{e}");
    let linear = SMALL.replace("{ c2 = 1.0 }", "{ c1 = 0.5, c2 = 1.0 }");
    let e = parse_scenario(&linear).unwrap_err().to_string();
    assert!(e.contains("c1"), "{e}");
    let unknown = format!("{SMALL}\nbogus = 1\n");
    let e = parse_scenario(&unknown).unwrap_err().to_string();
    assert!(e.contains("bogus"), "{e}");
    let e = parse_scenario(&SMALL.replace("points = 600", "points = \"many\"")).unwrap_err().to_string();
    assert!(e.contains("line"), "{e}");
    assert!(parse_scenario(&SMALL.replace("mass = 1.0", "mass = -1.0")).is_err());
    assert!(parse_override("grid.points").is_err());
}

#[test]
fn dotted_overrides() {
    let s = with(&[("grid.points", "800"), ("sim.sponge", "{ kind = \"layer\", strength = 0.25, onset = 0.75 }"), ("nonlinearity.c3", "0.5"), ("seed", "11")]);
    assert_eq!(s.grid.points, 800);
    assert_eq!(s.sim.sponge, Sponge::Layer { strength: 0.25, onset: 0.75 });
    assert_eq!(s.nonlinearity.get("c3"), Some(&0.5));
    assert_eq!(s.seed, 11);
    let text = SMALL.replace(
        "kind = \"pt_well\"\ndepth = 1.44",
        "kind = \"sum\"\nwells = [{ depth = 1.0 }, { depth = 0.3, center = 2.0 }]",
    );
    let s = parse_scenario_with(&text, &[("potential.wells.1.depth".into(), "0.4".into())]).unwrap();
    let PotentialSpec::Sum { wells } = &s.potential else { panic!() };
    assert_eq!(wells[1].depth, 0.4);
    assert_eq!(wells[1].width, 1.0);
    assert!(parse_scenario_with(&text, &[("potential.wells.5.depth".into(), "0.4".into())]).is_err());
    assert!(parse_scenario_with(SMALL, &[("grid.nonsense".into(), "1".into())]).is_err());
    let s = with(&[("sim.sponge.strength", "0.1"), ("sim.sponge.onset", "0.5"), ("sim.sponge.kind", "\"layer\"")]);
    assert_eq!(s.sim.sponge, Sponge::Layer { strength: 0.1, onset: 0.5 });
    assert_eq!(parse_override(" sim.dt = 0.01 ").unwrap(), ("sim.dt".to_string(), "0.01".to_string()));
}

#[test]
fn manifest_round_trip() {
    let out = scratch("manifest");
    let r = run(Subcommand::Spectrum, &with(&[]), &out).unwrap();
    assert_eq!(r.status, 0);
    let text = fs::read_to_string(r.dir.join("manifest.toml")).unwrap();
    let m = Manifest::parse(&text).unwrap();
    assert_eq!(m, r.manifest);
    // the echoed scenario is a fixed point of filling in defaults
    let again = Context::new(&m.scenario, &out.join("cache")).unwrap();
    assert_eq!(again.scenario, m.scenario);
    assert_eq!(parse_scenario(&m.scenario.to_toml().unwrap()).unwrap(), m.scenario);
    for (name, hash) in &m.outputs {
        assert_eq!(&nlkg_core::scenario::sha256_file(&r.dir.join(name)).unwrap(), hash);
    }
    assert!(m.outputs.contains_key("eigenfunction_1.csv") && m.outputs.contains_key("eigenfunction_1.bin"));
    let (x, v) = read_field_csv(&r.dir.join("eigenfunction_1.csv")).unwrap();
    let dump = read_field_dump(&r.dir.join("eigenfunction_1.bin")).unwrap();
    assert_eq!(x.len(), 600);
    assert_eq!(dump.values, v);
    assert_eq!(m.assumptions.generic, Verdict::Pass);
}

#[test]
fn runs_are_bit_identical() {
    let s = with(&[]);
    let (a, b) = (scratch("bit-a"), scratch("bit-b"));
    let ra = run(Subcommand::Simulate, &s, &a).unwrap();
    let rb = run(Subcommand::Simulate, &s, &b).unwrap();
    assert_eq!(ra.status, 0);
    assert_eq!(ra.manifest.outputs, rb.manifest.outputs);
    let ca = fs::read(ra.dir.join("series.csv")).unwrap();
    assert_eq!(ca, fs::read(rb.dir.join("series.csv")).unwrap());
    assert_eq!(String::from_utf8(ca).unwrap().lines().count(), 1 + 41);
    // the second run in the same directory reads the cached profile and reproduces it
    let rc = run(Subcommand::Simulate, &s, &a).unwrap();
    assert_eq!(rc.manifest.outputs, ra.manifest.outputs);
    assert!(fs::read_dir(a.join("cache")).unwrap().count() >= 2);
    // a different seed changes the initial phase
    let rd = run(Subcommand::Simulate, &with(&[("seed", "4")]), &b).unwrap();
    assert_ne!(rd.manifest.outputs["series.csv"], ra.manifest.outputs["series.csv"]);
}

#[test]
fn zero_amplitude_simulation_is_trivial() {
    let out = scratch("zero");
    let r = run(Subcommand::Simulate, &with(&[("sim.delta", "0.0")]), &out).unwrap();
    assert_eq!(r.status, 0);
    let text = fs::read_to_string(r.dir.join("series.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    let mut rows = 0;
    for line in lines {
        let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(vals[1..].iter().all(|&v| v == 0.0), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 41);
}

#[test]
fn indices_report() {
    let out = scratch("indices");
    let r = run(Subcommand::Indices, &with(&[]), &out).unwrap();
    assert_eq!(r.status, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(r.dir.join("indices.json")).unwrap()).unwrap();
    let t = &v["tables"];
    assert_eq!(t["M"], 2);
    let set = |key: &str| {
        let mut s: Vec<Vec<u64>> = t[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect())
            .collect();
        s.sort();
        s
    };
    assert_eq!(set("R_min"), vec![vec![0, 2], vec![2, 0]]);
    assert_eq!(set("NR"), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
}

#[test]
fn darboux_report() {
    let out = scratch("darboux");
    let s = with(&[("grid.boundary", "\"clamped\""), ("grid.points", "3001")]);
    let r = run(Subcommand::Darboux, &s, &out).unwrap();
    assert_eq!(r.status, 0);
    assert_eq!(r.manifest.assumptions.repulsive, Verdict::Pass);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(r.dir.join("darboux.json")).unwrap()).unwrap();
    assert_eq!(v["repulsive"]["pass"], true);
    let (x, vd) = read_field_csv(&r.dir.join("v_d.csv")).unwrap();
    let err = x.iter().zip(&vd).map(|(x, v)| (v - 0.16 / x.cosh().powi(2)).abs()).fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
    // a reflectionless well leaves V_D ≡ 0: nonzero exit
    let s = with(&[("mass", "2.0"), ("potential.depth", "2.0")]);
    let r = run(Subcommand::Darboux, &s, &scratch("darboux-free")).unwrap();
    assert_eq!(r.status, 2);
    assert_eq!(r.manifest.assumptions.repulsive, Verdict::Fail);
}

#[test]
fn failed_fgr_warns_and_exits_nonzero() {
    let s = with(&[("nonlinearity", "{ c3 = 1.0 }")]);
    let out = scratch("cubic");
    let r = run(Subcommand::Profile, &s, &out).unwrap();
    assert_eq!(r.status, 2);
    assert_eq!(r.manifest.assumptions.fgr, Verdict::Fail);
    let r = run(Subcommand::Simulate, &s, &out).unwrap();
    assert_eq!(r.status, 2);
    assert!(r.dir.join("series.csv").exists());
    assert!(r.manifest.run.warnings.iter().any(|w| w.contains("Fermi")));
}
