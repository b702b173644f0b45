//! Scenario files, dotted overrides, the subcommands and their run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::darboux::{build_chain, DarbouxChain, RepulsiveReport};
use crate::diagnostics::{csv_header, summary, write_series_csv, Diagnostics};
use crate::dynamics::{make_initial_data, simulate, InitialKind, SimConfig, Sponge};
use crate::error::{Error, Result};
use crate::field::io::{write_field_csv, write_field_dump};
use crate::field::{Boundary, WeightParams};
use crate::multiindex::{build_tables_unchecked, GenericReport, IndexTables};
use crate::profile::{Nonlinearity, RefinedProfile};
use crate::spectral::{discrete_spectrum, SchrodingerOperator, Spectrum};
use crate::{Field, Grid};

pub const MANIFEST_VERSION: u32 = 1;
/// Tolerance of the sign test on `x V_D'`.
pub const REPULSIVE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Well {
    pub depth: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

/// Trapping potential `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `−depth·sech²(x)`.
    PtWell { depth: f64 },
    /// `−Σ depth·sech²((x − center)/width)`.
    Sum { wells: Vec<Well> },
    /// Linear interpolation of samples, zero outside their range.
    Tabulated { x: Vec<f64>, v: Vec<f64> },
}

impl PotentialSpec {
    /// Exponential decay rate of the family, if it has one.
    pub fn natural_decay(&self) -> Option<f64> {
        match self {
            PotentialSpec::PtWell { .. } => Some(2.0),
            PotentialSpec::Sum { wells } => {
                let w = wells.iter().map(|w| w.width).fold(0.0, f64::max);
                (w > 0.0).then(|| 2.0 / w)
            }
            PotentialSpec::Tabulated { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parse(format!("potential: {m}")));
        match self {
            PotentialSpec::PtWell { depth } if !depth.is_finite() => bad("depth must be finite".into()),
            PotentialSpec::Sum { wells } if wells.is_empty() => bad("wells must not be empty".into()),
            PotentialSpec::Sum { wells } => {
                for (i, w) in wells.iter().enumerate() {
                    if !(w.width > 0.0) || !w.depth.is_finite() || !w.center.is_finite() {
                        return bad(format!("wells[{i}] needs finite depth and center and width > 0"));
                    }
                }
                Ok(())
            }
            PotentialSpec::Tabulated { x, v } => {
                if x.len() != v.len() || x.len() < 2 {
                    return bad("tabulated x and v need equal lengths of at least 2".into());
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("tabulated x must be strictly increasing".into());
                }
                if v.iter().any(|a| !a.is_finite()) {
                    return bad("tabulated v must be finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let sech2 = |t: f64| 1.0 / t.cosh().powi(2);
        match self {
            PotentialSpec::PtWell { depth } => -depth * sech2(x),
            PotentialSpec::Sum { wells } => wells.iter().map(|w| -w.depth * sech2((x - w.center) / w.width)).sum(),
            PotentialSpec::Tabulated { x: xs, v } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let k = xs.partition_point(|&p| p <= x).clamp(1, xs.len() - 1);
                let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                v[k - 1] + t * (v[k] - v[k - 1])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
    #[serde(default = "four")]
    pub stencil_order: usize,
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

fn four() -> usize {
    4
}

/// Weight parameters; unset entries take the spectrum-dependent defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub big_a: Option<f64>,
    #[serde(default, rename = "B", skip_serializing_if = "Option::is_none")]
    pub big_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
}

impl WeightsSpec {
    fn resolve(&self, base: WeightParams) -> WeightParams {
        WeightParams {
            a: self.a.unwrap_or(base.a),
            kappa: self.kappa.unwrap_or(base.kappa),
            big_a: self.big_a.unwrap_or(base.big_a),
            big_b: self.big_b.unwrap_or(base.big_b),
            eps: self.eps.unwrap_or(base.eps),
            a2: self.a2.unwrap_or(base.a2),
        }
    }

    fn filled(p: &WeightParams) -> Self {
        Self {
            a: Some(p.a),
            kappa: Some(p.kappa),
            big_a: Some(p.big_a),
            big_b: Some(p.big_b),
            eps: Some(p.eps),
            a2: Some(p.a2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    pub dt: f64,
    pub t_end: f64,
    pub sponge: Sponge,
    pub sample_every: usize,
    pub delta: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self { dt: 0.05, t_end: 200.0, sponge: Sponge::default(), sample_every: 10, delta: 0.01 }
    }
}

impl SimSpec {
    pub fn config(&self) -> SimConfig {
        SimConfig { dt: self.dt, t_end: self.t_end, sponge: self.sponge, sample_every: self.sample_every, delta: self.delta }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSpec {
    /// Window length of the continuation quantities.
    pub window: f64,
    /// Use `χ(x/A)` inside the virial weights instead of `χ(x)`.
    pub scaled_cutoff: bool,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self { window: 200.0, scaled_cutoff: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mass: f64,
    pub potential: PotentialSpec,
    /// Decay rate `a₁` of the potential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
    /// Coefficients `cℓ` of `f(u) = Σ cℓ uˡ`, keyed `c2`, `c3`, ...
    pub nonlinearity: BTreeMap<String, f64>,
    pub grid: GridSpec,
    #[serde(default)]
    pub weights: WeightsSpec,
    #[serde(default)]
    pub sim: SimSpec,
    /// Initial data; unset means one unit mode per eigenvalue with seeded random phases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialKind>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub seed: u64,
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `key` (dotted, numeric segments index arrays) to `raw` parsed as a TOML value.
pub fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse(format!("override key `{key}` has an empty segment")));
    }
    let mut root = toml::Value::Table(std::mem::take(table));
    let res = set_path(&mut root, &parts, parse_value(raw), key);
    if let toml::Value::Table(t) = root {
        *table = t;
    }
    res
}

fn set_path(root: &mut toml::Value, parts: &[&str], value: toml::Value, key: &str) -> Result<()> {
    let (last, path) = parts.split_last().expect("nonempty");
    let mut cur = root;
    for p in path {
        cur = step(cur, p, key)?;
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| Error::Parse(format!("override `{key}`: `{last}` is not an index")))?;
            let len = a.len();
            *a.get_mut(i).ok_or_else(|| Error::Parse(format!("override `{key}`: index {i} out of range {len}")))? = value;
        }
        _ => return Err(Error::Parse(format!("override `{key}`: parent is not a table or array"))),
    }
    Ok(())
}

fn step<'a>(cur: &'a mut toml::Value, p: &str, key: &str) -> Result<&'a mut toml::Value> {
    match cur {
        toml::Value::Table(t) => Ok(t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))),
        toml::Value::Array(a) => {
            let i: usize = p.parse().map_err(|_| Error::Parse(format!("override `{key}`: `{p}` is not an index")))?;
            let len = a.len();
            a.get_mut(i).ok_or_else(|| Error::Parse(format!("override `{key}`: index {i} out of range {len}")))
        }
        _ => Err(Error::Parse(format!("override `{key}`: `{p}` does not name a table"))),
    }
}

/// Parses and validates a scenario, applying `KEY=VALUE` overrides to the raw text first.
pub fn parse_scenario_with(text: &str, overrides: &[(String, String)]) -> Result<Scenario> {
    let scenario: Scenario = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        table.try_into().map_err(|e: toml::de::Error| Error::Parse(format!("scenario: {e}")))?
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_scenario_with(text, &[])
}

/// Splits `KEY=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse(format!("override `{s}` is not KEY=VALUE")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, m: String| Err(Error::Parse(format!("{field}: {m}")));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad("mass", format!("must be positive, got {}", self.mass));
        }
        self.potential.validate()?;
        if let Some(a1) = self.decay_rate {
            if !(a1 > 0.0 && a1.is_finite()) {
                return bad("decay_rate", format!("must be positive, got {a1}"));
            }
            if let Some(nat) = self.potential.natural_decay() {
                if a1 > nat * (1.0 + 1e-12) {
                    return bad("decay_rate", format!("{a1} exceeds the decay rate {nat} of the potential family"));
                }
            }
        } else if self.potential.natural_decay().is_none() {
            return bad("decay_rate", "required for tabulated potentials".into());
        }
        self.nonlinearity()?;
        Grid::new(self.grid.half_width, self.grid.points, self.grid.boundary)
            .map_err(|e| Error::Parse(format!("grid: {e}")))?;
        if self.grid.stencil_order != 2 && self.grid.stencil_order != 4 {
            return bad("grid.stencil_order", format!("must be 2 or 4, got {}", self.grid.stencil_order));
        }
        if !(self.diagnostics.window > 0.0) {
            return bad("diagnostics.window", "must be positive".into());
        }
        Ok(())
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let mut coeffs = vec![0.0; 2];
        for (k, &c) in &self.nonlinearity {
            let l: usize = k
                .strip_prefix('c')
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| Error::Parse(format!("nonlinearity: key `{k}` is not of the form c<degree>")))?;
            if l < 2 {
                return Err(Error::Parse(format!("nonlinearity.{k}: terms of degree < 2 violate f(0) = f'(0) = 0")));
            }
            if !c.is_finite() {
                return Err(Error::Parse(format!("nonlinearity.{k}: must be finite")));
            }
            if coeffs.len() <= l {
                coeffs.resize(l + 1, 0.0);
            }
            coeffs[l] = c;
        }
        Nonlinearity::new(coeffs).map_err(|e| Error::Parse(format!("nonlinearity: {e}")))
    }

    pub fn decay(&self) -> f64 {
        self.decay_rate.or_else(|| self.potential.natural_decay()).expect("validated")
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid.half_width, self.grid.points, self.grid.boundary).expect("validated")
    }

    pub fn operator(&self) -> Result<SchrodingerOperator> {
        let g = self.grid();
        SchrodingerOperator::from_fn(g, |x| self.potential.eval(x), self.mass * self.mass, self.grid.stencil_order)
    }

    /// Initial data kind, drawing the unset mode phases from the seed.
    pub fn initial_kind(&self, n_modes: usize) -> InitialKind {
        self.initial.clone().unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let z0 = (0..n_modes)
                .map(|_| {
                    let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    [th.cos(), th.sin()]
                })
                .collect();
            InitialKind::SingleMode { z0 }
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("scenario serialization: {e}")))
    }

    /// SHA-256 of the scenario subset that determines the operator (and the nonlinearity, if asked).
    pub fn cache_key(&self, with_nonlinearity: bool) -> String {
        let mut subset = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "mass": self.mass,
            "potential": self.potential,
            "grid": self.grid,
        });
        if with_nonlinearity {
            subset["nonlinearity"] = json!(self.nonlinearity);
        }
        hex(&Sha256::digest(subset.to_string().as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(&fs::read(path)?)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotChecked,
}

impl Verdict {
    pub fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Verdicts of the genericity, Fermi Golden Rule and repulsiveness assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    pub generic: Verdict,
    pub fgr: Verdict,
    pub repulsive: Verdict,
}

impl Default for Assumptions {
    fn default() -> Self {
        Self { generic: Verdict::NotChecked, fgr: Verdict::NotChecked, repulsive: Verdict::NotChecked }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub subcommand: String,
    pub tool_version: String,
    pub manifest_version: u32,
    pub seed: u64,
    pub operator_key: String,
    pub profile_key: String,
    pub status: i32,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// What a run leaves behind next to its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub assumptions: Assumptions,
    /// Output file name to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub scenario: Scenario,
}

impl Manifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("manifest serialization: {e}")))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        m.scenario.validate()?;
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Spectrum,
    Indices,
    Darboux,
    Profile,
    Simulate,
    Verify,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Indices => "indices",
            Subcommand::Darboux => "darboux",
            Subcommand::Profile => "profile",
            Subcommand::Simulate => "simulate",
            Subcommand::Verify => "verify",
        }
    }
}

/// Spectrum-level state shared by the subcommands.
pub struct Context {
    pub scenario: Scenario,
    pub op: SchrodingerOperator,
    pub spectrum: Spectrum,
    pub tables: IndexTables,
    pub generic: GenericReport,
    pub weights: WeightParams,
    pub cache_dir: PathBuf,
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

impl Context {
    /// Builds the operator and its spectrum (cached under `cache_root`) and fills in the weights.
    pub fn new(scenario: &Scenario, cache_root: &Path) -> Result<Self> {
        let op = scenario.operator()?;
        op.check_decay(scenario.decay())?;
        let cache_dir = cache_root.to_path_buf();
        fs::create_dir_all(&cache_dir)?;
        let spec_path = cache_dir.join(format!("spectrum-{}.json", scenario.cache_key(false)));
        let spectrum = match fs::read_to_string(&spec_path).ok().and_then(|t| serde_json::from_str::<Spectrum>(&t).ok()) {
            Some(s) => s,
            None => {
                let s = discrete_spectrum(&op)?;
                fs::write(&spec_path, serde_json::to_string(&s)?)?;
                s
            }
        };
        if spectrum.count() == 0 {
            return Err(Error::Assumption("the operator has no eigenvalue below the threshold".into()));
        }
        let lambda = spectrum.frequencies();
        let (tables, generic) = build_tables_unchecked(&lambda, scenario.mass)?;
        let lambda_top = *lambda.last().unwrap();
        let base = WeightParams::defaults_for(scenario.mass, lambda_top, scenario.decay());
        let weights = scenario.weights.resolve(base);
        weights.validate(scenario.mass, lambda_top, scenario.decay())?;
        let mut filled = scenario.clone();
        filled.weights = WeightsSpec::filled(&weights);
        filled.decay_rate = Some(scenario.decay());
        filled.initial = Some(scenario.initial_kind(spectrum.count()));
        Ok(Self { scenario: filled, op, spectrum, tables, generic, weights, cache_dir })
    }

    /// The refined profile, from the cache when the key matches.
    pub fn profile(&self) -> Result<RefinedProfile> {
        if !self.generic.ok() {
            return Err(Error::Assumption("genericity fails; the refined profile is not defined".into()));
        }
        let path = self.cache_dir.join(format!("profile-{}.json", self.scenario.cache_key(true)));
        if let Some(p) = fs::read_to_string(&path).ok().and_then(|t| RefinedProfile::from_json(&t).ok()) {
            return Ok(p);
        }
        let p = RefinedProfile::build_with_tables(&self.op, &self.spectrum, self.tables.clone(), &self.scenario.nonlinearity()?)?;
        fs::write(&path, p.to_json()?)?;
        Ok(p)
    }

    pub fn chain(&self) -> Result<DarbouxChain> {
        build_chain(&self.op, &self.spectrum)
    }

    pub fn repulsive(&self, chain: &DarbouxChain) -> Result<RepulsiveReport> {
        chain.check_repulsive(REPULSIVE_TOL)
    }
}

/// Outcome of one subcommand.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: i32,
    pub manifest: Manifest,
    pub dir: PathBuf,
    /// One line per verify criterion, empty otherwise.
    pub lines: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.insert(name.to_string(), String::new());
        self.dir.join(name)
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        let p = self.path(name);
        write_json(&p, v)
    }

    fn field(&mut self, stem: &str, f: &Field) -> Result<()> {
        let p = self.path(&format!("{stem}.csv"));
        write_field_csv(&p, f)?;
        let p = self.path(&format!("{stem}.bin"));
        write_field_dump(&p, f)
    }

    fn finish(mut self) -> Result<BTreeMap<String, String>> {
        for (name, hash) in self.files.iter_mut() {
            *hash = sha256_file(&self.dir.join(name))?;
        }
        Ok(self.files)
    }
}

fn multi_name(prefix: &str, flat: &[u32]) -> String {
    let parts: Vec<String> = flat.iter().map(|v| v.to_string()).collect();
    format!("{prefix}_{}", parts.join("_"))
}

/// Runs one subcommand, writing into `out/<subcommand>/` with the shared cache in `out/cache/`.
pub fn run(sub: Subcommand, scenario: &Scenario, out: &Path) -> Result<RunOutcome> {
    let dir = out.join(sub.name());
    fs::create_dir_all(&dir)?;
    let ctx = Context::new(scenario, &out.join("cache"))?;
    let mut outputs = Outputs { dir: dir.clone(), files: BTreeMap::new() };
    let mut assumptions = Assumptions { generic: Verdict::of(ctx.generic.ok()), ..Default::default() };
    let mut warnings = Vec::new();
    let mut status = 0;
    let mut lines = Vec::new();
    match sub {
        Subcommand::Spectrum => {
            outputs.json("spectrum.json", &ctx.spectrum.report())?;
            outputs.field("potential", ctx.op.potential())?;
            for (j, phi) in ctx.spectrum.eigenfunctions.iter().enumerate() {
                outputs.field(&format!("eigenfunction_{}", j + 1), phi)?;
            }
        }
        Subcommand::Indices => {
            let report = json!({
                "tables": ctx.tables.report(),
                "genericity": ctx.generic,
            });
            outputs.json("indices.json", &report)?;
            if !ctx.generic.ok() {
                status = 2;
            }
        }
        Subcommand::Darboux => {
            let chain = ctx.chain()?;
            let rep = ctx.repulsive(&chain)?;
            assumptions.repulsive = Verdict::of(rep.pass);
            let decay_ok = chain.check_vd_decay(ctx.scenario.decay()).is_ok();
            let report = json!({
                "steps": chain.len(),
                "removed_eigenvalues": chain.removed(),
                "matching_residuals": chain.matching_residuals(),
                "repulsive": rep,
                "v_d_decays": decay_ok,
            });
            outputs.json("darboux.json", &report)?;
            outputs.field("v_d", chain.v_d())?;
            if !rep.pass {
                status = 2;
            }
        }
        Subcommand::Profile => {
            let p = ctx.profile()?;
            let fgr_ok = p.fgr().iter().all(|e| e.assumption_ok);
            assumptions.fgr = Verdict::of(fgr_ok);
            let residuals: Vec<_> = p
                .recursion_residuals()?
                .into_iter()
                .map(|(m, r)| json!({"index": m.flat(), "residual": r}))
                .collect();
            let mut report = p.report();
            report["recursion_residuals"] = json!(residuals);
            report["tables"] = ctx.tables.report();
            outputs.json("profile.json", &report)?;
            for (m, c) in p.coeffs() {
                if m.plus >= m.minus {
                    let name = multi_name("coefficient", &m.flat());
                    outputs.field(&format!("{name}_first_re"), &c.first.re())?;
                    outputs.field(&format!("{name}_first_im"), &c.first.im())?;
                    outputs.field(&format!("{name}_second_re"), &c.second.re())?;
                    outputs.field(&format!("{name}_second_im"), &c.second.im())?;
                }
            }
            if !fgr_ok {
                status = 2;
            }
        }
        Subcommand::Simulate => {
            if !ctx.generic.ok() {
                let report = json!({"genericity": ctx.generic});
                outputs.json("refused.json", &report)?;
                status = 2;
                warnings.push("genericity fails: simulation refused".into());
            } else {
                let p = ctx.profile()?;
                let chain = ctx.chain()?;
                let fgr_ok = p.fgr().iter().all(|e| e.assumption_ok);
                let rep = ctx.repulsive(&chain)?;
                assumptions.fgr = Verdict::of(fgr_ok);
                assumptions.repulsive = Verdict::of(rep.pass);
                if !fgr_ok {
                    warnings.push("Fermi Golden Rule assumption fails".into());
                    status = 2;
                }
                if !rep.pass {
                    warnings.push("repulsiveness assumption fails".into());
                    status = 2;
                }
                let cfg = ctx.scenario.sim.config();
                let init = make_initial_data(&p, ctx.scenario.initial.as_ref().expect("filled"), Some(cfg.delta))?;
                let mut diag = Diagnostics::new(&p, &chain, &ctx.op, ctx.weights, ctx.scenario.diagnostics.scaled_cutoff);
                let mut series = Vec::new();
                let last = simulate(&p, &ctx.op, &cfg, &init.u, |snap| {
                    series.push(diag.record(snap)?);
                    Ok(())
                })?;
                let header = csv_header(p.dim(), &p.tables().r_min);
                let path = outputs.path("series.csv");
                write_series_csv(fs::File::create(&path)?, &header, &series)?;
                let lambda_top = *p.frequencies().last().unwrap();
                let mut s = summary(&series, ctx.scenario.diagnostics.window, lambda_top, diag.max_imag);
                s["initial_scale"] = json!(init.scale);
                for w in s["windows"].as_array().into_iter().flatten() {
                    if let Some(msg) = w["warning"].as_str() {
                        warnings.push(msg.to_string());
                        break;
                    }
                }
                outputs.json("summary.json", &s)?;
                outputs.field("final_first", &last.first)?;
                outputs.field("final_second", &last.second)?;
            }
        }
        Subcommand::Verify => {
            let report = crate::verify::run_suite(&ctx)?;
            for c in &report.criteria {
                lines.push(c.line());
            }
            assumptions = report.assumptions.clone();
            outputs.json("verify.json", &serde_json::to_value(&report)?)?;
            if !report.all_passed() {
                status = 1;
            }
        }
    }
    let manifest = Manifest {
        run: RunInfo {
            subcommand: sub.name().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            manifest_version: MANIFEST_VERSION,
            seed: ctx.scenario.seed,
            operator_key: ctx.scenario.cache_key(false),
            profile_key: ctx.scenario.cache_key(true),
            status,
            warnings,
        },
        assumptions,
        outputs: outputs.finish()?,
        scenario: ctx.scenario.clone(),
    };
    fs::write(dir.join("manifest.toml"), manifest.to_toml()?)?;
    Ok(RunOutcome { status, manifest, dir, lines })
}
