//! Experiment runner: configuration schema and parsing, orchestration of the
//! library modules, and the artifacts (CSV, binary snapshots, heatmaps,
//! manifest with checksums).
//!
//! The config format and every key are documented in `docs/config.md`.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::fronts::{
    calibrate_eps_alpha, compute_family, construct_front, decay_distance, far_field_gap, measure_k, run_stability,
    squeeze_evaluator, stability_sub_excess, transition_metrics, vertex_window_min, Calibration, ConstructConfig,
    FrontAssembly, FrontBundle, ResidualLattice, StabilityConfig, StabilityParams,
};
use crate::geometry::{build_polytope, planar_normal, surface_height, PolytopeSpec};
use crate::medium::{checkerboard_diffusion, cubic_homogeneous, cubic_striped, validate_medium, PeriodicMedium};
use crate::pulsating::{closed_form_error, compute_front, FrontConfig, FrontFamily, FrontOutcome};
use crate::solver::{check_comparison, Boundary, Field, Grid, SolverConfig};
use crate::speedmap::{build_speed_map, ConditionReport, check_theorem_conditions, reversed_override, SpeedMap, Variant, Verdict};
use crate::tolerances::{CFL_SAFETY, COMPARISON_SLACK, SANDWICH_SLACK};
use crate::{Error, Result};

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    ValidateMedium,
    FrontSpeed,
    SpeedMap,
    Surface,
    Conditions,
    BuildFront,
    VerifyBounds,
    Stability,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::ValidateMedium,
        Kind::FrontSpeed,
        Kind::SpeedMap,
        Kind::Surface,
        Kind::Conditions,
        Kind::BuildFront,
        Kind::VerifyBounds,
        Kind::Stability,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Kind::ValidateMedium => "validate-medium",
            Kind::FrontSpeed => "front-speed",
            Kind::SpeedMap => "speed-map",
            Kind::Surface => "surface",
            Kind::Conditions => "conditions",
            Kind::BuildFront => "build-front",
            Kind::VerifyBounds => "verify-bounds",
            Kind::Stability => "stability",
        }
    }

    pub fn parse(s: &str) -> Result<Kind> {
        Kind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind {s:?}")))
    }

    fn needs_geometry(self) -> bool {
        !matches!(self, Kind::ValidateMedium | Kind::FrontSpeed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum KeyType {
    Float,
    Int,
    FloatList,
    Auto,
    Choice(&'static [&'static str]),
    Path,
}

/// One documented key: section, name, type, default (`None` = required when
/// the section is used).
struct KeySpec {
    section: &'static str,
    key: &'static str,
    ty: KeyType,
    default: Option<&'static str>,
}

const PRESETS: &[&str] = &["cubic-homogeneous", "cubic-striped", "checkerboard"];
const KINDS: &[&str] = &[
    "validate-medium",
    "front-speed",
    "speed-map",
    "surface",
    "conditions",
    "build-front",
    "verify-bounds",
    "stability",
];

const SCHEMA: &[KeySpec] = &[
    KeySpec { section: "experiment", key: "kind", ty: KeyType::Choice(KINDS), default: None },
    KeySpec { section: "experiment", key: "seed", ty: KeyType::Int, default: Some("0") },
    KeySpec { section: "experiment", key: "output_dir", ty: KeyType::Path, default: None },
    KeySpec { section: "medium", key: "preset", ty: KeyType::Choice(PRESETS), default: Some("cubic-homogeneous") },
    KeySpec { section: "medium", key: "dim", ty: KeyType::Int, default: Some("2") },
    KeySpec { section: "medium", key: "theta", ty: KeyType::Float, default: Some("0.25") },
    KeySpec { section: "medium", key: "amplitude", ty: KeyType::Float, default: Some("0") },
    KeySpec { section: "medium", key: "a0", ty: KeyType::Float, default: Some("1") },
    KeySpec { section: "medium", key: "period", ty: KeyType::Float, default: Some("1") },
    KeySpec { section: "geometry", key: "e0", ty: KeyType::FloatList, default: None },
    KeySpec { section: "geometry", key: "facets", ty: KeyType::FloatList, default: Some("45, 135") },
    KeySpec { section: "geometry", key: "variant", ty: KeyType::Choice(&["existence", "uniqueness", "both"]), default: Some("existence") },
    KeySpec { section: "speedmap", key: "directions", ty: KeyType::Int, default: Some("16") },
    KeySpec { section: "speedmap", key: "override", ty: KeyType::Choice(&["none", "reversed"]), default: Some("none") },
    KeySpec { section: "speedmap", key: "override_c_hat", ty: KeyType::Float, default: Some("0.5") },
    KeySpec { section: "speedmap", key: "override_k", ty: KeyType::Float, default: Some("0.2") },
    KeySpec { section: "numerics", key: "h", ty: KeyType::Float, default: Some("0.25") },
    KeySpec { section: "numerics", key: "h_res", ty: KeyType::Float, default: Some("0.1") },
    KeySpec { section: "numerics", key: "dt", ty: KeyType::Auto, default: Some("auto") },
    KeySpec { section: "numerics", key: "direction", ty: KeyType::Float, default: Some("90") },
    KeySpec { section: "numerics", key: "eps", ty: KeyType::Auto, default: Some("auto") },
    KeySpec { section: "numerics", key: "alpha", ty: KeyType::Auto, default: Some("auto") },
    KeySpec { section: "numerics", key: "extent", ty: KeyType::Float, default: Some("20") },
    KeySpec { section: "numerics", key: "step", ty: KeyType::Float, default: Some("0.05") },
    KeySpec { section: "numerics", key: "sampling_density", ty: KeyType::Int, default: Some("16") },
    KeySpec { section: "numerics", key: "pairs", ty: KeyType::Int, default: Some("0") },
    KeySpec { section: "numerics", key: "first_horizon", ty: KeyType::Float, default: Some("40") },
    KeySpec { section: "numerics", key: "doublings", ty: KeyType::Int, default: Some("4") },
    KeySpec { section: "numerics", key: "half_width", ty: KeyType::Float, default: Some("28") },
    KeySpec { section: "numerics", key: "below", ty: KeyType::Float, default: Some("8") },
    KeySpec { section: "numerics", key: "above", ty: KeyType::Float, default: Some("34") },
    KeySpec { section: "numerics", key: "eta", ty: KeyType::Float, default: Some("0.2") },
    KeySpec { section: "numerics", key: "t_end", ty: KeyType::Float, default: Some("60") },
    KeySpec { section: "numerics", key: "ridge_radius", ty: KeyType::Float, default: Some("14") },
    KeySpec { section: "numerics", key: "bump", ty: KeyType::Float, default: Some("0.2") },
];

#[derive(Clone, Debug, PartialEq)]
pub enum Param {
    Auto,
    Value(f64),
}

impl Param {
    fn value(&self, what: &str) -> Result<f64> {
        match self {
            Param::Value(v) => Ok(*v),
            Param::Auto => Err(Error::Config(format!("{what} must be numeric for this kind"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MediumSpec {
    CubicHomogeneous { dim: usize, theta: f64, period: f64 },
    CubicStriped { dim: usize, theta: f64, amplitude: f64, period: f64 },
    Checkerboard { dim: usize, theta: f64, a0: f64, amplitude: f64, period: f64 },
}

impl MediumSpec {
    pub fn build(&self) -> Result<PeriodicMedium> {
        match *self {
            MediumSpec::CubicHomogeneous { dim, theta, period } => cubic_homogeneous(dim, theta, period),
            MediumSpec::CubicStriped { dim, theta, amplitude, period } => cubic_striped(dim, theta, amplitude, period),
            MediumSpec::Checkerboard { dim, theta, a0, amplitude, period } => {
                checkerboard_diffusion(dim, theta, a0, amplitude, period)
            }
        }
    }

    /// Constant cubic threshold, when the preset has one.
    fn homogeneous_theta(&self) -> Option<f64> {
        match *self {
            MediumSpec::CubicHomogeneous { theta, .. } => Some(theta),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub e0: Vec<f64>,
    /// Facet normal angles in degrees (N = 2).
    pub facets: Vec<f64>,
    pub variant: String,
}

impl GeometrySpec {
    pub fn polytope(&self) -> Result<PolytopeSpec> {
        let normals: Vec<Vec<f64>> = self.facets.iter().map(|d| planar_normal(d.to_radians())).collect();
        build_polytope(&self.e0, &normals)
    }

    fn variants(&self) -> Vec<Variant> {
        match self.variant.as_str() {
            "uniqueness" => vec![Variant::UniqueW],
            "both" => vec![Variant::ExistenceV, Variant::UniqueW],
            _ => vec![Variant::ExistenceV],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub medium: MediumSpec,
    pub geometry: Option<GeometrySpec>,
    pub output_dir: Option<PathBuf>,
    /// Resolved `section.key -> value` for every schema key, defaults included.
    pub values: BTreeMap<String, String>,
    /// The config text as given.
    pub source: String,
}

/// Parses and validates a config; nothing is computed.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, None, None)
}

/// As [`parse_config`], with the kind and seed given on the command line.
/// A kind in the file must then agree; the seed flag wins over the file.
pub fn parse_config_with(text: &str, kind: Option<Kind>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().to_string()))?;
    let mut given: BTreeMap<String, String> = BTreeMap::new();
    for (sec, body) in &table {
        let toml::Value::Table(body) = body else {
            return Err(Error::Config(format!("key {sec} outside of any section")));
        };
        if !SCHEMA.iter().any(|s| s.section == sec) {
            return Err(Error::Config(format!("unknown section [{sec}]")));
        }
        for (k, v) in body {
            let spec = SCHEMA
                .iter()
                .find(|s| s.section == sec && s.key == k)
                .ok_or_else(|| Error::Config(format!("unknown key {sec}.{k}")))?;
            let v = canonical(spec, v).map_err(Error::Config)?;
            check_type(spec, &v).map_err(Error::Config)?;
            given.insert(format!("{sec}.{k}"), v);
        }
    }
    let kind = match (kind, given.get("experiment.kind")) {
        (Some(k), Some(t)) if k.label() != t => {
            return Err(Error::Config(format!("kind {} on the command line, {t} in the config", k.label())))
        }
        (Some(k), _) => k,
        (None, Some(t)) => Kind::parse(t)?,
        (None, None) => return Err(Error::Config("missing key experiment.kind".into())),
    };
    if let Some(seed) = seed {
        given.insert("experiment.seed".into(), seed.to_string());
    }
    given.insert("experiment.kind".into(), kind.label().into());
    let has_geometry = given.keys().any(|k| k.starts_with("geometry."));
    if kind.needs_geometry() && !given.contains_key("geometry.e0") {
        return Err(Error::Config(format!("missing key geometry.e0 (required by {})", kind.label())));
    }
    let mut values = BTreeMap::new();
    for s in SCHEMA {
        let key = format!("{}.{}", s.section, s.key);
        if let Some(v) = given.get(&key) {
            values.insert(key, v.clone());
        } else if let Some(d) = s.default {
            values.insert(key, d.to_string());
        }
    }
    let get = |k: &str| values.get(k).map(String::as_str).unwrap_or("");
    let f = |k: &str| get(k).parse::<f64>().unwrap_or(f64::NAN);
    let dim: usize = get("medium.dim").parse().unwrap_or(0);
    let medium = match get("medium.preset") {
        "cubic-striped" => MediumSpec::CubicStriped {
            dim,
            theta: f("medium.theta"),
            amplitude: f("medium.amplitude"),
            period: f("medium.period"),
        },
        "checkerboard" => MediumSpec::Checkerboard {
            dim,
            theta: f("medium.theta"),
            a0: f("medium.a0"),
            amplitude: f("medium.amplitude"),
            period: f("medium.period"),
        },
        _ => MediumSpec::CubicHomogeneous {
            dim,
            theta: f("medium.theta"),
            period: f("medium.period"),
        },
    };
    let geometry = if kind.needs_geometry() || has_geometry {
        match values.get("geometry.e0") {
            Some(e0) => Some(GeometrySpec {
                e0: parse_list(e0).map_err(Error::Config)?,
                facets: parse_list(get("geometry.facets")).map_err(Error::Config)?,
                variant: get("geometry.variant").to_string(),
            }),
            None => None,
        }
    } else {
        None
    };
    let cfg = ExperimentConfig {
        kind,
        seed: get("experiment.seed").parse().unwrap_or(0),
        medium,
        geometry,
        output_dir: values.get("experiment.output_dir").map(PathBuf::from),
        values,
        source: text.to_string(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number")))
        .collect()
}

/// TOML value to the internal string form: numbers as written by Rust,
/// lists comma-separated, strings bare.
fn canonical(spec: &KeySpec, v: &toml::Value) -> std::result::Result<String, String> {
    use toml::Value as V;
    let num = |v: &V| match v {
        V::Integer(i) => Some(*i as f64),
        V::Float(f) => Some(*f),
        _ => None,
    };
    let out = match (spec.ty, v) {
        (KeyType::Int, V::Integer(i)) => Some(i.to_string()),
        (KeyType::Float, v) => num(v).map(|x| x.to_string()),
        (KeyType::Auto, V::String(t)) => Some(t.clone()),
        (KeyType::Auto, v) => num(v).map(|x| x.to_string()),
        (KeyType::FloatList, V::Array(a)) => a
            .iter()
            .map(|x| num(x).map(|x| x.to_string()))
            .collect::<Option<Vec<_>>>()
            .map(|l| l.join(", ")),
        (KeyType::Choice(_) | KeyType::Path, V::String(t)) => Some(t.clone()),
        _ => None,
    };
    out.ok_or_else(|| format!("{}.{} = {v}: expected {}", spec.section, spec.key, expected(spec.ty)))
}

fn expected(ty: KeyType) -> String {
    match ty {
        KeyType::Float => "a finite number".to_string(),
        KeyType::Int => "a non-negative integer".to_string(),
        KeyType::FloatList => "an array of numbers".to_string(),
        KeyType::Auto => "\"auto\" or a number".to_string(),
        KeyType::Choice(c) => format!("one of {}", c.join(", ")),
        KeyType::Path => "a path string".to_string(),
    }
}

fn check_type(spec: &KeySpec, v: &str) -> std::result::Result<(), String> {
    let name = format!("{}.{}", spec.section, spec.key);
    let finite = |p: &str| p.parse::<f64>().ok().filter(|x| x.is_finite()).is_some();
    let ok = match spec.ty {
        KeyType::Float => finite(v),
        KeyType::Int => v.parse::<u64>().is_ok(),
        KeyType::FloatList => parse_list(v).map(|l| !l.is_empty() && l.iter().all(|x| x.is_finite())).unwrap_or(false),
        KeyType::Auto => v == "auto" || finite(v),
        KeyType::Choice(c) => c.contains(&v),
        KeyType::Path => !v.is_empty(),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{name} = {v:?}: expected {}", expected(spec.ty)))
    }
}

impl ExperimentConfig {
    fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn float(&self, key: &str) -> f64 {
        self.get(key).parse().unwrap_or(f64::NAN)
    }

    pub fn int(&self, key: &str) -> usize {
        self.get(key).parse().unwrap_or(0)
    }

    pub fn param(&self, key: &str) -> Param {
        match self.get(key) {
            "auto" => Param::Auto,
            v => Param::Value(v.parse().unwrap_or(f64::NAN)),
        }
    }

    fn text(&self, key: &str) -> &str {
        self.get(key)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            "medium.period",
            "numerics.h",
            "numerics.h_res",
            "numerics.extent",
            "numerics.step",
            "numerics.first_horizon",
            "numerics.half_width",
            "numerics.below",
            "numerics.above",
            "numerics.eta",
            "numerics.t_end",
        ];
        for k in positive {
            if !(self.float(k) > 0.0) {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        let dim = self.int("medium.dim");
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("medium.dim = {dim} must be 1, 2 or 3")));
        }
        for k in ["numerics.dt", "numerics.eps", "numerics.alpha"] {
            if let Param::Value(v) = self.param(k) {
                if !(v > 0.0) {
                    return Err(Error::Config(format!("{k} must be `auto` or positive")));
                }
            }
        }
        if let Some(g) = &self.geometry {
            if g.e0.len() != dim {
                return Err(Error::Config(format!("geometry.e0 has {} components, medium.dim = {dim}", g.e0.len())));
            }
            if dim != 2 {
                return Err(Error::Config("geometry kinds are planar (medium.dim = 2)".into()));
            }
        }
        if self.kind == Kind::Surface && self.param("numerics.alpha") == Param::Auto {
            return Err(Error::Config("numerics.alpha must be numeric for kind = surface".into()));
        }
        Ok(())
    }

    fn geometry(&self) -> Result<&GeometrySpec> {
        self.geometry
            .as_ref()
            .ok_or_else(|| Error::Config("missing [geometry] section".into()))
    }

    /// Every resolved setting as TOML.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut last = "";
        for spec in SCHEMA {
            let key = format!("{}.{}", spec.section, spec.key);
            if let Some(v) = self.values.get(&key) {
                if spec.section != last {
                    let _ = writeln!(s, "[{}]", spec.section);
                    last = spec.section;
                }
                let float = |x: &str| toml::Value::Float(x.trim().parse().unwrap_or(f64::NAN)).to_string();
                let shown = match spec.ty {
                    KeyType::FloatList => format!("[{}]", v.split(',').map(float).collect::<Vec<_>>().join(", ")),
                    KeyType::Float => float(v),
                    KeyType::Auto if v != "auto" => float(v),
                    KeyType::Int => v.clone(),
                    _ => toml::Value::String(v.clone()).to_string(),
                };
                let _ = writeln!(s, "{} = {shown}", spec.key);
            }
        }
        s
    }
}

/// One line of the run summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub assertions: Vec<Assertion>,
    /// Output files relative to the artifact directory.
    pub files: Vec<PathBuf>,
    /// Free-form lines for the summary block.
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion::new(name, passed, detail));
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        for a in &self.assertions {
            let _ = writeln!(s, "{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
        }
        s
    }
}

/// Buffered CSV table written with 17 significant digits.
struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    fn nums(&mut self, v: &[f64]) {
        self.row(&v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>());
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    report: RunReport,
}

impl Artifacts<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, table: Csv) -> Result<()> {
        self.text(name, &table.text)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        self.report.files.push(PathBuf::from(name));
        Ok(())
    }

    fn field(&mut self, name: &str, f: &Field) -> Result<()> {
        f.write(&self.path(name))?;
        self.report.files.push(PathBuf::from(name));
        Ok(())
    }

    fn heatmap(&mut self, name: &str, f: &Field) -> Result<()> {
        emit_heatmap(f, &self.path(name))?;
        self.report.files.push(PathBuf::from(name));
        Ok(())
    }
}

/// Grayscale pixmap (P6, equal channels): `[0, 1]` maps linearly to black..white.
/// Image row `j` is the grid line with last-axis index `j`, image column `i`
/// the first-axis index. Values outside `[-0.1, 1.1]` are a divergence fault.
pub fn emit_heatmap(field: &Field, path: &Path) -> Result<()> {
    let g = &field.grid;
    let (nx, ny) = match g.dim() {
        1 => (g.counts[0], 1),
        2 => (g.counts[0], g.counts[1]),
        d => return Err(Error::Config(format!("heatmaps need N <= 2, got {d}"))),
    };
    if let Some((i, v)) = field
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(-0.1..=1.1).contains(*v))
    {
        return Err(Error::Divergence {
            node: i,
            x: g.physical(i),
            t: field.time,
            value: *v,
        });
    }
    let mut buf = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    for j in 0..ny {
        for i in 0..nx {
            let v = field.values[i * ny + j].clamp(0.0, 1.0);
            let b = (v * 255.0).round() as u8;
            buf.extend_from_slice(&[b, b, b]);
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory: the flag, else `OUTPUT_DIR`, else the config, else `./out`.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os("OUTPUT_DIR") {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")),
    }
}

/// Runs the experiment, then writes `summary.txt` and `manifest.txt`. A module
/// fault is recorded in the manifest with its source chain and returned.
pub fn run(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<RunReport> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let started = Instant::now();
    let mut art = Artifacts {
        dir: out,
        report: RunReport::default(),
    };
    let outcome = dispatch(cfg, &mut art);
    let elapsed = started.elapsed().as_secs_f64();
    let fault = outcome.as_ref().err().map(fault_chain);
    let mut report = art.report;
    if let Some(chain) = &fault {
        report.notes.push(format!("FAULT {chain}"));
    }
    let summary = report.summary();
    let spath = out.join("summary.txt");
    fs::write(&spath, &summary).map_err(|e| Error::io(&spath, e))?;
    report.files.push(PathBuf::from("summary.txt"));

    let mut m = String::new();
    let _ = writeln!(m, "rdfront {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "kind = {}", cfg.kind.label());
    let _ = writeln!(m, "seed = {}", cfg.seed);
    let _ = writeln!(m, "workers = {workers}");
    let _ = writeln!(m, "status = {}", if fault.is_some() { "fault" } else if report.passed() { "pass" } else { "fail" });
    let _ = writeln!(m, "elapsed_seconds = {elapsed:.3}");
    let _ = writeln!(m, "\n# resolved configuration");
    m.push_str(&cfg.echo());
    let _ = writeln!(m, "\n# files (sha256)");
    for f in &report.files {
        let p = out.join(f);
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let _ = writeln!(m, "{}  {}", sha256_hex(&bytes), f.display());
    }
    if let Some(chain) = &fault {
        let _ = writeln!(m, "\n# fault\n{chain}");
    }
    let mpath = out.join("manifest.txt");
    fs::write(&mpath, m).map_err(|e| Error::io(&mpath, e))?;
    outcome.map(|_| report)
}

fn fault_chain(e: &Error) -> String {
    let mut s = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(c) = src {
        let _ = write!(s, "\n  caused by: {c}");
        src = c.source();
    }
    s
}

fn dispatch(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let medium = cfg.medium.build()?;
    art.report.notes.push(format!("kind {} on medium {}", cfg.kind.label(), medium.name));
    match cfg.kind {
        Kind::ValidateMedium => run_validate(cfg, &medium, art),
        Kind::FrontSpeed => run_front_speed(cfg, &medium, art),
        Kind::SpeedMap => run_speed_map(cfg, &medium, art),
        Kind::Surface => run_surface(cfg, art),
        Kind::Conditions => run_conditions(cfg, &medium, art),
        Kind::BuildFront => run_build(cfg, &medium, art).map(|_| ()),
        Kind::VerifyBounds => run_verify(cfg, &medium, art),
        Kind::Stability => run_stability_kind(cfg, &medium, art),
    }
}

/// Smooth field in `[0, 1]`: a few Gaussian bumps, rescaled.
pub fn random_smooth_field(grid: &Grid, rng: &mut impl Rng) -> Field {
    let d = grid.dim();
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..5)
        .map(|_| {
            let c = (0..d).map(|k| rng.gen_range(grid.lower[k]..=grid.upper(k))).collect();
            (c, rng.gen_range(1.0..4.0), rng.gen_range(0.2..1.0))
        })
        .collect();
    let mut f = Field::from_fn(grid, 0.0, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                a * (-r2 / (w * w)).exp()
            })
            .sum()
    });
    let top = f.max().max(1e-12);
    f.values.iter_mut().for_each(|v| *v = (*v / top).clamp(0.0, 1.0));
    f
}

/// `low <= high` built from two random smooth fields.
pub fn random_ordered_pair(grid: &Grid, rng: &mut impl Rng) -> (Field, Field) {
    let a = random_smooth_field(grid, rng);
    let b = random_smooth_field(grid, rng);
    let mut low = a.clone();
    let mut high = a;
    for ((l, h), bv) in low.values.iter_mut().zip(high.values.iter_mut()).zip(&b.values) {
        *l *= 0.6;
        *h = (*h * 0.6 + 0.4 * bv).min(1.0);
    }
    (low, high)
}

fn run_validate(cfg: &ExperimentConfig, medium: &PeriodicMedium, art: &mut Artifacts) -> Result<()> {
    let rep = validate_medium(medium, cfg.int("numerics.sampling_density"))?;
    let mut t = Csv::new(&["check", "passed", "margin", "witness", "detail"]);
    for c in &rep.checks {
        let witness = c
            .witness
            .as_ref()
            .map(|w| w.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        t.row(&[c.name.clone(), c.passed.to_string(), fmt17(c.margin), witness, c.detail.replace(',', ";")]);
        art.report.check(format!("medium {}", c.name), c.passed, format!("margin {:.3e}", c.margin));
    }
    art.csv("validation.csv", t)?;
    let header: Vec<String> = (1..=medium.dim).map(|k| format!("x{k}")).chain(["theta".into()]).collect();
    let mut t = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (x, th) in &rep.theta_samples {
        let mut row = x.clone();
        row.push(*th);
        t.nums(&row);
    }
    art.csv("theta.csv", t)?;
    art.report
        .notes
        .push(format!("cell integral of f = {:.6e} (balanced: {})", rep.h1_integral, rep.h1_boundary));

    let pairs = cfg.int("numerics.pairs");
    if pairs > 0 {
        let h = cfg.float("numerics.h");
        let ext = cfg.float("numerics.extent");
        let grid = Grid::new(&vec![-ext; medium.dim], &vec![ext; medium.dim], &vec![h; medium.dim], Boundary::ZeroFlux)?;
        let scfg = SolverConfig::explicit(&grid, medium, cfg.float("numerics.t_end"), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut t = Csv::new(&["pair", "min_gap", "time_of_min", "passed"]);
        let mut worst = f64::INFINITY;
        let mut all = true;
        for k in 0..pairs {
            let (lo, hi) = random_ordered_pair(&grid, &mut rng);
            let r = check_comparison(medium, &lo, &hi, &scfg)?;
            let ok = r.fault.is_none() && r.min_gap >= -COMPARISON_SLACK;
            all &= ok;
            worst = worst.min(r.min_gap);
            t.row(&[k.to_string(), fmt17(r.min_gap), fmt17(r.time_of_min), ok.to_string()]);
        }
        art.csv("comparison.csv", t)?;
        art.report.check(
            format!("comparison principle over {pairs} seeded pairs"),
            all,
            format!("worst gap {worst:.3e} (slack {COMPARISON_SLACK:.0e})"),
        );
    }
    Ok(())
}

fn front_config(cfg: &ExperimentConfig, h: f64) -> FrontConfig {
    let mut fc = FrontConfig::new(h);
    if let Param::Value(dt) = cfg.param("numerics.dt") {
        fc.dt = Some(dt);
    }
    fc
}

fn run_front_speed(cfg: &ExperimentConfig, medium: &PeriodicMedium, art: &mut Artifacts) -> Result<()> {
    let h = cfg.float("numerics.h");
    let angle = cfg.float("numerics.direction");
    let e: Vec<f64> = match medium.dim {
        1 => vec![if angle.to_radians().cos() >= 0.0 { 1.0 } else { -1.0 }],
        2 => planar_normal(angle.to_radians()),
        _ => {
            let mut v = vec![0.0; medium.dim];
            v[0] = angle.to_radians().cos();
            v[1] = angle.to_radians().sin();
            v
        }
    };
    let outcome = compute_front(medium, &e, &front_config(cfg, h))?;
    let (speed, stderr) = outcome.speed().unwrap_or((f64::NAN, f64::NAN));
    let mut t = Csv::new(&["angle_deg", "speed", "stderr", "outcome"]);
    t.row(&[fmt17(angle), fmt17(speed), fmt17(stderr), outcome.label().into()]);
    art.csv("front.csv", t)?;
    art.report.notes.push(format!("c = {speed:.8} +- {stderr:.2e} ({})", outcome.label()));
    art.report.check("front detected", outcome.speed().is_some(), outcome.label());
    if let FrontOutcome::Converged(front) = &outcome {
        let p = &front.profile;
        let header: Vec<String> = std::iter::once("xi".to_string())
            .chain((0..p.values.len()).map(|c| format!("u_cell{c}")))
            .collect();
        let mut t = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        for j in 0..p.len() {
            let mut row = vec![p.xi(j)];
            row.extend(p.values.iter().map(|r| r[j]));
            t.nums(&row);
        }
        art.csv("profile.csv", t)?;
        front.write(&art.path("profile.bin"))?;
        art.report.files.push("profile.bin".into());
        if let Some(d) = &front.decay {
            art.report.notes.push(format!("decay mu = {:.6} (flagged: {})", d.mu, d.flagged));
        }
    }
    if let Some(theta) = cfg.medium.homogeneous_theta() {
        let exact = (1.0 - 2.0 * theta) / SQRT_2;
        if exact.abs() < 1e-12 {
            art.report.check("balanced speed |c| <= 1e-2", speed.abs() <= 1e-2, format!("c = {speed:.3e}"));
        } else {
            let rel = (speed - exact).abs() / exact.abs();
            art.report.check(
                "speed within 2% of (1 - 2 theta)/sqrt 2",
                rel <= 0.02,
                format!("c = {speed:.6}, closed form {exact:.6}, relative {rel:.2e}"),
            );
        }
        if let FrontOutcome::Converged(front) = &outcome {
            let err = closed_form_error(front, theta)?;
            art.report.check("profile within 1% of the closed form", err <= 0.01, format!("sup error {err:.3e}"));
            if let Some(d) = &front.decay {
                let rel = (d.mu - 1.0 / SQRT_2).abs() * SQRT_2;
                art.report.check("decay mu within 10% of 1/sqrt 2", rel <= 0.1, format!("mu = {:.5}", d.mu));
            }
        }
    }
    Ok(())
}

fn speed_map_for(cfg: &ExperimentConfig, medium: &PeriodicMedium, e0: &[f64]) -> Result<SpeedMap> {
    let count = cfg.int("speedmap.directions");
    if cfg.text("speedmap.override") == "reversed" {
        let g = cfg.geometry()?;
        let poly = g.polytope()?;
        let s = poly.normals.iter().map(|e| e[1]).fold(f64::INFINITY, f64::min);
        let f = reversed_override(cfg.float("speedmap.override_c_hat"), cfg.float("speedmap.override_k"), s);
        return SpeedMap::from_override(e0, f, count.max(8));
    }
    build_speed_map(medium, e0, count, &front_config(cfg, cfg.float("numerics.h")))
}

fn run_speed_map(cfg: &ExperimentConfig, medium: &PeriodicMedium, art: &mut Artifacts) -> Result<()> {
    let g = cfg.geometry()?;
    let map = speed_map_for(cfg, medium, &g.e0)?;
    let mut t = Csv::new(&["angle_deg", "e_x", "e_y", "speed", "stderr", "outcome"]);
    for s in &map.samples {
        let a = s.direction[1].atan2(s.direction[0]).to_degrees();
        t.row(&[fmt17(a), fmt17(s.direction[0]), fmt17(s.direction[1]), fmt17(s.speed), fmt17(s.stderr), s.outcome.clone()]);
    }
    art.csv("speedmap.csv", t)?;
    art.report
        .check("every direction shows a front", !map.is_partial(), format!("{} failing", map.failed.len()));
    if medium.homogeneous {
        let speeds: Vec<f64> = map.samples.iter().map(|s| s.speed).collect();
        let lo = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = speeds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        let spread = (hi - lo) / mean.abs().max(1e-12);
        art.report.check("isotropic spread <= 2%", spread <= 0.02, format!("relative spread {spread:.3e}"));
    }
    Ok(())
}

fn run_surface(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let g = cfg.geometry()?;
    let poly = g.polytope()?;
    let alpha = cfg.param("numerics.alpha").value("numerics.alpha")?;
    let ext = cfg.float("numerics.extent");
    let step = cfg.float("numerics.step");
    let n = (ext / step).round() as i64;
    let mut t = Csv::new(&["x", "phi", "height", "h", "grad", "normal_x", "normal_y"]);
    let symmetric = g.facets.len() == 2
        && (g.facets[0] - 45.0).abs() < 1e-12
        && (g.facets[1] - 135.0).abs() < 1e-12
        && (alpha - 1.0).abs() < 1e-15;
    let mut worst = 0.0_f64;
    let mut h0 = f64::NAN;
    for k in -n..=n {
        let x = k as f64 * step;
        let s = surface_height(&poly, &[x], alpha)?;
        t.nums(&[x, s.phi, s.height, s.h, s.grad[0], s.normal[0], s.normal[1]]);
        if symmetric {
            let exact = SQRT_2 * (2.0 * (x / SQRT_2).cosh()).ln();
            worst = worst.max((s.phi - exact).abs());
        }
        if k == 0 {
            h0 = s.h;
        }
    }
    art.csv("surface.csv", t)?;
    if symmetric {
        art.report
            .check("phi matches sqrt2 ln(2 cosh(x/sqrt2)) to 1e-10", worst <= 1e-10, format!("max error {worst:.3e}"));
        art.report
            .check("h(0) = 1/2 to 1e-12", (h0 - 0.5).abs() <= 1e-12, format!("h(0) = {h0:.15}"));
    }
    Ok(())
}

fn run_conditions(cfg: &ExperimentConfig, medium: &PeriodicMedium, art: &mut Artifacts) -> Result<()> {
    let g = cfg.geometry()?;
    let poly = g.polytope()?;
    let map = speed_map_for(cfg, medium, &g.e0)?;
    let mut t = Csv::new(&["variant", "condition", "verdict", "margin", "error", "detail"]);
    let mut signs = Csv::new(&["variant", "i", "j", "grad_g_ei_dot_ej"]);
    let mut passing = Vec::new();
    let mut text = String::new();
    for v in g.variants() {
        let rep = check_theorem_conditions(&map, &poly, v)?;
        for c in &rep.conditions {
            t.row(&[
                v.label().into(),
                c.name.into(),
                format!("{:?}", c.verdict).to_lowercase(),
                fmt17(c.margin),
                fmt17(c.error),
                c.detail.replace(',', ";"),
            ]);
        }
        for (i, j, val) in &rep.sign_table {
            signs.row(&[v.label().into(), (i + 1).to_string(), (j + 1).to_string(), fmt17(*val)]);
        }
        text.push_str(&rep.text());
        let verdicts: Vec<String> = rep
            .conditions
            .iter()
            .map(|c| format!("({}) {:?}", c.name, c.verdict))
            .collect();
        art.report.notes.push(format!("{}: {}", v.label(), verdicts.join(", ")));
        if g.variants().len() == 1 {
            art.report.check(format!("{} conditions pass", v.label()), rep.passed(), failing(&rep));
        }
        if rep.passed() {
            passing.push(v);
        }
    }
    art.csv("conditions.csv", t)?;
    art.csv("sign_table.csv", signs)?;
    art.text("conditions.txt", &text)?;
    if g.variants().len() == 2 {
        art.report.check(
            "variants never both pass",
            passing.len() < 2,
            format!(
                "passing: {}",
                if passing.is_empty() { "none".to_string() } else { passing.iter().map(|v| v.label()).collect::<Vec<_>>().join("; ") }
            ),
        );
    }
    Ok(())
}

fn failing(rep: &ConditionReport) -> String {
    let bad: Vec<String> = rep
        .conditions
        .iter()
        .filter(|c| c.verdict != Verdict::Pass)
        .map(|c| format!("({}) {:?}", c.name, c.verdict))
        .collect();
    if bad.is_empty() {
        "all pass".into()
    } else {
        bad.join(", ")
    }
}

/// Facet angles plus three interior directions in every gap, as radians.
/// `outside` adds a direction that many degrees beyond each end facet.
fn family_angles(g: &GeometrySpec, outside: f64) -> Vec<f64> {
    let mut a: Vec<f64> = g.facets.clone();
    a.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    if outside > 0.0 {
        out.push(a[0] - outside);
    }
    for w in a.windows(2) {
        for k in 0..4 {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / 4.0);
        }
    }
    out.push(*a.last().unwrap());
    if outside > 0.0 {
        out.push(a[a.len() - 1] + outside);
    }
    out.into_iter().map(f64::to_radians).collect()
}

fn family_at(cfg: &ExperimentConfig, medium: &PeriodicMedium, h: f64, outside: f64) -> Result<FrontFamily> {
    let dt = match cfg.param("numerics.dt") {
        Param::Value(v) => v,
        Param::Auto => CFL_SAFETY * h * h / 4.0,
    };
    compute_family(medium, &family_angles(cfg.geometry()?, outside), h, dt, &front_config(cfg, h))
}

/// Calibration rows as CSV.
fn calibration_csv(cal: &Calibration) -> Csv {
    let mut t = Csv::new(&["eps", "alpha", "super_min", "sub_max", "order_min", "super_ok", "sub_ok", "order_ok"]);
    for r in &cal.rows {
        t.row(&[
            fmt17(r.eps),
            fmt17(r.alpha),
            fmt17(r.super_min),
            fmt17(r.sub_max),
            fmt17(r.order_min),
            r.super_ok.to_string(),
            r.sub_ok.to_string(),
            r.order_ok.to_string(),
        ]);
    }
    t
}

/// Speed map, conditions, (optional) calibration and the assembly on the
/// construction lattice.
fn assemble<'m>(cfg: &ExperimentConfig, medium: &'m PeriodicMedium, art: &mut Artifacts) -> Result<FrontAssembly<'m>> {
    let g = cfg.geometry()?;
    let poly = g.polytope()?;
    let variant = *g.variants().first().unwrap();
    let map = speed_map_for(cfg, medium, &g.e0)?;
    let report = check_theorem_conditions(&map, &poly, variant)?;
    art.text("conditions.txt", &report.text())?;
    let h = cfg.float("numerics.h");
    let (eps, alpha) = match (cfg.param("numerics.eps"), cfg.param("numerics.alpha")) {
        (Param::Value(e), Param::Value(a)) => (e, a),
        (pe, pa) => {
            let h_res = cfg.float("numerics.h_res");
            let fine = family_at(cfg, medium, h_res, 0.0)?;
            let probe = FrontAssembly::new(medium, poly.clone(), fine, &report, 0.5 * medium.sigma, 0.1)?;
            let cal = calibrate_eps_alpha(&probe, &ResidualLattice::new(h_res), &window_spec(cfg).window)?;
            art.csv("calibration.csv", calibration_csv(&cal))?;
            let (ce, ca) = cal.pair()?;
            let eps = if let Param::Value(e) = pe { e } else { ce };
            let alpha = if let Param::Value(a) = pa { a } else { ca };
            art.report.notes.push(format!("calibrated eps = {eps:.6}, alpha = {alpha:.6}"));
            (eps, alpha)
        }
    };
    let family = family_at(cfg, medium, h, 0.0)?;
    FrontAssembly::new(medium, poly, family, &report, eps, alpha)
}

fn window_spec(cfg: &ExperimentConfig) -> ConstructConfig {
    let mut c = ConstructConfig::new(cfg.float("numerics.h"));
    c.window.half_width = cfg.float("numerics.half_width");
    c.window.below = cfg.float("numerics.below");
    c.window.above = cfg.float("numerics.above");
    c.first_horizon = cfg.float("numerics.first_horizon");
    c.max_doublings = cfg.int("numerics.doublings");
    if let Param::Value(dt) = cfg.param("numerics.dt") {
        c.dt = Some(dt);
    }
    c
}

fn run_build<'m>(
    cfg: &ExperimentConfig,
    medium: &'m PeriodicMedium,
    art: &mut Artifacts,
) -> Result<(FrontAssembly<'m>, FrontBundle)> {
    let asm = assemble(cfg, medium, art)?;
    let ccfg = window_spec(cfg);
    let bundle = construct_front(&asm, &ccfg)?;
    let mut t = Csv::new(&["horizon", "sup_difference"]);
    for (h, d) in &bundle.cauchy {
        t.nums(&[*h, *d]);
    }
    art.csv("cauchy.csv", t)?;
    art.field("front.bin", bundle.limit())?;
    art.heatmap("front.ppm", bundle.limit())?;
    let mut t = Csv::new(&["time", "x", "y"]);
    for (time, pts) in &bundle.interfaces {
        for p in pts {
            t.nums(&[*time, p[0], p[1]]);
        }
    }
    art.csv("interfaces.csv", t)?;

    let s = bundle.sandwich;
    let rep = &mut art.report;
    rep.notes.push(format!("c_hat = {:.8}, eps = {:.6}, alpha = {:.6}", asm.c_hat, asm.eps, asm.alpha));
    rep.check("lower sandwich >= -1e-8", s.lower >= -SANDWICH_SLACK, format!("min(u - lower) = {:.3e}", s.lower));
    rep.check("upper sandwich >= -1e-8", s.upper >= -SANDWICH_SLACK, format!("min(upper - u) = {:.3e}", s.upper));
    rep.check(
        "monotone in time >= -1e-8",
        s.monotone >= -SANDWICH_SLACK,
        format!("min u(t+dt) - u(t) = {:.3e}", s.monotone),
    );
    rep.check(
        "horizon doubling converged",
        bundle.converged,
        format!("last difference {:.3e}", bundle.cauchy.last().map_or(f64::NAN, |c| c.1)),
    );
    let d = decay_distance(&asm, cfg.float("numerics.eta"), 0.05, 400.0)?;
    let gap = far_field_gap(&asm, &bundle, d)?;
    let bound = 2.0 * asm.eps + 5e-3;
    let reach = (bundle.config.window.half_width).min(bundle.config.window.above);
    art.report.check(
        "far field |V - V_under| <= 2 eps + 5e-3",
        gap <= bound && d < reach,
        format!("D = {d:.3} (window reach {reach:.1}), gap {gap:.3e}, bound {bound:.3e}"),
    );
    let mut t = Csv::new(&["quantity", "value"]);
    t.row(&["decay_distance".into(), fmt17(d)]);
    t.row(&["far_field_gap".into(), fmt17(gap)]);
    match transition_metrics(&asm, &bundle, &[0.05, 0.5]) {
        Ok(m) => {
            t.row(&["drift_speed".into(), fmt17(m.drift_speed)]);
            t.row(&["drift_stderr".into(), fmt17(m.drift_stderr)]);
            t.row(&["inf_distance_rate".into(), fmt17(m.inf_distance_rate)]);
            for (e, w) in &m.widths {
                t.row(&[format!("width_{e}"), fmt17(*w)]);
            }
        }
        Err(e) => art.report.notes.push(format!("transition metrics unavailable: {e}")),
    }
    art.csv("metrics.csv", t)?;
    Ok((asm, bundle))
}

fn run_verify(cfg: &ExperimentConfig, medium: &PeriodicMedium, art: &mut Artifacts) -> Result<()> {
    let g = cfg.geometry()?;
    let poly = g.polytope()?;
    let map = speed_map_for(cfg, medium, &g.e0)?;
    let report = check_theorem_conditions(&map, &poly, *g.variants().first().unwrap())?;
    let h_res = cfg.float("numerics.h_res");
    let fine = family_at(cfg, medium, h_res, 20.0)?;
    let probe = FrontAssembly::new(medium, poly, fine, &report, 0.5 * medium.sigma, 0.1)?;
    let lattice = ResidualLattice::new(h_res);
    let win = window_spec(cfg).window;
    let cal = calibrate_eps_alpha(&probe, &lattice, &win)?;
    art.csv("calibration.csv", calibration_csv(&cal))?;
    let tol = cal.tol;
    let best_super = cal.rows.iter().filter(|r| r.order_ok).map(|r| r.super_min).fold(f64::NEG_INFINITY, f64::max);
    let best_sub = cal.rows.iter().filter(|r| r.order_ok).map(|r| r.sub_max).fold(f64::INFINITY, f64::min);
    art.report.check(
        "some (eps, alpha) gives N V_bar >= -tol",
        best_super >= -tol,
        format!("best min N V_bar = {best_super:.3e}, tol {tol:.3e}"),
    );
    art.report.check(
        "some (eps, alpha) gives N W_under <= +tol",
        best_sub <= tol,
        format!("best max N W_under = {best_sub:.3e}, tol {tol:.3e}"),
    );
    let (eps, alpha) = match (cfg.param("numerics.eps"), cfg.param("numerics.alpha"), cal.chosen) {
        (Param::Value(e), Param::Value(a), _) => (e, a),
        (_, _, Some(p)) => p,
        _ => (0.5 * medium.sigma, 0.1),
    };
    let asm = probe.with_params(eps, alpha)?.with_stability_weights(&vec![0.25; g.facets.len()])?;
    let mut t = Csv::new(&["quantity", "value"]);
    let grid = win.grid(0.0)?;
    for i in 0..g.facets.len() {
        let ex = stability_sub_excess(&asm, i, &grid, 0.0)?;
        t.row(&[format!("stab_sub_excess_{}", i + 1), fmt17(ex)]);
        art.report.check(
            format!("stability sub-bound {} below its piece", i + 1),
            ex <= SANDWICH_SLACK,
            format!("max excess {ex:.3e}"),
        );
    }
    let half = 2.0;
    let m1 = vertex_window_min(&asm, half, h_res)?;
    let m4 = vertex_window_min(&asm.with_params(eps, alpha / 4.0)?, half, h_res)?;
    t.row(&["vertex_min_alpha".into(), fmt17(m1)]);
    t.row(&["vertex_min_quarter_alpha".into(), fmt17(m4)]);
    art.csv("bounds.csv", t)?;
    art.report.check(
        "quartering alpha lifts V_bar near the ridge to >= 1 - 2 eps",
        m4 >= 1.0 - 2.0 * eps && m4 >= m1,
        format!("min {m1:.6} -> {m4:.6}, target {:.6}", 1.0 - 2.0 * eps),
    );
    Ok(())
}

fn run_stability_kind(cfg: &ExperimentConfig, medium: &PeriodicMedium, art: &mut Artifacts) -> Result<()> {
    let (asm, bundle) = run_build(cfg, medium, art)?;
    let v0 = bundle.limit().clone();
    let amp = cfg.float("numerics.bump");
    let bump = |p: &[f64]| (-(p[0] * p[0] + p[1] * p[1]) / 4.0).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centres: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-0.1..0.1)))
        .collect();
    let random = |p: &[f64]| -> f64 {
        centres
            .iter()
            .map(|(cx, cy, a)| a * (-((p[0] - cx).powi(2) + (p[1] - cy).powi(2)) / 4.0).exp())
            .sum()
    };
    let perturb = |g: &dyn Fn(&[f64], f64) -> f64| {
        let mut f = v0.clone();
        for (i, v) in f.values.iter_mut().enumerate() {
            *v = g(&v0.grid.physical(i), *v).clamp(0.0, 1.0);
        }
        f
    };
    let cases: Vec<(&str, Field)> = vec![
        ("ridge-bump", perturb(&|p, v| v + amp * bump(p))),
        ("planar-mix", perturb(&|p, _| asm.eval_planar_mix(0.0, p))),
        ("seeded-random", perturb(&|p, v| v + random(p))),
    ];
    let scfg = StabilityConfig::new(cfg.float("numerics.t_end"), cfg.float("numerics.ridge_radius"));
    let mut t = Csv::new(&["case", "time", "gap", "shift"]);
    for (name, u0) in &cases {
        let s = run_stability(&asm, &bundle, u0, &scfg)?;
        for k in 0..s.times.len() {
            t.row(&[name.to_string(), fmt17(s.times[k]), fmt17(s.gaps[k]), fmt17(s.shifts[k])]);
        }
        art.report.check(
            format!("{name}: s(T) <= 0.05 and decreasing late"),
            s.passed,
            format!("s(0) {:.3e}, s(T) {:.3e}, late slope {:.2e}", s.gaps[0], s.final_gap(), s.late_slope),
        );
    }
    art.csv("stability.csv", t)?;

    let lattice = ResidualLattice::new(cfg.float("numerics.h_res"));
    let base = |t: f64, p: &[f64]| Ok(asm.eval_planar_mix(t, p));
    let k = measure_k(&lattice, asm.c_hat, medium.sigma, &base)?;
    let params = StabilityParams::new(medium, k, 0.25 * medium.sigma, vec![1.0; asm.polytope.len()])?;
    let mut t = Csv::new(&["quantity", "value"]);
    t.row(&["k".into(), fmt17(k)]);
    t.row(&["lambda".into(), fmt17(params.lambda)]);
    t.row(&["omega".into(), fmt17(params.omega)]);
    let sub = squeeze_evaluator(&base, params, -1.0).check(medium, &lattice, asm.c_hat)?;
    t.row(&["squeezed_sub_margin".into(), fmt17(sub)]);
    art.csv("squeeze.csv", t)?;
    art.report.notes.push(format!("squeeze: k = {k:.4e}, squeezed-sub margin {sub:+.3e}"));
    Ok(())
}
