//! INI run configurations.
//!
//! ```ini
//! [lattice]
//! a = 8
//! V0 = 0.002
//! alpha = 0.3
//! n_s = 1.42
//! lambda = 0.633
//!
//! [drive]
//! Lambda = 10000
//! gamma = 2.405
//! ```
//!
//! Sections `lattice`, `drive`, `grid` and `run`; every key is optional
//! except the lattice geometry and, when a `drive` section is present,
//! `Lambda` plus exactly one of `F0`, `F0_over_Fc` or `gamma`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ini::Ini;
use ptcrystal_core::bragg::critical_force;
use ptcrystal_core::lattice::{LatticeSpec, PotentialForm};
use ptcrystal_core::quasienergy::DriveSpec;
use ptcrystal_core::Complex64;
use sha2::{Digest, Sha256};

use crate::propagator::{AbsorberSpec, Grid, PropagatorError};

/// One rejected key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Every violation found in a config, in file order of sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<&str> = self.violations.iter().map(|v| v.message.as_str()).collect();
        f.write_str(&lines.join("\n"))
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn single(key: &str, message: impl Into<String>) -> Self {
        Self { violations: vec![Violation { key: key.into(), message: message.into() }] }
    }

    pub fn mentions(&self, key: &str) -> bool {
        self.violations.iter().any(|v| v.key == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveAmplitude {
    F0,
    OverCritical,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    pub spec: DriveSpec,
    /// Which key fixed the amplitude, and its value.
    pub given_as: (DriveAmplitude, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub grid: Grid,
    /// `None` selects `Λ/20000`.
    pub dz: Option<f64>,
    pub absorber: Option<AbsorberSpec>,
}

/// Command-specific knobs with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub n_kappa: usize,
    pub m_max: usize,
    pub n_bands: usize,
    pub band: usize,
    pub dk: f64,
    pub reality_tol: f64,
    pub validity_threshold: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub gamma_points: usize,
    pub quasi_steps: usize,
    pub quasi_kappa_points: usize,
    /// `None` selects one drive period.
    pub z_end: Option<f64>,
    pub record_every: usize,
    pub snapshot_every: usize,
    pub w: f64,
    pub x0: f64,
    pub k0: f64,
    pub n_max: u32,
    pub output: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_kappa: 64,
            m_max: 12,
            n_bands: 2,
            band: 0,
            dk: 1e-4,
            reality_tol: 1e-9,
            validity_threshold: 0.1,
            alpha_min: 0.0,
            alpha_max: 1.5,
            alpha_points: 151,
            gamma_min: 0.0,
            gamma_max: 6.0,
            gamma_points: 601,
            quasi_steps: 4096,
            quasi_kappa_points: 64,
            z_end: None,
            record_every: 10,
            snapshot_every: 0,
            w: 20.0,
            x0: 0.0,
            k0: 0.0,
            n_max: 3,
            output: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    pub drive: Option<DriveConfig>,
    pub grid: GridConfig,
    pub run: RunSection,
    /// Hex SHA-256 of the config text.
    pub hash: String,
}

impl RunConfig {
    pub fn z_end(&self) -> Option<f64> {
        self.run.z_end.or(self.drive.map(|d| d.spec.period))
    }

    pub fn dz(&self) -> Option<f64> {
        self.grid.dz.or(self.drive.map(|d| d.spec.period / 20000.0))
    }
}

const LATTICE_KEYS: &[&str] = &["a", "V0", "alpha", "n_s", "lambda", "form", "harmonics"];
const DRIVE_KEYS: &[&str] = &["Lambda", "F0", "F0_over_Fc", "gamma"];
const GRID_KEYS: &[&str] = &["length", "center", "points", "dz", "absorber", "absorber_width", "absorber_strength"];
const RUN_KEYS: &[&str] = &[
    "n_kappa",
    "m_max",
    "n_bands",
    "band",
    "dk",
    "reality_tol",
    "validity_threshold",
    "alpha_min",
    "alpha_max",
    "alpha_points",
    "gamma_min",
    "gamma_max",
    "gamma_points",
    "quasi_steps",
    "quasi_kappa_points",
    "z_end",
    "record_every",
    "snapshot_every",
    "w",
    "x0",
    "k0",
    "n_max",
    "output",
];

struct Reader {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    errors: Vec<Violation>,
}

impl Reader {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn push(&mut self, key: String, message: String) {
        self.errors.push(Violation { key, message });
    }

    fn number(&mut self, section: &str, key: &str) -> Option<f64> {
        let raw = self.raw(section, key)?.to_string();
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.push(format!("{section}.{key}"), format!("{section}.{key} must be a finite number (got '{raw}')"));
                None
            }
        }
    }

    fn float(&mut self, section: &str, key: &str, default: f64, ok: fn(f64) -> bool, requirement: &str) -> f64 {
        match self.number(section, key) {
            Some(v) if ok(v) => v,
            Some(v) => {
                self.push(format!("{section}.{key}"), format!("{section}.{key} must be {requirement} (got {v})"));
                default
            }
            None => default,
        }
    }

    fn count(&mut self, section: &str, key: &str, default: usize, min: usize) -> usize {
        let Some(raw) = self.raw(section, key).map(str::to_string) else { return default };
        match raw.trim().parse::<usize>() {
            Ok(v) if v >= min => v,
            _ => {
                self.push(format!("{section}.{key}"), format!("{section}.{key} must be an integer >= {min} (got '{raw}')"));
                default
            }
        }
    }
}

fn positive(v: f64) -> bool {
    v > 0.0
}

fn non_negative(v: f64) -> bool {
    v >= 0.0
}

fn any(_: f64) -> bool {
    true
}

/// Reads and validates `path`.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single("file", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Validates config text, collecting every violation.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::single("file", format!("malformed config: {e}")))?;
    let mut reader = Reader { sections: BTreeMap::new(), errors: Vec::new() };
    for (section, props) in ini.iter() {
        let Some(name) = section else {
            for (k, _) in props.iter() {
                reader.push(k.to_string(), format!("{k} must belong to a section"));
            }
            continue;
        };
        let allowed = match name {
            "lattice" => LATTICE_KEYS,
            "drive" => DRIVE_KEYS,
            "grid" => GRID_KEYS,
            "run" => RUN_KEYS,
            other => {
                reader.push(other.to_string(), format!("[{other}] is not a recognized section"));
                continue;
            }
        };
        let entry = reader.sections.entry(name.to_string()).or_default();
        let mut unknown = Vec::new();
        for (k, v) in props.iter() {
            if allowed.contains(&k) {
                entry.insert(k.to_string(), v.to_string());
            } else {
                unknown.push(k.to_string());
            }
        }
        for k in unknown {
            reader.push(format!("{name}.{k}"), format!("{name}.{k} is not a recognized key"));
        }
    }

    let lattice = read_lattice(&mut reader);
    let drive = read_drive(&mut reader, &lattice);
    let grid = read_grid(&mut reader);
    let run = read_run(&mut reader);

    if !reader.errors.is_empty() {
        return Err(ConfigError { violations: reader.errors });
    }
    Ok(RunConfig { lattice, drive, grid, run, hash: hex_sha256(text.as_bytes()) })
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_lattice(r: &mut Reader) -> LatticeSpec {
    if !r.sections.contains_key("lattice") {
        r.push("lattice".into(), "[lattice] section is required".into());
    }
    let required = |r: &mut Reader, key: &str| {
        if r.raw("lattice", key).is_none() && r.sections.contains_key("lattice") {
            r.push(format!("lattice.{key}"), format!("lattice.{key} is required"));
        }
        r.number("lattice", key).unwrap_or(f64::NAN)
    };
    let period = required(r, "a");
    let wavelength = required(r, "lambda");
    let substrate_index = required(r, "n_s");
    let depth = r.number("lattice", "V0").unwrap_or(0.0);
    let alpha = r.number("lattice", "alpha").unwrap_or(0.0);
    let form = match r.raw("lattice", "form").unwrap_or("cos_sin").trim() {
        "cos_sin" => PotentialForm::CosSin,
        "single_exp" => PotentialForm::SingleExp,
        "custom" => PotentialForm::CustomFourier(read_harmonics(r)),
        other => {
            let msg = format!("lattice.form must be one of cos_sin, single_exp, custom (got '{other}')");
            r.push("lattice.form".into(), msg);
            PotentialForm::CosSin
        }
    };
    if !matches!(form, PotentialForm::CustomFourier(_)) && r.raw("lattice", "harmonics").is_some() {
        r.push("lattice.harmonics".into(), "lattice.harmonics requires form = custom".into());
    }
    let spec = LatticeSpec { period, depth, alpha, substrate_index, wavelength, form };
    // missing keys were reported above
    let mut checked = spec.clone();
    for v in [&mut checked.period, &mut checked.wavelength, &mut checked.substrate_index] {
        if v.is_nan() {
            *v = 1.0;
        }
    }
    for e in checked.violations() {
        let key = match &e {
            ptcrystal_core::lattice::LatticeError::Invalid { field, .. } => format!("lattice.{field}"),
            ptcrystal_core::lattice::LatticeError::DuplicateHarmonic(_) => "lattice.harmonics".into(),
        };
        r.push(key, e.to_string());
    }
    spec
}

/// `harmonics = m:re:im, m:re:im, ...`
fn read_harmonics(r: &mut Reader) -> Vec<(i32, Complex64)> {
    let Some(raw) = r.raw("lattice", "harmonics").map(str::to_string) else {
        r.push("lattice.harmonics".into(), "lattice.harmonics is required for form = custom".into());
        return Vec::new();
    };
    let mut out = Vec::new();
    for item in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        let parsed = match parts.as_slice() {
            [m, re, im] => match (m.parse::<i32>(), re.parse::<f64>(), im.parse::<f64>()) {
                (Ok(m), Ok(re), Ok(im)) if re.is_finite() && im.is_finite() => Some((m, Complex64::new(re, im))),
                _ => None,
            },
            _ => None,
        };
        match parsed {
            Some(h) => out.push(h),
            None => r.push(
                "lattice.harmonics".into(),
                format!("lattice.harmonics entries must read m:re:im (got '{item}')"),
            ),
        }
    }
    out
}

fn read_drive(r: &mut Reader, lattice: &LatticeSpec) -> Option<DriveConfig> {
    if !r.sections.contains_key("drive") {
        return None;
    }
    let period = match r.number("drive", "Lambda") {
        Some(v) => v,
        None if r.raw("drive", "Lambda").is_none() => {
            r.push("drive.Lambda".into(), "drive.Lambda is required".into());
            f64::NAN
        }
        None => f64::NAN,
    };
    let given: Vec<(DriveAmplitude, &str)> = [
        (DriveAmplitude::F0, "F0"),
        (DriveAmplitude::OverCritical, "F0_over_Fc"),
        (DriveAmplitude::Gamma, "gamma"),
    ]
    .into_iter()
    .filter(|(_, k)| r.raw("drive", k).is_some())
    .collect();
    if given.len() != 1 {
        r.push(
            "drive.F0".into(),
            format!("drive needs exactly one of F0, F0_over_Fc, gamma (got {})", given.len()),
        );
        return None;
    }
    let (kind, key) = given[0];
    let value = r.number("drive", key)?;
    if value < 0.0 {
        r.push(format!("drive.{key}"), format!("drive.{key} must be >= 0 (got {value})"));
    }
    let probe = DriveSpec::cosine(0.0, period);
    let spec = match kind {
        DriveAmplitude::F0 => DriveSpec::cosine(value, period),
        DriveAmplitude::OverCritical => DriveSpec::cosine(value * critical_force(lattice, &probe), period),
        DriveAmplitude::Gamma => DriveSpec::from_gamma(value, period, lattice),
    };
    let mut problems = false;
    if !period.is_nan() {
        for e in DriveSpec::cosine(0.0, period).violations() {
            problems = true;
            r.push("drive.Lambda".into(), e.to_string());
        }
    }
    if period.is_nan() || problems || value < 0.0 || !lattice.violations().is_empty() {
        return None;
    }
    Some(DriveConfig { spec, given_as: (kind, value) })
}

fn read_grid(r: &mut Reader) -> GridConfig {
    let length = r.float("grid", "length", 512.0, positive, "> 0");
    let center = r.float("grid", "center", 0.0, any, "finite");
    let points = r.count("grid", "points", 4096, 16);
    let dz = r.number("grid", "dz");
    if let Some(v) = dz {
        if !(v > 0.0) {
            r.push("grid.dz".into(), format!("grid.dz must be > 0 (got {v})"));
        }
    }
    let grid = Grid { x_min: center - 0.5 * length, x_max: center + 0.5 * length, n_points: points };
    let enabled = match r.raw("grid", "absorber").map(str::trim) {
        None | Some("on") => true,
        Some("off") => false,
        Some(other) => {
            r.push("grid.absorber".into(), format!("grid.absorber must be on or off (got '{other}')"));
            true
        }
    };
    let defaults = AbsorberSpec::default_for(&grid);
    let width = r.number("grid", "absorber_width").unwrap_or(defaults.width);
    let strength = r.number("grid", "absorber_strength").unwrap_or(defaults.strength);
    let absorber = AbsorberSpec { width, strength };
    for e in absorber.violations(&grid) {
        if let PropagatorError::InvalidAbsorber { field, reason } = e {
            r.push(format!("grid.absorber_{field}"), format!("grid.absorber_{field} {reason}"));
        }
    }
    GridConfig { grid, dz: dz.filter(|v| *v > 0.0), absorber: enabled.then_some(absorber) }
}

fn read_run(r: &mut Reader) -> RunSection {
    let d = RunSection::default();
    let s = "run";
    let mut run = RunSection {
        n_kappa: r.count(s, "n_kappa", d.n_kappa, 8),
        m_max: r.count(s, "m_max", d.m_max, 1),
        n_bands: r.count(s, "n_bands", d.n_bands, 1),
        band: r.count(s, "band", d.band, 0),
        dk: r.float(s, "dk", d.dk, positive, "> 0"),
        reality_tol: r.float(s, "reality_tol", d.reality_tol, positive, "> 0"),
        validity_threshold: r.float(s, "validity_threshold", d.validity_threshold, positive, "> 0"),
        alpha_min: r.float(s, "alpha_min", d.alpha_min, non_negative, ">= 0"),
        alpha_max: r.float(s, "alpha_max", d.alpha_max, positive, "> 0"),
        alpha_points: r.count(s, "alpha_points", d.alpha_points, 2),
        gamma_min: r.float(s, "gamma_min", d.gamma_min, non_negative, ">= 0"),
        gamma_max: r.float(s, "gamma_max", d.gamma_max, positive, "> 0"),
        gamma_points: r.count(s, "gamma_points", d.gamma_points, 3),
        quasi_steps: r.count(s, "quasi_steps", d.quasi_steps, 16),
        quasi_kappa_points: r.count(s, "quasi_kappa_points", d.quasi_kappa_points, 8),
        z_end: None,
        record_every: r.count(s, "record_every", d.record_every, 1),
        snapshot_every: r.count(s, "snapshot_every", d.snapshot_every, 0),
        w: r.float(s, "w", d.w, positive, "> 0"),
        x0: r.float(s, "x0", d.x0, any, "finite"),
        k0: r.float(s, "k0", d.k0, any, "finite"),
        n_max: r.count(s, "n_max", d.n_max as usize, 1) as u32,
        output: r.raw(s, "output").map(|o| PathBuf::from(o.trim())).unwrap_or(d.output),
    };
    run.z_end = match r.number(s, "z_end") {
        Some(v) if v > 0.0 => Some(v),
        Some(v) => {
            r.push("run.z_end".into(), format!("run.z_end must be > 0 (got {v})"));
            None
        }
        None => None,
    };
    if run.alpha_max <= run.alpha_min {
        r.push("run.alpha_max".into(), "run.alpha_max must exceed run.alpha_min".into());
    }
    if run.gamma_max <= run.gamma_min {
        r.push("run.gamma_max".into(), "run.gamma_max must exceed run.gamma_min".into());
    }
    if run.band >= run.n_bands {
        r.push("run.band".into(), format!("run.band must be < run.n_bands ({})", run.n_bands));
    }
    run
}
