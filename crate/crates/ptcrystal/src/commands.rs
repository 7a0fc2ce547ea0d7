//! The seven batch commands and their exit-code contract.

use std::fmt;
use std::path::{Path, PathBuf};

use ptcrystal_core::bloch::{
    band_structure, dipole_terms, normalize_biorthogonal, single_band_validity, sinusoidal_fit,
    symmetry_breaking_scan, zone_grid, BandStructure, BlochError, DipoleData,
};
use ptcrystal_core::bragg::{cascade_amplitudes, uniform_grid, BraggError, JumpMeasurement};
use ptcrystal_core::quasienergy::{
    band_collapse_metric, dl_scan, gamma_parameter, quasienergy_band, quasienergy_band_nntb, BandTable, QuasiError,
    QuasienergyBand,
};

use crate::config::{ConfigError, RunConfig};
use crate::experiments::{compare_staircase, BeamSetup, ExperimentError};
use crate::output::{write_csv_file, Cell};
use crate::propagator::{propagate, PropagatorError, Recording};

/// Reality threshold of the quasienergy report.
pub const QUASI_REALITY_TOL: f64 = 1e-8;
/// Per-crossing tolerance of the staircase comparison.
pub const STAIRCASE_TOL: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bands,
    AlphaScan,
    Quasienergy,
    DlScan,
    Propagate,
    Cascade,
    CompareStaircase,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Bands,
        Command::AlphaScan,
        Command::Quasienergy,
        Command::DlScan,
        Command::Propagate,
        Command::Cascade,
        Command::CompareStaircase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::AlphaScan => "alpha-scan",
            Command::Quasienergy => "quasienergy",
            Command::DlScan => "dl-scan",
            Command::Propagate => "propagate",
            Command::Cascade => "cascade",
            Command::CompareStaircase => "compare-staircase",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Numerical(String),
    Io(std::io::Error),
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::Config(e) => write!(f, "config error:\n{e}"),
            CommandError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CommandError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CommandError {}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Numerical(_) => 3,
            CommandError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e)
    }
}

impl From<BlochError> for CommandError {
    fn from(e: BlochError) -> Self {
        match e {
            BlochError::InvalidArgument(_) => CommandError::Config(ConfigError::single("run", e.to_string())),
            other => CommandError::Numerical(other.to_string()),
        }
    }
}

impl From<QuasiError> for CommandError {
    fn from(e: QuasiError) -> Self {
        CommandError::Numerical(e.to_string())
    }
}

impl From<PropagatorError> for CommandError {
    fn from(e: PropagatorError) -> Self {
        match e {
            PropagatorError::UnresolvedBeam { .. } => CommandError::Config(ConfigError::single("run.w", e.to_string())),
            PropagatorError::InvalidGrid { .. } | PropagatorError::InvalidAbsorber { .. } => {
                CommandError::Config(ConfigError::single("grid", e.to_string()))
            }
            other => CommandError::Numerical(other.to_string()),
        }
    }
}

impl From<BraggError> for CommandError {
    fn from(e: BraggError) -> Self {
        match e {
            BraggError::NotCritical => CommandError::Config(ConfigError::single(
                "lattice.form",
                "the cascade needs a lattice with the single harmonic V_{+1} (form = single_exp)",
            )),
            other => CommandError::Numerical(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CommandError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Propagator(e) => e.into(),
            ExperimentError::Bragg(e) => e.into(),
            ExperimentError::Bloch(e) => e.into(),
            ExperimentError::Quasi(e) => e.into(),
        }
    }
}

/// Files written, human-readable summary and physics-validity warnings.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    /// 0, or 4 when `strict` and a warning was raised.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && !self.warnings.is_empty() {
            4
        } else {
            0
        }
    }

    fn write(&mut self, dir: &Path, name: &str, hash: &str, header: &[&str], rows: &[Vec<Cell>]) -> std::io::Result<()> {
        let path = dir.join(name);
        write_csv_file(&path, hash, header, rows)?;
        self.artifacts.push(path);
        Ok(())
    }
}

/// Runs `command`, writing artifacts into `out` (or the config's output
/// directory).
pub fn run_command(command: Command, config: &RunConfig, out: Option<&Path>) -> Result<Report, CommandError> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.run.output.clone());
    std::fs::create_dir_all(&dir)?;
    let mut report = Report::default();
    match command {
        Command::Bands => bands(config, &dir, &mut report)?,
        Command::AlphaScan => alpha_scan(config, &dir, &mut report)?,
        Command::Quasienergy => quasienergy(config, &dir, &mut report)?,
        Command::DlScan => dl(config, &dir, &mut report)?,
        Command::Propagate => propagate_cmd(config, &dir, &mut report)?,
        Command::Cascade => cascade(config, &dir, &mut report)?,
        Command::CompareStaircase => staircase(config, &dir, &mut report)?,
    }
    Ok(report)
}

fn require_drive(config: &RunConfig, command: Command) -> Result<ptcrystal_core::quasienergy::DriveSpec, ConfigError> {
    config.drive.map(|d| d.spec).ok_or_else(|| {
        ConfigError::single("drive", format!("[drive] section is required for {}", command.name()))
    })
}

fn beam_setup(config: &RunConfig, command: Command) -> Result<BeamSetup, ConfigError> {
    let drive = require_drive(config, command)?;
    Ok(BeamSetup {
        grid: config.grid.grid,
        absorber: config.grid.absorber,
        dz: config.grid.dz.unwrap_or(drive.period / 20000.0),
        w: config.run.w,
        x0: config.run.x0,
        k0: config.run.k0,
    })
}

fn solved_bands(config: &RunConfig, n_bands: usize) -> Result<BandStructure, CommandError> {
    let r = &config.run;
    Ok(band_structure(&config.lattice, r.n_kappa, r.m_max, n_bands)?)
}

fn bands(config: &RunConfig, dir: &Path, report: &mut Report) -> Result<(), CommandError> {
    let r = &config.run;
    let bs = solved_bands(config, r.n_bands)?;
    if !bs.is_real(r.reality_tol) {
        report.warnings.push(format!("bands are complex: max |Im E| = {:.3e}", bs.max_imag()));
    }
    let dipoles: Option<(BandStructure, DipoleData)> = match normalize_biorthogonal(&bs) {
        Ok(n) => {
            let dd = dipole_terms(&n, r.dk)?;
            Some((n, dd))
        }
        Err(e) => {
            report.warnings.push(format!("no biorthogonal pairing, phi omitted: {e}"));
            None
        }
    };
    let mut rows = Vec::new();
    for (b, band) in bs.bands.iter().enumerate() {
        for (j, (&k, e)) in bs.kappa_grid.iter().zip(&band.energies).enumerate() {
            let phi = dipoles.as_ref().map_or(f64::NAN, |(_, dd)| dd.phi[b][j].re);
            rows.push(vec![k.into(), (b + 1).into(), e.re.into(), e.im.into(), phi.into()]);
        }
    }
    report.write(dir, "bands.csv", &config.hash, &["kappa", "band", "re_E", "im_E", "phi"], &rows)?;

    let fits: Vec<Vec<Cell>> = (0..bs.n_bands())
        .map(|b| {
            let fit = sinusoidal_fit(&bs, b);
            vec![(b + 1).into(), fit.e0.into(), fit.delta.into(), fit.rms_residual.into(), fit.relative_residual().into()]
        })
        .collect();
    report.write(dir, "band_fit.csv", &config.hash, &["band", "E0", "Delta", "rms_residual", "relative_residual"], &fits)?;
    report.summary.push(format!("max |Im E| = {:.3e}", bs.max_imag()));

    if let (Some(drive), Some((n, dd))) = (config.drive, dipoles.as_ref()) {
        if n.n_bands() >= 2 {
            let ratio = single_band_validity(n, dd, drive.spec.f0)?;
            report.summary.push(format!("single-band validity ratio = {ratio:.3e}"));
            if ratio > r.validity_threshold {
                report.warnings.push(format!(
                    "single-band validity ratio {ratio:.3e} exceeds threshold {:.3e}",
                    r.validity_threshold
                ));
            }
        }
    }
    Ok(())
}

/// Maps `f` over `items` on scoped worker threads, keeping input order.
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<U>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn alpha_scan(config: &RunConfig, dir: &Path, report: &mut Report) -> Result<(), CommandError> {
    let r = &config.run;
    let alphas: Vec<f64> = (0..r.alpha_points)
        .map(|i| r.alpha_min + (r.alpha_max - r.alpha_min) * i as f64 / (r.alpha_points - 1) as f64)
        .collect();
    let samples = par_map(&alphas, |&alpha| {
        let spec = ptcrystal_core::lattice::LatticeSpec { alpha, ..config.lattice.clone() };
        band_structure(&spec, r.n_kappa, r.m_max, r.n_bands).map(|bs| bs.max_imag())
    });
    let mut rows = Vec::new();
    for (a, s) in alphas.iter().zip(samples) {
        rows.push(vec![(*a).into(), s?.into()]);
    }
    report.write(dir, "alpha_scan.csv", &config.hash, &["alpha", "max_im_E"], &rows)?;
    let estimate = symmetry_breaking_scan(&config.lattice, &alphas, r.reality_tol, r.n_kappa, r.m_max, r.n_bands);
    let (alpha_c, status) = match estimate {
        Ok(a) => (a, "found"),
        Err(BlochError::NoBreakingFound { .. }) => {
            report.warnings.push(format!("no symmetry breaking up to alpha = {}", r.alpha_max));
            (f64::NAN, "not_found")
        }
        Err(e) => return Err(e.into()),
    };
    report.write(dir, "alpha_c.csv", &config.hash, &["alpha_c", "status"], &[vec![alpha_c.into(), status.into()]])?;
    report.summary.push(format!("alpha_c = {alpha_c:.6}"));
    Ok(())
}

fn quasi_rows(qb: &QuasienergyBand) -> Vec<Vec<Cell>> {
    qb.kappa_grid
        .iter()
        .zip(&qb.energies)
        .map(|(&k, e)| vec![k.into(), qb.gamma.into(), e.re.into(), e.im.into()])
        .collect()
}

fn quasienergy(config: &RunConfig, dir: &Path, report: &mut Report) -> Result<(), CommandError> {
    let drive = require_drive(config, Command::Quasienergy)?;
    let r = &config.run;
    let spec = &config.lattice;
    let bs = normalize_biorthogonal(&solved_bands(config, r.n_bands.max(2))?)?;
    let dd = dipole_terms(&bs, r.dk)?;
    let table = BandTable::from_band(&bs, &dd, r.band)?;
    let fit = sinusoidal_fit(&bs, r.band);
    let gamma = gamma_parameter(&drive, spec);
    let grid = zone_grid(spec.period, r.quasi_kappa_points);
    let numeric = quasienergy_band(&table, &drive, spec.reduced_wavelength(), &grid, r.quasi_steps, gamma);
    let nntb = quasienergy_band_nntb(&fit, gamma, &grid, spec.period).map_err(QuasiError::from)?;
    let header = ["kappa", "gamma", "re_E", "im_E"];
    report.write(dir, "quasi_numeric.csv", &config.hash, &header, &quasi_rows(&numeric))?;
    report.write(dir, "quasi_nntb.csv", &config.hash, &header, &quasi_rows(&nntb))?;
    let mut summary = Vec::new();
    for (name, qb) in [("numeric", &numeric), ("nntb", &nntb)] {
        let (width, im) = band_collapse_metric(qb);
        summary.push(vec![name.into(), gamma.into(), width.into(), im.into()]);
        report.summary.push(format!("{name}: bandwidth = {width:.6e}, max |Im E| = {im:.3e}"));
    }
    report.write(dir, "quasi_report.csv", &config.hash, &["method", "gamma", "bandwidth", "max_im_E"], &summary)?;
    let (_, im) = band_collapse_metric(&numeric);
    if im > QUASI_REALITY_TOL {
        report.warnings.push(format!("quasienergy is not real: max |Im E| = {im:.3e}"));
    }
    let ratio = single_band_validity(&bs, &dd, drive.f0)?;
    if ratio > r.validity_threshold {
        report.warnings.push(format!("single-band validity ratio {ratio:.3e} exceeds threshold {:.3e}", r.validity_threshold));
    }
    Ok(())
}

fn dl(config: &RunConfig, dir: &Path, report: &mut Report) -> Result<(), CommandError> {
    let r = &config.run;
    let spec = &config.lattice;
    let bs = solved_bands(config, r.n_bands)?;
    let fit = sinusoidal_fit(&bs, r.band);
    let scan = dl_scan(&fit, r.gamma_min, r.gamma_max, r.gamma_points, spec.period).map_err(QuasiError::from)?;
    let grid = zone_grid(spec.period, r.quasi_kappa_points);
    let gammas: Vec<f64> = (0..r.gamma_points)
        .map(|i| r.gamma_min + (r.gamma_max - r.gamma_min) * i as f64 / (r.gamma_points - 1) as f64)
        .collect();
    let mut rows = Vec::new();
    for g in gammas {
        let qb = quasienergy_band_nntb(&fit, g, &grid, spec.period).map_err(QuasiError::from)?;
        rows.push(vec![g.into(), band_collapse_metric(&qb).0.into()]);
    }
    report.write(dir, "dl_bandwidth.csv", &config.hash, &["gamma", "bandwidth"], &rows)?;
    let points: Vec<Vec<Cell>> = scan
        .collapse_points
        .iter()
        .zip(&scan.residual_bandwidth)
        .map(|(&g, &w)| vec![g.into(), w.into()])
        .collect();
    report.write(dir, "dl_collapse.csv", &config.hash, &["gamma_star", "residual_bandwidth"], &points)?;
    if scan.degenerate_band {
        report.warnings.push("band has zero width; every gamma collapses it".into());
    }
    let list: Vec<String> = scan.collapse_points.iter().map(|g| format!("{g:.6}")).collect();
    report.summary.push(format!("collapse points: {}", list.join(", ")));
    Ok(())
}

fn propagate_cmd(config: &RunConfig, dir: &Path, report: &mut Report) -> Result<(), CommandError> {
    let drive = require_drive(config, Command::Propagate)?;
    let setup = beam_setup(config, Command::Propagate)?;
    let z_end = config.z_end().unwrap_or(drive.period);
    let field = setup.initial_field()?;
    let recording = Recording { every: config.run.record_every, snapshot_every: config.run.snapshot_every };
    let (series, _) = propagate(&field, &config.lattice, &drive, setup.absorber.as_ref(), z_end, setup.dz, recording)?;
    let rows: Vec<Vec<Cell>> = series
        .records
        .iter()
        .map(|r| vec![r.z.into(), r.power.into(), r.centroid.into(), r.width.into(), r.fidelity.into()])
        .collect();
    report.write(dir, "power.csv", &config.hash, &["z", "P", "centroid", "width", "fidelity"], &rows)?;
    let xs = setup.grid.xs();
    for (i, (_, psi)) in series.snapshots.iter().enumerate() {
        let rows: Vec<Vec<Cell>> = xs
            .iter()
            .zip(psi)
            .map(|(&x, p)| vec![x.into(), p.re.into(), p.im.into(), p.norm().into()])
            .collect();
        let name = format!("snapshot_{i:04}.csv");
        report.write(dir, &name, &config.hash, &["x", "re_psi", "im_psi", "abs_psi"], &rows)?;
    }
    if let Some(last) = series.records.last() {
        report.summary.push(format!(
            "z = {:.6e}: P = {:.6}, centroid = {:.4}, width = {:.4}, fidelity = {:.6}",
            last.z, last.power, last.centroid, last.width, last.fidelity
        ));
    }
    Ok(())
}

fn cascade(config: &RunConfig, dir: &Path, report: &mut Report) -> Result<(), CommandError> {
    let drive = require_drive(config, Command::Cascade)?;
    let spec = &config.lattice;
    let z_end = config.z_end().unwrap_or(drive.period);
    let dz = config.dz().unwrap_or(drive.period / 20000.0);
    let n_steps = (z_end / dz).round().max(1.0) as usize;
    let cr = cascade_amplitudes(spec, &drive, config.run.n_max, &uniform_grid(z_end, n_steps))?;
    let every = config.run.record_every.max(1);
    let mut rows = Vec::new();
    for j in (0..cr.z_grid.len()).filter(|j| j % every == 0 || *j == n_steps) {
        for (n, a) in cr.amplitudes.iter().enumerate() {
            rows.push(vec![cr.z_grid[j].into(), n.into(), a[j].re.into(), a[j].im.into(), a[j].norm().into()]);
        }
    }
    report.write(dir, "cascade.csv", &config.hash, &["z", "n", "re_a", "im_a", "abs_a"], &rows)?;
    let points: Vec<Vec<Cell>> = cr
        .stationary
        .iter()
        .zip(&cr.jump_factors)
        .map(|(p, &r)| vec![p.n.into(), p.z0.into(), p.kind.as_str().into(), r.into()])
        .collect();
    report.write(dir, "stationary.csv", &config.hash, &["n", "z0", "kind", "R_abs"], &points)?;
    report.summary.push(format!("{} stationary points up to z = {z_end:.6e}", cr.stationary.len()));
    Ok(())
}

fn staircase(config: &RunConfig, dir: &Path, report: &mut Report) -> Result<(), CommandError> {
    let drive = require_drive(config, Command::CompareStaircase)?;
    let setup = beam_setup(config, Command::CompareStaircase)?;
    let spec = &config.lattice;
    let z_end = config.z_end().unwrap_or(drive.period);
    let cmp = compare_staircase(spec, &drive, &setup, z_end, config.run.record_every, config.run.n_max)?;
    let rows: Vec<Vec<Cell>> = cmp
        .run
        .series
        .records
        .iter()
        .zip(&cmp.cascade_power)
        .map(|(r, &c)| vec![r.z.into(), r.power.into(), c.into()])
        .collect();
    report.write(dir, "staircase.csv", &config.hash, &["z", "P_propagator", "P_cascade"], &rows)?;
    let mut crossings = Vec::new();
    for c in &cmp.crossings {
        let height = |m: Option<JumpMeasurement>| m.map_or(f64::NAN, |m| m.height());
        let location = c.propagator.map_or(f64::NAN, |m| m.location);
        let err = c.relative_error().unwrap_or(f64::NAN);
        crossings.push(vec![
            c.point.n.into(),
            c.point.z0.into(),
            c.point.kind.as_str().into(),
            c.r_abs.into(),
            height(c.cascade).into(),
            height(c.propagator).into(),
            location.into(),
            err.into(),
        ]);
        if !(err <= STAIRCASE_TOL) {
            report.warnings.push(format!(
                "crossing n={} at z0={:.6e}: relative error {err:.3} exceeds {STAIRCASE_TOL}",
                c.point.n, c.point.z0
            ));
        }
        report.summary.push(format!(
            "n={} z0={:.6e} {}: |R|={:.4}, rel. error {err:.4}",
            c.point.n,
            c.point.z0,
            c.point.kind.as_str(),
            c.r_abs
        ));
    }
    report.write(
        dir,
        "crossings.csv",
        &config.hash,
        &["n", "z0", "kind", "R_abs", "dP_cascade", "dP_propagator", "z_measured", "rel_error"],
        &crossings,
    )?;
    Ok(())
}
