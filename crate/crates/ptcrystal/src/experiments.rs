//! Composite runs shared by the command front-end and the acceptance gate.

use ptcrystal_core::bloch::{band_structure, dipole_terms, normalize_biorthogonal, BlochError, DEFAULT_M_MAX};
use ptcrystal_core::bragg::{
    cascade_amplitudes, jump_factor, measure_jump, stationary_width, uniform_grid, BraggError,
    JumpMeasurement, StationaryPoint,
};
use ptcrystal_core::lattice::LatticeSpec;
use ptcrystal_core::quasienergy::{BandTable, Drive, DriveSpec, QuasiError};
use ptcrystal_core::singleband::singleband_propagate;
use thiserror::Error;

use crate::propagator::{
    filter_spectral, init_gaussian, measure, AbsorberSpec, BlochProjector, Field, FilteredPart, Grid,
    ObservableSeries, PropagatorError, Propagator, Spectral,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Bragg(#[from] BraggError),
    #[error(transparent)]
    Bloch(#[from] BlochError),
    #[error(transparent)]
    Quasi(#[from] QuasiError),
}

/// Grid, step and input beam of a propagation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSetup {
    pub grid: Grid,
    pub absorber: Option<AbsorberSpec>,
    pub dz: f64,
    pub w: f64,
    pub x0: f64,
    pub k0: f64,
}

impl BeamSetup {
    /// `L = 512`, `n = 4096`, `dz = Λ/20000`, `w = 5a/2`.
    pub fn broad_beam(spec: &LatticeSpec, drive: &DriveSpec) -> Self {
        let grid = Grid::centered(512.0, 4096).expect("static grid");
        Self {
            absorber: Some(AbsorberSpec::default_for(&grid)),
            grid,
            dz: drive.period / 20000.0,
            w: 2.5 * spec.period,
            x0: 0.0,
            k0: 0.0,
        }
    }

    /// `L = 6000`, `n = 32768`, `dz = Λ/20000`, `w = 80`.
    pub fn cascade(drive: &DriveSpec) -> Self {
        let grid = Grid::centered(6000.0, 32768).expect("static grid");
        Self { absorber: Some(AbsorberSpec::default_for(&grid)), grid, dz: drive.period / 20000.0, w: 80.0, x0: 0.0, k0: 0.0 }
    }

    pub fn initial_field(&self) -> Result<Field, PropagatorError> {
        init_gaussian(&self.grid, self.w, self.x0, self.k0)
    }

    /// Step count and exact step reaching `z_end`.
    pub fn steps(&self, z_end: f64) -> (usize, f64) {
        let n = (z_end / self.dz).round().max(1.0) as usize;
        (n, z_end / n as f64)
    }
}

/// Observables plus per-order spectral slices around `k(z) + n k_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRun {
    pub series: ObservableSeries,
    /// `[record][n]` for `n = 0..=n_orders`.
    pub orders: Vec<Vec<FilteredPart>>,
}

impl OrderRun {
    pub fn z(&self) -> Vec<f64> {
        self.series.records.iter().map(|r| r.z).collect()
    }

    pub fn power(&self) -> Vec<f64> {
        self.series.records.iter().map(|r| r.power).collect()
    }

    /// Least-squares slope of `centroid_n − centroid_0` over `[lo, hi]`.
    pub fn relative_slope(&self, n: usize, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .series
            .records
            .iter()
            .zip(&self.orders)
            .filter(|(r, _)| r.z >= lo && r.z <= hi)
            .map(|(r, o)| (r.z, o[n].centroid - o[0].centroid))
            .collect();
        least_squares_slope(&pts)
    }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 || pts.iter().any(|p| !p.1.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    Some(sxy / sxx)
}

/// Propagates the setup's beam to `z_end`, recording every `record_every`
/// steps; orders `0..=n_orders` are filtered with half-width `k_B/2`.
pub fn run_orders(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    setup: &BeamSetup,
    z_end: f64,
    record_every: usize,
    n_orders: usize,
) -> Result<OrderRun, ExperimentError> {
    let (n_steps, dz) = setup.steps(z_end);
    let mut prop = Propagator::new(&setup.grid, spec, drive, setup.absorber.as_ref(), dz)?;
    let reference = setup.initial_field()?;
    let mut field = reference.clone();
    let mut spectral = Spectral::new(&setup.grid);
    let kb = spec.bragg_wavenumber();
    let lb = spec.reduced_wavelength();
    let mut series = ObservableSeries::default();
    let mut orders = Vec::new();
    prop.run(&mut field, n_steps, record_every, |f| {
        series.records.push(measure(f, &reference)?);
        let k = drive.k(f.z, lb);
        orders.push((0..=n_orders).map(|n| filter_spectral(&mut spectral, f, k + n as f64 * kb, 0.5 * kb)).collect());
        Ok(())
    })?;
    Ok(OrderRun { series, orders })
}

/// Jump of the propagator and cascade power traces at one stationary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingComparison {
    pub point: StationaryPoint,
    pub r_abs: f64,
    pub cascade: Option<JumpMeasurement>,
    pub propagator: Option<JumpMeasurement>,
}

impl CrossingComparison {
    /// `|ΔP_propagator − ΔP_cascade| / ΔP_cascade`.
    pub fn relative_error(&self) -> Option<f64> {
        let (c, p) = (self.cascade?, self.propagator?);
        Some((p.height() - c.height()).abs() / c.height().abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseComparison {
    pub run: OrderRun,
    pub cascade_power: Vec<f64>,
    pub crossings: Vec<CrossingComparison>,
}

/// Averaging windows `[z0 ± near, z0 ± far]` with `far = min(8w, 0.8 gap)`
/// and `near = far/2`, `gap` the distance to the nearest other crossing.
pub fn event_windows(drive: &DriveSpec, spec: &LatticeSpec, points: &[StationaryPoint], i: usize) -> (f64, f64) {
    let p = &points[i];
    let gap = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, q)| (q.z0 - p.z0).abs())
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let far = (8.0 * stationary_width(drive, spec, p)).min(0.8 * gap);
    (0.5 * far, far)
}

/// Runs the propagator and the cascade to `z_end` and measures every crossing
/// on both power traces.
pub fn compare_staircase(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    setup: &BeamSetup,
    z_end: f64,
    record_every: usize,
    n_max: u32,
) -> Result<StaircaseComparison, ExperimentError> {
    let run = run_orders(spec, drive, setup, z_end, record_every, n_max as usize)?;
    let (n_steps, _) = setup.steps(z_end);
    let cascade = cascade_amplitudes(spec, drive, n_max, &uniform_grid(z_end, n_steps))?;
    let full_power = cascade.power();
    let every = record_every.max(1);
    let cascade_power: Vec<f64> = (0..run.series.records.len())
        .map(|i| full_power[(i * every).min(n_steps)])
        .collect();
    let z = run.z();
    let p = run.power();
    let crossings = cascade
        .stationary
        .iter()
        .enumerate()
        .map(|(i, point)| {
            let (near, far) = event_windows(drive, spec, &cascade.stationary, i);
            Ok(CrossingComparison {
                point: *point,
                r_abs: jump_factor(drive, spec, point)?,
                cascade: measure_jump(&cascade.z_grid, &full_power, point.z0, point.kind, near, far),
                propagator: measure_jump(&z, &p, point.z0, point.kind, near, far),
            })
        })
        .collect::<Result<Vec<_>, BraggError>>()?;
    Ok(StaircaseComparison { run, cascade_power, crossings })
}

/// Band-1 centroids of the full field and of the single-band model.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleBandComparison {
    pub z: Vec<f64>,
    pub centroid_full: Vec<f64>,
    pub centroid_single: Vec<f64>,
}

impl SingleBandComparison {
    /// `max |x_single − x_full| / max |x_full − x_full(0)|`.
    pub fn relative_error(&self) -> f64 {
        let x0 = self.centroid_full[0];
        let excursion = self.centroid_full.iter().map(|x| (x - x0).abs()).fold(0.0, f64::max);
        let worst = self
            .centroid_full
            .iter()
            .zip(&self.centroid_single)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst / excursion
    }
}

fn centroid(field: &Field) -> f64 {
    let (mut total, mut first) = (0.0, 0.0);
    for (j, p) in field.psi.iter().enumerate() {
        total += p.norm_sqr();
        first += p.norm_sqr() * field.grid.x(j);
    }
    first / total
}

/// Projects the input beam onto the lowest band, evolves it with the exact
/// single-band solution and compares with the band-projected full field at
/// `n_records + 1` equally spaced distances up to `z_end`.
pub fn singleband_cross_check(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    setup: &BeamSetup,
    z_end: f64,
    n_records: usize,
) -> Result<SingleBandComparison, ExperimentError> {
    let cells = (setup.grid.length() / spec.period).round() as usize;
    let bs = normalize_biorthogonal(&band_structure(spec, cells, DEFAULT_M_MAX, 2)?)?;
    let dd = dipole_terms(&bs, 1e-4)?;
    let table = BandTable::from_band(&bs, &dd, 0)?;
    let mut projector = BlochProjector::new(&setup.grid, &bs, 0)?;
    let (n_steps, dz) = setup.steps(z_end);
    let every = (n_steps / n_records.max(1)).max(1);
    let lb = spec.reduced_wavelength();
    let mut field = setup.initial_field()?;
    let c0 = projector.project(&field);
    let mut prop = Propagator::new(&setup.grid, spec, drive, setup.absorber.as_ref(), dz)?;
    let mut out = SingleBandComparison { z: Vec::new(), centroid_full: Vec::new(), centroid_single: Vec::new() };
    let mut failure = None;
    prop.run(&mut field, n_steps, every, |f| {
        let amplitudes = projector.project(f);
        let full = projector.reconstruct(&amplitudes, f.z);
        match singleband_propagate(&c0, &table, drive, lb, f.z, 4096) {
            Ok(c) => {
                out.z.push(f.z);
                out.centroid_full.push(centroid(&full));
                out.centroid_single.push(centroid(&projector.reconstruct(&c, f.z)));
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
        Ok(())
    })?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(out),
    }
}
