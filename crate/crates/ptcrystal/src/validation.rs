//! Numerical property checks of the propagator.

use ptcrystal_core::lattice::LatticeSpec;
use ptcrystal_core::quasienergy::DriveSpec;
use ptcrystal_core::Complex64;

use crate::experiments::BeamSetup;
use crate::propagator::{init_gaussian, propagate, AbsorberSpec, Field, Grid, PropagatorError, Propagator, Recording};

/// `max_z |P(z) − 1|` over `z_end`, absorber off.
pub fn unitarity_deviation(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    setup: &BeamSetup,
    z_end: f64,
) -> Result<f64, PropagatorError> {
    let field = setup.initial_field()?;
    let (series, _) = propagate(&field, spec, drive, None, z_end, setup.dz, Recording { every: 50, snapshot_every: 0 })?;
    Ok(series.records.iter().map(|r| (r.power - 1.0).abs()).fold(0.0, f64::max))
}

fn run_to(spec: &LatticeSpec, drive: &DriveSpec, setup: &BeamSetup, z_end: f64, dz: f64) -> Result<Field, PropagatorError> {
    let mut field = setup.initial_field()?;
    let n = (z_end / dz).round() as usize;
    let mut prop = Propagator::new(&setup.grid, spec, drive, setup.absorber.as_ref(), z_end / n as f64)?;
    prop.run(&mut field, n, usize::MAX, |_| Ok(()))?;
    Ok(field)
}

fn relative_distance(a: &Field, b: &Field) -> f64 {
    let diff: f64 = a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = b.psi.iter().map(|y| y.norm_sqr()).sum();
    (diff / norm).sqrt()
}

/// Errors of the fields at `z_end` from steps `dz` and `dz/2`, measured
/// against a `dz/4` reference. Second order gives a ratio near 5 with this
/// reference (`(1 − 1/16)/(1/4 − 1/16)`).
pub fn strang_errors(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    setup: &BeamSetup,
    z_end: f64,
    dz: f64,
) -> Result<(f64, f64), PropagatorError> {
    let reference = run_to(spec, drive, setup, z_end, 0.25 * dz)?;
    let coarse = run_to(spec, drive, setup, z_end, dz)?;
    let half = run_to(spec, drive, setup, z_end, 0.5 * dz)?;
    Ok((relative_distance(&coarse, &reference), relative_distance(&half, &reference)))
}

/// Free tilted beam aimed at the right edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorberTest {
    /// Power left anywhere on the grid.
    pub remaining: f64,
    /// Power left outside the absorber ramps.
    pub reflected: f64,
}

pub fn absorber_test(k0: f64, z_end: f64) -> Result<AbsorberTest, PropagatorError> {
    let spec = LatticeSpec { depth: 0.0, ..LatticeSpec::reference_unbroken() };
    let grid = Grid::centered(512.0, 2048)?;
    let absorber = AbsorberSpec::default_for(&grid);
    let field = init_gaussian(&grid, 20.0, 0.0, k0)?;
    let drive = DriveSpec::cosine(0.0, 1e4);
    let (series, last) = propagate(&field, &spec, &drive, Some(&absorber), z_end, 2.0, Recording { every: usize::MAX, snapshot_every: 0 })?;
    let total0 = field.norm_sqr();
    let interior: f64 = last
        .psi
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            let x = grid.x(*j);
            x > grid.x_min + absorber.width && x < grid.x_max - absorber.width
        })
        .map(|(_, p)| p.norm_sqr())
        .sum::<f64>()
        * grid.dx();
    Ok(AbsorberTest {
        remaining: series.records.last().map_or(f64::NAN, |r| r.power),
        reflected: interior / total0,
    })
}

/// `(P − 1)` after `z_end` for tilts `−k_B/2` and `+k_B/2` on an undriven
/// single-harmonic lattice.
pub fn nonreciprocity(spec: &LatticeSpec, z_end: f64) -> Result<(f64, f64), PropagatorError> {
    let grid = Grid::centered(2048.0, 8192)?;
    let kb = spec.bragg_wavenumber();
    let drive = DriveSpec::cosine(0.0, 1e4);
    let mut growth = [0.0; 2];
    for (g, k0) in growth.iter_mut().zip([-0.5 * kb, 0.5 * kb]) {
        let field = init_gaussian(&grid, 80.0, 0.0, k0)?;
        let (series, _) = propagate(&field, spec, &drive, Some(&AbsorberSpec::default_for(&grid)), z_end, 1.0, Recording {
            every: usize::MAX,
            snapshot_every: 0,
        })?;
        *g = series.records.last().map_or(f64::NAN, |r| r.power) - 1.0;
    }
    Ok((growth[0], growth[1]))
}

/// Largest centroid error against `x(z) = F0 (1 − cos ωz)/(n_s ω²)` on a
/// free grid, relative to the largest predicted excursion.
pub fn semiclassical_centroid_error(f0: f64, period: f64) -> Result<f64, PropagatorError> {
    let spec = LatticeSpec { depth: 0.0, ..LatticeSpec::reference_critical() };
    let drive = DriveSpec::cosine(f0, period);
    let grid = Grid::centered(1024.0, 4096)?;
    let field = init_gaussian(&grid, 80.0, 0.0, 0.0)?;
    let (series, _) = propagate(&field, &spec, &drive, None, period, period / 10000.0, Recording { every: 100, snapshot_every: 0 })?;
    let w = 2.0 * std::f64::consts::PI / period;
    let predict = |z: f64| f0 * (1.0 - (w * z).cos()) / (spec.substrate_index * w * w);
    let scale = 2.0 * f0 / (spec.substrate_index * w * w);
    Ok(series.records.iter().map(|r| (r.centroid - predict(r.z)).abs()).fold(0.0, f64::max) / scale)
}

/// `max_z |P_n(z) − P_2n(z)|` between grids of `n` and `2n` points on the
/// same domain.
pub fn grid_doubling_change(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    setup: &BeamSetup,
    z_end: f64,
    record_every: usize,
) -> Result<f64, PropagatorError> {
    let fine_grid = Grid { n_points: 2 * setup.grid.n_points, ..setup.grid };
    let fine = BeamSetup { grid: fine_grid, ..*setup };
    let trace = |s: &BeamSetup, every: usize| -> Result<Vec<f64>, PropagatorError> {
        let field = s.initial_field()?;
        let (series, _) = propagate(&field, spec, drive, s.absorber.as_ref(), z_end, s.dz, Recording { every, snapshot_every: 0 })?;
        Ok(series.records.iter().map(|r| r.power).collect())
    };
    let a = trace(setup, record_every)?;
    let b = trace(&fine, record_every)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Plane-wave check value: `√(iπ)`.
pub fn fresnel_reference() -> Complex64 {
    Complex64::new(0.0, std::f64::consts::PI).sqrt()
}
