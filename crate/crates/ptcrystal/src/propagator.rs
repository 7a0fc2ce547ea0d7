//! Pseudo-spectral split-step solution of the driven paraxial equation
//!
//! `i λbar ψ_z = −(λbar²/2n_s) ψ_xx + V(x) ψ − F(z) x ψ`
//!
//! on a periodic grid with an imaginary absorbing ramp at both edges.

use std::sync::Arc;

use ptcrystal_core::bloch::BandStructure;
use ptcrystal_core::lattice::LatticeSpec;
use ptcrystal_core::quasienergy::{Drive, DriveSpec};
use ptcrystal_core::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagatorError {
    #[error("grid.{field} {reason}")]
    InvalidGrid { field: &'static str, reason: String },
    #[error("beam radius {w} um is not resolved by dx = {dx} um (need w > 2 dx)")]
    UnresolvedBeam { w: f64, dx: f64 },
    #[error("absorber.{field} {reason}")]
    InvalidAbsorber { field: &'static str, reason: String },
    #[error("numerical blowup at z = {z} um: {detail}")]
    NumericalBlowup { z: f64, detail: String },
    #[error("field has zero norm")]
    ZeroField,
    #[error("dz must be positive and finite (got {0})")]
    InvalidStep(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("Bloch projection needs {what}")]
    Projection { what: String },
}

/// Uniform periodic grid `x_j = x_min + j dx`, `dx = (x_max − x_min)/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self, PropagatorError> {
        let grid = Self { x_min, x_max, n_points };
        match grid.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(grid),
        }
    }

    /// `[−length/2, length/2)`.
    pub fn centered(length: f64, n_points: usize) -> Result<Self, PropagatorError> {
        Self::new(-0.5 * length, 0.5 * length, n_points)
    }

    pub fn violations(&self) -> Vec<PropagatorError> {
        let mut out = Vec::new();
        if !(self.x_max > self.x_min) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            out.push(PropagatorError::InvalidGrid {
                field: "x_max",
                reason: format!("must exceed x_min ({} <= {})", self.x_max, self.x_min),
            });
        }
        if self.n_points < 16 {
            out.push(PropagatorError::InvalidGrid {
                field: "points",
                reason: format!("must be >= 16 (got {})", self.n_points),
            });
        }
        out
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points as i64;
        let dk = 2.0 * std::f64::consts::PI / self.length();
        (0..n).map(|j| if j < (n + 1) / 2 { j } else { j - n } as f64 * dk).collect()
    }
}

/// Imaginary ramp `s ((|x| − x_abs)/width)³` over the outer `width` of each edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorberSpec {
    pub width: f64,
    pub strength: f64,
}

impl AbsorberSpec {
    /// 10 % of the domain per side, `s = 0.005`.
    pub fn default_for(grid: &Grid) -> Self {
        Self { width: 0.1 * grid.length(), strength: 0.005 }
    }

    pub fn violations(&self, grid: &Grid) -> Vec<PropagatorError> {
        let mut out = Vec::new();
        if !(self.width > 0.0 && self.width < 0.25 * grid.length()) {
            out.push(PropagatorError::InvalidAbsorber {
                field: "width",
                reason: format!("must be in (0, domain/4 = {}) (got {})", 0.25 * grid.length(), self.width),
            });
        }
        if !(self.strength > 0.0 && self.strength.is_finite()) {
            out.push(PropagatorError::InvalidAbsorber {
                field: "strength",
                reason: format!("must be > 0 (got {})", self.strength),
            });
        }
        out
    }

    pub fn profile(&self, grid: &Grid) -> Vec<f64> {
        let left = grid.x_min + self.width;
        let right = grid.x_max - self.width;
        grid.xs()
            .into_iter()
            .map(|x| {
                let depth = if x < left {
                    (left - x) / self.width
                } else if x > right {
                    (x - right) / self.width
                } else {
                    0.0
                };
                self.strength * depth.powi(3)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub psi: Vec<Complex64>,
    pub z: f64,
}

impl Field {
    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|p| p.norm_sqr()).sum::<f64>() * self.grid.dx()
    }
}

/// `ψ(x) = exp(−(x−x0)²/w²) exp(i k0 x)` at `z = 0`.
pub fn init_gaussian(grid: &Grid, w: f64, x0: f64, k0: f64) -> Result<Field, PropagatorError> {
    if !(w > 2.0 * grid.dx()) {
        return Err(PropagatorError::UnresolvedBeam { w, dx: grid.dx() });
    }
    let psi = grid
        .xs()
        .into_iter()
        .map(|x| {
            let u = (x - x0) / w;
            Complex64::from_polar((-u * u).exp(), k0 * x)
        })
        .collect();
    Ok(Field { grid: *grid, psi, z: 0.0 })
}

/// Forward/inverse FFT pair with the grid's wavenumbers.
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    pub k: Vec<f64>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n_points);
        let inverse = planner.plan_fft_inverse(grid.n_points);
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self { forward, inverse, scratch: vec![Complex64::new(0.0, 0.0); len], k: grid.wavenumbers() }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Unnormalized inverse transform.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }
}

/// Powers above this multiple of the initial power count as a blowup.
pub const BLOWUP_GROWTH: f64 = 1e12;

/// Reusable stepper for one lattice, drive, absorber and step size.
pub struct Propagator {
    grid: Grid,
    drive: DriveSpec,
    dz: f64,
    reduced_wavelength: f64,
    spectral: Spectral,
    kinetic: Vec<Complex64>,
    static_half: Vec<Complex64>,
    initial_power: Option<f64>,
}

impl Propagator {
    pub fn new(
        grid: &Grid,
        spec: &LatticeSpec,
        drive: &DriveSpec,
        absorber: Option<&AbsorberSpec>,
        dz: f64,
    ) -> Result<Self, PropagatorError> {
        if let Some(e) = grid.violations().into_iter().next() {
            return Err(e);
        }
        if !(dz > 0.0 && dz.is_finite()) {
            return Err(PropagatorError::InvalidStep(dz));
        }
        if let Some(a) = absorber {
            if let Some(e) = a.violations(grid).into_iter().next() {
                return Err(e);
            }
        }
        let lb = spec.reduced_wavelength();
        let spectral = Spectral::new(grid);
        let inv_n = 1.0 / grid.n_points as f64;
        let kinetic = spectral
            .k
            .iter()
            .map(|&k| Complex64::from_polar(inv_n, -lb * k * k * dz / (2.0 * spec.substrate_index)))
            .collect();
        let absorption = absorber.map(|a| a.profile(grid)).unwrap_or_else(|| vec![0.0; grid.n_points]);
        let static_half = grid
            .xs()
            .into_iter()
            .zip(absorption)
            .map(|(x, a)| {
                let v = spec.potential(x) - Complex64::new(0.0, a);
                (Complex64::new(0.0, -dz / (2.0 * lb)) * v).exp()
            })
            .collect();
        Ok(Self {
            grid: *grid,
            drive: *drive,
            dz,
            reduced_wavelength: lb,
            spectral,
            kinetic,
            static_half,
            initial_power: None,
        })
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// Multiplies by the potential half-step including `exp(i F x dz/(2λbar))`.
    fn half_potential(&self, psi: &mut [Complex64], force: f64) {
        const CHUNK: usize = 64;
        let theta = force * self.dz / (2.0 * self.reduced_wavelength);
        let step = Complex64::cis(theta * self.grid.dx());
        for (c, chunk) in psi.chunks_mut(CHUNK).enumerate() {
            let start = c * CHUNK;
            let mut ramp = Complex64::cis(theta * self.grid.x(start));
            for (i, p) in chunk.iter_mut().enumerate() {
                *p *= self.static_half[start + i] * ramp;
                ramp *= step;
            }
        }
    }

    /// One Strang step with the force sampled at the midpoint.
    pub fn step(&mut self, field: &mut Field) -> Result<(), PropagatorError> {
        if field.grid != self.grid {
            return Err(PropagatorError::GridMismatch);
        }
        let force = self.drive.force(field.z + 0.5 * self.dz);
        self.half_potential(&mut field.psi, force);
        self.spectral.forward(&mut field.psi);
        for (p, k) in field.psi.iter_mut().zip(&self.kinetic) {
            *p *= k;
        }
        self.spectral.inverse(&mut field.psi);
        self.half_potential(&mut field.psi, force);
        field.z += self.dz;
        self.check(field)
    }

    fn check(&mut self, field: &Field) -> Result<(), PropagatorError> {
        let power: f64 = field.psi.iter().map(|p| p.norm_sqr()).sum();
        if !power.is_finite() {
            return Err(PropagatorError::NumericalBlowup {
                z: field.z,
                detail: "non-finite amplitude".into(),
            });
        }
        let reference = *self.initial_power.get_or_insert(power);
        if reference > 0.0 && power > BLOWUP_GROWTH * reference {
            return Err(PropagatorError::NumericalBlowup {
                z: field.z,
                detail: format!("power grew by {:.3e}", power / reference),
            });
        }
        Ok(())
    }

    /// Advances `n_steps`, calling `observer` before the first step and after
    /// every `record_every`-th step (and after the last).
    pub fn run<O>(&mut self, field: &mut Field, n_steps: usize, record_every: usize, mut observer: O) -> Result<(), PropagatorError>
    where
        O: FnMut(&Field) -> Result<(), PropagatorError>,
    {
        self.initial_power = Some(field.psi.iter().map(|p| p.norm_sqr()).sum());
        let every = record_every.max(1);
        observer(field)?;
        for s in 1..=n_steps {
            self.step(field)?;
            if s % every == 0 || s == n_steps {
                observer(field)?;
            }
        }
        Ok(())
    }
}

/// One Strang step on a copy of `field`.
pub fn split_step(
    field: &Field,
    spec: &LatticeSpec,
    drive: &DriveSpec,
    absorber: Option<&AbsorberSpec>,
    dz: f64,
) -> Result<Field, PropagatorError> {
    let mut out = field.clone();
    Propagator::new(&field.grid, spec, drive, absorber, dz)?.step(&mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub z: f64,
    /// Power relative to the reference field.
    pub power: f64,
    pub centroid: f64,
    /// rms width of `|ψ|²`.
    pub width: f64,
    pub fidelity: f64,
}

/// Power, centroid, width and overlap fidelity relative to `reference`.
pub fn measure(field: &Field, reference: &Field) -> Result<Record, PropagatorError> {
    if field.grid != reference.grid {
        return Err(PropagatorError::GridMismatch);
    }
    let grid = &field.grid;
    let mut total = 0.0;
    let mut first = 0.0;
    for (j, p) in field.psi.iter().enumerate() {
        let w = p.norm_sqr();
        total += w;
        first += w * grid.x(j);
    }
    let ref_total: f64 = reference.psi.iter().map(|p| p.norm_sqr()).sum();
    if total == 0.0 || ref_total == 0.0 {
        return Err(PropagatorError::ZeroField);
    }
    let centroid = first / total;
    let second: f64 = field
        .psi
        .iter()
        .enumerate()
        .map(|(j, p)| p.norm_sqr() * (grid.x(j) - centroid).powi(2))
        .sum();
    let overlap: Complex64 = reference.psi.iter().zip(&field.psi).map(|(r, p)| r.conj() * p).sum();
    Ok(Record {
        z: field.z,
        power: total / ref_total,
        centroid,
        width: (second / total).sqrt(),
        fidelity: overlap.norm_sqr() / (total * ref_total),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservableSeries {
    pub records: Vec<Record>,
    /// `(z, ψ)` at snapshot points.
    pub snapshots: Vec<(f64, Vec<Complex64>)>,
}

/// Recording cadence for [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recording {
    /// Steps between observable records.
    pub every: usize,
    /// Records between snapshots; 0 disables snapshots.
    pub snapshot_every: usize,
}

/// Propagates `field` to `z_end` with steps close to `dz`, measuring against
/// the input field.
pub fn propagate(
    field: &Field,
    spec: &LatticeSpec,
    drive: &DriveSpec,
    absorber: Option<&AbsorberSpec>,
    z_end: f64,
    dz: f64,
    recording: Recording,
) -> Result<(ObservableSeries, Field), PropagatorError> {
    if !(dz > 0.0 && dz.is_finite()) {
        return Err(PropagatorError::InvalidStep(dz));
    }
    let n_steps = ((z_end - field.z) / dz).round().max(1.0) as usize;
    let step = (z_end - field.z) / n_steps as f64;
    let mut prop = Propagator::new(&field.grid, spec, drive, absorber, step)?;
    let reference = field.clone();
    let mut current = field.clone();
    let mut series = ObservableSeries::default();
    prop.run(&mut current, n_steps, recording.every, |f| {
        let index = series.records.len();
        series.records.push(measure(f, &reference)?);
        if recording.snapshot_every > 0 && index % recording.snapshot_every == 0 {
            series.snapshots.push((f.z, f.psi.clone()));
        }
        Ok(())
    })?;
    Ok((series, current))
}

/// Power and centroid of the part of the spectrum within `half_width` of
/// `k_center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredPart {
    pub power: f64,
    pub centroid: f64,
}

pub fn filter_spectral(
    spectral: &mut Spectral,
    field: &Field,
    k_center: f64,
    half_width: f64,
) -> FilteredPart {
    let mut buf = field.psi.clone();
    spectral.forward(&mut buf);
    for (b, &k) in buf.iter_mut().zip(&spectral.k) {
        if (k - k_center).abs() > half_width {
            *b = Complex64::new(0.0, 0.0);
        }
    }
    spectral.inverse(&mut buf);
    let n2 = (field.grid.n_points as f64).powi(2);
    let (mut total, mut first) = (0.0, 0.0);
    for (j, b) in buf.iter().enumerate() {
        let w = b.norm_sqr() / n2;
        total += w;
        first += w * field.grid.x(j);
    }
    FilteredPart {
        power: total * field.grid.dx(),
        centroid: if total > 0.0 { first / total } else { f64::NAN },
    }
}

/// Projection of grid fields onto one Bloch band, and back.
///
/// The grid must hold an integer number `L/a` of lattice periods, and the
/// band structure must use exactly `L/a` zone points so every grid
/// wavenumber is some `κ + m k_B`.
pub struct BlochProjector {
    grid: Grid,
    spectral: Spectral,
    /// Per κ: (FFT indices of `κ + m k_B`, right vector, left vector, D).
    slots: Vec<(Vec<Option<usize>>, Vec<Complex64>, Vec<Complex64>)>,
    d_sign: f64,
    pub kappa_grid: Vec<f64>,
}

impl BlochProjector {
    pub fn new(grid: &Grid, bs: &BandStructure, band: usize) -> Result<Self, PropagatorError> {
        let a = bs.spec.period;
        let cells = grid.length() / a;
        if (cells - cells.round()).abs() > 1e-9 {
            return Err(PropagatorError::Projection { what: "a domain holding an integer number of periods".into() });
        }
        let cells = cells.round() as usize;
        if bs.kappa_grid.len() != cells {
            return Err(PropagatorError::Projection { what: format!("a band structure with {cells} zone points") });
        }
        if !bs.is_normalized() || band >= bs.n_bands() {
            return Err(PropagatorError::Projection { what: "a normalized band structure containing the band".into() });
        }
        let n = grid.n_points as i64;
        let m_max = bs.m_max as i64;
        let slots = (0..cells)
            .map(|i| {
                // κ_i = −k_B/2 + i·2π/L, i.e. grid index i − cells/2
                let base = i as i64 - (cells / 2) as i64;
                let indices = (-m_max..=m_max)
                    .map(|m| {
                        let j = base + m * cells as i64;
                        (j.abs() < n / 2).then(|| j.rem_euclid(n) as usize)
                    })
                    .collect();
                (indices, bs.bands[band].coefficients[i].clone(), bs.bands[band].left[i].clone())
            })
            .collect();
        Ok(Self {
            grid: *grid,
            spectral: Spectral::new(grid),
            slots,
            d_sign: bs.d_signs[band],
            kappa_grid: bs.kappa_grid.clone(),
        })
    }

    /// Band amplitudes `c(κ) = D ŷᴴ A(κ + m k_B)`, `A_k` the coefficient of
    /// `exp(ikx)` in the field.
    pub fn project(&mut self, field: &Field) -> Vec<Complex64> {
        let mut buf = field.psi.clone();
        self.spectral.forward(&mut buf);
        let n = self.grid.n_points as f64;
        let x0 = self.grid.x_min;
        let k = &self.spectral.k;
        self.slots
            .iter()
            .map(|(idx, _, left)| {
                let sum: Complex64 = idx
                    .iter()
                    .zip(left)
                    .filter_map(|(j, y)| j.map(|j| y.conj() * buf[j] * Complex64::cis(-k[j] * x0) / n))
                    .sum();
                sum * self.d_sign
            })
            .collect()
    }

    /// Field `Σ_κ c(κ) Σ_m x_m exp(i(κ + m k_B)x)` on the grid.
    pub fn reconstruct(&mut self, amplitudes: &[Complex64], z: f64) -> Field {
        let n = self.grid.n_points;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let x0 = self.grid.x_min;
        for ((idx, right, _), c) in self.slots.iter().zip(amplitudes) {
            for (j, xm) in idx.iter().zip(right) {
                if let Some(j) = j {
                    buf[*j] += c * xm * Complex64::cis(self.spectral.k[*j] * x0);
                }
            }
        }
        self.spectral.inverse(&mut buf);
        Field { grid: self.grid, psi: buf, z }
    }
}
