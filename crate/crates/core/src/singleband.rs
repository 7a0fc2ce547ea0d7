//! Exact characteristics solution of the driven single-band model.
//!
//! Along the characteristic `κ′(z′) = κ − k(z) + k(z′)` the spectral
//! amplitude only acquires the phase (and, for a non-odd drive, gain)
//! `exp{−(i/λbar) ∫ [E(κ′) − i F Φ(κ′)] dz′}`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::numerics::PeriodicCubic;
use crate::quasienergy::{action_integral, BandTable, Drive, QuasiError};

/// Propagates amplitudes `c0` sampled on the table's zone grid
/// (`−k_B/2 + j k_B/n`) to distance `z`. The action integral uses
/// `steps_per_period` trapezoid intervals per drive period.
pub fn singleband_propagate<D: Drive + ?Sized>(
    c0: &[Complex64],
    table: &BandTable,
    drive: &D,
    reduced_wavelength: f64,
    z: f64,
    steps_per_period: usize,
) -> Result<Vec<Complex64>, QuasiError> {
    let n = c0.len();
    if n < 3 {
        return Err(QuasiError::InterpolationRangeError("fewer than three spectral samples"));
    }
    let kb = 2.0 * core::f64::consts::PI / table.period;
    let h = kb / n as f64;
    let initial = PeriodicCubic::new(-0.5 * kb, h, c0.to_vec())?;
    let kz = drive.k(z, reduced_wavelength);
    let periods = libm::fabs(z) / drive.period();
    let n_steps = ((periods * steps_per_period as f64) as usize).max(steps_per_period.min(16)).max(1);
    let minus_i_over_lb = Complex64::new(0.0, -1.0 / reduced_wavelength);
    Ok((0..n)
        .map(|j| {
            let kappa = -0.5 * kb + j as f64 * h;
            let start = kappa - kz;
            let action = action_integral(table, drive, reduced_wavelength, start, 0.0, z, n_steps);
            initial.eval(start) * (minus_i_over_lb * action).exp()
        })
        .collect())
}
