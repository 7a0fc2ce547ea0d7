//! Plane-wave Bragg cascade at the symmetry-breaking point.
//!
//! With `V(x) = V0 exp(i k_B x)` a plane wave only scatters into orders
//! `n = 1, 2, …`, and the amplitudes obey
//! `a_n′ = −i (V0/λbar) a_{n−1} exp(i φ_n)`, `φ_n = γ_n − γ_{n−1}`.
//! Appreciable transfer only happens where `φ_n′ = 0`, i.e. where
//! `k(z0) = −k_B (n − 1/2)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::LatticeSpec;
use crate::numerics::{self, find_root_bracketed, NumericsError, QuadratureSpec};
use crate::quasienergy::{Drive, DriveSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BraggError {
    #[error("order {n} is never generated: F0 < (2n-1) F_c")]
    NoCrossing { n: u32 },
    #[error("linear jump formula needs F0 > (2n-1) F_c (order {n})")]
    RegimeMismatch { n: u32 },
    #[error("phase of order {n} advances {advance:.3} rad over one z step (limit pi/4)")]
    UnderResolvedPhase { n: u32, advance: f64 },
    #[error("the cascade model needs a potential with the single harmonic m = +1")]
    NotCritical,
    #[error("z grid must start at 0 and increase strictly")]
    InvalidGrid,
    #[error("order must be >= 1")]
    InvalidOrder,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Relative tolerance on `F0 = (2n−1) F_c` for a parabolic crossing.
pub const PARABOLIC_TOL: f64 = 1e-6;
/// Default number of diffracted orders.
pub const DEFAULT_N_MAX: u32 = 3;
/// Largest phase advance per z step accepted by [`cascade_amplitudes`].
pub const MAX_PHASE_STEP: f64 = PI / 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingKind {
    Linear,
    Parabolic,
}

impl CrossingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CrossingKind::Linear => "linear",
            CrossingKind::Parabolic => "parabolic",
        }
    }

    /// Fraction of the jump in power accumulated when the stationary point is
    /// reached, starting from an empty order: half the Fresnel amplitude for
    /// a linear crossing, `1/√3` of the Airy amplitude for a parabolic one.
    pub fn power_fraction_at_z0(self) -> f64 {
        match self {
            CrossingKind::Linear => 0.25,
            CrossingKind::Parabolic => 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub n: u32,
    pub z0: f64,
    pub kind: CrossingKind,
}

/// `k(z) = (F0/(λbar ω)) sin(ωz)`.
pub fn k_of_z(drive: &DriveSpec, spec: &LatticeSpec, z: f64) -> f64 {
    drive.k(z, spec.reduced_wavelength())
}

/// `γ_n(z) = (λbar/2n_s) ∫₀^z [n k_B + k(ξ)]² dξ` in closed form.
pub fn gamma_n(drive: &DriveSpec, spec: &LatticeSpec, n: u32, z: f64) -> f64 {
    let lb = spec.reduced_wavelength();
    let w = drive.omega();
    let big_k = drive.f0 / (lb * w);
    let nk = n as f64 * spec.bragg_wavenumber();
    let integral = nk * nk * z
        + 2.0 * nk * big_k * (1.0 - libm::cos(w * z)) / w
        + big_k * big_k * (0.5 * z - libm::sin(2.0 * w * z) / (4.0 * w));
    lb / (2.0 * spec.substrate_index) * integral
}

/// `φ_n = γ_n − γ_{n−1}` for `n ≥ 1`.
pub fn phi_n(drive: &DriveSpec, spec: &LatticeSpec, n: u32, z: f64) -> f64 {
    gamma_n(drive, spec, n, z) - gamma_n(drive, spec, n - 1, z)
}

/// `(φ_n′, φ_n″, φ_n‴)` at `z`.
pub fn phi_n_derivatives(drive: &DriveSpec, spec: &LatticeSpec, n: u32, z: f64) -> (f64, f64, f64) {
    let kb = spec.bragg_wavenumber();
    let ns = spec.substrate_index;
    let lb = spec.reduced_wavelength();
    let w = drive.omega();
    let d1 = lb / (2.0 * ns) * kb * ((2 * n - 1) as f64 * kb + 2.0 * k_of_z(drive, spec, z));
    let d2 = kb * drive.force(z) / ns;
    let d3 = -kb * drive.f0 * w * libm::sin(w * z) / ns;
    (d1, d2, d3)
}

/// `F_c = λbar ω k_B / 2`.
pub fn critical_force(spec: &LatticeSpec, drive: &DriveSpec) -> f64 {
    0.5 * spec.reduced_wavelength() * drive.omega() * spec.bragg_wavenumber()
}

/// Stationary points of order `n` in `[0, Λ)`.
pub fn stationary_points(drive: &DriveSpec, spec: &LatticeSpec, n: u32) -> Result<Vec<StationaryPoint>, BraggError> {
    if n == 0 {
        return Err(BraggError::InvalidOrder);
    }
    let threshold = (2 * n - 1) as f64 * critical_force(spec, drive);
    let lambda = drive.period;
    if libm::fabs(drive.f0 - threshold) <= PARABOLIC_TOL * threshold {
        return Ok(vec![StationaryPoint { n, z0: 0.75 * lambda, kind: CrossingKind::Parabolic }]);
    }
    if drive.f0 < threshold {
        return Err(BraggError::NoCrossing { n });
    }
    let target = -threshold / drive.f0;
    let w = drive.omega();
    let f = |z: f64| libm::sin(w * z) - target;
    let tol = 1e-12 * lambda;
    let first = find_root_bracketed(f, 0.5 * lambda, 0.75 * lambda, tol)?;
    let second = find_root_bracketed(f, 0.75 * lambda, lambda, tol)?;
    Ok(vec![
        StationaryPoint { n, z0: first, kind: CrossingKind::Linear },
        StationaryPoint { n, z0: second, kind: CrossingKind::Linear },
    ])
}

/// Stationary points of orders `1..=n_max` in `[0, z_end]`, sorted by `z0`.
pub fn stationary_points_until(drive: &DriveSpec, spec: &LatticeSpec, n_max: u32, z_end: f64) -> Vec<StationaryPoint> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        let Ok(points) = stationary_points(drive, spec, n) else { continue };
        let mut period = 0.0;
        while period <= z_end {
            for p in &points {
                let z0 = p.z0 + period;
                if z0 <= z_end {
                    out.push(StationaryPoint { z0, ..*p });
                }
            }
            period += drive.period;
        }
    }
    out.sort_by(|a, b| a.z0.total_cmp(&b.z0).then(a.n.cmp(&b.n)));
    out
}

/// Coupling `V_{+1}/λbar` of the critical lattice.
fn coupling(spec: &LatticeSpec) -> Result<Complex64, BraggError> {
    let others = (-6..=6).filter(|&m| m != 1).any(|m| spec.harmonic(m).norm() > 0.0);
    let v1 = spec.harmonic(1);
    if others || v1.norm() == 0.0 {
        return Err(BraggError::NotCritical);
    }
    Ok(v1 / spec.reduced_wavelength())
}

/// Characteristic width of the stationary region: `|φ″|^{-1/2}` (linear)
/// or `(|φ‴|/2)^{-1/3}` (parabolic).
pub fn stationary_width(drive: &DriveSpec, spec: &LatticeSpec, point: &StationaryPoint) -> f64 {
    let (_, d2, d3) = phi_n_derivatives(drive, spec, point.n, point.z0);
    match point.kind {
        CrossingKind::Linear => 1.0 / libm::sqrt(libm::fabs(d2)),
        CrossingKind::Parabolic => libm::cbrt(2.0 / libm::fabs(d3)),
    }
}

/// Complex jump amplitude `R` with `a_n(z0⁺) ≈ a_n(z0⁻) + R a_{n−1}(z0)`.
pub fn jump_amplitude(drive: &DriveSpec, spec: &LatticeSpec, point: &StationaryPoint) -> Result<Complex64, BraggError> {
    let c = coupling(spec)?;
    let threshold = (2 * point.n - 1) as f64 * critical_force(spec, drive);
    let (_, d2, d3) = phi_n_derivatives(drive, spec, point.n, point.z0);
    let phase = Complex64::cis(phi_n(drive, spec, point.n, point.z0));
    let minus_i = Complex64::new(0.0, -1.0);
    let integral = match point.kind {
        CrossingKind::Linear => {
            if drive.f0 <= threshold {
                return Err(BraggError::RegimeMismatch { n: point.n });
            }
            let sign = if d2 >= 0.0 { 1.0 } else { -1.0 };
            Complex64::cis(sign * PI / 4.0) * libm::sqrt(2.0 * PI / libm::fabs(d2))
        }
        CrossingKind::Parabolic => {
            Complex64::new(2.0 * PI * numerics::airy_ai0() * libm::cbrt(2.0 / libm::fabs(d3)), 0.0)
        }
    };
    Ok(minus_i * c * phase * integral)
}

/// `|R|` from the closed-form stationary-phase expressions.
pub fn jump_factor(drive: &DriveSpec, spec: &LatticeSpec, point: &StationaryPoint) -> Result<f64, BraggError> {
    let v = coupling(spec)?.norm();
    let threshold = (2 * point.n - 1) as f64 * critical_force(spec, drive);
    let kb = spec.bragg_wavenumber();
    let ns = spec.substrate_index;
    match point.kind {
        CrossingKind::Linear => {
            if drive.f0 <= threshold {
                return Err(BraggError::RegimeMismatch { n: point.n });
            }
            let force = libm::sqrt(drive.f0 * drive.f0 - threshold * threshold);
            Ok(v * libm::sqrt(2.0 * PI * ns / (kb * force)))
        }
        CrossingKind::Parabolic => {
            let lb = spec.reduced_wavelength();
            let w = drive.omega();
            let scale = 4.0 * ns / ((2 * point.n - 1) as f64 * lb * w * w * kb * kb);
            Ok(v * 2.0 * PI * numerics::airy_ai0() * libm::cbrt(scale))
        }
    }
}

/// `|R|` by direct quadrature of `(V0/λbar) ∫ exp(i φ_n) dz` over
/// `z0 ± widths·w`, with the truncated tails added asymptotically.
pub fn jump_factor_numeric(
    drive: &DriveSpec,
    spec: &LatticeSpec,
    point: &StationaryPoint,
    widths: f64,
) -> Result<f64, BraggError> {
    let v = coupling(spec)?.norm();
    let half = widths * stationary_width(drive, spec, point);
    let n = point.n;
    let phi0 = phi_n(drive, spec, n, point.z0);
    let quad = QuadratureSpec::simpson(256, 1e-9 * half);
    let integral = numerics::stationary_phase_integral(
        |z| phi_n(drive, spec, n, z) - phi0,
        |z| phi_n_derivatives(drive, spec, n, z).0,
        point.z0 - half,
        point.z0 + half,
        &quad,
    )?;
    Ok(v * integral.norm())
}

/// Uniform grid `0, dz, …, z_end`.
pub fn uniform_grid(z_end: f64, n_steps: usize) -> Vec<f64> {
    let n = n_steps.max(1);
    (0..=n).map(|j| z_end * j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    pub z_grid: Vec<f64>,
    /// `a_n(z)`, indexed `[n][z]` for `n = 0..=n_max`.
    pub amplitudes: Vec<Vec<Complex64>>,
    /// Stationary points of all orders inside the grid, sorted by `z0`.
    pub stationary: Vec<StationaryPoint>,
    /// `|R|` per entry of `stationary`.
    pub jump_factors: Vec<f64>,
    /// Complex `R` per entry of `stationary`.
    pub jump_amplitudes: Vec<Complex64>,
}

impl CascadeResult {
    pub fn n_max(&self) -> u32 {
        self.amplitudes.len() as u32 - 1
    }

    /// `P(z) = Σ_n |a_n(z)|²`.
    pub fn power(&self) -> Vec<f64> {
        (0..self.z_grid.len())
            .map(|j| self.amplitudes.iter().map(|a| a[j].norm_sqr()).sum())
            .collect()
    }

    /// Mean of `a_n` over grid points inside `[lo, hi]`.
    pub fn window_mean(&self, n: u32, lo: f64, hi: f64) -> Option<Complex64> {
        window_mean(&self.z_grid, &self.amplitudes[n as usize], lo, hi)
    }
}

fn window_mean(z: &[f64], values: &[Complex64], lo: f64, hi: f64) -> Option<Complex64> {
    let (sum, count) = z
        .iter()
        .zip(values)
        .filter(|(zz, _)| **zz >= lo && **zz <= hi)
        .fold((Complex64::new(0.0, 0.0), 0usize), |(s, c), (_, v)| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Integrates the recurrence order by order with the cumulative trapezoid.
pub fn cascade_amplitudes(
    spec: &LatticeSpec,
    drive: &DriveSpec,
    n_max: u32,
    z_grid: &[f64],
) -> Result<CascadeResult, BraggError> {
    let c = coupling(spec)?;
    if z_grid.len() < 2 || z_grid[0] != 0.0 || z_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(BraggError::InvalidGrid);
    }
    let nz = z_grid.len();
    let minus_ic = Complex64::new(0.0, -1.0) * c;
    let mut amplitudes = vec![vec![Complex64::new(1.0, 0.0); nz]];
    for n in 1..=n_max {
        let phases: Vec<f64> = z_grid.iter().map(|&z| phi_n(drive, spec, n, z)).collect();
        if let Some(advance) = phases.windows(2).map(|w| libm::fabs(w[1] - w[0])).reduce(f64::max) {
            if advance > MAX_PHASE_STEP {
                return Err(BraggError::UnderResolvedPhase { n, advance });
            }
        }
        let prev = &amplitudes[n as usize - 1];
        let integrand: Vec<Complex64> =
            prev.iter().zip(&phases).map(|(a, &p)| minus_ic * a * Complex64::cis(p)).collect();
        let mut a = vec![Complex64::new(0.0, 0.0); nz];
        for j in 1..nz {
            a[j] = a[j - 1] + (integrand[j - 1] + integrand[j]) * (0.5 * (z_grid[j] - z_grid[j - 1]));
        }
        amplitudes.push(a);
    }
    let z_end = z_grid[nz - 1];
    let stationary = stationary_points_until(drive, spec, n_max, z_end);
    let jump_factors = stationary.iter().map(|p| jump_factor(drive, spec, p)).collect::<Result<Vec<_>, _>>()?;
    let jump_amplitudes =
        stationary.iter().map(|p| jump_amplitude(drive, spec, p)).collect::<Result<Vec<_>, _>>()?;
    Ok(CascadeResult { z_grid: z_grid.to_vec(), amplitudes, stationary, jump_factors, jump_amplitudes })
}

/// Per-crossing check of the jump rule on the computed cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingSummary {
    pub point: StationaryPoint,
    pub r_abs: f64,
    /// Window means of `a_n` before and after the crossing.
    pub before: Complex64,
    pub after: Complex64,
    /// `before + R a_{n−1}(z0)`.
    pub predicted_after: Complex64,
    /// `|after − predicted_after| / |R a_{n−1}(z0)|`.
    pub residual: f64,
    /// `Σ|a|²` window means before and after.
    pub power_before: f64,
    pub power_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    pub z_grid: Vec<f64>,
    pub power: Vec<f64>,
    pub crossings: Vec<CrossingSummary>,
}

/// Averaging windows span `[4w, 8w]` on each side of a crossing.
const WINDOW_NEAR: f64 = 4.0;
const WINDOW_FAR: f64 = 8.0;

pub fn staircase_prediction(cr: &CascadeResult, drive: &DriveSpec, spec: &LatticeSpec) -> Staircase {
    let power = cr.power();
    let power_c: Vec<Complex64> = power.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let crossings = cr
        .stationary
        .iter()
        .zip(cr.jump_factors.iter().zip(&cr.jump_amplitudes))
        .filter_map(|(p, (&r_abs, &r))| {
            let w = stationary_width(drive, spec, p);
            let (b_lo, b_hi) = (p.z0 - WINDOW_FAR * w, p.z0 - WINDOW_NEAR * w);
            let (a_lo, a_hi) = (p.z0 + WINDOW_NEAR * w, p.z0 + WINDOW_FAR * w);
            let before = cr.window_mean(p.n, b_lo, b_hi)?;
            let after = cr.window_mean(p.n, a_lo, a_hi)?;
            let source = cr.window_mean(p.n - 1, p.z0 - w, p.z0 + w)?;
            let kick = r * source;
            let predicted_after = before + kick;
            let residual = (after - predicted_after).norm() / kick.norm();
            let power_before = window_mean(&cr.z_grid, &power_c, b_lo, b_hi)?.re;
            let power_after = window_mean(&cr.z_grid, &power_c, a_lo, a_hi)?.re;
            Some(CrossingSummary { point: *p, r_abs, before, after, predicted_after, residual, power_before, power_after })
        })
        .collect();
    Staircase { z_grid: cr.z_grid.clone(), power, crossings }
}

/// Largest relative drift of the running mean of `a_n` over windows of
/// length `window` inside `[lo, hi]`, relative to the mean over `[lo, hi]`.
pub fn plateau_drift(cr: &CascadeResult, n: u32, lo: f64, hi: f64, window: f64) -> Option<f64> {
    let total = cr.window_mean(n, lo, hi)?;
    let mut start = lo;
    let mut worst: f64 = 0.0;
    while start + window <= hi {
        let m = cr.window_mean(n, start, start + window)?;
        worst = worst.max((m - total).norm() / total.norm());
        start += 0.25 * window;
    }
    Some(worst)
}

/// A jump of a measured power trace near a predicted crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpMeasurement {
    /// Where the normalized rise reaches the kind's fraction at `z0`.
    pub location: f64,
    pub power_before: f64,
    pub power_after: f64,
}

impl JumpMeasurement {
    pub fn height(&self) -> f64 {
        self.power_after - self.power_before
    }
}

/// Locates the jump of a sampled trace `p(z)` around a predicted point.
///
/// `P_before`/`P_after` are means over `[z0 − far, z0 − near]` and
/// `[z0 + near, z0 + far]`; the location is the crossing of
/// `(P − P_before)/(P_after − P_before)` through `kind`'s fraction, searched
/// between the two windows and chosen closest to `z0`.
pub fn measure_jump(z: &[f64], p: &[f64], z0: f64, kind: CrossingKind, near: f64, far: f64) -> Option<JumpMeasurement> {
    let mean = |lo: f64, hi: f64| {
        let (s, c) = z
            .iter()
            .zip(p)
            .filter(|(zz, _)| **zz >= lo && **zz <= hi)
            .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
        (c > 0).then(|| s / c as f64)
    };
    let power_before = mean(z0 - far, z0 - near)?;
    let power_after = mean(z0 + near, z0 + far)?;
    let height = power_after - power_before;
    if height == 0.0 {
        return None;
    }
    let target = kind.power_fraction_at_z0();
    let frac = |j: usize| (p[j] - power_before) / height - target;
    let mut best: Option<f64> = None;
    for j in 1..z.len() {
        if z[j - 1] < z0 - near || z[j] > z0 + near {
            continue;
        }
        let (f0, f1) = (frac(j - 1), frac(j));
        if f0 == 0.0 || f0 * f1 < 0.0 {
            let t = if f0 == f1 { 0.0 } else { f0 / (f0 - f1) };
            let zc = z[j - 1] + t * (z[j] - z[j - 1]);
            if best.map_or(true, |b| libm::fabs(zc - z0) < libm::fabs(b - z0)) {
                best = Some(zc);
            }
        }
    }
    best.map(|location| JumpMeasurement { location, power_before, power_after })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lattice() -> LatticeSpec {
        LatticeSpec::reference_critical()
    }

    fn drive(multiple: f64) -> DriveSpec {
        let spec = lattice();
        let probe = DriveSpec::cosine(1.0, 1e4);
        DriveSpec::cosine(multiple * critical_force(&spec, &probe), 1e4)
    }

    #[test]
    fn kinematics() {
        let spec = lattice();
        let d = drive(1.5);
        assert_eq!(k_of_z(&d, &spec, 0.0), 0.0);
        let peak = d.f0 / (spec.reduced_wavelength() * d.omega());
        assert!((k_of_z(&d, &spec, 2500.0) - peak).abs() < 1e-15);
        assert!(k_of_z(&d, &spec, 1e4).abs() < 1e-14);
    }

    #[test]
    fn gamma_closed_form_examples() {
        let spec = lattice();
        let lb = spec.reduced_wavelength();
        let kb = spec.bragg_wavenumber();
        let still = DriveSpec::cosine(0.0, 1e4);
        for n in 0..4 {
            let want = lb * (n as f64 * kb).powi(2) * 1234.0 / (2.0 * spec.substrate_index);
            assert!((gamma_n(&still, &spec, n, 1234.0) - want).abs() < 1e-12 * want.max(1.0));
        }
        let d = drive(1.5);
        let big_k = d.f0 / (lb * d.omega());
        let want = lb / (2.0 * spec.substrate_index) * big_k * big_k * 5e3;
        assert!((gamma_n(&d, &spec, 0, 1e4) - want).abs() < 1e-10 * want);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn gamma_matches_quadrature(n in 0u32..4, z in 0.0f64..3e4, multiple in 0.0f64..3.5) {
            let spec = lattice();
            let d = drive(multiple);
            let lb = spec.reduced_wavelength();
            let kb = spec.bragg_wavenumber();
            let scale = z * ((n + 2) as f64 * kb).powi(2);
            let quad = QuadratureSpec::simpson(512, 1e-14 * scale.max(1.0));
            let integral = numerics::integrate(
                |x| Complex64::new((n as f64 * kb + d.k(x, lb)).powi(2), 0.0), 0.0, z, &quad,
            ).unwrap();
            let oracle = lb / (2.0 * spec.substrate_index) * integral.re;
            let got = gamma_n(&d, &spec, n, z);
            prop_assert!((got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
        }
    }

    #[test]
    fn critical_force_scaling() {
        let spec = lattice();
        let d = DriveSpec::cosine(0.0, 1e4);
        let fc = critical_force(&spec, &d);
        assert!((fc - 3.314e-5).abs() < 1e-8, "{fc}");
        let slow = DriveSpec::cosine(0.0, 2e4);
        assert!((critical_force(&spec, &slow) - 0.5 * fc).abs() < 1e-20);
        let wide = LatticeSpec { period: 12.0, ..spec };
        assert!((critical_force(&wide, &d) - 0.5 * fc).abs() < 1e-20);
    }

    #[test]
    fn stationary_point_examples() {
        let spec = lattice();
        let at = stationary_points(&drive(1.0), &spec, 1).unwrap();
        assert_eq!(at.len(), 1);
        assert_eq!(at[0].kind, CrossingKind::Parabolic);
        assert!((at[0].z0 - 7500.0).abs() < 1e-9);
        let above = stationary_points(&drive(1.5), &spec, 1).unwrap();
        assert_eq!(above.len(), 2);
        assert!(above.iter().all(|p| p.kind == CrossingKind::Linear));
        assert!((above[0].z0 / 1e4 - 0.6161).abs() < 1e-4);
        assert!((above[1].z0 / 1e4 - 0.8839).abs() < 1e-4);
        for p in &above {
            let want = -spec.bragg_wavenumber() * 0.5;
            assert!((k_of_z(&drive(1.5), &spec, p.z0) - want).abs() < 1e-9);
        }
        assert_eq!(stationary_points(&drive(0.5), &spec, 1), Err(BraggError::NoCrossing { n: 1 }));
        let second = stationary_points(&drive(3.0), &spec, 2).unwrap();
        assert_eq!(second[0].kind, CrossingKind::Parabolic);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let spec = lattice();
        for multiple in [1.5, 2.0, 3.0] {
            let d = drive(multiple);
            for p in stationary_points(&d, &spec, 1).unwrap() {
                let h = 20.0;
                let f = |z: f64| phi_n(&d, &spec, 1, z);
                let fd = (-f(p.z0 + 2.0 * h) + 16.0 * f(p.z0 + h) - 30.0 * f(p.z0) + 16.0 * f(p.z0 - h)
                    - f(p.z0 - 2.0 * h))
                    / (12.0 * h * h);
                let closed = d.force(p.z0) * spec.bragg_wavenumber() / spec.substrate_index;
                assert!((fd - closed).abs() < 1e-8 * closed.abs(), "{fd} vs {closed}");
                assert!((phi_n_derivatives(&d, &spec, 1, p.z0).1 - closed).abs() < 1e-15);
                assert!(phi_n_derivatives(&d, &spec, 1, p.z0).0.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jump_factors_of_the_reference_cascade() {
        let spec = lattice();
        let linear = stationary_points(&drive(1.5), &spec, 1).unwrap();
        let r = jump_factor(&drive(1.5), &spec, &linear[0]).unwrap();
        assert!((r - 0.95).abs() < 0.01, "{r}");
        assert!((r - 0.9519).abs() < 1e-4);
        let parabolic = stationary_points(&drive(1.0), &spec, 1).unwrap();
        let r = jump_factor(&drive(1.0), &spec, &parabolic[0]).unwrap();
        assert!((r - 2.245).abs() < 0.01, "{r}");
        let mismatch = StationaryPoint { kind: CrossingKind::Linear, ..parabolic[0] };
        assert_eq!(jump_factor(&drive(1.0), &spec, &mismatch), Err(BraggError::RegimeMismatch { n: 1 }));
        // |R| ~ F0^{-1/2} for strong drives
        let big = |m: f64| {
            let d = drive(m);
            jump_factor(&d, &spec, &stationary_points(&d, &spec, 1).unwrap()[0]).unwrap()
        };
        assert!((big(400.0) / big(100.0) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn complex_amplitude_has_the_same_modulus() {
        let spec = lattice();
        for m in [1.0, 1.5, 3.0] {
            let d = drive(m);
            for p in stationary_points(&d, &spec, 1).unwrap() {
                let r = jump_amplitude(&d, &spec, &p).unwrap();
                assert!((r.norm() - jump_factor(&d, &spec, &p).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn numeric_jump_factors_agree() {
        let spec = lattice();
        for m in [1.0, 1.5] {
            let d = drive(m);
            let p = stationary_points(&d, &spec, 1).unwrap()[0];
            let analytic = jump_factor(&d, &spec, &p).unwrap();
            for widths in [4.0, 5.0, 6.0] {
                let numeric = jump_factor_numeric(&d, &spec, &p, widths).unwrap();
                assert!((numeric / analytic - 1.0).abs() < 0.03, "m={m} w={widths}: {numeric} vs {analytic}");
            }
        }
    }

    #[test]
    fn cascade_basics() {
        let spec = lattice();
        let grid = uniform_grid(3e4, 60_000);
        let quiet = cascade_amplitudes(&spec, &drive(0.5), 3, &grid).unwrap();
        assert!(quiet.amplitudes[0].iter().all(|a| *a == Complex64::new(1.0, 0.0)));
        assert!(quiet.stationary.is_empty());
        let max_a1 = quiet.amplitudes[1].iter().map(|a| a.norm()).fold(0.0, f64::max);
        assert!(max_a1 < 0.2, "{max_a1}");
        let staircase = staircase_prediction(&quiet, &drive(0.5), &spec);
        assert!(staircase.power.iter().all(|p| (p - 1.0).abs() < 0.03));

        assert!(matches!(
            cascade_amplitudes(&spec, &drive(1.5), 3, &uniform_grid(3e4, 100)),
            Err(BraggError::UnderResolvedPhase { .. })
        ));
        assert_eq!(
            cascade_amplitudes(&LatticeSpec::reference_unbroken(), &drive(1.5), 3, &grid),
            Err(BraggError::NotCritical)
        );
    }

    #[test]
    fn first_linear_jump() {
        let spec = lattice();
        let d = drive(1.5);
        let cr = cascade_amplitudes(&spec, &d, 3, &uniform_grid(1e4, 20_000)).unwrap();
        let stairs = staircase_prediction(&cr, &d, &spec);
        let first = stairs.crossings[0];
        assert_eq!(first.point.n, 1);
        assert!((first.after.norm() - 0.95).abs() < 0.05, "{}", first.after.norm());
        let dp = first.power_after - first.power_before;
        assert!((dp / 0.9 - 1.0).abs() < 0.1, "{dp}");
        assert!(first.residual < 0.1, "{}", first.residual);
        // flat between the two crossings of the first period
        let w = stationary_width(&d, &spec, &first.point);
        let next = stairs.crossings[1].point.z0;
        let drift = plateau_drift(&cr, 1, first.point.z0 + 5.0 * w, next - 5.0 * w, 2.0 * w).unwrap();
        assert!(drift < 0.05, "{drift}");
    }

    #[test]
    fn second_order_events_at_three_fc() {
        let spec = lattice();
        let d = drive(3.0);
        let cr = cascade_amplitudes(&spec, &d, 3, &uniform_grid(1e4, 40_000)).unwrap();
        let orders: Vec<u32> = cr.stationary.iter().map(|p| p.n).collect();
        assert!(orders.contains(&1) && orders.contains(&2));
        let second = cr.stationary.iter().find(|p| p.n == 2).unwrap();
        let want = -1.5 * spec.bragg_wavenumber();
        assert!((k_of_z(&d, &spec, second.z0) - want).abs() < 1e-9);
        let before = cr.window_mean(2, second.z0 - 2000.0, second.z0 - 1500.0).unwrap().norm();
        let after = cr.window_mean(2, second.z0 + 1500.0, second.z0 + 2000.0).unwrap().norm();
        assert!(after > 5.0 * before);
    }

    #[test]
    fn jump_estimator_on_a_synthetic_step() {
        let z: Vec<f64> = (0..=2000).map(|i| i as f64).collect();
        let p: Vec<f64> = z.iter().map(|&x| 1.0 + 0.5 * (1.0 + ((x - 1000.0) / 30.0).tanh())).collect();
        let m = measure_jump(&z, &p, 1000.0, CrossingKind::Linear, 300.0, 600.0).unwrap();
        assert!((m.height() - 1.0).abs() < 1e-3);
        let want = 1000.0 + 30.0 * (2.0f64 * 0.25 - 1.0).atanh();
        assert!((m.location - want).abs() < 0.5, "{}", m.location);
    }
}
