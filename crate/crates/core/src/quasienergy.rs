//! ac drives and the Floquet quasienergy of the single-band model.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::bloch::{BandFit, BandStructure, DipoleData};
use crate::lattice::LatticeSpec;
use crate::numerics::{self, golden_section_minimize, NumericsError, PeriodicCubic};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuasiError {
    #[error("band tables do not cover the Brillouin zone: {0}")]
    InterpolationRangeError(&'static str),
    #[error("drive.{field} must be {requirement} (got {value})")]
    InvalidDrive { field: &'static str, requirement: &'static str, value: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A z-periodic transverse force.
pub trait Drive {
    /// Period `Λ` (μm).
    fn period(&self) -> f64;
    /// `F(z)` (index/μm).
    fn force(&self, z: f64) -> f64;
    /// `∫₀^z F(ξ) dξ`.
    fn impulse(&self, z: f64) -> f64;

    fn omega(&self) -> f64 {
        2.0 * PI / self.period()
    }

    /// Transverse wavenumber kick `k(z) = impulse(z)/λbar`.
    fn k(&self, z: f64, reduced_wavelength: f64) -> f64 {
        self.impulse(z) / reduced_wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    Cosine,
}

/// `F(z) = F0 cos(ωz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub f0: f64,
    pub period: f64,
    pub waveform: Waveform,
}

impl DriveSpec {
    pub fn cosine(f0: f64, period: f64) -> Self {
        Self { f0, period, waveform: Waveform::Cosine }
    }

    /// Cosine drive with the amplitude that yields `gamma` on `spec`.
    pub fn from_gamma(gamma: f64, period: f64, spec: &LatticeSpec) -> Self {
        let omega = 2.0 * PI / period;
        Self::cosine(gamma * spec.reduced_wavelength() * omega / spec.period, period)
    }

    pub fn violations(&self) -> Vec<QuasiError> {
        let mut out = Vec::new();
        if !(self.f0 >= 0.0 && self.f0.is_finite()) {
            out.push(QuasiError::InvalidDrive { field: "F0", requirement: ">= 0", value: self.f0 });
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            out.push(QuasiError::InvalidDrive { field: "Lambda", requirement: "> 0", value: self.period });
        }
        out
    }

    pub fn validate(&self) -> Result<(), QuasiError> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl Drive for DriveSpec {
    fn period(&self) -> f64 {
        self.period
    }

    fn force(&self, z: f64) -> f64 {
        match self.waveform {
            Waveform::Cosine => self.f0 * libm::cos(self.omega() * z),
        }
    }

    fn impulse(&self, z: f64) -> f64 {
        match self.waveform {
            Waveform::Cosine => self.f0 / self.omega() * libm::sin(self.omega() * z),
        }
    }
}

/// `F(z) = offset + Σ A_h cos(h ω z + φ_h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicDrive {
    pub period: f64,
    pub offset: f64,
    /// `(h, A_h, φ_h)` with `h ≥ 1`.
    pub terms: Vec<(u32, f64, f64)>,
}

impl Drive for HarmonicDrive {
    fn period(&self) -> f64 {
        self.period
    }

    fn force(&self, z: f64) -> f64 {
        let w = self.omega();
        self.offset
            + self.terms.iter().map(|&(h, amp, ph)| amp * libm::cos(h as f64 * w * z + ph)).sum::<f64>()
    }

    fn impulse(&self, z: f64) -> f64 {
        let w = self.omega();
        self.offset * z
            + self
                .terms
                .iter()
                .map(|&(h, amp, ph)| {
                    let hw = h as f64 * w;
                    amp / hw * (libm::sin(hw * z + ph) - libm::sin(ph))
                })
                .sum::<f64>()
    }
}

const ODD_CANDIDATES: usize = 4096;
const ODD_SAMPLES: usize = 256;

fn oddness_defect<D: Drive + ?Sized>(drive: &D, z0: f64) -> f64 {
    let lambda = drive.period();
    (0..ODD_SAMPLES)
        .map(|i| {
            let u = lambda * i as f64 / ODD_SAMPLES as f64;
            libm::fabs(drive.force(z0 + u) + drive.force(z0 - u))
        })
        .fold(0.0, f64::max)
}

/// Smallest `z0 ∈ [0, Λ)` about which the drive is odd, if any.
pub fn odd_symmetry_check<D: Drive + ?Sized>(drive: &D, tol: f64) -> Option<f64> {
    let lambda = drive.period();
    let h = lambda / ODD_CANDIDATES as f64;
    let defects: Vec<f64> = (0..ODD_CANDIDATES).map(|i| oddness_defect(drive, i as f64 * h)).collect();
    for i in 0..ODD_CANDIDATES {
        let prev = defects[(i + ODD_CANDIDATES - 1) % ODD_CANDIDATES];
        let next = defects[(i + 1) % ODD_CANDIDATES];
        if defects[i] > prev || defects[i] > next {
            continue;
        }
        let centre = i as f64 * h;
        let z0 = golden_section_minimize(|z| oddness_defect(drive, z), centre - h, centre + h, 1e-12 * lambda);
        let z0 = if oddness_defect(drive, centre) <= oddness_defect(drive, z0) { centre } else { z0 };
        if oddness_defect(drive, z0) <= tol {
            let wrapped = z0 - libm::floor(z0 / lambda) * lambda;
            return Some(if lambda - wrapped < 1e-9 * lambda { 0.0 } else { wrapped });
        }
    }
    None
}

/// `Γ = F0 a / (λbar ω)`.
pub fn gamma_parameter(drive: &DriveSpec, spec: &LatticeSpec) -> f64 {
    drive.f0 * spec.period / (spec.reduced_wavelength() * drive.omega())
}

/// Closed-form quasienergy of a sinusoidal band, `E0 − Δ J0(Γ) cos(κa)`.
pub fn quasienergy_nntb(fit: &BandFit, gamma: f64, kappa: f64, period: f64) -> Result<f64, NumericsError> {
    Ok(fit.e0 - fit.delta * numerics::bessel_j0(gamma)? * libm::cos(kappa * period))
}

/// `E(κ)` and `Φ(κ)` on a uniform grid over one zone, interpolated periodically.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub period: f64,
    energy: PeriodicCubic,
    phi: PeriodicCubic,
}

impl BandTable {
    /// `kappa_grid` must be `−k_B/2 + j k_B/n`, `j = 0..n`.
    pub fn new(period: f64, kappa_grid: &[f64], energies: Vec<Complex64>, phi: Vec<Complex64>) -> Result<Self, QuasiError> {
        let n = kappa_grid.len();
        if energies.len() != n || phi.len() != n {
            return Err(QuasiError::InterpolationRangeError("table lengths differ from the kappa grid"));
        }
        if n < 3 {
            return Err(QuasiError::InterpolationRangeError("fewer than three nodes"));
        }
        let kb = 2.0 * PI / period;
        let h = kb / n as f64;
        let tol = 1e-9 * kb;
        if libm::fabs(kappa_grid[0] + 0.5 * kb) > tol
            || kappa_grid.iter().enumerate().any(|(j, &k)| libm::fabs(k - (-0.5 * kb + j as f64 * h)) > tol)
        {
            return Err(QuasiError::InterpolationRangeError("grid is not the uniform zone grid"));
        }
        Ok(Self {
            period,
            energy: PeriodicCubic::new(-0.5 * kb, h, energies)?,
            phi: PeriodicCubic::new(-0.5 * kb, h, phi)?,
        })
    }

    /// Samples `E` and `Φ` on an `n`-point zone grid.
    pub fn from_fn<E, P>(period: f64, n: usize, energy: E, phi: P) -> Result<Self, QuasiError>
    where
        E: Fn(f64) -> Complex64,
        P: Fn(f64) -> Complex64,
    {
        let grid = crate::bloch::zone_grid(period, n);
        let e = grid.iter().map(|&k| energy(k)).collect();
        let p = grid.iter().map(|&k| phi(k)).collect();
        Self::new(period, &grid, e, p)
    }

    /// Table of one band of a normalized band structure.
    pub fn from_band(bs: &BandStructure, dd: &DipoleData, band: usize) -> Result<Self, QuasiError> {
        if band >= bs.n_bands() || band >= dd.phi.len() {
            return Err(QuasiError::InterpolationRangeError("band index outside the tables"));
        }
        Self::new(bs.spec.period, &bs.kappa_grid, bs.bands[band].energies.clone(), dd.phi[band].clone())
    }

    pub fn energy(&self, kappa: f64) -> Complex64 {
        self.energy.eval(kappa)
    }

    pub fn phi(&self, kappa: f64) -> Complex64 {
        self.phi.eval(kappa)
    }
}

/// `∫_{z_a}^{z_b} [E(κ₀ + k(ξ)) − i F(ξ) Φ(κ₀ + k(ξ))] dξ` by the composite
/// trapezoid with `n_steps` intervals.
pub fn action_integral<D: Drive + ?Sized>(
    table: &BandTable,
    drive: &D,
    reduced_wavelength: f64,
    kappa0: f64,
    z_a: f64,
    z_b: f64,
    n_steps: usize,
) -> Complex64 {
    let n = n_steps.max(1);
    let h = (z_b - z_a) / n as f64;
    let i = Complex64::new(0.0, 1.0);
    let f = |z: f64| {
        let kp = kappa0 + drive.k(z, reduced_wavelength);
        table.energy(kp) - i * drive.force(z) * table.phi(kp)
    };
    let mut sum = (f(z_a) + f(z_b)) * 0.5;
    for j in 1..n {
        sum += f(z_a + j as f64 * h);
    }
    sum * h
}

/// Default quadrature resolution over one drive period.
pub const DEFAULT_QUASI_STEPS: usize = 4096;

/// `(1/Λ) ∫₀^Λ [E(κ′) − i F Φ(κ′)] dz` with `κ′ = κ − k(Λ) + k(z)`.
pub fn quasienergy_numeric<D: Drive + ?Sized>(
    table: &BandTable,
    drive: &D,
    reduced_wavelength: f64,
    kappa: f64,
    n_steps: usize,
) -> Complex64 {
    let lambda = drive.period();
    let kappa0 = kappa - drive.k(lambda, reduced_wavelength);
    action_integral(table, drive, reduced_wavelength, kappa0, 0.0, lambda, n_steps) / lambda
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasienergyBand {
    pub kappa_grid: Vec<f64>,
    pub energies: Vec<Complex64>,
    pub gamma: f64,
}

/// Numeric quasienergy on `kappa_grid`.
pub fn quasienergy_band<D: Drive + ?Sized>(
    table: &BandTable,
    drive: &D,
    reduced_wavelength: f64,
    kappa_grid: &[f64],
    n_steps: usize,
    gamma: f64,
) -> QuasienergyBand {
    let energies = kappa_grid
        .iter()
        .map(|&k| quasienergy_numeric(table, drive, reduced_wavelength, k, n_steps))
        .collect();
    QuasienergyBand { kappa_grid: kappa_grid.to_vec(), energies, gamma }
}

/// Closed-form quasienergy on `kappa_grid`.
pub fn quasienergy_band_nntb(
    fit: &BandFit,
    gamma: f64,
    kappa_grid: &[f64],
    period: f64,
) -> Result<QuasienergyBand, NumericsError> {
    let energies = kappa_grid
        .iter()
        .map(|&k| quasienergy_nntb(fit, gamma, k, period).map(|e| Complex64::new(e, 0.0)))
        .collect::<Result<_, _>>()?;
    Ok(QuasienergyBand { kappa_grid: kappa_grid.to_vec(), energies, gamma })
}

/// `(max Re − min Re, max |Im|)` over the band.
pub fn band_collapse_metric(qb: &QuasienergyBand) -> (f64, f64) {
    if qb.energies.is_empty() {
        return (0.0, 0.0);
    }
    let (lo, hi, im) = qb.energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY, 0.0f64), |(lo, hi, im), e| {
        (lo.min(e.re), hi.max(e.re), im.max(libm::fabs(e.im)))
    });
    (hi - lo, im)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlScan {
    /// Refined `Γ*` at interior bandwidth minima, ascending.
    pub collapse_points: Vec<f64>,
    /// Bandwidth at each collapse point.
    pub residual_bandwidth: Vec<f64>,
    /// Set when the band has zero width, so every `Γ` is trivially collapsed.
    pub degenerate_band: bool,
}

const DL_KAPPA_POINTS: usize = 64;

/// Scans the NNTB bandwidth over `[gamma_lo, gamma_hi]` and refines each
/// bracketed interior minimum by golden section.
pub fn dl_scan(fit: &BandFit, gamma_lo: f64, gamma_hi: f64, n_points: usize, period: f64) -> Result<DlScan, NumericsError> {
    if !(gamma_lo >= 0.0 && gamma_hi > gamma_lo) {
        return Err(NumericsError::InvalidInterval { lo: gamma_lo, hi: gamma_hi });
    }
    if fit.delta == 0.0 {
        return Ok(DlScan { collapse_points: Vec::new(), residual_bandwidth: Vec::new(), degenerate_band: true });
    }
    let grid = crate::bloch::zone_grid(period, DL_KAPPA_POINTS);
    let mut failure = None;
    let mut width = |g: f64| match quasienergy_band_nntb(fit, g, &grid, period) {
        Ok(qb) => band_collapse_metric(&qb).0,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let n = n_points.max(3);
    let step = (gamma_hi - gamma_lo) / (n - 1) as f64;
    let samples: Vec<f64> = (0..n).map(|i| width(gamma_lo + i as f64 * step)).collect();
    let mut collapse_points = Vec::new();
    let mut residual_bandwidth = Vec::new();
    for i in 1..n - 1 {
        if samples[i] <= samples[i - 1] && samples[i] < samples[i + 1] {
            let lo = gamma_lo + (i - 1) as f64 * step;
            let g = golden_section_minimize(&mut width, lo, lo + 2.0 * step, 1e-10);
            collapse_points.push(g);
            residual_bandwidth.push(width(g));
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(DlScan { collapse_points, residual_bandwidth, degenerate_band: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    const J0_ZERO_1: f64 = 2.404_825_557_695_773;
    const J0_ZERO_2: f64 = 5.520_078_110_286_311;

    fn unbroken() -> LatticeSpec {
        LatticeSpec::reference_unbroken()
    }

    fn sinusoid() -> BandFit {
        BandFit { e0: -6.1488e-4, delta: 4.43255e-5, rms_residual: 0.0 }
    }

    fn sinusoidal_table(fit: BandFit, a: f64) -> BandTable {
        BandTable::from_fn(a, 256, |k| Complex64::new(fit.energy(k, a), 0.0), |_| Complex64::new(0.0, 0.0)).unwrap()
    }

    #[test]
    fn drive_kinematics() {
        let spec = unbroken();
        let d = DriveSpec::cosine(1.903e-5, 1e4);
        let lb = spec.reduced_wavelength();
        assert_eq!(d.k(0.0, lb), 0.0);
        assert!((d.k(2500.0, lb) - d.f0 / (lb * d.omega())).abs() < 1e-15);
        assert!(d.k(1e4, lb).abs() < 1e-15);
        assert!(DriveSpec::cosine(-1.0, 1e4).validate().is_err());
        assert_eq!(DriveSpec::cosine(-1.0, -2.0).violations().len(), 2);
    }

    #[test]
    fn harmonic_impulse_matches_quadrature() {
        let d = HarmonicDrive { period: 1e4, offset: 3e-7, terms: vec![(1, 2e-5, 0.3), (2, 1e-5, -1.1)] };
        for z in [0.0, 1234.0, 5000.0, 9999.0] {
            let quad = numerics::QuadratureSpec::simpson(64, 1e-14);
            let q = numerics::integrate(|x| Complex64::new(d.force(x), 0.0), 0.0, z, &quad).unwrap();
            assert!((q.re - d.impulse(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn oddness() {
        let lambda = 1e4;
        let tol = 1e-12;
        let z0 = odd_symmetry_check(&DriveSpec::cosine(2e-5, lambda), tol).unwrap();
        assert!((z0 - lambda / 4.0).abs() < 1e-6 * lambda);
        let sine = HarmonicDrive { period: lambda, offset: 0.0, terms: vec![(1, 2e-5, -PI / 2.0)] };
        assert!(odd_symmetry_check(&sine, tol).unwrap().abs() < 1e-6 * lambda);
        let constant = HarmonicDrive { period: lambda, offset: 2e-5, terms: vec![] };
        assert_eq!(odd_symmetry_check(&constant, tol), None);
        let two_tone = HarmonicDrive { period: lambda, offset: 0.0, terms: vec![(1, 2e-5, 0.0), (2, 1e-5, 0.0)] };
        assert_eq!(odd_symmetry_check(&two_tone, tol), None);
    }

    #[test]
    fn gamma_of_the_localization_drives() {
        let spec = unbroken();
        assert!((gamma_parameter(&DriveSpec::cosine(13.32e-6, 1e4), &spec) - 1.684).abs() < 1e-3);
        assert!((gamma_parameter(&DriveSpec::cosine(19.03e-6, 1e4), &spec) - 2.405).abs() < 1e-3);
        assert_eq!(gamma_parameter(&DriveSpec::cosine(0.0, 1e4), &spec), 0.0);
        let d = DriveSpec::from_gamma(J0_ZERO_1, 1e4, &spec);
        assert!((gamma_parameter(&d, &spec) - J0_ZERO_1).abs() < 1e-12);
    }

    #[test]
    fn nntb_examples() {
        let fit = sinusoid();
        let a = 8.0;
        for k in [0.0, 0.2, -0.39] {
            assert!((quasienergy_nntb(&fit, 0.0, k, a).unwrap() - fit.energy(k, a)).abs() < 1e-18);
            assert!((quasienergy_nntb(&fit, J0_ZERO_1, k, a).unwrap() - fit.e0).abs() < 1e-5 * fit.delta);
        }
        let got = quasienergy_nntb(&fit, 1.684, 0.0, a).unwrap();
        assert!((got - (fit.e0 - 0.4072 * fit.delta)).abs() < 5e-4 * fit.delta);
    }

    #[test]
    fn numeric_without_drive_is_the_band() {
        let fit = sinusoid();
        let table = sinusoidal_table(fit, 8.0);
        let d = DriveSpec::cosine(0.0, 1e4);
        for k in [0.0, 0.1, -0.3] {
            let e = quasienergy_numeric(&table, &d, 0.1, k, 64);
            assert!((e - table.energy(k)).norm() < 1e-18);
        }
    }

    #[test]
    fn numeric_matches_nntb_and_depends_only_on_gamma() {
        let spec = unbroken();
        let fit = sinusoid();
        let table = sinusoidal_table(fit, spec.period);
        let lb = spec.reduced_wavelength();
        for (gamma, k) in [(1.684, 0.0), (J0_ZERO_1, 0.3), (0.7, -0.2), (4.1, 0.39)] {
            let d1 = DriveSpec::from_gamma(gamma, 1e4, &spec);
            let d2 = DriveSpec::from_gamma(gamma, 3.7e3, &spec);
            let e1 = quasienergy_numeric(&table, &d1, lb, k, DEFAULT_QUASI_STEPS);
            let e2 = quasienergy_numeric(&table, &d2, lb, k, DEFAULT_QUASI_STEPS);
            let closed = quasienergy_nntb(&fit, gamma, k, spec.period).unwrap();
            assert!((e1.re - closed).abs() < 1e-10, "{gamma} {k}: {} vs {closed}", e1.re);
            assert!((e1 - e2).norm() < 1e-10);
            let doubled = quasienergy_numeric(&table, &d1, lb, k, 2 * DEFAULT_QUASI_STEPS);
            assert!((doubled - e1).norm() < 1e-10);
        }
    }

    #[test]
    fn table_must_cover_the_zone() {
        let grid: Vec<f64> = (0..16).map(|j| j as f64 * 0.01).collect();
        let vals = vec![Complex64::new(0.0, 0.0); 16];
        assert!(matches!(
            BandTable::new(8.0, &grid, vals.clone(), vals),
            Err(QuasiError::InterpolationRangeError(_))
        ));
    }

    #[test]
    fn collapse_metric() {
        let fit = sinusoid();
        let grid = crate::bloch::zone_grid(8.0, 64);
        let flat = quasienergy_band_nntb(&fit, 0.0, &grid, 8.0).unwrap();
        assert!((band_collapse_metric(&flat).0 - 2.0 * fit.delta).abs() < 1e-18);
        let collapsed = quasienergy_band_nntb(&fit, J0_ZERO_1, &grid, 8.0).unwrap();
        assert!(band_collapse_metric(&collapsed).0 < 1e-5 * 2.0 * fit.delta);
        let constant = QuasienergyBand { kappa_grid: grid.clone(), energies: vec![Complex64::new(1.0, 0.0); 64], gamma: 0.0 };
        assert_eq!(band_collapse_metric(&constant), (0.0, 0.0));
    }

    #[test]
    fn dl_scan_examples() {
        let fit = sinusoid();
        let found = dl_scan(&fit, 0.0, 6.0, 121, 8.0).unwrap();
        assert_eq!(found.collapse_points.len(), 2);
        assert!((found.collapse_points[0] - J0_ZERO_1).abs() < 1e-6);
        assert!((found.collapse_points[1] - J0_ZERO_2).abs() < 1e-6);
        assert!(dl_scan(&fit, 0.0, 2.0, 41, 8.0).unwrap().collapse_points.is_empty());
        let flat = BandFit { delta: 0.0, ..fit };
        let degenerate = dl_scan(&flat, 0.0, 6.0, 121, 8.0).unwrap();
        assert!(degenerate.degenerate_band && degenerate.collapse_points.is_empty());
    }

    fn reference_table() -> BandTable {
        use crate::bloch::*;
        let bs = normalize_biorthogonal(&band_structure(&unbroken(), 64, DEFAULT_M_MAX, 2).unwrap()).unwrap();
        let dd = dipole_terms(&bs, 1e-3).unwrap();
        BandTable::from_band(&bs, &dd, 0).unwrap()
    }

    #[test]
    fn reality_for_odd_drive_and_loss_of_it_with_a_dc_offset() {
        let spec = unbroken();
        let lb = spec.reduced_wavelength();
        let table = reference_table();
        let grid = crate::bloch::zone_grid(spec.period, 32);
        let cosine = DriveSpec::from_gamma(1.684, 1e4, &spec);
        let qb = quasienergy_band(&table, &cosine, lb, &grid, DEFAULT_QUASI_STEPS, 1.684);
        assert!(band_collapse_metric(&qb).1 < 1e-8);
        let sine = HarmonicDrive { period: 1e4, offset: 0.0, terms: vec![(1, cosine.f0, -PI / 2.0)] };
        let qs = quasienergy_band(&table, &sine, lb, &grid, DEFAULT_QUASI_STEPS, 1.684);
        assert!(band_collapse_metric(&qs).1 < 1e-8);
        let odd_two_tone = HarmonicDrive {
            period: 1e4,
            offset: 0.0,
            terms: vec![(1, cosine.f0, 0.0), (3, 0.5 * cosine.f0, 0.0)],
        };
        assert!(odd_symmetry_check(&odd_two_tone, 1e-12).is_some());
        let q3 = quasienergy_band(&table, &odd_two_tone, lb, &grid, DEFAULT_QUASI_STEPS, 0.0);
        assert!(band_collapse_metric(&q3).1 < 1e-8);
        // a dc offset makes the path in κ open, so the Φ term no longer cancels
        let offset = HarmonicDrive {
            period: 1e4,
            offset: 0.25 * cosine.f0,
            terms: vec![(1, cosine.f0, 0.0), (2, 0.5 * cosine.f0, 1.0)],
        };
        assert_eq!(odd_symmetry_check(&offset, 1e-12), None);
        let qo = quasienergy_band(&table, &offset, lb, &grid, DEFAULT_QUASI_STEPS, 0.0);
        assert!(band_collapse_metric(&qo).1 > 1e-8, "{}", band_collapse_metric(&qo).1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn numeric_reproduces_closed_form(gamma in 0.0f64..6.0, k in -0.39f64..0.39) {
            let spec = unbroken();
            let fit = sinusoid();
            let table = sinusoidal_table(fit, spec.period);
            let d = DriveSpec::from_gamma(gamma, 1e4, &spec);
            let e = quasienergy_numeric(&table, &d, spec.reduced_wavelength(), k, DEFAULT_QUASI_STEPS);
            let closed = quasienergy_nntb(&fit, gamma, k, spec.period).unwrap();
            prop_assert!((e.re - closed).abs() < 1e-10);
            prop_assert!(e.im.abs() < 1e-10);
        }
    }
}
