//! Complex periodic potentials and their plane-wave representation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("lattice.{field} must be {requirement} (got {value})")]
    Invalid { field: &'static str, requirement: &'static str, value: f64 },
    #[error("custom Fourier series lists harmonic {0} more than once")]
    DuplicateHarmonic(i32),
}

/// Shape of the potential.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialForm {
    /// `V0 [cos(k_B x) + i α sin(k_B x)]`.
    CosSin,
    /// `V0 exp(i k_B x)`; the `α = 1` member of [`PotentialForm::CosSin`].
    SingleExp,
    /// `Σ c_m exp(i m k_B x)` with absolute coefficients (`depth` and `alpha` unused).
    CustomFourier(Vec<(i32, Complex64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    /// Period `a` (μm).
    pub period: f64,
    /// Depth `V0`.
    pub depth: f64,
    /// Anti-Hermitian strength `α`.
    pub alpha: f64,
    /// Substrate refractive index `n_s`.
    pub substrate_index: f64,
    /// Vacuum wavelength `λ` (μm).
    pub wavelength: f64,
    pub form: PotentialForm,
}

impl LatticeSpec {
    pub fn cos_sin(period: f64, depth: f64, alpha: f64, substrate_index: f64, wavelength: f64) -> Self {
        Self { period, depth, alpha, substrate_index, wavelength, form: PotentialForm::CosSin }
    }

    pub fn single_exp(period: f64, depth: f64, substrate_index: f64, wavelength: f64) -> Self {
        Self { period, depth, alpha: 1.0, substrate_index, wavelength, form: PotentialForm::SingleExp }
    }

    /// Lattice of the band-structure and dynamic-localization runs.
    pub fn reference_unbroken() -> Self {
        Self::cos_sin(8.0, 0.002, 0.3, 1.42, 0.633)
    }

    /// Lattice of the Bragg-cascade runs.
    pub fn reference_critical() -> Self {
        Self::single_exp(6.0, 2e-4, 1.42, 0.633)
    }

    /// Collects every violated constraint.
    pub fn violations(&self) -> Vec<LatticeError> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &'static str, requirement: &'static str, value: f64| {
            if !ok {
                out.push(LatticeError::Invalid { field, requirement, value });
            }
        };
        check(self.period > 0.0 && self.period.is_finite(), "a", "> 0", self.period);
        check(self.depth >= 0.0 && self.depth.is_finite(), "V0", ">= 0", self.depth);
        check(self.alpha >= 0.0 && self.alpha.is_finite(), "alpha", ">= 0", self.alpha);
        check(self.substrate_index > 0.0 && self.substrate_index.is_finite(), "n_s", "> 0", self.substrate_index);
        check(self.wavelength > 0.0 && self.wavelength.is_finite(), "lambda", "> 0", self.wavelength);
        if let PotentialForm::CustomFourier(terms) = &self.form {
            let mut seen = BTreeMap::new();
            for (m, _) in terms {
                if seen.insert(*m, ()).is_some() {
                    out.push(LatticeError::DuplicateHarmonic(*m));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        match self.violations().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Reduced wavelength `λ / 2π`.
    pub fn reduced_wavelength(&self) -> f64 {
        self.wavelength / (2.0 * PI)
    }

    /// Bragg wavenumber `2π / a`.
    pub fn bragg_wavenumber(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Free dispersion `λbar² k² / (2 n_s)`.
    pub fn free_energy(&self, k: f64) -> f64 {
        let lb = self.reduced_wavelength();
        lb * lb * k * k / (2.0 * self.substrate_index)
    }

    /// `V(x)`; periodic with period `a`.
    pub fn potential(&self, x: f64) -> Complex64 {
        let phase = self.bragg_wavenumber() * x;
        match &self.form {
            PotentialForm::CosSin => {
                Complex64::new(self.depth * libm::cos(phase), self.depth * self.alpha * libm::sin(phase))
            }
            PotentialForm::SingleExp => Complex64::from_polar(self.depth, phase),
            PotentialForm::CustomFourier(terms) => terms
                .iter()
                .map(|(m, c)| c * Complex64::cis(*m as f64 * phase))
                .sum(),
        }
    }

    /// Harmonic `V_m` of `V(x) = Σ V_m exp(i m k_B x)`.
    pub fn harmonic(&self, m: i32) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        match &self.form {
            PotentialForm::CosSin => match m {
                1 => Complex64::new(0.5 * self.depth * (1.0 + self.alpha), 0.0),
                -1 => Complex64::new(0.5 * self.depth * (1.0 - self.alpha), 0.0),
                _ => zero,
            },
            PotentialForm::SingleExp => {
                if m == 1 {
                    Complex64::new(self.depth, 0.0)
                } else {
                    zero
                }
            }
            PotentialForm::CustomFourier(terms) => {
                terms.iter().filter(|(h, _)| *h == m).map(|(_, c)| *c).sum()
            }
        }
    }

    /// All harmonics with `|m| ≤ m_max`.
    pub fn fourier_coefficients(&self, m_max: u32) -> FourierSeries {
        let m_max = m_max as i32;
        let coefficients = (-m_max..=m_max).map(|m| self.harmonic(m)).collect();
        FourierSeries { m_max, coefficients }
    }

    /// Sampled PT check: `max |V(−x) − V*(x)| ≤ tol` over `samples` points of one period.
    pub fn pt_symmetry_check(&self, samples: usize, tol: f64) -> bool {
        let samples = samples.max(2);
        let a = self.period;
        (0..samples).all(|i| {
            let x = a * i as f64 / samples as f64;
            (self.potential(-x) - self.potential(x).conj()).norm() <= tol
        })
    }

    /// Fourier-side PT check: `V(−x) = V*(x)` holds iff every harmonic is real.
    pub fn pt_symmetry_check_fourier(&self, m_max: u32, tol: f64) -> bool {
        self.fourier_coefficients(m_max).coefficients.iter().all(|c| libm::fabs(c.im) <= tol)
    }
}

/// Harmonics `V_m` for `m ∈ [−m_max, m_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub m_max: i32,
    coefficients: Vec<Complex64>,
}

impl FourierSeries {
    pub fn get(&self, m: i32) -> Complex64 {
        if m.abs() > self.m_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.coefficients[(m + self.m_max) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coefficients.iter().enumerate().map(move |(i, c)| (i as i32 - self.m_max, *c))
    }

    /// Evaluates the truncated series at `x` for Bragg wavenumber `k_b`.
    pub fn eval(&self, k_b: f64, x: f64) -> Complex64 {
        self.iter().map(|(m, c)| c * Complex64::cis(m as f64 * k_b * x)).sum()
    }
}
