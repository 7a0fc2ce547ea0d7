//! Special functions, quadrature, root finding and periodic interpolation.
//!
//! Everything here is implemented in-crate so the numbers that flow into the
//! physics (Bessel zeros, the Airy constant, jump integrals) are pinned by the
//! tests in this module rather than by whatever libm the platform ships.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("argument {x} outside the supported range |x| < {limit}")]
    RangeError { x: f64, limit: f64 },
    #[error("quadrature did not converge after {doublings} step doublings (last change {change:e})")]
    NoConvergence { doublings: u32, change: f64 },
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("interpolation needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
}

/// Largest |x| accepted by [`bessel_j0`].
pub const BESSEL_J0_RANGE: f64 = 700.0;

/// Power series is used up to this |x|; Miller's backward recurrence beyond.
const J0_SERIES_LIMIT: f64 = 8.0;

/// Bessel function of the first kind, order zero.
///
/// Absolute error is below 1e-12 on the whole supported range. The ascending
/// series is summed for |x| ≤ 8 and Miller's backward recurrence, normalized
/// with `J0 + 2 Σ J_2k = 1`, is used beyond.
pub fn bessel_j0(x: f64) -> Result<f64, NumericsError> {
    let ax = libm::fabs(x);
    if !(ax < BESSEL_J0_RANGE) {
        return Err(NumericsError::RangeError { x, limit: BESSEL_J0_RANGE });
    }
    if ax <= J0_SERIES_LIMIT {
        Ok(j0_series(ax))
    } else {
        Ok(j0_miller(ax))
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while k < 80.0 {
        term *= -q / (k * k);
        sum += term;
        if libm::fabs(term) < 1e-18 {
            break;
        }
        k += 1.0;
    }
    sum
}

fn j0_miller(x: f64) -> f64 {
    // Start well above x so the discarded tail is negligible.
    let mut start = (x + 30.0 + 6.0 * libm::sqrt(x)) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k
    let mut norm = 0.0;
    let two_over_x = 2.0 / x;
    for k in (1..=start).rev() {
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if libm::fabs(cur) > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
        }
    }
    cur / (norm + cur)
}

/// Ai(0) = 3^(-2/3) / Γ(2/3).
pub fn airy_ai0() -> f64 {
    libm::pow(3.0, -2.0 / 3.0) / libm::tgamma(2.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Trapezoid,
    Simpson,
}

/// Composite rule with adaptive step doubling.
///
/// `tolerance` is absolute: doubling stops once two successive estimates
/// differ by less than it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub n_steps: usize,
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::Simpson,
            n_steps: 64,
            tolerance: 1e-10,
            max_doublings: 22,
        }
    }
}

impl QuadratureSpec {
    pub fn trapezoid(n_steps: usize, tolerance: f64) -> Self {
        Self { rule: QuadratureRule::Trapezoid, n_steps, tolerance, ..Self::default() }
    }

    pub fn simpson(n_steps: usize, tolerance: f64) -> Self {
        Self { rule: QuadratureRule::Simpson, n_steps, tolerance, ..Self::default() }
    }
}

/// Integrates a complex-valued function over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Complex64, NumericsError>
where
    F: FnMut(f64) -> Complex64,
{
    if !(a <= b) {
        return Err(NumericsError::InvalidInterval { lo: a, hi: b });
    }
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut n = spec.n_steps.max(2);
    let mut h = (b - a) / n as f64;
    let mut sum = (f(a) + f(b)) * 0.5;
    for i in 1..n {
        sum += f(a + i as f64 * h);
    }
    let mut trap = sum * h;
    let mut prev_estimate: Option<Complex64> = match spec.rule {
        QuadratureRule::Trapezoid => Some(trap),
        QuadratureRule::Simpson => None,
    };
    let mut change = f64::INFINITY;
    for _ in 0..spec.max_doublings {
        let mut mid = Complex64::new(0.0, 0.0);
        for i in 0..n {
            mid += f(a + (i as f64 + 0.5) * h);
        }
        sum += mid;
        n *= 2;
        h *= 0.5;
        let refined = sum * h;
        let estimate = match spec.rule {
            QuadratureRule::Trapezoid => refined,
            QuadratureRule::Simpson => (refined * 4.0 - trap) / 3.0,
        };
        trap = refined;
        if let Some(prev) = prev_estimate {
            change = (estimate - prev).norm();
            if change < spec.tolerance {
                return Ok(estimate);
            }
        }
        prev_estimate = Some(estimate);
    }
    Err(NumericsError::NoConvergence { doublings: spec.max_doublings, change })
}

/// Fixed composite trapezoid over one period of a periodic integrand.
///
/// For smooth periodic functions this is spectrally accurate, so no step
/// doubling is attempted.
pub fn trapezoid_periodic<F>(mut f: F, a: f64, period: f64, n_steps: usize) -> Complex64
where
    F: FnMut(f64) -> Complex64,
{
    let n = n_steps.max(1);
    let h = period / n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..n {
        sum += f(a + i as f64 * h);
    }
    sum * h
}

/// Integral of `exp(i φ(ξ))` around an isolated stationary point.
///
/// The finite window `[a, b]` is integrated numerically and the two
/// truncated tails are added back with their leading asymptotic terms
/// `∓ exp(iφ)/(iφ')`, so the result approximates the integral over the whole
/// line of the locally continued phase. `dphase` must be nonzero at `a`
/// and `b`.
pub fn stationary_phase_integral<P, D>(
    mut phase: P,
    dphase: D,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Complex64, NumericsError>
where
    P: FnMut(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let core = integrate(|x| Complex64::cis(phase(x)), a, b, spec)?;
    let i = Complex64::new(0.0, 1.0);
    let left = Complex64::cis(phase(a)) / (i * dphase(a));
    let right = Complex64::cis(phase(b)) / (i * dphase(b));
    Ok(core + left - right)
}

/// Bisection on a sign-changing bracket until `|hi − lo| < tol`.
pub fn find_root_bracketed<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo * f_hi > 0.0 || f_lo.is_nan() || f_hi.is_nan() {
        return Err(NumericsError::NoSignChange { lo, hi });
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for a minimum of a unimodal function on `[lo, hi]`.
pub fn golden_section_minimize<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Periodic cubic spline through complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicCubic {
    origin: f64,
    spacing: f64,
    values: Vec<Complex64>,
    second: Vec<Complex64>,
}

impl PeriodicCubic {
    /// Nodes are `origin + j·spacing` for `j = 0..values.len()`; the period is
    /// `values.len() · spacing`.
    pub fn new(origin: f64, spacing: f64, values: Vec<Complex64>) -> Result<Self, NumericsError> {
        let n = values.len();
        if n < 3 {
            return Err(NumericsError::TooFewNodes { min: 3, got: n });
        }
        let scale = 6.0 / (spacing * spacing);
        let rhs: Vec<Complex64> = (0..n)
            .map(|j| (values[(j + 1) % n] - values[j] * 2.0 + values[(j + n - 1) % n]) * scale)
            .collect();
        let second = solve_cyclic_141(&rhs);
        Ok(Self { origin, spacing, values, second })
    }

    pub fn period(&self) -> f64 {
        self.spacing * self.values.len() as f64
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let n = self.values.len();
        let t = (x - self.origin) / self.spacing;
        let t = t - libm::floor(t / n as f64) * n as f64;
        let mut j = libm::floor(t) as usize;
        let mut s = t - j as f64;
        if j >= n {
            j = 0;
            s = 0.0;
        }
        let k = (j + 1) % n;
        let r = 1.0 - s;
        let h2 = self.spacing * self.spacing / 6.0;
        self.values[j] * r
            + self.values[k] * s
            + (self.second[j] * (r * r * r - r) + self.second[k] * (s * s * s - s)) * h2
    }
}

/// Solves the cyclic system `M_{j-1} + 4 M_j + M_{j+1} = r_j`.
fn solve_cyclic_141(rhs: &[Complex64]) -> Vec<Complex64> {
    let n = rhs.len();
    // Sherman–Morrison: A = T + u vᵀ with corner entries moved into u vᵀ.
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let x = solve_tridiagonal(&diag, rhs);
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = Complex64::new(gamma, 0.0);
    u[n - 1] = Complex64::new(1.0, 0.0);
    let z = solve_tridiagonal(&diag, &u);
    let fact = (x[0] + x[n - 1] / gamma) / (Complex64::new(1.0, 0.0) + z[0] + z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

/// Thomas algorithm with unit off-diagonals.
fn solve_tridiagonal(diag: &[f64], rhs: &[Complex64]) -> Vec<Complex64> {
    let n = rhs.len();
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![Complex64::new(0.0, 0.0); n];
    c_prime[0] = 1.0 / diag[0];
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - c_prime[i - 1];
        c_prime[i] = 1.0 / m;
        d_prime[i] = (rhs[i] - d_prime[i - 1]) / m;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d_prime[i] - c_prime[i] * out[i + 1];
    }
    out
}
