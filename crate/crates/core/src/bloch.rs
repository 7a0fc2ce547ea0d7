//! Plane-wave band structure of the non-Hermitian lattice Hamiltonian.
//!
//! Bloch states are expanded as `u(x) = Σ_m c_m exp(i m k_B x)` with
//! `|m| ≤ m_max`. Right eigenvectors are stored with unit norm and their
//! largest component real and positive; after [`normalize_biorthogonal`]
//! each band also carries left vectors `ŷ` scaled so that `ŷᴴ x = D_n`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::eigen::{self, EigenError};
use crate::lattice::LatticeSpec;
use crate::numerics::find_root_bracketed;

/// Default plane-wave truncation.
pub const DEFAULT_M_MAX: usize = 12;
/// Default threshold on `|Im E|` for the unbroken-phase flag.
pub const DEFAULT_REALITY_TOL: f64 = 1e-9;
/// Pairing products `|yᴴx|` below this are treated as defective.
pub const PAIRING_THRESHOLD: f64 = 1e-6;
/// Energy differences below this close the gap.
pub const GAP_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlochError {
    #[error("eigensolve failed at kappa={kappa}: {source}")]
    EigensolveFailure { kappa: f64, source: EigenError },
    #[error("no symmetry breaking up to alpha={above}")]
    NoBreakingFound { above: f64 },
    #[error("defective left/right pairing for band {band} at kappa={kappa} (|y^H x|={product:e})")]
    DefectivePairing { band: usize, kappa: f64, product: f64 },
    #[error("gauge fixing failed for band {band} at kappa={kappa}; refine the kappa grid")]
    GaugeFixFailure { band: usize, kappa: f64 },
    #[error("gap between bands 1 and 2 closes at kappa={kappa} (|dE|={gap:e})")]
    GapClosure { kappa: f64, gap: f64 },
    #[error("band structure has not been biorthogonally normalized")]
    NotNormalized,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// One tracked band over the κ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub energies: Vec<Complex64>,
    /// Right eigenvectors, indexed `[κ][m + m_max]`.
    pub coefficients: Vec<Vec<Complex64>>,
    /// Left vectors paired to `coefficients`; empty until normalized.
    pub left: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub spec: LatticeSpec,
    pub m_max: usize,
    /// Uniform grid on `[−k_B/2, k_B/2)`.
    pub kappa_grid: Vec<f64>,
    /// Ordered by ascending `Re E` at κ = 0.
    pub bands: Vec<Band>,
    /// Pairing signs `D_n`; empty until normalized.
    pub d_signs: Vec<f64>,
}

impl BandStructure {
    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// Index of the grid point closest to κ = 0.
    pub fn center_index(&self) -> usize {
        nearest_zero(&self.kappa_grid)
    }

    pub fn max_imag(&self) -> f64 {
        self.bands
            .iter()
            .flat_map(|b| b.energies.iter())
            .map(|e| libm::fabs(e.im))
            .fold(0.0, f64::max)
    }

    /// Unbroken-phase flag.
    pub fn is_real(&self, reality_tol: f64) -> bool {
        self.max_imag() <= reality_tol
    }

    pub fn is_normalized(&self) -> bool {
        self.d_signs.len() == self.bands.len()
    }

    /// Minimum `|ŷᴴ x|` of the raw unit-norm left/right vectors over all κ.
    /// Available after normalization.
    pub fn min_pairing(&self) -> Option<f64> {
        if !self.is_normalized() {
            return None;
        }
        // ŷ = y·D/conj(p) with unit y, so |p| = 1/‖ŷ‖.
        Some(
            self.bands
                .iter()
                .flat_map(|b| b.left.iter())
                .map(|y| 1.0 / norm(y))
                .fold(f64::INFINITY, f64::min),
        )
    }
}

/// Plane-wave matrix `H(κ)` of dimension `2 m_max + 1`, row/column `m + m_max`.
///
/// κ is not reduced to the zone, so the matrix is analytic in κ.
pub fn bloch_matrix(spec: &LatticeSpec, kappa: f64, m_max: usize) -> DMatrix<Complex64> {
    let dim = 2 * m_max + 1;
    let mm = m_max as i32;
    let kb = spec.bragg_wavenumber();
    let harmonics = spec.fourier_coefficients((2 * m_max) as u32);
    DMatrix::from_fn(dim, dim, |i, j| {
        let m = i as i32 - mm;
        let mp = j as i32 - mm;
        let mut entry = harmonics.get(m - mp);
        if i == j {
            entry += spec.free_energy(kappa + m as f64 * kb);
        }
        entry
    })
}

/// Uniform zone grid `−k_B/2 + j k_B / n`.
pub fn zone_grid(period: f64, n_kappa: usize) -> Vec<f64> {
    let kb = 2.0 * core::f64::consts::PI / period;
    (0..n_kappa).map(|j| -0.5 * kb + kb * j as f64 / n_kappa as f64).collect()
}

fn nearest_zero(grid: &[f64]) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| libm::fabs(*a.1).total_cmp(&libm::fabs(*b.1)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum())
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn dominant_index(v: &[Complex64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Rotates `v` so that component `j` is real and positive.
fn fix_phase(v: &mut [Complex64], j: usize) {
    let c = v[j];
    if c.norm() > 0.0 {
        let rot = c.conj() / c.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

fn gauge_fixed(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let j = dominant_index(&v);
    fix_phase(&mut v, j);
    v
}

fn solve(spec: &LatticeSpec, kappa: f64, m_max: usize) -> Result<eigen::Eigen, BlochError> {
    eigen::eigen(&bloch_matrix(spec, kappa, m_max))
        .map_err(|source| BlochError::EigensolveFailure { kappa, source })
}

/// Assigns each reference vector the candidate of largest overlap,
/// processing pairs from best to worst so no candidate is used twice.
fn match_by_overlap(reference: &[&[Complex64]], candidates: &[Vec<Complex64>]) -> Vec<usize> {
    let mut pairs = Vec::with_capacity(reference.len() * candidates.len());
    for (r, rv) in reference.iter().enumerate() {
        for (c, cv) in candidates.iter().enumerate() {
            pairs.push((dot(rv, cv).norm(), r, c));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![usize::MAX; reference.len()];
    let mut used = vec![false; candidates.len()];
    for (_, r, c) in pairs {
        if assigned[r] == usize::MAX && !used[c] {
            assigned[r] = c;
            used[c] = true;
        }
    }
    assigned
}

/// Eigensolves every κ of the zone grid and tracks `n_bands` bands outward
/// from κ ≈ 0 by eigenvector overlap.
pub fn band_structure(
    spec: &LatticeSpec,
    n_kappa: usize,
    m_max: usize,
    n_bands: usize,
) -> Result<BandStructure, BlochError> {
    if n_kappa < 8 {
        return Err(BlochError::InvalidArgument("n_kappa must be >= 8"));
    }
    if n_bands == 0 || n_bands > 2 * m_max + 1 {
        return Err(BlochError::InvalidArgument("n_bands must be in 1..=2*m_max+1"));
    }
    let kappa_grid = zone_grid(spec.period, n_kappa);
    let solutions = kappa_grid
        .iter()
        .map(|&k| solve(spec, k, m_max))
        .collect::<Result<Vec<_>, _>>()?;

    let center = nearest_zero(&kappa_grid);
    let mut order: Vec<usize> = (0..solutions[center].values.len()).collect();
    order.sort_by(|&a, &b| {
        let ea = solutions[center].values[a];
        let eb = solutions[center].values[b];
        ea.re.total_cmp(&eb.re).then(ea.im.total_cmp(&eb.im))
    });
    let mut picks = vec![vec![0usize; n_bands]; n_kappa];
    picks[center] = order[..n_bands].to_vec();

    let mut track = |range: &mut dyn Iterator<Item = (usize, usize)>| {
        for (prev, cur) in range {
            let reference: Vec<&[Complex64]> =
                picks[prev].iter().map(|&i| solutions[prev].vectors[i].as_slice()).collect();
            picks[cur] = match_by_overlap(&reference, &solutions[cur].vectors);
        }
    };
    track(&mut (center + 1..n_kappa).map(|j| (j - 1, j)));
    track(&mut (0..center).rev().map(|j| (j + 1, j)));

    let bands = (0..n_bands)
        .map(|b| {
            let energies = (0..n_kappa).map(|j| solutions[j].values[picks[j][b]]).collect();
            let coefficients = (0..n_kappa)
                .map(|j| gauge_fixed(solutions[j].vectors[picks[j][b]].clone()))
                .collect();
            Band { energies, coefficients, left: Vec::new() }
        })
        .collect();
    Ok(BandStructure { spec: spec.clone(), m_max, kappa_grid, bands, d_signs: Vec::new() })
}

/// Smallest `α` in `alpha_values` (refined by bisection against the previous
/// sample) at which any tracked band acquires `|Im E| > reality_tol`.
///
/// `template` supplies everything but `alpha`.
pub fn symmetry_breaking_scan(
    template: &LatticeSpec,
    alpha_values: &[f64],
    reality_tol: f64,
    n_kappa: usize,
    m_max: usize,
    n_bands: usize,
) -> Result<f64, BlochError> {
    if alpha_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(BlochError::InvalidArgument("alpha_values must be ascending"));
    }
    let excess = |alpha: f64| -> Result<f64, BlochError> {
        let spec = LatticeSpec { alpha, ..template.clone() };
        Ok(band_structure(&spec, n_kappa, m_max, n_bands)?.max_imag() - reality_tol)
    };
    let mut last_real: Option<f64> = None;
    for &alpha in alpha_values {
        if excess(alpha)? > 0.0 {
            let Some(lo) = last_real else { return Ok(alpha) };
            let mut failure = None;
            let root = find_root_bracketed(
                |a| match excess(a) {
                    // bisection only needs the sign; treat a failed solve as broken
                    Ok(v) => if v > 0.0 { 1.0 } else { -1.0 },
                    Err(e) => {
                        failure.get_or_insert(e);
                        1.0
                    }
                },
                lo,
                alpha,
                1e-6 * (alpha - lo).max(1e-3),
            )
            .map_err(|_| BlochError::InvalidArgument("bracket lost its sign change"))?;
            if let Some(e) = failure {
                return Err(e);
            }
            return Ok(root);
        }
        last_real = Some(alpha);
    }
    Err(BlochError::NoBreakingFound { above: alpha_values.last().copied().unwrap_or(0.0) })
}

/// Pairs each band with a left eigenvector of the adjoint and scales it so
/// that `ŷᴴ x = D_n`. `D_n` is the sign of `Re(yᴴx)` at κ ≈ 0 for gauge-fixed
/// unit `x` and `y`, and is kept for the whole band.
pub fn normalize_biorthogonal(bs: &BandStructure) -> Result<BandStructure, BlochError> {
    let mut out = bs.clone();
    let n_kappa = bs.kappa_grid.len();
    let center = bs.center_index();
    let mut raw: Vec<Vec<(Vec<Complex64>, Complex64)>> = vec![Vec::with_capacity(n_kappa); bs.n_bands()];
    for (j, &kappa) in bs.kappa_grid.iter().enumerate() {
        let left = eigen::left_eigen(&bloch_matrix(&bs.spec, kappa, bs.m_max))
            .map_err(|source| BlochError::EigensolveFailure { kappa, source })?;
        let mut used = vec![false; left.values.len()];
        for (b, band) in bs.bands.iter().enumerate() {
            let e = band.energies[j];
            let x = &band.coefficients[j];
            // nearest eigenvalue; ties broken by pairing magnitude
            let best = (0..left.values.len())
                .filter(|&i| !used[i])
                .min_by(|&p, &q| {
                    let dp = (left.values[p] - e).norm();
                    let dq = (left.values[q] - e).norm();
                    let scale = f64::EPSILON * 1e3 * e.norm().max(1e-30);
                    if libm::fabs(dp - dq) <= scale {
                        dot(&left.vectors[q], x).norm().total_cmp(&dot(&left.vectors[p], x).norm())
                    } else {
                        dp.total_cmp(&dq)
                    }
                })
                .ok_or(BlochError::InvalidArgument("more bands than eigenvalues"))?;
            used[best] = true;
            let y = gauge_fixed(left.vectors[best].clone());
            let p = dot(&y, x);
            if p.norm() < PAIRING_THRESHOLD {
                return Err(BlochError::DefectivePairing { band: b, kappa, product: p.norm() });
            }
            raw[b].push((y, p));
        }
    }
    out.d_signs = raw.iter().map(|r| if r[center].1.re >= 0.0 { 1.0 } else { -1.0 }).collect();
    for (b, band) in out.bands.iter_mut().enumerate() {
        let d = out.d_signs[b];
        band.left = raw[b]
            .iter()
            .map(|(y, p)| {
                let s = Complex64::new(d, 0.0) / p.conj();
                y.iter().map(|z| z * s).collect()
            })
            .collect();
    }
    Ok(out)
}

/// Φ and the coupling matrix X on the band-structure grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleData {
    pub kappa_grid: Vec<f64>,
    /// `Φ_n(κ)`, indexed `[band][κ]`; real up to round-off in the unbroken phase.
    pub phi: Vec<Vec<Complex64>>,
    /// `X_{n,l}(κ)`, indexed `[κ][n][l]`.
    pub coupling: Vec<Vec<Vec<Complex64>>>,
}

impl DipoleData {
    pub fn max_abs_phi(&self) -> f64 {
        self.phi.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag_phi(&self) -> f64 {
        self.phi.iter().flatten().map(|z| libm::fabs(z.im)).fold(0.0, f64::max)
    }

    /// `Re Φ_n` over the grid.
    pub fn phi_real(&self, band: usize) -> Vec<f64> {
        self.phi[band].iter().map(|z| z.re).collect()
    }
}

/// Right eigenvector of the band that continues `reference` at `kappa`,
/// phase-fixed on component `anchor`.
fn continued_vector(
    spec: &LatticeSpec,
    kappa: f64,
    m_max: usize,
    reference: &[Complex64],
    anchor: usize,
    band: usize,
) -> Result<Vec<Complex64>, BlochError> {
    let sol = solve(spec, kappa, m_max)?;
    let idx = match_by_overlap(&[reference], &sol.vectors)[0];
    let mut v = sol.vectors[idx].clone();
    if v[anchor].norm() < 0.1 * reference[anchor].norm() {
        return Err(BlochError::GaugeFixFailure { band, kappa });
    }
    fix_phase(&mut v, anchor);
    let drift = libm::sqrt(v.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum());
    if drift > 0.5 {
        return Err(BlochError::GaugeFixFailure { band, kappa });
    }
    Ok(v)
}

/// `X_{n,l} = i ŷ_nᴴ ∂_κ x_l` and `Φ_n = −i D_n X_{n,n}` by centered
/// differences of step `dk`.
pub fn dipole_terms(bs: &BandStructure, dk: f64) -> Result<DipoleData, BlochError> {
    if !bs.is_normalized() {
        return Err(BlochError::NotNormalized);
    }
    if !(dk > 0.0) {
        return Err(BlochError::InvalidArgument("dk must be > 0"));
    }
    let nb = bs.n_bands();
    let i = Complex64::new(0.0, 1.0);
    let mut phi = vec![Vec::with_capacity(bs.kappa_grid.len()); nb];
    let mut coupling = Vec::with_capacity(bs.kappa_grid.len());
    for (j, &kappa) in bs.kappa_grid.iter().enumerate() {
        let mut derivs = Vec::with_capacity(nb);
        for (b, band) in bs.bands.iter().enumerate() {
            let x = &band.coefficients[j];
            let anchor = dominant_index(x);
            let plus = continued_vector(&bs.spec, kappa + dk, bs.m_max, x, anchor, b)?;
            let minus = continued_vector(&bs.spec, kappa - dk, bs.m_max, x, anchor, b)?;
            let mut d: Vec<Complex64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * dk)).collect();
            // a unit vector's derivative has Re(xᴴ ∂x) = 0; remove the O(dk²) violation
            let radial = dot(x, &d).re;
            for (di, xi) in d.iter_mut().zip(x) {
                *di -= xi * radial;
            }
            derivs.push(d);
        }
        let x_mat: Vec<Vec<Complex64>> = (0..nb)
            .map(|n| (0..nb).map(|l| i * dot(&bs.bands[n].left[j], &derivs[l])).collect())
            .collect();
        for n in 0..nb {
            phi[n].push(-i * bs.d_signs[n] * x_mat[n][n]);
        }
        coupling.push(x_mat);
    }
    Ok(DipoleData { kappa_grid: bs.kappa_grid.clone(), phi, coupling })
}

/// Least-squares fit `Re E(κ) ≈ E0 − Δ cos(κa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandFit {
    pub e0: f64,
    pub delta: f64,
    pub rms_residual: f64,
}

impl BandFit {
    /// `rms_residual / |Δ|`.
    pub fn relative_residual(&self) -> f64 {
        self.rms_residual / libm::fabs(self.delta)
    }

    pub fn is_good(&self, max_relative: f64) -> bool {
        self.relative_residual() <= max_relative
    }

    pub fn energy(&self, kappa: f64, period: f64) -> f64 {
        self.e0 - self.delta * libm::cos(kappa * period)
    }
}

pub fn sinusoidal_fit(bs: &BandStructure, band: usize) -> BandFit {
    let a = bs.spec.period;
    let samples: Vec<(f64, f64)> = bs
        .kappa_grid
        .iter()
        .zip(&bs.bands[band].energies)
        .map(|(&k, e)| (-libm::cos(k * a), e.re))
        .collect();
    fit_cosine(&samples)
}

/// Linear least squares of `e ≈ e0 + Δ·c` over `(c, e)` samples.
pub(crate) fn fit_cosine(samples: &[(f64, f64)]) -> BandFit {
    let n = samples.len() as f64;
    let (sc, se) = samples.iter().fold((0.0, 0.0), |(sc, se), (c, e)| (sc + c, se + e));
    let (mc, me) = (sc / n, se / n);
    let (scc, sce) = samples
        .iter()
        .fold((0.0, 0.0), |(scc, sce), (c, e)| (scc + (c - mc) * (c - mc), sce + (c - mc) * (e - me)));
    let delta = if scc > 0.0 { sce / scc } else { 0.0 };
    let e0 = me - delta * mc;
    let ss: f64 = samples.iter().map(|(c, e)| { let r = e - e0 - delta * c; r * r }).sum();
    BandFit { e0, delta, rms_residual: libm::sqrt(ss / n) }
}

/// Smallest `|E_1 − E_2|` over the grid.
pub fn min_gap(bs: &BandStructure) -> Result<(f64, f64), BlochError> {
    if bs.n_bands() < 2 {
        return Err(BlochError::InvalidArgument("at least two bands are required"));
    }
    let (kappa, gap) = bs
        .kappa_grid
        .iter()
        .zip(bs.bands[0].energies.iter().zip(&bs.bands[1].energies))
        .map(|(&k, (e1, e2))| (k, (e1 - e2).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0.0, f64::INFINITY));
    if gap < GAP_THRESHOLD {
        return Err(BlochError::GapClosure { kappa, gap });
    }
    Ok((kappa, gap))
}

/// `max_κ |F0 X_{1,2}(κ)| / |E_1(κ) − E_2(κ)|` (both orderings of the pair).
pub fn single_band_validity(bs: &BandStructure, dd: &DipoleData, f0: f64) -> Result<f64, BlochError> {
    min_gap(bs)?;
    if dd.coupling.first().map_or(0, |m| m.len()) < 2 {
        return Err(BlochError::InvalidArgument("dipole data must cover two bands"));
    }
    Ok(dd
        .coupling
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let gap = (bs.bands[0].energies[j] - bs.bands[1].energies[j]).norm();
            libm::fabs(f0) * x[0][1].norm().max(x[1][0].norm()) / gap
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn unbroken() -> LatticeSpec {
        LatticeSpec::reference_unbroken()
    }

    fn with_alpha(alpha: f64) -> LatticeSpec {
        LatticeSpec { alpha, ..unbroken() }
    }

    #[test]
    fn matrix_assembly() {
        let spec = unbroken();
        let m = bloch_matrix(&spec, 0.0, 1);
        let kb = spec.bragg_wavenumber();
        assert_eq!(m.shape(), (3, 3));
        assert!((m[(0, 0)].re - spec.free_energy(-kb)).abs() < 1e-18);
        assert_eq!(m[(1, 1)], Complex64::new(0.0, 0.0));
        // row m, column m': V_{m-m'}
        assert!((m[(1, 0)] - Complex64::new(0.0013, 0.0)).norm() < 1e-18);
        assert!((m[(0, 1)] - Complex64::new(0.0007, 0.0)).norm() < 1e-18);
        assert_eq!(m[(0, 2)], Complex64::new(0.0, 0.0));

        let free = bloch_matrix(&LatticeSpec { depth: 0.0, ..spec.clone() }, 0.1, 3);
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert_eq!(free[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
        let tri = bloch_matrix(&LatticeSpec::reference_critical(), 0.2, 4);
        for i in 0..9 {
            for j in i + 1..9 {
                assert_eq!(tri[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn unbroken_bands_are_real_and_gapped() {
        let bs = band_structure(&unbroken(), 64, DEFAULT_M_MAX, 2).unwrap();
        assert!(bs.max_imag() < 1e-8);
        let top_of_first = bs.bands[0].energies.iter().map(|e| e.re).fold(f64::MIN, f64::max);
        let bottom_of_second = bs.bands[1].energies.iter().map(|e| e.re).fold(f64::MAX, f64::min);
        assert!(bottom_of_second - top_of_first > 1e-3);
    }

    #[test]
    fn critical_bands_are_the_folded_parabola() {
        for spec in [LatticeSpec::reference_critical(), with_alpha(1.0), LatticeSpec { depth: 0.0, ..unbroken() }] {
            let m_max = 6;
            let bs = band_structure(&spec, 32, m_max, 2 * m_max + 1).unwrap();
            let kb = spec.bragg_wavenumber();
            for (j, &k) in bs.kappa_grid.iter().enumerate() {
                let mut got: Vec<f64> = bs.bands.iter().map(|b| b.energies[j].re).collect();
                let mut want: Vec<f64> = (-6..=6).map(|m| spec.free_energy(k + m as f64 * kb)).collect();
                got.sort_by(f64::total_cmp);
                want.sort_by(f64::total_cmp);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() < 1e-10);
                }
                assert!(bs.bands.iter().all(|b| b.energies[j].im.abs() < 1e-10));
            }
        }
    }

    #[test]
    fn bands_are_even_in_kappa() {
        let spec = unbroken();
        let m_max = DEFAULT_M_MAX;
        for k in [0.05, 0.2, 0.3, 0.39] {
            let mut plus = eigen::eigen(&bloch_matrix(&spec, k, m_max)).unwrap().values;
            let mut minus = eigen::eigen(&bloch_matrix(&spec, -k, m_max)).unwrap().values;
            plus.sort_by(|a, b| a.re.total_cmp(&b.re));
            minus.sort_by(|a, b| a.re.total_cmp(&b.re));
            for (p, m) in plus.iter().zip(&minus).take(4) {
                assert!((p - m).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn truncation_converges() {
        let a = band_structure(&unbroken(), 16, 8, 2).unwrap();
        let b = band_structure(&unbroken(), 16, 12, 2).unwrap();
        for (ba, bb) in a.bands.iter().zip(&b.bands) {
            for (ea, eb) in ba.energies.iter().zip(&bb.energies) {
                assert!((ea - eb).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn cos_sin_spectrum_matches_hermitian_equivalent() {
        // diagonal similarity maps V_{±1} onto their geometric mean
        let alpha: f64 = 0.6;
        let spec = with_alpha(alpha);
        let herm = LatticeSpec { alpha: 0.0, depth: spec.depth * (1.0 - alpha * alpha).sqrt(), ..spec.clone() };
        let a = band_structure(&spec, 16, 8, 3).unwrap();
        let b = band_structure(&herm, 16, 8, 3).unwrap();
        for (ba, bb) in a.bands.iter().zip(&b.bands) {
            for (ea, eb) in ba.energies.iter().zip(&bb.energies) {
                assert!((ea - eb).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn breaking_scan() {
        let alphas: Vec<f64> = (0..=15).map(|i| 0.1 * i as f64).collect();
        let ac = symmetry_breaking_scan(&unbroken(), &alphas, DEFAULT_REALITY_TOL, 16, 8, 3).unwrap();
        assert!((ac - 1.0).abs() < 0.02, "{ac}");
        let low: Vec<f64> = (0..=5).map(|i| 0.1 * i as f64).collect();
        assert!(matches!(
            symmetry_breaking_scan(&unbroken(), &low, DEFAULT_REALITY_TOL, 16, 8, 3),
            Err(BlochError::NoBreakingFound { .. })
        ));
        let free = LatticeSpec { depth: 0.0, ..unbroken() };
        assert!(matches!(
            symmetry_breaking_scan(&free, &alphas, DEFAULT_REALITY_TOL, 16, 8, 1),
            Err(BlochError::NoBreakingFound { .. })
        ));
    }

    #[test]
    fn hermitian_limit_pairs_with_plus_signs() {
        let bs = normalize_biorthogonal(&band_structure(&with_alpha(0.0), 32, 8, 3).unwrap()).unwrap();
        assert_eq!(bs.d_signs, vec![1.0, 1.0, 1.0]);
        for band in &bs.bands {
            for (x, y) in band.coefficients.iter().zip(&band.left) {
                let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b).norm()).sum();
                assert!(diff < 1e-10);
            }
        }
    }

    #[test]
    fn biorthogonality_off_the_breaking_point() {
        let bs = normalize_biorthogonal(&band_structure(&unbroken(), 32, DEFAULT_M_MAX, 3).unwrap()).unwrap();
        for j in 0..bs.kappa_grid.len() {
            for n in 0..3 {
                for l in 0..3 {
                    let p = dot(&bs.bands[n].left[j], &bs.bands[l].coefficients[j]);
                    let want = if n == l { bs.d_signs[n] } else { 0.0 };
                    assert!((p - want).norm() < 1e-8, "n={n} l={l} j={j} p={p}");
                }
            }
        }
        // regression: pairing product of the two lowest bands
        let two = normalize_biorthogonal(&band_structure(&unbroken(), 64, DEFAULT_M_MAX, 2).unwrap()).unwrap();
        let min = two.min_pairing().unwrap();
        assert!((min - 0.8256).abs() < 1e-3, "{min}");
    }

    #[test]
    fn critical_point_is_defective() {
        let bs = band_structure(&LatticeSpec::reference_critical(), 32, 6, 3).unwrap();
        assert!(matches!(normalize_biorthogonal(&bs), Err(BlochError::DefectivePairing { .. })));
    }

    #[test]
    fn phi_vanishes_for_real_potential() {
        let bs = normalize_biorthogonal(&band_structure(&with_alpha(0.0), 32, 8, 2).unwrap()).unwrap();
        let dd = dipole_terms(&bs, 1e-4).unwrap();
        assert!(dd.max_abs_phi() < 1e-10, "{}", dd.max_abs_phi());
    }

    #[test]
    fn phi_is_real_and_second_order() {
        let bs = normalize_biorthogonal(&band_structure(&unbroken(), 32, DEFAULT_M_MAX, 2).unwrap()).unwrap();
        let coarse = dipole_terms(&bs, 4e-3).unwrap();
        let mid = dipole_terms(&bs, 2e-3).unwrap();
        let fine = dipole_terms(&bs, 1e-3).unwrap();
        assert!(fine.max_abs_phi() > 1.0);
        assert!(fine.max_imag_phi() < 1e-8 * fine.max_abs_phi());
        let diff = |a: &DipoleData, b: &DipoleData| {
            a.phi[0].iter().zip(&b.phi[0]).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        };
        let ratio = diff(&coarse, &mid) / diff(&mid, &fine);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn fit_of_exact_sinusoid() {
        let a = 8.0;
        let samples: Vec<(f64, f64)> =
            zone_grid(a, 64).iter().map(|&k| (-(k * a).cos(), 1e-3 - 4e-5 * (k * a).cos())).collect();
        let fit = fit_cosine(&samples);
        assert!((fit.e0 - 1e-3).abs() < 1e-15 && (fit.delta - 4e-5).abs() < 1e-15);
        assert!(fit.rms_residual < 1e-12);
    }

    #[test]
    fn unbroken_fit_and_folded_parabola_fit() {
        let fit = sinusoidal_fit(&band_structure(&unbroken(), 256, DEFAULT_M_MAX, 1).unwrap(), 0);
        assert!((fit.delta - 4.4286e-5).abs() < 2e-9, "{fit:?}");
        // regression value of the unbroken-lattice fit quality
        assert!((fit.relative_residual() - 0.02003).abs() < 2e-4, "{}", fit.relative_residual());
        let parabola = sinusoidal_fit(&band_structure(&LatticeSpec::reference_critical(), 256, 6, 1).unwrap(), 0);
        assert!(parabola.relative_residual() >= 0.1);
        assert!(!parabola.is_good(0.1));
    }

    #[test]
    fn validity_ratio() {
        let bs = normalize_biorthogonal(&band_structure(&unbroken(), 32, DEFAULT_M_MAX, 2).unwrap()).unwrap();
        let dd = dipole_terms(&bs, 1e-3).unwrap();
        assert_eq!(single_band_validity(&bs, &dd, 0.0).unwrap(), 0.0);
        let ratio = single_band_validity(&bs, &dd, 1.903e-5).unwrap();
        assert!(ratio < 0.05, "{ratio}");
        let critical = band_structure(&with_alpha(1.0), 32, 6, 2).unwrap();
        assert!(matches!(min_gap(&critical), Err(BlochError::GapClosure { .. })));
    }

    #[test]
    fn grid_covers_zone() {
        let g = zone_grid(8.0, 16);
        assert!((g[0] + PI / 8.0).abs() < 1e-15);
        assert!(g[15] < PI / 8.0);
        assert_eq!(nearest_zero(&g), 8);
    }
}
