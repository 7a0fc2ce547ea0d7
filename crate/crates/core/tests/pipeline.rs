use ptcrystal_core::bloch::{band_structure, dipole_terms, normalize_biorthogonal, sinusoidal_fit, zone_grid, DEFAULT_M_MAX};
use ptcrystal_core::bragg::{critical_force, stationary_points, BraggError, CrossingKind};
use ptcrystal_core::lattice::LatticeSpec;
use ptcrystal_core::quasienergy::{
    band_collapse_metric, gamma_parameter, quasienergy_band, BandTable, DriveSpec, DEFAULT_QUASI_STEPS,
};

const PERIOD: f64 = 1e4;

fn table(spec: &LatticeSpec) -> (BandTable, f64) {
    let bs = normalize_biorthogonal(&band_structure(spec, 128, DEFAULT_M_MAX, 2).unwrap()).unwrap();
    let dd = dipole_terms(&bs, 1e-4).unwrap();
    let delta = sinusoidal_fit(&bs, 0).delta.abs();
    (BandTable::from_band(&bs, &dd, 0).unwrap(), delta)
}

#[test]
fn quasienergy_band_narrows_at_the_first_bessel_zero() {
    let spec = LatticeSpec::reference_unbroken();
    let (table, delta) = table(&spec);
    let grid = zone_grid(spec.period, 32);
    let width = |gamma: f64| {
        let drive = DriveSpec::from_gamma(gamma, PERIOD, &spec);
        let qb = quasienergy_band(&table, &drive, spec.reduced_wavelength(), &grid, DEFAULT_QUASI_STEPS, gamma);
        band_collapse_metric(&qb)
    };
    let (at_zero, im) = width(2.405);
    let (off_zero, _) = width(1.0);
    assert!(im < 1e-8, "imaginary part {im}");
    assert!(at_zero < 0.1 * off_zero, "{at_zero} vs {off_zero}");
    assert!(off_zero > 0.5 * delta);
}

#[test]
fn gamma_round_trips_through_the_drive() {
    let spec = LatticeSpec::reference_unbroken();
    for gamma in [0.3, 2.405, 5.52] {
        let drive = DriveSpec::from_gamma(gamma, PERIOD, &spec);
        assert!((gamma_parameter(&drive, &spec) - gamma).abs() < 1e-12);
    }
}

#[test]
fn crossing_geometry_tracks_the_force() {
    let spec = LatticeSpec::reference_critical();
    let fc = critical_force(&spec, &DriveSpec::cosine(0.0, PERIOD));

    assert!(matches!(
        stationary_points(&DriveSpec::cosine(0.9 * fc, PERIOD), &spec, 1),
        Err(BraggError::NoCrossing { n: 1 })
    ));

    let at = stationary_points(&DriveSpec::cosine(fc, PERIOD), &spec, 1).unwrap();
    assert_eq!(at.len(), 1);
    assert_eq!(at[0].kind, CrossingKind::Parabolic);
    assert!((at[0].z0 - 0.75 * PERIOD).abs() < 1e-9);

    let above = stationary_points(&DriveSpec::cosine(1.5 * fc, PERIOD), &spec, 1).unwrap();
    assert_eq!(above.len(), 2);
    assert!(above.iter().all(|p| p.kind == CrossingKind::Linear));
    assert!(above[0].z0 < 0.75 * PERIOD && above[1].z0 > 0.75 * PERIOD);

    let third = stationary_points(&DriveSpec::cosine(3.0 * fc, PERIOD), &spec, 2).unwrap();
    assert_eq!(third.len(), 1);
    assert_eq!(third[0].kind, CrossingKind::Parabolic);
}
