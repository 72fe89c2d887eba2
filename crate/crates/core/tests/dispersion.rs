use vdwlab_core::dispersion::{direction_invariance_check, sigma_coefficient};
use vdwlab_core::{AtomSpec, GridSpec, PotentialKind, SolverSettings};

fn well3d(strengths: [f64; 3]) -> AtomSpec {
    AtomSpec::new(1, PotentialKind::Well3d { strengths }, vec![0.0, 0.0, 0.0])
}

fn directions() -> Vec<Vec<f64>> {
    let s = 1.0 / 3.0f64.sqrt();
    let t = 1.0 / 2.0f64.sqrt();
    vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0], vec![s, s, s], vec![t, 0.0, -t], vec![0.0, 0.0, -1.0]]
}

#[test]
fn isotropic_well_sigma_is_direction_independent() {
    let g = GridSpec::cartesian(3, 10, 4.0).unwrap();
    let atom = well3d([1.0, 1.0, 1.0]);
    let r = direction_invariance_check(&atom, &atom, &directions(), &g, &SolverSettings::default()).unwrap();
    assert!(r.sigma > 0.0);
    assert!(r.direction_spread <= 1e-6, "{}", r.direction_spread);
    assert_eq!(r.direction_invariant, Some(true));
    // v and -v give the same coupling table, hence the same number.
    assert_eq!(r.sigmas_by_direction[0].1, r.sigmas_by_direction[4].1);
}

#[test]
fn anisotropic_well_is_flagged() {
    let g = GridSpec::cartesian(3, 10, 4.0).unwrap();
    let atom = well3d([1.0, 2.0, 4.0]);
    let r = direction_invariance_check(&atom, &atom, &directions(), &g, &SolverSettings::default()).unwrap();
    assert!(r.direction_spread > 1e-3, "{}", r.direction_spread);
    assert_eq!(r.direction_invariant, Some(false));
}

#[test]
fn three_dimensional_sigma_is_positive_and_symmetric() {
    let g = GridSpec::cartesian(3, 10, 4.0).unwrap();
    let (a, b) = (well3d([1.0, 1.0, 1.0]), well3d([2.0, 2.0, 2.0]));
    let s = SolverSettings::default();
    let ab = sigma_coefficient(&a, &b, Some(&[0.6, 0.0, 0.8]), &g, &s).unwrap();
    let ba = sigma_coefficient(&b, &a, Some(&[0.6, 0.0, 0.8]), &g, &s).unwrap();
    assert!(ab.sigma > 0.0);
    assert!((ab.sigma - ba.sigma).abs() <= 1e-8 * ab.sigma);
}
