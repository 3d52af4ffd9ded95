use num_complex::Complex64;
use resonant_homog::law::RodLaw;
use resonant_homog::microstructure::{sample_microstructure, Obstacle, RodSet};
use resonant_homog::permeability::{resonant_wavenumbers, table_for, SeriesControl};
use resonant_homog::scattering::*;

fn assembly(eps: Complex64, eta: f64, keep: usize) -> RodSet {
    let law = RodLaw::dirac(0.375, eps, 0.125).unwrap();
    let mut set = sample_microstructure(&law, eta, &Obstacle::unit_disk(), 11);
    set.rods.truncate(keep);
    set
}

fn solve(set: RodSet, k0: f64, phi: f64, l: usize) -> FoldyLaxSolution {
    solve_foldy_lax(&RodScatteringProblem::new(set, k0, PlaneWave::from_angle(phi), l)).unwrap()
}

#[test]
fn fifty_lossy_rods_close_the_optical_theorem() {
    let set = assembly(Complex64::new(100.0, 5.0), 0.2, 50);
    assert_eq!(set.len(), 50);
    let sol = solve(set, 0.66, 0.3, 3);
    let ff = FarField::from_multipoles(&sol.multipoles, 720);
    assert!(ff.absorption > 0.0);
    assert!(ff.optical_theorem_gap() < 1e-6, "{:e}", ff.optical_theorem_gap());
}

#[test]
fn lossless_assembly_does_not_absorb() {
    let set = assembly(Complex64::new(100.0, 0.0), 0.2, 40);
    let ff = FarField::from_multipoles(&solve(set, 0.9, 1.1, 3).multipoles, 720);
    assert!(ff.absorption.abs() < 1e-8, "{:e}", ff.absorption);
    assert!(ff.optical_theorem_gap() < 1e-6);
}

#[test]
fn far_field_is_reciprocal() {
    let set = assembly(Complex64::new(100.0, 5.0), 0.25, 30);
    let (a, b) = (0.4, 2.3);
    let pi = std::f64::consts::PI;
    let forward = solve(set.clone(), 0.8, a, 3).multipoles.amplitude(b);
    let backward = solve(set, 0.8, b + pi, 3).multipoles.amplitude(a + pi);
    assert!((forward - backward).norm() < 1e-8 * forward.norm(), "{forward} vs {backward}");
}

#[test]
fn raising_the_order_by_two_is_invisible_once_converged() {
    let set = assembly(Complex64::new(100.0, 5.0), 0.25, usize::MAX);
    let f9 = FarField::from_multipoles(&solve(set.clone(), 1.15, 0.0, 9).multipoles, 720);
    let f11 = FarField::from_multipoles(&solve(set, 1.15, 0.0, 11).multipoles, 720);
    let change = (f11.l2_norm() - f9.l2_norm()).abs() / f9.l2_norm();
    assert!(change < 1e-6, "{change:e}");
}

#[test]
fn monopole_peak_sits_at_first_resonance() {
    let eps = Complex64::new(100.0, 0.0);
    let law = RodLaw::dirac(0.375, eps, 0.125).unwrap();
    let table = table_for(&law, 1.0, &SeriesControl::default()).unwrap();
    let nu1 = resonant_wavenumbers(&law, &table, 1).unwrap()[0];
    let t0 = |k: f64| rod_tmatrix(k, 0.125, 0.375, eps, 0).unwrap()[0].norm();
    let (mut best_k, mut best) = (0.0, 0.0);
    for i in 0..4000 {
        let k0 = 0.4 + 0.4 * i as f64 / 4000.0;
        if t0(k0) > best {
            best = t0(k0);
            best_k = k0;
        }
    }
    assert!((best_k - nu1).abs() < 0.05 * nu1, "{best_k} vs {nu1}");
    // lossless modes reach |T| = 1 exactly at the peak
    let (mut lo, mut hi) = (best_k - 1e-4, best_k + 1e-4);
    for _ in 0..100 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if t0(a) < t0(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    assert!(best > 0.5 && (t0(lo) - 1.0).abs() < 1e-8, "{}", t0(lo));
}

#[test]
fn homogenized_disk_absorbs_with_lossy_permeability() {
    let p = HomogenizedDiskProblem::new(1.0, 2.59, Complex64::new(0.66, 0.02), 1.15, PlaneWave::from_angle(0.0));
    let sol = solve_homogenized_disk(&p).unwrap();
    let ff = FarField::from_multipoles(&sol.multipoles, 720);
    assert!(ff.absorption > 0.0);
    assert!(sol.interface_residual < 1e-10);
}

#[test]
fn coarse_study_shrinks_the_far_field_gap() {
    let law = RodLaw::dirac(0.375, Complex64::new(100.0, 5.0), 0.125).unwrap();
    let mut cfg = StudyConfig::new(law, 1.15, 1.0, 2.5948, Complex64::new(0.6584, 0.0223));
    cfg.etas = vec![0.25, 0.125];
    cfg.rod_order = Some(3);
    cfg.ball_nodes = [12, 24];
    let rep = convergence_study(&cfg).unwrap();
    let r = rep.mean_by_eta();
    assert!(r[1].farfield_L2_gap < r[0].farfield_L2_gap);
    assert!(rep.diagnostics.iter().all(|d| d.optical_theorem_gap < 1e-6 && d.residual < 1e-10));
    let json = serde_json::to_value(&rep.records[0]).unwrap();
    for key in ["eta", "seed", "n_rods", "farfield_L2_gap", "interior_gap", "exterior_gap"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}
