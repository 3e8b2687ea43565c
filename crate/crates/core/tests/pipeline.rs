mod common;

use common::*;
use polystab_core::acoustic_model::{
    assemble_acoustic_perturbed, build_acoustic_discretization, check_acoustic_bg11,
    estimate_kappa_acoustic_on,
};
use polystab_core::kappa_bounds::{
    estimate_kappa_numeric, gap_windows, gap_windows_capped, webster_certificate, webster_m,
    webster_windows, S0Choice,
};
use polystab_core::perturbation_check::{check_webster_rank_one, Perturbation};
use polystab_core::spectral_model::{expand, rectangle_basis, webster_basis, ModalVector};
use polystab_core::truncation_verify::{
    assemble_perturbed, assemble_wave, resolvent_sweep, simulate_decay, spectrum_check,
    uniform_grid, Damping, DampingField, TruncatedSystem,
};
use polystab_core::profile::Profile2;
use polystab_core::Error;

fn webster_system(n: usize) -> TruncatedSystem {
    let b = webster_basis(2.0, n).unwrap();
    let d = expand(|p| 1.0 - p[0], &b, n, 4 * n + 64).unwrap();
    assemble_wave(&b, &Damping::WeakRankOne(d), n, 2.0).unwrap()
}

#[test]
fn gap_windows_track_closed_form_windows() {
    let b = webster_basis(2.0, 50).unwrap();
    let d = expand(|p| 1.0 - p[0], &b, 50, 256).unwrap();
    let reference = webster_windows(2.0).unwrap();
    let capped = gap_windows_capped(&b, &d, Some(reference.delta0)).unwrap();
    let free = gap_windows(&b, &d).unwrap();
    let rel = |w: &polystab_core::kappa_bounds::FrequencyWindows, s: f64| {
        let env = w.c / (s + w.delta0);
        (env - reference.eta(s)).abs() / reference.eta(s)
    };
    for s in uniform_grid(0.0, 50.0, 0.25) {
        assert!(rel(&capped, s) < 0.10, "capped, s = {s}: {}", rel(&capped, s));
    }
    for s in uniform_grid(40.0, 50.0, 0.25) {
        assert!(rel(&free, s) < 0.10, "uncapped, s = {s}: {}", rel(&free, s));
    }
}

#[test]
fn admissible_webster_perturbation_stays_hurwitz() {
    let n = 40;
    let sys = webster_system(n);
    let basis = sys.basis.clone().unwrap();
    let cert = webster_certificate(S0Choice::Fixed(2.8)).unwrap();
    let p = rank_one(&basis, n);
    let r = check_webster_rank_one(&p, cert.kappa_max, webster_m()).unwrap();
    let worst = r
        .conditions
        .iter()
        .map(|c| c.measured / c.threshold)
        .fold(0.0, f64::max);
    // both conditions are at most quadratic in the common scale
    let t = 0.95 / worst.max(worst.sqrt());
    let scaled = p.scaled(t, t);
    assert!(check_webster_rank_one(&scaled, cert.kappa_max, webster_m()).unwrap().verdict);
    let pert = assemble_perturbed(&sys, &scaled).unwrap();
    assert!(spectrum_check(&pert).unwrap().pass);
}

#[test]
fn mismatched_perturbation_basis_is_rejected() {
    let sys = webster_system(10);
    let other = rectangle_basis(1.0, 1.0, 10).unwrap();
    let z = ModalVector::zeros(&other, 10);
    let p = Perturbation::rank_one(z.clone(), z.clone(), z);
    assert!(matches!(assemble_perturbed(&sys, &p), Err(Error::BasisMismatch(_))));
}

#[test]
fn webster_truncation_converges() {
    let grid = uniform_grid(0.0, 20.0, 0.05);
    let k50 = estimate_kappa_numeric(&webster_system(50).matrix, 2, &grid).unwrap();
    let k100 = estimate_kappa_numeric(&webster_system(100).matrix, 2, &grid).unwrap();
    assert!((k50.kappa - k100.kappa).abs() < 1e-3 * k100.kappa, "{} vs {}", k50.kappa, k100.kappa);
}

#[test]
fn smoother_data_decays_no_slower() {
    let sys = webster_system(30);
    let t1 = simulate_decay(&sys, 1, 1000.0, 1 << 20, 3).unwrap();
    let t2 = simulate_decay(&sys, 2, 1000.0, 1 << 20, 3).unwrap();
    assert!(t2.fit.as_ref().unwrap().slope <= t1.fit.as_ref().unwrap().slope + 1e-9);
    let ainv = sys.norm_inverse().unwrap();
    for (e1, e2) in t1.envelope.iter().zip(&t2.envelope) {
        assert!(*e2 <= ainv * ainv * e1 * (1.0 + 1e-9));
    }
}

#[test]
fn decay_is_reproducible_from_seed() {
    let sys = webster_system(12);
    let a = simulate_decay(&sys, 1, 100.0, 1 << 16, 42).unwrap();
    let b = simulate_decay(&sys, 1, 100.0, 1 << 16, 42).unwrap();
    let c = simulate_decay(&sys, 1, 100.0, 1 << 16, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.energy, c.energy);
}

#[test]
fn viscous_rectangle_is_uniformly_damped() {
    let b = rectangle_basis(1.0, 1.0, 12).unwrap();
    let field = DampingField::Rectangle { profile: Profile2::Constant { value: 2.0 } };
    let sys = assemble_wave(&b, &Damping::Viscous(field), 12, 0.0).unwrap();
    let prof = resolvent_sweep(&sys, &uniform_grid(0.0, 40.0, 0.1), 0).unwrap();
    // exponentially stable: the resolvent stays bounded along the axis
    assert!(prof.max().1 < 2.0, "{:?}", prof.max());
}

#[test]
fn acoustic_resolvent_grows_quadratically() {
    let disc = build_acoustic_discretization(128, 1.0, 1.0).unwrap();
    let prof = resolvent_sweep(&disc.system, &uniform_grid(1.0, 60.0, 0.1), 0).unwrap();
    let fit = prof.fit.unwrap();
    assert!((fit.slope - 2.0).abs() < 0.2, "{fit:?}");
}

#[test]
fn acoustic_kappa_is_stable_under_refinement() {
    let grid = uniform_grid(0.0, 10.0, 0.05);
    let k128 = estimate_kappa_acoustic_on(128, 1.0, 1.0, 2, &grid).unwrap();
    let k256 = estimate_kappa_acoustic_on(256, 1.0, 1.0, 2, &grid).unwrap();
    assert!(k128.kappa > 0.0);
    assert!((k128.kappa - k256.kappa).abs() < 0.05 * k256.kappa);
}

#[test]
fn admissible_acoustic_perturbation_stays_hurwitz() {
    let grid = uniform_grid(0.0, 10.0, 0.05);
    let kappa = estimate_kappa_acoustic_on(64, 1.0, 1.0, 2, &grid).unwrap().kappa;
    let mut p = acoustic_b_side();
    let c = acoustic_c_side(false);
    p.c1 = c.c1;
    p.c2 = c.c2;
    p.c3 = num_complex::Complex64::new(c.c3.re, 0.0);
    let r = check_acoustic_bg11(&p, 1.0, kappa).unwrap();
    let worst = r
        .conditions
        .iter()
        .map(|c| c.measured / c.threshold)
        .fold(0.0, f64::max);
    let t = 0.9 / worst.max(worst.sqrt());
    let scaled = p.scaled(t, t);
    assert!(check_acoustic_bg11(&scaled, 1.0, kappa).unwrap().verdict);
    let disc = build_acoustic_discretization(256, 1.0, 1.0).unwrap();
    let pert = assemble_acoustic_perturbed(&disc, &scaled).unwrap();
    assert!(spectrum_check(&pert).unwrap().pass);
}
