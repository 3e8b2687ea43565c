mod common;

use common::*;
use num_complex::Complex64;
use polystab_core::acoustic_model::{
    adjoint_c_bound_sq, adjoint_c_norm_sq, check_acoustic_b2g0, check_acoustic_bg11,
    AcousticPerturbation,
};
use polystab_core::kappa_bounds::kappa_from_mc;
use polystab_core::linalg::cayley_step;
use polystab_core::perturbation_check::{
    check_finite_rank, check_hilbert_schmidt, check_rank_one, Perturbation,
};
use polystab_core::profile::Profile;
use polystab_core::spectral_model::{fractional_norm, webster_basis, ModalVector};
use polystab_core::truncation_verify::{assemble_perturbed, assemble_wave, Damping};
use proptest::prelude::*;

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn profile() -> impl Strategy<Value = Profile> {
    prop_oneof![
        prop::collection::vec(-1.0f64..1.0, 1..5).prop_map(|c| Profile::Polynomial { coefficients: c }),
        prop::collection::vec(-1.0f64..1.0, 1..5).prop_map(|c| Profile::SineSeries { coefficients: c }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rank_one_flips_at_threshold(b in coeffs(12), c1 in coeffs(12), c2 in coeffs(12), kappa in 0.01f64..1.0, m in 1.0f64..3.0) {
        let basis = webster(12);
        let v = |c: &Vec<f64>| ModalVector::normalized(&basis, c.clone()).unwrap();
        let p = Perturbation::rank_one(v(&b), v(&c1), v(&c2));
        let br = bracket(|t| check_rank_one(&zero_c(&p).scaled(t, 1.0), 2.0, 1.0, 1.0, kappa, m)).unwrap();
        prop_assert!(br.flips(), "{br:?}");
        let br = bracket(|t| check_rank_one(&zero_b(&p).scaled(1.0, t), 2.0, 1.0, 1.0, kappa, m)).unwrap();
        prop_assert!(br.flips(), "{br:?}");
    }

    #[test]
    fn rank_one_norms_are_homogeneous(b in coeffs(8), c1 in coeffs(8), c2 in coeffs(8), t in 0.1f64..10.0) {
        let basis = webster(8);
        let v = |c: &Vec<f64>| ModalVector::normalized(&basis, c.clone()).unwrap();
        let p = Perturbation::rank_one(v(&b), v(&c1), v(&c2));
        let r1 = check_rank_one(&p, 2.0, 1.0, 1.0, 0.5, 1.2).unwrap();
        let rt = check_rank_one(&p.scaled(t, t), 2.0, 1.0, 1.0, 0.5, 1.2).unwrap();
        prop_assert!((rt.conditions[0].measured - t * r1.conditions[0].measured).abs() <= 1e-12 * rt.conditions[0].measured.max(1.0));
        prop_assert!((rt.conditions[1].measured - t * t * r1.conditions[1].measured).abs() <= 1e-12 * rt.conditions[1].measured.max(1.0));
    }

    #[test]
    fn multi_term_checkers_flip(m in 1usize..4, seed in 0.1f64..3.0, kappa in 0.05f64..0.5) {
        let basis = webster(10);
        let mk = |s: f64| (0..m).map(|k| webster_vec(&basis, 10, s + seed + k as f64)).collect::<Vec<_>>();
        let (b, c1, c2) = (mk(0.0), mk(0.5), mk(1.0));
        let fr = Perturbation::finite_rank(b.clone(), c1.clone(), c2.clone()).unwrap();
        let hs = Perturbation::hilbert_schmidt(b, c1, c2).unwrap();
        for side in [true, false] {
            let sc = |p: &Perturbation, t: f64| if side { zero_c(p).scaled(t, 1.0) } else { zero_b(p).scaled(1.0, t) };
            let br = bracket(|t| check_finite_rank(&sc(&fr, t), 2.0, 1.0, 1.0, kappa, 1.1)).unwrap();
            prop_assert!(br.flips(), "{br:?}");
            let br = bracket(|t| check_hilbert_schmidt(&sc(&hs, t), 2.0, 1.0, 1.0, kappa, 1.1)).unwrap();
            prop_assert!(br.flips(), "{br:?}");
        }
    }

    #[test]
    fn acoustic_checkers_flip(amps in prop::collection::vec(-1.0f64..1.0, 1..4), c1 in profile(), c2 in profile(), c3 in -1.0f64..1.0, kappa in 0.05f64..0.5, k in 0.2f64..3.0) {
        prop_assume!(amps.iter().any(|a| a.abs() > 1e-2));
        let b_side = AcousticPerturbation { b2: Profile::SineSeries { coefficients: amps }, ..AcousticPerturbation::zero() };
        let c_side = AcousticPerturbation { c1, c2, c3: Complex64::new(c3, 0.0), ..AcousticPerturbation::zero() };
        prop_assume!(adjoint_c_bound_sq(&c_side, k).unwrap() > 1e-8);
        for eval in [
            Box::new(|t: f64| check_acoustic_bg11(&b_side.scaled(t, 1.0), k, kappa)) as Box<dyn Fn(f64) -> _>,
            Box::new(|t: f64| check_acoustic_bg11(&c_side.scaled(1.0, t), k, kappa)),
            Box::new(|t: f64| check_acoustic_b2g0(&b_side.scaled(t, 1.0), k, kappa)),
            Box::new(|t: f64| check_acoustic_b2g0(&c_side.scaled(1.0, t), k, kappa)),
        ] {
            let br = bracket(eval).unwrap();
            prop_assert!(br.flips(), "{br:?}");
        }
    }

    #[test]
    fn acoustic_adjoint_bound_chain(c1 in profile(), c2 in profile(), c3 in -2.0f64..2.0, k in 0.1f64..5.0) {
        let p = AcousticPerturbation { c1, c2, c3: Complex64::new(c3, 0.0), ..AcousticPerturbation::zero() };
        let direct = adjoint_c_norm_sq(&p, k).unwrap();
        let bound = adjoint_c_bound_sq(&p, k).unwrap();
        prop_assert!(direct <= bound * (1.0 + 1e-12) + 1e-14, "{direct} > {bound}");
    }

    #[test]
    fn fractional_norm_is_monotone(c in coeffs(16), t1 in 0.0f64..2.0, dt in 0.0f64..1.0) {
        // Webster eigenvalues exceed 1, so mu^theta grows with theta
        let basis = webster_basis(2.0, 16).unwrap();
        let v = ModalVector::normalized(&basis, c).unwrap();
        prop_assert!(fractional_norm(&v, t1) <= fractional_norm(&v, t1 + dt) * (1.0 + 1e-14));
    }

    #[test]
    fn zero_perturbation_leaves_generator_unchanged(g in coeffs(10)) {
        let basis = webster(10);
        let d = ModalVector::normalized(&basis, g).unwrap();
        let sys = assemble_wave(&basis, &Damping::WeakRankOne(d), 10, 2.0).unwrap();
        let z = ModalVector::zeros(&basis, 10);
        let p = Perturbation::rank_one(z.clone(), z.clone(), z);
        prop_assert_eq!(assemble_perturbed(&sys, &p).unwrap().matrix, sys.matrix.clone());
        prop_assert!(sys.max_symmetric_eigenvalue() <= 1e-12);
    }

    #[test]
    fn cayley_step_is_contractive_for_dissipative(g in coeffs(8), h in 1e-3f64..10.0) {
        let basis = webster(8);
        let d = ModalVector::normalized(&basis, g).unwrap();
        let sys = assemble_wave(&basis, &Damping::WeakRankOne(d), 8, 2.0).unwrap();
        let p = cayley_step(&sys.matrix, h).unwrap();
        let norm = p.clone().svd(false, false).singular_values.max();
        prop_assert!(norm <= 1.0 + 1e-12, "{norm}");
    }

    #[test]
    fn kappa_decreases_in_mc(a in 0.01f64..100.0, b in 0.01f64..100.0) {
        prop_assume!(a < b);
        prop_assert!(kappa_from_mc(a) > kappa_from_mc(b));
    }

    #[test]
    fn modal_record_round_trip(c in coeffs(9)) {
        let basis = webster(9);
        let v = ModalVector::normalized(&basis, c).unwrap();
        let json = serde_json::to_string(&v.to_record()).unwrap();
        let back = ModalVector::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        prop_assert_eq!(back.coefficients(), v.coefficients());
    }
}
