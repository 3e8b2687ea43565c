#![allow(dead_code)]

use polystab_core::acoustic_model::AcousticPerturbation;
use polystab_core::perturbation_check::{CheckReport, Perturbation};
use polystab_core::profile::{Profile, Profile2};
use polystab_core::spectral_model::{rectangle_basis, webster_basis, ModalBasis, ModalVector};
use polystab_core::Result;
use num_complex::Complex64;

/// Outcome of scaling an input so that its binding condition sits at
/// `0.99` and `1.01` times the threshold.
#[derive(Debug)]
pub struct Bracket {
    pub condition: String,
    pub degree: i32,
    pub below: bool,
    pub above: bool,
}

impl Bracket {
    pub fn flips(&self) -> bool {
        self.below && !self.above
    }
}

fn binding(r: &CheckReport) -> usize {
    r.conditions
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1.measured / a.1.threshold).total_cmp(&(b.1.measured / b.1.threshold)))
        .map(|(i, _)| i)
        .expect("report has conditions")
}

/// `eval(t)` is the report for the input scaled by `t`. The measured value
/// of the binding condition is homogeneous in `t`; its degree is read off
/// from `t = 1` and `t = 2`.
pub fn bracket(eval: impl Fn(f64) -> Result<CheckReport>) -> Result<Bracket> {
    let r1 = eval(1.0)?;
    let i = binding(&r1);
    let m1 = r1.conditions[i].measured;
    let m2 = eval(2.0)?.conditions[i].measured;
    let degree = (m2 / m1).log2().round() as i32;
    let t_star = (r1.conditions[i].threshold / m1).powf(1.0 / degree as f64);
    let at = |f: f64| -> Result<bool> {
        let r = eval(t_star * f.powf(1.0 / degree as f64))?;
        Ok(r.verdict)
    };
    Ok(Bracket {
        condition: r1.conditions[i].name.clone(),
        degree,
        below: at(0.99)?,
        above: at(1.01)?,
    })
}

pub fn webster_vec(basis: &ModalBasis, n: usize, seed: f64) -> ModalVector {
    let c = (0..n)
        .map(|i| ((i as f64 + 1.0) * seed).sin() / (i as f64 + 1.0).powi(2))
        .collect();
    ModalVector::normalized(basis, c).unwrap()
}

pub fn webster(n: usize) -> ModalBasis {
    webster_basis(2.0, n).unwrap()
}

pub fn square(n: usize) -> ModalBasis {
    rectangle_basis(1.0, 1.0, n).unwrap()
}

pub fn rank_one(basis: &ModalBasis, n: usize) -> Perturbation {
    Perturbation::rank_one(webster_vec(basis, n, 0.7), webster_vec(basis, n, 1.3), webster_vec(basis, n, 2.1))
}

pub fn multi(basis: &ModalBasis, n: usize, m: usize) -> (Vec<ModalVector>, Vec<ModalVector>, Vec<ModalVector>) {
    let mk = |s: f64| (0..m).map(|k| webster_vec(basis, n, s + k as f64)).collect::<Vec<_>>();
    (mk(0.3), mk(0.9), mk(1.7))
}

pub fn zero_b(p: &Perturbation) -> Perturbation {
    p.scaled(0.0, 1.0)
}

pub fn zero_c(p: &Perturbation) -> Perturbation {
    p.scaled(1.0, 0.0)
}

pub fn smooth_damping() -> Profile2 {
    Profile2::Separable {
        x: Profile::Polynomial { coefficients: vec![0.5, 0.2] },
        y: Profile::Polynomial { coefficients: vec![1.0, 0.0, -0.3] },
    }
}

pub fn acoustic_b_side() -> AcousticPerturbation {
    AcousticPerturbation {
        b2: Profile::SineSeries { coefficients: vec![1.0, -0.4, 0.2] },
        ..AcousticPerturbation::zero()
    }
}

pub fn acoustic_c_side(with_c4: bool) -> AcousticPerturbation {
    AcousticPerturbation {
        c1: Profile::Polynomial { coefficients: vec![0.3, -0.5, 0.2] },
        c2: Profile::SineSeries { coefficients: vec![0.0, 0.6] },
        c3: Complex64::new(0.4, 0.1),
        c4: if with_c4 { Complex64::new(-0.2, 0.3) } else { Complex64::new(0.0, 0.0) },
        ..AcousticPerturbation::zero()
    }
}
