//! Finite-dimensional truncations of the damped wave systems, used as an
//! empirical oracle for the certificates: resolvent sweeps along the
//! imaginary axis, spectrum checks and energy-decay simulation.
//!
//! States are kept in energy coordinates `x = (sqrt(mu) w, w_t)` (modal
//! coefficients against normalized eigenfunctions), so the Euclidean norm of
//! `x` is the energy norm and operator norms are spectral matrix norms. The
//! truncated generator is
//!
//! ```text
//! A_N = [[0, S], [-S, -G]],   S = diag(sqrt(mu_n)),
//! ```
//!
//! with `G` the modal damping block.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kappa_bounds::refine_with_spectrum;
use crate::linalg::{
    cayley_step, eigenvalues, loglog_fit, min_symmetric_eigenvalue, spectral_norm, LinearFit,
    ResolventEngine,
};
use crate::perturbation_check::Perturbation;
use crate::profile::{Profile, Profile2};
use crate::spectral_model::{Convention, Family, ModalBasis, ModalVector};

/// Tolerance on negative eigenvalues of a damping block.
pub const DISSIPATIVITY_TOL: f64 = 1e-10;

/// `max Re lambda < -SPECTRUM_RTOL ||A||` counts as Hurwitz.
pub const SPECTRUM_RTOL: f64 = 1e-12;

/// Allowed relative change of the final energy when the step is halved.
pub const STEP_HALVING_RTOL: f64 = 5e-3;

/// Allowed relative energy increase between checkpoints.
pub const ENERGY_MONOTONE_RTOL: f64 = 1e-9;

/// Spatial damping coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum DampingField {
    Interval { profile: Profile },
    Rectangle { profile: Profile2 },
}

impl DampingField {
    fn value(&self, p: &[f64; 2], family: Family) -> f64 {
        match (self, family) {
            (DampingField::Interval { profile }, _) => profile.value(p[0]),
            (DampingField::Rectangle { profile }, Family::Rectangle { a, b }) => {
                profile.value(p[0], p[1], a, b)
            }
            (DampingField::Rectangle { profile }, _) => profile.value(p[0], p[1], 1.0, 1.0),
        }
    }

    fn smoothness(&self) -> u8 {
        match self {
            DampingField::Interval { profile } => profile.smoothness(),
            DampingField::Rectangle { profile } => profile.smoothness(),
        }
    }
}

/// Damping term of the wave equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Damping {
    None,
    /// `w_tt - L w + d w_t = 0`; modal block `G_jk = <d phi_k, phi_j>`.
    Viscous(DampingField),
    /// `w_tt - L w + d <w_t, d> = 0`; modal block `G = g g^T`.
    WeakRankOne(ModalVector),
}

/// A truncated generator in energy coordinates.
#[derive(Debug, Clone)]
pub struct TruncatedSystem {
    pub matrix: DMatrix<f64>,
    /// Conservative (skew-symmetric) part.
    pub skew: DMatrix<f64>,
    pub modes: usize,
    pub basis: Option<ModalBasis>,
    /// Decay exponent claimed for the infinite-dimensional system.
    pub alpha: f64,
    pub label: String,
    pub perturbation_rank: usize,
}

impl TruncatedSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |A_0 + A_0^T|` of the conservative part.
    pub fn skewness_defect(&self) -> f64 {
        (&self.skew + self.skew.transpose()).amax()
    }

    /// Largest eigenvalue of the symmetric part `(A + A^T)/2`.
    pub fn max_symmetric_eigenvalue(&self) -> f64 {
        crate::linalg::max_symmetric_eigenvalue(&crate::linalg::symmetric_part(&self.matrix))
    }

    /// `||A_N^{-1}||` by dense SVD of the inverse.
    pub fn norm_inverse(&self) -> Result<f64> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { s: 0.0 })?;
        Ok(spectral_norm(&inv))
    }
}

/// Modal damping block `G` (`n x n`) for the first `n` modes.
pub fn damping_block(basis: &ModalBasis, damping: &Damping, n: usize) -> Result<DMatrix<f64>> {
    match damping {
        Damping::None => Ok(DMatrix::zeros(n, n)),
        Damping::WeakRankOne(d) => {
            let d = d.to_normalized();
            if !d.basis().compatible(basis, d.truncation().min(n)) {
                return Err(Error::BasisMismatch("damping vector and basis disagree".into()));
            }
            let g = DVector::from_fn(n, |i, _| d.coefficient(i));
            Ok(&g * g.transpose())
        }
        Damping::Viscous(field) => {
            // rough coefficients need many panels for the jump
            let base = 2 * basis.max_frequency_index(n);
            let nodes = if field.smoothness() == 0 { 4 * base + 512 } else { base + 64 };
            let rule = basis.quadrature(nodes)?;
            let fam = basis.family();
            let q = rule.len();
            let mut phi = DMatrix::<f64>::zeros(n, q);
            for i in 0..n {
                for (k, p) in rule.points.iter().enumerate() {
                    phi[(i, k)] = basis.eval(i, p, Convention::Normalized)?;
                }
            }
            let dw: Vec<f64> = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * field.value(p, fam))
                .collect();
            let mut scaled = phi.clone();
            for (k, &w) in dw.iter().enumerate() {
                scaled.column_mut(k).scale_mut(w);
            }
            let g = &scaled * phi.transpose();
            let g = (&g + g.transpose()) * 0.5;
            let lmin = min_symmetric_eigenvalue(&g);
            if lmin < -DISSIPATIVITY_TOL {
                return Err(Error::NonDissipative { min_eigenvalue: lmin });
            }
            Ok(g)
        }
    }
}

/// Truncated damped wave generator `[[0, S], [-S, -G]]` on the first `n`
/// modes.
pub fn assemble_wave(basis: &ModalBasis, damping: &Damping, n: usize, alpha: f64) -> Result<TruncatedSystem> {
    if n == 0 || n > basis.len() {
        return Err(invalid(format!("truncation {n} outside 1..={}", basis.len())));
    }
    let g = damping_block(basis, damping, n)?;
    let mut skew = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        let s = basis.eigenvalue(i).sqrt();
        skew[(i, n + i)] = s;
        skew[(n + i, i)] = -s;
    }
    let mut matrix = skew.clone();
    let mut block = matrix.view_mut((n, n), (n, n));
    block -= &g;
    let label = match damping {
        Damping::None => "undamped",
        Damping::Viscous(_) => "viscous",
        Damping::WeakRankOne(_) => "weak_rank_one",
    };
    Ok(TruncatedSystem {
        matrix,
        skew,
        modes: n,
        basis: Some(basis.truncated(n)),
        alpha,
        label: format!("{} {label}", basis.family().name()),
        perturbation_rank: 0,
    })
}

/// Perturbation matrices `B_N` (`2N x r`, columns `(0, b_k)`) and `C_N`
/// (`r x 2N`, rows `(c_{k,1,n} / sqrt(mu_n), c_{k,2,n})`). The `mu^{-1/2}`
/// factor converts the pairing `<w, c_1>` to the position coordinates
/// `sqrt(mu) w`.
pub fn perturbation_matrices(sys: &TruncatedSystem, p: &Perturbation) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let basis = sys
        .basis
        .as_ref()
        .ok_or_else(|| Error::BasisMismatch("system has no modal basis".into()))?;
    let n = sys.modes;
    let r = p.rank();
    let mut bm = DMatrix::<f64>::zeros(2 * n, r);
    let mut cm = DMatrix::<f64>::zeros(r, 2 * n);
    for k in 0..r {
        for v in [&p.b[k], &p.c1[k], &p.c2[k]] {
            if !v.basis().compatible(basis, v.truncation().min(n)) {
                return Err(Error::BasisMismatch(format!(
                    "perturbation term {} is expressed in a different basis",
                    k + 1
                )));
            }
        }
        let (b, c1, c2) = (p.b[k].to_normalized(), p.c1[k].to_normalized(), p.c2[k].to_normalized());
        for i in 0..n {
            bm[(n + i, k)] = b.coefficient(i);
            cm[(k, i)] = c1.coefficient(i) / basis.eigenvalue(i).sqrt();
            cm[(k, n + i)] = c2.coefficient(i);
        }
    }
    Ok((bm, cm))
}

/// `A_N + B_N C_N`.
pub fn assemble_perturbed(sys: &TruncatedSystem, p: &Perturbation) -> Result<TruncatedSystem> {
    let (b, c) = perturbation_matrices(sys, p)?;
    let mut out = sys.clone();
    if p.rank() > 0 {
        out.matrix += &b * &c;
    }
    out.perturbation_rank = p.rank();
    out.label = format!("{} + BC", sys.label);
    Ok(out)
}

/// Eigenvalue summary of a truncated generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub max_real: f64,
    /// `-max_real`.
    pub margin: f64,
    pub tolerance: f64,
    pub least_damped: (f64, f64),
    pub eigenvalue_count: usize,
    pub pass: bool,
}

/// Passes iff every eigenvalue has `Re lambda < -SPECTRUM_RTOL ||A||`.
pub fn spectrum_check(sys: &TruncatedSystem) -> Result<SpectrumReport> {
    let ev = eigenvalues(&sys.matrix)?;
    let worst = ev
        .iter()
        .copied()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .unwrap_or(Complex64::new(f64::NEG_INFINITY, 0.0));
    let tolerance = SPECTRUM_RTOL * spectral_norm(&sys.matrix);
    Ok(SpectrumReport {
        max_real: worst.re,
        margin: -worst.re,
        tolerance,
        least_damped: (worst.re, worst.im.abs()),
        eigenvalue_count: ev.len(),
        pass: worst.re < -tolerance,
    })
}

/// Resolvent norms along the imaginary axis with a fitted growth exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventProfile {
    pub power: usize,
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// True for points added at spectral frequencies `|Im lambda|`.
    pub spectral: Vec<bool>,
    /// Local maxima of the sampled profile, `(s, value)`.
    pub peaks: Vec<(f64, f64)>,
    /// Log-log fit over the upper half (in `s`) of the peaks.
    pub fit: Option<LinearFit>,
    /// `slope -+ 2 standard errors`.
    pub fit_band: Option<(f64, f64)>,
}

impl ResolventProfile {
    pub fn max(&self) -> (f64, f64) {
        self.s
            .iter()
            .zip(&self.values)
            .map(|(s, v)| (*s, *v))
            .fold((f64::NAN, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,norm,spectral\n");
        for ((s, v), sp) in self.s.iter().zip(&self.values).zip(&self.spectral) {
            let _ = writeln!(out, "{s},{v},{}", u8::from(*sp));
        }
        out
    }

    /// Largest `value / (c (1 + |s|^alpha))` over the profile; the envelope
    /// bound holds pointwise iff this is at most 1.
    pub fn envelope_ratio(&self, c: f64, alpha: f64) -> f64 {
        self.s
            .iter()
            .zip(&self.values)
            .map(|(s, v)| v / (c * (1.0 + s.abs().powf(alpha))))
            .fold(0.0, f64::max)
    }
}

/// `||R(is, A_N) A_N^{-n}||` on `s_grid` plus the spectral frequencies in
/// its range, with the growth exponent fitted on the resonance peaks.
pub fn resolvent_sweep(sys: &TruncatedSystem, s_grid: &[f64], n: usize) -> Result<ResolventProfile> {
    if s_grid.is_empty() || s_grid.iter().any(|s| !s.is_finite()) {
        return Err(invalid("frequency grid must be nonempty and finite"));
    }
    let grid = refine_with_spectrum(&sys.matrix, s_grid)?;
    let mut base: Vec<f64> = s_grid.to_vec();
    base.sort_by(f64::total_cmp);
    let spectral: Vec<bool> = grid
        .iter()
        .map(|s| base.binary_search_by(|b| b.total_cmp(s)).is_err())
        .collect();
    let engine = ResolventEngine::new(&sys.matrix, n)?;
    let values: Vec<f64> = engine.sweep(&grid)?.into_iter().map(|p| p.norm).collect();
    let peaks = local_maxima(&grid, &values);
    let (fit, fit_band) = fit_peaks(&peaks)?;
    Ok(ResolventProfile {
        power: n,
        s: grid,
        values,
        spectral,
        peaks,
        fit,
        fit_band,
    })
}

fn local_maxima(s: &[f64], v: &[f64]) -> Vec<(f64, f64)> {
    let k = v.len();
    (0..k)
        .filter(|&i| {
            let left = i == 0 || v[i] >= v[i - 1];
            let right = i + 1 == k || v[i] >= v[i + 1];
            left && right && i > 0 && i + 1 < k
        })
        .map(|i| (s[i], v[i]))
        .collect()
}

fn fit_peaks(peaks: &[(f64, f64)]) -> Result<(Option<LinearFit>, Option<(f64, f64)>)> {
    let positive: Vec<(f64, f64)> = peaks.iter().copied().filter(|p| p.0 > 0.0).collect();
    if positive.len() < 4 {
        return Ok((None, None));
    }
    let upper = &positive[positive.len() / 2..];
    let (x, y): (Vec<f64>, Vec<f64>) = upper.iter().copied().unzip();
    let fit = loglog_fit(&x, &y)?;
    let band = (fit.slope - 2.0 * fit.slope_stderr, fit.slope + 2.0 * fit.slope_stderr);
    Ok((Some(fit), Some(band)))
}

/// Energy trace of a simulated trajectory and of the worst-case envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub times: Vec<f64>,
    /// `||T(t) u_0||²` for `u_0 = A^{-s} v`, `v` a seeded random unit vector.
    pub energy: Vec<f64>,
    /// `||T(t) A^{-s}||²`, the supremum of the energy over unit `v`.
    pub envelope: Vec<f64>,
    pub smoothness: usize,
    pub seed: u64,
    pub step: f64,
    pub t_max: f64,
    pub initial_energy: f64,
    /// Fit of the envelope over `[t_max/100, t_max]`.
    pub fit: Option<LinearFit>,
    /// Fit of the random-trajectory energy over the same window.
    pub fit_random: Option<LinearFit>,
    /// Relative change of the final envelope value when the step is halved.
    pub step_halving_change: f64,
    /// Largest relative increase between consecutive checkpoints.
    pub max_energy_increase: f64,
}

impl DecayTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,energy,envelope\n");
        for ((t, e), w) in self.times.iter().zip(&self.energy).zip(&self.envelope) {
            let _ = writeln!(out, "{t},{e},{w}");
        }
        out
    }
}

/// Interleaved geometric series of checkpoint times per octave.
const DECAY_SERIES: usize = 4;
/// Octaves between the first checkpoint and `t_max`.
const DECAY_OCTAVES: i32 = 7;

/// Simulates `u' = A u` with the trapezoidal rule.
///
/// Checkpoints lie on `DECAY_SERIES` interleaved geometric sequences with
/// ratio 2 that end at or below `t_max`; on each, `T(t_0)` is the one-step
/// matrix raised to a power of two by repeated squaring and later
/// checkpoints follow from `T(2t) = T(t)²`. The base step is about
/// `t_max / steps`. The final envelope value is recomputed with half the
/// step; a relative change above `STEP_HALVING_RTOL` is an integrator error.
pub fn simulate_decay(sys: &TruncatedSystem, smoothness: usize, t_max: f64, steps: usize, seed: u64) -> Result<DecayTrace> {
    if smoothness == 0 {
        return Err(invalid("smoothness must be >= 1"));
    }
    if !(t_max.is_finite() && t_max > 0.0) || steps == 0 {
        return Err(invalid("t_max must be > 0 and steps >= 1"));
    }
    let dim = sys.dim();
    let a = &sys.matrix;
    let ainv = a.clone().try_inverse().ok_or(Error::Singular { s: 0.0 })?;
    let mut ainv_s = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..smoothness {
        ainv_s = &ainv * ainv_s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    let u0 = &ainv_s * &v;
    let h_target = t_max / steps as f64;
    let t_first = t_max / 2f64.powi(DECAY_OCTAVES);

    let mut samples: Vec<(f64, f64, f64)> = Vec::new();
    let mut final_check: Option<(f64, f64)> = None;
    for j in 0..DECAY_SERIES {
        let t0 = t_first * 2f64.powf(-(j as f64) / DECAY_SERIES as f64);
        let p = (t0 / h_target).log2().round().max(0.0) as u32;
        let series = propagate_series(a, &ainv_s, &u0, t0, p, t_max)?;
        if j == 0 {
            // the j = 0 series ends exactly at t_max
            let halved = propagate_series(a, &ainv_s, &u0, t0, p + 1, t_max)?;
            let (fine, coarse) = (halved.last().map(|x| x.2), series.last().map(|x| x.2));
            if let (Some(f), Some(c)) = (fine, coarse) {
                final_check = Some((c, f));
            }
        }
        samples.extend(series);
    }
    samples.sort_by(|x, y| x.0.total_cmp(&y.0));
    let step = t_first / 2f64.powi((t_first / h_target).log2().round().max(0.0) as i32);

    let step_halving_change = match final_check {
        Some((c, f)) if f > 0.0 => (c - f).abs() / f,
        Some((c, f)) if c == f => 0.0,
        _ => f64::INFINITY,
    };
    if !(step_halving_change < STEP_HALVING_RTOL) {
        return Err(Error::Integrator(format!(
            "final energy changed by {:.3e} (relative) when the step was halved",
            step_halving_change
        )));
    }
    let initial_energy = u0.norm_squared();
    let mut times = vec![0.0];
    let mut energy = vec![initial_energy];
    let mut envelope = vec![spectral_norm(&ainv_s).powi(2)];
    for (t, e, w) in samples {
        times.push(t);
        energy.push(e);
        envelope.push(w);
    }
    let max_energy_increase = energy
        .windows(2)
        .chain(envelope.windows(2))
        .map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    let window = |series: &[f64]| -> Option<LinearFit> {
        let (x, y): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(series)
            .filter(|(t, e)| **t >= t_max / 100.0 && **e > 0.0)
            .map(|(t, e)| (*t, *e))
            .unzip();
        loglog_fit(&x, &y).ok()
    };
    Ok(DecayTrace {
        fit: window(&envelope),
        fit_random: window(&energy),
        times,
        energy,
        envelope,
        smoothness,
        seed,
        step,
        t_max,
        initial_energy,
        step_halving_change,
        max_energy_increase,
    })
}

/// `(t, ||T(t) u0||², ||T(t) A^{-s}||²)` for `t = t0 2^k <= t_max (1 + 1e-12)`,
/// with `T(t0) = P^{2^p}`, `P` the trapezoidal step for `h = t0 / 2^p`.
fn propagate_series(
    a: &DMatrix<f64>,
    ainv_s: &DMatrix<f64>,
    u0: &DVector<f64>,
    t0: f64,
    p: u32,
    t_max: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let h = t0 / 2f64.powi(p as i32);
    let mut t_op = cayley_step(a, h)?;
    for _ in 0..p {
        t_op = &t_op * &t_op;
    }
    let mut out = Vec::new();
    let mut t = t0;
    while t <= t_max * (1.0 + 1e-12) {
        if t_op.iter().any(|x| !x.is_finite()) {
            return Err(Error::Integrator(format!("non-finite propagator at t = {t}")));
        }
        let e = (&t_op * u0).norm_squared();
        let w = spectral_norm(&(&t_op * ainv_s)).powi(2);
        out.push((t, e, w));
        t_op = &t_op * &t_op;
        t *= 2.0;
    }
    Ok(out)
}

/// Uniform grid `lo, lo + step, ..., <= hi`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}
