//! Frequency windows, the resolvent constants `M_R`, `M_0`, `M_C`, and the
//! perturbation budget `kappa_max = 1/sqrt(2 M_C)`.
//!
//! The chain is
//!
//! * windows `eta(s)`, `delta(s)` with caps `eta0`, `delta0`;
//! * `M_R` from the caps and `||D||`;
//! * `M_0` with `eta(s)^{-2} delta(s)^{-2} <= M_0 (1 + |s|^alpha)`;
//! * `M_C`, the larger of two regime bounds split at `s0`, on
//!   `sup_s ||R(is, A) A^{-n_alpha}||`;
//! * `kappa_max = 1/sqrt(2 M_C)`, a strict bound.
//!
//! Only the closed-form Webster windows (`a = 2`, `d = 1 - x`) are fully
//! certified. Gap-based windows extrapolate beyond the truncation and are
//! labeled non-certified.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI, SQRT_2};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{eigenvalues, ResolventEngine};
use crate::spectral_model::{
    inv_sqrt_norm, webster_linear_damping_coefficient, Family, ModalBasis, ModalVector,
};

/// Default split point of the two `M_C` regimes.
pub const DEFAULT_S0: f64 = 2.8;

/// Upper end of the `s0` search interval.
pub const S0_MAX: f64 = 100.0;

/// Number of points of the `M_0` verification grid.
pub const M0_GRID_POINTS: usize = 10_000;

/// How a set of windows was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// Closed-form windows of the Webster model with `a = 2`, `d = 1 - x`.
    WebsterExact,
    /// Built from modal damping coefficients and eigenvalue gaps.
    GapBased,
    /// Constant `eta`, `delta` supplied by the caller.
    UserSupplied,
}

/// `eta(s)` and `delta(s)` with their caps. Both functions are even in `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyWindows {
    pub kind: WindowKind,
    pub delta0: f64,
    pub eta0: f64,
    /// Envelope constant: `eta(s) = c / (|s| + delta0)` where no modal level
    /// applies.
    pub c: f64,
    /// Ascending `sqrt(mu_n)` covered by modal levels (gap-based only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frequencies: Vec<f64>,
    /// Window level for each entry of `frequencies`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<f64>,
    /// Beyond this `|s|` the windows are extrapolated (gap-based only).
    pub certified_up_to: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl FrequencyWindows {
    /// Constant windows `eta = eta_c`, `delta = delta_c`.
    pub fn constant(eta: f64, delta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0 && delta.is_finite() && delta > 0.0) {
            return Err(invalid(format!("window values must be > 0, got eta={eta}, delta={delta}")));
        }
        Ok(FrequencyWindows {
            kind: WindowKind::UserSupplied,
            delta0: delta,
            eta0: eta,
            c: 0.0,
            frequencies: Vec::new(),
            levels: Vec::new(),
            certified_up_to: f64::INFINITY,
            notes: Vec::new(),
        })
    }

    pub fn delta(&self, _s: f64) -> f64 {
        self.delta0
    }

    pub fn eta(&self, s: f64) -> f64 {
        let s = s.abs();
        match self.kind {
            WindowKind::UserSupplied => self.eta0,
            WindowKind::WebsterExact => self.c / (s + self.delta0),
            WindowKind::GapBased => {
                if s <= self.certified_up_to {
                    if let Some(level) = self.level_at(s) {
                        return level;
                    }
                }
                self.c / (s + self.delta0)
            }
        }
    }

    /// Modal level of the window containing `s >= 0`, if any.
    fn level_at(&self, s: f64) -> Option<f64> {
        let i = self.frequencies.partition_point(|&f| f < s);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.frequencies.len())
            .find(|&j| (s - self.frequencies[j]).abs() < self.delta0)
            .map(|j| self.levels[j])
    }

    /// True where the window values are backed by the construction rather
    /// than by extrapolation.
    pub fn is_certified_at(&self, s: f64) -> bool {
        s.abs() <= self.certified_up_to
    }

    /// Points where `eta` may jump (window edges), for grid checks.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.frequencies.len() + 1);
        for &f in &self.frequencies {
            out.push((f - self.delta0).max(0.0));
            out.push(f + self.delta0);
        }
        if self.certified_up_to.is_finite() {
            out.push(self.certified_up_to);
        }
        out
    }
}

/// `F(n)` of the reference Webster window computation.
pub fn webster_reference_f(n: usize) -> f64 {
    let nf = n as f64;
    let mu = 1.0 + PI * PI * nf * nf;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    PI * nf / mu.sqrt() * (1.0 - 2.0 * (E * sign - 1.0) / (mu * mu))
}

/// `G(n) <= F(n)` for `n >= 2`: the odd/even sign replaced by its worst case.
pub fn webster_reference_g(n: usize) -> f64 {
    let nf = n as f64;
    let mu = 1.0 + PI * PI * nf * nf;
    PI * nf / mu.sqrt() * (1.0 - 2.0 * (E - 1.0) / (mu * mu))
}

/// `delta0 = pi² / (a + 3 pi)`.
pub fn webster_delta0(a: f64) -> f64 {
    PI * PI / (a + 3.0 * PI)
}

/// `c = min{F(1), G(2)} = 2 pi / sqrt(1 + 4 pi²) (1 - 2 (e - 1)/(1 + 4 pi²)²)`.
pub fn webster_window_constant() -> f64 {
    let mu2 = 1.0 + 4.0 * PI * PI;
    2.0 * PI / mu2.sqrt() * (1.0 - 2.0 * (E - 1.0) / (mu2 * mu2))
}

/// `sqrt(mu_n) |<phi_n, 1 - x>|` for the raw eigenfunctions at `a = 2`,
/// from the exact coefficient. This is the quantity the window constant `c`
/// must lower-bound.
pub fn webster_exact_window_product(n: usize) -> f64 {
    let nf = n as f64;
    let mu = 1.0 + PI * PI * nf * nf;
    mu.sqrt() * webster_linear_damping_coefficient(2.0, n).abs()
}

/// Largest `c` valid for every mode, from the exact coefficients:
/// `min{F*(1), G*(2)}` with `F*(n) = pi n/sqrt(mu_n) (1 - 2(e(-1)^n - 1)/mu_n)`
/// and `G*(n) = pi n/sqrt(mu_n) (1 - 2(e - 1)/mu_n)`, which is increasing.
pub fn webster_exact_window_constant() -> f64 {
    let g2 = {
        let mu = 1.0 + 4.0 * PI * PI;
        2.0 * PI / mu.sqrt() * (1.0 - 2.0 * (E - 1.0) / mu)
    };
    webster_exact_window_product(1).min(g2)
}

/// `||d||_{L²_a}` for `d = 1 - x`, `a = 2`: `sqrt(e² - 5)/2`.
pub fn webster_damping_norm() -> f64 {
    (E * E - 5.0).sqrt() / 2.0
}

/// Closed-form windows for the Webster model with `a = 2`, `d = 1 - x`:
/// `delta = pi²/(2 + 3 pi)`, `eta(s) = c/(|s| + delta0)`, `eta0 = c/delta0`.
pub fn webster_windows(a: f64) -> Result<FrequencyWindows> {
    if a != 2.0 {
        return Err(invalid(format!(
            "closed-form Webster windows exist only for a = 2 (got {a}); use gap-based windows"
        )));
    }
    Ok(webster_windows_with_constant(webster_window_constant()))
}

/// Webster windows with the envelope constant computed from the exact
/// modal coefficients.
pub fn webster_windows_exact_coefficients() -> FrequencyWindows {
    let mut w = webster_windows_with_constant(webster_exact_window_constant());
    w.notes.push(
        "envelope constant from the exact coefficients |<phi_n, 1-x>| (min over n, attained at n = 2)"
            .into(),
    );
    w
}

fn webster_windows_with_constant(c: f64) -> FrequencyWindows {
    let delta0 = webster_delta0(2.0);
    FrequencyWindows {
        kind: WindowKind::WebsterExact,
        delta0,
        eta0: c / delta0,
        c,
        frequencies: Vec::new(),
        levels: Vec::new(),
        certified_up_to: f64::INFINITY,
        notes: Vec::new(),
    }
}

/// Checks that consecutive frequencies `sign(n) sqrt(mu_n)` of a Webster
/// basis are at least `3 pi²/(a + 3 pi)` apart, as the closed-form windows
/// require.
pub fn check_webster_gap_premise(basis: &ModalBasis) -> Result<()> {
    let a = match basis.family() {
        Family::Webster { a } => a,
        other => {
            return Err(Error::PremiseViolated(format!(
                "Webster windows need a Webster basis, got {}",
                other.name()
            )))
        }
    };
    let need = 3.0 * webster_delta0(a);
    let gap = min_frequency_gap(basis.eigenvalues());
    if gap < need {
        return Err(Error::PremiseViolated(format!(
            "minimum frequency gap {gap} below {need}"
        )));
    }
    Ok(())
}

/// Smallest distance between the points `sign(n) sqrt(mu_n)`, including the
/// pair `+-sqrt(mu_1)` across zero.
pub fn min_frequency_gap(mu: &[f64]) -> f64 {
    let roots: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let across = 2.0 * roots[0];
    roots
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(across, f64::min)
}

/// Where the window premise `|<phi_n, d>| >= eta(s)` (on raw Webster
/// eigenfunctions, with `s` in the window of `sqrt(mu_n)`) fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAudit {
    pub modes_checked: usize,
    /// `(n, coefficient level, worst eta on the window)`, 1-based `n`.
    pub violations: Vec<(usize, f64, f64)>,
}

impl WindowAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits windows against modal damping levels `|<d, phi_n>|/sqrt 2`
/// (normalized `phi_n`) for the modes of `damping`.
pub fn audit_windows(windows: &FrequencyWindows, damping: &ModalVector) -> WindowAudit {
    let d = damping.to_normalized();
    let mu = d.basis().eigenvalues();
    let mut violations = Vec::new();
    for (i, &g) in d.coefficients().iter().enumerate() {
        let f = mu[i].sqrt();
        let level = g.abs() / SQRT_2;
        // eta is largest at the left edge of the window
        let lo = (f - windows.delta(f)).max(0.0);
        let probes = [lo + 1e-12 * f.max(1.0), f];
        let worst = probes.iter().map(|&s| windows.eta(s)).fold(0.0, f64::max);
        if level < worst {
            violations.push((i + 1, level, worst));
        }
    }
    WindowAudit {
        modes_checked: d.truncation(),
        violations,
    }
}

/// Windows from eigenvalue gaps and modal damping coefficients.
///
/// `delta0` is half the smallest gap between the points `sign(n) sqrt(mu_n)`
/// so that every window contains at most one of them. On the window of
/// `sqrt(mu_n)` the level is `|<d, phi_n>|/sqrt 2` (normalized `phi_n`).
/// Elsewhere, and beyond the truncation, `eta(s) = c'/(|s| + delta0)` with
/// `c' = min_n level_n sqrt(mu_n)`; this envelope lies below every level on
/// its own window, and is an extrapolation past the last mode.
pub fn gap_windows(basis: &ModalBasis, damping: &ModalVector) -> Result<FrequencyWindows> {
    gap_windows_capped(basis, damping, None)
}

/// [`gap_windows`] with `delta0` additionally capped at `delta_cap`.
pub fn gap_windows_capped(
    basis: &ModalBasis,
    damping: &ModalVector,
    delta_cap: Option<f64>,
) -> Result<FrequencyWindows> {
    let d = damping.to_normalized();
    let n = d.truncation();
    if n == 0 {
        return Err(Error::PremiseViolated("damping has no modal coefficients".into()));
    }
    if !d.basis().compatible(basis, n) {
        return Err(Error::BasisMismatch("damping vector and basis disagree".into()));
    }
    if let Some(i) = d.coefficients().iter().position(|&g| g == 0.0) {
        return Err(Error::PremiseViolated(format!(
            "damping coefficient of mode {} vanishes; no window level exists",
            i + 1
        )));
    }
    let mu = &basis.eigenvalues()[..n];
    let mut delta0 = 0.5 * min_frequency_gap(mu);
    if delta0 <= 0.0 {
        return Err(Error::PremiseViolated(
            "repeated eigenvalues: windows cannot separate the frequencies".into(),
        ));
    }
    let mut notes = Vec::new();
    if let Some(cap) = delta_cap {
        if !(cap > 0.0) {
            return Err(invalid("delta cap must be > 0"));
        }
        if cap < delta0 {
            delta0 = cap;
            notes.push(format!("delta0 capped at {cap}"));
        }
    }
    let frequencies: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let levels: Vec<f64> = d.coefficients().iter().map(|g| g.abs() / SQRT_2).collect();
    let c = levels
        .iter()
        .zip(&frequencies)
        .map(|(l, f)| l * f)
        .fold(f64::INFINITY, f64::min);
    let max_level = levels.iter().copied().fold(0.0, f64::max);
    let eta0 = max_level.max(c / delta0);
    let certified_up_to = frequencies[n - 1] + delta0;
    notes.push(format!(
        "eta(s) for |s| > {certified_up_to} extrapolated as c'/(|s|+delta0): NON-CERTIFIED"
    ));
    if damping.convention() == crate::spectral_model::Convention::Raw {
        notes.push(
            "damping given against raw eigenfunctions; levels computed after normalization \
             (the rule applied to raw coefficients would be smaller by 1/sqrt 2)"
                .into(),
        );
    }
    Ok(FrequencyWindows {
        kind: WindowKind::GapBased,
        delta0,
        eta0,
        c,
        frequencies,
        levels,
        certified_up_to,
        notes,
    })
}

/// `M_R = 2 sqrt(eta0⁴ delta0² + 2 eta0² delta0² |D|² + (delta0² + eta0² |D|² + 2 |D|⁴)²)`.
pub fn mr_constant(eta0: f64, delta0: f64, norm_d: f64) -> f64 {
    let (e2, d2, n2) = (eta0 * eta0, delta0 * delta0, norm_d * norm_d);
    let inner = d2 + e2 * n2 + 2.0 * n2 * n2;
    2.0 * (e2 * e2 * d2 + 2.0 * e2 * d2 * n2 + inner * inner).sqrt()
}

/// `M_0` together with the evidence behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M0Value {
    /// The constant used downstream: the analytic value when one exists,
    /// the grid supremum otherwise.
    pub value: f64,
    /// `sup eta^{-2} delta^{-2} / (1 + s^alpha)` over the verification grid.
    pub grid_sup: f64,
    pub analytic: Option<f64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    Ok(())
}

/// Smallest `M_0` with `eta(s)^{-2} delta(s)^{-2} <= M_0 (1 + |s|^alpha)`.
pub fn m0_constant(windows: &FrequencyWindows, alpha: f64) -> Result<M0Value> {
    check_alpha(alpha)?;
    let ratio = |s: f64| {
        let (e, d) = (windows.eta(s), windows.delta(s));
        1.0 / (e * e * d * d * (1.0 + s.abs().powf(alpha)))
    };
    let envelope_tail = windows.kind != WindowKind::UserSupplied;
    if envelope_tail && alpha < 2.0 {
        // eta ~ 1/s makes the left side grow like s², faster than s^alpha
        return Err(Error::PremiseViolated(format!(
            "windows decay like 1/s; no finite M_0 exists for alpha = {alpha} < 2"
        )));
    }
    let s_hi = if windows.certified_up_to.is_finite() {
        S0_MAX.max(2.0 * windows.certified_up_to)
    } else {
        S0_MAX
    };
    let mut grid: Vec<f64> = (0..M0_GRID_POINTS)
        .map(|i| s_hi * i as f64 / (M0_GRID_POINTS - 1) as f64)
        .collect();
    for b in windows.breakpoints() {
        for t in [b * (1.0 - 1e-12), b, b * (1.0 + 1e-12)] {
            if t >= 0.0 && t <= s_hi {
                grid.push(t);
            }
        }
    }
    let mut grid_sup = grid.par_iter().map(|&s| ratio(s)).reduce(|| 0.0, f64::max);
    if envelope_tail {
        // (s + delta0)²/(1 + s²) peaks at s = 1/delta0 and then decreases
        let c2d2 = windows.c * windows.c * windows.delta0 * windows.delta0;
        let tail = |s: f64| (s + windows.delta0).powi(2) / (c2d2 * (1.0 + s * s));
        grid_sup = grid_sup.max(tail(s_hi.max(1.0 / windows.delta0)));
    }
    let analytic = match windows.kind {
        WindowKind::WebsterExact => {
            Some(2.0 / (windows.c * windows.c * windows.delta0 * windows.delta0))
        }
        WindowKind::UserSupplied => {
            Some(1.0 / (windows.eta0 * windows.eta0 * windows.delta0 * windows.delta0))
        }
        WindowKind::GapBased => None,
    };
    Ok(M0Value {
        value: analytic.unwrap_or(grid_sup),
        grid_sup,
        analytic,
    })
}

/// The two regime bounds whose maximum is `M_C`.
pub fn mc_regimes(m_r: f64, m_0: f64, alpha: f64, norm_ainv: f64, s0: f64) -> (f64, f64) {
    let n = alpha.ceil() as i32;
    let poly = 1.0 + s0.powf(alpha);
    let first = m_r * m_0 * norm_ainv.powi(n) * poly;
    let tail: f64 = (1..=n).map(|k| norm_ainv.powi(k) / s0.powi(n + 1 - k)).sum();
    let second = m_r * m_0 * poly / s0.powi(n) + tail;
    (first, second)
}

/// `M_C = max` of the two regime bounds at `s0`.
pub fn mc_constant(m_r: f64, m_0: f64, alpha: f64, norm_ainv: f64, s0: f64) -> f64 {
    let (a, b) = mc_regimes(m_r, m_0, alpha, norm_ainv, s0);
    a.max(b)
}

/// `kappa_max = 1 / sqrt(2 M_C)`.
pub fn kappa_from_mc(m_c: f64) -> f64 {
    1.0 / (2.0 * m_c).sqrt()
}

/// Minimizes `M_C` over `s0 in (0, 100]`: golden-section search on each of
/// 16 log-spaced brackets, best result kept.
pub fn optimize_s0(m_r: f64, m_0: f64, alpha: f64, norm_ainv: f64) -> (f64, f64) {
    let f = |s: f64| mc_constant(m_r, m_0, alpha, norm_ainv, s);
    let lo = 1e-3f64;
    let edges: Vec<f64> = (0..=16)
        .map(|i| lo * (S0_MAX / lo).powf(i as f64 / 16.0))
        .collect();
    let mut best = (DEFAULT_S0, f(DEFAULT_S0));
    for w in edges.windows(2) {
        let (s, v) = golden_section(&f, w[0], w[1], 1e-12);
        for (s, v) in [(s, v), (w[0], f(w[0])), (w[1], f(w[1]))] {
            if v < best.1 {
                best = (s, v);
            }
        }
    }
    best
}

/// Golden-section minimization on `[a, b]` to relative width `tol`.
pub fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while (b - a) > tol * (a.abs() + b.abs()).max(1e-300) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `(1 + ||d||² mu_1^{-1/2}) mu_1^{-1/2}`, with `||d||` the Euclidean norm
/// of the normalized modal coefficients.
pub fn norm_ainv_bound(basis: &ModalBasis, damping: &ModalVector) -> f64 {
    norm_ainv_bound_from_norm(basis, damping.to_normalized().euclidean_norm())
}

/// `(1 + ||d||² mu_1^{-1/2}) mu_1^{-1/2}` for a given `||d||`.
pub fn norm_ainv_bound_from_norm(basis: &ModalBasis, norm_d: f64) -> f64 {
    let r = inv_sqrt_norm(basis);
    (1.0 + norm_d * norm_d * r) * r
}

/// Every constant of the budget computation with its origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaCertificate {
    pub m_r: f64,
    pub m_0: f64,
    pub m_0_grid_sup: f64,
    pub s0: f64,
    pub m_c: f64,
    pub regime_low: f64,
    pub regime_high: f64,
    pub kappa_max: f64,
    pub alpha: f64,
    pub n_alpha: u32,
    pub norm_d: f64,
    pub norm_ainv_bound: f64,
    pub eta0: f64,
    pub delta0: f64,
    pub window_c: f64,
    pub window_kind: WindowKind,
    pub certified: bool,
    pub s0_optimized: bool,
    pub provenance: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// How to pick `s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum S0Choice {
    Fixed(f64),
    Optimize,
}

impl KappaCertificate {
    pub fn build(
        windows: &FrequencyWindows,
        alpha: f64,
        norm_d: f64,
        norm_ainv: f64,
        s0: S0Choice,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if !(norm_d.is_finite() && norm_d >= 0.0) {
            return Err(invalid(format!("||D|| must be >= 0, got {norm_d}")));
        }
        if !(norm_ainv.is_finite() && norm_ainv > 0.0) {
            return Err(invalid(format!("||A^-1|| bound must be > 0, got {norm_ainv}")));
        }
        let m_r = mr_constant(windows.eta0, windows.delta0, norm_d);
        let m0 = m0_constant(windows, alpha)?;
        let (s0, optimized) = match s0 {
            S0Choice::Fixed(s) if s > 0.0 && s.is_finite() => (s, false),
            S0Choice::Fixed(s) => return Err(invalid(format!("s0 must be > 0, got {s}"))),
            S0Choice::Optimize => (optimize_s0(m_r, m0.value, alpha, norm_ainv).0, true),
        };
        let (regime_low, regime_high) = mc_regimes(m_r, m0.value, alpha, norm_ainv, s0);
        let m_c = regime_low.max(regime_high);
        let kappa_max = kappa_from_mc(m_c);
        let mut provenance = BTreeMap::new();
        let mut put = |k: &str, v: &str| {
            provenance.insert(k.to_string(), v.to_string());
        };
        match windows.kind {
            WindowKind::WebsterExact => {
                put("delta0", "pi^2/(a+3pi), a=2");
                put("window_c", "closed-form envelope constant of the Webster windows");
                put("eta0", "c/delta0");
                put("m_0", "analytic 2/(c^2 delta0^2); grid sup recorded as check");
            }
            WindowKind::GapBased => {
                put("delta0", "half the minimum gap of sign(n)sqrt(mu_n)");
                put("window_c", "min_n |<d,phi_n>|/sqrt2 * sqrt(mu_n)");
                put("eta0", "max(max level, c'/delta0)");
                put("m_0", "grid sup of eta^-2 delta^-2/(1+s^alpha) incl. window edges and tail");
            }
            WindowKind::UserSupplied => {
                put("delta0", "user supplied");
                put("eta0", "user supplied");
                put("m_0", "1/(eta0^2 delta0^2)");
            }
        }
        put("norm_d", "input");
        put("norm_ainv_bound", "input");
        put(
            "m_r",
            "2 sqrt(eta0^4 delta0^2 + 2 eta0^2 delta0^2 |D|^2 + (delta0^2 + eta0^2 |D|^2 + 2|D|^4)^2)",
        );
        put("regime_low", "M_R M_0 |A^-1|^n (1+s0^alpha)");
        put(
            "regime_high",
            "M_R M_0 (1+s0^alpha)/s0^n + sum_{k=1..n} |A^-1|^k / s0^(n+1-k)",
        );
        put("m_c", "max(regime_low, regime_high)");
        put("kappa_max", "1/sqrt(2 M_C), strict");
        put(
            "s0",
            if optimized {
                "golden-section minimum of M_C over (0, 100]"
            } else {
                "fixed"
            },
        );
        let mut notes = windows.notes.clone();
        let certified = windows.kind != WindowKind::GapBased;
        if !certified {
            notes.push("certificate relies on extrapolated windows: NON-CERTIFIED".into());
        }
        Ok(KappaCertificate {
            m_r,
            m_0: m0.value,
            m_0_grid_sup: m0.grid_sup,
            s0,
            m_c,
            regime_low,
            regime_high,
            kappa_max,
            alpha,
            n_alpha: alpha.ceil() as u32,
            norm_d,
            norm_ainv_bound: norm_ainv,
            eta0: windows.eta0,
            delta0: windows.delta0,
            window_c: windows.c,
            window_kind: windows.kind,
            certified,
            s0_optimized: optimized,
            provenance,
            notes,
        })
    }

    /// Recomputes `M_C` from the stored inputs.
    pub fn recompute_mc(&self) -> f64 {
        mc_constant(self.m_r, self.m_0, self.alpha, self.norm_ainv_bound, self.s0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// The Webster certificate for `a = 2`, `d = 1 - x`, `alpha = 2`.
pub fn webster_certificate(s0: S0Choice) -> Result<KappaCertificate> {
    let w = webster_windows(2.0)?;
    webster_certificate_with(&w, s0)
}

/// Webster certificate for given windows (closed-form damping norm and
/// `||A^{-1}||` bound).
pub fn webster_certificate_with(windows: &FrequencyWindows, s0: S0Choice) -> Result<KappaCertificate> {
    let basis = crate::spectral_model::webster_basis(2.0, 1)?;
    let norm_d = webster_damping_norm();
    let ainv = norm_ainv_bound_from_norm(&basis, norm_d);
    KappaCertificate::build(windows, 2.0, norm_d, ainv, s0)
}

/// `M = 1 + ||d||² (1 + pi²)^{-1/2}` for the Webster model, `a = 2`, `d = 1 - x`.
pub fn webster_m() -> f64 {
    1.0 + (E * E - 5.0) / (4.0 * (1.0 + PI * PI).sqrt())
}

/// Numerical (non-certified) budget `1/sqrt(2 sup ||R(is, A_N) A_N^{-n}||)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub kappa: f64,
    pub sup_norm: f64,
    pub argmax_s: f64,
    pub power: usize,
    pub grid_points: usize,
    pub certified: bool,
}

/// Estimates the budget on a truncated generator. The spectral frequencies
/// `|Im lambda|` inside the grid range are added to the grid, since the
/// supremum sits on the resonance peaks.
pub fn estimate_kappa_numeric(a_n: &DMatrix<f64>, n: usize, s_grid: &[f64]) -> Result<KappaEstimate> {
    if !(1..=2).contains(&n) {
        return Err(invalid(format!("power n must be 1 or 2, got {n}")));
    }
    if s_grid.is_empty() || s_grid.iter().any(|s| !s.is_finite()) {
        return Err(invalid("frequency grid must be nonempty and finite"));
    }
    let grid = refine_with_spectrum(a_n, s_grid)?;
    let engine = ResolventEngine::new(a_n, n)?;
    let points = engine.sweep(&grid)?;
    let (argmax_s, sup_norm) = points
        .iter()
        .map(|p| (p.s, p.norm))
        .fold((grid[0], 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(KappaEstimate {
        kappa: kappa_from_mc(sup_norm),
        sup_norm,
        argmax_s,
        power: n,
        grid_points: grid.len(),
        certified: false,
    })
}

/// `s_grid` merged with the spectral frequencies `|Im lambda|` of `a` that
/// fall inside its range, sorted and deduplicated.
pub fn refine_with_spectrum(a: &DMatrix<f64>, s_grid: &[f64]) -> Result<Vec<f64>> {
    let lo = s_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut grid = s_grid.to_vec();
    for ev in eigenvalues(a)? {
        let f = ev.im.abs();
        if f >= lo && f <= hi {
            grid.push(f);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// CSV of `(s, eta(s), delta(s))`.
pub fn windows_csv(windows: &FrequencyWindows, grid: &[f64]) -> String {
    let mut out = String::from("s,eta,delta\n");
    for &s in grid {
        let _ = writeln!(out, "{s},{},{}", windows.eta(s), windows.delta(s));
    }
    out
}
