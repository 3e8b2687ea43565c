//! One-dimensional wave equation coupled to a damped oscillator at `x = 1`
//! (an acoustic boundary condition).
//!
//! The state is `u = (u1, u2, u3, u4) = (w_x, w_t, a, a_t)` in
//! `L² x L² x C²` with `||u||² = ||u1||² + ||u2||² + k|u3|² + |u4|²` and
//! generator
//!
//! ```text
//! u1' = d/dx u2,  u2' = d/dx u1,  u3' = u4,  u4' = -u1(1) - k u3 - d u4,
//! ```
//!
//! subject to `u1(0) = 0` and `u2(1) = u4`. Perturbations are rank one:
//! `B = (0, b2, 0, 0)` and `C u = <u, (c1, c2, c3, c4)>_H`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kappa_bounds::{estimate_kappa_numeric, KappaEstimate};
use crate::perturbation_check::{CheckReport, Condition};
use crate::profile::Profile;
use crate::quadrature::{composite_interval, Rule};
use crate::truncation_verify::{uniform_grid, TruncatedSystem};

/// Smallest grid accepted by the discretization.
pub const MIN_GRID: usize = 16;

/// Quadrature nodes on (0, 1) for the perturbation norms.
const NORM_NODES: usize = 512;

/// Relative tolerance for the homogeneous boundary values of `b2`.
const TRACE_RTOL: f64 = 1e-12;

/// Frequency grid used by [`estimate_kappa_acoustic`].
pub const KAPPA_GRID_MAX: f64 = 40.0;
pub const KAPPA_GRID_STEP: f64 = 0.05;

/// Oscillator parameters of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticSystem {
    /// Spring constant.
    pub k: f64,
    /// Boundary damping.
    pub d: f64,
}

impl AcousticSystem {
    pub fn new(k: f64, d: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(invalid(format!("spring constant k must be > 0, got {k}")));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(invalid(format!("boundary damping d must be > 0, got {d}")));
        }
        Ok(AcousticSystem { k, d })
    }

    /// `||u1||² + ||u2||² + k|u3|² + |u4|²` with the function parts given as
    /// squared L² norms.
    pub fn norm_sq(&self, u1_sq: f64, u2_sq: f64, u3: Complex64, u4: Complex64) -> f64 {
        u1_sq + u2_sq + self.k * u3.norm_sqr() + u4.norm_sqr()
    }
}

/// Rank-one perturbation `b2 (<u1, c1> + <u2, c2> + k u3 conj(c3) + u4 conj(c4))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcousticPerturbation {
    pub b2: Profile,
    pub c1: Profile,
    pub c2: Profile,
    #[serde(default)]
    pub c3: Complex64,
    #[serde(default)]
    pub c4: Complex64,
}

impl AcousticPerturbation {
    pub fn zero() -> Self {
        AcousticPerturbation {
            b2: Profile::Zero,
            c1: Profile::Zero,
            c2: Profile::Zero,
            c3: Complex64::new(0.0, 0.0),
            c4: Complex64::new(0.0, 0.0),
        }
    }

    /// Scales the `B` side by `tb` and the `C` side by `tc`.
    pub fn scaled(&self, tb: f64, tc: f64) -> Self {
        AcousticPerturbation {
            b2: self.b2.scaled(tb),
            c1: self.c1.scaled(tc),
            c2: self.c2.scaled(tc),
            c3: self.c3 * tc,
            c4: self.c4 * tc,
        }
    }
}

fn norm_rule() -> Rule {
    composite_interval(0.0, 1.0, NORM_NODES)
}

/// `||f^(order)||_L²`.
fn l2_derivative(f: &Profile, order: u8, rule: &Rule) -> Result<f64> {
    let mut acc = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let v = f
            .derivative(p[0], order)
            .ok_or_else(|| Error::Regularity(format!("profile has no derivative of order {order}")))?;
        acc += w * v * v;
    }
    Ok(acc.sqrt())
}

/// `||f||²_{H1} = ||f||² + ||f'||²`.
fn h1_sq(f: &Profile, rule: &Rule) -> Result<f64> {
    Ok(l2_derivative(f, 0, rule)?.powi(2) + l2_derivative(f, 1, rule)?.powi(2))
}

fn require_smoothness(name: &str, f: &Profile, order: u8) -> Result<()> {
    if f.smoothness() < order {
        return Err(Error::Regularity(format!(
            "{name} must have {order} weak derivative(s) in L²"
        )));
    }
    Ok(())
}

fn require_vanishing_trace(name: &str, f: &Profile) -> Result<()> {
    let scale = 1.0 + f.sup_norm();
    for x in [0.0, 1.0] {
        let v = f.value(x);
        if v.abs() > TRACE_RTOL * scale {
            return Err(Error::Regularity(format!("{name} must vanish at x = {x}, got {v}")));
        }
    }
    Ok(())
}

fn validate_check(k: f64, kappa: f64) -> Result<()> {
    if !(k.is_finite() && k > 0.0) {
        return Err(invalid(format!("spring constant k must be > 0, got {k}")));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(invalid(format!("kappa must be > 0, got {kappa}")));
    }
    Ok(())
}

/// `||A* C*||² = ||c1'||² + ||c2'||² + |c1(1) + k c3|²` for `c4 = 0`.
pub fn adjoint_c_norm_sq(p: &AcousticPerturbation, k: f64) -> Result<f64> {
    let rule = norm_rule();
    let c1d = l2_derivative(&p.c1, 1, &rule)?;
    let c2d = l2_derivative(&p.c2, 1, &rule)?;
    let trace = p.c1.value(1.0) + k * p.c3;
    Ok(c1d * c1d + c2d * c2d + trace.norm_sqr())
}

/// `4 ||c1||²_{H1} + ||c2'||² + 3 k² |c3|²`, the upper bound on
/// [`adjoint_c_norm_sq`] used by the `beta = gamma = 1` check.
pub fn adjoint_c_bound_sq(p: &AcousticPerturbation, k: f64) -> Result<f64> {
    let rule = norm_rule();
    let c2d = l2_derivative(&p.c2, 1, &rule)?;
    Ok(4.0 * h1_sq(&p.c1, &rule)? + c2d * c2d + 3.0 * k * k * p.c3.norm_sqr())
}

/// Conditions for `beta = gamma = 1`: `||b2'|| < kappa` and
/// `4 ||c1||²_{H1} + ||c2'||² + 3k²|c3|² < kappa²`.
pub fn check_acoustic_bg11(p: &AcousticPerturbation, k: f64, kappa: f64) -> Result<CheckReport> {
    validate_check(k, kappa)?;
    if p.c4 != Complex64::new(0.0, 0.0) {
        return Err(invalid("c4 must be 0 for the beta = gamma = 1 conditions"));
    }
    require_smoothness("b2", &p.b2, 1)?;
    require_smoothness("c1", &p.c1, 1)?;
    require_smoothness("c2", &p.c2, 1)?;
    require_vanishing_trace("b2", &p.b2)?;
    let rule = norm_rule();
    let b_side = l2_derivative(&p.b2, 1, &rule)?;
    let c_bound = adjoint_c_bound_sq(p, k)?;
    let c_direct = adjoint_c_norm_sq(p, k)?;
    let conditions = vec![
        Condition::new("||b2'||_L2 < kappa", b_side, kappa),
        Condition::new(
            "4||c1||^2_H1 + ||c2'||^2_L2 + 3k^2|c3|^2 < kappa^2",
            c_bound,
            kappa * kappa,
        ),
    ];
    let mut r = CheckReport::new("acoustic_bg11", 2.0, 1.0, 1.0, 1.0, kappa, conditions);
    r.notes.push(format!(
        "direct ||A*C*||^2 = ||c1'||^2 + ||c2'||^2 + |c1(1) + k c3|^2 = {c_direct} (diagnostic)"
    ));
    Ok(r)
}

/// Conditions for `beta = 2`, `gamma = 0`: `||b2'||_{H1} < kappa` as
/// stated, `sqrt(3) ||b2'||_{H1} < kappa` from `||A²B||² <= 3 ||b2'||²_{H1}`,
/// and `||c1||² + ||c2||² + k|c3|² + |c4|² < kappa²`. The conservative
/// `b2` condition implies the stated one, so it decides the verdict.
pub fn check_acoustic_b2g0(p: &AcousticPerturbation, k: f64, kappa: f64) -> Result<CheckReport> {
    validate_check(k, kappa)?;
    require_smoothness("b2", &p.b2, 2)?;
    require_vanishing_trace("b2", &p.b2)?;
    let rule = norm_rule();
    let b1 = l2_derivative(&p.b2, 1, &rule)?;
    let b2 = l2_derivative(&p.b2, 2, &rule)?;
    let bh1 = (b1 * b1 + b2 * b2).sqrt();
    let c_side = l2_derivative(&p.c1, 0, &rule)?.powi(2)
        + l2_derivative(&p.c2, 0, &rule)?.powi(2)
        + k * p.c3.norm_sqr()
        + p.c4.norm_sqr();
    let a2b = (b2 * b2 + p.b2.derivative(1.0, 1).unwrap_or(0.0).powi(2)).sqrt();
    let conditions = vec![
        Condition::new("||b2'||_H1 < kappa", bh1, kappa),
        Condition::new("sqrt(3) ||b2'||_H1 < kappa", 3f64.sqrt() * bh1, kappa),
        Condition::new(
            "||c1||^2 + ||c2||^2 + k|c3|^2 + |c4|^2 < kappa^2",
            c_side,
            kappa * kappa,
        ),
    ];
    let mut r = CheckReport::new("acoustic_b2g0", 2.0, 2.0, 0.0, 1.0, kappa, conditions);
    r.notes.push(format!(
        "direct ||A^2 B|| = sqrt(||b2''||^2 + |b2'(1)|^2) = {a2b} (diagnostic)"
    ));
    r.notes.push("the sqrt(3) form bounds ||A^2 B|| and gates the verdict".into());
    Ok(r)
}

/// Staggered-grid realization of the generator.
///
/// `u1` lives on the nodes `x_i = i/N`, `i = 1..=N` (`u1(0) = 0`), `u2` on
/// the midpoints `x_{j-1/2}`, `j = 1..=N`. The boundary node carries half a
/// cell and closes with `u2(1) = u4`. With quadrature weights `h` (half at
/// `x_N`), `k` and `1`, the discrete energy satisfies
/// `d/dt ||u||² = -2 d |u4|²` exactly, so the matrix in energy coordinates
/// `W^{1/2} A W^{-1/2}` is skew-symmetric up to the rank-one damping.
#[derive(Debug, Clone)]
pub struct AcousticDiscretization {
    pub system: TruncatedSystem,
    pub grid: usize,
    pub k: f64,
    pub d: f64,
    /// `sqrt` of the energy weights, in state order.
    pub sqrt_weights: Vec<f64>,
}

impl AcousticDiscretization {
    pub fn dim(&self) -> usize {
        2 * self.grid + 2
    }

    /// Nodes of `u1` and midpoints of `u2`.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let h = 1.0 / self.grid as f64;
        let nodes = (1..=self.grid).map(|i| i as f64 * h).collect();
        let mids = (1..=self.grid).map(|j| (j as f64 - 0.5) * h).collect();
        (nodes, mids)
    }
}

/// `(2N + 2)`-dimensional generator in energy coordinates. `d = 0` is
/// accepted as the conservative control.
pub fn build_acoustic_discretization(n: usize, k: f64, d: f64) -> Result<AcousticDiscretization> {
    if n < MIN_GRID {
        return Err(invalid(format!("grid size must be >= {MIN_GRID}, got {n}")));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(invalid(format!("spring constant k must be > 0, got {k}")));
    }
    if !(d.is_finite() && d >= 0.0) {
        return Err(invalid(format!("boundary damping d must be >= 0, got {d}")));
    }
    let h = 1.0 / n as f64;
    let dim = 2 * n + 2;
    // state order: u1 nodes 0..n, u2 midpoints n..2n, u3, u4
    let (i3, i4) = (2 * n, 2 * n + 1);
    let u1 = |i: usize| i - 1;
    let u2 = |j: usize| n + j - 1;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for j in 1..=n {
        a[(u2(j), u1(j))] += 1.0 / h;
        if j > 1 {
            a[(u2(j), u1(j - 1))] -= 1.0 / h;
        }
    }
    for i in 1..n {
        a[(u1(i), u2(i + 1))] += 1.0 / h;
        a[(u1(i), u2(i))] -= 1.0 / h;
    }
    a[(u1(n), i4)] += 2.0 / h;
    a[(u1(n), u2(n))] -= 2.0 / h;
    a[(i3, i4)] = 1.0;
    a[(i4, u1(n))] = -1.0;
    a[(i4, i3)] = -k;

    let mut sqrt_weights = vec![h.sqrt(); dim];
    sqrt_weights[u1(n)] = (h / 2.0).sqrt();
    sqrt_weights[i3] = k.sqrt();
    sqrt_weights[i4] = 1.0;
    let mut skew = a.clone();
    for r in 0..dim {
        for c in 0..dim {
            skew[(r, c)] *= sqrt_weights[r] / sqrt_weights[c];
        }
    }
    // roundoff in the weight ratios; the exact operator is skew
    let skew = (&skew - skew.transpose()) * 0.5;
    let mut matrix = skew.clone();
    matrix[(i4, i4)] = -d;
    Ok(AcousticDiscretization {
        system: TruncatedSystem {
            matrix,
            skew,
            modes: n,
            basis: None,
            alpha: 2.0,
            label: format!("acoustic N={n} k={k} d={d}"),
            perturbation_rank: 0,
        },
        grid: n,
        k,
        d,
        sqrt_weights,
    })
}

/// `A + B C` for a perturbation with real scalars `c3`, `c4`; `B` samples
/// `b2` at the midpoints and `C` uses the discrete inner product.
pub fn assemble_acoustic_perturbed(disc: &AcousticDiscretization, p: &AcousticPerturbation) -> Result<TruncatedSystem> {
    if p.c3.im != 0.0 || p.c4.im != 0.0 {
        return Err(invalid("the discretized perturbation needs real c3 and c4"));
    }
    let n = disc.grid;
    let dim = disc.dim();
    let (nodes, mids) = disc.nodes();
    let w = &disc.sqrt_weights;
    let mut b = vec![0.0; dim];
    let mut c = vec![0.0; dim];
    for i in 0..n {
        // energy coordinates: B_e = W^{1/2} B and C_e = C W^{-1/2} = W^{1/2} c
        c[i] = w[i] * p.c1.value(nodes[i]);
        b[n + i] = w[n + i] * p.b2.value(mids[i]);
        c[n + i] = w[n + i] * p.c2.value(mids[i]);
    }
    c[2 * n] = w[2 * n] * p.c3.re;
    c[2 * n + 1] = p.c4.re;
    let mut out = disc.system.clone();
    for r in 0..dim {
        if b[r] != 0.0 {
            for (col, cv) in c.iter().enumerate() {
                out.matrix[(r, col)] += b[r] * cv;
            }
        }
    }
    out.perturbation_rank = 1;
    out.label = format!("{} + BC", disc.system.label);
    Ok(out)
}

/// Non-certified `kappa = 1/sqrt(2 sup_s ||R(is, A) A^{-n}||)` for the
/// discretized generator on `[0, KAPPA_GRID_MAX]`.
pub fn estimate_kappa_acoustic(n_grid: usize, k: f64, d: f64, n: usize) -> Result<KappaEstimate> {
    estimate_kappa_acoustic_on(n_grid, k, d, n, &uniform_grid(0.0, KAPPA_GRID_MAX, KAPPA_GRID_STEP))
}

pub fn estimate_kappa_acoustic_on(n_grid: usize, k: f64, d: f64, n: usize, s_grid: &[f64]) -> Result<KappaEstimate> {
    let disc = build_acoustic_discretization(n_grid, k, d)?;
    estimate_kappa_numeric(&disc.system.matrix, n, s_grid)
}
