//! Dense linear algebra shared by the sweeps, the spectrum checks and the
//! integrator.
//!
//! The resolvent norm `||(is - A)^{-1} A^{-n}||` is evaluated without a
//! dense complex SVD per frequency. `A` is reduced once to Hessenberg form
//! `A = Q H Q^T`; since `Q` is orthogonal the norm equals
//! `||(is - H)^{-1} H^{-n}||`. At each `s` the Hessenberg matrix `is - H` is
//! factored in `O(dim²)` with adjacent-row pivoting, and the largest
//! singular value of `K = (is - H)^{-1} H^{-n}` is found by Lanczos with
//! full reorthogonalization on `K* K`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

type C64 = Complex64;

/// Relative size of `sigma_min(is - A)` (against `||A||`) below which a
/// frequency is treated as a point of the spectrum.
pub const SINGULAR_RTOL: f64 = 1e-10;

const LANCZOS_MAX_STEPS: usize = 80;
const LANCZOS_MIN_STEPS: usize = 6;
const LANCZOS_RTOL: f64 = 1e-12;
/// Grid points per warm-started chunk. Fixed so that results do not depend
/// on the worker count.
const SWEEP_CHUNK: usize = 32;

/// Largest singular value of a real matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    let schur = nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// `||(is - A)^{-1} A^{-n}||` by dense complex SVD. Slow; used as a test
/// oracle and for tiny systems.
pub fn dense_resolvent_norm(a: &DMatrix<f64>, s: f64, n: usize) -> Result<f64> {
    let dim = a.nrows();
    let ac: DMatrix<C64> = a.map(|x| C64::new(x, 0.0));
    let shifted = DMatrix::<C64>::identity(dim, dim) * C64::new(0.0, s) - &ac;
    let mut m = shifted
        .try_inverse()
        .ok_or(Error::Singular { s })?;
    if n > 0 {
        let ainv = a
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { s: 0.0 })?
            .map(|x| C64::new(x, 0.0));
        for _ in 0..n {
            m *= &ainv;
        }
    }
    Ok(m.svd(false, false).singular_values.max())
}

/// LU factors of a complex upper Hessenberg matrix with adjacent-row
/// partial pivoting: `E_{d-2} ... E_0 M = U`, `E_k = G_k P_k`.
struct HessenbergLu {
    dim: usize,
    /// Row-major upper triangle.
    u: Vec<C64>,
    swap: Vec<bool>,
    mult: Vec<C64>,
}

impl HessenbergLu {
    /// Factors `is - H` for `H` given row-major.
    fn shifted(h_rows: &[f64], dim: usize, s: f64) -> Self {
        let mut u: Vec<C64> = h_rows.iter().map(|&x| C64::new(-x, 0.0)).collect();
        for i in 0..dim {
            u[i * dim + i] += C64::new(0.0, s);
        }
        let mut swap = vec![false; dim.saturating_sub(1)];
        let mut mult = vec![C64::new(0.0, 0.0); dim.saturating_sub(1)];
        for k in 0..dim.saturating_sub(1) {
            let (top, bottom) = u.split_at_mut((k + 1) * dim);
            let row_k = &mut top[k * dim..];
            let row_k1 = &mut bottom[..dim];
            if row_k1[k].norm_sqr() > row_k[k].norm_sqr() {
                for j in k..dim {
                    std::mem::swap(&mut row_k[j], &mut row_k1[j]);
                }
                swap[k] = true;
            }
            let l = if row_k[k] == C64::new(0.0, 0.0) {
                C64::new(0.0, 0.0)
            } else {
                row_k1[k] / row_k[k]
            };
            mult[k] = l;
            row_k1[k] = C64::new(0.0, 0.0);
            if l != C64::new(0.0, 0.0) {
                for j in k + 1..dim {
                    let t = row_k[j];
                    row_k1[j] -= l * t;
                }
            }
        }
        HessenbergLu { dim, u, swap, mult }
    }

    fn min_abs_pivot(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.u[i * self.dim + i].norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// `x <- M^{-1} x`.
    fn solve(&self, x: &mut [C64]) {
        let d = self.dim;
        for k in 0..d.saturating_sub(1) {
            if self.swap[k] {
                x.swap(k, k + 1);
            }
            let t = x[k];
            x[k + 1] -= self.mult[k] * t;
        }
        for i in (0..d).rev() {
            let row = &self.u[i * d..(i + 1) * d];
            let mut acc = x[i];
            for j in i + 1..d {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
    }

    /// `x <- M^{-*} x`.
    fn solve_adjoint(&self, x: &mut [C64]) {
        let d = self.dim;
        // U* w = x, column-oriented so that rows of U are read contiguously
        for j in 0..d {
            let row = &self.u[j * d..(j + 1) * d];
            let wj = x[j] / row[j].conj();
            x[j] = wj;
            for i in j + 1..d {
                x[i] -= row[i].conj() * wj;
            }
        }
        for k in (0..d.saturating_sub(1)).rev() {
            let t = x[k + 1];
            x[k] -= self.mult[k].conj() * t;
            if self.swap[k] {
                x.swap(k, k + 1);
            }
        }
    }
}

/// Per-frequency evaluator of `||(is - A)^{-1} A^{-n}||`.
pub struct ResolventEngine {
    dim: usize,
    h_rows: Vec<f64>,
    /// `H^{-n}` (column-major), `None` when `n = 0`.
    w: Option<DMatrix<f64>>,
    power: usize,
    norm_a: f64,
}

/// Result at one frequency.
#[derive(Debug, Clone)]
pub struct ResolventPoint {
    pub s: f64,
    pub norm: f64,
    pub lanczos_steps: usize,
}

impl ResolventEngine {
    pub fn new(a: &DMatrix<f64>, power: usize) -> Result<Self> {
        let dim = a.nrows();
        if dim == 0 || a.ncols() != dim {
            return Err(Error::InvalidParameter("resolvent needs a nonempty square matrix".into()));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let norm_a = spectral_norm(a);
        let (_, h) = a.clone().hessenberg().unpack();
        let mut h_rows = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i.saturating_sub(1)..dim {
                h_rows[i * dim + j] = h[(i, j)];
            }
        }
        let w = if power > 0 {
            let lu = h.clone().lu();
            let hinv = lu.try_inverse().ok_or(Error::Singular { s: 0.0 })?;
            if hinv.iter().any(|x| !x.is_finite()) {
                return Err(Error::Singular { s: 0.0 });
            }
            let mut w = hinv.clone();
            for _ in 1..power {
                w = &w * &hinv;
            }
            Some(w)
        } else {
            None
        };
        Ok(ResolventEngine { dim, h_rows, w, power, norm_a })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn power(&self) -> usize {
        self.power
    }

    /// `||A||` (spectral norm).
    pub fn norm_a(&self) -> f64 {
        self.norm_a
    }

    fn apply_w(&self, x: &[C64], out: &mut [C64]) {
        match &self.w {
            None => out.copy_from_slice(x),
            Some(w) => {
                out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
                for (j, xj) in x.iter().enumerate() {
                    let col = w.column(j);
                    for (o, &wij) in out.iter_mut().zip(col.iter()) {
                        *o += xj * wij;
                    }
                }
            }
        }
    }

    fn apply_wt(&self, x: &[C64], out: &mut [C64]) {
        match &self.w {
            None => out.copy_from_slice(x),
            Some(w) => {
                for (j, o) in out.iter_mut().enumerate() {
                    let col = w.column(j);
                    let mut acc = C64::new(0.0, 0.0);
                    for (xi, &wij) in x.iter().zip(col.iter()) {
                        acc += xi * wij;
                    }
                    *o = acc;
                }
            }
        }
    }

    /// Largest singular value of `M^{-1} W` (with `W = I` when `use_w` is
    /// false), and the corresponding right singular vector.
    fn top_singular(&self, lu: &HessenbergLu, use_w: bool, start: &[C64]) -> (f64, Vec<C64>, usize) {
        let d = self.dim;
        let steps_max = LANCZOS_MAX_STEPS.min(d);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(steps_max + 1);
        let mut alpha: Vec<f64> = Vec::with_capacity(steps_max);
        let mut beta: Vec<f64> = Vec::with_capacity(steps_max);
        let mut q = start.to_vec();
        let nq = norm(&q);
        q.iter_mut().for_each(|z| *z /= nq);
        basis.push(q);
        let mut tmp = vec![C64::new(0.0, 0.0); d];
        let mut r = vec![C64::new(0.0, 0.0); d];
        let mut theta_prev = 0.0;
        let mut best = (0.0, basis[0].clone());
        let mut steps = 0;
        for k in 0..steps_max {
            // r = K* K q_k
            if use_w {
                self.apply_w(&basis[k], &mut tmp);
            } else {
                tmp.copy_from_slice(&basis[k]);
            }
            lu.solve(&mut tmp);
            lu.solve_adjoint(&mut tmp);
            if use_w {
                self.apply_wt(&tmp, &mut r);
            } else {
                r.copy_from_slice(&tmp);
            }
            let a_k = dot(&basis[k], &r).re;
            alpha.push(a_k);
            // full reorthogonalization, twice
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &r);
                    for (ri, vi) in r.iter_mut().zip(v) {
                        *ri -= c * vi;
                    }
                }
            }
            steps = k + 1;
            let b_k = norm(&r);
            let check = k + 1 >= LANCZOS_MIN_STEPS.min(steps_max) || k + 1 == steps_max;
            let exhausted = b_k <= 1e-14 * a_k.abs().max(f64::MIN_POSITIVE);
            if check || exhausted {
                let (theta, y) = tridiagonal_top(&alpha, &beta);
                if exhausted
                    || k + 1 == steps_max
                    || (theta - theta_prev).abs() <= LANCZOS_RTOL * theta
                {
                    best = (theta, combine(&basis[..k + 1], &y));
                    break;
                }
                theta_prev = theta;
            }
            beta.push(b_k);
            r.iter_mut().for_each(|z| *z /= b_k);
            basis.push(r.clone());
        }
        (best.0.max(0.0).sqrt(), best.1, steps)
    }

    fn default_start(&self) -> Vec<C64> {
        (0..self.dim)
            .map(|i| {
                let t = i as f64 + 1.0;
                C64::new(1.0 + 0.5 * (0.7 * t).sin(), 0.3 * (1.3 * t).cos())
            })
            .collect()
    }

    /// Norm at one frequency, optionally warm-started from a previous top
    /// singular vector.
    pub fn point(&self, s: f64, warm: Option<&[C64]>) -> Result<(ResolventPoint, Vec<C64>)> {
        let lu = HessenbergLu::shifted(&self.h_rows, self.dim, s);
        let floor = SINGULAR_RTOL * self.norm_a.max(f64::MIN_POSITIVE);
        if lu.min_abs_pivot() == 0.0 {
            return Err(Error::Singular { s });
        }
        let generic = self.default_start();
        let start: Vec<C64> = match warm {
            Some(w) if w.len() == self.dim => {
                let gn = norm(&generic);
                w.iter().zip(&generic).map(|(a, g)| a + g * (1e-3 / gn)).collect()
            }
            _ => generic.clone(),
        };
        let (value, vec, steps) = self.top_singular(&lu, self.power > 0, &start);
        if !value.is_finite() {
            return Err(Error::Singular { s });
        }
        // ||R|| <= ||K|| ||A||^n, so only a large K can hide a singular point.
        let r_upper = value * self.norm_a.powi(self.power as i32);
        if r_upper * floor >= 1.0 {
            let r_norm = if self.power == 0 {
                value
            } else {
                self.top_singular(&lu, false, &generic).0
            };
            if !r_norm.is_finite() || r_norm * floor >= 1.0 {
                return Err(Error::Singular { s });
            }
        }
        Ok((ResolventPoint { s, norm: value, lanczos_steps: steps }, vec))
    }

    /// Norms on a grid. Points are processed in fixed-size chunks, each
    /// warm-started along the chunk, and chunks run in parallel.
    pub fn sweep(&self, grid: &[f64]) -> Result<Vec<ResolventPoint>> {
        let chunks: Vec<Result<Vec<ResolventPoint>>> = grid
            .par_chunks(SWEEP_CHUNK)
            .map(|chunk| {
                let mut out = Vec::with_capacity(chunk.len());
                let mut warm: Option<Vec<C64>> = None;
                for &s in chunk {
                    let (p, v) = self.point(s, warm.as_deref())?;
                    out.push(p);
                    warm = Some(v);
                }
                Ok(out)
            })
            .collect();
        let mut out = Vec::with_capacity(grid.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn combine(basis: &[Vec<C64>], y: &[f64]) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); basis[0].len()];
    for (b, &c) in basis.iter().zip(y) {
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi += bi * c;
        }
    }
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|z| *z /= n);
    }
    v
}

/// Largest eigenpair of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta` (`beta.len() == alpha.len() - 1`).
fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (imax, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty tridiagonal");
    (theta, eig.eigenvectors.column(imax).iter().copied().collect())
}

/// One trapezoidal (Cayley) step `P = (I - hA/2)^{-1} (I + hA/2)`.
pub fn cayley_step(a: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let dim = a.nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    let lhs = &id - a * (0.5 * h);
    let rhs = &id + a * (0.5 * h);
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Integrator(format!("I - hA/2 singular for h = {h}")))
}

/// Least-squares line `y = slope x + intercept` with the standard error of
/// the slope.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Numeric(format!("line fit needs >= 2 paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numeric("line fit with constant abscissa".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit { slope, intercept, slope_stderr, points: n })
}

/// Fit of `log y` against `log x`; nonpositive values are skipped.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly)
}

/// Symmetric part `(A + A^T)/2`.
pub fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.max()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}
