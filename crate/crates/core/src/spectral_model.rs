//! Diagonalizable negative operators `L` given by modal data.
//!
//! A [`ModalBasis`] holds the eigenvalues `mu_n` of `-L` in ascending order
//! together with (for the closed-form families) pointwise evaluators for the
//! eigenfunctions. A [`ModalVector`] holds the coefficients of a function
//! against that basis and carries the normalization convention they were
//! computed with, since the Webster eigenfunctions `e^{-ax/2} sin(n pi x)`
//! have weighted norm `1/sqrt 2` rather than 1.
//!
//! Fractional norms follow the graph-norm convention
//! `||u||_{H_theta} = (sum_n mu_n^{2 theta} |<u, phi_n>|^2)^{1/2}`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{composite_interval, composite_rectangle, Rule};

/// Smallest quadrature node count used for expansions.
pub const MIN_QUAD_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `L = d²/dx² + a d/dx` on `L²_a(0, 1)` with Dirichlet conditions.
    Webster { a: f64 },
    /// Dirichlet Laplacian on `(0, a) x (0, b)`.
    Rectangle { a: f64, b: f64 },
    /// Eigenvalues only; no pointwise evaluator.
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Webster { .. } => "webster",
            Family::Rectangle { .. } => "rectangle",
            Family::Custom => "custom",
        }
    }

    fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            Family::Webster { a } => {
                m.insert("a".to_string(), a);
            }
            Family::Rectangle { a, b } => {
                m.insert("a".to_string(), a);
                m.insert("b".to_string(), b);
            }
            Family::Custom => {}
        }
        m
    }
}

/// Which eigenfunctions a coefficient vector was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// The closed-form eigenfunctions as written (Webster: weighted norm `1/sqrt 2`).
    Raw,
    /// Unit-norm eigenfunctions in the weighted inner product.
    Normalized,
}

#[derive(Debug)]
struct BasisData {
    family: Family,
    eigenvalues: Vec<f64>,
    /// Mode labels: `(n, 0)` for Webster, `(j, k)` for the rectangle,
    /// `(n, 0)` for custom data.
    labels: Vec<(usize, usize)>,
}

/// Eigenvalues of `-L` plus eigenfunction evaluators. Cheap to clone.
#[derive(Debug, Clone)]
pub struct ModalBasis(Arc<BasisData>);

impl PartialEq for ModalBasis {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.family == other.0.family && self.0.eigenvalues == other.0.eigenvalues)
    }
}

/// Webster basis: `mu_n = a²/4 + pi² n²`, `phi_n = e^{-ax/2} sin(pi n x)`.
pub fn webster_basis(a: f64, n: usize) -> Result<ModalBasis> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(invalid(format!("Webster parameter a must be >= 0, got {a}")));
    }
    if n == 0 {
        return Err(invalid("basis size must be at least 1"));
    }
    let eigenvalues = (1..=n)
        .map(|k| a * a / 4.0 + PI * PI * (k * k) as f64)
        .collect();
    let labels = (1..=n).map(|k| (k, 0)).collect();
    Ok(ModalBasis(Arc::new(BasisData {
        family: Family::Webster { a },
        eigenvalues,
        labels,
    })))
}

/// First `n` Dirichlet eigenpairs of the rectangle, ascending, ties broken
/// lexicographically in `(j, k)`.
pub fn rectangle_basis(a: f64, b: f64, n: usize) -> Result<ModalBasis> {
    if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
        return Err(invalid(format!("rectangle sides must be > 0, got ({a}, {b})")));
    }
    if n == 0 {
        return Err(invalid("basis size must be at least 1"));
    }
    // (j, 1) for j <= n already gives n candidates, so no mode with j > n
    // (or k > n) can be among the n smallest.
    let mut modes: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for j in 1..=n {
        for k in 1..=n {
            let mu = PI * PI * ((j * j) as f64 / (a * a) + (k * k) as f64 / (b * b));
            modes.push((mu, j, k));
        }
    }
    modes.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    modes.truncate(n);
    Ok(ModalBasis(Arc::new(BasisData {
        family: Family::Rectangle { a, b },
        eigenvalues: modes.iter().map(|m| m.0).collect(),
        labels: modes.iter().map(|m| (m.1, m.2)).collect(),
    })))
}

/// Basis from user-supplied eigenvalues of `-L` (positive, nondecreasing).
pub fn custom_basis(eigenvalues: Vec<f64>) -> Result<ModalBasis> {
    if eigenvalues.is_empty() {
        return Err(invalid("custom basis needs at least one eigenvalue"));
    }
    if eigenvalues.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
        return Err(invalid("custom eigenvalues must be finite and > 0"));
    }
    if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("custom eigenvalues must be nondecreasing"));
    }
    let labels = (1..=eigenvalues.len()).map(|k| (k, 0)).collect();
    Ok(ModalBasis(Arc::new(BasisData {
        family: Family::Custom,
        eigenvalues,
        labels,
    })))
}

impl ModalBasis {
    pub fn family(&self) -> Family {
        self.0.family
    }

    pub fn len(&self) -> usize {
        self.0.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.0.eigenvalues
    }

    /// `mu` of mode `i` (0-based).
    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.0.eigenvalues[i]
    }

    pub fn label(&self, i: usize) -> (usize, usize) {
        self.0.labels[i]
    }

    pub fn has_evaluator(&self) -> bool {
        !matches!(self.0.family, Family::Custom)
    }

    /// Spatial dimension of the domain (0 for custom data).
    pub fn dimension(&self) -> usize {
        match self.0.family {
            Family::Webster { .. } => 1,
            Family::Rectangle { .. } => 2,
            Family::Custom => 0,
        }
    }

    /// Weighted norm of the stored raw eigenfunction.
    pub fn raw_norm(&self, _i: usize) -> f64 {
        match self.0.family {
            Family::Webster { .. } => FRAC_1_SQRT_2,
            _ => 1.0,
        }
    }

    /// Density of the inner product at `p`.
    pub fn weight(&self, p: &[f64; 2]) -> f64 {
        match self.0.family {
            Family::Webster { a } => (a * p[0]).exp(),
            _ => 1.0,
        }
    }

    /// Eigenfunction `i` at `p` in the requested convention.
    pub fn eval(&self, i: usize, p: &[f64; 2], convention: Convention) -> Result<f64> {
        let (j, k) = self.0.labels[i];
        let raw = match self.0.family {
            Family::Webster { a } => (-0.5 * a * p[0]).exp() * (PI * j as f64 * p[0]).sin(),
            Family::Rectangle { a, b } => {
                2.0 / (a * b).sqrt()
                    * (j as f64 * PI * p[0] / a).sin()
                    * (k as f64 * PI * p[1] / b).sin()
            }
            Family::Custom => return Err(Error::NoEvaluator("custom basis".into())),
        };
        Ok(match convention {
            Convention::Raw => raw,
            Convention::Normalized => raw / self.raw_norm(i),
        })
    }

    /// Gradient of eigenfunction `i` at `p` (second component zero in 1-D).
    pub fn eval_gradient(&self, i: usize, p: &[f64; 2], convention: Convention) -> Result<[f64; 2]> {
        let (j, k) = self.0.labels[i];
        let raw = match self.0.family {
            Family::Webster { a } => {
                let w = PI * j as f64;
                let env = (-0.5 * a * p[0]).exp();
                [env * (w * (w * p[0]).cos() - 0.5 * a * (w * p[0]).sin()), 0.0]
            }
            Family::Rectangle { a, b } => {
                let (wx, wy) = (j as f64 * PI / a, k as f64 * PI / b);
                let s = 2.0 / (a * b).sqrt();
                [
                    s * wx * (wx * p[0]).cos() * (wy * p[1]).sin(),
                    s * wy * (wx * p[0]).sin() * (wy * p[1]).cos(),
                ]
            }
            Family::Custom => return Err(Error::NoEvaluator("custom basis".into())),
        };
        let scale = match convention {
            Convention::Raw => 1.0,
            Convention::Normalized => 1.0 / self.raw_norm(i),
        };
        Ok([raw[0] * scale, raw[1] * scale])
    }

    /// Highest one-dimensional frequency index among the first `n` modes.
    pub fn max_frequency_index(&self, n: usize) -> usize {
        self.max_index(n.min(self.len()))
    }

    /// Quadrature on the domain with the inner-product density folded into
    /// the weights. `min_nodes` is per spatial dimension.
    pub fn quadrature(&self, min_nodes: usize) -> Result<Rule> {
        let nodes = min_nodes.max(MIN_QUAD_NODES);
        match self.0.family {
            Family::Webster { a } => {
                Ok(composite_interval(0.0, 1.0, nodes).with_density(|p| (a * p[0]).exp()))
            }
            Family::Rectangle { a, b } => Ok(composite_rectangle(a, b, nodes)),
            Family::Custom => Err(Error::NoEvaluator("custom basis has no domain".into())),
        }
    }

    /// The first `n` modes of this basis.
    pub fn truncated(&self, n: usize) -> ModalBasis {
        let n = n.min(self.len());
        ModalBasis(Arc::new(BasisData {
            family: self.0.family,
            eigenvalues: self.0.eigenvalues[..n].to_vec(),
            labels: self.0.labels[..n].to_vec(),
        }))
    }

    /// Highest one-dimensional frequency index among the first `n` modes.
    fn max_index(&self, n: usize) -> usize {
        self.0.labels[..n].iter().map(|&(j, k)| j.max(k)).max().unwrap_or(0)
    }

    /// True when the first `n` modes agree with `other`'s.
    pub fn compatible(&self, other: &ModalBasis, n: usize) -> bool {
        self.0.family == other.0.family
            && n <= self.len()
            && n <= other.len()
            && self.0.eigenvalues[..n] == other.0.eigenvalues[..n]
    }
}

/// `||(-L)^{-1/2}|| = mu_1^{-1/2}`.
pub fn inv_sqrt_norm(basis: &ModalBasis) -> f64 {
    basis.eigenvalue(0).powf(-0.5)
}

/// Coefficients of a function against a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalVector {
    basis: ModalBasis,
    coefficients: Vec<f64>,
    convention: Convention,
}

impl ModalVector {
    /// `coefficients.len()` is the declared truncation length and must not
    /// exceed the basis size.
    pub fn new(basis: &ModalBasis, coefficients: Vec<f64>, convention: Convention) -> Result<Self> {
        if coefficients.len() > basis.len() {
            return Err(invalid(format!(
                "{} coefficients for a basis of {} modes",
                coefficients.len(),
                basis.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("modal coefficients must be finite"));
        }
        Ok(Self {
            basis: basis.clone(),
            coefficients,
            convention,
        })
    }

    pub fn normalized(basis: &ModalBasis, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(basis, coefficients, Convention::Normalized)
    }

    pub fn zeros(basis: &ModalBasis, n: usize) -> Self {
        Self {
            basis: basis.clone(),
            coefficients: vec![0.0; n.min(basis.len())],
            convention: Convention::Normalized,
        }
    }

    /// Unit vector `e_i` (normalized convention, 0-based `i`).
    pub fn unit(basis: &ModalBasis, i: usize, n: usize) -> Self {
        let mut v = Self::zeros(basis, n.max(i + 1));
        v.coefficients[i] = 1.0;
        v
    }

    pub fn basis(&self) -> &ModalBasis {
        &self.basis
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn truncation(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Coefficient `i`; zero beyond the truncation.
    pub fn coefficient(&self, i: usize) -> f64 {
        self.coefficients.get(i).copied().unwrap_or(0.0)
    }

    /// The same function expressed against unit-norm eigenfunctions.
    pub fn to_normalized(&self) -> ModalVector {
        match self.convention {
            Convention::Normalized => self.clone(),
            Convention::Raw => ModalVector {
                basis: self.basis.clone(),
                coefficients: self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c / self.basis.raw_norm(i))
                    .collect(),
                convention: Convention::Normalized,
            },
        }
    }

    /// The same function expressed against the raw eigenfunctions.
    pub fn to_raw(&self) -> ModalVector {
        match self.convention {
            Convention::Raw => self.clone(),
            Convention::Normalized => ModalVector {
                basis: self.basis.clone(),
                coefficients: self
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * self.basis.raw_norm(i))
                    .collect(),
                convention: Convention::Raw,
            },
        }
    }

    pub fn scaled(&self, t: f64) -> ModalVector {
        ModalVector {
            basis: self.basis.clone(),
            coefficients: self.coefficients.iter().map(|c| c * t).collect(),
            convention: self.convention,
        }
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0.0)
    }

    /// Pointwise value `sum_n v_n phi_n(p)`.
    pub fn eval(&self, p: &[f64; 2]) -> Result<f64> {
        let mut s = 0.0;
        for (i, c) in self.coefficients.iter().enumerate() {
            if *c != 0.0 {
                s += c * self.basis.eval(i, p, self.convention)?;
            }
        }
        Ok(s)
    }

    /// Pointwise gradient `sum_n v_n grad phi_n(p)`.
    pub fn eval_gradient(&self, p: &[f64; 2]) -> Result<[f64; 2]> {
        let mut g = [0.0; 2];
        for (i, c) in self.coefficients.iter().enumerate() {
            if *c != 0.0 {
                let d = self.basis.eval_gradient(i, p, self.convention)?;
                g[0] += c * d[0];
                g[1] += c * d[1];
            }
        }
        Ok(g)
    }

    pub fn to_record(&self) -> ModalRecord {
        ModalRecord {
            family: self.basis.family().name().to_string(),
            params: self.basis.family().params(),
            eigenvalues: self.basis.eigenvalues()[..self.truncation()].to_vec(),
            coefficients: self.coefficients.clone(),
            normalized: self.convention == Convention::Normalized,
        }
    }

    pub fn from_record(rec: &ModalRecord) -> Result<Self> {
        let basis = rec.basis()?;
        let convention = if rec.normalized {
            Convention::Normalized
        } else {
            Convention::Raw
        };
        ModalVector::new(&basis, rec.coefficients.clone(), convention)
    }
}

/// JSON form of a basis or a coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalRecord {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub eigenvalues: Vec<f64>,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    #[serde(default = "default_true")]
    pub normalized: bool,
}

fn default_true() -> bool {
    true
}

impl ModalRecord {
    pub fn from_basis(basis: &ModalBasis) -> Self {
        ModalRecord {
            family: basis.family().name().to_string(),
            params: basis.family().params(),
            eigenvalues: basis.eigenvalues().to_vec(),
            coefficients: Vec::new(),
            normalized: true,
        }
    }

    /// Rebuilds the basis; closed-form families are regenerated and the
    /// stored eigenvalues checked against them.
    pub fn basis(&self) -> Result<ModalBasis> {
        let n = self.eigenvalues.len().max(self.coefficients.len());
        let param = |k: &str| {
            self.params
                .get(k)
                .copied()
                .ok_or_else(|| invalid(format!("{} basis needs parameter '{k}'", self.family)))
        };
        let basis = match self.family.as_str() {
            "webster" => webster_basis(param("a")?, n)?,
            "rectangle" => rectangle_basis(param("a")?, param("b")?, n)?,
            "custom" => return custom_basis(self.eigenvalues.clone()),
            other => return Err(invalid(format!("unknown basis family '{other}'"))),
        };
        for (i, (&stored, &fresh)) in self.eigenvalues.iter().zip(basis.eigenvalues()).enumerate() {
            if (stored - fresh).abs() > 1e-10 * fresh {
                return Err(Error::BasisMismatch(format!(
                    "eigenvalue {i}: stored {stored}, family gives {fresh}"
                )));
            }
        }
        Ok(basis)
    }
}

/// Coefficients of `f` against the first `n` eigenfunctions, by composite
/// Gauss–Legendre quadrature with at least `quad_nodes` nodes (per
/// dimension). `quad_nodes` must be at least twice the highest frequency
/// index involved.
pub fn expand<F>(f: F, basis: &ModalBasis, n: usize, quad_nodes: usize) -> Result<ModalVector>
where
    F: Fn(&[f64; 2]) -> f64 + Sync,
{
    expand_with(f, basis, n, quad_nodes, Convention::Normalized)
}

pub fn expand_with<F>(
    f: F,
    basis: &ModalBasis,
    n: usize,
    quad_nodes: usize,
    convention: Convention,
) -> Result<ModalVector>
where
    F: Fn(&[f64; 2]) -> f64 + Sync,
{
    if n == 0 || n > basis.len() {
        return Err(invalid(format!("expansion length {n} outside 1..={}", basis.len())));
    }
    let floor = 2 * basis.max_index(n);
    if quad_nodes < floor {
        return Err(invalid(format!(
            "quad_nodes = {quad_nodes} below the anti-aliasing floor {floor}"
        )));
    }
    let rule = basis.quadrature(quad_nodes)?;
    let mut fw = Vec::with_capacity(rule.len());
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let v = f(p);
        if !v.is_finite() {
            return Err(Error::NonFinite { mode: 0, point: p.to_vec() });
        }
        fw.push(v * w);
    }
    let coefficients = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for (p, fwq) in rule.points.iter().zip(&fw) {
                s += fwq * basis.eval(i, p, convention)?;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    ModalVector::new(basis, coefficients, convention)
}

/// Graph norm of `(-L)^theta` on the normalized coefficients:
/// `(sum_n mu_n^{2 theta} v_n²)^{1/2}`.
pub fn fractional_norm(v: &ModalVector, theta: f64) -> f64 {
    let v = v.to_normalized();
    let mu = v.basis.eigenvalues();
    v.coefficients
        .iter()
        .zip(mu)
        .map(|(c, m)| m.powf(2.0 * theta) * c * c)
        .sum::<f64>()
        .sqrt()
}

/// Weighted L² norm of `f` on the basis domain by quadrature.
pub fn weighted_norm<F>(f: F, basis: &ModalBasis, quad_nodes: usize) -> Result<f64>
where
    F: Fn(&[f64; 2]) -> f64,
{
    let rule = basis.quadrature(quad_nodes)?;
    Ok(rule.integrate(|p| f(p).powi(2)).sqrt())
}

/// Quadrature Gram matrix of the first `k` normalized eigenfunctions.
pub fn gram_matrix(basis: &ModalBasis, k: usize, quad_nodes: usize) -> Result<DMatrix<f64>> {
    let k = k.min(basis.len());
    let rule = basis.quadrature(quad_nodes.max(2 * basis.max_index(k)))?;
    let mut values = DMatrix::zeros(k, rule.len());
    for i in 0..k {
        for (q, p) in rule.points.iter().enumerate() {
            values[(i, q)] = basis.eval(i, p, Convention::Normalized)?;
        }
    }
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..rule.len())
                .map(|q| rule.weights[q] * values[(i, q)] * values[(j, q)])
                .sum();
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    Ok(g)
}

/// Closed form of `<phi_n, 1 - x>_{L²_a}` for the raw Webster
/// eigenfunctions:
/// `pi n / (a²/4 + pi² n²) - a pi n (e^{a/2} (-1)^n - 1) / (a²/4 + pi² n²)²`.
pub fn webster_linear_damping_coefficient(a: f64, n: usize) -> f64 {
    let nf = n as f64;
    let mu = a * a / 4.0 + PI * PI * nf * nf;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    PI * nf / mu - a * PI * nf * ((a / 2.0).exp() * sign - 1.0) / (mu * mu)
}

/// `||1 - x||²_{L²_a} = 2 a^{-3} (e^a - 1 - a - a²/2)` (and `1/3` at `a = 0`).
pub fn webster_linear_damping_norm_sq(a: f64) -> f64 {
    if a == 0.0 {
        return 1.0 / 3.0;
    }
    2.0 / (a * a * a) * (a.exp() - 1.0 - a - a * a / 2.0)
}

/// Normalization factor between raw and unit Webster eigenfunctions.
pub const WEBSTER_NORMALIZATION: f64 = SQRT_2;
