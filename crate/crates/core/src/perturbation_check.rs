//! Admissibility conditions for perturbations `A + BC` of a damped wave
//! generator, evaluated on modal data.
//!
//! Every condition compares a measured norm with a threshold built from
//! `kappa`, the interpolation constants `K_theta` and `M`. All comparisons
//! are strict: equality fails.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::profile::Profile2;
use crate::spectral_model::{fractional_norm, Family, ModalBasis, ModalRecord, ModalVector};

/// `K_theta = e^{pi² theta (1 - theta)/2} M^theta`, exact at the endpoints.
pub fn k_theta(theta: f64, m: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else if theta == 1.0 {
        m
    } else {
        (PI * PI * theta * (1.0 - theta) / 2.0).exp() * m.powf(theta)
    }
}

/// Setting in which `M` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "context", rename_all = "snake_case")]
pub enum MContext {
    /// `1 + ||D_0||² mu_1^{-1/2}`.
    Generic { norm_d0: f64, mu1: f64 },
    /// `1 + ||d||²_{L²_a} (a²/4 + pi²)^{-1/2}`.
    Webster { a: f64, norm_d: f64 },
    /// Viscous damping on a rectangle: `1 + ab ||d||_inf / (pi sqrt(a² + b²))`.
    Rectangle { a: f64, b: f64, d_sup: f64 },
    /// Almost-dissipative bound with `||d||²_inf` in place of `||d||_inf`.
    AlmostDissipative { a: f64, b: f64, d_sup: f64 },
}

pub fn m_constant(context: MContext) -> f64 {
    match context {
        MContext::Generic { norm_d0, mu1 } => 1.0 + norm_d0 * norm_d0 / mu1.sqrt(),
        MContext::Webster { a, norm_d } => 1.0 + norm_d * norm_d / (a * a / 4.0 + PI * PI).sqrt(),
        MContext::Rectangle { a, b, d_sup } => 1.0 + a * b * d_sup / (PI * (a * a + b * b).sqrt()),
        MContext::AlmostDissipative { a, b, d_sup } => {
            1.0 + a * b * d_sup * d_sup / (PI * (a * a + b * b).sqrt())
        }
    }
}

/// Structure of the perturbation `B C = sum_k b_k <., c_k>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    RankOne,
    FiniteRank,
    HilbertSchmidt,
    AlmostDissipative,
    WebsterRankOne,
}

/// Perturbation data: `b` holds the `b_{k,2}`, `c1`, `c2` the two
/// components of the `c_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub b: Vec<ModalVector>,
    pub c1: Vec<ModalVector>,
    pub c2: Vec<ModalVector>,
}

impl Perturbation {
    pub fn rank_one(b: ModalVector, c1: ModalVector, c2: ModalVector) -> Self {
        Perturbation {
            kind: PerturbationKind::RankOne,
            b: vec![b],
            c1: vec![c1],
            c2: vec![c2],
        }
    }

    pub fn webster_rank_one(b: ModalVector, c1: ModalVector, c2: ModalVector) -> Self {
        Perturbation {
            kind: PerturbationKind::WebsterRankOne,
            ..Self::rank_one(b, c1, c2)
        }
    }

    pub fn finite_rank(b: Vec<ModalVector>, c1: Vec<ModalVector>, c2: Vec<ModalVector>) -> Result<Self> {
        if b.is_empty() {
            return Err(invalid("finite-rank perturbation needs m >= 1 terms"));
        }
        Self::with_kind(PerturbationKind::FiniteRank, b, c1, c2)
    }

    pub fn hilbert_schmidt(b: Vec<ModalVector>, c1: Vec<ModalVector>, c2: Vec<ModalVector>) -> Result<Self> {
        Self::with_kind(PerturbationKind::HilbertSchmidt, b, c1, c2)
    }

    fn with_kind(
        kind: PerturbationKind,
        b: Vec<ModalVector>,
        c1: Vec<ModalVector>,
        c2: Vec<ModalVector>,
    ) -> Result<Self> {
        if b.len() != c1.len() || b.len() != c2.len() {
            return Err(invalid(format!(
                "term lists differ in length: b {}, c1 {}, c2 {}",
                b.len(),
                c1.len(),
                c2.len()
            )));
        }
        Ok(Perturbation { kind, b, c1, c2 })
    }

    /// Number of terms `m`.
    pub fn rank(&self) -> usize {
        self.b.len()
    }

    /// All vectors scaled: `b` by `tb`, `c1` and `c2` by `tc`.
    pub fn scaled(&self, tb: f64, tc: f64) -> Self {
        Perturbation {
            kind: self.kind,
            b: self.b.iter().map(|v| v.scaled(tb)).collect(),
            c1: self.c1.iter().map(|v| v.scaled(tc)).collect(),
            c2: self.c2.iter().map(|v| v.scaled(tc)).collect(),
        }
    }

    pub fn to_record(&self) -> PerturbationRecord {
        let rec = |v: &Vec<ModalVector>| v.iter().map(|x| x.to_record()).collect();
        PerturbationRecord {
            kind: self.kind,
            b: rec(&self.b),
            c1: rec(&self.c1),
            c2: rec(&self.c2),
        }
    }

    pub fn from_record(r: &PerturbationRecord) -> Result<Self> {
        let conv = |v: &Vec<ModalRecord>| v.iter().map(ModalVector::from_record).collect::<Result<Vec<_>>>();
        Self::with_kind(r.kind, conv(&r.b)?, conv(&r.c1)?, conv(&r.c2)?)
    }
}

/// JSON form of a [`Perturbation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationRecord {
    pub kind: PerturbationKind,
    pub b: Vec<ModalRecord>,
    pub c1: Vec<ModalRecord>,
    pub c2: Vec<ModalRecord>,
}

/// One admissibility condition `measured < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Condition {
    pub fn new(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Condition {
            name: name.into(),
            measured,
            threshold,
            pass: measured < threshold,
        }
    }
}

/// Outcome of a checker. The verdict is the conjunction of the conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checker: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(rename = "K_beta")]
    pub k_beta: f64,
    #[serde(rename = "K_gamma")]
    pub k_gamma: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub kappa: f64,
    pub conditions: Vec<Condition>,
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub(crate) fn new(checker: &str, alpha: f64, beta: f64, gamma: f64, m: f64, kappa: f64, conditions: Vec<Condition>) -> Self {
        let verdict = conditions.iter().all(|c| c.pass);
        CheckReport {
            checker: checker.to_string(),
            alpha,
            beta,
            gamma,
            k_beta: k_theta(beta, m),
            k_gamma: k_theta(gamma, m),
            m,
            kappa,
            conditions,
            verdict,
            notes: Vec::new(),
        }
    }

    /// Names of the failing conditions.
    pub fn failures(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Canonical `(beta, gamma)` pairs with `0 <= beta, gamma <= 1` and
/// `beta + gamma >= alpha`.
pub fn select_exponents(alpha: f64) -> Result<Vec<(f64, f64)>> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let mut out = vec![(1.0, 1.0)];
    if alpha >= 1.0 {
        out.push((alpha - 1.0, 1.0));
        out.push((1.0, alpha - 1.0));
    }
    if alpha <= 1.0 {
        out.push((alpha, 0.0));
        out.push((0.0, alpha));
    }
    let mut unique: Vec<(f64, f64)> = Vec::new();
    for p in out {
        if !unique.contains(&p) && validate_exponents(alpha, p.0, p.1).is_ok() {
            unique.push(p);
        }
    }
    Ok(unique)
}

fn validate_exponents(alpha: f64, beta: f64, gamma: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    for (name, t) in [("beta", beta), ("gamma", gamma)] {
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid(format!("{name} = {t} outside [0, 1]")));
        }
    }
    if beta + gamma < alpha {
        return Err(invalid(format!("beta + gamma = {} < alpha = {alpha}", beta + gamma)));
    }
    Ok(())
}

fn validate_budget(kappa: f64, m: f64) -> Result<()> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(invalid(format!("kappa must be > 0, got {kappa}")));
    }
    if !(m.is_finite() && m >= 1.0) {
        return Err(invalid(format!("M must be >= 1, got {m}")));
    }
    Ok(())
}

/// `||b||_{H_{beta/2}}` and `||c1||²_{H_{(gamma-1)/2}} + ||c2||²_{H_{gamma/2}}` of term `k`.
fn term_norms(p: &Perturbation, k: usize, beta: f64, gamma: f64) -> (f64, f64) {
    let b = fractional_norm(&p.b[k], beta / 2.0);
    let c = fractional_norm(&p.c1[k], (gamma - 1.0) / 2.0).powi(2)
        + fractional_norm(&p.c2[k], gamma / 2.0).powi(2);
    (b, c)
}

/// Rank-one conditions: `||b_2||_{H_{beta/2}} < kappa / K_beta` and
/// `||c_1||²_{H_{(gamma-1)/2}} + ||c_2||²_{H_{gamma/2}} < kappa² / K_gamma²`.
pub fn check_rank_one(p: &Perturbation, alpha: f64, beta: f64, gamma: f64, kappa: f64, m: f64) -> Result<CheckReport> {
    validate_exponents(alpha, beta, gamma)?;
    validate_budget(kappa, m)?;
    if p.rank() != 1 {
        return Err(invalid(format!("rank-one check needs exactly one term, got {}", p.rank())));
    }
    let (kb, kg) = (k_theta(beta, m), k_theta(gamma, m));
    let (bn, cn) = term_norms(p, 0, beta, gamma);
    let conditions = vec![
        Condition::new("||b2||_{H_beta/2} < kappa/K_beta", bn, kappa / kb),
        Condition::new(
            "||c1||^2_{H_(gamma-1)/2} + ||c2||^2_{H_gamma/2} < kappa^2/K_gamma^2",
            cn,
            kappa * kappa / (kg * kg),
        ),
    ];
    Ok(CheckReport::new("rank_one", alpha, beta, gamma, m, kappa, conditions))
}

/// Rank-one check for the Webster model: `alpha = 2`, `beta = gamma = 1`.
pub fn check_webster_rank_one(p: &Perturbation, kappa: f64, m: f64) -> Result<CheckReport> {
    let mut r = check_rank_one(p, 2.0, 1.0, 1.0, kappa, m)?;
    r.checker = "webster_rank_one".into();
    Ok(r)
}

/// Finite-rank conditions, per term `k`:
/// `||b_{k,2}||_{H_{beta/2}} < kappa/(m K_beta)` and
/// `||c_{k,1}||² + ||c_{k,2}||² < kappa²/(m² K_gamma²)`.
pub fn check_finite_rank(p: &Perturbation, alpha: f64, beta: f64, gamma: f64, kappa: f64, m: f64) -> Result<CheckReport> {
    validate_exponents(alpha, beta, gamma)?;
    validate_budget(kappa, m)?;
    let rank = p.rank();
    if rank == 0 {
        return Err(invalid("finite-rank check needs m >= 1 terms"));
    }
    let (kb, kg) = (k_theta(beta, m), k_theta(gamma, m));
    let mf = rank as f64;
    let mut conditions = Vec::with_capacity(2 * rank);
    for k in 0..rank {
        let (bn, cn) = term_norms(p, k, beta, gamma);
        conditions.push(Condition::new(
            format!("k={}: ||b_k2||_{{H_beta/2}} < kappa/(m K_beta)", k + 1),
            bn,
            kappa / (mf * kb),
        ));
        conditions.push(Condition::new(
            format!("k={}: ||c_k1||^2 + ||c_k2||^2 < kappa^2/(m^2 K_gamma^2)", k + 1),
            cn,
            kappa * kappa / (mf * mf * kg * kg),
        ));
    }
    Ok(CheckReport::new("finite_rank", alpha, beta, gamma, m, kappa, conditions))
}

/// Hilbert–Schmidt conditions on the summed squares over the declared
/// truncation. The last term's size is noted as a tail indicator.
pub fn check_hilbert_schmidt(p: &Perturbation, alpha: f64, beta: f64, gamma: f64, kappa: f64, m: f64) -> Result<CheckReport> {
    validate_exponents(alpha, beta, gamma)?;
    validate_budget(kappa, m)?;
    let (kb, kg) = (k_theta(beta, m), k_theta(gamma, m));
    let norms: Vec<(f64, f64)> = (0..p.rank()).map(|k| term_norms(p, k, beta, gamma)).collect();
    let b_sum: f64 = norms.iter().map(|(b, _)| b * b).sum();
    let c_sum: f64 = norms.iter().map(|(_, c)| c).sum();
    let conditions = vec![
        Condition::new("sum_k ||b_k2||^2_{H_beta/2} < kappa^2/K_beta^2", b_sum, kappa * kappa / (kb * kb)),
        Condition::new(
            "sum_k (||c_k1||^2 + ||c_k2||^2) < kappa^2/K_gamma^2",
            c_sum,
            kappa * kappa / (kg * kg),
        ),
    ];
    let mut r = CheckReport::new("hilbert_schmidt", alpha, beta, gamma, m, kappa, conditions);
    if let Some(&(b, c)) = norms.last() {
        r.notes.push(format!(
            "sums over {} declared terms; last term sizes (tail indicator): b {:e}, c {:e}",
            norms.len(),
            b * b,
            c
        ));
    }
    Ok(r)
}

/// Almost-dissipative damping on a rectangle: `A = A_0 - D D* - B D*`
/// with `D D*` multiplication by `d >= 0` of class C².
///
/// Conditions: `||sqrt(d) c||_{L²} < kappa` and
/// `||d b_2||²_{H_{1/2}} + ||b_2||²_{H_1} < kappa²/M²`, the latter for both
/// `M = 1 + ab||d||²_inf/(pi sqrt(a²+b²))` and
/// `M = 1 + ab||d||_inf/(pi sqrt(a²+b²))`, so the larger one decides.
pub fn check_almost_dissipative(
    b2: &ModalVector,
    c: &ModalVector,
    d: &Profile2,
    kappa: f64,
    quad_nodes: usize,
) -> Result<CheckReport> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(invalid(format!("kappa must be > 0, got {kappa}")));
    }
    let basis = b2.basis();
    let (a, b) = match basis.family() {
        Family::Rectangle { a, b } => (a, b),
        other => {
            return Err(invalid(format!(
                "almost-dissipative check is defined on a rectangle basis, got {}",
                other.name()
            )))
        }
    };
    if !c.basis().compatible(basis, c.truncation().min(basis.len())) {
        return Err(Error::BasisMismatch("b2 and c use different bases".into()));
    }
    if d.smoothness() < 2 {
        return Err(Error::Regularity(
            "d must be C² so that dom A² is characterized by the damping-free domain".into(),
        ));
    }
    let nodes = quad_nodes.max(2 * basis.max_frequency_index(basis.len()) + 32);
    let rule = basis.quadrature(nodes)?;
    let mut sqrt_d_c = 0.0;
    let mut grad_db = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let dv = d.value(p[0], p[1], a, b);
        if dv < 0.0 {
            return Err(invalid(format!("damping d must be >= 0, got {dv} at {p:?}")));
        }
        let cv = c.eval(p)?;
        sqrt_d_c += w * dv * cv * cv;
        let dg = d
            .gradient(p[0], p[1], a, b)
            .ok_or_else(|| Error::Regularity("d is not differentiable".into()))?;
        let bv = b2.eval(p)?;
        let bg = b2.eval_gradient(p)?;
        let gx = dg[0] * bv + dv * bg[0];
        let gy = dg[1] * bv + dv * bg[1];
        grad_db += w * (gx * gx + gy * gy);
    }
    let sqrt_d_c = sqrt_d_c.sqrt();
    let b_side = grad_db + fractional_norm(b2, 1.0).powi(2);
    let d_sup = d.sup_norm();
    let m_squared = m_constant(MContext::AlmostDissipative { a, b, d_sup });
    let m_linear = m_constant(MContext::Rectangle { a, b, d_sup });
    let m_gate = m_squared.max(m_linear);
    let conditions = vec![
        Condition::new("||sqrt(d) c||_L2 < kappa", sqrt_d_c, kappa),
        Condition::new(
            "||d b2||^2_{H_1/2} + ||b2||^2_{H_1} < kappa^2/M^2 (M with ||d||_inf^2)",
            b_side,
            kappa * kappa / (m_squared * m_squared),
        ),
        Condition::new(
            "||d b2||^2_{H_1/2} + ||b2||^2_{H_1} < kappa^2/M^2 (M with ||d||_inf)",
            b_side,
            kappa * kappa / (m_linear * m_linear),
        ),
    ];
    let mut r = CheckReport::new("almost_dissipative", 2.0, 1.0, 1.0, m_gate, kappa, conditions);
    r.notes.push(format!(
        "M with ||d||_inf^2 = {m_squared}, M with ||d||_inf = {m_linear}; the larger ({m_gate}) decides"
    ));
    if m_squared != m_linear {
        r.notes.push(format!(
            "the two M values differ since ||d||_inf = {d_sup} != 1"
        ));
    }
    Ok(r)
}

/// Zero vector of length `n` in `basis`.
pub fn zero_vector(basis: &ModalBasis, n: usize) -> ModalVector {
    ModalVector::zeros(basis, n)
}
