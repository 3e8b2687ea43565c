//! Subcommand implementations. Each returns an [`Outcome`] holding the JSON
//! report, a CSV table, an optional plot and the pass flag. Nothing here
//! reads the clock, so identical inputs give identical outcomes.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use polystab_core::acoustic_model::{
    assemble_acoustic_perturbed, build_acoustic_discretization, check_acoustic_b2g0,
    check_acoustic_bg11, estimate_kappa_acoustic, AcousticPerturbation,
};
use polystab_core::kappa_bounds::{
    audit_windows, estimate_kappa_numeric, gap_windows_capped, norm_ainv_bound_from_norm,
    webster_certificate, webster_damping_norm, webster_m, webster_windows,
    webster_windows_exact_coefficients, windows_csv, FrequencyWindows, KappaCertificate,
    KappaEstimate, S0Choice, WindowAudit, DEFAULT_S0,
};
use polystab_core::perturbation_check::{
    check_almost_dissipative, check_finite_rank, check_hilbert_schmidt, check_rank_one,
    check_webster_rank_one, m_constant, Condition, MContext, Perturbation,
};
use polystab_core::profile::Profile;
use polystab_core::spectral_model::{
    expand, rectangle_basis, webster_basis, weighted_norm, Family, ModalBasis, ModalVector,
};
use polystab_core::truncation_verify::{
    assemble_perturbed, assemble_wave, resolvent_sweep, simulate_decay, spectrum_check,
    uniform_grid, Damping, DampingField, SpectrumReport, TruncatedSystem, ENERGY_MONOTONE_RTOL,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    CheckerKind, DampingSpec, FunctionSpec, ModelKind, NumberOr, RunConfig, WindowChoice,
};
use crate::error::CliError;
use crate::svg::{line_plot, Plot, Scale};

/// Slack on the fitted resolvent exponent and on the decay slope.
pub const EXPONENT_SLACK: f64 = 0.2;

/// Frequency grid of the windows table and plot.
const WINDOW_GRID: (f64, f64, f64) = (0.0, 50.0, 0.1);

pub struct Outcome {
    /// File stem of the written artifacts.
    pub stem: &'static str,
    pub report: Value,
    pub csv: String,
    pub svg: Option<String>,
    pub pass: bool,
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn provenance(entries: &[(&str, &str)]) -> Value {
    let map: BTreeMap<&str, &str> = entries.iter().copied().collect();
    value(&map)
}

fn conditions_csv(conditions: &[Condition]) -> String {
    let mut out = String::from("condition,measured,threshold,pass\n");
    for c in conditions {
        out.push_str(&format!("\"{}\",{},{},{}\n", c.name.replace('"', "'"), c.measured, c.threshold, c.pass));
    }
    out
}

/// Quadrature nodes for expanding a profile over the first `n` modes.
/// Generous, since presets may be discontinuous.
fn expansion_nodes(basis: &ModalBasis, n: usize) -> usize {
    4 * basis.max_frequency_index(n) + 512
}

/// A modal (Webster or rectangle) model with its damping resolved.
struct ModalModel {
    basis: ModalBasis,
    n: usize,
    damping: Damping,
    /// Modal vector of a weak rank-one damping.
    weak: Option<ModalVector>,
    /// `||d||` of a weak damping, from the function itself where one is given.
    norm_d: Option<f64>,
    m_context: MContext,
    damping_spec: DampingSpec,
}

fn modal_vector(basis: &ModalBasis, n: usize, coefficients: &[f64]) -> Result<ModalVector, CliError> {
    if coefficients.len() > n {
        return Err(CliError::Config(format!(
            "{} modal coefficients given but N = {n}",
            coefficients.len()
        )));
    }
    let mut c = coefficients.to_vec();
    c.resize(n, 0.0);
    Ok(ModalVector::normalized(basis, c)?)
}

fn modal_model(cfg: &RunConfig) -> Result<ModalModel, CliError> {
    let n = cfg.modes();
    let basis = match cfg.model {
        ModelKind::Webster => webster_basis(cfg.a(), n)?,
        ModelKind::Rectangle => rectangle_basis(cfg.a(), cfg.b(), n)?,
        ModelKind::Acoustic => {
            return Err(CliError::Config("the acoustic model has no modal basis".into()))
        }
    };
    let spec = cfg
        .damping()
        .ok_or_else(|| CliError::Config("the rectangle model needs a `damping` entry".into()))?;
    let mu1 = basis.eigenvalue(0);
    let webster = cfg.model == ModelKind::Webster;
    let (damping, weak, norm_d, m_context) = match &spec {
        DampingSpec::WeakRankOne { profile } if webster => {
            let nodes = expansion_nodes(&basis, n);
            let v = expand(|p| profile.value(p[0]), &basis, n, nodes)?;
            let norm = weighted_norm(|p| profile.value(p[0]), &basis, nodes)?;
            let ctx = MContext::Webster { a: cfg.a(), norm_d: norm };
            (Damping::WeakRankOne(v.clone()), Some(v), Some(norm), ctx)
        }
        DampingSpec::WeakModal { coefficients } => {
            let v = modal_vector(&basis, n, coefficients)?;
            let norm = v.euclidean_norm();
            let ctx = if webster {
                MContext::Webster { a: cfg.a(), norm_d: norm }
            } else {
                MContext::Generic { norm_d0: norm, mu1 }
            };
            (Damping::WeakRankOne(v.clone()), Some(v), Some(norm), ctx)
        }
        DampingSpec::Viscous { profile } if webster => {
            // D D* is multiplication by d, so ||D||² = sup d
            let ctx = MContext::Generic { norm_d0: profile.sup_norm().sqrt(), mu1 };
            let field = DampingField::Interval { profile: profile.clone() };
            (Damping::Viscous(field), None, None, ctx)
        }
        DampingSpec::ViscousRect { profile } if !webster => {
            let ctx = MContext::Rectangle { a: cfg.a(), b: cfg.b(), d_sup: profile.sup_norm() };
            let field = DampingField::Rectangle { profile: profile.clone() };
            (Damping::Viscous(field), None, None, ctx)
        }
        other => {
            return Err(CliError::Config(format!(
                "damping {other:?} does not apply to model {:?}",
                cfg.model
            )))
        }
    };
    Ok(ModalModel { basis, n, damping, weak, norm_d, m_context, damping_spec: spec })
}

fn expand_function(basis: &ModalBasis, n: usize, f: &FunctionSpec) -> Result<ModalVector, CliError> {
    let nodes = expansion_nodes(basis, n);
    match (f, basis.family()) {
        (FunctionSpec::Modal { coefficients }, _) => modal_vector(basis, n, coefficients),
        (FunctionSpec::Separable { x, y }, Family::Rectangle { a, b }) => {
            Ok(expand(|p| x.value(p[0] / a) * y.value(p[1] / b), basis, n, nodes)?)
        }
        (FunctionSpec::Separable { .. }, _) => {
            Err(CliError::Config("`separable` functions apply to the rectangle model only".into()))
        }
        (other, Family::Rectangle { .. }) if *other != FunctionSpec::Zero => Err(CliError::Config(
            "one-dimensional presets do not apply to the rectangle model; use `separable` or `modal`".into(),
        )),
        (other, _) => {
            let profile = other.profile().unwrap_or(Profile::Zero);
            Ok(expand(|p| profile.value(p[0]), basis, n, nodes)?)
        }
    }
}

/// Modal perturbation with every preset expanded, plus the expansion record.
fn modal_perturbation(cfg: &RunConfig, model: &ModalModel) -> Result<(Vec<[ModalVector; 3]>, Value), CliError> {
    let spec = cfg
        .modal_perturbation()?
        .ok_or_else(|| CliError::Config("`check` needs a `perturbation` entry".into()))?;
    if spec.terms.is_empty() {
        return Err(CliError::Config("perturbation needs at least one term".into()));
    }
    let mut terms = Vec::new();
    let mut record = Vec::new();
    for t in &spec.terms {
        let b = expand_function(&model.basis, model.n, &t.b)?;
        let c1 = expand_function(&model.basis, model.n, &t.c1)?;
        let c2 = expand_function(&model.basis, model.n, &t.c2)?;
        let entry = |input: &FunctionSpec, v: &ModalVector| json!({"input": input, "modal": v.to_record()});
        record.push(json!({"b": entry(&t.b, &b), "c1": entry(&t.c1, &c1), "c2": entry(&t.c2, &c2)}));
        terms.push([b, c1, c2]);
    }
    Ok((terms, json!({"terms": record, "quad_nodes": expansion_nodes(&model.basis, model.n), "convention": "normalized"})))
}

struct Certified {
    choice: WindowChoice,
    windows: FrequencyWindows,
    certificate: KappaCertificate,
    audit: WindowAudit,
}

fn certify(cfg: &RunConfig, model: &ModalModel) -> Result<Certified, CliError> {
    let weak = model.weak.as_ref().ok_or_else(|| {
        CliError::Config("certified bounds need a weak rank-one damping (`weak_rank_one` or `weak_modal`)".into())
    })?;
    let spec = cfg.bounds.clone();
    let reference = cfg.is_reference_webster();
    let choice = spec
        .as_ref()
        .and_then(|s| s.windows)
        .unwrap_or(if reference { WindowChoice::Exact } else { WindowChoice::Gap });
    let delta_cap = spec.as_ref().and_then(|s| s.delta_cap);
    if delta_cap.is_some() && choice != WindowChoice::Gap {
        return Err(CliError::Config("bounds.delta_cap applies to gap windows only".into()));
    }
    if choice != WindowChoice::Gap && !reference {
        return Err(CliError::Config(
            "closed-form windows need the Webster model with a = 2 and d = 1 - x; use \"gap\"".into(),
        ));
    }
    let windows = match choice {
        WindowChoice::Reference => webster_windows(2.0)?,
        WindowChoice::Exact => webster_windows_exact_coefficients(),
        WindowChoice::Gap => gap_windows_capped(&model.basis, weak, delta_cap)?,
    };
    let norm_d = match choice {
        WindowChoice::Gap => model.norm_d.expect("weak damping carries its norm"),
        _ => webster_damping_norm(),
    };
    let ainv = norm_ainv_bound_from_norm(&model.basis, norm_d);
    let s0 = match spec.and_then(|s| s.s0) {
        None => S0Choice::Fixed(DEFAULT_S0),
        Some(NumberOr::Number(v)) => S0Choice::Fixed(v),
        Some(NumberOr::Keyword(_)) => S0Choice::Optimize,
    };
    let certificate = KappaCertificate::build(&windows, cfg.alpha(), norm_d, ainv, s0)?;
    let audit = audit_windows(&windows, weak);
    Ok(Certified { choice, windows, certificate, audit })
}

fn estimate_power(cfg: &RunConfig) -> usize {
    (cfg.alpha().ceil() as usize).clamp(1, 2)
}

fn estimate_modal(cfg: &RunConfig, sys: &TruncatedSystem) -> Result<KappaEstimate, CliError> {
    let (_, hi, step) = cfg.sweep_grid();
    Ok(estimate_kappa_numeric(&sys.matrix, estimate_power(cfg), &uniform_grid(0.0, hi, step))?)
}

fn estimate_acoustic(cfg: &RunConfig) -> Result<KappaEstimate, CliError> {
    Ok(estimate_kappa_acoustic(cfg.modes(), cfg.k(), cfg.d(), estimate_power(cfg))?)
}

fn modal_system(cfg: &RunConfig, model: &ModalModel) -> Result<TruncatedSystem, CliError> {
    Ok(assemble_wave(&model.basis, &model.damping, model.n, cfg.alpha())?)
}

fn system(cfg: &RunConfig) -> Result<(TruncatedSystem, Option<ModalModel>), CliError> {
    match cfg.model {
        ModelKind::Acoustic => {
            Ok((build_acoustic_discretization(cfg.modes(), cfg.k(), cfg.d())?.system, None))
        }
        _ => {
            let model = modal_model(cfg)?;
            Ok((modal_system(cfg, &model)?, Some(model)))
        }
    }
}

fn estimate_csv(e: &KappaEstimate) -> String {
    format!(
        "power,kappa,sup_norm,argmax_s,grid_points\n{},{},{},{},{}\n",
        e.power, e.kappa, e.sup_norm, e.argmax_s, e.grid_points
    )
}

const ESTIMATE_PROVENANCE: &[(&str, &str)] = &[
    ("kappa", "numerical estimate 1/sqrt(2 sup_s ||R(is, A_N) A_N^-n||), not certified"),
    ("sup_norm", "resolvent sweep of the truncated generator incl. spectral frequencies"),
];

pub fn bounds(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.model == ModelKind::Acoustic {
        let est = estimate_acoustic(cfg)?;
        return Ok(Outcome {
            stem: "bounds",
            report: json!({
                "command": "bounds",
                "model": cfg.model,
                "grid_cells": cfg.modes(),
                "estimate": est,
                "pass": true,
                "provenance": provenance(ESTIMATE_PROVENANCE),
            }),
            csv: estimate_csv(&est),
            svg: None,
            pass: true,
        });
    }
    let model = modal_model(cfg)?;
    if model.weak.is_none() {
        let est = estimate_modal(cfg, &modal_system(cfg, &model)?)?;
        return Ok(Outcome {
            stem: "bounds",
            report: json!({
                "command": "bounds",
                "model": cfg.model,
                "modes": model.n,
                "damping": model.damping_spec,
                "estimate": est,
                "pass": true,
                "provenance": provenance(ESTIMATE_PROVENANCE),
            }),
            csv: estimate_csv(&est),
            svg: None,
            pass: true,
        });
    }
    let c = certify(cfg, &model)?;
    let pass = c.audit.passed();
    let grid = uniform_grid(WINDOW_GRID.0, WINDOW_GRID.1, WINDOW_GRID.2);
    let etas: Vec<f64> = grid.iter().map(|&s| c.windows.eta(s)).collect();
    let svg = cfg.plot.then(|| {
        line_plot(
            &Plot {
                title: "window level eta(s)",
                x_label: "s",
                y_label: "eta",
                x_scale: Scale::Linear,
                y_scale: Scale::Log,
            },
            &grid,
            &etas,
        )
    });
    Ok(Outcome {
        stem: "bounds",
        report: json!({
            "command": "bounds",
            "model": cfg.model,
            "modes": model.n,
            "damping": model.damping_spec,
            "windows_choice": c.choice,
            "windows": c.windows,
            "certificate": c.certificate,
            "window_audit": c.audit,
            "window_audit_passed": pass,
            "pass": pass,
            "provenance": provenance(&[
                ("certificate", "see certificate.provenance"),
                ("window_audit", "window levels against the modal damping coefficients of the first N modes"),
            ]),
        }),
        csv: windows_csv(&c.windows, &grid),
        svg,
        pass,
    })
}

/// `(kappa, source, detail)`.
fn resolve_kappa_modal(cfg: &RunConfig, model: &ModalModel) -> Result<(f64, String, Value), CliError> {
    let request = cfg.check.as_ref().and_then(|c| c.kappa.clone());
    let certificate = match &request {
        Some(NumberOr::Number(v)) => return Ok((*v, "config".into(), Value::Null)),
        Some(NumberOr::Keyword(k)) => k == "certificate",
        None => model.weak.is_some(),
    };
    if certificate {
        let c = certify(cfg, model)?;
        let source = format!("certificate ({:?} windows)", c.choice).to_lowercase();
        let detail = json!({"certificate": c.certificate, "window_audit_passed": c.audit.passed()});
        Ok((c.certificate.kappa_max, source, detail))
    } else {
        let est = estimate_modal(cfg, &modal_system(cfg, model)?)?;
        Ok((est.kappa, "numerical estimate (not certified)".into(), value(&est)))
    }
}

fn resolve_kappa_acoustic(cfg: &RunConfig) -> Result<(f64, String, Value), CliError> {
    match cfg.check.as_ref().and_then(|c| c.kappa.clone()) {
        Some(NumberOr::Number(v)) => Ok((v, "config".into(), Value::Null)),
        Some(NumberOr::Keyword(k)) if k == "certificate" => Err(CliError::Config(
            "no certified budget exists for the acoustic model; use \"estimate\" or a number".into(),
        )),
        _ => {
            let est = estimate_acoustic(cfg)?;
            Ok((est.kappa, "numerical estimate (not certified)".into(), value(&est)))
        }
    }
}

fn verify_report(spec: Result<SpectrumReport, CliError>) -> Result<(Value, bool), CliError> {
    let s = spec?;
    let pass = s.pass;
    Ok((value(&s), pass))
}

pub fn check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.check.clone().unwrap_or(crate::config::CheckSpec {
        checker: None,
        beta: None,
        gamma: None,
        kappa: None,
        m: None,
        quad_nodes: None,
        verify: false,
    });
    let (report, kappa_source, kappa_detail, expansion, verify) = if cfg.model == ModelKind::Acoustic {
        let p: AcousticPerturbation = cfg
            .acoustic_perturbation()?
            .ok_or_else(|| CliError::Config("`check` needs a `perturbation` entry".into()))?;
        let (kappa, source, detail) = resolve_kappa_acoustic(cfg)?;
        let report = match spec.checker.unwrap_or(CheckerKind::AcousticBg11) {
            CheckerKind::AcousticBg11 => check_acoustic_bg11(&p, cfg.k(), kappa)?,
            CheckerKind::AcousticB2g0 => check_acoustic_b2g0(&p, cfg.k(), kappa)?,
            other => {
                return Err(CliError::Config(format!("checker {other:?} does not apply to the acoustic model")))
            }
        };
        let verify = if spec.verify {
            let disc = build_acoustic_discretization(cfg.modes(), cfg.k(), cfg.d())?;
            let sys = assemble_acoustic_perturbed(&disc, &p);
            Some(verify_report(sys.and_then(|s| spectrum_check(&s)).map_err(CliError::from))?)
        } else {
            None
        };
        (report, source, detail, json!({"acoustic": p}), verify)
    } else {
        let model = modal_model(cfg)?;
        let (terms, expansion) = modal_perturbation(cfg, &model)?;
        let (kappa, source, detail) = resolve_kappa_modal(cfg, &model)?;
        let m = spec.m.unwrap_or_else(|| m_constant(model.m_context));
        let alpha = cfg.alpha();
        let beta = spec.beta.unwrap_or(alpha / 2.0);
        let gamma = spec.gamma.unwrap_or(alpha / 2.0);
        let split = |terms: &[[ModalVector; 3]]| {
            let pick = |k: usize| terms.iter().map(|t| t[k].clone()).collect::<Vec<_>>();
            (pick(0), pick(1), pick(2))
        };
        let single = || -> Result<&[ModalVector; 3], CliError> {
            match terms.as_slice() {
                [t] => Ok(t),
                _ => Err(CliError::Config(format!("this checker needs exactly one term, got {}", terms.len()))),
            }
        };
        let default = if terms.len() > 1 {
            CheckerKind::FiniteRank
        } else if cfg.is_reference_webster() && alpha == 2.0 {
            CheckerKind::WebsterRankOne
        } else {
            CheckerKind::RankOne
        };
        let mut perturbation = None;
        let report = match spec.checker.unwrap_or(default) {
            CheckerKind::RankOne => {
                let [b, c1, c2] = single()?.clone();
                let p = Perturbation::rank_one(b, c1, c2);
                let r = check_rank_one(&p, alpha, beta, gamma, kappa, m)?;
                perturbation = Some(p);
                r
            }
            CheckerKind::WebsterRankOne => {
                if cfg.model != ModelKind::Webster {
                    return Err(CliError::Config("webster_rank_one applies to the Webster model only".into()));
                }
                let [b, c1, c2] = single()?.clone();
                let p = Perturbation::webster_rank_one(b, c1, c2);
                let r = check_webster_rank_one(&p, kappa, m)?;
                perturbation = Some(p);
                r
            }
            CheckerKind::FiniteRank => {
                let (b, c1, c2) = split(&terms);
                let p = Perturbation::finite_rank(b, c1, c2)?;
                let r = check_finite_rank(&p, alpha, beta, gamma, kappa, m)?;
                perturbation = Some(p);
                r
            }
            CheckerKind::HilbertSchmidt => {
                let (b, c1, c2) = split(&terms);
                let p = Perturbation::hilbert_schmidt(b, c1, c2)?;
                let r = check_hilbert_schmidt(&p, alpha, beta, gamma, kappa, m)?;
                perturbation = Some(p);
                r
            }
            CheckerKind::AlmostDissipative => {
                let DampingSpec::ViscousRect { profile } = &model.damping_spec else {
                    return Err(CliError::Config("almost_dissipative needs a `viscous_rect` damping".into()));
                };
                let [b, _, c2] = single()?;
                check_almost_dissipative(b, c2, profile, kappa, spec.quad_nodes.unwrap_or(64))?
            }
            other => {
                return Err(CliError::Config(format!("checker {other:?} does not apply to model {:?}", cfg.model)))
            }
        };
        let verify = match (spec.verify, &perturbation) {
            (false, _) => None,
            (true, None) => {
                return Err(CliError::Config("`verify` is not available for this checker".into()))
            }
            (true, Some(p)) => {
                let sys = modal_system(cfg, &model)?;
                Some(verify_report(assemble_perturbed(&sys, p).and_then(|s| spectrum_check(&s)).map_err(CliError::from))?)
            }
        };
        (report, source, detail, expansion, verify)
    };
    let pass = report.verdict && verify.as_ref().map_or(true, |v| v.1);
    Ok(Outcome {
        stem: "check",
        csv: conditions_csv(&report.conditions),
        report: json!({
            "command": "check",
            "model": cfg.model,
            "kappa_source": kappa_source,
            "kappa_detail": kappa_detail,
            "expanded_perturbation": expansion,
            "report": report,
            "spectrum": verify.as_ref().map(|v| v.0.clone()),
            "pass": pass,
            "provenance": provenance(&[
                ("report.kappa", "see kappa_source"),
                ("report.M", "config value if given, else the closed-form M of the damping"),
                ("report.K_beta", "exp(pi^2 beta/8) M^beta"),
                ("report.conditions.measured", "norms of the expanded perturbation"),
                ("report.conditions.threshold", "kappa, K and M as reported"),
                ("spectrum", "eigenvalues of the perturbed truncation"),
            ]),
        }),
        svg: None,
        pass,
    })
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (sys, model) = system(cfg)?;
    let (lo, hi, step) = cfg.sweep_grid();
    let power = cfg.sweep_power();
    let profile = resolvent_sweep(&sys, &uniform_grid(lo, hi, step), power)?;
    let spectrum = spectrum_check(&sys)?;
    let alpha = cfg.alpha();
    let mut conditions = vec![Condition::new(
        "max Re lambda < -tolerance",
        spectrum.max_real,
        -spectrum.tolerance,
    )];
    let mut notes = Vec::new();
    if power == 0 {
        match &profile.fit {
            Some(fit) => conditions.push(Condition::new(
                format!("fitted growth exponent < alpha + {EXPONENT_SLACK}"),
                fit.slope,
                alpha + EXPONENT_SLACK,
            )),
            None => notes.push("too few resonance peaks to fit a growth exponent".to_string()),
        }
    }
    let mut envelope = Value::Null;
    if let (Some(model), 0) = (&model, power) {
        if model.weak.is_some() {
            match certify(cfg, model) {
                Ok(c) => {
                    let constant = c.certificate.m_r * c.certificate.m_0;
                    let ratio = profile.envelope_ratio(constant, alpha);
                    conditions.push(Condition::new("max ||R(is)|| / (M_R M_0 (1 + |s|^alpha)) < 1", ratio, 1.0));
                    envelope = json!({"constant": constant, "ratio": ratio, "windows_choice": c.choice});
                }
                Err(e) => notes.push(format!("no envelope constant: {e}")),
            }
        }
    }
    let pass = conditions.iter().all(|c| c.pass);
    let svg = cfg.plot.then(|| {
        line_plot(
            &Plot {
                title: "resolvent norm along the imaginary axis",
                x_label: "s",
                y_label: "||R(is, A_N) A_N^-n||",
                x_scale: Scale::Log,
                y_scale: Scale::Log,
            },
            &profile.s,
            &profile.values,
        )
    });
    Ok(Outcome {
        stem: "sweep",
        csv: profile.to_csv(),
        report: json!({
            "command": "sweep",
            "model": cfg.model,
            "system": sys.label,
            "dimension": sys.dim(),
            "grid": {"s_min": lo, "s_max": hi, "step": step},
            "power": power,
            "max": profile.max(),
            "fit": profile.fit,
            "fit_band": profile.fit_band,
            "peaks": profile.peaks,
            "spectrum": spectrum,
            "envelope": envelope,
            "conditions": conditions,
            "notes": notes,
            "pass": pass,
            "provenance": provenance(&[
                ("max", "largest sampled ||R(is, A_N) A_N^-n|| incl. spectral frequencies"),
                ("fit", "least-squares log-log fit over the upper half of the resonance peaks"),
                ("spectrum", "eigenvalues of the truncated generator"),
                ("envelope.constant", "M_R M_0 of the certificate"),
            ]),
        }),
        svg,
        pass,
    })
}

pub fn simulate(cfg: &RunConfig, seed: Option<u64>) -> Result<Outcome, CliError> {
    let (sys, _) = system(cfg)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let s = cfg.smoothness();
    let trace = simulate_decay(&sys, s, cfg.t_max(), cfg.steps(), seed)?;
    let target = -2.0 * s as f64 / cfg.alpha();
    let mut conditions = vec![Condition::new(
        "largest relative energy increase < tolerance",
        trace.max_energy_increase,
        ENERGY_MONOTONE_RTOL,
    )];
    match &trace.fit {
        Some(fit) => conditions.push(Condition::new(
            format!("envelope decay slope < -2s/alpha + {EXPONENT_SLACK}"),
            fit.slope,
            target + EXPONENT_SLACK,
        )),
        None => conditions.push(Condition::new("envelope decay slope could be fitted", 1.0, 0.0)),
    }
    let pass = conditions.iter().all(|c| c.pass);
    let svg = cfg.plot.then(|| {
        line_plot(
            &Plot {
                title: "energy envelope ||T(t) A^-s||^2",
                x_label: "t",
                y_label: "energy",
                x_scale: Scale::Log,
                y_scale: Scale::Log,
            },
            &trace.times,
            &trace.envelope,
        )
    });
    Ok(Outcome {
        stem: "simulate",
        csv: trace.to_csv(),
        report: json!({
            "command": "simulate",
            "model": cfg.model,
            "system": sys.label,
            "dimension": sys.dim(),
            "seed": seed,
            "smoothness": s,
            "t_max": trace.t_max,
            "step": trace.step,
            "expected_slope": target,
            "fit": trace.fit,
            "fit_random": trace.fit_random,
            "step_halving_change": trace.step_halving_change,
            "max_energy_increase": trace.max_energy_increase,
            "initial_energy": trace.initial_energy,
            "conditions": conditions,
            "pass": pass,
            "provenance": provenance(&[
                ("fit", "log-log fit of the envelope over [t_max/100, t_max]"),
                ("fit_random", "log-log fit of the seeded random trajectory over the same window"),
                ("expected_slope", "-2 s / alpha"),
                ("step_halving_change", "relative change of the last envelope value with half the step"),
                ("max_energy_increase", "largest relative increase between consecutive checkpoints"),
            ]),
        }),
        svg,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
struct Comparison {
    name: &'static str,
    value: f64,
    expected: f64,
    tolerance: f64,
    pass: bool,
    provenance: &'static str,
    expected_provenance: &'static str,
}

/// Closed forms of the Webster example, `a = 2`, `d = 1 - x`, written out
/// independently of the library routines.
struct ClosedForms {
    delta0: f64,
    c: f64,
    norm_d: f64,
    mu1: f64,
}

impl ClosedForms {
    fn new() -> Self {
        let mu = |n: f64| 1.0 + PI * PI * n * n;
        let f1 = PI / mu(1.0).sqrt() * (1.0 - 2.0 * (-E - 1.0) / mu(1.0).powi(2));
        let g2 = 2.0 * PI / mu(2.0).sqrt() * (1.0 - 2.0 * (E - 1.0) / mu(2.0).powi(2));
        ClosedForms {
            delta0: PI * PI / (2.0 + 3.0 * PI),
            c: f1.min(g2),
            norm_d: (E * E - 5.0).sqrt() / 2.0,
            mu1: mu(1.0),
        }
    }

    fn m(&self) -> f64 {
        1.0 + self.norm_d.powi(2) / self.mu1.sqrt()
    }
}

const CLOSED_FORM_TOL: f64 = 1e-12;

pub fn reproduce_webster_example() -> Result<Outcome, CliError> {
    let cf = ClosedForms::new();
    let windows = webster_windows(2.0)?;
    let cert = webster_certificate(S0Choice::Fixed(DEFAULT_S0))?;
    let m = webster_m();
    let closed = |name, value: f64, expected: f64| Comparison {
        name,
        value,
        expected,
        tolerance: CLOSED_FORM_TOL * expected.abs().max(1.0),
        pass: (value - expected).abs() <= CLOSED_FORM_TOL * expected.abs().max(1.0),
        provenance: "computed by the certificate pipeline",
        expected_provenance: "closed form evaluated independently",
    };
    let stated = |name, value: f64, expected: f64, tolerance: f64| Comparison {
        name,
        value,
        expected,
        tolerance,
        pass: (value - expected).abs() <= tolerance,
        provenance: "computed by the certificate pipeline",
        expected_provenance: "stored reference value (4 significant digits)",
    };
    let rows = vec![
        closed("delta0", windows.delta0, cf.delta0),
        closed("c", windows.c, cf.c),
        closed("eta0", windows.eta0, cf.c / cf.delta0),
        closed("norm_d", cert.norm_d, cf.norm_d),
        stated("M_R", cert.m_r, 5.451, 0.002),
        closed("M_0", cert.m_0, 2.0 / (cf.c * cf.c * cf.delta0 * cf.delta0)),
        closed("norm_ainv_bound", cert.norm_ainv_bound, cf.m() / cf.mu1.sqrt()),
        stated("M_C", cert.m_c, 17.0664, 0.002),
        stated("kappa_max", cert.kappa_max, 0.1712, 0.0005),
        closed("M", m, cf.m()),
        stated("kappa_over_M", cert.kappa_max / m, 0.1449, 0.0005),
    ];
    let pass = rows.iter().all(|r| r.pass);
    let exact = KappaCertificate::build(
        &webster_windows_exact_coefficients(),
        2.0,
        cf.norm_d,
        cert.norm_ainv_bound,
        S0Choice::Fixed(DEFAULT_S0),
    )?;
    let basis = webster_basis(2.0, 50)?;
    let d = expand(|p| 1.0 - p[0], &basis, 50, expansion_nodes(&basis, 50))?;
    let audit = audit_windows(&windows, &d);
    let exact_audit = audit_windows(&webster_windows_exact_coefficients(), &d);
    let mut csv = String::from("name,value,expected,tolerance,pass,provenance,expected_provenance\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.name, r.value, r.expected, r.tolerance, r.pass, r.provenance, r.expected_provenance
        ));
    }
    Ok(Outcome {
        stem: "webster_example",
        csv,
        report: json!({
            "command": "reproduce-webster-example",
            "setting": {"a": 2.0, "damping": "1 - x", "alpha": 2.0, "s0": DEFAULT_S0},
            "comparisons": rows,
            "certificate": cert,
            "reference_window_audit": audit,
            "exact_coefficient_certificate": exact.clone(),
            "exact_coefficient_window_audit": exact_audit,
            "exact_coefficient_kappa_over_M": exact.kappa_max / m,
            "notes": [
                "the reference windows use an envelope constant above the exact modal coefficients at n = 2; reference_window_audit lists the affected modes",
                "exact_coefficient_certificate repeats the computation with the constant from the exact coefficients",
            ],
            "pass": pass,
            "provenance": provenance(&[
                ("comparisons", "each row carries its own provenance"),
                ("certificate", "see certificate.provenance"),
                ("reference_window_audit", "first 50 modes of d = 1 - x"),
            ]),
        }),
        svg: None,
        pass,
    })
}
