//! Run configuration: JSON, unknown keys rejected, validated against the
//! selected model before any numerics run.

use std::path::Path;

use polystab_core::acoustic_model::AcousticPerturbation;
use polystab_core::profile::{Profile, Profile2};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Webster,
    Rectangle,
    Acoustic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Webster flare rate, or rectangle width.
    pub a: Option<f64>,
    /// Rectangle height.
    pub b: Option<f64>,
    /// Acoustic spring constant.
    pub k: Option<f64>,
    /// Acoustic boundary damping.
    pub d: Option<f64>,
    /// Number of modes (grid cells for the acoustic model).
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub damping: Option<DampingSpec>,
    /// Shape depends on the model; parsed by [`RunConfig::modal_perturbation`]
    /// or [`RunConfig::acoustic_perturbation`].
    pub perturbation: Option<serde_json::Value>,
    pub bounds: Option<BoundsSpec>,
    pub check: Option<CheckSpec>,
    pub sweep: Option<SweepSpec>,
    pub simulate: Option<SimulateSpec>,
    pub seed: Option<u64>,
    #[serde(default = "default_true")]
    pub plot: bool,
}

fn default_true() -> bool {
    true
}

/// Damping term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingSpec {
    /// `d <w_t, d>` with `d` given as a profile on (0, 1).
    WeakRankOne { profile: Profile },
    /// `d <w_t, d>` with `d` given by normalized modal coefficients.
    WeakModal { coefficients: Vec<f64> },
    /// `d(x) w_t` on the interval.
    Viscous { profile: Profile },
    /// `d(x, y) w_t` on the rectangle.
    ViscousRect { profile: Profile2 },
}

/// A perturbation component: modal coefficients or a symbolic preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// Coefficients against the normalized eigenfunctions.
    Modal { coefficients: Vec<f64> },
    Zero,
    Polynomial { coefficients: Vec<f64> },
    SineSeries { coefficients: Vec<f64> },
    Indicator { lo: f64, hi: f64, value: f64 },
    /// Rectangle only: `x(x/a) y(y/b)`.
    Separable { x: Profile, y: Profile },
}

impl FunctionSpec {
    /// The one-dimensional preset, if this is one.
    pub fn profile(&self) -> Option<Profile> {
        match self {
            FunctionSpec::Zero => Some(Profile::Zero),
            FunctionSpec::Polynomial { coefficients } => Some(Profile::Polynomial {
                coefficients: coefficients.clone(),
            }),
            FunctionSpec::SineSeries { coefficients } => Some(Profile::SineSeries {
                coefficients: coefficients.clone(),
            }),
            FunctionSpec::Indicator { lo, hi, value } => Some(Profile::Indicator {
                lo: *lo,
                hi: *hi,
                value: *value,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub b: FunctionSpec,
    pub c1: FunctionSpec,
    pub c2: FunctionSpec,
}

/// Perturbation for the modal (Webster and rectangle) models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalPerturbationSpec {
    pub terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowChoice {
    /// Closed-form Webster windows (`a = 2`, `d = 1 - x`) with the stored reference constant.
    Reference,
    /// Closed-form Webster windows with the constant from exact coefficients.
    Exact,
    /// Windows from eigenvalue gaps and modal damping coefficients.
    Gap,
}

/// A number or a keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberOr {
    Number(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub windows: Option<WindowChoice>,
    /// A positive number or `"optimize"`.
    pub s0: Option<NumberOr>,
    pub delta_cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckerKind {
    RankOne,
    WebsterRankOne,
    FiniteRank,
    HilbertSchmidt,
    AlmostDissipative,
    AcousticBg11,
    AcousticB2g0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub checker: Option<CheckerKind>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    /// A positive number, `"certificate"` or `"estimate"`.
    pub kappa: Option<NumberOr>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub quad_nodes: Option<usize>,
    /// Also assemble the perturbed truncation and check its spectrum.
    #[serde(default)]
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub step: Option<f64>,
    pub power: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub t_max: Option<f64>,
    pub steps: Option<usize>,
    pub smoothness: Option<usize>,
}

pub const DEFAULT_SWEEP: (f64, f64, f64) = (1.0, 50.0, 0.05);
pub const DEFAULT_T_MAX: f64 = 1000.0;
pub const DEFAULT_STEPS: usize = 1 << 20;

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be a finite number > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let only = |name: &str, set: bool, models: &[ModelKind]| -> Result<(), CliError> {
            if set && !models.contains(&self.model) {
                return Err(CliError::Config(format!("key `{name}` does not apply to model {:?}", self.model)));
            }
            Ok(())
        };
        only("a", self.a.is_some(), &[ModelKind::Webster, ModelKind::Rectangle])?;
        only("b", self.b.is_some(), &[ModelKind::Rectangle])?;
        only("k", self.k.is_some(), &[ModelKind::Acoustic])?;
        only("d", self.d.is_some(), &[ModelKind::Acoustic])?;
        only("damping", self.damping.is_some(), &[ModelKind::Webster, ModelKind::Rectangle])?;
        match self.model {
            ModelKind::Webster => {
                let a = self.a();
                if !(a.is_finite() && a >= 0.0) {
                    return Err(CliError::Config(format!("a must be >= 0, got {a}")));
                }
            }
            ModelKind::Rectangle => {
                positive("a", self.a())?;
                positive("b", self.b.unwrap_or(1.0))?;
            }
            ModelKind::Acoustic => {
                positive("k", self.k.unwrap_or(1.0))?;
                positive("d", self.d.unwrap_or(1.0))?;
            }
        }
        if self.modes() == 0 {
            return Err(CliError::Config("N must be >= 1".into()));
        }
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if let Some(s) = &self.sweep {
            let (lo, hi, step) = self.sweep_grid();
            if !(lo >= 0.0 && hi > lo && step > 0.0 && lo.is_finite() && hi.is_finite()) {
                return Err(CliError::Config(format!("sweep grid [{lo}, {hi}] step {step} is invalid")));
            }
            if s.power.unwrap_or(0) > 2 {
                return Err(CliError::Config("sweep power must be 0, 1 or 2".into()));
            }
        }
        if self.simulate.is_some() {
            positive("simulate.t_max", self.t_max())?;
            if self.smoothness() == 0 || self.steps() == 0 {
                return Err(CliError::Config("simulate.smoothness and simulate.steps must be >= 1".into()));
            }
        }
        if let Some(NumberOr::Keyword(k)) = self.bounds.as_ref().and_then(|b| b.s0.clone()) {
            if k != "optimize" {
                return Err(CliError::Config(format!("bounds.s0 must be a number or \"optimize\", got {k:?}")));
            }
        }
        if let Some(NumberOr::Keyword(k)) = self.check.as_ref().and_then(|c| c.kappa.clone()) {
            if k != "certificate" && k != "estimate" {
                return Err(CliError::Config(format!(
                    "check.kappa must be a number, \"certificate\" or \"estimate\", got {k:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn a(&self) -> f64 {
        self.a.unwrap_or(match self.model {
            ModelKind::Webster => 2.0,
            _ => 1.0,
        })
    }

    pub fn b(&self) -> f64 {
        self.b.unwrap_or(1.0)
    }

    pub fn k(&self) -> f64 {
        self.k.unwrap_or(1.0)
    }

    pub fn d(&self) -> f64 {
        self.d.unwrap_or(1.0)
    }

    pub fn modes(&self) -> usize {
        self.n.unwrap_or(match self.model {
            ModelKind::Webster => 200,
            ModelKind::Rectangle => 100,
            ModelKind::Acoustic => 256,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(2.0)
    }

    /// The configured damping, or `d = 1 - x` (weak) for the Webster model.
    pub fn damping(&self) -> Option<DampingSpec> {
        self.damping.clone().or_else(|| match self.model {
            ModelKind::Webster => Some(DampingSpec::WeakRankOne {
                profile: Profile::Polynomial { coefficients: vec![1.0, -1.0] },
            }),
            _ => None,
        })
    }

    /// True for the Webster model with `a = 2` and the default damping.
    pub fn is_reference_webster(&self) -> bool {
        self.model == ModelKind::Webster
            && self.a() == 2.0
            && self.damping()
                == Some(DampingSpec::WeakRankOne {
                    profile: Profile::Polynomial { coefficients: vec![1.0, -1.0] },
                })
    }

    pub fn modal_perturbation(&self) -> Result<Option<ModalPerturbationSpec>, CliError> {
        self.perturbation
            .clone()
            .map(|v| serde_json::from_value(v).map_err(|e| CliError::Config(format!("perturbation: {e}"))))
            .transpose()
    }

    pub fn acoustic_perturbation(&self) -> Result<Option<AcousticPerturbation>, CliError> {
        self.perturbation
            .clone()
            .map(|v| serde_json::from_value(v).map_err(|e| CliError::Config(format!("perturbation: {e}"))))
            .transpose()
    }

    pub fn sweep_grid(&self) -> (f64, f64, f64) {
        let s = self.sweep.clone().unwrap_or(SweepSpec { s_min: None, s_max: None, step: None, power: None });
        (
            s.s_min.unwrap_or(DEFAULT_SWEEP.0),
            s.s_max.unwrap_or(DEFAULT_SWEEP.1),
            s.step.unwrap_or(DEFAULT_SWEEP.2),
        )
    }

    pub fn sweep_power(&self) -> usize {
        self.sweep.as_ref().and_then(|s| s.power).unwrap_or(0)
    }

    pub fn t_max(&self) -> f64 {
        self.simulate.as_ref().and_then(|s| s.t_max).unwrap_or(DEFAULT_T_MAX)
    }

    pub fn steps(&self) -> usize {
        self.simulate.as_ref().and_then(|s| s.steps).unwrap_or(DEFAULT_STEPS)
    }

    pub fn smoothness(&self) -> usize {
        self.simulate.as_ref().and_then(|s| s.smoothness).unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_webster_config() {
        let c = RunConfig::parse(r#"{"model": "webster"}"#).unwrap();
        assert_eq!(c.a(), 2.0);
        assert_eq!(c.modes(), 200);
        assert!(c.is_reference_webster());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse(r#"{"model": "webster", "flare": 2}"#).is_err());
        assert!(RunConfig::parse(r#"{"model": "webster", "sweep": {"s_max": 5, "grid": 1}}"#).is_err());
    }

    #[test]
    fn negative_parameters_are_rejected() {
        assert!(RunConfig::parse(r#"{"model": "webster", "a": -1}"#).is_err());
        assert!(RunConfig::parse(r#"{"model": "acoustic", "k": 0}"#).is_err());
        assert!(RunConfig::parse(r#"{"model": "rectangle", "b": -2}"#).is_err());
        assert!(RunConfig::parse(r#"{"model": "acoustic", "a": 1}"#).is_err());
    }

    #[test]
    fn keywords_are_validated() {
        assert!(RunConfig::parse(r#"{"model": "webster", "bounds": {"s0": "best"}}"#).is_err());
        assert!(RunConfig::parse(r#"{"model": "webster", "bounds": {"s0": "optimize"}}"#).is_ok());
        assert!(RunConfig::parse(r#"{"model": "webster", "check": {"kappa": "guess"}}"#).is_err());
    }

    #[test]
    fn acoustic_perturbation_shape() {
        let c = RunConfig::parse(
            r#"{"model": "acoustic", "perturbation": {"b2": {"kind": "sine_series", "coefficients": [0.01]},
                "c1": {"kind": "zero"}, "c2": {"kind": "zero"}, "c3": [0.1, 0.0]}}"#,
        )
        .unwrap();
        let p = c.acoustic_perturbation().unwrap().unwrap();
        assert_eq!(p.c3.re, 0.1);
        assert!(c.modal_perturbation().is_err());
    }
}
