//! Symbolic function presets with exact derivatives and a declared
//! smoothness class. These back the perturbation and damping inputs that
//! need pointwise values, derivatives or boundary traces.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Smoothness class used for "infinitely differentiable".
pub const SMOOTH: u8 = u8::MAX;

/// A function on (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Zero,
    /// `sum_k coefficients[k] * x^k`
    Polynomial { coefficients: Vec<f64> },
    /// `sum_k coefficients[k-1] * sin(k pi x)`
    SineSeries { coefficients: Vec<f64> },
    /// `value` on `[lo, hi)`, zero elsewhere.
    Indicator { lo: f64, hi: f64, value: f64 },
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Profile::Polynomial { coefficients: vec![c] }
    }

    pub fn sine(amplitude: f64, k: usize) -> Self {
        let mut coefficients = vec![0.0; k];
        coefficients[k - 1] = amplitude;
        Profile::SineSeries { coefficients }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0).unwrap_or(0.0)
    }

    /// Derivative of order `order` (0, 1 or 2). `None` when the profile
    /// is not differentiable to that order.
    pub fn derivative(&self, x: f64, order: u8) -> Option<f64> {
        match self {
            Profile::Zero => Some(0.0),
            Profile::Polynomial { coefficients } => {
                let order = order as usize;
                // Horner on the differentiated coefficients
                let mut acc = 0.0;
                for (k, &c) in coefficients.iter().enumerate().skip(order).rev() {
                    let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
                    acc = acc * x + c * falling;
                }
                Some(acc)
            }
            Profile::SineSeries { coefficients } => {
                let mut s = 0.0;
                for (i, &c) in coefficients.iter().enumerate() {
                    let w = (i + 1) as f64 * PI;
                    s += c * match order {
                        0 => (w * x).sin(),
                        1 => w * (w * x).cos(),
                        _ => -w * w * (w * x).sin(),
                    };
                }
                Some(s)
            }
            Profile::Indicator { lo, hi, value } => {
                if order > 0 {
                    return None;
                }
                Some(if x >= *lo && x < *hi { *value } else { 0.0 })
            }
        }
    }

    /// Number of weak derivatives in L². Indicators are only L².
    pub fn smoothness(&self) -> u8 {
        match self {
            Profile::Indicator { lo, hi, value } => {
                if *value == 0.0 || (*lo <= 0.0 && *hi >= 1.0) {
                    SMOOTH
                } else {
                    0
                }
            }
            _ => SMOOTH,
        }
    }

    /// Supremum of |f| on [0, 1], sampled on 4097 points plus endpoints.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Profile::Indicator { value, .. } => value.abs(),
            _ => (0..=4096)
                .map(|i| self.value(i as f64 / 4096.0).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Scales the profile by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        match self {
            Profile::Zero => Profile::Zero,
            Profile::Polynomial { coefficients } => Profile::Polynomial {
                coefficients: coefficients.iter().map(|c| c * t).collect(),
            },
            Profile::SineSeries { coefficients } => Profile::SineSeries {
                coefficients: coefficients.iter().map(|c| c * t).collect(),
            },
            Profile::Indicator { lo, hi, value } => Profile::Indicator {
                lo: *lo,
                hi: *hi,
                value: value * t,
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Polynomial { coefficients } | Profile::SineSeries { coefficients } => {
                coefficients.iter().all(|&c| c == 0.0)
            }
            Profile::Indicator { value, lo, hi } => *value == 0.0 || lo >= hi,
        }
    }
}

/// A function on a rectangle (0, a) x (0, b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile2 {
    Constant { value: f64 },
    /// `fx(x / a) * fy(y / b)` with both factors given on (0, 1).
    Separable { x: Profile, y: Profile },
    /// `value` where `x < width`, zero elsewhere.
    Strip { width: f64, value: f64 },
}

impl Profile2 {
    /// Value at (x, y) on the rectangle with sides `a`, `b`.
    pub fn value(&self, x: f64, y: f64, a: f64, b: f64) -> f64 {
        match self {
            Profile2::Constant { value } => *value,
            Profile2::Separable { x: fx, y: fy } => fx.value(x / a) * fy.value(y / b),
            Profile2::Strip { width, value } => {
                if x < *width {
                    *value
                } else {
                    0.0
                }
            }
        }
    }

    /// Gradient at (x, y); `None` where the profile is not differentiable.
    pub fn gradient(&self, x: f64, y: f64, a: f64, b: f64) -> Option<[f64; 2]> {
        match self {
            Profile2::Constant { .. } => Some([0.0, 0.0]),
            Profile2::Separable { x: fx, y: fy } => {
                let (u, v) = (x / a, y / b);
                Some([
                    fx.derivative(u, 1)? / a * fy.value(v),
                    fx.value(u) * fy.derivative(v, 1)? / b,
                ])
            }
            Profile2::Strip { .. } => None,
        }
    }

    pub fn smoothness(&self) -> u8 {
        match self {
            Profile2::Constant { .. } => SMOOTH,
            Profile2::Separable { x, y } => x.smoothness().min(y.smoothness()),
            Profile2::Strip { .. } => 0,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Profile2::Constant { value } => value.abs(),
            Profile2::Separable { x, y } => x.sup_norm() * y.sup_norm(),
            Profile2::Strip { value, .. } => value.abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        // 1 - x + 3x^2
        let p = Profile::Polynomial { coefficients: vec![1.0, -1.0, 3.0] };
        assert_eq!(p.derivative(2.0, 0), Some(11.0));
        assert_eq!(p.derivative(2.0, 1), Some(11.0));
        assert_eq!(p.derivative(2.0, 2), Some(6.0));
    }

    #[test]
    fn sine_derivatives() {
        let s = Profile::sine(2.0, 1);
        let x = 0.3;
        assert!((s.derivative(x, 1).unwrap() - 2.0 * PI * (PI * x).cos()).abs() < 1e-14);
        assert!((s.derivative(x, 2).unwrap() + 2.0 * PI * PI * (PI * x).sin()).abs() < 1e-13);
    }

    #[test]
    fn indicator_is_rough() {
        let i = Profile::Indicator { lo: 0.2, hi: 0.5, value: 1.0 };
        assert_eq!(i.smoothness(), 0);
        assert_eq!(i.derivative(0.3, 1), None);
        assert_eq!(i.value(0.3), 1.0);
        assert_eq!(i.value(0.6), 0.0);
    }
}
