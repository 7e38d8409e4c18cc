use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::marginal::SignalDistribution;
use crate::error::{Error, Result};

/// Learning weights, normalized to unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    weights: Vec<f64>,
}

impl Direction {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Argument(
                "learning direction must be finite and nonzero".into(),
            ));
        }
        Ok(Direction {
            weights: weights.into_iter().map(|w| w / norm).collect(),
        })
    }

    /// Two-good direction at `angle` radians from the first axis.
    pub fn from_angle(angle: f64) -> Self {
        Direction {
            weights: vec![angle.cos(), angle.sin()],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn negated(&self) -> Self {
        Direction {
            weights: self.weights.iter().map(|w| -w).collect(),
        }
    }

    /// Angle in `[0, π)` of a two-good direction, identifying `α` with `-α`.
    pub fn angle(&self) -> f64 {
        let mut a = self.weights[1].atan2(self.weights[0]);
        if a < 0.0 {
            a += std::f64::consts::PI;
        }
        if a >= std::f64::consts::PI {
            a -= std::f64::consts::PI;
        }
        a
    }

    /// Angle between the lines spanned by two directions, in `[0, π/2]`.
    pub fn line_angle(&self, other: &Direction) -> f64 {
        let dot: f64 = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a * b)
            .sum();
        dot.abs().min(1.0).acos()
    }

    /// Weights rescaled so that their sum is one (when the sum is nonzero).
    pub fn sum_normalized(&self) -> Vec<f64> {
        let s: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / s).collect()
    }
}

/// Posterior-mean line `θ(t) = a t + b` over `t ∈ [0, 1]` with type
/// distribution `F`.
#[derive(Debug, Clone)]
pub struct TypeLine {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub s_lo: f64,
    pub s_hi: f64,
    /// Whether `t ↦ 1 - t` was applied to reach `Σ a_i ≥ 0`.
    pub flipped: bool,
    dist: Arc<SignalDistribution>,
}

impl TypeLine {
    /// Builds a line from raw coefficients, applying the sign convention.
    pub fn new(a: Vec<f64>, b: Vec<f64>, dist: Arc<SignalDistribution>) -> Result<Self> {
        Self::with_signal_range(a, b, dist, 0.0, 1.0)
    }

    pub(crate) fn with_signal_range(
        a: Vec<f64>,
        b: Vec<f64>,
        dist: Arc<SignalDistribution>,
        s_lo: f64,
        s_hi: f64,
    ) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::Argument(format!(
                "slope and intercept lengths differ ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        let scale = a
            .iter()
            .chain(&b)
            .fold(1.0_f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        for i in 0..a.len() {
            if !(a[i].is_finite() && b[i].is_finite()) {
                return Err(Error::Argument(format!("coefficient {i} is not finite")));
            }
            if a[i].abs() <= 1e-12 * scale && b[i].abs() <= 1e-12 * scale {
                return Err(Error::Argument(format!(
                    "good {i} has a zero posterior line (a_i, b_i) = (0, 0)"
                )));
            }
            if b[i] < -tol || a[i] + b[i] < -tol {
                return Err(Error::Argument(format!(
                    "good {i} has negative posterior values on [0, 1]: a = {}, b = {}",
                    a[i], b[i]
                )));
            }
        }
        let sum: f64 = a.iter().sum();
        let (a, b, flipped) = if sum < -1e-12 * scale {
            let nb: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| ai + bi).collect();
            (a.iter().map(|x| -x).collect(), nb, true)
        } else {
            (a, b, false)
        };
        Ok(TypeLine {
            a,
            b,
            s_lo,
            s_hi,
            flipped,
            dist,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn dist(&self) -> &SignalDistribution {
        &self.dist
    }

    pub fn dist_arc(&self) -> Arc<SignalDistribution> {
        Arc::clone(&self.dist)
    }

    pub fn theta(&self, t: f64) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a * t + b).collect()
    }

    /// Slope `Σ a_i x_i` and intercept `Σ b_i x_i` of a lottery's value.
    pub fn value_line(&self, lottery: &[f64]) -> (f64, f64) {
        lottery
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(s, c), (i, x)| (s + self.a[i] * x, c + self.b[i] * x))
    }

    /// Tolerance under which a slope counts as zero.
    pub fn zero_tol(&self) -> f64 {
        1e-12 * self.a.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
    }

    /// All slopes nonnegative after the sign convention.
    pub fn is_vertical(&self) -> bool {
        let tol = self.zero_tol();
        self.a.iter().all(|&a| a >= -tol)
    }

    /// Largest value any type assigns to the grand bundle.
    pub fn value_span(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| b.max(a + b))
            .sum()
    }
}
