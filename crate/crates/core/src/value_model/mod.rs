//! Truncated elliptical values, signal marginals and posterior-mean lines.

mod line;
mod marginal;
mod scenario;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use line::{Direction, TypeLine};
pub use marginal::{SignalDistribution, QUANTILE_GRID};
pub use scenario::Scenario;

use crate::error::{Error, Result};

/// A validated scenario together with its covariance and the shared signal
/// distribution. Immutable once built.
#[derive(Debug, Clone)]
pub struct ValueModel {
    scenario: Scenario,
    cov: DMatrix<f64>,
    dist: Arc<SignalDistribution>,
}

impl ValueModel {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let cov = scenario.covariance();
        if cov.clone().cholesky().is_none() {
            return Err(Error::scenario("rho", "covariance is not positive definite"));
        }
        let dist = Arc::new(SignalDistribution::new(scenario.k, scenario.radius)?);
        Ok(ValueModel {
            scenario,
            cov,
            dist,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn k(&self) -> usize {
        self.scenario.k
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Distribution of the normalized type for `direction`. After whitening
    /// every direction induces the same distribution.
    pub fn signal_marginal(&self, direction: &Direction) -> Result<Arc<SignalDistribution>> {
        self.check_dim(direction)?;
        Ok(Arc::clone(&self.dist))
    }

    pub fn dist(&self) -> &Arc<SignalDistribution> {
        &self.dist
    }

    fn check_dim(&self, direction: &Direction) -> Result<()> {
        if direction.dim() != self.k() {
            return Err(Error::Argument(format!(
                "direction has {} weights, scenario has {} goods",
                direction.dim(),
                self.k()
            )));
        }
        Ok(())
    }

    /// `Cov(v_k, α·v)` for every good.
    pub fn signal_covariances(&self, direction: &Direction) -> Vec<f64> {
        let alpha = DVector::from_column_slice(direction.weights());
        (&self.cov * alpha).iter().copied().collect()
    }

    /// Flips `α` if no good covaries positively with the signal.
    pub fn canonical(&self, direction: &Direction) -> Direction {
        let cov = self.signal_covariances(direction);
        let scale = cov.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        if cov.iter().any(|&c| c > 1e-12 * scale) {
            direction.clone()
        } else {
            direction.negated()
        }
    }

    /// Every good's posterior mean moves weakly with the signal (up to a
    /// global sign).
    pub fn is_vertical(&self, direction: &Direction) -> bool {
        let cov = self.signal_covariances(direction);
        let tol = 1e-12 * cov.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        cov.iter().all(|&c| c >= -tol) || cov.iter().all(|&c| c <= tol)
    }

    /// Raw (unflipped) slope and intercept of the posterior-mean line, with
    /// `t` increasing in the signal.
    pub fn raw_line(&self, direction: &Direction) -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
        self.check_dim(direction)?;
        let cov = self.signal_covariances(direction);
        let var: f64 = cov
            .iter()
            .zip(direction.weights())
            .map(|(c, w)| c * w)
            .sum();
        if !(var > 0.0) {
            return Err(Error::Argument("signal has zero variance".into()));
        }
        let sd = var.sqrt();
        let r = self.scenario.radius;
        let mean_signal: f64 = direction
            .weights()
            .iter()
            .zip(&self.scenario.mu)
            .map(|(w, m)| w * m)
            .sum();
        let a: Vec<f64> = cov.iter().map(|c| 2.0 * r * c / sd).collect();
        let b: Vec<f64> = cov
            .iter()
            .zip(&self.scenario.mu)
            .map(|(c, m)| m - r * c / sd)
            .collect();
        Ok((a, b, mean_signal - r * sd, mean_signal + r * sd))
    }

    /// Posterior-mean line for `direction` under the sign convention.
    pub fn posterior_line(&self, direction: &Direction) -> Result<TypeLine> {
        let direction = self.canonical(direction);
        let (a, b, s_lo, s_hi) = self.raw_line(&direction)?;
        TypeLine::with_signal_range(a, b, Arc::clone(&self.dist), s_lo, s_hi)
    }

    /// Marginal distribution of the value of good `i`.
    pub fn coordinate_marginal(&self, i: usize) -> Result<CoordinateMarginal> {
        if i >= self.k() {
            return Err(Error::Argument(format!(
                "good index {i} out of range for {} goods",
                self.k()
            )));
        }
        let half_width = self.scenario.radius * self.scenario.sigma[i];
        Ok(CoordinateMarginal {
            lo: self.scenario.mu[i] - half_width,
            width: 2.0 * half_width,
            dist: Arc::clone(&self.dist),
        })
    }
}

/// Marginal of one coordinate `v_i = lo + width · t`, `t ~ F`.
#[derive(Debug, Clone)]
pub struct CoordinateMarginal {
    lo: f64,
    width: f64,
    dist: Arc<SignalDistribution>,
}

impl CoordinateMarginal {
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.lo + self.width)
    }

    pub fn mean(&self) -> f64 {
        self.lo + 0.5 * self.width
    }

    pub fn pdf(&self, v: f64) -> f64 {
        self.dist.pdf((v - self.lo) / self.width) / self.width
    }

    pub fn cdf(&self, v: f64) -> f64 {
        self.dist.cdf((v - self.lo) / self.width)
    }

    /// `E[max(v - p, 0)]`, exact up to the partial-moment tables.
    pub fn call_value(&self, p: f64) -> f64 {
        let c = ((p - self.lo) / self.width).clamp(0.0, 1.0);
        let m0 = self.dist.m0(c, 1.0);
        let m1 = self.dist.m1(c, 1.0);
        self.lo * m0 + self.width * m1 - p * m0
    }

    pub fn expect<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.dist.expect(|t| h(self.lo + self.width * t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn intro() -> ValueModel {
        ValueModel::new(Scenario::new(vec![2.0, 2.0], vec![2.0, 2.0], 0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn horizontal_intro_line() {
        let m = intro();
        let line = m.posterior_line(&Direction::new(vec![1.0, -1.0]).unwrap()).unwrap();
        let w = 2.0 * 2f64.sqrt();
        assert_abs_diff_eq!(line.a[0], w, epsilon = 1e-12);
        assert_abs_diff_eq!(line.a[1], -w, epsilon = 1e-12);
        assert_abs_diff_eq!(line.b[0], 2.0 - 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(line.b[1], 2.0 + 2f64.sqrt(), epsilon = 1e-12);
        // Posterior slope per unit of signal is (Σα)_k / αᵀΣα.
        let slope = line.a[0] / (line.s_hi - line.s_lo);
        assert_abs_diff_eq!(slope, 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(!line.is_vertical());
    }

    #[test]
    fn vertical_intro_line() {
        let m = intro();
        let line = m.posterior_line(&Direction::new(vec![1.0, 1.0]).unwrap()).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(line.a[i], 2.0 * 2f64.sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(line.b[i], 2.0 - 2f64.sqrt(), epsilon = 1e-12);
            assert_abs_diff_eq!(line.a[i] / (line.s_hi - line.s_lo), 0.5f64.sqrt(), epsilon = 1e-12);
        }
        assert!(line.is_vertical());
    }

    #[test]
    fn negative_correlation_slope() {
        let m = ValueModel::new(
            Scenario::new(vec![2.0, 2.0], vec![2.0, 2.0], -0.9, 1.0).unwrap(),
        )
        .unwrap();
        let line = m.posterior_line(&Direction::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(line.a[1] / line.a[0], -0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(line.a[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(line.b[1], 3.8, epsilon = 1e-12);
    }

    #[test]
    fn coordinate_marginal_basics() {
        let m = intro();
        let c = m.coordinate_marginal(0).unwrap();
        assert_eq!(c.support(), (0.0, 4.0));
        assert_abs_diff_eq!(c.expect(|v| v), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.call_value(0.0), 2.0, epsilon = 1e-12);
        let n = 200_000;
        let direct: f64 = (0..n)
            .map(|j| {
                let v = 4.0 * (j as f64 + 0.5) / n as f64;
                (v - 1.0).max(0.0) * c.pdf(v) * 4.0 / n as f64
            })
            .sum();
        assert_abs_diff_eq!(c.call_value(1.0), direct, epsilon = 1e-7);
        assert!(m.coordinate_marginal(2).is_err());
    }

    #[test]
    fn canonical_sign_and_vertical_flag() {
        let m = intro();
        let d = Direction::new(vec![-1.0, -1.0]).unwrap();
        assert_eq!(m.canonical(&d).weights(), Direction::new(vec![1.0, 1.0]).unwrap().weights());
        assert!(m.is_vertical(&d));
        assert!(!m.is_vertical(&Direction::new(vec![1.0, -0.5]).unwrap()));
    }
}
