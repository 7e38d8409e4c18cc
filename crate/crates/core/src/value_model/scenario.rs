use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// The primitive market: `k` goods whose values follow a Gaussian with means
/// `mu`, standard deviations `sigma` and common pairwise correlation `rho`,
/// truncated to the Mahalanobis ball of the given `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub k: usize,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rho: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    1.0
}

impl Scenario {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, rho: f64, radius: f64) -> Result<Self> {
        let scenario = Scenario {
            k: mu.len(),
            mu,
            sigma,
            rho,
            radius,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Same means and scales, with the largest radius that keeps the
    /// truncation ellipsoid inside the nonnegative orthant.
    pub fn fit_radius(mu: Vec<f64>, sigma: Vec<f64>, rho: f64) -> Result<Self> {
        let radius = mu
            .iter()
            .zip(&sigma)
            .map(|(m, s)| m / s)
            .fold(f64::INFINITY, f64::min);
        Self::new(mu, sigma, rho, radius)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::scenario("k", "at least two goods are required"));
        }
        if self.mu.len() != self.k {
            return Err(Error::scenario(
                "mu",
                format!("expected {} entries, found {}", self.k, self.mu.len()),
            ));
        }
        if self.sigma.len() != self.k {
            return Err(Error::scenario(
                "sigma",
                format!("expected {} entries, found {}", self.k, self.sigma.len()),
            ));
        }
        if let Some(i) = self.mu.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::scenario("mu", format!("entry {i} must be positive")));
        }
        if let Some(i) = self.sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::scenario("sigma", format!("entry {i} must be positive")));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::scenario("rho", "correlation must lie in (-1, 1)"));
        }
        if 1.0 + self.rho * (self.k as f64 - 1.0) <= 0.0 {
            return Err(Error::scenario(
                "rho",
                "covariance is not positive definite (need 1 + rho(k-1) > 0)",
            ));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::scenario("radius", "must be positive"));
        }
        for i in 0..self.k {
            let low = self.mu[i] - self.radius * self.sigma[i];
            if low < -1e-12 * self.mu[i].max(1.0) {
                return Err(Error::scenario(
                    "radius",
                    format!(
                        "support leaves the nonnegative orthant for good {i} \
                         (mu - radius*sigma = {low:.6}); largest admissible radius is {:.6}",
                        self.mu.iter().zip(&self.sigma).map(|(m, s)| m / s).fold(f64::INFINITY, f64::min)
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Untruncated covariance matrix.
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| {
            if i == j {
                self.sigma[i] * self.sigma[i]
            } else {
                self.rho * self.sigma[i] * self.sigma[j]
            }
        })
    }

    pub fn is_exchangeable(&self) -> bool {
        let close = |xs: &[f64]| xs.iter().all(|x| (x - xs[0]).abs() <= 1e-12 * xs[0].abs().max(1.0));
        close(&self.mu) && close(&self.sigma)
    }

    /// Parses the key-value scenario document, naming the offending field on
    /// failure.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::parse("<document>", e.to_string()))?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::parse("<document>", "expected a JSON object"))?;

        let number = |field: &str| -> Result<f64> {
            obj.get(field)
                .ok_or_else(|| Error::parse(field, "missing"))?
                .as_f64()
                .ok_or_else(|| Error::parse(field, "expected a number"))
        };
        let vector = |field: &str| -> Result<Vec<f64>> {
            let arr = obj
                .get(field)
                .ok_or_else(|| Error::parse(field, "missing"))?
                .as_array()
                .ok_or_else(|| Error::parse(field, "expected an array of numbers"))?;
            arr.iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_f64()
                        .ok_or_else(|| Error::parse(field, format!("entry {i} is not a number")))
                })
                .collect()
        };

        let mu = vector("mu")?;
        let sigma = vector("sigma")?;
        let k = match obj.get("k") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| Error::parse("k", "expected a positive integer"))?
                as usize,
            None => mu.len(),
        };
        let rho = number("rho")?;
        let radius = match obj.get("radius") {
            Some(_) => number("radius")?,
            None => default_radius(),
        };
        let scenario = Scenario {
            k,
            mu,
            sigma,
            rho,
            radius,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names_the_bad_field() {
        let err = Scenario::from_json_str(r#"{"k":2,"mu":[2,"x"],"sigma":[2,2],"rho":0}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "mu"), "{err}");

        let err = Scenario::from_json_str(r#"{"k":2,"mu":[2,2],"sigma":[2,2]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "rho"), "{err}");

        let err =
            Scenario::from_json_str(r#"{"k":3,"mu":[2,2],"sigma":[2,2],"rho":0}"#).unwrap_err();
        assert!(matches!(err, Error::Scenario { ref field, .. } if field == "mu"), "{err}");
    }

    #[test]
    fn radius_defaults_to_one() {
        let s = Scenario::from_json_str(r#"{"k":2,"mu":[2,2],"sigma":[2,2],"rho":0}"#).unwrap();
        assert_eq!(s.radius, 1.0);
        let back = Scenario::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn support_must_stay_nonnegative() {
        let err = Scenario::new(vec![2.0, 2.0], vec![4.0, 4.0], -0.4, 1.0).unwrap_err();
        assert!(matches!(err, Error::Scenario { ref field, .. } if field == "radius"));
        let fitted = Scenario::fit_radius(vec![2.0, 2.0], vec![4.0, 4.0], -0.4).unwrap();
        assert!((fitted.radius - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        assert!(Scenario::new(vec![3.0; 3], vec![1.0; 3], -0.6, 1.0).is_err());
        assert!(Scenario::new(vec![3.0; 3], vec![1.0; 3], -0.4, 1.0).is_ok());
    }
}
