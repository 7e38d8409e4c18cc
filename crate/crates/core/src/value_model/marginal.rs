//! One-dimensional signal distribution shared by every learning direction.
//!
//! After whitening, the truncated values are a standard normal vector `z`
//! restricted to the ball `|z| <= r`. Any linear signal is an affine image of
//! `u = w . z` for a unit vector `w`, whose density is
//!
//! ```text
//! g(u) ∝ φ(u) · P((K-1)/2, (r² - u²)/2),    u ∈ [-r, r]
//! ```
//!
//! where `P` is the regularized lower incomplete gamma function (the mass of
//! the remaining `K-1` coordinates inside the slice). Types are `t = (u+r)/2r`.
//!
//! Integrals are taken in the angle `ψ` with `u = r sin ψ`. The slice mass
//! behaves like `(r² - u²)^((K-1)/2)` at the endpoints, so the integrand
//! `g(r sin ψ) r cos ψ` is smooth in `ψ` and cumulative tables built on a
//! uniform `ψ` grid interpolate to near machine precision with cubic Hermite
//! pieces (the derivative is known exactly).

use std::f64::consts::{FRAC_PI_2, PI};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};

const TABLE_INTERVALS: usize = 2048;
const PANEL_NODES: usize = 8;
const NORMALIZATION_NODES: usize = 512;
/// Number of uniform quantile steps cached for ironing.
pub const QUANTILE_GRID: usize = 4096;

/// Distribution `F` of the normalized type `t ∈ [0, 1]`.
#[derive(Debug, Clone)]
pub struct SignalDistribution {
    dim: usize,
    radius: f64,
    norm: f64,
    step: f64,
    cdf: Vec<f64>,
    dcdf: Vec<f64>,
    mom: Vec<f64>,
    dmom: Vec<f64>,
    quad_t: Vec<f64>,
    quad_w: Vec<f64>,
    quantiles: Vec<f64>,
}

impl SignalDistribution {
    /// Builds `F` for `dim` goods truncated at Mahalanobis `radius`.
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Argument(
                "signal marginal needs at least two goods".into(),
            ));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Argument(format!("radius must be positive, got {radius}")));
        }

        let raw = |psi: f64| -> f64 {
            let u = radius * psi.sin();
            let c = psi.cos().max(0.0);
            slice_density(dim, radius, u) * radius * c
        };

        let step = PI / TABLE_INTERVALS as f64;
        let panel = GaussLegendre::new(NonZeroUsize::new(PANEL_NODES).unwrap());
        let mut cdf = vec![0.0; TABLE_INTERVALS + 1];
        let mut mom = vec![0.0; TABLE_INTERVALS + 1];
        for j in 0..TABLE_INTERVALS {
            let lo = -FRAC_PI_2 + j as f64 * step;
            let hi = lo + step;
            let mass = panel.integrate(lo, hi, raw);
            let first = panel.integrate(lo, hi, |psi| psi_to_t(psi) * raw(psi));
            cdf[j + 1] = cdf[j] + mass;
            mom[j + 1] = mom[j] + first;
        }

        let rule = GaussLegendre::new(NonZeroUsize::new(NORMALIZATION_NODES).unwrap());
        let norm = rule.integrate(-FRAC_PI_2, FRAC_PI_2, raw);
        let tabulated = cdf[TABLE_INTERVALS];
        if !(norm.is_finite() && norm > 0.0) || ((tabulated - norm) / norm).abs() > 1e-10 {
            return Err(Error::numeric(
                "value_model",
                format!(
                    "signal density failed to normalize: panel total {tabulated:e}, \
                     {NORMALIZATION_NODES}-node total {norm:e}"
                ),
            ));
        }

        for v in cdf.iter_mut() {
            *v /= norm;
        }
        for v in mom.iter_mut() {
            *v /= norm;
        }
        // Enforce exact symmetry about t = 1/2.
        let n = TABLE_INTERVALS;
        let sym: Vec<f64> = (0..=n).map(|j| 0.5 * (cdf[j] + 1.0 - cdf[n - j])).collect();
        let cdf = sym;
        // E[t] = 1/2 exactly.
        let total = mom[n];
        let mom: Vec<f64> = mom.iter().map(|m| m * 0.5 / total).collect();

        let dcdf: Vec<f64> = (0..=n)
            .map(|j| raw(-FRAC_PI_2 + j as f64 * step) / norm)
            .collect();
        let dmom: Vec<f64> = (0..=n)
            .map(|j| {
                let psi = -FRAC_PI_2 + j as f64 * step;
                psi_to_t(psi) * dcdf[j]
            })
            .collect();

        let (quad_t, quad_w): (Vec<f64>, Vec<f64>) = rule
            .nodes()
            .zip(rule.weights())
            .map(|(x, w)| {
                let psi = FRAC_PI_2 * x;
                (psi_to_t(psi), FRAC_PI_2 * w * raw(psi) / norm)
            })
            .unzip();

        let mut dist = SignalDistribution {
            dim,
            radius,
            norm,
            step,
            cdf,
            dcdf,
            mom,
            dmom,
            quad_t,
            quad_w,
            quantiles: Vec::new(),
        };
        dist.quantiles = (0..=QUANTILE_GRID)
            .map(|j| dist.quantile(j as f64 / QUANTILE_GRID as f64))
            .collect();
        Ok(dist)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Density of `t` on `[0, 1]`.
    pub fn pdf(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let u = self.radius * (2.0 * t - 1.0);
        slice_density(self.dim, self.radius, u) * 2.0 * self.radius / self.norm
    }

    /// Density of the whitened signal coordinate `u ∈ [-r, r]`.
    pub fn pdf_u(&self, u: f64) -> f64 {
        if u.abs() > self.radius {
            return 0.0;
        }
        slice_density(self.dim, self.radius, u) / self.norm
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        if t > 0.5 {
            return 1.0 - self.lower_cdf(1.0 - t);
        }
        self.lower_cdf(t)
    }

    /// Survival function `1 - F(t)`, accurate near `t = 1`.
    pub fn sf(&self, t: f64) -> f64 {
        self.cdf(1.0 - t)
    }

    fn lower_cdf(&self, t: f64) -> f64 {
        let psi = t_to_psi(t);
        self.hermite(&self.cdf, &self.dcdf, psi)
    }

    fn hermite(&self, values: &[f64], slopes: &[f64], psi: f64) -> f64 {
        let x = (psi + FRAC_PI_2) / self.step;
        let j = (x.floor() as usize).min(TABLE_INTERVALS - 1);
        let s = x - j as f64;
        let h = self.step;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * values[j]
            + (s3 - 2.0 * s2 + s) * h * slopes[j]
            + (-2.0 * s3 + 3.0 * s2) * values[j + 1]
            + (s3 - s2) * h * slopes[j + 1]
    }

    /// Quantile function `F⁻¹(q)`.
    pub fn quantile(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        if q >= 1.0 {
            return 1.0;
        }
        if q > 0.5 {
            return 1.0 - self.lower_quantile(1.0 - q);
        }
        self.lower_quantile(q)
    }

    fn lower_quantile(&self, q: f64) -> f64 {
        let j = match self
            .cdf
            .binary_search_by(|v| v.partial_cmp(&q).expect("finite table"))
        {
            Ok(j) => return psi_to_t(-FRAC_PI_2 + j as f64 * self.step),
            Err(j) => j.saturating_sub(1).min(TABLE_INTERVALS - 1),
        };
        let lo_psi = -FRAC_PI_2 + j as f64 * self.step;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut s = if self.cdf[j + 1] > self.cdf[j] {
            (q - self.cdf[j]) / (self.cdf[j + 1] - self.cdf[j])
        } else {
            0.5
        };
        for _ in 0..60 {
            let psi = lo_psi + s * self.step;
            let value = self.hermite(&self.cdf, &self.dcdf, psi) - q;
            if value.abs() < 1e-17 {
                break;
            }
            if value > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let slope = self.hermite_slope(j, s);
            let newton = s - value / slope;
            s = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        psi_to_t(lo_psi + s * self.step)
    }

    /// dF/ds of the Hermite piece on interval `j` at local coordinate `s`.
    fn hermite_slope(&self, j: usize, s: f64) -> f64 {
        let h = self.step;
        let s2 = s * s;
        (6.0 * s2 - 6.0 * s) * self.cdf[j]
            + (3.0 * s2 - 4.0 * s + 1.0) * h * self.dcdf[j]
            + (-6.0 * s2 + 6.0 * s) * self.cdf[j + 1]
            + (3.0 * s2 - 2.0 * s) * h * self.dcdf[j + 1]
    }

    /// `F(u) - F(l)`.
    pub fn m0(&self, l: f64, u: f64) -> f64 {
        let (l, u) = (l.clamp(0.0, 1.0), u.clamp(0.0, 1.0));
        if u <= l {
            return 0.0;
        }
        if l >= 0.5 {
            (self.sf(l) - self.sf(u)).max(0.0)
        } else {
            (self.cdf(u) - self.cdf(l)).max(0.0)
        }
    }

    /// `∫ₗᵘ t f(t) dt`.
    pub fn m1(&self, l: f64, u: f64) -> f64 {
        let (l, u) = (l.clamp(0.0, 1.0), u.clamp(0.0, 1.0));
        if u <= l {
            return 0.0;
        }
        (self.moment(u) - self.moment(l)).max(0.0)
    }

    fn moment(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 0.5;
        }
        self.hermite(&self.mom, &self.dmom, t_to_psi(t))
    }

    /// `E[h(t)]` by the fixed Gauss–Legendre rule.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.quad_t
            .iter()
            .zip(&self.quad_w)
            .map(|(&t, &w)| w * h(t))
            .sum()
    }

    /// `t` at the uniform quantile levels `j / QUANTILE_GRID`.
    pub fn quantile_grid(&self) -> &[f64] {
        &self.quantiles
    }
}

fn psi_to_t(psi: f64) -> f64 {
    0.5 * (1.0 + psi.sin())
}

fn t_to_psi(t: f64) -> f64 {
    (2.0 * t - 1.0).clamp(-1.0, 1.0).asin()
}

/// Unnormalized density of the whitened signal: standard normal density
/// times the chi-square mass of the orthogonal complement inside the slice.
fn slice_density(dim: usize, radius: f64, u: f64) -> f64 {
    let rem = 0.5 * (radius * radius - u * u);
    if rem <= 0.0 {
        return 0.0;
    }
    let phi = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    let mass = if dim == 2 {
        erf(rem.sqrt())
    } else {
        gamma_lr(0.5 * (dim as f64 - 1.0), rem)
    };
    phi * mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn endpoints_vanish_and_median_is_half() {
        for &(k, r) in &[(2, 1.0), (3, 1.0), (2, 0.5), (4, 2.0)] {
            let d = SignalDistribution::new(k, r).unwrap();
            assert_eq!(d.pdf(0.0), 0.0);
            assert_eq!(d.pdf(1.0), 0.0);
            assert_abs_diff_eq!(d.cdf(0.5), 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(d.m1(0.0, 1.0), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn cdf_matches_direct_quadrature() {
        let d = SignalDistribution::new(2, 1.0).unwrap();
        let rule = GaussLegendre::new(NonZeroUsize::new(200).unwrap());
        for &t in &[0.01, 0.1, 0.3, 0.5, 0.77, 0.999] {
            let direct = rule.integrate(0.0, t, |s| d.pdf(s));
            // The density has a square-root edge at 0, so the direct rule is
            // only good to ~1e-7 here.
            assert_abs_diff_eq!(d.cdf(t), direct, epsilon = 2e-7);
        }
    }

    #[test]
    fn pdf_is_derivative_of_cdf() {
        let d = SignalDistribution::new(3, 1.0).unwrap();
        for &t in &[0.05, 0.2, 0.5, 0.64, 0.9] {
            let h = 1e-6;
            let fd = (d.cdf(t + h) - d.cdf(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, d.pdf(t), epsilon = 1e-6);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = SignalDistribution::new(2, 1.0).unwrap();
        for &q in &[1e-9, 1e-4, 0.01, 0.25, 0.5, 0.6, 0.999, 1.0 - 1e-9] {
            assert_abs_diff_eq!(d.cdf(d.quantile(q)), q, epsilon = 1e-13);
        }
        for (j, &t) in d.quantile_grid().iter().enumerate() {
            let q = j as f64 / QUANTILE_GRID as f64;
            assert_abs_diff_eq!(d.cdf(t), q, epsilon = 1e-13);
        }
    }

    #[test]
    fn symmetric_density_and_moments() {
        let d = SignalDistribution::new(2, 1.0).unwrap();
        for &t in &[0.1, 0.2, 0.4] {
            assert_abs_diff_eq!(d.pdf(t), d.pdf(1.0 - t), epsilon = 1e-14);
            assert_abs_diff_eq!(d.cdf(t), d.sf(1.0 - t), epsilon = 1e-15);
        }
        let mean = d.expect(|t| t);
        assert_abs_diff_eq!(mean, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(d.m1(0.2, 0.7), d.expect(|t| if (0.2..0.7).contains(&t) { t } else { 0.0 }), epsilon = 5e-3);
    }

    #[test]
    fn density_is_unimodal() {
        let d = SignalDistribution::new(2, 1.0).unwrap();
        let mut prev = 0.0;
        for j in 1..=500 {
            let t = j as f64 / 1000.0;
            let f = d.pdf(t);
            assert!(f >= prev, "density decreases at {t}");
            prev = f;
        }
    }

    #[test]
    fn rejects_single_good() {
        assert!(SignalDistribution::new(1, 1.0).is_err());
    }
}
