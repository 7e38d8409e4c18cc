//! Brute-force cross-checks: menu grids for the seller, a dense angle grid
//! for the buyer, vertex enumeration for the knapsack and a rejection
//! sampler for the value distribution.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::envelope::envelope;
use crate::error::{Error, Result};
use crate::learner::expected_utility;
use crate::menu::{Menu, MenuOption};
use crate::value_model::{Direction, TypeLine, ValueModel};

/// Seed used by every Monte Carlo check unless overridden.
pub const DEFAULT_SEED: u64 = 20261015;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub price_grid_step: f64,
    /// Step of the free coordinate of rationing lotteries.
    pub lottery_grid_step: f64,
    pub max_options: usize,
    pub angle_grid_size: usize,
    pub mc_samples: usize,
    pub rng_seed: u64,
    /// Families larger than `direct_limit` cells at the fine step are first
    /// scanned at `coarse_step` and refined around the best `refine_top`
    /// coarse cells.
    pub coarse_step: f64,
    pub direct_limit: u64,
    pub refine_top: usize,
    /// Total coarse cells allowed per call.
    pub max_cells: u64,
    pub include_lotteries: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            price_grid_step: 0.01,
            lottery_grid_step: 0.02,
            max_options: 3,
            angle_grid_size: 3600,
            mc_samples: 1_000_000,
            rng_seed: DEFAULT_SEED,
            coarse_step: 0.05,
            direct_limit: 20_000,
            refine_top: 8,
            max_cells: 20_000_000,
            include_lotteries: true,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("price_grid_step", self.price_grid_step),
            ("lottery_grid_step", self.lottery_grid_step),
            ("coarse_step", self.coarse_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.coarse_step < self.price_grid_step {
            return Err(Error::Argument("coarse_step must be at least price_grid_step".into()));
        }
        if self.angle_grid_size < 2 || self.max_options == 0 {
            return Err(Error::Argument(
                "angle_grid_size must be at least 2 and max_options positive".into(),
            ));
        }
        Ok(())
    }
}

/// A structural menu family: fixed lotteries whose prices are free
/// parameters, except that separate sales price the bundle at the sum.
#[derive(Debug, Clone)]
struct Family {
    name: String,
    lotteries: Vec<Vec<f64>>,
    separate: bool,
}

impl Family {
    fn menu(&self, params: &[f64]) -> Menu {
        let prices: Vec<f64> = if self.separate {
            vec![params[0], params[1], params[0] + params[1]]
        } else {
            params.to_vec()
        };
        Menu {
            options: self
                .lotteries
                .iter()
                .zip(prices)
                .map(|(x, p)| MenuOption::new(x.clone(), p))
                .collect(),
        }
    }
}

fn families(config: &OracleConfig) -> Vec<Family> {
    let e = |i: usize| -> Vec<f64> {
        let mut x = vec![0.0; 2];
        x[i] = 1.0;
        x
    };
    let both = vec![1.0, 1.0];
    let fam = |name: &str, lotteries: Vec<Vec<f64>>| Family {
        name: name.into(),
        lotteries,
        separate: false,
    };
    let mut out = vec![
        fam("bundle", vec![both.clone()]),
        fam("good 1", vec![e(0)]),
        fam("good 2", vec![e(1)]),
        Family {
            name: "separate".into(),
            lotteries: vec![e(0), e(1), both.clone()],
            separate: true,
        },
        fam("nested {1} < {1,2}", vec![e(0), both.clone()]),
        fam("nested {2} < {1,2}", vec![e(1), both.clone()]),
        fam("mixed", vec![e(0), e(1), both.clone()]),
    ];
    if config.include_lotteries {
        let steps = (1.0 / config.lottery_grid_step).round() as usize;
        for j in 1..steps {
            let x = j as f64 / steps as f64;
            for (name, lottery) in [("(x, 1)", vec![x, 1.0]), ("(1, x)", vec![1.0, x])] {
                out.push(fam(&format!("rationing {name} x = {x:.2}"), vec![lottery.clone()]));
                out.push(fam(
                    &format!("bundle + rationing {name} x = {x:.2}"),
                    vec![lottery, both.clone()],
                ));
            }
        }
    }
    out.retain(|f| f.lotteries.len() <= config.max_options);
    out
}

/// Prices worth trying for lottery `x`: the range of its value on the line.
fn price_span(line: &TypeLine, x: &[f64]) -> (f64, f64) {
    let (a, b) = line.value_line(x);
    let (lo, hi) = (b, a + b);
    (lo.min(hi), lo.max(hi))
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(0.0) as usize;
    let mut out: Vec<f64> = (0..=n).map(|j| (lo + j as f64 * step).min(hi)).collect();
    out.dedup();
    out
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for ax in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                ax.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn cells(axes: &[Vec<f64>]) -> u64 {
    axes.iter().map(|a| a.len() as u64).product()
}

/// Best menu found on the grids, with its revenue and family name.
#[derive(Debug, Clone, Serialize)]
pub struct OracleMenu {
    pub menu: Menu,
    pub revenue: f64,
    pub family: String,
}

/// Grid-search the most profitable menu against `line`. Two goods only.
pub fn oracle_seller_best(line: &TypeLine, config: &OracleConfig) -> Result<OracleMenu> {
    config.validate()?;
    if line.dim() != 2 {
        return Err(Error::Argument(format!(
            "seller oracle supports two goods, line has {}",
            line.dim()
        )));
    }
    let fams = families(config);
    let spans: Vec<Vec<(f64, f64)>> = fams
        .iter()
        .map(|f| {
            if f.separate {
                vec![price_span(line, &f.lotteries[0]), price_span(line, &f.lotteries[1])]
            } else {
                f.lotteries.iter().map(|x| price_span(line, x)).collect()
            }
        })
        .collect();

    let fine = config.price_grid_step;
    let coarse = config.coarse_step;
    let mut budget = 0u64;
    let mut plans: Vec<(usize, Vec<Vec<f64>>, bool)> = Vec::new();
    for (fi, span) in spans.iter().enumerate() {
        let fine_axes: Vec<Vec<f64>> = span.iter().map(|&(lo, hi)| axis(lo, hi, fine)).collect();
        if cells(&fine_axes) <= config.direct_limit {
            budget += cells(&fine_axes);
            plans.push((fi, fine_axes, false));
        } else {
            let coarse_axes: Vec<Vec<f64>> =
                span.iter().map(|&(lo, hi)| axis(lo, hi, coarse)).collect();
            budget += cells(&coarse_axes);
            plans.push((fi, coarse_axes, true));
        }
    }
    if budget > config.max_cells {
        let factor = (budget as f64 / config.max_cells as f64).cbrt();
        return Err(Error::Budget {
            cells: budget,
            limit: config.max_cells,
            suggestion: format!("coarse_step = {:.3} or larger", coarse * factor * 1.05),
        });
    }

    let eval = |fi: usize, params: &[f64]| -> f64 {
        let menu = fams[fi].menu(params);
        envelope(line, &menu).revenue(line)
    };

    let results: Vec<(f64, usize, Vec<f64>)> = plans
        .par_iter()
        .map(|(fi, axes, refine)| {
            let points = product(axes);
            let mut scored: Vec<(f64, Vec<f64>)> =
                points.into_iter().map(|p| (eval(*fi, &p), p)).collect();
            scored.sort_by(|x, y| y.0.total_cmp(&x.0));
            if !refine {
                let (v, p) = scored.swap_remove(0);
                return (v, *fi, p);
            }
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for (_, centre) in scored.iter().take(config.refine_top) {
                let local: Vec<Vec<f64>> = centre
                    .iter()
                    .zip(&spans[*fi])
                    .map(|(&c, &(lo, hi))| axis((c - coarse).max(lo), (c + coarse).min(hi), fine))
                    .collect();
                for p in product(&local) {
                    let v = eval(*fi, &p);
                    if v > best.0 {
                        best = (v, p);
                    }
                }
            }
            (best.0, *fi, best.1)
        })
        .collect();

    let (revenue, fi, params) = results
        .into_iter()
        .max_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)))
        .expect("at least one family");
    Ok(OracleMenu {
        menu: fams[fi].menu(&params),
        revenue,
        family: fams[fi].name.clone(),
    })
}

/// Best direction on a uniform angle grid over `[0, π)`. Two goods only.
pub fn oracle_buyer_best(model: &ValueModel, menu: &Menu, config: &OracleConfig) -> Result<(Direction, f64)> {
    config.validate()?;
    if model.k() != 2 {
        return Err(Error::Argument("buyer oracle supports two goods".into()));
    }
    let n = config.angle_grid_size;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| expected_utility(model, &Direction::from_angle(PI * j as f64 / n as f64), menu))
        .collect::<Result<_>>()?;
    let (j, v) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    Ok((Direction::from_angle(PI * j as f64 / n as f64), v))
}

/// Maximum of `b·x` over the vertices of `{x ∈ [0,1]^K : a·x = 0}`.
///
/// Every vertex has at most one fractional coordinate, so enumerating 0/1
/// patterns on all but one coordinate and solving for the last covers them.
pub fn knapsack_vertex_max(a: &[f64], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let k = a.len();
    assert!(k <= 24, "vertex enumeration is exponential in the number of goods");
    let tol = 1e-12 * a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut consider = |x: Vec<f64>| {
        let v: f64 = x.iter().zip(b).map(|(x, b)| x * b).sum();
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((x, v));
        }
    };
    for mask in 0u32..(1 << k) {
        let x: Vec<f64> = (0..k).map(|i| ((mask >> i) & 1) as f64).collect();
        let s: f64 = x.iter().zip(a).map(|(x, a)| x * a).sum();
        if s.abs() <= tol * k as f64 {
            consider(x.clone());
        }
        for free in 0..k {
            if (mask >> free) & 1 == 1 || a[free].abs() <= tol {
                continue;
            }
            let v = -s / a[free];
            if v > 0.0 && v < 1.0 {
                let mut y = x.clone();
                y[free] = v;
                consider(y);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityCheck {
    pub weights: Vec<f64>,
    pub bins: usize,
    /// Largest gap between histogram density and exact bin-average density.
    pub sup_norm: f64,
    pub max_z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearityCheck {
    pub directions: usize,
    pub cells: usize,
    pub max_z: f64,
    pub beyond_3se: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CallCheck {
    pub good: usize,
    pub strike: f64,
    pub exact: f64,
    pub sampled: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub seed: u64,
    pub accepted: usize,
    pub draws: usize,
    pub acceptance_rate: f64,
    pub acceptance_expected: f64,
    pub acceptance_z: f64,
    pub mean: Vec<f64>,
    pub mean_z: Vec<f64>,
    /// Sample correlation of every pair minus the prior `ρ`, in standard
    /// errors.
    pub correlation_z: f64,
    pub density: DensityCheck,
    pub linearity: LinearityCheck,
    pub calls: Vec<CallCheck>,
}

/// Rejection-samples the truncated distribution and compares it with the
/// analytic marginals and posterior lines.
pub fn mc_validate(model: &ValueModel, config: &OracleConfig) -> Result<McReport> {
    let k = model.k();
    let sc = model.scenario();
    let r2 = sc.radius * sc.radius;
    let chol = model
        .covariance()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Sampling("covariance is not positive definite".into()))?;
    let l = chol.l();
    let expected = gamma_lr(k as f64 / 2.0, r2 / 2.0);
    if expected < 1e-3 {
        return Err(Error::Sampling(format!(
            "acceptance probability {expected:.2e} is below 1e-3"
        )));
    }
    let n = config.mc_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut samples: Vec<f64> = Vec::with_capacity(n * k);
    let mut draws = 0usize;
    let mut z = DVector::<f64>::zeros(k);
    let limit = n.saturating_mul(10_000).max(1_000_000);
    while samples.len() < n * k {
        draws += 1;
        if draws > limit {
            return Err(Error::Sampling(format!("gave up after {draws} draws")));
        }
        for i in 0..k {
            z[i] = rng.sample(StandardNormal);
        }
        if z.norm_squared() > r2 {
            continue;
        }
        let v = &l * &z;
        samples.extend((0..k).map(|i| sc.mu[i] + v[i]));
    }
    let row = |j: usize| &samples[j * k..(j + 1) * k];
    let rate = n as f64 / draws as f64;
    let acceptance_z = (rate - expected) / (expected * (1.0 - expected) / draws as f64).sqrt();

    let nf = n as f64;
    let mean: Vec<f64> = (0..k).map(|i| (0..n).map(|j| row(j)[i]).sum::<f64>() / nf).collect();
    let cov = |i: usize, m: usize| -> f64 {
        (0..n).map(|j| (row(j)[i] - mean[i]) * (row(j)[m] - mean[m])).sum::<f64>() / (nf - 1.0)
    };
    let var: Vec<f64> = (0..k).map(|i| cov(i, i)).collect();
    let mean_z: Vec<f64> = (0..k).map(|i| (mean[i] - sc.mu[i]) / (var[i] / nf).sqrt()).collect();
    let mut correlation_z = 0.0_f64;
    for i in 0..k {
        for m in i + 1..k {
            let c = cov(i, m) / (var[i] * var[m]).sqrt();
            let se = (1.0 - c * c) / (nf - 3.0).sqrt();
            correlation_z = correlation_z.max(((c - sc.rho) / se).abs());
        }
    }

    let project = |line: &TypeLine, v: &[f64], w: &[f64]| -> f64 {
        let s: f64 = v.iter().zip(w).map(|(v, w)| v * w).sum();
        let t = (s - line.s_lo) / (line.s_hi - line.s_lo);
        if line.flipped {
            1.0 - t
        } else {
            t
        }
    };

    // Histogram of the bundle-direction type.
    let bins = 50;
    let dir = model.canonical(&Direction::new(vec![1.0; k])?);
    let line = model.posterior_line(&dir)?;
    let mut counts = vec![0usize; bins];
    for j in 0..n {
        let t = project(&line, row(j), dir.weights());
        counts[((t * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let width = 1.0 / bins as f64;
    let dist = line.dist();
    let (mut sup_norm, mut max_z) = (0.0_f64, 0.0_f64);
    for (b, &c) in counts.iter().enumerate() {
        let p = dist.m0(b as f64 * width, (b + 1) as f64 * width);
        let gap = (c as f64 / nf - p) / width;
        sup_norm = sup_norm.max(gap.abs());
        if p > 0.0 {
            max_z = max_z.max(((c as f64 - nf * p) / (nf * p * (1.0 - p)).sqrt()).abs());
        }
    }

    // Conditional means against the posterior lines.
    let mut dir_rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x9e37_79b9_7f4a_7c15);
    let directions = 20;
    let signal_bins = 20;
    let (mut cells, mut lin_max, mut beyond) = (0usize, 0.0_f64, 0usize);
    for _ in 0..directions {
        let w: Vec<f64> = (0..k).map(|_| dir_rng.sample(StandardNormal)).collect();
        let d = model.canonical(&Direction::new(w)?);
        let line = model.posterior_line(&d)?;
        let mut acc = vec![(0usize, vec![0.0; k], vec![0.0; k]); signal_bins];
        for j in 0..n {
            let v = row(j);
            let t = project(&line, v, d.weights());
            let cell = &mut acc[((t * signal_bins as f64) as usize).min(signal_bins - 1)];
            cell.0 += 1;
            for i in 0..k {
                let resid = v[i] - (line.a[i] * t + line.b[i]);
                cell.1[i] += resid;
                cell.2[i] += resid * resid;
            }
        }
        for (count, sum, sq) in &acc {
            if *count < 30 {
                continue;
            }
            let c = *count as f64;
            for i in 0..k {
                let m = sum[i] / c;
                let sd = ((sq[i] / c - m * m).max(0.0) * c / (c - 1.0)).sqrt();
                if sd <= 1e-12 * (1.0 + sc.mu[i]) {
                    continue;
                }
                let zval = (m / (sd / c.sqrt())).abs();
                cells += 1;
                lin_max = lin_max.max(zval);
                if zval > 3.0 {
                    beyond += 1;
                }
            }
        }
    }

    let calls = (0..k)
        .map(|i| -> Result<CallCheck> {
            let marg = model.coordinate_marginal(i)?;
            let strike = sc.mu[i] - 0.5 * sc.radius * sc.sigma[i];
            let payoffs: Vec<f64> = (0..n).map(|j| (row(j)[i] - strike).max(0.0)).collect();
            let m = payoffs.iter().sum::<f64>() / nf;
            let v = payoffs.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (nf - 1.0);
            let exact = marg.call_value(strike);
            Ok(CallCheck {
                good: i,
                strike,
                exact,
                sampled: m,
                z: (m - exact) / (v / nf).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(McReport {
        seed: config.rng_seed,
        accepted: n,
        draws,
        acceptance_rate: rate,
        acceptance_expected: expected,
        acceptance_z,
        mean,
        mean_z,
        correlation_z,
        density: DensityCheck {
            weights: dir.weights().to_vec(),
            bins,
            sup_norm,
            max_z,
        },
        linearity: LinearityCheck {
            directions,
            cells,
            max_z: lin_max,
            beyond_3se: beyond,
        },
        calls,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::auxiliary::solve_auxiliary;
    use crate::value_model::SignalDistribution;

    #[test]
    fn vertex_enumeration_matches_greedy() {
        let a = [4.0, -3.6];
        let b = [0.0, 3.8];
        let (x, v) = knapsack_vertex_max(&a, &b).unwrap();
        let greedy = solve_auxiliary(&a, &b).unwrap();
        assert!((v - greedy.value).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn fig4_oracle_finds_rationing() {
        let dist = Arc::new(SignalDistribution::new(2, 1.0).unwrap());
        let line = TypeLine::new(vec![4.0, -3.6], vec![0.0, 3.8], dist).unwrap();
        let best = oracle_seller_best(&line, &OracleConfig::default()).unwrap();
        assert!(best.family.starts_with("bundle + rationing (x, 1) x = 0.90"), "{best:?}");
        assert!((best.revenue - 3.902_583).abs() < 1e-3, "{best:?}");
    }

    #[test]
    fn budget_error_suggests_coarsening() {
        let dist = Arc::new(SignalDistribution::new(2, 1.0).unwrap());
        let line = TypeLine::new(vec![2.0, 2.0], vec![0.0, 0.0], dist).unwrap();
        let config = OracleConfig {
            max_cells: 1000,
            ..OracleConfig::default()
        };
        match oracle_seller_best(&line, &config) {
            Err(Error::Budget { suggestion, .. }) => assert!(suggestion.contains("coarse_step")),
            other => panic!("expected a budget error, got {other:?}"),
        }
    }
}
