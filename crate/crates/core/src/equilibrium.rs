//! Simultaneous-move equilibria by best-response iteration, the structural
//! diagnostics that accompany them, and the seller-first commitment problem.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::envelope::envelope;
use crate::error::{Error, Result};
use crate::learner::{best_direction, expected_utility, SearchConfig};
use crate::mechanism::{buyer_utility, extract_menu, optimal_mechanism, worst_off_certificate};
use crate::menu::{Menu, MenuOption};
use crate::oracle::{oracle_buyer_best, oracle_seller_best, OracleConfig};
use crate::value_model::{Direction, Scenario, TypeLine, ValueModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumConfig {
    /// Starting direction; the all-ones vector when absent.
    pub seed: Option<Vec<f64>>,
    pub max_iter: usize,
    pub angle_tol: f64,
    pub price_tol: f64,
    pub cycle_window: usize,
    pub search: SearchConfig,
    /// Run the buyer grid and seller oracle checks on convergence.
    pub verify: bool,
    pub oracle: OracleConfig,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            seed: None,
            max_iter: 200,
            angle_tol: 1e-6,
            price_tol: 1e-6,
            cycle_window: 8,
            search: SearchConfig::default(),
            verify: true,
            oracle: OracleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub weights: Vec<f64>,
    pub menu: Menu,
    pub revenue: f64,
    pub buyer_utility: f64,
    pub angle_delta: f64,
    pub price_delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceGaps {
    pub angle_delta: f64,
    pub price_delta: f64,
    pub revenue_delta: f64,
    /// Best utility on the verification grid minus the equilibrium utility.
    pub buyer_slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub buyer_slack: f64,
    pub buyer_tolerance: f64,
    pub buyer_ok: bool,
    pub certificate_passed: bool,
    /// Oracle revenue minus mechanism revenue (two goods only).
    pub oracle_gap: Option<f64>,
    pub seller_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub seed: Vec<f64>,
    pub direction: Direction,
    pub menu: Menu,
    pub revenue: f64,
    pub buyer_utility: f64,
    pub vertical: bool,
    pub nested: bool,
    pub nested_menu: Menu,
    pub var_log_theta: Vec<f64>,
    pub tiers: Vec<Option<usize>>,
    pub iterations: usize,
    pub convergence_gaps: ConvergenceGaps,
    pub converged: bool,
    pub cycle_detected: bool,
    pub verification: Option<Verification>,
    pub trace: Vec<IterationRecord>,
}

impl EquilibriumReport {
    /// Both one-sided checks passed.
    pub fn verified(&self) -> bool {
        self.verification
            .as_ref()
            .is_some_and(|v| v.buyer_ok && v.seller_ok)
    }

    /// A single option containing every good.
    pub fn is_pure_bundling(&self) -> bool {
        self.menu.len() == 1 && self.menu.options[0].lottery.iter().all(|&x| x == 1.0)
    }
}

/// `Var(log θ_i(t))` under `F` for every good.
pub fn var_log_theta(line: &TypeLine) -> Vec<f64> {
    let dist = line.dist();
    (0..line.dim())
        .map(|i| {
            let (a, b) = (line.a[i], line.b[i]);
            let m1 = dist.expect(|t| (a * t + b).ln());
            let m2 = dist.expect(|t| (a * t + b).ln().powi(2));
            (m2 - m1 * m1).max(0.0)
        })
        .collect()
}

struct State {
    direction: Direction,
    line: TypeLine,
    menu: Menu,
    revenue: f64,
    buyer_utility: f64,
}

fn seller_response(model: &ValueModel, direction: Direction) -> Result<State> {
    let line = model.posterior_line(&direction)?;
    let mech = optimal_mechanism(&line)?;
    let menu = extract_menu(&mech)?;
    Ok(State {
        buyer_utility: buyer_utility(&mech, &line),
        revenue: mech.revenue,
        direction: model.canonical(&direction),
        line,
        menu,
    })
}

/// Best-response iteration from one seed.
pub fn find_equilibrium(model: &ValueModel, config: &EquilibriumConfig) -> Result<EquilibriumReport> {
    config.search.validate()?;
    let k = model.k();
    let seed = config.seed.clone().unwrap_or_else(|| vec![1.0; k]);
    let mut state = seller_response(model, Direction::new(seed.clone())?)?;
    let mut trace = vec![IterationRecord {
        iteration: 0,
        weights: state.direction.weights().to_vec(),
        menu: state.menu.clone(),
        revenue: state.revenue,
        buyer_utility: state.buyer_utility,
        angle_delta: f64::NAN,
        price_delta: f64::NAN,
    }];
    let mut history: Vec<(Direction, Menu)> = vec![(state.direction.clone(), state.menu.clone())];
    let (mut converged, mut cycle_detected) = (false, false);
    let mut gaps = ConvergenceGaps {
        angle_delta: f64::INFINITY,
        price_delta: f64::INFINITY,
        revenue_delta: f64::INFINITY,
        buyer_slack: None,
    };

    for iteration in 1..=config.max_iter {
        let br = best_direction(model, &state.menu, &config.search)?;
        let next = if br.indeterminate {
            state.direction.clone()
        } else {
            br.direction
        };
        let new_state = seller_response(model, next)?;
        let angle_delta = state.direction.line_angle(&new_state.direction);
        let price_delta = state.menu.price_distance(&new_state.menu).unwrap_or(f64::INFINITY);
        gaps.angle_delta = angle_delta;
        gaps.price_delta = price_delta;
        gaps.revenue_delta = (new_state.revenue - state.revenue).abs();
        trace.push(IterationRecord {
            iteration,
            weights: new_state.direction.weights().to_vec(),
            menu: new_state.menu.clone(),
            revenue: new_state.revenue,
            buyer_utility: new_state.buyer_utility,
            angle_delta,
            price_delta,
        });
        let settled = angle_delta < config.angle_tol && price_delta < config.price_tol;
        if !settled {
            let end = history.len() - 1;
            let start = end.saturating_sub(config.cycle_window);
            cycle_detected = history[start..end].iter().any(|(d, m)| {
                d.line_angle(&new_state.direction) < config.angle_tol
                    && m.price_distance(&new_state.menu)
                        .is_some_and(|p| p < config.price_tol)
            });
        }
        history.push((new_state.direction.clone(), new_state.menu.clone()));
        state = new_state;
        if settled {
            converged = true;
            break;
        }
        if cycle_detected {
            break;
        }
    }

    let verification = if converged && config.verify {
        let v = verify(model, &state, &config.oracle)?;
        gaps.buyer_slack = Some(v.buyer_slack);
        Some(v)
    } else {
        None
    };
    let vertical = model.is_vertical(&state.direction);
    let nested = state.menu.is_nested();
    let nested_menu = if nested {
        Menu::new(state.menu.chain())?
    } else {
        state.menu.clone()
    };
    Ok(EquilibriumReport {
        seed,
        var_log_theta: var_log_theta(&state.line),
        tiers: nested_menu.tiers(k),
        vertical,
        nested,
        nested_menu,
        direction: state.direction,
        menu: state.menu,
        revenue: state.revenue,
        buyer_utility: state.buyer_utility,
        iterations: trace.len() - 1,
        convergence_gaps: gaps,
        converged,
        cycle_detected,
        verification,
        trace,
    })
}

fn verify(model: &ValueModel, state: &State, oracle: &OracleConfig) -> Result<Verification> {
    let mu_sum: f64 = model.scenario().mu.iter().sum();
    let own = expected_utility(model, &state.direction, &state.menu)?;
    let best = if model.k() == 2 {
        let (_, grid) = oracle_buyer_best(model, &state.menu, oracle)?;
        let fine = best_direction(model, &state.menu, &SearchConfig::default())?;
        grid.max(fine.expected_utility)
    } else {
        let br = best_direction(model, &state.menu, &SearchConfig::default())?;
        br.expected_utility + br.slack
    };
    let buyer_slack = (best - own).max(0.0);
    let buyer_tolerance = 1e-5 * mu_sum;

    let mech = optimal_mechanism(&state.line)?;
    let certificate_passed = worst_off_certificate(&mech, &state.line).passed;
    let oracle_gap = if model.k() == 2 {
        Some(oracle_seller_best(&state.line, oracle)?.revenue - mech.revenue)
    } else {
        None
    };
    Ok(Verification {
        buyer_ok: buyer_slack <= buyer_tolerance,
        buyer_slack,
        buyer_tolerance,
        certificate_passed,
        seller_ok: certificate_passed && oracle_gap.map_or(true, |g| g <= 1e-3),
        oracle_gap,
    })
}

/// Seed directions: the all-ones vector, every axis and `Σ⁻¹μ`.
pub fn default_seeds(model: &ValueModel) -> Vec<Vec<f64>> {
    let k = model.k();
    let mut seeds = vec![vec![1.0; k]];
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        seeds.push(e);
    }
    let mu = nalgebra::DVector::from_column_slice(&model.scenario().mu);
    if let Some(chol) = model.covariance().clone().cholesky() {
        let w: Vec<f64> = chol.solve(&mu).iter().copied().collect();
        if let Ok(d) = Direction::new(w) {
            if seeds
                .iter()
                .all(|s| Direction::new(s.clone()).map_or(true, |e| e.line_angle(&d) > 1e-9))
            {
                seeds.push(d.weights().to_vec());
            }
        }
    }
    seeds
}

/// Runs [`find_equilibrium`] from every default seed.
pub fn find_equilibria(model: &ValueModel, config: &EquilibriumConfig) -> Result<Vec<EquilibriumReport>> {
    default_seeds(model)
        .into_iter()
        .map(|seed| {
            find_equilibrium(
                model,
                &EquilibriumConfig {
                    seed: Some(seed),
                    ..config.clone()
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingCheck {
    pub passed: bool,
    pub violations: Vec<String>,
    /// `Cov(v_i/μ_i, α·v)` per good.
    pub scaled_covariance: Vec<f64>,
    /// `σ_i² α_i / μ_i` per good (meaningful when `ρ = 0`).
    pub adjusted_weights: Vec<f64>,
}

/// Tier ordering against log-scale dispersion and covariance.
pub fn verify_ordering(model: &ValueModel, report: &EquilibriumReport) -> Result<OrderingCheck> {
    if !(report.vertical && report.nested) {
        return Err(Error::Argument(
            "ordering applies to vertical nested equilibria only".into(),
        ));
    }
    let sc = model.scenario();
    let k = model.k();
    let cov = model.signal_covariances(&report.direction);
    let scaled: Vec<f64> = (0..k).map(|i| cov[i] / sc.mu[i]).collect();
    let w = report.direction.weights();
    let adjusted: Vec<f64> = (0..k).map(|i| sc.sigma[i].powi(2) * w[i] / sc.mu[i]).collect();
    let var = &report.var_log_theta;
    let tol = |x: f64, y: f64| 1e-9 * (1.0 + x.abs().max(y.abs()));
    let mut violations = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let (Some(ti), Some(tj)) = (report.tiers[i], report.tiers[j]) else {
                continue;
            };
            if ti >= tj {
                continue;
            }
            if var[i] > var[j] + tol(var[i], var[j]) {
                violations.push(format!(
                    "tier {ti} good {} has Var(log θ) {:.6} above tier {tj} good {} at {:.6}",
                    i + 1,
                    var[i],
                    j + 1,
                    var[j]
                ));
            }
            if scaled[i] > scaled[j] + tol(scaled[i], scaled[j]) {
                violations.push(format!(
                    "scaled covariance of good {} ({:.6}) exceeds good {} ({:.6})",
                    i + 1,
                    scaled[i],
                    j + 1,
                    scaled[j]
                ));
            }
            if sc.rho == 0.0
                && (adjusted[i] < -tol(adjusted[i], 0.0)
                    || adjusted[i] > adjusted[j] + tol(adjusted[i], adjusted[j]))
            {
                violations.push(format!(
                    "adjusted weights not ordered: good {} {:.6}, good {} {:.6}",
                    i + 1,
                    adjusted[i],
                    j + 1,
                    adjusted[j]
                ));
            }
        }
    }
    Ok(OrderingCheck {
        passed: violations.is_empty(),
        violations,
        scaled_covariance: scaled,
        adjusted_weights: adjusted,
    })
}

/// Whether the posterior line of the all-ones direction points at the
/// origin, which makes pure bundling an equilibrium.
pub fn check_pure_bundling_condition(scenario: &Scenario) -> bool {
    let k = scenario.k;
    let s = &scenario.sigma;
    let total: f64 = s.iter().sum();
    let c: Vec<f64> = (0..k)
        .map(|i| s[i] * s[i] + scenario.rho * s[i] * (total - s[i]))
        .collect();
    (0..k).all(|i| {
        (0..k).all(|j| {
            let lhs = scenario.mu[i] * c[j];
            let rhs = scenario.mu[j] * c[i];
            (lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs().max(rhs.abs()))
        })
    })
}

/// `E[max(v_i - p, 0)] - (μ_i - p)` for good `i`.
pub fn signal_cost_bound_at(model: &ValueModel, good: usize, price: f64) -> Result<f64> {
    let marg = model.coordinate_marginal(good)?;
    Ok(marg.call_value(price) - (model.scenario().mu[good] - price))
}

/// Signal cost above which the equilibrium survives extra signals: uses the
/// base good and base price of the nested menu. Two goods, `ρ = 0`.
pub fn signal_cost_bound(model: &ValueModel, report: &EquilibriumReport) -> Result<f64> {
    let sc = model.scenario();
    if sc.k != 2 || sc.rho != 0.0 {
        return Err(Error::Argument(
            "signal cost bound needs two uncorrelated goods".into(),
        ));
    }
    if !report.nested {
        return Err(Error::Argument("signal cost bound needs a nested menu".into()));
    }
    let chain = report.nested_menu.chain();
    let base = chain
        .first()
        .filter(|o| o.goods().len() == 1)
        .ok_or_else(|| Error::Argument("nested menu has no single-good base tier".into()))?;
    signal_cost_bound_at(model, base.goods()[0], base.price)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitmentConfig {
    /// Price step of the first pass.
    pub coarse_step: f64,
    /// Final price resolution of the local search.
    pub fine_step: f64,
    /// Angles used to approximate the buyer's response in the first pass.
    pub coarse_angles: usize,
    /// Menus per family carried into the local search.
    pub refine_top: usize,
    pub search: SearchConfig,
    pub include_mixed: bool,
}

impl Default for CommitmentConfig {
    fn default() -> Self {
        CommitmentConfig {
            coarse_step: 0.1,
            fine_step: 0.01,
            coarse_angles: 90,
            refine_top: 3,
            search: SearchConfig::default(),
            include_mixed: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SellerCommitment {
    pub menu: Menu,
    pub family: String,
    pub direction: Direction,
    pub revenue: f64,
    pub buyer_utility: f64,
}

/// Revenue from `menu` once the buyer best-responds with his learning.
pub fn committed_revenue(model: &ValueModel, menu: &Menu, search: &SearchConfig) -> Result<(f64, Direction, f64)> {
    let br = best_direction(model, menu, search)?;
    let line = model.posterior_line(&br.direction)?;
    Ok((envelope(&line, menu).revenue(&line), br.direction, br.expected_utility))
}

fn coarse_revenue(model: &ValueModel, menu: &Menu, angles: usize) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for j in 0..angles {
        let d = Direction::from_angle(PI * j as f64 / angles as f64);
        let line = model.posterior_line(&d)?;
        let env = envelope(&line, menu);
        let eu = env.expected_utility(&line);
        if eu > best.0 + 1e-12 {
            best = (eu, env.revenue(&line));
        }
    }
    Ok(best.1)
}

/// Seller-first optimum over deterministic menus. Two goods only.
pub fn seller_commitment_optimum(model: &ValueModel, config: &CommitmentConfig) -> Result<SellerCommitment> {
    if model.k() != 2 {
        return Err(Error::Argument("seller commitment search needs two goods".into()));
    }
    if !(config.fine_step > 0.0 && config.coarse_step >= config.fine_step) {
        return Err(Error::Argument("need 0 < fine_step <= coarse_step".into()));
    }
    let sc = model.scenario();
    let sigma = model.covariance();
    let span = |x: &[f64]| -> (f64, f64) {
        let m: f64 = x.iter().zip(&sc.mu).map(|(x, m)| x * m).sum();
        let mut q = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                q += x[i] * sigma[(i, j)] * x[j];
            }
        }
        let h = sc.radius * q.sqrt();
        ((m - h).max(0.0), m + h)
    };
    let e1 = vec![1.0, 0.0];
    let e2 = vec![0.0, 1.0];
    let both = vec![1.0, 1.0];
    // (name, lotteries, separate pricing)
    let mut fams: Vec<(&str, Vec<Vec<f64>>, bool)> = vec![
        ("bundle", vec![both.clone()], false),
        ("good 1", vec![e1.clone()], false),
        ("good 2", vec![e2.clone()], false),
        ("separate", vec![e1.clone(), e2.clone()], true),
        ("nested {2} < {1,2}", vec![e2.clone(), both.clone()], false),
        ("nested {1} < {1,2}", vec![e1.clone(), both.clone()], false),
    ];
    if config.include_mixed {
        fams.push(("mixed", vec![e1.clone(), e2.clone(), both.clone()], false));
    }
    let build = |lots: &[Vec<f64>], separate: bool, p: &[f64]| -> Menu {
        let mut options: Vec<MenuOption> = lots
            .iter()
            .zip(p)
            .map(|(x, &price)| MenuOption::new(x.clone(), price))
            .collect();
        if separate {
            options.push(MenuOption::new(both.clone(), p[0] + p[1]));
        }
        Menu { options }
    };

    let mut best: Option<(f64, String, Menu)> = None;
    for (name, lots, separate) in &fams {
        let spans: Vec<(f64, f64)> = lots.iter().map(|x| span(x)).collect();
        let step = if lots.len() >= 3 { 2.0 * config.coarse_step } else { config.coarse_step };
        let axes: Vec<Vec<f64>> = spans
            .iter()
            .map(|&(lo, hi)| {
                let n = ((hi - lo) / step).ceil() as usize;
                (0..=n).map(|j| (lo + j as f64 * step).min(hi)).collect()
            })
            .collect();
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        for ax in &axes {
            points = points
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
        // A lone good priced above the bundle is never bought.
        if lots.len() >= 2 && !separate {
            points.retain(|p| p[..p.len() - 1].iter().all(|&q| q <= p[p.len() - 1]));
        }
        let mut scored: Vec<(f64, Vec<f64>)> = points
            .into_iter()
            .map(|p| Ok((coarse_revenue(model, &build(lots, *separate, &p), config.coarse_angles)?, p)))
            .collect::<Result<_>>()?;
        scored.sort_by(|x, y| y.0.total_cmp(&x.0));
        for (_, start) in scored.into_iter().take(config.refine_top) {
            let (value, params) = pattern_search(
                |p| {
                    let lo_ok = p.iter().all(|&q| q >= 0.0);
                    if !lo_ok {
                        return Ok(f64::NEG_INFINITY);
                    }
                    committed_revenue(model, &build(lots, *separate, p), &config.search).map(|r| r.0)
                },
                start,
                0.5 * step,
                0.5 * config.fine_step,
            )?;
            // Mirror-image families tie up to rounding; keep the first listed.
            if best.as_ref().map_or(true, |b| value > b.0 + 1e-9) {
                best = Some((value, name.to_string(), build(lots, *separate, &params)));
            }
        }
    }
    let (_, family, menu) = best.expect("at least one family");
    let (revenue, direction, buyer_utility) = committed_revenue(model, &menu, &config.search)?;
    Ok(SellerCommitment {
        menu,
        family,
        direction,
        revenue,
        buyer_utility,
    })
}

/// Compass search: try `±step` on each coordinate, move on improvement,
/// halve the step otherwise.
fn pattern_search<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    start: Vec<f64>,
    mut step: f64,
    min_step: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut x = start;
    let mut fx = f(&x)?;
    while step >= min_step {
        let mut moved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += dir * step;
                let fy = f(&y)?;
                if fy > fx + 1e-12 {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok((fx, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_bundling_condition_examples() {
        let exch = Scenario::new(vec![2.0, 2.0], vec![2.0, 2.0], 0.3, 1.0).unwrap();
        assert!(check_pure_bundling_condition(&exch));
        let perturbed = Scenario::new(vec![2.0, 2.05], vec![2.0, 2.0], 0.0, 1.0).unwrap();
        assert!(!check_pure_bundling_condition(&perturbed));
        let scaled = Scenario::new(vec![1.0, 2.0], vec![1.0, 2f64.sqrt()], 0.0, 1.0).unwrap();
        assert!(check_pure_bundling_condition(&scaled));
    }

    #[test]
    fn signal_cost_bound_limits() {
        let model =
            ValueModel::new(Scenario::new(vec![2.0, 2.0], vec![2.0, 2.0], 0.0, 1.0).unwrap()).unwrap();
        assert!(signal_cost_bound_at(&model, 0, 0.0).unwrap().abs() < 1e-9);
        let at_mean = signal_cost_bound_at(&model, 0, 2.0).unwrap();
        let call = model.coordinate_marginal(0).unwrap().call_value(2.0);
        assert!((at_mean - call).abs() < 1e-12 && at_mean > 0.0);
    }

    #[test]
    fn intro_converges_to_pure_bundling() {
        let model =
            ValueModel::new(Scenario::new(vec![2.0, 2.0], vec![2.0, 2.0], 0.0, 1.0).unwrap()).unwrap();
        let config = EquilibriumConfig {
            verify: false,
            ..EquilibriumConfig::default()
        };
        let rep = find_equilibrium(&model, &config).unwrap();
        assert!(rep.converged && rep.vertical && rep.is_pure_bundling(), "{rep:?}");
        assert!((rep.menu.options[0].price - 3.133_973).abs() < 1e-5);
        let v = &rep.var_log_theta;
        assert!((v[0] - v[1]).abs() < 1e-6);
    }
}
