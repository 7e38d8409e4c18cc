//! The buyer's side: expected utility of a learning direction against a menu
//! and the search for the best direction.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::envelope;
use crate::error::{Error, Result};
use crate::mechanism::{buyer_utility, extract_menu, optimal_mechanism};
use crate::menu::Menu;
use crate::optimize::{golden_max, nelder_mead_max};
use crate::value_model::{Direction, ValueModel};

/// Values closer than this are treated as tied between directions.
pub const NEAR_TIE: f64 = 1e-9;

const LATTICE_LIMIT: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Angles on `[0, π)` for two goods.
    pub angle_grid: usize,
    pub refine_tol: f64,
    /// Lattice points per spherical coordinate for three or more goods.
    pub lattice_per_dim: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            angle_grid: 720,
            refine_tol: 1e-7,
            lattice_per_dim: 15,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angle_grid < 8 {
            return Err(Error::Argument(format!(
                "angle_grid must be at least 8, got {}",
                self.angle_grid
            )));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::Argument("refine_tol must be positive".into()));
        }
        if self.lattice_per_dim < 3 {
            return Err(Error::Argument("lattice_per_dim must be at least 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub weights: Vec<f64>,
    pub expected_utility: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BestResponse {
    pub direction: Direction,
    pub expected_utility: f64,
    pub vertical: bool,
    /// Every direction earns the same utility (for example the empty menu).
    pub indeterminate: bool,
    /// Heuristic bound on utility the grid may have missed outside the
    /// refined cells.
    pub slack: f64,
    pub search_trace: Vec<TraceEntry>,
}

/// Buyer's expected utility from learning along `direction` and then
/// choosing optimally from `menu` (or nothing).
pub fn expected_utility(model: &ValueModel, direction: &Direction, menu: &Menu) -> Result<f64> {
    menu.check_dim(model.k())?;
    let line = model.posterior_line(direction)?;
    Ok(envelope(&line, menu).expected_utility(&line))
}

/// Utility without learning: the best option at the prior mean.
pub fn uninformed_utility(model: &ValueModel, menu: &Menu) -> f64 {
    let mu = &model.scenario().mu;
    menu.options
        .iter()
        .map(|o| o.lottery.iter().zip(mu).map(|(x, m)| x * m).sum::<f64>() - o.price)
        .fold(0.0, f64::max)
}

/// Expected utility at `angle` and its derivative in the angle. The
/// derivative holds the chosen options fixed, which is exact by the
/// envelope theorem.
fn eu_with_slope(model: &ValueModel, angle: f64, menu: &Menu) -> Result<(f64, f64)> {
    let raw = Direction::from_angle(angle);
    let dir = model.canonical(&raw);
    let sign = if dir == raw { 1.0 } else { -1.0 };
    let dalpha = [-sign * angle.sin(), sign * angle.cos()];
    let line = model.posterior_line(&dir)?;
    let cov = model.signal_covariances(&dir);
    let var: f64 = cov.iter().zip(dir.weights()).map(|(c, w)| c * w).sum();
    let sd = var.sqrt();
    let c_dot: f64 = cov.iter().zip(&dalpha).map(|(c, d)| c * d).sum();
    let sigma = model.covariance();
    let r = model.scenario().radius;
    let (mut da, mut db) = (vec![0.0; 2], vec![0.0; 2]);
    for k in 0..2 {
        let dc = sigma[(k, 0)] * dalpha[0] + sigma[(k, 1)] * dalpha[1];
        let dw = dc / sd - cov[k] * c_dot / (sd * sd * sd);
        da[k] = 2.0 * r * dw;
        db[k] = -r * dw;
    }
    if line.flipped {
        for k in 0..2 {
            let (x, y) = (da[k], db[k]);
            da[k] = -x;
            db[k] = x + y;
        }
    }
    let env = envelope(&line, menu);
    let dist = line.dist();
    let mut slope = 0.0;
    for s in &env.segments {
        let Some(j) = s.option else { continue };
        let x = &menu.options[j].lottery;
        let dslope: f64 = x.iter().zip(&da).map(|(x, d)| x * d).sum();
        let dint: f64 = x.iter().zip(&db).map(|(x, d)| x * d).sum();
        slope += dslope * dist.m1(s.t_lo, s.t_hi) + dint * dist.m0(s.t_lo, s.t_hi);
    }
    Ok((env.expected_utility(&line), slope))
}

fn eu_at_angle(model: &ValueModel, angle: f64, menu: &Menu) -> Result<f64> {
    expected_utility(model, &Direction::from_angle(angle), menu)
}

/// Best learning direction against `menu`.
pub fn best_direction(model: &ValueModel, menu: &Menu, config: &SearchConfig) -> Result<BestResponse> {
    config.validate()?;
    menu.check_dim(model.k())?;
    if model.k() == 2 {
        best_direction_2d(model, menu, config)
    } else {
        best_direction_lattice(model, menu, config)
    }
}

/// Picks among near-tied candidates: vertical first, then the smallest key.
fn select<'a>(model: &ValueModel, candidates: &'a [(Direction, f64, f64)]) -> &'a (Direction, f64, f64) {
    let top = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    candidates
        .iter()
        .filter(|c| c.1 >= top - NEAR_TIE)
        .min_by(|x, y| {
            let vx = model.is_vertical(&x.0);
            let vy = model.is_vertical(&y.0);
            vy.cmp(&vx).then(x.2.total_cmp(&y.2))
        })
        .expect("at least one candidate")
}

fn best_direction_2d(model: &ValueModel, menu: &Menu, config: &SearchConfig) -> Result<BestResponse> {
    let n = config.angle_grid;
    let step = PI / n as f64;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| eu_at_angle(model, j as f64 * step, menu))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let top: Vec<usize> = order.iter().copied().take(3).collect();

    let mut refined: Vec<(Direction, f64, f64)> = Vec::new();
    for &j in &top {
        let centre = j as f64 * step;
        let (lo, hi) = (centre - step, centre + step);
        let (angle, value) = refine_angle(model, menu, lo, hi, config.refine_tol)?;
        let angle = angle.rem_euclid(PI);
        let (angle, value) = if value >= values[j] { (angle, value) } else { (centre, values[j]) };
        refined.push((Direction::from_angle(angle), value, angle));
    }
    let (direction, value, _) = select(model, &refined).clone();

    // Unrefined cells could hide at most about half their endpoint gap.
    let mut slack = 0.0_f64;
    for j in 0..n {
        let k = (j + 1) % n;
        if top.contains(&j) || top.contains(&k) {
            continue;
        }
        let bound = values[j].max(values[k]) + 0.5 * (values[j] - values[k]).abs();
        slack = slack.max(bound - value);
    }

    let spread = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let search_trace = (0..n)
        .map(|j| TraceEntry {
            weights: Direction::from_angle(j as f64 * step).weights().to_vec(),
            expected_utility: values[j],
        })
        .chain(refined.iter().map(|(d, v, _)| TraceEntry {
            weights: d.weights().to_vec(),
            expected_utility: *v,
        }))
        .collect();
    Ok(BestResponse {
        vertical: model.is_vertical(&direction),
        indeterminate: spread <= 1e-15 && value <= 1e-15,
        direction,
        expected_utility: value,
        slack: slack.max(0.0),
        search_trace,
    })
}

/// Maximizes over `[lo, hi]`: bisection on the envelope derivative when it
/// brackets a sign change, golden section otherwise.
fn refine_angle(model: &ValueModel, menu: &Menu, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let (v_lo, d_lo) = eu_with_slope(model, lo, menu)?;
    let (v_hi, d_hi) = eu_with_slope(model, hi, menu)?;
    // Rounding noise in the slope at a stationary endpoint.
    let flat = |v: f64, d: f64| d.abs() <= 1e-12 * (1.0 + v.abs());
    if flat(v_hi, d_hi) && d_lo >= 0.0 {
        return Ok((hi, v_hi));
    }
    if flat(v_lo, d_lo) && d_hi <= 0.0 {
        return Ok((lo, v_lo));
    }
    if d_lo > 0.0 && d_hi < 0.0 {
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-12 {
            let m = 0.5 * (a + b);
            let (_, d) = eu_with_slope(model, m, menu)?;
            if d == 0.0 {
                return Ok((m, eu_at_angle(model, m, menu)?));
            }
            if d > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let m = 0.5 * (a + b);
        return Ok((m, eu_at_angle(model, m, menu)?));
    }
    let mut failure = None;
    let best = golden_max(
        |x| match eu_at_angle(model, x, menu) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        tol,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}

/// Unit vector from hyperspherical angles.
fn from_spherical(phi: &[f64]) -> Vec<f64> {
    let k = phi.len() + 1;
    let mut w = vec![0.0; k];
    let mut prod = 1.0;
    for i in 0..phi.len() {
        w[i] = prod * phi[i].cos();
        prod *= phi[i].sin();
    }
    w[k - 1] = prod;
    w
}

fn best_direction_lattice(
    model: &ValueModel,
    menu: &Menu,
    config: &SearchConfig,
) -> Result<BestResponse> {
    let k = model.k();
    let dims = k - 1;
    let m = config.lattice_per_dim;
    // Lines through the origin: the last angle only needs [0, π).
    let coord = |i: usize, j: usize| -> f64 {
        if i + 1 == dims {
            PI * j as f64 / m as f64
        } else {
            PI * j as f64 / (m - 1) as f64
        }
    };
    let cells = (m as u64).saturating_pow(dims as u32);
    if cells > LATTICE_LIMIT {
        return Err(Error::Budget {
            cells,
            limit: LATTICE_LIMIT,
            suggestion: "lower lattice_per_dim".into(),
        });
    }
    let cells = cells as usize;
    let index = |mut c: usize| -> Vec<usize> {
        let mut out = vec![0; dims];
        for slot in out.iter_mut() {
            *slot = c % m;
            c /= m;
        }
        out
    };
    let points: Vec<Vec<f64>> = (0..cells)
        .map(|c| index(c).iter().enumerate().map(|(i, &j)| coord(i, j)).collect())
        .collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|phi| expected_utility(model, &Direction::new(from_spherical(phi))?, menu))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..cells).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));

    let eval = |phi: &[f64]| -> f64 {
        Direction::new(from_spherical(phi))
            .and_then(|d| expected_utility(model, &d, menu))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let step = PI / (m - 1) as f64;
    let mut candidates: Vec<(Direction, f64, f64)> = Vec::new();
    for (rank, &c) in order.iter().take(5).enumerate() {
        let (phi, value) = nelder_mead_max(eval, &points[c], 0.5 * step, config.refine_tol, 4000);
        let (phi, value) = if value >= values[c] { (phi, value) } else { (points[c].clone(), values[c]) };
        candidates.push((Direction::new(from_spherical(&phi))?, value, rank as f64));
    }
    // Canonical vertical candidates so exact ties can resolve toward them.
    let mut extra = vec![vec![1.0; k]];
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        extra.push(e);
    }
    for (i, w) in extra.into_iter().enumerate() {
        let d = Direction::new(w)?;
        let v = expected_utility(model, &d, menu)?;
        candidates.push((d, v, 5.0 + i as f64));
    }
    let (direction, value, _) = select(model, &candidates).clone();

    let mut slack = 0.0_f64;
    for c in 0..cells {
        let idx = index(c);
        for i in 0..dims {
            if idx[i] + 1 < m {
                let mut nb = idx.clone();
                nb[i] += 1;
                let nc = nb.iter().rev().fold(0, |acc, &j| acc * m + j);
                let bound = values[c].max(values[nc]) + 0.5 * (values[c] - values[nc]).abs();
                slack = slack.max(bound - value);
            }
        }
    }
    let spread = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let search_trace = points
        .iter()
        .zip(&values)
        .map(|(phi, v)| TraceEntry {
            weights: from_spherical(phi),
            expected_utility: *v,
        })
        .chain(candidates.iter().map(|(d, v, _)| TraceEntry {
            weights: d.weights().to_vec(),
            expected_utility: *v,
        }))
        .collect();
    Ok(BestResponse {
        vertical: model.is_vertical(&direction),
        indeterminate: spread <= 1e-15 && value <= 1e-15,
        direction,
        expected_utility: value,
        slack,
        search_trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BuyerCommitment {
    pub direction: Direction,
    pub menu: Menu,
    pub buyer_utility: f64,
    pub revenue: f64,
}

/// Buyer's utility when the seller best-responds to `direction`.
pub fn committed_utility(model: &ValueModel, direction: &Direction) -> Result<(f64, Menu, f64)> {
    let line = model.posterior_line(direction)?;
    let mech = optimal_mechanism(&line)?;
    let menu = extract_menu(&mech)?;
    Ok((buyer_utility(&mech, &line), menu, mech.revenue))
}

/// Direction maximizing the buyer's utility when he commits first and the
/// seller best-responds. Two goods only.
pub fn buyer_commitment_optimum(model: &ValueModel, config: &SearchConfig) -> Result<BuyerCommitment> {
    config.validate()?;
    if model.k() != 2 {
        return Err(Error::Argument(format!(
            "buyer commitment search needs two goods, scenario has {}",
            model.k()
        )));
    }
    let n = config.angle_grid;
    let step = PI / n as f64;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| committed_utility(model, &Direction::from_angle(j as f64 * step)).map(|r| r.0))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));

    let mut candidates: Vec<(Direction, f64, f64)> = Vec::new();
    for &j in order.iter().take(3) {
        let centre = j as f64 * step;
        let mut failure = None;
        let (angle, value) = golden_max(
            |x| match committed_utility(model, &Direction::from_angle(x)) {
                Ok(r) => r.0,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            centre - step,
            centre + step,
            config.refine_tol,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let (angle, value) = if value >= values[j] { (angle.rem_euclid(PI), value) } else { (centre, values[j]) };
        candidates.push((Direction::from_angle(angle), value, angle));
    }
    let (direction, _, _) = select(model, &candidates).clone();
    let (buyer_utility, menu, revenue) = committed_utility(model, &direction)?;
    Ok(BuyerCommitment {
        direction,
        menu,
        buyer_utility,
        revenue,
    })
}
