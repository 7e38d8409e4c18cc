//! The seller's optimal mechanism against a type line, its menu, prices and
//! optimality certificate.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::auxiliary::{solve_auxiliary, zero_tolerance, AuxSolution};
use crate::envelope::envelope;
use crate::error::{Error, Result};
use crate::ironing::{find_worst_off, iron, g_diag, CLAMP};
pub use crate::menu::{Menu, MenuOption};
use crate::value_model::TypeLine;

const CERTIFICATE_GRID: usize = 200;
const CERTIFICATE_TOL: f64 = 1e-5;

/// Types `[t_lo, t_hi)` all receive `lottery` at `price`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub t_lo: f64,
    pub t_hi: f64,
    pub lottery: Vec<f64>,
    pub price: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Mechanism {
    pub segments: Vec<Segment>,
    pub t0_star: f64,
    pub t0_bar: f64,
    pub lambda: f64,
    /// Allocation thresholds `t_i*` of goods sold by type cutoff.
    pub thresholds: BTreeMap<usize, f64>,
    pub revenue: f64,
    pub vertical: bool,
    pub aux: AuxSolution,
}

impl Mechanism {
    /// Allocation of type `t`; thresholds are closed from above.
    pub fn allocation(&self, t: f64) -> &[f64] {
        let seg = self
            .segments
            .iter()
            .find(|s| t < s.t_hi)
            .unwrap_or_else(|| self.segments.last().expect("mechanism has a segment"));
        &seg.lottery
    }

    pub fn price(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| t < s.t_hi)
            .unwrap_or_else(|| self.segments.last().expect("mechanism has a segment"))
            .price
    }

    /// Whether some type buys a zero-slope rationing lottery.
    pub fn has_rationing(&self) -> bool {
        !self.vertical && self.t0_bar > 0.0 && self.aux.x_dagger.iter().any(|&x| x > 0.0)
    }
}

/// Indirect utility `U(t) = θ(t)·x(t) - p(t)`.
pub fn indirect_utility(mech: &Mechanism, line: &TypeLine, t: f64) -> f64 {
    let (a, b) = line.value_line(mech.allocation(t));
    a * t + b - mech.price(t)
}

/// Seller's optimal direct mechanism for the types on `line`.
pub fn optimal_mechanism(line: &TypeLine) -> Result<Mechanism> {
    let k = line.dim();
    let aux = solve_auxiliary(&line.a, &line.b)?;
    let tol = zero_tolerance(&line.a);
    let vertical = line.is_vertical();

    let mut thresholds = BTreeMap::new();
    let (t0_star, t0_bar, lambda, base, rationed): (f64, f64, f64, Vec<f64>, Vec<usize>);
    if vertical {
        let curve = iron(line, 0.0)?;
        let mut always = vec![0.0; k];
        for i in 0..k {
            if line.a[i] <= tol {
                always[i] = 1.0;
            } else {
                thresholds.insert(i, threshold(&curve, line, i, 0.0)?);
            }
        }
        (t0_star, t0_bar, lambda) = (0.0, 0.0, aux.lambda);
        base = always;
        rationed = Vec::new();
    } else {
        lambda = aux.lambda;
        let g_top = g_diag(line, 1.0 - CLAMP)?;
        if lambda >= g_top {
            // Ironing swallows every type: one rationing option for all.
            let price: f64 = aux.x_dagger.iter().zip(&line.b).map(|(x, b)| x * b).sum();
            let segments = vec![Segment {
                t_lo: 0.0,
                t_hi: 1.0,
                lottery: aux.x_dagger.clone(),
                price,
            }];
            return Ok(Mechanism {
                segments,
                t0_star: 1.0,
                t0_bar: 1.0,
                lambda,
                thresholds,
                revenue: price,
                vertical,
                aux,
            });
        }
        let worst = find_worst_off(line, lambda)?;
        (t0_star, t0_bar) = (worst.t0_star, worst.t0_bar);
        let mut full = vec![0.0; k];
        for &i in aux.i_minus.iter().chain(&aux.i_star) {
            full[i] = 1.0;
        }
        for &i in &aux.i_plus_nonbal {
            thresholds.insert(i, threshold(&worst.curve, line, i, t0_bar)?);
        }
        base = full;
        rationed = (0..k).collect();
    }

    snap_thresholds(&mut thresholds, t0_bar);

    // Breakpoints: the end of the rationing region and every threshold.
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    if t0_bar > 0.0 {
        cuts.push(t0_bar.min(1.0));
    }
    cuts.extend(thresholds.values().copied());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);

    let mut raw: Vec<(f64, f64, Vec<f64>)> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let lottery = if !rationed.is_empty() && lo < t0_bar {
            aux.x_dagger.clone()
        } else {
            let mut x = base.clone();
            for (&i, &ti) in &thresholds {
                if lo >= ti {
                    x[i] = 1.0;
                }
            }
            x
        };
        match raw.last_mut() {
            Some(last) if same_lottery(&last.2, &lottery) => last.1 = hi,
            _ => raw.push((lo, hi, lottery)),
        }
    }

    // Envelope prices: U(0) = 0 and U' = Σ a_i x_i.
    let mut segments = Vec::with_capacity(raw.len());
    let mut utility = 0.0;
    for (lo, hi, lottery) in raw {
        let (slope, intercept) = line.value_line(&lottery);
        let price = slope * lo + intercept - utility;
        utility += slope * (hi - lo);
        segments.push(Segment {
            t_lo: lo,
            t_hi: hi,
            lottery,
            price,
        });
    }
    let dist = line.dist();
    let revenue = segments
        .iter()
        .map(|s| s.price * dist.m0(s.t_lo, s.t_hi))
        .sum();
    Ok(Mechanism {
        segments,
        t0_star,
        t0_bar,
        lambda,
        thresholds,
        revenue,
        vertical,
        aux,
    })
}

/// Thresholds this close describe the same cut; keeping them apart would
/// only sell an extra option to a negligible set of types.
const SNAP: f64 = 1e-7;

fn snap_thresholds(thresholds: &mut BTreeMap<usize, f64>, t0_bar: f64) {
    let mut order: Vec<(usize, f64)> = thresholds.iter().map(|(&i, &t)| (i, t)).collect();
    order.sort_by(|x, y| x.1.total_cmp(&y.1));
    let mut anchor = if t0_bar > 0.0 { Some(t0_bar) } else { None };
    for (i, t) in order {
        match anchor {
            Some(a) if t - a <= SNAP => {
                thresholds.insert(i, a);
            }
            _ => anchor = Some(t),
        }
    }
}

fn threshold(
    curve: &crate::ironing::VirtualCurve,
    line: &TypeLine,
    i: usize,
    lo: f64,
) -> Result<f64> {
    curve.crossing(line.a[i], line.b[i], lo).ok_or_else(|| {
        Error::numeric(
            "mechanism",
            format!(
                "no allocation threshold for good {i} in ({lo}, 1]: a = {}, b = {}, \
                 Φ̄(1) = {}, ironing intervals {:?}",
                line.a[i],
                line.b[i],
                curve.phibar_at(1.0),
                curve.intervals
            ),
        )
    })
}

fn same_lottery(x: &[f64], y: &[f64]) -> bool {
    x.iter().zip(y).all(|(p, q)| (p - q).abs() <= 1e-12)
}

/// Result of checking that `t0*` minimizes expected virtual surplus.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub passed: bool,
    pub r_at_t0: f64,
    pub r_min: f64,
    pub t_min: f64,
    pub margin: f64,
}

/// Expected virtual surplus `R(t̂) = E[Σ a_i x_i(t) Φ(t; t̂) + b_i x_i(t)]`
/// in closed form: `∫ Φ f` is `[t F]` below `t̂` and `[-t (1 - F)]` above.
pub fn virtual_surplus(mech: &Mechanism, line: &TypeLine, t_hat: f64) -> f64 {
    let dist = line.dist();
    let lower = |t: f64| t * dist.cdf(t);
    let upper = |t: f64| -t * dist.sf(t);
    mech.segments
        .iter()
        .map(|s| {
            let (slope, intercept) = line.value_line(&s.lottery);
            let mut phi_mass = 0.0;
            let split = t_hat.clamp(s.t_lo, s.t_hi);
            phi_mass += lower(split) - lower(s.t_lo);
            phi_mass += upper(s.t_hi) - upper(split);
            slope * phi_mass + intercept * dist.m0(s.t_lo, s.t_hi)
        })
        .sum()
}

pub fn worst_off_certificate(mech: &Mechanism, line: &TypeLine) -> Certificate {
    let r_at_t0 = virtual_surplus(mech, line, mech.t0_star);
    let (mut r_min, mut t_min) = (r_at_t0, mech.t0_star);
    for j in 0..CERTIFICATE_GRID {
        let t = j as f64 / (CERTIFICATE_GRID - 1) as f64;
        let r = virtual_surplus(mech, line, t);
        if r < r_min {
            (r_min, t_min) = (r, t);
        }
    }
    let scale = 1.0 + line.value_span();
    let margin = r_min + CERTIFICATE_TOL * scale - r_at_t0;
    Certificate {
        passed: margin >= 0.0,
        r_at_t0,
        r_min,
        t_min,
        margin,
    }
}

/// Buyer's expected utility `E[U(t)]` under the mechanism.
pub fn buyer_utility(mech: &Mechanism, line: &TypeLine) -> f64 {
    let dist = line.dist();
    mech.segments
        .iter()
        .map(|s| {
            let (slope, intercept) = line.value_line(&s.lottery);
            slope * dist.m1(s.t_lo, s.t_hi) + (intercept - s.price) * dist.m0(s.t_lo, s.t_hi)
        })
        .sum()
}

/// Seller revenue from `menu` when types on `line` choose optimally.
pub fn revenue(menu: &Menu, line: &TypeLine) -> f64 {
    envelope(line, menu).revenue(line)
}

/// Distinct options sold by the mechanism, excluding the null option.
pub fn extract_menu(mech: &Mechanism) -> Result<Menu> {
    let mut options: Vec<MenuOption> = Vec::new();
    for s in &mech.segments {
        let null = s.lottery.iter().all(|&x| x == 0.0);
        if null && s.price.abs() <= 1e-12 {
            continue;
        }
        let price = if s.price.abs() <= 1e-12 { 0.0 } else { s.price };
        let option = MenuOption::new(s.lottery.clone(), price);
        if !options
            .iter()
            .any(|o| same_lottery(&o.lottery, &option.lottery) && (o.price - price).abs() <= 1e-12)
        {
            options.push(option);
        }
    }
    let menu = Menu::new(options)?;
    if mech.vertical && !menu.is_nested() && menu.len() > 1 {
        return Err(Error::invariant(
            "mechanism",
            format!("vertical mechanism produced a non-nested menu: {menu:?}"),
        ));
    }
    Ok(menu)
}

/// Separate-sales price of each threshold good: its posterior value at the
/// threshold type.
pub fn separate_sales_prices(mech: &Mechanism, line: &TypeLine) -> Vec<Option<f64>> {
    (0..line.dim())
        .map(|i| {
            mech.thresholds
                .get(&i)
                .map(|&t| line.a[i] * t + line.b[i])
        })
        .collect()
}

/// Largest IC or IR violation at type `t` across all segment options.
pub fn incentive_violation(mech: &Mechanism, line: &TypeLine, t: f64) -> f64 {
    let own = indirect_utility(mech, line, t);
    let mut worst = (-own).max(0.0);
    for s in &mech.segments {
        let (a, b) = line.value_line(&s.lottery);
        worst = worst.max(a * t + b - s.price - own);
    }
    worst
}
