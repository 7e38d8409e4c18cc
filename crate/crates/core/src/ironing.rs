//! Virtual values stitched at a conjectured worst-off type, their ironing,
//! and the search for the worst-off type itself.
//!
//! For a worst-off type `t0` the virtual value is
//!
//! ```text
//! Φ(t; t0) = t + F(t)/f(t)        for t <= t0
//!          = t - (1 - F(t))/f(t)  for t >  t0
//! ```
//!
//! Its quantile integral `H(q) = ∫₀^q Φ(F⁻¹(u)) du` has the closed form
//! `q F⁻¹(q)` below `F(t0)` and `t0 - (1 - q) F⁻¹(q)` above, so ironing only
//! needs the lower convex hull of `H` on a quantile grid.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::value_model::{SignalDistribution, TypeLine};

/// Types are clamped to `[CLAMP, 1 - CLAMP]` before dividing by the density.
pub const CLAMP: f64 = 1e-6;
const BRACKET: f64 = 1e-4;
const ROOT_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 64;
const REFINE_ROUNDS: usize = 4;

/// `Φ(t; t0)` for the distribution `dist`.
pub fn virtual_value(dist: &SignalDistribution, t: f64, t0: f64) -> f64 {
    let t = t.clamp(CLAMP, 1.0 - CLAMP);
    let f = dist.pdf(t);
    if t <= t0 {
        t + dist.cdf(t) / f
    } else {
        t - dist.sf(t) / f
    }
}

/// `Φ(t; t0)` for the type distribution of `line`.
pub fn phi(line: &TypeLine, t: f64, t0: f64) -> f64 {
    virtual_value(line.dist(), t, t0)
}

/// Quantile and quantile integral `(F(t), H(F(t); t0))`.
fn quantile_integral(dist: &SignalDistribution, t: f64, t0: f64) -> (f64, f64) {
    if t <= t0 {
        let q = dist.cdf(t);
        (q, t * q)
    } else {
        let s = dist.sf(t);
        (1.0 - s, t0 - t * s)
    }
}

/// A maximal interval on which the ironed virtual value is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IroningInterval {
    pub t_lo: f64,
    pub t_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub level: f64,
}

impl IroningInterval {
    pub fn contains(&self, t: f64) -> bool {
        self.t_lo <= t && t < self.t_hi
    }
}

/// `Φ(·; t0)` and its ironing `Φ̄(·; t0)` on a quantile-uniform grid.
#[derive(Debug, Clone)]
pub struct VirtualCurve {
    pub t0: f64,
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub phibar: Vec<f64>,
    pub intervals: Vec<IroningInterval>,
    dist: Arc<SignalDistribution>,
}

impl VirtualCurve {
    /// Ironed virtual value at any `t ∈ [0, 1]`.
    pub fn phibar_at(&self, t: f64) -> f64 {
        match self.interval_containing(t) {
            Some(iv) => iv.level,
            None => virtual_value(&self.dist, t, self.t0),
        }
    }

    pub fn phi_at(&self, t: f64) -> f64 {
        virtual_value(&self.dist, t, self.t0)
    }

    pub fn interval_containing(&self, t: f64) -> Option<&IroningInterval> {
        self.intervals.iter().find(|iv| iv.contains(t))
    }

    pub fn dist(&self) -> &SignalDistribution {
        &self.dist
    }

    /// Smallest `t ∈ [lo, 1]` with `a Φ̄(t) + b >= 0` for `a > 0`, or `None`
    /// when the crossing lies beyond `1 - CLAMP`.
    pub fn crossing(&self, a: f64, b: f64, lo: f64) -> Option<f64> {
        let value = |t: f64| a * self.phibar_at(t) + b;
        let hi = 1.0 - CLAMP;
        if value(hi) < 0.0 {
            return None;
        }
        let mut lo = lo.max(0.0);
        if value(lo) >= 0.0 {
            return Some(lo);
        }
        let mut hi = hi;
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if value(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }
}

/// Lower convex hull of points sorted by abscissa; returns vertex indices.
fn lower_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for p in 0..x.len() {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (x[a] - x[o]) * (y[p] - y[o]) - (y[a] - y[o]) * (x[p] - x[o]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Upward crossing of `Φ(·; t0) = level` inside `[lo, hi]`, if bracketed.
fn tangency(dist: &SignalDistribution, t0: f64, level: f64, lo: f64, hi: f64) -> Option<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if virtual_value(dist, lo, t0) > level || virtual_value(dist, hi, t0) < level {
        return None;
    }
    for _ in 0..100 {
        if hi - lo < 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if virtual_value(dist, mid, t0) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Irons `Φ(·; t0)` for the type distribution of `line`.
pub fn iron(line: &TypeLine, t0: f64) -> Result<VirtualCurve> {
    iron_dist(&line.dist_arc(), t0)
}

pub(crate) fn iron_dist(dist: &Arc<SignalDistribution>, t0: f64) -> Result<VirtualCurve> {
    if !(0.0..=1.0).contains(&t0) {
        return Err(Error::Argument(format!("worst-off type {t0} outside [0, 1]")));
    }
    let quantiles = dist.quantile_grid();
    let n = quantiles.len() - 1;
    if n < 2 {
        return Err(Error::numeric("ironing", "quantile grid has fewer than 3 nodes"));
    }
    let q0 = dist.cdf(t0);

    let mut q = Vec::with_capacity(n + 2);
    let mut t = Vec::with_capacity(n + 2);
    let mut inserted = false;
    for (j, &tj) in quantiles.iter().enumerate() {
        let qj = j as f64 / n as f64;
        if !inserted && qj >= q0 {
            if (qj - q0).abs() > 1e-15 {
                q.push(q0);
                t.push(t0);
            }
            inserted = true;
        }
        q.push(qj);
        t.push(tj);
    }
    let h: Vec<f64> = q
        .iter()
        .zip(&t)
        .map(|(&qj, &tj)| if tj <= t0 { qj * tj } else { t0 - (1.0 - qj) * tj })
        .collect();
    let phi: Vec<f64> = t.iter().map(|&tj| virtual_value(dist, tj, t0)).collect();

    let hull = lower_hull(&q, &h);
    let scale = 1.0 + h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let gap_tol = 1e-12 * scale;

    let mut phibar = vec![0.0; q.len()];
    let mut intervals = Vec::new();
    for w in hull.windows(2) {
        let (i, j) = (w[0], w[1]);
        let slope = (h[j] - h[i]) / (q[j] - q[i]);
        for value in &mut phibar[i..j] {
            *value = slope;
        }
        if j - i < 2 {
            continue;
        }
        let gap = (i + 1..j)
            .map(|m| h[m] - (h[i] + slope * (q[m] - q[i])))
            .fold(0.0_f64, f64::max);
        if gap <= gap_tol {
            continue;
        }
        intervals.push(refine_interval(dist, t0, &q, &t, &h, i, j));
    }
    let last = hull[hull.len() - 2..].to_vec();
    phibar[q.len() - 1] = (h[last[1]] - h[last[0]]) / (q[last[1]] - q[last[0]]);

    for iv in &intervals {
        for (k, &tk) in t.iter().enumerate() {
            if iv.contains(tk) || (iv.t_hi >= 1.0 && tk >= 1.0) {
                phibar[k] = iv.level;
            }
        }
    }

    Ok(VirtualCurve {
        t0,
        grid: t,
        phi,
        phibar,
        intervals,
        dist: Arc::clone(dist),
    })
}

/// Moves the end points of hull edge `(i, j)` to the exact tangency points.
fn refine_interval(
    dist: &SignalDistribution,
    t0: f64,
    q: &[f64],
    t: &[f64],
    h: &[f64],
    i: usize,
    j: usize,
) -> IroningInterval {
    let last = q.len() - 1;
    let (mut tl, mut ql, mut hl) = (t[i], q[i], h[i]);
    let (mut tr, mut qr, mut hr) = (t[j], q[j], h[j]);
    for _ in 0..REFINE_ROUNDS {
        let level = (hr - hl) / (qr - ql);
        if i > 0 {
            if let Some(x) = tangency(dist, t0, level, t[i - 1], t[i + 1]) {
                tl = x;
                (ql, hl) = quantile_integral(dist, x, t0);
            }
        }
        if j < last {
            if let Some(x) = tangency(dist, t0, level, t[j - 1], t[j + 1]) {
                tr = x;
                (qr, hr) = quantile_integral(dist, x, t0);
            }
        }
    }
    IroningInterval {
        t_lo: if i == 0 { 0.0 } else { tl },
        t_hi: if j == last { 1.0 } else { tr },
        q_lo: if i == 0 { 0.0 } else { ql },
        q_hi: if j == last { 1.0 } else { qr },
        level: (hr - hl) / (qr - ql),
    }
}

/// `g(t0) = Φ̄(t0; t0)`.
pub fn g_diag(line: &TypeLine, t0: f64) -> Result<f64> {
    g_dist(&line.dist_arc(), t0)
}

fn g_dist(dist: &Arc<SignalDistribution>, t0: f64) -> Result<f64> {
    Ok(iron_dist(dist, t0)?.phibar_at(t0))
}

/// Worst-off type for multiplier `lambda` and the ironing interval `[0, t̄₀]`
/// that contains it.
#[derive(Debug, Clone)]
pub struct WorstOff {
    pub t0_star: f64,
    pub t0_bar: f64,
    pub lambda: f64,
    pub curve: VirtualCurve,
}

/// Solves `g(t0) = lambda`, taking the smallest root found by a grid scan.
pub fn find_worst_off(line: &TypeLine, lambda: f64) -> Result<WorstOff> {
    let dist = line.dist_arc();
    if line.is_vertical() {
        return Ok(WorstOff {
            t0_star: 0.0,
            t0_bar: 0.0,
            lambda,
            curve: iron_dist(&dist, 0.0)?,
        });
    }
    let g = |t0: f64| g_dist(&dist, t0);
    let diagnostics = |g0: f64, g1: f64| {
        Error::numeric(
            "ironing",
            format!("cannot bracket g(t0) = {lambda}: g(0) = {g0:.6e}, g(1) = {g1:.6e}"),
        )
    };

    let mut lo = BRACKET;
    let mut g_lo = g(lo)?;
    if g_lo >= lambda {
        lo = CLAMP;
        g_lo = g(lo)?;
    }
    let mut hi = 1.0 - BRACKET;
    let mut g_hi = g(hi)?;
    if g_hi < lambda {
        hi = 1.0 - CLAMP;
        g_hi = g(hi)?;
    }
    if g_lo >= lambda || g_hi < lambda {
        return Err(diagnostics(g_lo, g_hi));
    }

    let mut prev = lo;
    for k in 1..=SCAN_POINTS {
        let x = lo + (hi - lo) * k as f64 / SCAN_POINTS as f64;
        let gx = if k == SCAN_POINTS { g_hi } else { g(x)? };
        if gx >= lambda {
            hi = x;
            break;
        }
        prev = x;
    }
    let mut lo = prev;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid)? >= lambda {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t0_star = 0.5 * (lo + hi);
    let curve = iron_dist(&dist, t0_star)?;
    let interval = *curve.interval_containing(t0_star).ok_or_else(|| {
        Error::invariant("ironing", format!("no ironing interval contains t0* = {t0_star}"))
    })?;
    if interval.t_lo > 0.0 {
        return Err(Error::invariant(
            "ironing",
            format!(
                "ironing interval [{}, {}] around t0* = {t0_star} does not start at 0",
                interval.t_lo, interval.t_hi
            ),
        ));
    }
    Ok(WorstOff {
        t0_star,
        t0_bar: interval.t_hi,
        lambda,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist() -> Arc<SignalDistribution> {
        Arc::new(SignalDistribution::new(2, 1.0).unwrap())
    }

    fn intro_horizontal() -> TypeLine {
        let s = 2f64.sqrt();
        TypeLine::new(vec![2.0 * s, -2.0 * s], vec![2.0 - s, 2.0 + s], dist()).unwrap()
    }

    #[test]
    fn branches_at_the_ends() {
        let d = dist();
        let t = 0.37;
        let lower = t + d.cdf(t) / d.pdf(t);
        assert!((virtual_value(&d, t, 1.0) - lower).abs() < 1e-14);
        // The lower branch owns t = t0; the upper one starts right after.
        let f = d.pdf(0.5);
        assert!((virtual_value(&d, 0.5, 0.5) - (0.5 + 0.5 / f)).abs() < 1e-12);
        let right = virtual_value(&d, 0.5 + 1e-12, 0.5);
        assert!((right - (0.5 - 0.5 / f)).abs() < 1e-9);
        assert!(virtual_value(&d, 0.9, 0.0) > 0.0);
        assert!(virtual_value(&d, 0.0, 0.0) < -100.0);
    }

    #[test]
    fn jump_at_t0_forces_ironing() {
        for &t0 in &[0.1, 0.3, 0.5, 0.8] {
            let curve = iron_dist(&dist(), t0).unwrap();
            let iv = curve.interval_containing(t0).expect("interval around t0");
            assert!(iv.t_lo < t0 && t0 < iv.t_hi);
            for (k, w) in curve.phibar.windows(2).enumerate() {
                assert!(w[1] >= w[0] - 1e-12, "t0 {t0} node {k} t {} {:?}", curve.grid[k], w);
            }
        }
    }

    #[test]
    fn no_ironing_when_regular() {
        // Φ(·; 0) is increasing for this F, so only the exact curve remains.
        let curve = iron_dist(&dist(), 0.0).unwrap();
        assert!(curve.intervals.is_empty(), "{:?}", curve.intervals);
    }

    #[test]
    fn hull_is_exact_at_tangency() {
        let d = dist();
        let curve = iron_dist(&d, 0.3).unwrap();
        for iv in &curve.intervals {
            if iv.t_lo > 0.0 {
                assert!((virtual_value(&d, iv.t_lo, 0.3) - iv.level).abs() < 1e-9);
            }
            if iv.t_hi < 1.0 {
                assert!((virtual_value(&d, iv.t_hi, 0.3) - iv.level).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn boundary_signs_of_g() {
        let line = intro_horizontal();
        let aux_max = (2.0 - 2f64.sqrt()) / (2.0 * 2f64.sqrt());
        assert!(g_diag(&line, 0.0).unwrap() < -aux_max);
        assert!(g_diag(&line, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn worst_off_solves_the_diagonal() {
        let line = intro_horizontal();
        let lambda = -(2.0 - 2f64.sqrt()) / (2.0 * 2f64.sqrt());
        let w = find_worst_off(&line, lambda).unwrap();
        assert!((g_diag(&line, w.t0_star).unwrap() - lambda).abs() < 1e-6);
        assert!(w.t0_bar > w.t0_star);
    }

    #[test]
    fn vertical_lines_start_at_zero() {
        let line = TypeLine::new(vec![1.0, 2.0], vec![0.5, 0.0], dist()).unwrap();
        let w = find_worst_off(&line, 0.0).unwrap();
        assert_eq!((w.t0_star, w.t0_bar), (0.0, 0.0));
    }
}
