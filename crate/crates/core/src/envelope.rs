//! Upper envelope of the buyer's payoff lines along a type line.

use serde::Serialize;

use crate::menu::Menu;
use crate::value_model::TypeLine;

/// Lines closer than this (relative to the payoff scale) are identical.
const TIE: f64 = 1e-9;

/// A maximal piece of `[0, 1]` on which one option is chosen.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSegment {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Index into the menu, `None` for the null option.
    pub option: Option<usize>,
    /// Payoff slope `Σ a_i x_i`.
    pub slope: f64,
    /// Payoff intercept `Σ b_i x_i - p`.
    pub intercept: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSegments {
    pub segments: Vec<EnvelopeSegment>,
}

#[derive(Clone, Copy)]
struct Candidate {
    option: Option<usize>,
    slope: f64,
    intercept: f64,
    price: f64,
}

impl EnvelopeSegments {
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.segments.iter().map(|s| s.t_lo).collect();
        if let Some(last) = self.segments.last() {
            out.push(last.t_hi);
        }
        out
    }

    /// Buyer's expected utility `Σ ∫ (A t + B) dF`.
    pub fn expected_utility(&self, line: &TypeLine) -> f64 {
        let dist = line.dist();
        self.segments
            .iter()
            .map(|s| s.slope * dist.m1(s.t_lo, s.t_hi) + s.intercept * dist.m0(s.t_lo, s.t_hi))
            .sum()
    }

    /// Seller's expected revenue `Σ p F(segment)`.
    pub fn revenue(&self, line: &TypeLine) -> f64 {
        let dist = line.dist();
        self.segments
            .iter()
            .map(|s| s.price * dist.m0(s.t_lo, s.t_hi))
            .sum()
    }

    /// Indices of menu options chosen on a set of positive measure.
    pub fn chosen(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .segments
            .iter()
            .filter(|s| s.t_hi > s.t_lo)
            .filter_map(|s| s.option)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn option_at(&self, t: f64) -> Option<usize> {
        self.segments
            .iter()
            .find(|s| s.t_lo <= t && t <= s.t_hi)
            .and_then(|s| s.option)
    }
}

/// Exact upper envelope of `max(0, max_j A_j t + B_j)` over `t ∈ [0, 1]`.
///
/// Ties in payoff go to the steeper line; identical lines go to the higher
/// price, so indifferent buyers side with the seller.
pub fn envelope(line: &TypeLine, menu: &Menu) -> EnvelopeSegments {
    let mut candidates = vec![Candidate {
        option: None,
        slope: 0.0,
        intercept: 0.0,
        price: 0.0,
    }];
    for (j, o) in menu.options.iter().enumerate() {
        let (a, b) = line.value_line(&o.lottery);
        candidates.push(Candidate {
            option: Some(j),
            slope: a,
            intercept: b - o.price,
            price: o.price,
        });
    }
    let scale = candidates
        .iter()
        .fold(1.0_f64, |m, c| m.max(c.slope.abs()).max(c.intercept.abs()));
    let tol = TIE * scale;

    let pick = |t: f64| -> Candidate {
        let top = candidates
            .iter()
            .map(|c| c.slope * t + c.intercept)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut best: Option<Candidate> = None;
        for c in candidates.iter().filter(|c| c.slope * t + c.intercept >= top - tol) {
            best = Some(match best {
                None => *c,
                Some(b) if c.slope > b.slope + tol => *c,
                Some(b) if (c.slope - b.slope).abs() <= tol && c.price > b.price => *c,
                Some(b) => b,
            });
        }
        best.expect("null option is always a candidate")
    };

    let mut segments: Vec<EnvelopeSegment> = Vec::new();
    let mut t = 0.0;
    let mut current = pick(0.0);
    loop {
        let mut next = 1.0;
        for c in &candidates {
            if c.slope > current.slope + tol {
                let cross = (current.intercept - c.intercept) / (c.slope - current.slope);
                if cross < next {
                    next = cross.max(t);
                }
            }
        }
        push_segment(&mut segments, t, next, &current);
        if next >= 1.0 {
            break;
        }
        t = next;
        let after = pick(t);
        // Steeper lines only ever take over, so this terminates.
        current = if after.slope > current.slope + tol {
            after
        } else {
            let steeper = candidates
                .iter()
                .filter(|c| c.slope > current.slope + tol)
                .max_by(|x, y| {
                    (x.slope * t + x.intercept)
                        .total_cmp(&(y.slope * t + y.intercept))
                        .then(x.slope.total_cmp(&y.slope))
                });
            match steeper {
                Some(c) => *c,
                None => break,
            }
        };
    }
    EnvelopeSegments { segments }
}

fn push_segment(out: &mut Vec<EnvelopeSegment>, lo: f64, hi: f64, c: &Candidate) {
    if hi <= lo {
        return;
    }
    if let Some(last) = out.last_mut() {
        if last.option == c.option {
            last.t_hi = hi;
            return;
        }
    }
    out.push(EnvelopeSegment {
        t_lo: lo,
        t_hi: hi,
        option: c.option,
        slope: c.slope,
        intercept: c.intercept,
        price: c.price,
    });
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::menu::MenuOption;
    use crate::value_model::SignalDistribution;

    fn line(a: Vec<f64>, b: Vec<f64>) -> TypeLine {
        TypeLine::new(a, b, Arc::new(SignalDistribution::new(2, 1.0).unwrap())).unwrap()
    }

    #[test]
    fn empty_menu_is_null() {
        let l = line(vec![2.0, 2.0], vec![0.0, 0.0]);
        let env = envelope(&l, &Menu::empty());
        assert_eq!(env.segments.len(), 1);
        assert_eq!(env.expected_utility(&l), 0.0);
    }

    #[test]
    fn single_bundle_threshold() {
        let l = line(vec![2.0, 2.0], vec![0.0, 0.0]);
        let menu = Menu::new(vec![MenuOption::bundle(2, &[0, 1], 3.12)]).unwrap();
        let env = envelope(&l, &menu);
        assert_eq!(env.segments.len(), 2);
        assert!((env.segments[1].t_lo - 0.78).abs() < 1e-12);
        let d = l.dist();
        assert!((env.revenue(&l) - 3.12 * d.sf(0.78)).abs() < 1e-12);
        let direct = 4.0 * d.m1(0.78, 1.0) - 3.12 * d.m0(0.78, 1.0);
        assert!((env.expected_utility(&l) - direct).abs() < 1e-12);
    }

    #[test]
    fn indifferent_buyer_takes_the_priced_option() {
        // Zero-slope rationing option that leaves no rent.
        let l = line(vec![4.0, -3.6], vec![0.0, 3.8]);
        let menu = Menu::new(vec![MenuOption::new(vec![0.9, 1.0], 3.8)]).unwrap();
        let env = envelope(&l, &menu);
        assert_eq!(env.segments.len(), 1);
        assert_eq!(env.segments[0].option, Some(0));
        assert!((env.revenue(&l) - 3.8).abs() < 1e-12);
    }

    #[test]
    fn nested_chain_is_convex() {
        let l = line(vec![2.0, 1.0], vec![0.0, 1.0]);
        let menu = Menu::new(vec![
            MenuOption::bundle(2, &[1], 1.2),
            MenuOption::bundle(2, &[0, 1], 2.6),
            MenuOption::bundle(2, &[0], 5.0),
        ])
        .unwrap();
        let env = envelope(&l, &menu);
        let slopes: Vec<f64> = env.segments.iter().map(|s| s.slope).collect();
        assert!(slopes.windows(2).all(|w| w[1] > w[0]));
        for s in &env.segments {
            for t in [s.t_lo, 0.5 * (s.t_lo + s.t_hi), s.t_hi] {
                let mine = s.slope * t + s.intercept;
                for o in &menu.options {
                    let (a, b) = l.value_line(&o.lottery);
                    assert!(mine >= a * t + b - o.price - 1e-12);
                }
                assert!(mine >= -1e-12);
            }
        }
        assert_eq!(env.chosen(), vec![0, 1]);
    }
}
