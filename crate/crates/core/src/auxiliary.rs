//! The auxiliary knapsack: the most valuable zero-slope lottery.
//!
//! ```text
//! max Σ b_i x_i   s.t.  Σ a_i x_i = 0,  x ∈ [0, 1]^K
//! ```
//!
//! Goods with `a_i <= 0` are free to include and fund a budget
//! `B = -Σ_{a_i<=0} a_i`; positive goods are bought with it in decreasing
//! order of `b_i / a_i`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxSolution {
    pub x_dagger: Vec<f64>,
    /// Critical ratio of the marginal good.
    pub kappa: f64,
    /// Multiplier on the zero-slope constraint, `-kappa`.
    pub lambda: f64,
    pub i_minus: Vec<usize>,
    pub i_star: Vec<usize>,
    pub i_plus_nonbal: Vec<usize>,
    pub value: f64,
}

impl AuxSolution {
    pub fn is_balancing(&self, i: usize) -> bool {
        self.i_star.contains(&i)
    }

    pub fn is_negative(&self, i: usize) -> bool {
        self.i_minus.contains(&i)
    }
}

/// Slopes at or below this count as nonpositive.
pub fn zero_tolerance(a: &[f64]) -> f64 {
    1e-12 * a.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
}

pub fn solve_auxiliary(a: &[f64], b: &[f64]) -> Result<AuxSolution> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Argument(format!(
            "auxiliary problem needs equal nonempty slope and intercept vectors ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Argument("auxiliary coefficients must be finite".into()));
    }
    let tol = zero_tolerance(a);
    let k = a.len();
    let mut x = vec![0.0; k];

    let i_minus: Vec<usize> = (0..k).filter(|&i| a[i] <= tol).collect();
    for &i in &i_minus {
        x[i] = 1.0;
    }
    let budget = (-i_minus.iter().map(|&i| a[i]).sum::<f64>()).max(0.0);

    let mut positive: Vec<usize> = (0..k).filter(|&i| a[i] > tol).collect();
    positive.sort_by(|&i, &j| (b[j] / a[j]).total_cmp(&(b[i] / a[i])).then(i.cmp(&j)));

    let mut kappa = 0.0;
    let mut remaining = budget;
    let exhausted = tol * (1.0 + budget);
    let mut start = 0;
    while start < positive.len() && remaining > exhausted {
        let ratio = b[positive[start]] / a[positive[start]];
        let same = |i: usize| (b[i] / a[i] - ratio).abs() <= 1e-12 * ratio.abs().max(1.0);
        let mut end = start;
        while end < positive.len() && same(positive[end]) {
            end += 1;
        }
        let group = &positive[start..end];
        let cap: f64 = group.iter().map(|&i| a[i]).sum();
        let fill = if remaining >= cap { 1.0 } else { remaining / cap };
        for &i in group {
            x[i] = fill;
        }
        remaining -= fill * cap;
        kappa = ratio;
        start = end;
    }

    let i_star: Vec<usize> = positive.iter().copied().filter(|&i| x[i] > 0.0).collect();
    let mut i_plus_nonbal: Vec<usize> = positive.iter().copied().filter(|&i| x[i] == 0.0).collect();
    i_plus_nonbal.sort_unstable();
    let mut i_star_sorted = i_star;
    i_star_sorted.sort_unstable();
    let value = x.iter().zip(b).map(|(xi, bi)| xi * bi).sum();
    Ok(AuxSolution {
        x_dagger: x,
        kappa,
        lambda: if kappa == 0.0 { 0.0 } else { -kappa },
        i_minus,
        i_star: i_star_sorted,
        i_plus_nonbal,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationing_lottery_for_negative_correlation() {
        let s = solve_auxiliary(&[4.0, -3.6], &[0.0, 3.8]).unwrap();
        assert!((s.x_dagger[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.x_dagger[1], 1.0);
        assert!((s.value - 3.8).abs() < 1e-15);
        assert_eq!(s.lambda, 0.0);
        assert!(s.lambda.is_sign_positive());
        assert_eq!(s.i_star, vec![0]);
        assert_eq!(s.i_minus, vec![1]);
    }

    #[test]
    fn all_positive_slopes_buy_nothing() {
        let s = solve_auxiliary(&[1.0, 2.0], &[0.5, 0.1]).unwrap();
        assert_eq!(s.x_dagger, vec![0.0, 0.0]);
        assert!(s.i_star.is_empty());
        assert_eq!(s.i_plus_nonbal, vec![0, 1]);
        assert_eq!(s.kappa, 0.0);
    }

    #[test]
    fn budget_exactly_spent() {
        let s = solve_auxiliary(&[2.0, -1.0, -1.0], &[1.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.x_dagger, vec![1.0, 1.0, 1.0]);
        assert!((s.kappa - 0.5).abs() < 1e-15);
        assert!((s.value - 8.0).abs() < 1e-15);
    }

    #[test]
    fn ties_share_the_fraction() {
        let s = solve_auxiliary(&[1.0, 2.0, -1.5], &[1.0, 2.0, 0.5]).unwrap();
        assert!((s.x_dagger[0] - 0.5).abs() < 1e-15 && (s.x_dagger[1] - 0.5).abs() < 1e-15);
        assert_eq!(s.i_star, vec![0, 1]);
        let slope: f64 = [1.0, 2.0, -1.5].iter().zip(&s.x_dagger).map(|(a, x)| a * x).sum();
        assert!(slope.abs() < 1e-12);
    }

    #[test]
    fn complementary_slackness() {
        let a = [3.0, 1.0, 0.5, -2.0];
        let b = [0.3, 0.5, 1.0, 2.0];
        let s = solve_auxiliary(&a, &b).unwrap();
        for i in 0..4 {
            let reduced = b[i] + s.lambda * a[i];
            if s.i_minus.contains(&i) || s.i_star.contains(&i) {
                assert!(reduced >= -1e-12, "good {i}: {reduced}");
            } else {
                assert!(reduced <= 1e-12, "good {i}: {reduced}");
            }
        }
    }
}
