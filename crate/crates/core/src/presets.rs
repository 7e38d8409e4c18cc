//! Scenarios of the worked examples.

use crate::error::{Error, Result};
use crate::value_model::Scenario;

pub const NAMES: [&str; 7] = ["intro", "perturbed", "fig2_right", "fig3", "fig4", "fig6", "buyer_first"];

/// Exchangeable two-good market, values on a disc around (2, 2).
pub fn intro() -> Scenario {
    Scenario::new(vec![2.0, 2.0], vec![2.0, 2.0], 0.0, 1.0).expect("valid preset")
}

/// Intro with the second mean raised to 2.05 (left panel of Fig. 2).
pub fn perturbed() -> Scenario {
    Scenario::new(vec![2.0, 2.05], vec![2.0, 2.0], 0.0, 1.0).expect("valid preset")
}

/// Perturbed intro with slight negative correlation.
pub fn fig2_right() -> Scenario {
    Scenario::new(vec![2.0, 2.05], vec![2.0, 2.0], -0.005, 1.0).expect("valid preset")
}

pub fn fig3() -> Scenario {
    Scenario::new(vec![1.0, 2.0], vec![1.0, 1.0], 0.5, 1.0).expect("valid preset")
}

/// Strong negative correlation, exchangeable.
pub fn fig4() -> Scenario {
    Scenario::new(vec![2.0, 2.0], vec![2.0, 2.0], -0.9, 1.0).expect("valid preset")
}

/// Seller-first commitment example. The radius is chosen so the support
/// stays in the nonnegative orthant with σ = 4.
pub fn fig6() -> Scenario {
    Scenario::new(vec![2.0, 2.0], vec![4.0, 4.0], -0.4, 0.5).expect("valid preset")
}

/// Buyer-first commitment example, radius at the orthant limit.
pub fn buyer_first() -> Scenario {
    Scenario::fit_radius(vec![0.2, 0.1], vec![3.0, 1.0], -0.98).expect("valid preset")
}

pub fn by_name(name: &str) -> Result<Scenario> {
    Ok(match name {
        "intro" => intro(),
        "perturbed" | "fig2_left" => perturbed(),
        "fig2_right" => fig2_right(),
        "fig3" => fig3(),
        "fig4" => fig4(),
        "fig6" => fig6(),
        "buyer_first" | "fig7" => buyer_first(),
        _ => {
            return Err(Error::Argument(format!(
                "unknown preset `{name}`; expected one of {}",
                NAMES.join(", ")
            )))
        }
    })
}
