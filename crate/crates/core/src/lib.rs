//! Revenue-maximizing menus for a multiproduct seller facing a buyer who
//! chooses what to learn about a truncated elliptical value vector.
//!
//! The buyer's signal direction turns the prior into a one-dimensional line of
//! posterior means ([`ValueModel::posterior_line`]). Against a line the seller's
//! optimal mechanism is [`optimal_mechanism`]; against a menu the buyer's best
//! direction is [`best_direction`]; [`find_equilibrium`] iterates the two.
//!
//! ```
//! use bundle_eq::{extract_menu, optimal_mechanism, presets, Direction, ValueModel};
//!
//! let model = ValueModel::new(presets::fig4()).unwrap();
//! let line = model.posterior_line(&Direction::new(vec![1.0, 0.0]).unwrap()).unwrap();
//! let menu = extract_menu(&optimal_mechanism(&line).unwrap()).unwrap();
//! assert_eq!(menu.len(), 2);
//! ```

pub mod auxiliary;
pub mod envelope;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod ironing;
pub mod learner;
pub mod mechanism;
pub mod menu;
mod optimize;
pub mod oracle;
pub mod presets;
pub mod value_model;

pub use equilibrium::{find_equilibrium, EquilibriumConfig, EquilibriumReport};
pub use error::{Error, Result};
pub use learner::{best_direction, BestResponse, SearchConfig};
pub use mechanism::{extract_menu, optimal_mechanism, Mechanism};
pub use menu::{Menu, MenuOption};
pub use value_model::{Direction, Scenario, TypeLine, ValueModel};
