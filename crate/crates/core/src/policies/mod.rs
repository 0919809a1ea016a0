//! Online control policies.

pub mod adaptive;
pub mod dp;
pub mod threshold;

pub use adaptive::{adaptive, AdaptiveConfig, AdaptivePolicy, BasePolicy, PolicyFamily};
pub use dp::{build_value_table, dp_policy, DpPolicy, PriceAtom, ValueTable};
pub use threshold::{alg_mthb, alg_thb, linear_budget, ThresholdPolicy};
