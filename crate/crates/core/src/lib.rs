//! Online control of energy storage under stochastic prices.
//!
//! Price statistics are estimated from historical data at a confidence
//! level, turned into price bounds and a control threshold, and used to
//! drive threshold and dynamic-programming policies over a one-shot load
//! serving problem. The [`experiment`] module wires these into the
//! reproducible Monte Carlo studies exposed by the `storelab` binary.

pub mod error;
pub mod estimation;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod prices;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use model::{simulate, Instance, Policy, StorageSpec, Trajectory};
pub use prices::{PriceModel, PriceSeries};
