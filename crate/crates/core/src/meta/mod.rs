//! Distributions built from other distributions.

mod autoregressive;
mod independent;
mod mixture;
mod transformed;

pub use autoregressive::{Autoregressive, MakeDistribution};
pub use independent::Independent;
pub use mixture::{kde, Mixture, MixtureSameFamily};
pub use transformed::TransformedDistribution;
