//! Probability distributions and volume-tracking bijectors over
//! `sample ++ batch ++ event` shaped values.

pub mod bijector;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod families;
pub mod functionals;
pub mod meta;
pub mod nd;
pub mod random;
pub mod special;

pub use bijector::{construct_bijector, Bijector, Chain, Invert, PreimageSet};
pub use dist::{Distribution, Flags, ParamMap, ReparamPath, ReparameterizationType};
pub use error::{Error, Result};
pub use families::construct_family;
pub use functionals::{cross_entropy, kl_divergence, KlRegistry};
pub use nd::{DType, NdValue, Shape};
pub use random::RngState;
