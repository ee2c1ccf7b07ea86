//! Fixtures shared by the benchmarks in `benches/`.

use std::sync::Arc;

use distkit::bijector::{LinearAutoregressive, MaskedAutoregressive, Softplus};
use distkit::families::{Categorical, Normal};
use distkit::meta::{Independent, MixtureSameFamily, TransformedDistribution};
use distkit::random::standard_normal;
use distkit::{Bijector, Chain, DType, NdValue, RngState, Shape};

/// Standard normal values of the given shape.
pub fn noise(shape: &[usize], seed: u64) -> NdValue {
    standard_normal(&RngState::from_seed(seed), &Shape::from(shape.to_vec()), DType::F64).expect("valid shape")
}

/// Masked autoregressive flow of size `d` with seeded linear weights.
pub fn maf(d: usize) -> Arc<dyn Bijector> {
    let f = LinearAutoregressive::random(d, &RngState::from_seed(d as u64));
    Arc::new(MaskedAutoregressive::new(Arc::new(f), false).expect("masked weights"))
}

/// Softplus over a masked autoregressive flow on an isotropic normal base.
pub fn flow(d: usize) -> TransformedDistribution {
    let base = Normal::new(NdValue::zeros([d], DType::F64), 1.0).expect("valid normal");
    let base = Independent::rightmost(Arc::new(base)).expect("rank 1 batch");
    let chain = Chain::new(vec![Arc::new(Softplus::new(false)), maf(d)]).expect("compatible ranks");
    TransformedDistribution::new(Arc::new(base), Arc::new(chain)).expect("compatible shapes")
}

/// Equal-weight mixture of `k` normals with spread-out locations.
pub fn mixture(k: usize) -> MixtureSameFamily {
    let locs = NdValue::vector((0..k).map(|i| i as f64 - k as f64 / 2.0).collect());
    let cat = Categorical::from_probs(NdValue::vector(vec![1.0 / k as f64; k])).expect("valid probs");
    MixtureSameFamily::new(cat, Arc::new(Normal::new(locs, 0.8).expect("valid normal"))).expect("batch [k]")
}
