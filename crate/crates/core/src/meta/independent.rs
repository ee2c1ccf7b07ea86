use std::any::Any;
use std::sync::Arc;

use crate::dist::{Distribution, Flags, ParamMap, ReparamPath, ReparameterizationType};
use crate::error::{Error, Result};
use crate::nd::{DType, NdValue, Shape};
use crate::random::RngState;

/// Reinterprets the rightmost batch dims of `inner` as event dims.
///
/// `log_prob` sums the inner log-densities over those dims in row-major
/// order, accumulating left to right.
pub struct Independent {
    name: String,
    inner: Arc<dyn Distribution>,
    rank: usize,
}

impl Independent {
    pub fn new(inner: Arc<dyn Distribution>, reinterpreted_batch_rank: usize) -> Result<Self> {
        let batch_rank = inner.batch_shape().rank();
        if reinterpreted_batch_rank > batch_rank {
            return Err(Error::Rank(format!(
                "cannot reinterpret {reinterpreted_batch_rank} dims of batch {}",
                inner.batch_shape()
            )));
        }
        Ok(Independent {
            name: format!("Independent{}", inner.name()),
            inner,
            rank: reinterpreted_batch_rank,
        })
    }

    /// Reinterprets the single rightmost batch dim.
    pub fn rightmost(inner: Arc<dyn Distribution>) -> Result<Self> {
        Self::new(inner, 1)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn inner(&self) -> &Arc<dyn Distribution> {
        &self.inner
    }

    pub fn reinterpreted_batch_rank(&self) -> usize {
        self.rank
    }
}

impl Distribution for Independent {
    fn name(&self) -> &str {
        &self.name
    }
    fn batch_shape(&self) -> Shape {
        self.inner.batch_shape().drop_last(self.rank)
    }
    fn event_shape(&self) -> Shape {
        self.inner.batch_shape().last(self.rank).concat(&self.inner.event_shape())
    }
    fn dtype(&self) -> DType {
        self.inner.dtype()
    }
    fn float_dtype(&self) -> DType {
        self.inner.float_dtype()
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        self.inner.reparameterization_type()
    }
    fn flags(&self) -> Flags {
        self.inner.flags()
    }
    fn parameters(&self) -> ParamMap {
        self.inner.parameters()
    }
    fn as_any(&self) -> &dyn Any {
        self
    }

    fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
        self.inner.sample(sample_shape, rng)
    }

    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.inner.log_prob(x)?.sum_trailing(self.rank)
    }

    fn mean_kernel(&self) -> Result<NdValue> {
        self.inner.mean()
    }

    fn variance_kernel(&self) -> Result<NdValue> {
        self.inner.variance()
    }

    fn stddev_kernel(&self) -> Result<NdValue> {
        self.inner.stddev()
    }

    fn mode_kernel(&self) -> Result<NdValue> {
        self.inner.mode()
    }

    fn entropy_kernel(&self) -> Result<NdValue> {
        self.inner.entropy()?.sum_trailing(self.rank)
    }

    fn reparam_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<ReparamPath> {
        self.inner.reparameterized_path(sample_shape, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Bernoulli, Normal};

    #[test]
    fn shapes_move_from_batch_to_event() {
        let inner = Bernoulli::from_logits(NdValue::zeros([2, 784], DType::F64)).unwrap();
        let d = Independent::rightmost(Arc::new(inner)).unwrap();
        assert_eq!(d.batch_shape(), Shape::from([2]));
        assert_eq!(d.event_shape(), Shape::from([784]));
        assert!(Independent::new(Arc::new(Normal::new(0.0, 1.0).unwrap()), 1).is_err());
    }

    #[test]
    fn rank_zero_is_transparent() {
        let n = Arc::new(Normal::new(NdValue::vector(vec![0.0, 1.0]), 1.0).unwrap());
        let d = Independent::new(n.clone(), 0).unwrap();
        let x = NdValue::vector(vec![0.3, 0.4]);
        assert_eq!(d.log_prob(&x).unwrap(), n.log_prob(&x).unwrap());
    }

    #[test]
    fn log_prob_sums_inner() {
        let loc = NdValue::from_shape_vec([2, 3], vec![0.0, 1.0, 2.0, -1.0, 0.5, 3.0]).unwrap();
        let n = Arc::new(Normal::new(loc, 1.5).unwrap());
        let x = NdValue::from_shape_vec([2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let inner = n.log_prob(&x).unwrap();
        let d1 = Independent::new(n.clone(), 1).unwrap();
        let d2 = Independent::new(n, 2).unwrap();
        let lp1 = d1.log_prob(&x).unwrap();
        let lp2 = d2.log_prob(&x).unwrap();
        let i = inner.data();
        assert_eq!(lp1.data(), &[0.0 + i[0] + i[1] + i[2], 0.0 + i[3] + i[4] + i[5]]);
        assert_eq!(lp2.item().unwrap(), i.iter().fold(0.0, |a, b| a + b));
    }
}
