use std::any::Any;
use std::sync::Arc;

use super::Independent;
use crate::bijector::Bijector;
use crate::dist::{Distribution, Flags, ParamMap, ReparamPath, ReparameterizationType};
use crate::error::{Error, Result};
use crate::nd::{broadcast_shapes, DType, NdValue, Shape};
use crate::random::RngState;

/// Distribution of `Y = F(X)` for a base `X` and bijector `F`.
pub struct TransformedDistribution {
    name: String,
    base: Arc<dyn Distribution>,
    bijector: Arc<dyn Bijector>,
    event: Shape,
}

impl TransformedDistribution {
    pub fn new(base: Arc<dyn Distribution>, bijector: Arc<dyn Bijector>) -> Result<Self> {
        Self::with_shapes(base, bijector, None, None)
    }

    /// `batch_shape` / `event_shape` replicate a scalar base into i.i.d.
    /// copies before the bijector is applied.
    pub fn with_shapes(
        base: Arc<dyn Distribution>,
        bijector: Arc<dyn Bijector>,
        batch_shape: Option<Shape>,
        event_shape: Option<Shape>,
    ) -> Result<Self> {
        if !base.dtype().is_float() {
            return Err(Error::DTypeMismatch(format!(
                "{} has integer samples and cannot be transformed",
                base.name()
            )));
        }
        let base = if batch_shape.is_some() || event_shape.is_some() {
            if !base.batch_shape().is_scalar() || !base.event_shape().is_scalar() {
                return Err(Error::Shape(format!(
                    "shape overrides need a scalar base, {} has batch {} and event {}",
                    base.name(),
                    base.batch_shape(),
                    base.event_shape()
                )));
            }
            let batch = batch_shape.unwrap_or_else(Shape::scalar);
            let event = event_shape.unwrap_or_else(Shape::scalar);
            let rank = event.rank();
            let b: Arc<dyn Distribution> = Arc::new(BroadcastBatch {
                name: base.name().to_string(),
                batch: batch.concat(&event),
                inner: base,
            });
            Arc::new(Independent::new(b, rank)?)
        } else {
            base
        };
        let event = bijector.forward_event_shape(&base.event_shape())?;
        let name = format!("{}{}", bijector.name(), base.name());
        Ok(TransformedDistribution {
            name,
            base,
            bijector,
            event,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn base(&self) -> &Arc<dyn Distribution> {
        &self.base
    }

    pub fn bijector(&self) -> &Arc<dyn Bijector> {
        &self.bijector
    }

    fn affine_like(&self) -> bool {
        self.bijector.is_constant_jacobian() && self.bijector.is_injective()
    }
}

impl Distribution for TransformedDistribution {
    fn name(&self) -> &str {
        &self.name
    }
    fn batch_shape(&self) -> Shape {
        self.base.batch_shape()
    }
    fn event_shape(&self) -> Shape {
        self.event.clone()
    }
    fn dtype(&self) -> DType {
        self.base.dtype()
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        self.base.reparameterization_type()
    }
    fn flags(&self) -> Flags {
        self.base.flags()
    }
    fn parameters(&self) -> ParamMap {
        self.base.parameters()
    }
    fn as_any(&self) -> &dyn Any {
        self
    }

    fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let x = self.base.sample(sample_shape, rng)?;
        self.bijector.forward(&x)
    }

    fn log_prob_kernel(&self, y: &NdValue) -> Result<NdValue> {
        let rank = self.event.rank();
        let branches = self.bijector.inverse_branches(y, rank)?;
        let mut terms = Vec::with_capacity(branches.len());
        for (x, ildj) in &branches {
            terms.push(self.base.log_prob(x)?.add(ildj)?);
        }
        if terms.len() == 1 {
            return Ok(terms.pop().expect("one branch"));
        }
        NdValue::stack_last(&terms)?.log_sum_exp(-1)
    }

    fn mean_kernel(&self) -> Result<NdValue> {
        if !self.affine_like() {
            return crate::dist::not_implemented(self, "mean");
        }
        self.bijector.forward_kernel(&self.base.mean()?)
    }

    /// Scalar events only: the squared slope is `exp(2 fldj)`.
    fn variance_kernel(&self) -> Result<NdValue> {
        if !self.affine_like() || self.base.event_shape().rank() != 0 || self.event.rank() != 0 {
            return crate::dist::not_implemented(self, "variance");
        }
        let v = self.base.variance()?;
        let x = NdValue::zeros(self.base.batch_shape(), self.base.float_dtype());
        let fldj = self.bijector.forward_log_det_jacobian(&x, 0)?;
        v.mul(&fldj.map(|l| (2.0 * l).exp()))
    }

    fn mode_kernel(&self) -> Result<NdValue> {
        if !self.affine_like() {
            return crate::dist::not_implemented(self, "mode");
        }
        self.bijector.forward_kernel(&self.base.mode()?)
    }

    fn entropy_kernel(&self) -> Result<NdValue> {
        if !self.affine_like() {
            return crate::dist::not_implemented(self, "entropy");
        }
        let h = self.base.entropy()?;
        let point = self.base.batch_shape().concat(&self.base.event_shape());
        let x = NdValue::zeros(point, self.base.float_dtype());
        let fldj = self.bijector.forward_log_det_jacobian(&x, self.base.event_shape().rank())?;
        h.add(&fldj)
    }

    fn reparam_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<ReparamPath> {
        let path = self.base.reparameterized_path(sample_shape, rng)?;
        let bijector = self.bijector.clone();
        Ok(ReparamPath {
            noise: path.noise.clone(),
            transform: Box::new(move |p| bijector.forward(&path.apply(p)?)),
        })
    }
}

/// Replicates a scalar distribution over a batch shape.
pub(crate) struct BroadcastBatch {
    name: String,
    inner: Arc<dyn Distribution>,
    batch: Shape,
}

impl BroadcastBatch {
    fn widen(&self, v: NdValue) -> Result<NdValue> {
        let shape = broadcast_shapes(v.shape(), &self.batch)?;
        v.broadcast_to(&shape)
    }
}

impl Distribution for BroadcastBatch {
    fn name(&self) -> &str {
        &self.name
    }
    fn batch_shape(&self) -> Shape {
        self.batch.clone()
    }
    fn event_shape(&self) -> Shape {
        Shape::scalar()
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
        self.inner.sample(&sample_shape.concat(&self.batch), rng)
    }
    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.widen(self.inner.log_prob(x)?)
    }
    fn check_support(&self, x: &NdValue) -> Result<()> {
        self.inner.check_support(x)
    }
    fn cdf_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.widen(self.inner.cdf(x)?)
    }
    fn quantile_kernel(&self, p: &NdValue) -> Result<NdValue> {
        self.widen(self.inner.quantile(p)?)
    }
    fn mean_kernel(&self) -> Result<NdValue> {
        self.widen(self.inner.mean()?)
    }
    fn variance_kernel(&self) -> Result<NdValue> {
        self.widen(self.inner.variance()?)
    }
    fn mode_kernel(&self) -> Result<NdValue> {
        self.widen(self.inner.mode()?)
    }
    fn entropy_kernel(&self) -> Result<NdValue> {
        self.widen(self.inner.entropy()?)
    }
    fn reparam_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<ReparamPath> {
        self.inner.reparameterized_path(&sample_shape.concat(&self.batch), rng)
    }
}
