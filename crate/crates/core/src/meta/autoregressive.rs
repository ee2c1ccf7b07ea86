use std::any::Any;
use std::sync::Arc;

use crate::dist::{Distribution, Flags, ParamMap, ReparameterizationType};
use crate::error::{Error, Result};
use crate::nd::{DType, NdValue, Shape};
use crate::random::RngState;

/// Builds the conditional distribution given the current outcome.
pub type MakeDistribution = Arc<dyn Fn(&NdValue) -> Result<Arc<dyn Distribution>> + Send + Sync>;

/// Iterates `x <- make_dist(x).sample()` a fixed number of times from `x = 0`.
pub struct Autoregressive {
    name: String,
    make: MakeDistribution,
    steps: usize,
    event: Shape,
    batch: Shape,
    dtype: DType,
    flags: Flags,
}

impl Autoregressive {
    pub fn new(make: MakeDistribution, event_shape: Shape, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        let probe = make(&NdValue::zeros(event_shape.clone(), DType::F64))?;
        if probe.event_shape() != event_shape {
            return Err(Error::NonConvergentSpec {
                from: event_shape,
                to: probe.event_shape(),
            });
        }
        Ok(Autoregressive {
            name: "Autoregressive".into(),
            make,
            steps,
            event: event_shape,
            batch: probe.batch_shape(),
            dtype: probe.dtype(),
            flags: probe.flags(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn conditional(&self, x: &NdValue) -> Result<Arc<dyn Distribution>> {
        let d = (self.make)(x)?;
        if d.event_shape() != self.event {
            return Err(Error::NonConvergentSpec {
                from: self.event.clone(),
                to: d.event_shape(),
            });
        }
        Ok(d)
    }
}

impl Distribution for Autoregressive {
    fn name(&self) -> &str {
        &self.name
    }
    fn batch_shape(&self) -> Shape {
        self.batch.clone()
    }
    fn event_shape(&self) -> Shape {
        self.event.clone()
    }
    fn dtype(&self) -> DType {
        self.dtype
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        ReparameterizationType::NotReparameterized
    }
    fn flags(&self) -> Flags {
        self.flags
    }
    fn parameters(&self) -> ParamMap {
        let mut p = ParamMap::new();
        p.insert("steps".into(), NdValue::scalar(self.steps as f64));
        p
    }
    fn as_any(&self) -> &dyn Any {
        self
    }

    fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let shape = sample_shape.concat(&self.batch).concat(&self.event);
        let mut x = NdValue::zeros(shape.clone(), self.dtype);
        for key in rng.split(self.steps) {
            let d = self.conditional(&x)?;
            x = d.sample(&Shape::scalar(), &key)?;
            if x.shape() != &shape {
                return Err(Error::NonConvergentSpec {
                    from: shape,
                    to: x.shape().clone(),
                });
            }
        }
        Ok(x)
    }

    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.conditional(x)?.log_prob(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Bernoulli, Normal};
    use crate::meta::Independent;

    /// Four binary pixels; logit of pixel i is `0.5 + sum_{j<i} w_ij x_j`.
    fn pixel_logits(x: &[f64]) -> Vec<f64> {
        let w = [[0.0; 4], [1.5, 0.0, 0.0, 0.0], [-2.0, 0.7, 0.0, 0.0], [0.3, -0.4, 1.1, 0.0]];
        (0..4)
            .map(|i| 0.5 + (0..i).map(|j| w[i][j] * x[j]).sum::<f64>())
            .collect()
    }

    fn pixelcnn() -> Autoregressive {
        let make: MakeDistribution = Arc::new(|x: &NdValue| {
            let data: Vec<f64> = x.rows(1).flat_map(pixel_logits).collect();
            let logits = NdValue::new(x.shape().clone(), DType::F64, data)?;
            Ok(Arc::new(Independent::rightmost(Arc::new(Bernoulli::from_logits(logits)?))?) as Arc<dyn Distribution>)
        });
        Autoregressive::new(make, Shape::from([4]), 4).unwrap()
    }

    #[test]
    fn enumeration_sums_to_one() {
        let d = pixelcnn();
        let total: f64 = (0..16u32)
            .map(|m| {
                let x: Vec<f64> = (0..4).map(|i| ((m >> i) & 1) as f64).collect();
                let x = NdValue::new([4], DType::I64, x).unwrap();
                d.prob(&x).unwrap().item().unwrap()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn samples_have_declared_shape() {
        let d = pixelcnn();
        let s = d.sample(&Shape::from([7]), &RngState::from_seed(5)).unwrap();
        assert_eq!(s.shape(), &Shape::from([7, 4]));
        assert!(d.log_prob(&s).unwrap().data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn constant_make_is_fixed_point() {
        let make: MakeDistribution = Arc::new(|_x: &NdValue| {
            Ok(Arc::new(Normal::new(2.0, 0.1).unwrap()) as Arc<dyn Distribution>)
        });
        let ar = Autoregressive::new(make, Shape::scalar(), 1).unwrap();
        let rng = RngState::from_seed(8);
        let direct = Normal::new(2.0, 0.1).unwrap().sample(&Shape::scalar(), &rng.split(1)[0]).unwrap();
        assert_eq!(ar.sample(&Shape::scalar(), &rng).unwrap(), direct);
    }

    #[test]
    fn shape_drift_is_reported() {
        let make: MakeDistribution = Arc::new(|x: &NdValue| {
            let n = if x.data().iter().all(|v| *v == 0.0) { 2 } else { 3 };
            let d = Normal::new(NdValue::zeros([n], DType::F64), 1.0)?;
            Ok(Arc::new(Independent::rightmost(Arc::new(d))?) as Arc<dyn Distribution>)
        });
        let ar = Autoregressive::new(make, Shape::from([2]), 2).unwrap();
        assert!(matches!(
            ar.sample(&Shape::scalar(), &RngState::from_seed(1)),
            Err(Error::NonConvergentSpec { .. })
        ));
        assert_eq!(Autoregressive::new(pixelcnn().make.clone(), Shape::from([4]), 0).err().map(|e| matches!(e, Error::InvalidParameter { .. })), Some(true));
    }
}
