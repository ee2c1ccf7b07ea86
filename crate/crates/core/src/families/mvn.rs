use std::any::Any;
use std::sync::Arc;

use super::{Args, Normal};
use crate::bijector::{Affine, AffineScale};
use crate::dist::{common_param_dtype, Distribution, Flags, ParamMap, ReparamPath, ReparameterizationType};
use crate::error::{Error, Result};
use crate::meta::{Independent, TransformedDistribution};
use crate::nd::{broadcast_shapes, DType, NdValue, Shape};
use crate::random::RngState;
use crate::special::HALF_LN_2PI;

/// Shared state of the affine-Gaussian families.
struct MvnCore {
    name: String,
    given: ParamMap,
    loc: NdValue,
    scale: NdValue,
    tril: bool,
    batch: Shape,
    d: usize,
    dtype: DType,
    flags: Flags,
    td: TransformedDistribution,
}

impl MvnCore {
    fn new(name: &str, loc: NdValue, scale: NdValue, tril: bool, given: ParamMap, flags: Flags) -> Result<Self> {
        let scale_name = if tril { "scale_tril" } else { "scale_diag" };
        let dtype = common_param_dtype(&[("loc", &loc), (scale_name, &scale)])?;
        if loc.rank() == 0 {
            return Err(Error::invalid("loc", "needs an event axis"));
        }
        let d = *loc.shape().dims().last().unwrap_or(&0);
        let scale_lead = if tril {
            let dims = scale.shape().dims();
            if dims.len() < 2 || dims[dims.len() - 1] != d || dims[dims.len() - 2] != d {
                return Err(Error::invalid(scale_name, format!("must be [..., {d}, {d}], got {}", scale.shape())));
            }
            scale.shape().drop_last(2)
        } else {
            if scale.shape().dims().last() != Some(&d) {
                return Err(Error::invalid(scale_name, format!("must be [..., {d}], got {}", scale.shape())));
            }
            scale.shape().drop_last(1)
        };
        let batch = broadcast_shapes(&loc.shape().drop_last(1), &scale_lead)?;
        let full = batch.concat(&Shape::from([d]));
        let std = Normal::with_flags(NdValue::zeros(full.clone(), dtype), NdValue::full(full, dtype, 1.0), flags)?;
        let base = Arc::new(Independent::rightmost(Arc::new(std))?);
        let op = if tril {
            AffineScale::TriL(scale.clone())
        } else {
            AffineScale::Diag(scale.clone())
        };
        let affine = Affine::new(Some(loc.clone()), op, flags.validate_args).map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => Error::invalid(scale_name, reason),
            other => other,
        })?;
        let td = TransformedDistribution::new(base, Arc::new(affine))?.with_name(name);
        Ok(MvnCore {
            name: name.to_string(),
            given,
            loc,
            scale,
            tril,
            batch,
            d,
            dtype,
            flags,
            td,
        })
    }

    fn full(&self) -> Shape {
        self.batch.concat(&Shape::from([self.d]))
    }

    fn diag(&self) -> Vec<f64> {
        if self.tril {
            let d = self.d;
            self.scale.rows(2).flat_map(|m| (0..d).map(move |i| m[i * d + i])).collect()
        } else {
            self.scale.data().to_vec()
        }
    }

    fn diag_value(&self) -> Result<NdValue> {
        let lead = if self.tril {
            self.scale.shape().drop_last(2)
        } else {
            self.scale.shape().drop_last(1)
        };
        NdValue::new(lead.concat(&Shape::from([self.d])), self.dtype, self.diag())
    }

    fn mean(&self) -> Result<NdValue> {
        self.loc.broadcast_to(&self.full())
    }

    fn variance(&self) -> Result<NdValue> {
        let v = if self.tril {
            let d = self.d;
            let data = self
                .scale
                .rows(2)
                .flat_map(|m| (0..d).map(move |i| m[i * d..i * d + i + 1].iter().map(|v| v * v).sum::<f64>()))
                .collect();
            NdValue::new(self.scale.shape().drop_last(1), self.dtype, data)?
        } else {
            self.scale.map(|v| v * v)
        };
        v.broadcast_to(&self.full())
    }

    fn entropy(&self) -> Result<NdValue> {
        let d = self.d as f64;
        let h = self
            .diag_value()?
            .map(|v| v.abs().ln())
            .sum_trailing(1)?
            .map(|s| d * (0.5 + HALF_LN_2PI) + s);
        h.broadcast_to(&self.batch)
    }

    fn covariance(&self) -> Result<NdValue> {
        let d = self.d;
        let (lead, mats): (Shape, Vec<Vec<f64>>) = if self.tril {
            (
                self.scale.shape().drop_last(2),
                self.scale.rows(2).map(|m| m.to_vec()).collect(),
            )
        } else {
            (
                self.scale.shape().drop_last(1),
                self.scale
                    .rows(1)
                    .map(|r| {
                        let mut m = vec![0.0; d * d];
                        for i in 0..d {
                            m[i * d + i] = r[i];
                        }
                        m
                    })
                    .collect(),
            )
        };
        let mut data = Vec::with_capacity(mats.len() * d * d);
        for m in &mats {
            for i in 0..d {
                for j in 0..d {
                    data.push((0..=i.min(j)).map(|k| m[i * d + k] * m[j * d + k]).sum());
                }
            }
        }
        let cov = NdValue::new(lead.concat(&Shape::from([d, d])), self.dtype, data)?;
        cov.broadcast_to(&self.batch.concat(&Shape::from([d, d])))
    }
}

macro_rules! mvn_distribution {
    ($t:ident) => {
        impl $t {
            pub fn loc(&self) -> &NdValue {
                &self.core.loc
            }

            /// Full covariance `L Lᵀ`, shape `batch ++ [d, d]`.
            pub fn covariance(&self) -> Result<NdValue> {
                self.core.covariance()
            }

            pub fn with_name(mut self, name: impl Into<String>) -> Self {
                self.core.name = name.into();
                self
            }
        }

        impl Distribution for $t {
            fn name(&self) -> &str {
                &self.core.name
            }
            fn batch_shape(&self) -> Shape {
                self.core.batch.clone()
            }
            fn event_shape(&self) -> Shape {
                Shape::from([self.core.d])
            }
            fn dtype(&self) -> DType {
                self.core.dtype
            }
            fn reparameterization_type(&self) -> ReparameterizationType {
                ReparameterizationType::FullyReparameterized
            }
            fn flags(&self) -> Flags {
                self.core.flags
            }
            fn parameters(&self) -> ParamMap {
                self.core.given.clone()
            }
            fn as_any(&self) -> &dyn Any {
                self
            }
            fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
                self.core.td.sample(sample_shape, rng)
            }
            fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
                self.core.td.log_prob_kernel(x)
            }
            fn mean_kernel(&self) -> Result<NdValue> {
                self.core.mean()
            }
            fn mode_kernel(&self) -> Result<NdValue> {
                self.core.mean()
            }
            fn variance_kernel(&self) -> Result<NdValue> {
                self.core.variance()
            }
            fn entropy_kernel(&self) -> Result<NdValue> {
                self.core.entropy()
            }
            fn reparam_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<ReparamPath> {
                self.core.td.reparameterized_path(sample_shape, rng)
            }
        }
    };
}

/// Multivariate normal with diagonal scale; event shape `[d]`.
pub struct MultivariateNormalDiag {
    core: MvnCore,
}

impl MultivariateNormalDiag {
    pub fn new(loc: impl Into<NdValue>, scale_diag: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(loc, scale_diag, Flags::default())
    }

    pub fn with_flags(loc: impl Into<NdValue>, scale_diag: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let (loc, scale) = (loc.into(), scale_diag.into());
        let given = super::param_map(&[("loc", &loc), ("scale_diag", &scale)]);
        Ok(MultivariateNormalDiag {
            core: MvnCore::new("MultivariateNormalDiag", loc, scale, false, given, flags)?,
        })
    }

    /// Unit scale in every coordinate.
    pub fn standard(loc: impl Into<NdValue>) -> Result<Self> {
        let loc = loc.into();
        let d = loc.shape().dims().last().copied().unwrap_or(0);
        let ones = NdValue::full([d], loc.dtype(), 1.0);
        Self::new(loc, ones)
    }

    /// `scale_diag` defaults to ones.
    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("MultivariateNormalDiag", p, &["loc", "scale_diag"])?;
        let loc = a.req("loc")?.clone();
        let scale = match a.get("scale_diag") {
            Some(s) => s.clone(),
            None => NdValue::full([loc.shape().dims().last().copied().unwrap_or(0)], loc.dtype(), 1.0),
        };
        Self::with_flags(loc, scale, flags)
    }

    pub fn scale_diag(&self) -> &NdValue {
        &self.core.scale
    }
}

mvn_distribution!(MultivariateNormalDiag);

/// Multivariate normal with lower-triangular scale; event shape `[d]`.
pub struct MultivariateNormalTriL {
    core: MvnCore,
}

impl MultivariateNormalTriL {
    pub fn new(loc: impl Into<NdValue>, scale_tril: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(loc, scale_tril, Flags::default())
    }

    pub fn with_flags(loc: impl Into<NdValue>, scale_tril: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let (loc, scale) = (loc.into(), scale_tril.into());
        let given = super::param_map(&[("loc", &loc), ("scale_tril", &scale)]);
        Ok(MultivariateNormalTriL {
            core: MvnCore::new("MultivariateNormalTriL", loc, scale, true, given, flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("MultivariateNormalTriL", p, &["loc", "scale_tril"])?;
        Self::with_flags(a.req("loc")?.clone(), a.req("scale_tril")?.clone(), flags)
    }

    pub fn scale_tril(&self) -> &NdValue {
        &self.core.scale
    }
}

mvn_distribution!(MultivariateNormalTriL);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_shape_example() {
        let loc = NdValue::zeros([3, 2], DType::F64);
        let d = MultivariateNormalDiag::new(loc, NdValue::vector(vec![1.0, 2.0])).unwrap();
        assert_eq!(d.batch_shape(), Shape::from([3]));
        assert_eq!(d.event_shape(), Shape::from([2]));
        let x = d.sample(&Shape::from([10]), &RngState::from_seed(0)).unwrap();
        assert_eq!(x.shape(), &Shape::from([10, 3, 2]));
        assert_eq!(d.prob(&x).unwrap().shape(), &Shape::from([10, 3]));
    }

    #[test]
    fn tril_density_matches_closed_form() {
        // Σ = L Lᵀ with L = [[2,0],[1,3]]: Σ = [[4,2],[2,10]], det 36
        let l = NdValue::matrix(&[vec![2.0, 0.0], vec![1.0, 3.0]]).unwrap();
        let d = MultivariateNormalTriL::new(NdValue::vector(vec![1.0, -1.0]), l).unwrap();
        let x = [0.5, 2.0];
        let (dx, dy) = (x[0] - 1.0, x[1] + 1.0);
        // Σ⁻¹ = [[10,-2],[-2,4]] / 36
        let q = (10.0 * dx * dx - 4.0 * dx * dy + 4.0 * dy * dy) / 36.0;
        let expected = -q / 2.0 - (2.0 * std::f64::consts::PI).ln() - 0.5 * 36f64.ln();
        let lp = d.log_prob(&NdValue::vector(x.to_vec())).unwrap().item().unwrap();
        assert!((lp - expected).abs() < 1e-13);
        let cov = d.covariance().unwrap();
        assert_eq!(cov.data(), &[4.0, 2.0, 2.0, 10.0]);
        assert_eq!(d.variance().unwrap().data(), &[4.0, 10.0]);
    }

    #[test]
    fn diag_matches_independent_normals() {
        let d = MultivariateNormalDiag::new(NdValue::vector(vec![0.5, -2.0]), NdValue::vector(vec![1.5, 0.3])).unwrap();
        let n = Normal::new(NdValue::vector(vec![0.5, -2.0]), NdValue::vector(vec![1.5, 0.3])).unwrap();
        let x = NdValue::vector(vec![0.1, -1.7]);
        let sum: f64 = n.log_prob(&x).unwrap().data().iter().sum();
        assert!((d.log_prob(&x).unwrap().item().unwrap() - sum).abs() < 1e-13);
        let h: f64 = n.entropy().unwrap().data().iter().sum();
        assert!((d.entropy().unwrap().item().unwrap() - h).abs() < 1e-13);
    }

    #[test]
    fn zero_scale_rejected_when_validating() {
        let err = MultivariateNormalDiag::with_flags(NdValue::vector(vec![0.0, 0.0]), NdValue::vector(vec![1.0, 0.0]), Flags::validated())
            .err()
            .unwrap();
        assert!(matches!(err, Error::InvalidParameter { ref param, .. } if param == "scale_diag"));
    }
}
