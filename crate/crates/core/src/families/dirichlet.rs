use std::any::Any;

use super::Args;
use crate::dist::{common_param_dtype, Distribution, Flags, ParamMap, ReparameterizationType};
use crate::error::{Error, Result};
use crate::nd::{broadcast_rows, DType, NdValue, Shape};
use crate::random::{standard_gamma, RngState};
use crate::special::{digamma, lgamma};

/// Dirichlet on the probability simplex; event shape `[K]`.
#[derive(Clone, Debug)]
pub struct Dirichlet {
    name: String,
    concentration: NdValue,
    batch: Shape,
    k: usize,
    flags: Flags,
}

impl Dirichlet {
    pub fn new(concentration: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(concentration, Flags::default())
    }

    pub fn with_flags(concentration: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let c = concentration.into();
        common_param_dtype(&[("concentration", &c)])?;
        if c.rank() == 0 {
            return Err(Error::Rank("Dirichlet concentration needs at least one axis".into()));
        }
        if flags.validate_args {
            if let Some(v) = c.data().iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("concentration", format!("must be positive and finite, got {v}")));
            }
        }
        Ok(Dirichlet {
            name: "Dirichlet".into(),
            batch: c.shape().drop_last(1),
            k: *c.shape().dims().last().unwrap_or(&0),
            concentration: c,
            flags,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Dirichlet", p, &["concentration"])?;
        Self::with_flags(a.req("concentration")?.clone(), flags)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn concentration(&self) -> &NdValue {
        &self.concentration
    }

    fn per_row(&self, f: impl Fn(&[f64], f64) -> Vec<f64>, event: bool) -> Result<NdValue> {
        let mut data = Vec::new();
        for r in self.concentration.rows(1) {
            let total: f64 = r.iter().sum();
            data.extend(f(r, total));
        }
        let shape = if event {
            self.concentration.shape().clone()
        } else {
            self.batch.clone()
        };
        NdValue::new(shape, self.concentration.dtype(), data)
    }
}

fn log_norm(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&a| lgamma(a)).sum::<f64>() - lgamma(alpha.iter().sum())
}

impl Distribution for Dirichlet {
    fn name(&self) -> &str {
        &self.name
    }
    fn batch_shape(&self) -> Shape {
        self.batch.clone()
    }
    fn event_shape(&self) -> Shape {
        Shape::from([self.k])
    }
    fn dtype(&self) -> DType {
        self.concentration.dtype()
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        ReparameterizationType::NotReparameterized
    }
    fn flags(&self) -> Flags {
        self.flags
    }
    fn parameters(&self) -> ParamMap {
        let mut p = ParamMap::new();
        p.insert("concentration".into(), self.concentration.clone());
        p
    }
    fn as_any(&self) -> &dyn Any {
        self
    }

    fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let shape = sample_shape.concat(self.concentration.shape());
        let g = standard_gamma(rng, &self.concentration, &shape, false)?;
        let mut data = Vec::with_capacity(g.len());
        for r in g.rows(1) {
            let s: f64 = r.iter().sum();
            data.extend(r.iter().map(|v| v / s));
        }
        NdValue::new(shape, self.dtype(), data)
    }

    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        let k = self.k;
        let (shape, pairs) = broadcast_rows(&x.shape().drop_last(1), &self.batch)?;
        let c = self.concentration.data();
        let data = pairs
            .iter()
            .map(|&(xi, bi)| {
                let xr = &x.data()[xi * k..(xi + 1) * k];
                let ar = &c[bi * k..(bi + 1) * k];
                if xr.iter().any(|v| v.is_nan()) {
                    return f64::NAN;
                }
                if xr.iter().any(|&v| v < 0.0) {
                    return f64::NEG_INFINITY;
                }
                let body: f64 = xr
                    .iter()
                    .zip(ar)
                    .map(|(&xv, &a)| if a == 1.0 { 0.0 } else { (a - 1.0) * xv.ln() })
                    .sum();
                body - log_norm(ar)
            })
            .collect();
        NdValue::new(shape, self.dtype(), data)
    }

    fn check_support(&self, x: &NdValue) -> Result<()> {
        for r in x.rows(1) {
            let s: f64 = r.iter().sum();
            if r.iter().any(|&v| v < 0.0) || (s - 1.0).abs() > 1e-6 {
                return Err(Error::Domain(format!("{r:?} is not on the simplex")));
            }
        }
        Ok(())
    }

    fn mean_kernel(&self) -> Result<NdValue> {
        self.per_row(|r, t| r.iter().map(|a| a / t).collect(), true)
    }

    fn variance_kernel(&self) -> Result<NdValue> {
        self.per_row(|r, t| r.iter().map(|a| a * (t - a) / (t * t * (t + 1.0))).collect(), true)
    }

    fn mode_kernel(&self) -> Result<NdValue> {
        let k = self.k as f64;
        self.per_row(
            |r, t| {
                if r.iter().all(|&a| a > 1.0) {
                    r.iter().map(|a| (a - 1.0) / (t - k)).collect()
                } else {
                    vec![f64::NAN; r.len()]
                }
            },
            true,
        )
    }

    fn entropy_kernel(&self) -> Result<NdValue> {
        let k = self.k as f64;
        self.per_row(
            |r, t| {
                let h = log_norm(r) + (t - k) * digamma(t)
                    - r.iter().map(|&a| (a - 1.0) * digamma(a)).sum::<f64>();
                vec![h]
            },
            false,
        )
    }
}
