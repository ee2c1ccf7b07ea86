//! Concrete distribution families.

mod continuous;
mod dirichlet;
mod discrete;
mod mvn;

use std::sync::Arc;

pub use continuous::{Beta, Cauchy, Exponential, Gamma, Laplace, Normal, StudentT, Uniform};
pub use dirichlet::Dirichlet;
pub use discrete::{Bernoulli, Categorical, OneHotCategorical, Poisson};
pub use mvn::{MultivariateNormalDiag, MultivariateNormalTriL};

use crate::dist::{exclusive, Distribution, Flags, ParamMap};
use crate::error::{Error, Result};
use crate::nd::NdValue;

/// Family names accepted by [`construct_family`].
pub const FAMILY_NAMES: &[&str] = &[
    "Normal",
    "Laplace",
    "Exponential",
    "Gamma",
    "Beta",
    "Cauchy",
    "StudentT",
    "Uniform",
    "Bernoulli",
    "Categorical",
    "OneHotCategorical",
    "Poisson",
    "Dirichlet",
    "MultivariateNormalDiag",
    "MultivariateNormalTriL",
];

/// Builds a family by name from named parameters.
pub fn construct_family(name: &str, params: &ParamMap, flags: Flags) -> Result<Arc<dyn Distribution>> {
    Ok(match name {
        "Normal" => Arc::new(Normal::from_params(params, flags)?),
        "Laplace" => Arc::new(Laplace::from_params(params, flags)?),
        "Exponential" => Arc::new(Exponential::from_params(params, flags)?),
        "Gamma" => Arc::new(Gamma::from_params(params, flags)?),
        "Beta" => Arc::new(Beta::from_params(params, flags)?),
        "Cauchy" => Arc::new(Cauchy::from_params(params, flags)?),
        "StudentT" => Arc::new(StudentT::from_params(params, flags)?),
        "Uniform" => Arc::new(Uniform::from_params(params, flags)?),
        "Bernoulli" => Arc::new(Bernoulli::from_params(params, flags)?),
        "Categorical" => Arc::new(Categorical::from_params(params, flags)?),
        "OneHotCategorical" => Arc::new(OneHotCategorical::from_params(params, flags)?),
        "Poisson" => Arc::new(Poisson::from_params(params, flags)?),
        "Dirichlet" => Arc::new(Dirichlet::from_params(params, flags)?),
        "MultivariateNormalDiag" => Arc::new(MultivariateNormalDiag::from_params(params, flags)?),
        "MultivariateNormalTriL" => Arc::new(MultivariateNormalTriL::from_params(params, flags)?),
        other => return Err(Error::invalid("family", format!("unknown family `{other}`"))),
    })
}

pub(crate) fn param_map(pairs: &[(&str, &NdValue)]) -> ParamMap {
    pairs.iter().map(|(k, v)| (k.to_string(), (*v).clone())).collect()
}

/// Schema check over a parameter map: unknown names are errors.
pub(crate) struct Args<'a> {
    family: &'a str,
    map: &'a ParamMap,
}

impl<'a> Args<'a> {
    pub fn new(family: &'a str, map: &'a ParamMap, allowed: &[&str]) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(
                k.as_str(),
                format!("unknown parameter for {family}; expected one of {allowed:?}"),
            ));
        }
        Ok(Args { family, map })
    }

    pub fn get(&self, name: &str) -> Option<&'a NdValue> {
        self.map.get(name)
    }

    pub fn req(&self, name: &str) -> Result<&'a NdValue> {
        self.get(name)
            .ok_or_else(|| Error::invalid(name, format!("required by {}", self.family)))
    }

    pub fn exclusive(&self, a: &str, b: &str) -> Result<std::result::Result<&'a NdValue, &'a NdValue>> {
        exclusive((a, self.get(a)), (b, self.get(b)))
    }
}
