use std::any::Any;

use super::Args;
use crate::dist::{
    common_param_dtype, scalar_distribution, Analytic, Constraint, Distribution, Flags, ParamMap,
    ReparameterizationType, ScalarCore, ScalarFamily,
};
use crate::error::{Error, Result};
use crate::nd::{broadcast_rows, log_sum_exp_slice, DType, NdValue, Shape};
use crate::random::{standard_poisson, uniform, RngState};
use crate::special::{lgamma, reg_inc_gamma_upper, sigmoid, softplus};

/// Bernoulli over `{0, 1}` parameterized by `logits` or `probs`.
#[derive(Clone, Debug)]
pub struct Bernoulli {
    core: ScalarCore,
}

impl Bernoulli {
    pub fn from_logits(logits: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("logits".into(), logits.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_probs(probs: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("probs".into(), probs.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Bernoulli", p, &["logits", "probs"])?;
        let logits = match a.exclusive("logits", "probs")? {
            Ok(l) => l.clone(),
            Err(probs) => {
                if flags.validate_args {
                    if let Some(v) = probs.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(Error::invalid("probs", format!("must lie in [0, 1], got {v}")));
                    }
                }
                probs.map(|q| q.ln() - (-q).ln_1p())
            }
        };
        Ok(Bernoulli {
            core: ScalarCore::new::<Self>(p.clone(), vec![logits], flags)?,
        })
    }

    pub fn logits(&self) -> &NdValue {
        &self.core.params[0]
    }

    pub fn probs(&self) -> NdValue {
        self.logits().map(sigmoid)
    }
}

impl ScalarFamily for Bernoulli {
    const FAMILY: &'static str = "Bernoulli";
    const PARAMS: &'static [&'static str] = &["logits"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Real];
    const ANALYTIC: Analytic = Analytic {
        cdf: false,
        quantile: false,
        ..Analytic::ALL
    };
    const INTEGER: bool = true;

    fn in_support(x: f64, _p: &[f64]) -> bool {
        x == 0.0 || x == 1.0
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        if x == 1.0 {
            -softplus(-p[0])
        } else {
            -softplus(p[0])
        }
    }
    fn mean(p: &[f64]) -> f64 {
        sigmoid(p[0])
    }
    fn variance(p: &[f64]) -> f64 {
        let q = sigmoid(p[0]);
        q * (1.0 - q)
    }
    fn mode(p: &[f64]) -> f64 {
        if p[0] > 0.0 {
            1.0
        } else {
            0.0
        }
    }
    fn entropy(p: &[f64]) -> f64 {
        let l = p[0];
        let q = sigmoid(l);
        let (a, b) = (q * softplus(-l), (1.0 - q) * softplus(l));
        // 0 * inf terms vanish
        (if q > 0.0 { a } else { 0.0 }) + (if q < 1.0 { b } else { 0.0 })
    }
    fn draw(core: &ScalarCore, shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let u = uniform(rng, shape, DType::F64)?;
        let logits = core.params[0].cast(DType::F64)?;
        let x = u.zip_with(&logits, |u, l| if u < sigmoid(l) { 1.0 } else { 0.0 })?;
        x.cast(DType::I64)
    }
}

scalar_distribution!(Bernoulli);

/// Poisson with `rate` or `log_rate`.
#[derive(Clone, Debug)]
pub struct Poisson {
    core: ScalarCore,
}

impl Poisson {
    pub fn new(rate: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(rate, Flags::default())
    }

    pub fn with_flags(rate: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("rate".into(), rate.into());
        Self::from_params(&p, flags)
    }

    pub fn from_log_rate(log_rate: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("log_rate".into(), log_rate.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Poisson", p, &["rate", "log_rate"])?;
        let rate = match a.exclusive("rate", "log_rate")? {
            Ok(r) => r.clone(),
            Err(lr) => lr.map(f64::exp),
        };
        Ok(Poisson {
            core: ScalarCore::new::<Self>(p.clone(), vec![rate], flags)?,
        })
    }

    pub fn rate(&self) -> &NdValue {
        &self.core.params[0]
    }
}

impl ScalarFamily for Poisson {
    const FAMILY: &'static str = "Poisson";
    const PARAMS: &'static [&'static str] = &["rate"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Positive];
    const ANALYTIC: Analytic = Analytic {
        entropy: false,
        ..Analytic::ALL
    };
    const INTEGER: bool = true;

    fn in_support(x: f64, _p: &[f64]) -> bool {
        x >= 0.0 && x.fract() == 0.0
    }
    fn log_prob(k: f64, p: &[f64]) -> f64 {
        let kl = if k == 0.0 { 0.0 } else { k * p[0].ln() };
        kl - p[0] - lgamma(k + 1.0)
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            reg_inc_gamma_upper(x.floor() + 1.0, p[0])
        }
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        if x < 0.0 {
            1.0
        } else {
            crate::special::reg_inc_gamma(x.floor() + 1.0, p[0])
        }
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        if u.is_nan() || !(0.0..=1.0).contains(&u) {
            return f64::NAN;
        }
        if u == 1.0 {
            return f64::INFINITY;
        }
        let mut k = p[0].floor();
        while k > 0.0 && <Self as ScalarFamily>::cdf(k - 1.0, p) >= u {
            k -= 1.0;
        }
        while <Self as ScalarFamily>::cdf(k, p) < u {
            k += 1.0;
        }
        k
    }
    fn mean(p: &[f64]) -> f64 {
        p[0]
    }
    fn variance(p: &[f64]) -> f64 {
        p[0]
    }
    fn mode(p: &[f64]) -> f64 {
        p[0].floor()
    }
    fn draw(core: &ScalarCore, shape: &Shape, rng: &RngState) -> Result<NdValue> {
        standard_poisson(rng, &core.params[0], shape, false)
    }
}

scalar_distribution!(Poisson);

/// Normalized log-probabilities over the last axis, shared by the categorical
/// families.
#[derive(Clone, Debug)]
pub(crate) struct CategoricalCore {
    pub name: String,
    pub given: ParamMap,
    /// Log-probabilities, shape `batch ++ [K]`.
    pub log_probs: NdValue,
    pub batch: Shape,
    pub k: usize,
    pub pdtype: DType,
    pub flags: Flags,
}

impl CategoricalCore {
    fn new(family: &str, p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new(family, p, &["logits", "probs"])?;
        let choice = a.exclusive("logits", "probs")?;
        let named: Vec<(&str, &NdValue)> = p.iter().map(|(k, v)| (k.as_str(), v)).collect();
        let pdtype = common_param_dtype(&named)?;
        let raw = match choice {
            Ok(l) | Err(l) => l,
        };
        if raw.rank() == 0 {
            return Err(Error::Rank(format!("{family} parameters need at least one axis")));
        }
        let k = *raw.shape().dims().last().unwrap_or(&0);
        if k == 0 {
            return Err(Error::invalid("logits", "needs at least one category"));
        }
        let rows: Vec<f64> = match choice {
            Ok(logits) => {
                if flags.validate_args {
                    if let Some(v) = logits.data().iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
                        return Err(Error::invalid("logits", format!("must be finite or -inf, got {v}")));
                    }
                }
                logits
                    .rows(1)
                    .flat_map(|r| {
                        let lse = log_sum_exp_slice(r);
                        r.iter().map(move |l| l - lse).collect::<Vec<_>>()
                    })
                    .collect()
            }
            Err(probs) => {
                if flags.validate_args {
                    for r in probs.rows(1) {
                        let s: f64 = r.iter().sum();
                        if r.iter().any(|q| !(0.0..=1.0).contains(q)) || (s - 1.0).abs() > 1e-6 {
                            return Err(Error::invalid("probs", format!("row {r:?} is not on the simplex")));
                        }
                    }
                }
                probs.data().iter().map(|q| q.ln()).collect()
            }
        };
        let log_probs = NdValue::new(raw.shape().clone(), pdtype, rows)?;
        Ok(CategoricalCore {
            name: family.to_string(),
            given: p.clone(),
            batch: raw.shape().drop_last(1),
            log_probs,
            k,
            pdtype,
            flags,
        })
    }

    fn probs(&self) -> NdValue {
        self.log_probs.map(f64::exp)
    }

    /// Inverse-cdf category draws of shape `sample ++ batch`.
    fn draw(&self, sample_shape: &Shape, rng: &RngState) -> Result<Vec<usize>> {
        let shape = sample_shape.concat(&self.batch);
        let u = uniform(rng, &shape, DType::F64)?;
        let nb = self.batch.num_elements().max(1);
        let rows: Vec<&[f64]> = self.log_probs.rows(1).collect();
        Ok(u.data()
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let row = rows[i % nb];
                let mut acc = 0.0;
                for (k, lp) in row.iter().enumerate() {
                    acc += lp.exp();
                    if u < acc {
                        return k;
                    }
                }
                row.len() - 1
            })
            .collect())
    }

    fn stat(&self, f: impl Fn(&[f64]) -> f64) -> Result<NdValue> {
        let data = self.log_probs.rows(1).map(f).collect();
        NdValue::new(self.batch.clone(), self.pdtype, data)
    }

    fn entropy(&self) -> Result<NdValue> {
        self.stat(|r| -r.iter().map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * l }).sum::<f64>())
    }
}

fn argmax(r: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in r.iter().enumerate() {
        if v > r[best] {
            best = i;
        }
    }
    best
}

/// Categorical over `{0, ..., K-1}`; the last parameter axis indexes categories.
#[derive(Clone, Debug)]
pub struct Categorical {
    core: CategoricalCore,
}

impl Categorical {
    pub fn from_logits(logits: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("logits".into(), logits.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_probs(probs: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("probs".into(), probs.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        Ok(Categorical {
            core: CategoricalCore::new("Categorical", p, flags)?,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.core.name = name.into();
        self
    }

    /// Normalized log-probabilities, shape `batch ++ [K]`.
    pub fn log_probs(&self) -> &NdValue {
        &self.core.log_probs
    }

    pub fn probs(&self) -> NdValue {
        self.core.probs()
    }

    pub fn num_categories(&self) -> usize {
        self.core.k
    }
}

impl Distribution for Categorical {
    fn name(&self) -> &str {
        &self.core.name
    }
    fn batch_shape(&self) -> Shape {
        self.core.batch.clone()
    }
    fn event_shape(&self) -> Shape {
        Shape::scalar()
    }
    fn dtype(&self) -> DType {
        DType::I64
    }
    fn float_dtype(&self) -> DType {
        self.core.pdtype
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        ReparameterizationType::NotReparameterized
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
        let ks = self.core.draw(sample_shape, rng)?;
        NdValue::new(
            sample_shape.concat(&self.core.batch),
            DType::I64,
            ks.into_iter().map(|k| k as f64).collect(),
        )
    }

    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        let (shape, pairs) = broadcast_rows(x.shape(), &self.core.batch)?;
        let k = self.core.k;
        let lp = self.core.log_probs.data();
        let data = pairs
            .iter()
            .map(|&(xi, bi)| {
                let v = x.data()[xi];
                if v.is_nan() {
                    f64::NAN
                } else if v >= 0.0 && v.fract() == 0.0 && (v as usize) < k {
                    lp[bi * k + v as usize]
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        NdValue::new(shape, self.core.pdtype, data)
    }

    fn check_support(&self, x: &NdValue) -> Result<()> {
        match x.data().iter().find(|v| !(**v >= 0.0 && (**v as usize) < self.core.k)) {
            Some(v) => Err(Error::Domain(format!("{v} is not a category of {}", self.name()))),
            None => Ok(()),
        }
    }

    fn mean_kernel(&self) -> Result<NdValue> {
        self.core.stat(|r| r.iter().enumerate().map(|(k, l)| k as f64 * l.exp()).sum())
    }

    fn variance_kernel(&self) -> Result<NdValue> {
        self.core.stat(|r| {
            let m: f64 = r.iter().enumerate().map(|(k, l)| k as f64 * l.exp()).sum();
            r.iter().enumerate().map(|(k, l)| (k as f64 - m).powi(2) * l.exp()).sum()
        })
    }

    fn mode_kernel(&self) -> Result<NdValue> {
        self.core.stat(|r| argmax(r) as f64)
    }

    fn entropy_kernel(&self) -> Result<NdValue> {
        self.core.entropy()
    }
}

/// One-hot encoded categorical: event shape `[K]`.
#[derive(Clone, Debug)]
pub struct OneHotCategorical {
    core: CategoricalCore,
}

impl OneHotCategorical {
    pub fn from_logits(logits: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("logits".into(), logits.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_probs(probs: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("probs".into(), probs.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        Ok(OneHotCategorical {
            core: CategoricalCore::new("OneHotCategorical", p, flags)?,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.core.name = name.into();
        self
    }

    pub fn log_probs(&self) -> &NdValue {
        &self.core.log_probs
    }

    pub fn probs(&self) -> NdValue {
        self.core.probs()
    }
}

impl Distribution for OneHotCategorical {
    fn name(&self) -> &str {
        &self.core.name
    }
    fn batch_shape(&self) -> Shape {
        self.core.batch.clone()
    }
    fn event_shape(&self) -> Shape {
        Shape::from([self.core.k])
    }
    fn dtype(&self) -> DType {
        DType::I64
    }
    fn float_dtype(&self) -> DType {
        self.core.pdtype
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        ReparameterizationType::NotReparameterized
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

    /// Uses the same uniforms as [`Categorical`], so both encodings of one
    /// parameterization draw corresponding outcomes.
    fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let k = self.core.k;
        let ks = self.core.draw(sample_shape, rng)?;
        let mut data = vec![0.0; ks.len() * k];
        for (i, c) in ks.into_iter().enumerate() {
            data[i * k + c] = 1.0;
        }
        NdValue::new(sample_shape.concat(&self.core.batch).concat(&self.event_shape()), DType::I64, data)
    }

    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        let k = self.core.k;
        let (shape, pairs) = broadcast_rows(&x.shape().drop_last(1), &self.core.batch)?;
        let lp = self.core.log_probs.data();
        let data = pairs
            .iter()
            .map(|&(xi, bi)| {
                let row = &x.data()[xi * k..(xi + 1) * k];
                let lrow = &lp[bi * k..(bi + 1) * k];
                let ones = row.iter().filter(|&&v| v == 1.0).count();
                if row.iter().any(|v| v.is_nan()) {
                    f64::NAN
                } else if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                    f64::NEG_INFINITY
                } else {
                    lrow[argmax(row)]
                }
            })
            .collect();
        NdValue::new(shape, self.core.pdtype, data)
    }

    fn check_support(&self, x: &NdValue) -> Result<()> {
        for row in x.rows(1) {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            if ones != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Domain(format!("{row:?} is not one-hot")));
            }
        }
        Ok(())
    }

    fn mean_kernel(&self) -> Result<NdValue> {
        Ok(self.core.probs())
    }

    fn variance_kernel(&self) -> Result<NdValue> {
        Ok(self.core.probs().map(|p| p * (1.0 - p)))
    }

    fn mode_kernel(&self) -> Result<NdValue> {
        let k = self.core.k;
        let mut data = Vec::with_capacity(self.core.log_probs.len());
        for r in self.core.log_probs.rows(1) {
            let m = argmax(r);
            data.extend((0..k).map(|i| if i == m { 1.0 } else { 0.0 }));
        }
        NdValue::new(self.core.log_probs.shape().clone(), self.core.pdtype, data)
    }

    fn entropy_kernel(&self) -> Result<NdValue> {
        self.core.entropy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_symmetric_coin() {
        let b = Bernoulli::from_logits(0.0).unwrap();
        let lp = b.log_prob(&NdValue::new(Shape::scalar(), DType::I64, vec![1.0]).unwrap()).unwrap();
        assert!((lp.item().unwrap() - (-std::f64::consts::LN_2)).abs() < 1e-15);
        assert_eq!(b.dtype(), DType::I64);
        let s = b.sample(&Shape::from([50]), &RngState::from_seed(2)).unwrap();
        assert_eq!(s.dtype(), DType::I64);
        assert!(s.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn bernoulli_exclusive() {
        let mut p = ParamMap::new();
        p.insert("logits".into(), 0.0.into());
        p.insert("probs".into(), 0.5.into());
        assert!(Bernoulli::from_params(&p, Flags::default()).is_err());
    }

    #[test]
    fn poisson_cdf_partial_sum() {
        let d = Poisson::new(4.0).unwrap();
        let c = d.cdf(&3.0.into()).unwrap().item().unwrap();
        assert!((c - 0.433_470_120_366_708_9).abs() < 1e-13);
        let q = d.quantile(&c.into()).unwrap().item().unwrap();
        assert_eq!(q, 3.0);
    }

    #[test]
    fn integer_validation() {
        let d = Poisson::with_flags(2.0, Flags::validated()).unwrap();
        assert!(d.log_prob(&1.5.into()).is_err());
        assert!(d.log_prob(&1e17.into()).is_err());
        let lax = Poisson::new(2.0).unwrap();
        assert_eq!(lax.log_prob(&1.5.into()).unwrap().item().unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn categorical_shapes_and_pmf() {
        let c = Categorical::from_probs([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]]).unwrap();
        assert_eq!(c.batch_shape(), Shape::from([2]));
        assert_eq!(c.event_shape(), Shape::scalar());
        let x = NdValue::new([2], DType::I64, vec![2.0, 0.0]).unwrap();
        let lp = c.log_prob(&x).unwrap();
        assert!((lp.data()[0] - 0.5f64.ln()).abs() < 1e-15);
        assert!((lp.data()[1] - 0.6f64.ln()).abs() < 1e-15);
        let mean = c.mean().unwrap();
        assert!((mean.data()[0] - 1.3).abs() < 1e-15);
    }

    #[test]
    fn one_hot_matches_categorical() {
        let logits = NdValue::from([[0.1, -0.4, 1.2]]);
        let c = Categorical::from_logits(logits.clone()).unwrap();
        let o = OneHotCategorical::from_logits(logits).unwrap();
        assert_eq!(o.event_shape(), Shape::from([3]));
        let rng = RngState::from_seed(5);
        let cs = c.sample(&Shape::from([20]), &rng).unwrap();
        let os = o.sample(&Shape::from([20]), &rng).unwrap();
        for (i, row) in os.rows(1).enumerate() {
            assert_eq!(row[cs.data()[i] as usize], 1.0);
        }
        for k in 0..3 {
            let mut e = vec![0.0; 3];
            e[k] = 1.0;
            let a = c.log_prob(&NdValue::new(Shape::scalar(), DType::I64, vec![k as f64]).unwrap()).unwrap();
            let b = o.log_prob(&NdValue::new([3], DType::I64, e).unwrap()).unwrap();
            assert_eq!(a.data(), b.data());
        }
    }
}
