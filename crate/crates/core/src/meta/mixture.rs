use std::any::Any;
use std::sync::Arc;

use crate::dist::{Distribution, Flags, ParamMap, ReparameterizationType};
use crate::error::{Error, Result};
use crate::families::Categorical;
use crate::nd::{broadcast_all, broadcast_shapes, DType, NdValue, Shape};
use crate::random::RngState;

/// Inserts unit dims after the first `keep` dims so the remainder has rank `rank`.
fn pad_after(v: &NdValue, keep: usize, rank: usize) -> Result<NdValue> {
    let dims = v.shape().dims();
    let rest = dims.len() - keep;
    if rest >= rank {
        return Ok(v.clone());
    }
    let mut out = dims[..keep].to_vec();
    out.extend(std::iter::repeat(1).take(rank - rest));
    out.extend_from_slice(&dims[keep..]);
    v.reshape(out)
}

/// Appends `n` unit dims.
fn pad_trailing(v: &NdValue, n: usize) -> Result<NdValue> {
    let mut dims = v.shape().dims().to_vec();
    dims.extend(std::iter::repeat(1).take(n));
    v.reshape(dims)
}

/// Mean and elementwise variance of a mixture from per-component moments.
fn mixture_moments(
    log_w: &NdValue,
    k: usize,
    event_rank: usize,
    want_variance: bool,
    moments: impl Fn(usize) -> Result<(NdValue, Option<NdValue>)>,
) -> Result<(NdValue, Option<NdValue>)> {
    let mut mean: Option<NdValue> = None;
    let mut second: Option<NdValue> = None;
    for i in 0..k {
        let w = pad_trailing(&log_w.index_axis(-1, i)?.map(f64::exp), event_rank)?;
        let (m, v) = moments(i)?;
        let wm = w.mul(&m)?;
        mean = Some(match mean {
            Some(acc) => acc.add(&wm)?,
            None => wm,
        });
        if want_variance {
            let v = v.ok_or_else(|| Error::NotImplemented("component variance".into()))?;
            let s = w.mul(&v.add(&m.mul(&m)?)?)?;
            second = Some(match second {
                Some(acc) => acc.add(&s)?,
                None => s,
            });
        }
    }
    let mean = mean.ok_or_else(|| Error::Shape("mixture has no components".into()))?;
    let var = match second {
        Some(s) => Some(s.sub(&mean.mul(&mean)?)?.map(|v| v.max(0.0))),
        None => None,
    };
    Ok((mean, var))
}

fn weights_for(cat: &Categorical, dtype: DType) -> Result<NdValue> {
    cat.log_probs().cast(dtype)
}

/// Mixture over an explicit list of components with identical event shapes.
pub struct Mixture {
    name: String,
    cat: Categorical,
    components: Vec<Arc<dyn Distribution>>,
    batch: Shape,
    event: Shape,
}

impl Mixture {
    pub fn new(cat: Categorical, components: Vec<Arc<dyn Distribution>>) -> Result<Self> {
        let k = cat.num_categories();
        if components.len() != k {
            return Err(Error::Shape(format!(
                "{} components for {k} mixture weights",
                components.len()
            )));
        }
        let event = components[0].event_shape();
        let dtype = components[0].dtype();
        for c in &components[1..] {
            if c.event_shape() != event {
                return Err(Error::Shape(format!(
                    "component event shapes differ: {event} and {}",
                    c.event_shape()
                )));
            }
            if c.dtype() != dtype {
                return Err(Error::DTypeMismatch(format!("component dtypes differ: {dtype} and {}", c.dtype())));
            }
        }
        let batches: Vec<Shape> = std::iter::once(cat.batch_shape())
            .chain(components.iter().map(|c| c.batch_shape()))
            .collect();
        let batch = broadcast_all(batches.iter())?;
        Ok(Mixture {
            name: "Mixture".into(),
            cat,
            components,
            batch,
            event,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn mixture_distribution(&self) -> &Categorical {
        &self.cat
    }

    pub fn components(&self) -> &[Arc<dyn Distribution>] {
        &self.components
    }

    fn log_weights(&self) -> Result<NdValue> {
        weights_for(&self.cat, self.float_dtype())
    }

    /// `sum_k w_k H_k`, a lower bound on the mixture entropy.
    pub fn entropy_lower_bound(&self) -> Result<NdValue> {
        let lw = self.log_weights()?;
        let mut acc: Option<NdValue> = None;
        for (i, c) in self.components.iter().enumerate() {
            let t = lw.index_axis(-1, i)?.map(f64::exp).mul(&c.entropy()?)?;
            acc = Some(match acc {
                Some(a) => a.add(&t)?,
                None => t,
            });
        }
        acc.ok_or_else(|| Error::Shape("mixture has no components".into()))
    }

    fn moments(&self, want_variance: bool) -> Result<(NdValue, Option<NdValue>)> {
        mixture_moments(&self.log_weights()?, self.components.len(), self.event.rank(), want_variance, |i| {
            let c = &self.components[i];
            let v = if want_variance { Some(c.variance()?) } else { None };
            Ok((c.mean()?, v))
        })
    }
}

impl Distribution for Mixture {
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
        self.components[0].dtype()
    }
    fn float_dtype(&self) -> DType {
        self.components[0].float_dtype()
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        ReparameterizationType::NotReparameterized
    }
    fn flags(&self) -> Flags {
        self.cat.flags()
    }
    fn parameters(&self) -> ParamMap {
        self.cat.parameters()
    }
    fn as_any(&self) -> &dyn Any {
        self
    }

    /// Draws every component, then keeps the one picked by the categorical.
    fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let keys = rng.split(self.components.len() + 1);
        let s = sample_shape.rank();
        let lead = sample_shape.concat(&self.batch);
        let full = lead.concat(&self.event);
        let idx = pad_after(&self.cat.sample(sample_shape, &keys[0])?, s, self.batch.rank())?.broadcast_to(&lead)?;
        let draws = self
            .components
            .iter()
            .zip(&keys[1..])
            .map(|(c, key)| {
                let d = c.sample(sample_shape, key)?;
                pad_after(&d, s, self.batch.rank() + self.event.rank())?.broadcast_to(&full)
            })
            .collect::<Result<Vec<_>>>()?;
        let e = self.event.num_elements();
        let mut out = Vec::with_capacity(full.num_elements());
        for (p, &k) in idx.data().iter().enumerate() {
            out.extend_from_slice(&draws[k as usize].data()[p * e..(p + 1) * e]);
        }
        NdValue::new(full, self.dtype(), out)
    }

    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        let lw = self.log_weights()?;
        let terms = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| lw.index_axis(-1, i)?.add(&c.log_prob(x)?))
            .collect::<Result<Vec<_>>>()?;
        NdValue::stack_last(&terms)?.log_sum_exp(-1)
    }

    fn mean_kernel(&self) -> Result<NdValue> {
        Ok(self.moments(false)?.0)
    }

    fn variance_kernel(&self) -> Result<NdValue> {
        self.moments(true)?
            .1
            .ok_or_else(|| Error::NotImplemented("mixture variance".into()))
    }
}

/// Mixture whose components are the rightmost batch dim of one distribution.
pub struct MixtureSameFamily {
    name: String,
    cat: Categorical,
    components: Arc<dyn Distribution>,
    batch: Shape,
    k: usize,
}

impl MixtureSameFamily {
    pub fn new(cat: Categorical, components: Arc<dyn Distribution>) -> Result<Self> {
        let cb = components.batch_shape();
        let k = cat.num_categories();
        if cb.dims().last() != Some(&k) {
            return Err(Error::Shape(format!(
                "components batch {cb} must end with the {k} mixture categories"
            )));
        }
        let batch = broadcast_shapes(&cat.batch_shape(), &cb.drop_last(1))?;
        Ok(MixtureSameFamily {
            name: "MixtureSameFamily".into(),
            cat,
            components,
            batch,
            k,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn mixture_distribution(&self) -> &Categorical {
        &self.cat
    }

    pub fn components_distribution(&self) -> &Arc<dyn Distribution> {
        &self.components
    }

    fn log_weights(&self) -> Result<NdValue> {
        weights_for(&self.cat, self.float_dtype())
    }

    /// `sum_k w_k H_k`, a lower bound on the mixture entropy.
    pub fn entropy_lower_bound(&self) -> Result<NdValue> {
        let w = self.log_weights()?.map(f64::exp);
        w.mul(&self.components.entropy()?)?.sum_trailing(1)
    }

    fn moments(&self, want_variance: bool) -> Result<(NdValue, Option<NdValue>)> {
        let er = self.components.event_shape().rank();
        let axis = -(er as isize) - 1;
        let mean = self.components.mean()?;
        let var = if want_variance { Some(self.components.variance()?) } else { None };
        mixture_moments(&self.log_weights()?, self.k, er, want_variance, |i| {
            let v = match &var {
                Some(v) => Some(v.index_axis(axis, i)?),
                None => None,
            };
            Ok((mean.index_axis(axis, i)?, v))
        })
    }
}

impl Distribution for MixtureSameFamily {
    fn name(&self) -> &str {
        &self.name
    }
    fn batch_shape(&self) -> Shape {
        self.batch.clone()
    }
    fn event_shape(&self) -> Shape {
        self.components.event_shape()
    }
    fn dtype(&self) -> DType {
        self.components.dtype()
    }
    fn float_dtype(&self) -> DType {
        self.components.float_dtype()
    }
    fn reparameterization_type(&self) -> ReparameterizationType {
        ReparameterizationType::NotReparameterized
    }
    fn flags(&self) -> Flags {
        self.cat.flags()
    }
    fn parameters(&self) -> ParamMap {
        self.cat.parameters()
    }
    fn as_any(&self) -> &dyn Any {
        self
    }

    fn sample_kernel(&self, sample_shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let keys = rng.split(2);
        let s = sample_shape.rank();
        let event = self.event_shape();
        let lead = sample_shape.concat(&self.batch);
        let idx = pad_after(&self.cat.sample(sample_shape, &keys[0])?, s, self.batch.rank())?.broadcast_to(&lead)?;
        let draws = self.components.sample(sample_shape, &keys[1])?;
        let with_k = lead.concat(&Shape::from([self.k])).concat(&event);
        let draws = pad_after(&draws, s, self.batch.rank() + 1 + event.rank())?.broadcast_to(&with_k)?;
        let e = event.num_elements();
        let mut out = Vec::with_capacity(lead.num_elements() * e);
        for (p, &k) in idx.data().iter().enumerate() {
            let start = (p * self.k + k as usize) * e;
            out.extend_from_slice(&draws.data()[start..start + e]);
        }
        NdValue::new(lead.concat(&event), self.dtype(), out)
    }

    fn log_prob_kernel(&self, x: &NdValue) -> Result<NdValue> {
        let er = self.components.event_shape().rank();
        let xe = x.expand_dims((x.rank() - er) as isize)?;
        let lp = self.components.log_prob(&xe)?;
        lp.add(&self.log_weights()?)?.log_sum_exp(-1)
    }

    fn mean_kernel(&self) -> Result<NdValue> {
        Ok(self.moments(false)?.0)
    }

    fn variance_kernel(&self) -> Result<NdValue> {
        self.moments(true)?
            .1
            .ok_or_else(|| Error::NotImplemented("mixture variance".into()))
    }
}

/// Kernel density estimate: a uniform mixture of `builder(points)`, which
/// must have batch shape `[n]` for `n` points stacked on the leading axis.
pub fn kde(
    points: &NdValue,
    builder: impl FnOnce(&NdValue) -> Result<Arc<dyn Distribution>>,
) -> Result<MixtureSameFamily> {
    let n = points.shape().dims().first().copied().unwrap_or(0);
    if n == 0 {
        return Err(Error::EmptyPoints);
    }
    let kernels = builder(points)?;
    if kernels.batch_shape() != Shape::from([n]) {
        return Err(Error::Shape(format!(
            "kernel builder returned batch {}, expected [{n}]",
            kernels.batch_shape()
        )));
    }
    let point_event = points.shape().drop_first(1);
    if kernels.event_shape() != point_event {
        return Err(Error::Shape(format!(
            "kernel event {} does not match point shape {point_event}",
            kernels.event_shape()
        )));
    }
    let cat = Categorical::from_probs(NdValue::vector(vec![1.0 / n as f64; n]))?;
    Ok(MixtureSameFamily::new(cat, kernels)?.with_name("KernelDensityEstimate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Normal;

    fn normals(locs: &[f64], scales: &[f64]) -> Vec<Arc<dyn Distribution>> {
        locs.iter()
            .zip(scales)
            .map(|(&l, &s)| Arc::new(Normal::new(l, s).unwrap()) as Arc<dyn Distribution>)
            .collect()
    }

    fn npdf(x: f64, m: f64, s: f64) -> f64 {
        (-(x - m).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn two_component_density() {
        let m = Mixture::new(Categorical::from_probs(NdValue::vector(vec![0.2, 0.8])).unwrap(), normals(&[-1.0, 2.0], &[0.5, 1.5]))
            .unwrap();
        for &x in &[-2.0, 0.0, 1.3, 5.0] {
            let direct = 0.2 * npdf(x, -1.0, 0.5) + 0.8 * npdf(x, 2.0, 1.5);
            let lp = m.log_prob(&NdValue::scalar(x)).unwrap().item().unwrap();
            assert!((lp - direct.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_component_is_exact() {
        let m = Mixture::new(Categorical::from_probs(NdValue::vector(vec![1.0])).unwrap(), normals(&[0.3], &[2.0])).unwrap();
        let n = Normal::new(0.3, 2.0).unwrap();
        let x = NdValue::vector(vec![-1.0, 0.0, 4.0]);
        assert_eq!(m.log_prob(&x).unwrap(), n.log_prob(&x).unwrap());
    }

    #[test]
    fn same_family_agrees_with_list() {
        let probs = NdValue::vector(vec![0.1, 0.3, 0.6]);
        let locs = [-2.0, 0.0, 3.0];
        let scales = [1.0, 0.5, 2.0];
        let list = Mixture::new(Categorical::from_probs(probs.clone()).unwrap(), normals(&locs, &scales)).unwrap();
        let batched = Normal::new(NdValue::vector(locs.to_vec()), NdValue::vector(scales.to_vec())).unwrap();
        let msf = MixtureSameFamily::new(Categorical::from_probs(probs).unwrap(), Arc::new(batched)).unwrap();
        let x = NdValue::vector(vec![-3.0, -0.5, 0.2, 2.9, 7.0]);
        assert!(list.log_prob(&x).unwrap().max_abs_diff(&msf.log_prob(&x).unwrap()) < 1e-12);
        let (ml, mm) = (list.mean().unwrap(), msf.mean().unwrap());
        assert!(ml.max_abs_diff(&mm) < 1e-14);
        assert!(list.variance().unwrap().max_abs_diff(&msf.variance().unwrap()) < 1e-12);
    }

    #[test]
    fn sample_shapes_and_selection() {
        let probs = NdValue::vector(vec![0.5, 0.5]);
        let locs = NdValue::from_shape_vec([3, 2], vec![-100.0, 100.0, -100.0, 100.0, -100.0, 100.0]).unwrap();
        let comps = Normal::new(locs, 1e-3).unwrap();
        let msf = MixtureSameFamily::new(Categorical::from_probs(probs.clone()).unwrap(), Arc::new(comps)).unwrap();
        assert_eq!(msf.batch_shape(), Shape::from([3]));
        let s = msf.sample(&Shape::from([50]), &RngState::from_seed(2)).unwrap();
        assert_eq!(s.shape(), &Shape::from([50, 3]));
        assert!(s.data().iter().all(|v| (v.abs() - 100.0).abs() < 0.1));
        let list = Mixture::new(Categorical::from_probs(probs).unwrap(), normals(&[-100.0, 100.0], &[1e-3, 1e-3])).unwrap();
        let s = list.sample(&Shape::from([40]), &RngState::from_seed(2)).unwrap();
        let neg = s.data().iter().filter(|v| **v < 0.0).count();
        assert!(neg > 5 && neg < 35);
    }

    #[test]
    fn kde_single_point_is_kernel() {
        let pts = NdValue::vector(vec![1.5]);
        let d = kde(&pts, |p| Ok(Arc::new(Normal::new(p.clone(), 1.0)?))).unwrap();
        let n = Normal::new(1.5, 1.0).unwrap();
        let x = NdValue::vector(vec![-1.0, 1.5, 3.0]);
        assert!(d.log_prob(&x).unwrap().max_abs_diff(&n.log_prob(&x).unwrap()) < 1e-15);
        let empty = NdValue::new([0], DType::F64, vec![]).unwrap();
        assert_eq!(kde(&empty, |p| Ok(Arc::new(Normal::new(p.clone(), 1.0)?))).err(), Some(Error::EmptyPoints));
    }

    #[test]
    fn entropy_lower_bound_is_weighted() {
        let m = Mixture::new(Categorical::from_probs(NdValue::vector(vec![0.25, 0.75])).unwrap(), normals(&[0.0, 5.0], &[1.0, 2.0]))
            .unwrap();
        let h = |s: f64| 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s * s).ln();
        let lb = m.entropy_lower_bound().unwrap().item().unwrap();
        assert!((lb - (0.25 * h(1.0) + 0.75 * h(2.0))).abs() < 1e-14);
    }
}
