//! Bijectors: invertible maps with tracked log-det-Jacobians.

mod affine;
mod autoregressive;
mod cache;
mod elementwise;
mod structural;

use std::sync::Arc;

pub use affine::{Affine, AffineScale};
pub use autoregressive::{audit_dependence, AutoregressiveFn, LinearAutoregressive, MaskedAutoregressive, ZeroAutoregressive};
pub use cache::{caching_default, BijectorCache, DEFAULT_CACHE_CAPACITY};
pub use elementwise::{AbsValue, Exp, Identity, Sigmoid, Softplus, Square};
pub use structural::{Permute, Reshape, SoftmaxCentered};

use crate::error::{Error, Result};
use crate::nd::{CacheToken, NdValue, Shape};

/// Which side of the map a cached log-det-Jacobian was computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    Forward,
    Inverse,
}

/// Preimages of a value under a non-injective bijector.
#[derive(Clone, Debug, PartialEq)]
pub struct PreimageSet {
    pub branches: Vec<NdValue>,
}

impl PreimageSet {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

/// An invertible (or piecewise invertible) map with its log-det-Jacobian.
///
/// Implementors provide the `*_kernel` methods; callers use the provided
/// public methods, which add rank checks, caching and the derivation of one
/// log-det-Jacobian direction from the other.
pub trait Bijector: Send + Sync {
    fn name(&self) -> &str;

    /// Minimum trailing rank of inputs to [`Bijector::forward`].
    fn forward_min_event_rank(&self) -> usize;

    fn inverse_min_event_rank(&self) -> usize {
        self.forward_min_event_rank()
    }

    fn is_constant_jacobian(&self) -> bool {
        false
    }

    fn is_injective(&self) -> bool {
        true
    }

    fn cache(&self) -> &BijectorCache;

    fn forward_event_shape(&self, shape: &Shape) -> Result<Shape> {
        Ok(shape.clone())
    }

    fn inverse_event_shape(&self, shape: &Shape) -> Result<Shape> {
        Ok(shape.clone())
    }

    /// Event rank on the output side for an input-side event rank.
    fn forward_event_rank(&self, rank: usize) -> Result<usize> {
        Ok(rank)
    }

    fn inverse_event_rank(&self, rank: usize) -> Result<usize> {
        Ok(rank)
    }

    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue>;

    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue>;

    /// Raw branches `(preimage, elementwise ildj)` for smooth coverings.
    fn inverse_branches_kernel(&self, _y: &NdValue) -> Result<Vec<(NdValue, NdValue)>> {
        Err(Error::NotImplemented(format!("{}: inverse branches", self.name())))
    }

    fn fldj_kernel(&self, _x: &NdValue, _event_rank: usize) -> Option<Result<NdValue>> {
        None
    }

    fn ildj_kernel(&self, _y: &NdValue, _event_rank: usize) -> Option<Result<NdValue>> {
        None
    }

    /// Number of inverse computations that were not served from a cache.
    fn inverse_calls(&self) -> u64 {
        self.cache().inverse_calls()
    }

    fn set_caching(&self, enabled: bool) {
        self.cache().set_enabled(enabled);
    }

    fn forward(&self, x: &NdValue) -> Result<NdValue> {
        check_rank(self.name(), x, self.forward_min_event_rank())?;
        let cache = self.cache();
        let caching = self.is_injective() && cache.enabled();
        if caching {
            if let Some(y) = x.token().and_then(|t| cache.output_of(t)) {
                return Ok(y);
            }
        }
        let x = x.clone().ensure_token();
        let y = self.forward_kernel(&x)?.with_token(CacheToken::fresh());
        if caching {
            cache.insert(x, y.clone());
        }
        Ok(y)
    }

    fn inverse(&self, y: &NdValue) -> Result<NdValue> {
        if !self.is_injective() {
            return Err(Error::NotInvertible(format!(
                "{} is not injective; use inverse_set",
                self.name()
            )));
        }
        check_rank(self.name(), y, self.inverse_min_event_rank())?;
        let cache = self.cache();
        let caching = cache.enabled();
        if caching {
            if let Some(x) = y.token().and_then(|t| cache.input_of(t)) {
                return Ok(x);
            }
        }
        cache.count_inverse();
        let y = y.clone().ensure_token();
        let x = self.inverse_kernel(&y)?.with_token(CacheToken::fresh());
        if caching {
            cache.insert(x.clone(), y);
        }
        Ok(x)
    }

    /// All preimages of `y`; coinciding branches are merged.
    fn inverse_set(&self, y: &NdValue) -> Result<PreimageSet> {
        let mut branches: Vec<NdValue> = Vec::new();
        for (x, _) in self.inverse_branches(y, 0)? {
            if !branches.iter().any(|b| b == &x) {
                branches.push(x);
            }
        }
        Ok(PreimageSet { branches })
    }

    /// Every branch `(preimage, ildj)` with the ildj reduced over
    /// `event_rank` axes. Branches are not merged, so densities sum them.
    fn inverse_branches(&self, y: &NdValue, event_rank: usize) -> Result<Vec<(NdValue, NdValue)>> {
        if self.is_injective() {
            let x = self.inverse(y)?;
            let ildj = self.inverse_log_det_jacobian(y, event_rank)?;
            return Ok(vec![(x, ildj)]);
        }
        if event_rank != 0 {
            return Err(Error::Rank(format!(
                "{} branches are elementwise; event rank must be 0, got {event_rank}",
                self.name()
            )));
        }
        self.cache().count_inverse();
        let dtype = y.dtype().float();
        self.inverse_branches_kernel(y)?
            .into_iter()
            .map(|(x, l)| Ok((x, l.cast(dtype)?)))
            .collect()
    }

    fn forward_log_det_jacobian(&self, x: &NdValue, event_rank: usize) -> Result<NdValue> {
        check_ldj_rank(self.name(), x, event_rank, self.forward_min_event_rank())?;
        let cache = self.cache();
        let caching = self.is_injective() && cache.enabled();
        if caching {
            if let Some(v) = x.token().and_then(|t| cache.ldj(t, Side::Forward, event_rank)) {
                return Ok(v);
            }
        }
        let v = match self.fldj_kernel(x, event_rank) {
            Some(v) => v?,
            None => {
                let y = self.forward(x)?;
                let rank = self.forward_event_rank(event_rank)?;
                self.ildj_kernel(&y, rank)
                    .ok_or_else(|| missing_ldj(self.name()))??
                    .neg()
            }
        };
        let v = v.cast(x.dtype().float())?;
        if caching {
            if let Some(t) = x.token() {
                cache.store_ldj(t, Side::Forward, event_rank, v.clone());
            }
        }
        Ok(v)
    }

    fn inverse_log_det_jacobian(&self, y: &NdValue, event_rank: usize) -> Result<NdValue> {
        if !self.is_injective() {
            return Err(Error::NotInvertible(format!(
                "{} is not injective; use inverse_branches",
                self.name()
            )));
        }
        check_ldj_rank(self.name(), y, event_rank, self.inverse_min_event_rank())?;
        let cache = self.cache();
        let caching = cache.enabled();
        let dtype = y.dtype().float();
        if caching {
            if let Some(t) = y.token() {
                if let Some(v) = cache.ldj(t, Side::Inverse, event_rank) {
                    return Ok(v);
                }
                if let Some(x) = cache.input_of(t) {
                    let rank = self.inverse_event_rank(event_rank)?;
                    let fldj = match cache.ldj_of_input(t, rank) {
                        Some(v) => Some(v),
                        None => self.fldj_kernel(&x, rank).transpose()?,
                    };
                    if let Some(f) = fldj {
                        let v = f.neg().cast(dtype)?;
                        cache.store_ldj(t, Side::Inverse, event_rank, v.clone());
                        return Ok(v);
                    }
                }
            }
        }
        let v = match self.ildj_kernel(y, event_rank) {
            Some(v) => v?,
            None => {
                let x = self.inverse(y)?;
                let rank = self.inverse_event_rank(event_rank)?;
                self.fldj_kernel(&x, rank)
                    .ok_or_else(|| missing_ldj(self.name()))??
                    .neg()
            }
        };
        let v = v.cast(dtype)?;
        if caching {
            if let Some(t) = y.token() {
                cache.store_ldj(t, Side::Inverse, event_rank, v.clone());
            }
        }
        Ok(v)
    }
}

fn missing_ldj(name: &str) -> Error {
    Error::NotImplemented(format!("{name}: log-det-Jacobian"))
}

fn check_rank(name: &str, v: &NdValue, min: usize) -> Result<()> {
    if v.rank() < min {
        return Err(Error::Rank(format!(
            "{name} needs rank >= {min}, got shape {}",
            v.shape()
        )));
    }
    Ok(())
}

fn check_ldj_rank(name: &str, v: &NdValue, event_rank: usize, min: usize) -> Result<()> {
    if event_rank < min {
        return Err(Error::Rank(format!(
            "{name} needs event rank >= {min}, got {event_rank}"
        )));
    }
    check_rank(name, v, event_rank)
}

/// Reduces an elementwise log-det-Jacobian over `event_rank` trailing axes.
pub(crate) fn reduce_elementwise(ldj: NdValue, x_shape: &Shape, event_rank: usize) -> Result<NdValue> {
    reduce_per_event(ldj, x_shape, 0, event_rank)
}

/// Reduces a per-event log-det-Jacobian (computed at `min_rank`) to
/// `event_rank`, broadcasting against the leading dims of `x_shape`.
pub(crate) fn reduce_per_event(
    per_event: NdValue,
    x_shape: &Shape,
    min_rank: usize,
    event_rank: usize,
) -> Result<NdValue> {
    let lead = x_shape.drop_last(min_rank);
    let shape = crate::nd::broadcast_shapes(per_event.shape(), &lead)?;
    per_event.broadcast_to(&shape)?.sum_trailing(event_rank - min_rank)
}

/// Composition applied right to left: `Chain([f, g]).forward(x) = f(g(x))`.
pub struct Chain {
    name: String,
    parts: Vec<Arc<dyn Bijector>>,
    min_rank: usize,
    cache: BijectorCache,
}

impl Chain {
    pub fn new(parts: Vec<Arc<dyn Bijector>>) -> Result<Self> {
        let name = if parts.is_empty() {
            "Identity".to_string()
        } else {
            let names: Vec<&str> = parts.iter().map(|b| b.name()).collect();
            format!("Chain[{}]", names.join(","))
        };
        let min_rank = (0..=32)
            .find(|&r| Self::ranks_ok(&parts, r))
            .ok_or_else(|| Error::Shape(format!("{name}: no event rank satisfies every part")))?;
        Ok(Chain {
            name,
            parts,
            min_rank,
            cache: BijectorCache::new(),
        })
    }

    pub fn parts(&self) -> &[Arc<dyn Bijector>] {
        &self.parts
    }

    fn ranks_ok(parts: &[Arc<dyn Bijector>], mut rank: usize) -> bool {
        for b in parts.iter().rev() {
            if rank < b.forward_min_event_rank() {
                return false;
            }
            match b.forward_event_rank(rank) {
                Ok(r) => rank = r,
                Err(_) => return false,
            }
        }
        true
    }
}

impl Bijector for Chain {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward_min_event_rank(&self) -> usize {
        self.min_rank
    }

    fn inverse_min_event_rank(&self) -> usize {
        self.forward_event_rank(self.min_rank).unwrap_or(self.min_rank)
    }

    fn is_constant_jacobian(&self) -> bool {
        self.parts.iter().all(|b| b.is_constant_jacobian())
    }

    fn is_injective(&self) -> bool {
        self.parts.iter().all(|b| b.is_injective())
    }

    fn cache(&self) -> &BijectorCache {
        &self.cache
    }

    fn forward_event_shape(&self, shape: &Shape) -> Result<Shape> {
        self.parts
            .iter()
            .rev()
            .try_fold(shape.clone(), |s, b| b.forward_event_shape(&s))
    }

    fn inverse_event_shape(&self, shape: &Shape) -> Result<Shape> {
        self.parts
            .iter()
            .try_fold(shape.clone(), |s, b| b.inverse_event_shape(&s))
    }

    fn forward_event_rank(&self, rank: usize) -> Result<usize> {
        self.parts.iter().rev().try_fold(rank, |r, b| b.forward_event_rank(r))
    }

    fn inverse_event_rank(&self, rank: usize) -> Result<usize> {
        self.parts.iter().try_fold(rank, |r, b| b.inverse_event_rank(r))
    }

    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.parts.iter().rev().try_fold(x.clone(), |v, b| b.forward(&v))
    }

    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        self.parts.iter().try_fold(y.clone(), |v, b| b.inverse(&v))
    }

    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        Some((|| {
            let mut total = NdValue::zeros(x.shape().drop_last(event_rank), x.dtype().float());
            let (mut v, mut r) = (x.clone(), event_rank);
            for b in self.parts.iter().rev() {
                total = total.add(&b.forward_log_det_jacobian(&v, r)?)?;
                r = b.forward_event_rank(r)?;
                v = b.forward(&v)?;
            }
            Ok(total)
        })())
    }

    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        if !self.is_injective() {
            return None;
        }
        Some((|| {
            let mut total = NdValue::zeros(y.shape().drop_last(event_rank), y.dtype().float());
            let (mut v, mut r) = (y.clone(), event_rank);
            for b in &self.parts {
                total = total.add(&b.inverse_log_det_jacobian(&v, r)?)?;
                r = b.inverse_event_rank(r)?;
                v = b.inverse(&v)?;
            }
            Ok(total)
        })())
    }

    fn inverse_branches_kernel(&self, y: &NdValue) -> Result<Vec<(NdValue, NdValue)>> {
        let mut branches = vec![(y.clone(), NdValue::zeros(y.shape().clone(), y.dtype().float()))];
        for b in &self.parts {
            let mut next = Vec::new();
            for (v, acc) in &branches {
                for (x, l) in b.inverse_branches(v, 0)? {
                    next.push((x, acc.add(&l)?));
                }
            }
            branches = next;
        }
        Ok(branches)
    }

    fn inverse_calls(&self) -> u64 {
        self.cache.inverse_calls() + self.parts.iter().map(|b| b.inverse_calls()).sum::<u64>()
    }

    fn set_caching(&self, enabled: bool) {
        self.cache.set_enabled(enabled);
        for b in &self.parts {
            b.set_caching(enabled);
        }
    }
}

/// Swaps the forward and inverse directions of an injective bijector.
pub struct Invert {
    name: String,
    inner: Arc<dyn Bijector>,
    cache: BijectorCache,
}

impl Invert {
    pub fn new(inner: Arc<dyn Bijector>) -> Result<Self> {
        if !inner.is_injective() {
            return Err(Error::NotInvertible(format!(
                "{} is a smooth covering and has no inverse bijector",
                inner.name()
            )));
        }
        Ok(Invert {
            name: format!("Invert[{}]", inner.name()),
            inner,
            cache: BijectorCache::new(),
        })
    }

    pub fn inner(&self) -> &Arc<dyn Bijector> {
        &self.inner
    }
}

impl Bijector for Invert {
    fn name(&self) -> &str {
        &self.name
    }

    fn forward_min_event_rank(&self) -> usize {
        self.inner.inverse_min_event_rank()
    }

    fn inverse_min_event_rank(&self) -> usize {
        self.inner.forward_min_event_rank()
    }

    fn is_constant_jacobian(&self) -> bool {
        self.inner.is_constant_jacobian()
    }

    fn cache(&self) -> &BijectorCache {
        &self.cache
    }

    fn forward_event_shape(&self, shape: &Shape) -> Result<Shape> {
        self.inner.inverse_event_shape(shape)
    }

    fn inverse_event_shape(&self, shape: &Shape) -> Result<Shape> {
        self.inner.forward_event_shape(shape)
    }

    fn forward_event_rank(&self, rank: usize) -> Result<usize> {
        self.inner.inverse_event_rank(rank)
    }

    fn inverse_event_rank(&self, rank: usize) -> Result<usize> {
        self.inner.forward_event_rank(rank)
    }

    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.inner.inverse_kernel(x)
    }

    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        self.inner.forward_kernel(y)
    }

    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        self.inner.ildj_kernel(x, event_rank)
    }

    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        self.inner.fldj_kernel(y, event_rank)
    }

    fn set_caching(&self, enabled: bool) {
        self.cache.set_enabled(enabled);
        self.inner.set_caching(enabled);
    }
}

/// Builds a parameterized catalog bijector by name. `Chain` and `Invert`
/// take other bijectors and are built with [`Chain::new`] / [`Invert::new`].
pub fn construct_bijector(
    name: &str,
    params: &crate::dist::ParamMap,
    validate_args: bool,
) -> Result<Arc<dyn Bijector>> {
    let args = crate::families::Args::new(name, params, allowed_params(name)?)?;
    let shape_param = |key: &str| -> Result<Shape> {
        let v = args.req(key)?;
        let dims = v
            .data()
            .iter()
            .map(|&d| {
                if d >= 0.0 && d.fract() == 0.0 {
                    Ok(d as usize)
                } else {
                    Err(Error::invalid(key, format!("{d} is not a dimension")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Shape::new(dims))
    };
    Ok(match name {
        "Identity" => Arc::new(Identity::new()),
        "Exp" => Arc::new(Exp::new(validate_args)),
        "Sigmoid" => Arc::new(Sigmoid::new(validate_args)),
        "Softplus" => Arc::new(Softplus::new(validate_args)),
        "AbsValue" => Arc::new(AbsValue::new()),
        "Square" => Arc::new(Square::new()),
        "SoftmaxCentered" => Arc::new(SoftmaxCentered::new(validate_args)),
        "Affine" => {
            let scale = match (
                args.get("scale_identity_multiplier"),
                args.get("scale_diag"),
                args.get("scale_tril"),
            ) {
                (None, None, None) => AffineScale::Identity,
                (Some(m), None, None) => AffineScale::Multiplier(m.clone()),
                (None, Some(d), None) => AffineScale::Diag(d.clone()),
                (None, None, Some(l)) => AffineScale::TriL(l.clone()),
                _ => {
                    return Err(Error::invalid(
                        "scale",
                        "at most one of scale_identity_multiplier, scale_diag, scale_tril",
                    ))
                }
            };
            Arc::new(Affine::new(args.get("shift").cloned(), scale, validate_args)?)
        }
        "Permute" => {
            let perm = shape_param("permutation")?;
            Arc::new(Permute::new(perm.dims().to_vec())?)
        }
        "Reshape" => Arc::new(Reshape::new(shape_param("event_shape_in")?, shape_param("event_shape_out")?)?),
        "MaskedAutoregressive" => {
            let f = LinearAutoregressive::new(
                args.req("shift_weights")?.clone(),
                args.req("log_scale_weights")?.clone(),
                args.get("shift_bias").cloned(),
                args.get("log_scale_bias").cloned(),
            )?;
            Arc::new(MaskedAutoregressive::new(Arc::new(f), validate_args)?)
        }
        _ => unreachable!(),
    })
}

/// Catalog bijector names accepted by [`construct_bijector`].
pub const BIJECTOR_NAMES: &[&str] = &[
    "Identity",
    "Exp",
    "Sigmoid",
    "Softplus",
    "Affine",
    "Permute",
    "Reshape",
    "SoftmaxCentered",
    "AbsValue",
    "Square",
    "MaskedAutoregressive",
];

fn allowed_params(name: &str) -> Result<&'static [&'static str]> {
    Ok(match name {
        "Identity" | "Exp" | "Sigmoid" | "Softplus" | "AbsValue" | "Square" | "SoftmaxCentered" => &[],
        "Affine" => &["shift", "scale_identity_multiplier", "scale_diag", "scale_tril"],
        "Permute" => &["permutation"],
        "Reshape" => &["event_shape_in", "event_shape_out"],
        "MaskedAutoregressive" => &["shift_weights", "log_scale_weights", "shift_bias", "log_scale_bias"],
        other => return Err(Error::invalid("bijector", format!("unknown bijector `{other}`"))),
    })
}
