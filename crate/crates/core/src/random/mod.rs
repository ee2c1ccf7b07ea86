//! Explicit, splittable random streams and the low-level variate kernels.
//!
//! An [`RngState`] is a value: a 128-bit key plus a 64-bit counter. Every
//! kernel is a pure function of the state and its arguments. Output blocks
//! come from Philox4x64-10 applied to the counter words
//! `[position, element, domain, 0]`, so each kernel (domain) and each output
//! element (for rejection samplers) reads its own non-overlapping stream.

mod philox;

pub use philox::{philox4x64, splitmix64};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::nd::{broadcast_shapes, DType, NdValue, Shape};
use crate::special::lgamma;

const DOMAIN_UNIFORM: u64 = 1;
const DOMAIN_NORMAL: u64 = 2;
const DOMAIN_GAMMA: u64 = 3;
const DOMAIN_POISSON: u64 = 4;
const DOMAIN_SPLIT: u64 = 0x5350_4c49_5400_0000;
const DOMAIN_FOLD: u64 = 0x464f_4c44_0000_0000;

/// Seedable, splittable random state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngState {
    key: [u64; 2],
    counter: u64,
}

impl RngState {
    pub fn new(key: [u64; 2], counter: u64) -> Self {
        RngState { key, counter }
    }

    /// Expands a 64-bit seed into key material: the key is the first two
    /// outputs of SplitMix64 started at `seed`; the counter starts at 0.
    pub fn from_seed(seed: u64) -> Self {
        let mut s = seed;
        let k0 = splitmix64(&mut s);
        let k1 = splitmix64(&mut s);
        RngState::new([k0, k1], 0)
    }

    pub fn key(&self) -> [u64; 2] {
        self.key
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// `n` independent child states. Child keys are Philox outputs under the
    /// parent key, so no child coincides with the parent's continuation.
    pub fn split(&self, n: usize) -> Vec<RngState> {
        (0..n as u64).map(|i| self.derive(DOMAIN_SPLIT, i)).collect()
    }

    /// A child state determined by `data`; distinct data give independent streams.
    pub fn fold_in(&self, data: u64) -> RngState {
        self.derive(DOMAIN_FOLD, data)
    }

    /// The same stream advanced by `blocks` positions.
    pub fn advance(&self, blocks: u64) -> RngState {
        RngState::new(self.key, self.counter.wrapping_add(blocks))
    }

    fn derive(&self, domain: u64, i: u64) -> RngState {
        let b = philox4x64([self.counter, i, domain, 0], self.key);
        RngState::new([b[0], b[1]], 0)
    }

    pub(crate) fn stream(&self, element: u64, domain: u64) -> Stream {
        Stream {
            key: self.key,
            base: self.counter,
            element,
            domain,
            block: 0,
            buf: [0; 4],
            used: 4,
            spare_normal: None,
        }
    }
}

/// Sequential reader over one (element, domain) substream.
pub(crate) struct Stream {
    key: [u64; 2],
    base: u64,
    element: u64,
    domain: u64,
    block: u64,
    buf: [u64; 4],
    used: usize,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        if self.used == 4 {
            let pos = self.base.wrapping_add(self.block);
            self.buf = philox4x64([pos, self.element, self.domain, 0], self.key);
            self.block += 1;
            self.used = 0;
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    /// Uniform in the open interval (0, 1) with 52 random bits.
    pub fn uniform(&mut self) -> f64 {
        bits_to_open_unit(self.next_u64())
    }

    /// Standard normal via Box-Muller; the partner of each pair is kept.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let (z0, z1) = box_muller(u1, u2);
        self.spare_normal = Some(z1);
        z0
    }
}

#[inline]
fn bits_to_open_unit(bits: u64) -> f64 {
    // (k + 0.5) / 2^52 lies in [2^-53, 1 - 2^-53], both exactly representable
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[inline]
fn bits_to_open_unit_f32(bits: u64) -> f64 {
    // (k + 0.5) / 2^23 is exact in f32 and never rounds to 0 or 1
    ((bits >> 41) as f64 + 0.5) * (1.0 / (1u64 << 23) as f64)
}

/// The Box-Muller map from two uniforms to two independent standard normals.
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    (r * theta.cos(), r * theta.sin())
}

fn require_float(dtype: DType) -> Result<()> {
    if dtype.is_float() {
        Ok(())
    } else {
        Err(Error::DTypeMismatch(format!("kernel needs a floating dtype, got {dtype}")))
    }
}

/// I.i.d. uniforms on the open interval (0, 1).
pub fn uniform(rng: &RngState, shape: &Shape, dtype: DType) -> Result<NdValue> {
    require_float(dtype)?;
    let mut s = rng.stream(0, DOMAIN_UNIFORM);
    let data = (0..shape.num_elements())
        .map(|_| match dtype {
            DType::F32 => bits_to_open_unit_f32(s.next_u64()),
            _ => bits_to_open_unit(s.next_u64()),
        })
        .collect();
    Ok(NdValue::from_parts(shape.clone(), dtype, data))
}

/// I.i.d. standard normals from consecutive uniform pairs (Box-Muller); an
/// odd count discards the last partner.
pub fn standard_normal(rng: &RngState, shape: &Shape, dtype: DType) -> Result<NdValue> {
    require_float(dtype)?;
    let n = shape.num_elements();
    let mut s = rng.stream(0, DOMAIN_NORMAL);
    let mut data = Vec::with_capacity(n + 1);
    while data.len() < n {
        let u1 = s.uniform();
        let u2 = s.uniform();
        let (z0, z1) = box_muller(u1, u2);
        data.push(z0);
        data.push(z1);
    }
    data.truncate(n);
    Ok(NdValue::from_parts(shape.clone(), dtype, data))
}

fn check_positive(name: &str, v: &NdValue, validate: bool) -> Result<()> {
    if validate {
        if let Some(x) = v.data().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::invalid(name, format!("must be positive, got {x}")));
        }
    }
    Ok(())
}

fn output_shape(param: &NdValue, shape: &Shape) -> Result<()> {
    let b = broadcast_shapes(param.shape(), shape)?;
    if &b != shape {
        return Err(Error::IncompatibleShapes {
            a: param.shape().clone(),
            b: shape.clone(),
        });
    }
    Ok(())
}

/// Standard gamma variates (unit rate) by Marsaglia-Tsang rejection; each
/// output element reads its own substream.
pub fn standard_gamma(
    rng: &RngState,
    concentration: &NdValue,
    shape: &Shape,
    validate: bool,
) -> Result<NdValue> {
    check_positive("concentration", concentration, validate)?;
    output_shape(concentration, shape)?;
    let alpha = concentration.broadcast_to(shape)?;
    let data = alpha
        .data()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if !(a > 0.0) {
                return f64::NAN;
            }
            gamma_one(a, &mut rng.stream(i as u64, DOMAIN_GAMMA))
        })
        .collect();
    Ok(NdValue::from_parts(shape.clone(), concentration.dtype().float(), data))
}

pub(crate) fn gamma_one(alpha: f64, s: &mut Stream) -> f64 {
    if alpha < 1.0 {
        let g = gamma_one(alpha + 1.0, s);
        let u = s.uniform();
        return g * u.powf(1.0 / alpha);
    }
    let d = alpha - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = s.normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = s.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

/// Poisson variates: Knuth's product of uniforms for `rate <= 10`,
/// Hörmann's PTRS transformed rejection above. Output dtype is `I64`.
pub fn standard_poisson(
    rng: &RngState,
    rate: &NdValue,
    shape: &Shape,
    validate: bool,
) -> Result<NdValue> {
    check_positive("rate", rate, validate)?;
    output_shape(rate, shape)?;
    let rate = rate.broadcast_to(shape)?;
    let data = rate
        .data()
        .iter()
        .enumerate()
        .map(|(i, &lam)| {
            if !(lam > 0.0) {
                return 0.0;
            }
            let mut s = rng.stream(i as u64, DOMAIN_POISSON);
            if lam <= 10.0 {
                poisson_knuth(lam, &mut s)
            } else {
                poisson_ptrs(lam, &mut s)
            }
        })
        .collect();
    Ok(NdValue::from_parts(shape.clone(), DType::I64, data))
}

fn poisson_knuth(lam: f64, s: &mut Stream) -> f64 {
    let limit = (-lam).exp();
    let mut k = 0.0;
    let mut p = s.uniform();
    while p > limit {
        k += 1.0;
        p *= s.uniform();
    }
    k
}

fn poisson_ptrs(lam: f64, s: &mut Stream) -> f64 {
    let slam = lam.sqrt();
    let loglam = lam.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = s.uniform() - 0.5;
        let v = s.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lam + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -lam + k * loglam - lgamma(k + 1.0)
        {
            return k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_deterministic() {
        let rng = RngState::from_seed(7);
        let a = uniform(&rng, &Shape::from([3]), DType::F64).unwrap();
        let b = uniform(&rng, &Shape::from([3]), DType::F64).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn uniform_scalar() {
        let v = uniform(&RngState::from_seed(1), &Shape::scalar(), DType::F64).unwrap();
        let u = v.item().unwrap();
        assert!(u > 0.0 && u < 1.0);
    }

    #[test]
    fn uniform_extremes_are_open() {
        assert!(bits_to_open_unit(0) > 0.0);
        assert!(bits_to_open_unit(u64::MAX) < 1.0);
        assert!((bits_to_open_unit_f32(u64::MAX) as f32) < 1.0);
        assert!((bits_to_open_unit_f32(0) as f32) > 0.0);
    }

    #[test]
    fn box_muller_hand_value() {
        let (z0, z1) = box_muller(0.5, 0.25);
        assert!(z0.abs() < 1e-15);
        assert!((z1 - 1.177_410_022_515_474_7).abs() < 1e-15);
    }

    #[test]
    fn normal_odd_count_prefix() {
        let rng = RngState::from_seed(3);
        let five = standard_normal(&rng, &Shape::from([5]), DType::F64).unwrap();
        let six = standard_normal(&rng, &Shape::from([6]), DType::F64).unwrap();
        assert_eq!(five.data(), &six.data()[..5]);
    }

    #[test]
    fn split_children_differ() {
        let rng = RngState::from_seed(11);
        let kids = rng.split(4);
        for (i, a) in kids.iter().enumerate() {
            assert_ne!(a.key(), rng.key());
            assert_ne!(*a, rng.advance(1));
            for b in &kids[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert_eq!(rng.split(4), kids);
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        let rng = RngState::from_seed(0);
        let bad = NdValue::scalar(-1.0);
        assert!(standard_gamma(&rng, &bad, &Shape::from([2]), true).is_err());
        let v = standard_gamma(&rng, &bad, &Shape::from([2]), false).unwrap();
        assert!(v.data().iter().all(|x| x.is_nan()));
    }

    #[test]
    fn poisson_is_integer_dtype() {
        let rng = RngState::from_seed(0);
        let v = standard_poisson(&rng, &NdValue::scalar(30.0), &Shape::from([100]), true).unwrap();
        assert_eq!(v.dtype(), DType::I64);
        assert!(v.data().iter().all(|x| x.fract() == 0.0 && *x >= 0.0));
        let again = standard_poisson(&rng, &NdValue::scalar(30.0), &Shape::from([100]), true).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn poisson_rejects_nonpositive() {
        let rng = RngState::from_seed(0);
        assert!(standard_poisson(&rng, &NdValue::scalar(0.0), &Shape::scalar(), true).is_err());
    }
}
