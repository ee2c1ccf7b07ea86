use std::sync::Arc;

use super::{reduce_per_event, Bijector, BijectorCache};
use crate::error::{Error, Result};
use crate::nd::{DType, NdValue, Shape};
use crate::random::{standard_normal, RngState};

/// Shift and log-scale of a masked autoregressive flow.
///
/// Output `i` of both vectors may depend only on `x[..i]`.
pub trait AutoregressiveFn: Send + Sync {
    fn event_size(&self) -> usize;

    fn shift_and_log_scale(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// Checks triangular dependence by perturbing each input coordinate of `x`.
pub fn audit_dependence(f: &dyn AutoregressiveFn, x: &[f64]) -> Result<()> {
    let (m0, s0) = f.shift_and_log_scale(x);
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + 1.0 + x[j].abs();
        let (m, s) = f.shift_and_log_scale(&xp);
        if let Some(i) = (0..=j).find(|&i| m[i] != m0[i] || s[i] != s0[i]) {
            return Err(Error::DependenceViolation { output: i, input: j });
        }
        xp[j] = x[j];
    }
    Ok(())
}

/// Zero shift and zero log-scale; the flow is the identity.
#[derive(Clone, Debug)]
pub struct ZeroAutoregressive(pub usize);

impl AutoregressiveFn for ZeroAutoregressive {
    fn event_size(&self) -> usize {
        self.0
    }

    fn shift_and_log_scale(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; x.len()], vec![0.0; x.len()])
    }
}

/// Bound on the magnitude of the reference log-scale.
pub const LOG_SCALE_BOUND: f64 = 5.0;

/// Strictly lower-triangular linear shift and log-scale, with the log-scale
/// squashed into `(-5, 5)` by `tanh`.
#[derive(Clone, Debug)]
pub struct LinearAutoregressive {
    d: usize,
    shift_w: Vec<f64>,
    log_scale_w: Vec<f64>,
    shift_b: Vec<f64>,
    log_scale_b: Vec<f64>,
}

impl LinearAutoregressive {
    /// Weights are `[d, d]`; entries on or above the diagonal are masked out.
    pub fn new(
        shift_weights: NdValue,
        log_scale_weights: NdValue,
        shift_bias: Option<NdValue>,
        log_scale_bias: Option<NdValue>,
    ) -> Result<Self> {
        let d = match shift_weights.shape().dims() {
            [a, b] if a == b => *a,
            _ => {
                return Err(Error::invalid(
                    "shift_weights",
                    format!("must be square [d, d], got {}", shift_weights.shape()),
                ))
            }
        };
        if log_scale_weights.shape() != shift_weights.shape() {
            return Err(Error::invalid("log_scale_weights", format!("must have shape [{d}, {d}]")));
        }
        let bias = |v: Option<NdValue>, name: &str| -> Result<Vec<f64>> {
            match v {
                None => Ok(vec![0.0; d]),
                Some(b) if b.shape() == &Shape::from([d]) => Ok(b.data().to_vec()),
                Some(b) => Err(Error::invalid(name, format!("must have shape [{d}], got {}", b.shape()))),
            }
        };
        let mask = |w: &NdValue| -> Vec<f64> {
            (0..d * d)
                .map(|k| if k % d < k / d { w.data()[k] } else { 0.0 })
                .collect()
        };
        Ok(LinearAutoregressive {
            d,
            shift_w: mask(&shift_weights),
            log_scale_w: mask(&log_scale_weights),
            shift_b: bias(shift_bias, "shift_bias")?,
            log_scale_b: bias(log_scale_bias, "log_scale_bias")?,
        })
    }

    /// Gaussian weights with standard deviation `0.5` and biases drawn from `rng`.
    pub fn random(d: usize, rng: &RngState) -> Self {
        let keys = rng.split(4);
        let draw = |r: &RngState, shape: &[usize]| -> NdValue {
            standard_normal(r, &Shape::from(shape.to_vec()), DType::F64)
                .expect("valid shape")
                .map(|v| 0.5 * v)
        };
        Self::new(
            draw(&keys[0], &[d, d]),
            draw(&keys[1], &[d, d]),
            Some(draw(&keys[2], &[d])),
            Some(draw(&keys[3], &[d])),
        )
        .expect("consistent shapes")
    }
}

impl AutoregressiveFn for LinearAutoregressive {
    fn event_size(&self) -> usize {
        self.d
    }

    fn shift_and_log_scale(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d;
        let dot = |w: &[f64], i: usize| -> f64 { w[i * d..i * d + i].iter().zip(x).map(|(a, b)| a * b).sum() };
        let shift = (0..d).map(|i| self.shift_b[i] + dot(&self.shift_w, i)).collect();
        let log_scale = (0..d)
            .map(|i| {
                let raw = self.log_scale_b[i] + dot(&self.log_scale_w, i);
                LOG_SCALE_BOUND * (raw / LOG_SCALE_BOUND).tanh()
            })
            .collect();
        (shift, log_scale)
    }
}

/// Masked autoregressive flow: `y_i = x_i * exp(s_i(x)) + m_i(x)`.
///
/// Forward is a single pass; the inverse solves for one coordinate at a time.
pub struct MaskedAutoregressive {
    f: Arc<dyn AutoregressiveFn>,
    cache: BijectorCache,
}

impl MaskedAutoregressive {
    /// Runs the dependence audit when `validate_args` is set or in debug builds.
    pub fn new(f: Arc<dyn AutoregressiveFn>, validate_args: bool) -> Result<Self> {
        if validate_args || cfg!(debug_assertions) {
            let d = f.event_size();
            let probes = [
                vec![0.0; d],
                (0..d).map(|i| if i % 2 == 0 { 0.5 + i as f64 } else { -1.5 - i as f64 }).collect(),
                (0..d).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect::<Vec<f64>>(),
            ];
            for p in &probes {
                audit_dependence(f.as_ref(), p)?;
            }
        }
        Ok(MaskedAutoregressive {
            f,
            cache: BijectorCache::new(),
        })
    }

    pub fn function(&self) -> &Arc<dyn AutoregressiveFn> {
        &self.f
    }

    fn check(&self, v: &NdValue) -> Result<usize> {
        let d = self.f.event_size();
        if v.shape().dims().last() != Some(&d) {
            return Err(Error::Shape(format!("MaskedAutoregressive of size {d} got shape {}", v.shape())));
        }
        Ok(d)
    }
}

impl Bijector for MaskedAutoregressive {
    fn name(&self) -> &str {
        "MaskedAutoregressive"
    }
    fn forward_min_event_rank(&self) -> usize {
        1
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }

    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.check(x)?;
        let mut out = Vec::with_capacity(x.len());
        for r in x.rows(1) {
            let (m, s) = self.f.shift_and_log_scale(r);
            out.extend(r.iter().zip(m.iter().zip(&s)).map(|(xi, (mi, si))| xi * si.exp() + mi));
        }
        NdValue::new(x.shape().clone(), x.dtype().float(), out)
    }

    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        let d = self.check(y)?;
        let mut out = Vec::with_capacity(y.len());
        let mut x = vec![0.0; d];
        for r in y.rows(1) {
            x.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..d {
                let (m, s) = self.f.shift_and_log_scale(&x);
                x[i] = (r[i] - m[i]) * (-s[i]).exp();
            }
            out.extend_from_slice(&x);
        }
        NdValue::new(y.shape().clone(), y.dtype().float(), out)
    }

    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        Some((|| {
            self.check(x)?;
            let per_event = x
                .rows(1)
                .map(|r| self.f.shift_and_log_scale(r).1.iter().sum())
                .collect();
            let pe = NdValue::new(x.shape().drop_last(1), x.dtype().float(), per_event)?;
            reduce_per_event(pe, x.shape(), 1, event_rank)
        })())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Leaky;

    impl AutoregressiveFn for Leaky {
        fn event_size(&self) -> usize {
            3
        }
        fn shift_and_log_scale(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
            (vec![0.0, x[0], x[2]], vec![0.0; 3])
        }
    }

    #[test]
    fn zero_fn_is_identity() {
        let b = MaskedAutoregressive::new(Arc::new(ZeroAutoregressive(3)), true).unwrap();
        let x = NdValue::vector(vec![0.1, -2.0, 4.0]);
        assert_eq!(b.forward(&x).unwrap(), x);
        assert_eq!(b.forward_log_det_jacobian(&x, 1).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn sequential_inverse_round_trip() {
        let f = LinearAutoregressive::random(3, &RngState::from_seed(11));
        let b = MaskedAutoregressive::new(Arc::new(f), true).unwrap();
        b.set_caching(false);
        let x = NdValue::from_shape_vec([2, 3], vec![0.3, -1.0, 2.0, 1.5, 0.0, -0.7]).unwrap();
        let y = b.forward(&x).unwrap();
        let back = b.inverse(&y).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-9);
        assert_eq!(b.inverse_calls(), 1);
    }

    #[test]
    fn audit_catches_leak() {
        let err = MaskedAutoregressive::new(Arc::new(Leaky), true).err().unwrap();
        assert_eq!(err, Error::DependenceViolation { output: 2, input: 2 });
    }

    #[test]
    fn log_scale_bounded() {
        let w = NdValue::full([2, 2], DType::F64, 100.0);
        let f = LinearAutoregressive::new(w.clone(), w, None, None).unwrap();
        let (_, s) = f.shift_and_log_scale(&[10.0, 0.0]);
        assert_eq!(s[0], 0.0);
        assert!(s[1] <= LOG_SCALE_BOUND && s[1] > 4.99);
    }
}
