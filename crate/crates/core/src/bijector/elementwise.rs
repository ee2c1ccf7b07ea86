use super::{reduce_elementwise, Bijector, BijectorCache};
use crate::error::{Error, Result};
use crate::nd::NdValue;
use crate::special::{log1p, softplus};

fn check_domain(name: &str, v: &NdValue, ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    if let Some(bad) = v.data().iter().find(|&&t| !ok(t)) {
        return Err(Error::Domain(format!("{name}: {bad} is outside {what}")));
    }
    Ok(())
}

fn elementwise_ldj(x: &NdValue, event_rank: usize, f: impl Fn(f64) -> f64) -> Option<Result<NdValue>> {
    Some(reduce_elementwise(x.map(f), x.shape(), event_rank))
}

macro_rules! unit_bijector {
    ($(#[$m:meta])* $t:ident, $name:literal) => {
        $(#[$m])*
        pub struct $t {
            validate_args: bool,
            cache: BijectorCache,
        }

        impl $t {
            const NAME: &'static str = $name;

            pub fn new(validate_args: bool) -> Self {
                $t {
                    validate_args,
                    cache: BijectorCache::new(),
                }
            }
        }

        impl Default for $t {
            fn default() -> Self {
                Self::new(false)
            }
        }
    };
}

/// The identity map.
pub struct Identity {
    cache: BijectorCache,
}

impl Identity {
    pub fn new() -> Self {
        Identity {
            cache: BijectorCache::new(),
        }
    }
}

impl Default for Identity {
    fn default() -> Self {
        Self::new()
    }
}

impl Bijector for Identity {
    fn name(&self) -> &str {
        "Identity"
    }
    fn forward_min_event_rank(&self) -> usize {
        0
    }
    fn is_constant_jacobian(&self) -> bool {
        true
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        Ok(x.clone())
    }
    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        Ok(y.clone())
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(x, event_rank, |_| 0.0)
    }
    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(y, event_rank, |_| 0.0)
    }
}

unit_bijector!(
    /// `y = exp(x)`.
    Exp,
    "Exp"
);

impl Bijector for Exp {
    fn name(&self) -> &str {
        Self::NAME
    }
    fn forward_min_event_rank(&self) -> usize {
        0
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        Ok(x.map(f64::exp))
    }
    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        if self.validate_args {
            check_domain(Self::NAME, y, |v| v > 0.0, "(0, inf)")?;
        }
        Ok(y.map(f64::ln))
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(x, event_rank, |v| v)
    }
    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(y, event_rank, |v| -v.ln())
    }
}

unit_bijector!(
    /// Logistic sigmoid onto `(0, 1)`.
    Sigmoid,
    "Sigmoid"
);

impl Bijector for Sigmoid {
    fn name(&self) -> &str {
        Self::NAME
    }
    fn forward_min_event_rank(&self) -> usize {
        0
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        Ok(x.map(crate::special::sigmoid))
    }
    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        if self.validate_args {
            check_domain(Self::NAME, y, |v| v > 0.0 && v < 1.0, "(0, 1)")?;
        }
        Ok(y.map(|v| v.ln() - log1p(-v)))
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(x, event_rank, |v| -softplus(-v) - softplus(v))
    }
    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(y, event_rank, |v| -v.ln() - log1p(-v))
    }
}

unit_bijector!(
    /// `y = log(1 + exp(x))`.
    Softplus,
    "Softplus"
);

impl Bijector for Softplus {
    fn name(&self) -> &str {
        Self::NAME
    }
    fn forward_min_event_rank(&self) -> usize {
        0
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        Ok(x.map(softplus))
    }
    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        if self.validate_args {
            check_domain(Self::NAME, y, |v| v > 0.0, "(0, inf)")?;
        }
        Ok(y.map(|v| v + (-(-v).exp_m1()).ln()))
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(x, event_rank, |v| -softplus(-v))
    }
    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(y, event_rank, |v| -(-(-v).exp_m1()).ln())
    }
}

fn nonnegative(name: &str, y: &NdValue) -> Result<()> {
    check_domain(name, y, |v| v >= 0.0, "[0, inf)")
}

/// `y = |x|`, a two-branch smooth covering.
pub struct AbsValue {
    cache: BijectorCache,
}

impl AbsValue {
    pub fn new() -> Self {
        AbsValue {
            cache: BijectorCache::new(),
        }
    }
}

impl Default for AbsValue {
    fn default() -> Self {
        Self::new()
    }
}

impl Bijector for AbsValue {
    fn name(&self) -> &str {
        "AbsValue"
    }
    fn forward_min_event_rank(&self) -> usize {
        0
    }
    fn is_injective(&self) -> bool {
        false
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        Ok(x.map(f64::abs))
    }
    fn inverse_kernel(&self, _y: &NdValue) -> Result<NdValue> {
        Err(Error::NotInvertible("AbsValue".into()))
    }
    fn inverse_branches_kernel(&self, y: &NdValue) -> Result<Vec<(NdValue, NdValue)>> {
        nonnegative("AbsValue", y)?;
        let zero = y.map(|_| 0.0);
        Ok(vec![(y.neg(), zero.clone()), (y.map(|v| v), zero)])
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(x, event_rank, |_| 0.0)
    }
}

/// `y = x^2`, a two-branch smooth covering onto `[0, inf)`.
pub struct Square {
    cache: BijectorCache,
}

impl Square {
    pub fn new() -> Self {
        Square {
            cache: BijectorCache::new(),
        }
    }
}

impl Default for Square {
    fn default() -> Self {
        Self::new()
    }
}

impl Bijector for Square {
    fn name(&self) -> &str {
        "Square"
    }
    fn forward_min_event_rank(&self) -> usize {
        0
    }
    fn is_injective(&self) -> bool {
        false
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        Ok(x.map(|v| v * v))
    }
    fn inverse_kernel(&self, _y: &NdValue) -> Result<NdValue> {
        Err(Error::NotInvertible("Square".into()))
    }
    fn inverse_branches_kernel(&self, y: &NdValue) -> Result<Vec<(NdValue, NdValue)>> {
        nonnegative("Square", y)?;
        let ildj = y.map(|v| -(2.0 * v.sqrt()).ln());
        Ok(vec![(y.map(|v| -v.sqrt()), ildj.clone()), (y.map(f64::sqrt), ildj)])
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        elementwise_ldj(x, event_rank, |v| (2.0 * v.abs()).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> NdValue {
        NdValue::scalar(v)
    }

    #[test]
    fn reference_points() {
        assert_eq!(Exp::new(true).forward(&s(0.0)).unwrap().item().unwrap(), 1.0);
        assert_eq!(Exp::new(true).inverse(&s(1.0)).unwrap().item().unwrap(), 0.0);
        assert_eq!(Exp::new(true).inverse_log_det_jacobian(&s(1.0), 0).unwrap().item().unwrap(), 0.0);
        assert_eq!(Sigmoid::new(true).forward(&s(0.0)).unwrap().item().unwrap(), 0.5);
        assert_eq!(Sigmoid::new(true).inverse(&s(0.5)).unwrap().item().unwrap(), 0.0);
        let i = Identity::new();
        assert_eq!(i.forward_log_det_jacobian(&s(3.0), 0).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(Exp::new(true).inverse(&s(-1.0)), Err(Error::Domain(_))));
        assert!(matches!(Sigmoid::new(true).inverse(&s(1.5)), Err(Error::Domain(_))));
        assert!(matches!(Softplus::new(true).inverse(&s(0.0)), Err(Error::Domain(_))));
        assert!(matches!(Square::new().inverse_set(&s(-4.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn square_branches() {
        let set = Square::new().inverse_set(&s(4.0)).unwrap();
        let v: Vec<f64> = set.branches.iter().map(|b| b.item().unwrap()).collect();
        assert_eq!(v, vec![-2.0, 2.0]);
    }

    #[test]
    fn softplus_stable_tails() {
        let b = Softplus::new(false);
        let x = NdValue::vector(vec![-30.0, -1.0, 0.0, 2.0, 40.0]);
        let y = b.forward(&x).unwrap();
        let back = b.inverse(&NdValue::vector(y.data().to_vec())).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-9);
        let sig = Sigmoid::new(false);
        let x = NdValue::vector(vec![-20.0, -3.0, 0.5, 15.0]);
        let y = sig.forward(&x).unwrap();
        let back = sig.inverse(&NdValue::vector(y.data().to_vec())).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-9);
    }

    #[test]
    fn sign_antisymmetry() {
        let bs: Vec<Box<dyn Bijector>> = vec![
            Box::new(Exp::new(false)),
            Box::new(Sigmoid::new(false)),
            Box::new(Softplus::new(false)),
        ];
        for b in bs {
            for &x in &[-3.0, -0.2, 0.0, 1.7] {
                let xv = s(x);
                let y = NdValue::scalar(b.forward(&xv).unwrap().item().unwrap());
                let f = b.forward_log_det_jacobian(&xv, 0).unwrap().item().unwrap();
                let i = b.inverse_log_det_jacobian(&y, 0).unwrap().item().unwrap();
                assert!((f + i).abs() < 1e-10, "{} at {x}", b.name());
            }
        }
    }

    #[test]
    fn elementwise_ldj_reduces_event_axes() {
        let b = Exp::new(false);
        let x = NdValue::from_shape_vec([2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(b.forward_log_det_jacobian(&x, 1).unwrap().data(), &[6.0, 15.0]);
        assert_eq!(b.forward_log_det_jacobian(&x, 2).unwrap().data(), &[21.0]);
        assert!(b.forward_log_det_jacobian(&x, 3).is_err());
    }
}
