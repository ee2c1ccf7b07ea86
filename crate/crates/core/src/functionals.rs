//! Closed-form divergences between registered family pairs.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::RwLock;

use once_cell::sync::Lazy;

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::families::{
    Bernoulli, Beta, Categorical, Dirichlet, Exponential, Gamma, Laplace, MultivariateNormalDiag, Normal,
};
use crate::nd::{broadcast_rows, NdValue, Shape};
use crate::special::{digamma, lbeta, lgamma, log1p, softplus};

/// Closed-form `KL(p || q)` for one ordered pair of concrete types.
pub type KlFn = fn(&dyn Distribution, &dyn Distribution) -> Result<NdValue>;

/// Map from ordered `(p, q)` type pairs to closed forms. Registering `p -> q`
/// does not register `q -> p`.
pub struct KlRegistry {
    table: RwLock<HashMap<(TypeId, TypeId), KlFn>>,
}

static REGISTRY: Lazy<KlRegistry> = Lazy::new(KlRegistry::builtin);

fn cast<T: 'static>(d: &dyn Distribution) -> &T {
    d.as_any().downcast_ref::<T>().expect("registry dispatched on type id")
}

macro_rules! pair {
    ($m:ident, $p:ty, $q:ty, $f:ident) => {
        $m.insert((TypeId::of::<$p>(), TypeId::of::<$q>()), |p, q| $f(cast::<$p>(p), cast::<$q>(q)));
    };
}

impl KlRegistry {
    fn builtin() -> Self {
        let mut m: HashMap<(TypeId, TypeId), KlFn> = HashMap::new();
        pair!(m, Normal, Normal, kl_normal);
        pair!(m, Laplace, Laplace, kl_laplace);
        pair!(m, Exponential, Exponential, kl_exponential);
        pair!(m, Gamma, Gamma, kl_gamma);
        pair!(m, Beta, Beta, kl_beta);
        pair!(m, Bernoulli, Bernoulli, kl_bernoulli);
        pair!(m, Categorical, Categorical, kl_categorical);
        pair!(m, Dirichlet, Dirichlet, kl_dirichlet);
        pair!(m, MultivariateNormalDiag, MultivariateNormalDiag, kl_mvn_diag);
        KlRegistry { table: RwLock::new(m) }
    }

    pub fn global() -> &'static KlRegistry {
        &REGISTRY
    }

    pub fn register<P: Any, Q: Any>(&self, f: KlFn) {
        self.table
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert((TypeId::of::<P>(), TypeId::of::<Q>()), f);
    }

    pub fn lookup(&self, p: &dyn Distribution, q: &dyn Distribution) -> Option<KlFn> {
        let key = (Any::type_id(p.as_any()), Any::type_id(q.as_any()));
        self.table.read().unwrap_or_else(|e| e.into_inner()).get(&key).copied()
    }

    pub fn contains(&self, p: &dyn Distribution, q: &dyn Distribution) -> bool {
        self.lookup(p, q).is_some()
    }
}

/// `KL(p || q)` from the registry; unregistered pairs are `NotImplemented`.
pub fn kl_divergence(p: &dyn Distribution, q: &dyn Distribution) -> Result<NdValue> {
    let f = KlRegistry::global()
        .lookup(p, q)
        .ok_or_else(|| Error::NotImplemented(format!("KL divergence from {} to {}", p.name(), q.name())))?;
    f(p, q)
}

/// `H(p, q) = H(p) + KL(p || q)`.
pub fn cross_entropy(p: &dyn Distribution, q: &dyn Distribution) -> Result<NdValue> {
    p.entropy()?.add(&kl_divergence(p, q)?)
}

/// `x - log(1 + x)` for the ratio term `r - 1 - log r` with `x = r - 1`.
fn ratio_term(r: f64) -> f64 {
    let x = r - 1.0;
    x - log1p(x)
}

fn kl_normal(p: &Normal, q: &Normal) -> Result<NdValue> {
    NdValue::map_n(&[p.loc(), p.scale(), q.loc(), q.scale()], |a| {
        let r = a[1] / a[3];
        let z = (a[0] - a[2]) / a[3];
        0.5 * ratio_term(r * r) + 0.5 * z * z
    })
}

fn kl_laplace(p: &Laplace, q: &Laplace) -> Result<NdValue> {
    NdValue::map_n(&[p.loc(), p.scale(), q.loc(), q.scale()], |a| {
        let d = (a[0] - a[2]).abs();
        let r = a[1] / a[3];
        ratio_term(r) + d / a[3] + r * (-d / a[1]).exp_m1()
    })
}

fn kl_exponential(p: &Exponential, q: &Exponential) -> Result<NdValue> {
    NdValue::map_n(&[p.rate(), q.rate()], |a| ratio_term(a[1] / a[0]))
}

fn kl_gamma(p: &Gamma, q: &Gamma) -> Result<NdValue> {
    NdValue::map_n(&[p.concentration(), p.rate(), q.concentration(), q.rate()], |a| {
        let (ap, bp, aq, bq) = (a[0], a[1], a[2], a[3]);
        (ap - aq) * digamma(ap) + (lgamma(aq) - lgamma(ap)) + aq * (bp.ln() - bq.ln()) + ap * (bq - bp) / bp
    })
}

fn kl_beta(p: &Beta, q: &Beta) -> Result<NdValue> {
    let args = [p.concentration1(), p.concentration0(), q.concentration1(), q.concentration0()];
    NdValue::map_n(&args, |a| {
        let (p1, p0, q1, q0) = (a[0], a[1], a[2], a[3]);
        (lbeta(q1, q0) - lbeta(p1, p0))
            + (p1 - q1) * digamma(p1)
            + (p0 - q0) * digamma(p0)
            + ((q1 - p1) + (q0 - p0)) * digamma(p1 + p0)
    })
}

fn kl_bernoulli(p: &Bernoulli, q: &Bernoulli) -> Result<NdValue> {
    NdValue::map_n(&[p.logits(), q.logits()], |a| {
        let (lp, lq) = (a[0], a[1]);
        let (lp1, lp0) = (-softplus(-lp), -softplus(lp));
        let (lq1, lq0) = (-softplus(-lq), -softplus(lq));
        xlogy_diff(lp1, lq1) + xlogy_diff(lp0, lq0)
    })
}

/// `p (log p - log q)` with `0 log 0 = 0`.
fn xlogy_diff(lp: f64, lq: f64) -> f64 {
    if lp == f64::NEG_INFINITY {
        0.0
    } else {
        lp.exp() * (lp - lq)
    }
}

fn rowwise(
    p: &NdValue,
    q: &NdValue,
    f: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<NdValue> {
    let k = *p.shape().dims().last().unwrap_or(&0);
    if q.shape().dims().last() != Some(&k) {
        return Err(Error::IncompatibleShapes {
            a: p.shape().clone(),
            b: q.shape().clone(),
        });
    }
    let (lead, pairs) = broadcast_rows(&p.shape().drop_last(1), &q.shape().drop_last(1))?;
    let data = pairs
        .iter()
        .map(|&(i, j)| f(&p.data()[i * k..(i + 1) * k], &q.data()[j * k..(j + 1) * k]))
        .collect();
    NdValue::new(lead, p.dtype().float(), data)
}

fn kl_categorical(p: &Categorical, q: &Categorical) -> Result<NdValue> {
    rowwise(p.log_probs(), q.log_probs(), |a, b| {
        a.iter().zip(b).map(|(&lp, &lq)| xlogy_diff(lp, lq)).sum()
    })
}

fn kl_dirichlet(p: &Dirichlet, q: &Dirichlet) -> Result<NdValue> {
    rowwise(p.concentration(), q.concentration(), |a, b| {
        let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
        let psa = digamma(sa);
        (lgamma(sa) - lgamma(sb))
            + a.iter().zip(b).map(|(&x, &y)| lgamma(y) - lgamma(x)).sum::<f64>()
            + a.iter().zip(b).map(|(&x, &y)| (x - y) * (digamma(x) - psa)).sum::<f64>()
    })
}

fn kl_mvn_diag(p: &MultivariateNormalDiag, q: &MultivariateNormalDiag) -> Result<NdValue> {
    let per_dim = NdValue::map_n(&[p.loc(), p.scale_diag(), q.loc(), q.scale_diag()], |a| {
        let r = a[1] / a[3];
        let z = (a[0] - a[2]) / a[3];
        0.5 * ratio_term(r * r) + 0.5 * z * z
    })?;
    let kl = per_dim.sum_trailing(1)?;
    let batch = crate::nd::broadcast_shapes(&p.batch_shape(), &q.batch_shape())?;
    let shape = crate::nd::broadcast_shapes(kl.shape(), &batch)?;
    if shape == Shape::scalar() {
        return Ok(kl);
    }
    kl.broadcast_to(&shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normal_pair_reference() {
        let p = Normal::new(0.0, 1.0).unwrap();
        let q = Normal::new(-1.0, 2.0).unwrap();
        let kl = kl_divergence(&p, &q).unwrap().item().unwrap();
        // ln 2 + (1 + 1) / 8 - 1/2
        assert!((kl - (2f64.ln() - 0.25)).abs() < 1e-15);
        let xent = cross_entropy(&p, &q).unwrap().item().unwrap();
        assert!((xent - 1.862_086).abs() < 1e-6);
    }

    #[test]
    fn self_divergence_is_zero() {
        let n = Normal::new(0.3, 1.7).unwrap();
        assert_eq!(kl_divergence(&n, &n).unwrap().item().unwrap(), 0.0);
        let h = cross_entropy(&n, &n).unwrap().item().unwrap();
        assert_eq!(h, n.entropy().unwrap().item().unwrap());
        let b0 = Bernoulli::from_logits(0.0).unwrap();
        let b1 = Bernoulli::from_probs(0.5).unwrap();
        let x = cross_entropy(&b0, &b1).unwrap().item().unwrap();
        assert!((x - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn batch_broadcasts() {
        let p = Normal::new(NdValue::vector(vec![0.0, 1.0, 2.0]), 1.0).unwrap();
        let q = Normal::new(0.0, 2.0).unwrap();
        assert_eq!(kl_divergence(&p, &q).unwrap().shape(), &Shape::from([3]));
    }

    #[test]
    fn unregistered_pair() {
        let p = Normal::new(0.0, 1.0).unwrap();
        let q = Laplace::new(0.0, 1.0).unwrap();
        assert!(matches!(kl_divergence(&p, &q), Err(Error::NotImplemented(_))));
    }

    #[test]
    fn categorical_and_dirichlet_reference() {
        let p = Categorical::from_probs(NdValue::vector(vec![0.5, 0.5, 0.0])).unwrap();
        let q = Categorical::from_probs(NdValue::vector(vec![0.25, 0.25, 0.5])).unwrap();
        let kl = kl_divergence(&p, &q).unwrap().item().unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
        // Dirichlet(1,1) vs Dirichlet(2,2) on two categories equals Beta(1,1) vs Beta(2,2)
        let a = Dirichlet::new([1.0, 1.0]).unwrap();
        let b = Dirichlet::new([2.0, 2.0]).unwrap();
        let ba = Beta::new(1.0, 1.0).unwrap();
        let bb = Beta::new(2.0, 2.0).unwrap();
        let d = kl_divergence(&a, &b).unwrap().item().unwrap();
        let e = kl_divergence(&ba, &bb).unwrap().item().unwrap();
        assert!((d - e).abs() < 1e-14);
        // closed form: ln 6 - 2 via the uniform density against 6x(1-x)
        assert!((e - (2.0 - 6f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn gamma_against_exponential() {
        // Gamma(1, rate) is Exponential(rate)
        let g1 = Gamma::new(1.0, 2.0).unwrap();
        let g2 = Gamma::new(1.0, 0.5).unwrap();
        let e1 = Exponential::new(2.0).unwrap();
        let e2 = Exponential::new(0.5).unwrap();
        let a = kl_divergence(&g1, &g2).unwrap().item().unwrap();
        let b = kl_divergence(&e1, &e2).unwrap().item().unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn user_registration() {
        fn always_one(_: &dyn Distribution, _: &dyn Distribution) -> Result<NdValue> {
            Ok(NdValue::scalar(1.0))
        }
        let p = crate::families::Uniform::new(0.0, 1.0).unwrap();
        assert!(!KlRegistry::global().contains(&p, &p));
        KlRegistry::global().register::<crate::families::Uniform, crate::families::Uniform>(always_one);
        assert_eq!(kl_divergence(&p, &p).unwrap().item().unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn nonnegative_and_zero_on_diagonal(
            m1 in -3.0f64..3.0, s1 in 0.1f64..4.0, m2 in -3.0f64..3.0, s2 in 0.1f64..4.0,
            a1 in 0.2f64..6.0, b1 in 0.2f64..6.0, a2 in 0.2f64..6.0, b2 in 0.2f64..6.0,
        ) {
            let pairs: Vec<(Box<dyn Distribution>, Box<dyn Distribution>)> = vec![
                (Box::new(Normal::new(m1, s1).unwrap()), Box::new(Normal::new(m2, s2).unwrap())),
                (Box::new(Laplace::new(m1, s1).unwrap()), Box::new(Laplace::new(m2, s2).unwrap())),
                (Box::new(Exponential::new(s1).unwrap()), Box::new(Exponential::new(s2).unwrap())),
                (Box::new(Gamma::new(a1, b1).unwrap()), Box::new(Gamma::new(a2, b2).unwrap())),
                (Box::new(Beta::new(a1, b1).unwrap()), Box::new(Beta::new(a2, b2).unwrap())),
                (Box::new(Bernoulli::from_logits(m1).unwrap()), Box::new(Bernoulli::from_logits(m2).unwrap())),
                (Box::new(Categorical::from_logits([m1, s1, a1]).unwrap()), Box::new(Categorical::from_logits([m2, s2, a2]).unwrap())),
                (Box::new(Dirichlet::new([a1, b1, s1]).unwrap()), Box::new(Dirichlet::new([a2, b2, s2]).unwrap())),
                (Box::new(MultivariateNormalDiag::new([m1, m2], [s1, a1]).unwrap()), Box::new(MultivariateNormalDiag::new([m2, m1], [s2, a2]).unwrap())),
            ];
            for (p, q) in &pairs {
                let kl = kl_divergence(p.as_ref(), q.as_ref()).unwrap().item().unwrap();
                prop_assert!(kl >= -1e-12, "{} kl={kl}", p.name());
                prop_assert_eq!(kl_divergence(p.as_ref(), p.as_ref()).unwrap().item().unwrap(), 0.0);
                prop_assert_eq!(kl_divergence(q.as_ref(), q.as_ref()).unwrap().item().unwrap(), 0.0);
            }
        }
    }
}
