//! Fast statistical and numerical checks over the catalogs.

use std::sync::Arc;

use distkit::bijector::{Affine, AffineScale, Exp, LinearAutoregressive, MaskedAutoregressive, Permute, Reshape, Sigmoid, SoftmaxCentered, Softplus};
use distkit::diagnostics::{ildj_against_numeric, ks_one_sample, mean_and_stderr};
use distkit::families::{Bernoulli, Beta, Cauchy, Exponential, Gamma, Laplace, Normal, Poisson, StudentT, Uniform};
use distkit::meta::TransformedDistribution;
use distkit::{kl_divergence, Bijector, Chain, Distribution, Invert, NdValue, RngState, Shape};

pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {} {}: {}", self.suite, self.name, self.detail)
    }
}

const KS_N: usize = 20_000;
const KS_SEEDS: [u64; 3] = [11, 22, 33];
const MOMENT_N: usize = 100_000;

fn continuous() -> Vec<Arc<dyn Distribution>> {
    vec![
        Arc::new(Normal::new(0.5, 2.0).unwrap()),
        Arc::new(Laplace::new(-1.0, 0.7).unwrap()),
        Arc::new(Exponential::new(1.5).unwrap()),
        Arc::new(Gamma::new(2.5, 1.3).unwrap()),
        Arc::new(Gamma::new(0.4, 1.0).unwrap()),
        Arc::new(Beta::new(2.0, 3.0).unwrap()),
        Arc::new(Beta::new(0.5, 0.5).unwrap()),
        Arc::new(Cauchy::new(0.0, 1.0).unwrap()),
        Arc::new(StudentT::new(4.0, 0.0, 1.0).unwrap()),
        Arc::new(Uniform::new(-1.0, 2.0).unwrap()),
    ]
}

fn ks_suite(out: &mut Vec<Check>) {
    let threshold = 1.63 / (KS_N as f64).sqrt();
    for d in continuous() {
        let stats: Vec<f64> = KS_SEEDS
            .iter()
            .map(|&seed| {
                let s = d.sample(&Shape::from([KS_N]), &RngState::from_seed(seed)).unwrap();
                let cdf = d.cdf(&s).unwrap();
                let probs = cdf.data().to_vec();
                // the cdf values are uniform under the null
                ks_one_sample(&probs, |u| u)
            })
            .collect();
        let passes = stats.iter().filter(|&&s| s < threshold).count();
        out.push(Check {
            suite: "ks",
            name: d.name().to_string(),
            passed: passes >= 2,
            detail: format!("{passes}/3 below {threshold:.5}, statistics {stats:.5?}"),
        });
    }
}

fn moment_suite(out: &mut Vec<Check>) {
    let mut dists = continuous();
    dists.push(Arc::new(Poisson::new(3.5).unwrap()));
    dists.push(Arc::new(Bernoulli::from_probs(0.3).unwrap()));
    for d in dists {
        let Ok(mean) = d.mean().and_then(|m| m.item()) else { continue };
        if !mean.is_finite() {
            continue;
        }
        let s = d.sample(&Shape::from([MOMENT_N]), &RngState::from_seed(5)).unwrap();
        let (m, _) = mean_and_stderr(s.data());
        let sd = d.stddev().and_then(|v| v.item()).unwrap_or(f64::NAN);
        let bound = 4.0 * sd / (MOMENT_N as f64).sqrt();
        out.push(Check {
            suite: "moments",
            name: d.name().to_string(),
            passed: (m - mean).abs() < bound,
            detail: format!("sample mean {m:.6}, analytic {mean:.6}, bound {bound:.2e}"),
        });
    }
}

fn jacobian_suite(out: &mut Vec<Check>) {
    let v = |x: &[f64]| NdValue::vector(x.to_vec());
    let tril = NdValue::matrix(&[vec![1.5, 0.0, 0.0], vec![0.3, 0.8, 0.0], vec![-0.4, 0.2, 2.0]]).unwrap();
    let cases: Vec<(Arc<dyn Bijector>, NdValue)> = vec![
        (Arc::new(Exp::default()), v(&[0.3, -1.2, 0.8])),
        (Arc::new(Sigmoid::default()), v(&[0.3, -1.2, 0.8])),
        (Arc::new(Softplus::default()), v(&[0.3, -1.2, 0.8])),
        (
            Arc::new(Affine::new(Some(v(&[1.0, -2.0, 0.5])), AffineScale::Diag(v(&[0.5, 2.0, -1.5])), true).unwrap()),
            v(&[0.3, -1.2, 0.8]),
        ),
        (Arc::new(Affine::new(None, AffineScale::TriL(tril), true).unwrap()), v(&[0.3, -1.2, 0.8])),
        (Arc::new(Permute::new(vec![2, 0, 1]).unwrap()), v(&[0.3, -1.2, 0.8])),
        (
            Arc::new(Reshape::new(Shape::from([2, 2]), Shape::from([4])).unwrap()),
            NdValue::matrix(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap(),
        ),
        (Arc::new(SoftmaxCentered::default()), v(&[0.3, -1.2, 0.8])),
        (
            Arc::new(MaskedAutoregressive::new(Arc::new(LinearAutoregressive::random(4, &RngState::from_seed(3))), true).unwrap()),
            v(&[0.3, -1.2, 0.8, 0.1]),
        ),
        (
            Arc::new(Chain::new(vec![Arc::new(Exp::default()), Arc::new(Softplus::default())]).unwrap()),
            v(&[0.3, -1.2, 0.8]),
        ),
        (Arc::new(Invert::new(Arc::new(Sigmoid::default())).unwrap()), v(&[0.3, 0.6, 0.9])),
    ];
    for (b, x) in cases {
        let (passed, detail) = match ildj_against_numeric(b.as_ref(), &x) {
            Ok((a, n)) => {
                let rel = (a - n).abs() / a.abs().max(1.0);
                (rel < 1e-5, format!("analytic {a:.9}, numeric {n:.9}, rel {rel:.1e}"))
            }
            Err(e) => (false, e.to_string()),
        };
        out.push(Check {
            suite: "jacobian",
            name: b.name().to_string(),
            passed,
            detail,
        });
    }
}

fn reference_suite(out: &mut Vec<Check>) {
    let p = Normal::new(0.0, 1.0).unwrap();
    let q = Normal::new(-1.0, 2.0).unwrap();
    let kl = kl_divergence(&p, &q).and_then(|v| v.item()).unwrap_or(f64::NAN);
    out.push(Check {
        suite: "reference",
        name: "kl normal pair".into(),
        passed: (kl - 0.443_147).abs() < 1e-6,
        detail: format!("{kl:.9}"),
    });
    let ln = TransformedDistribution::new(Arc::new(Normal::new(0.0, 1.0).unwrap()), Arc::new(Exp::default())).unwrap();
    let lp = ln.log_prob(&NdValue::scalar(1.0)).and_then(|v| v.item()).unwrap_or(f64::NAN);
    out.push(Check {
        suite: "reference",
        name: "lognormal log_prob(1)".into(),
        passed: (lp + 0.918_938_533_204_672_7).abs() < 1e-10,
        detail: format!("{lp:.12}"),
    });
}

/// Runs every suite and returns the individual results.
pub fn run() -> Vec<Check> {
    let mut out = Vec::new();
    ks_suite(&mut out);
    moment_suite(&mut out);
    jacobian_suite(&mut out);
    reference_suite(&mut out);
    out
}
