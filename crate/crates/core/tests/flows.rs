//! Bijector contracts and change-of-variables densities against numerical oracles.

use std::f64::consts::PI;
use std::sync::Arc;

use distkit::bijector::{
    AbsValue, Affine, AffineScale, Exp, Identity, LinearAutoregressive, MaskedAutoregressive, Permute, Reshape,
    Sigmoid, SoftmaxCentered, Softplus, Square,
};
use distkit::diagnostics::{ildj_against_numeric, integrate, mean_and_stderr};
use distkit::families::{Cauchy, Normal};
use distkit::meta::{Autoregressive, Independent, TransformedDistribution};
use distkit::random::{standard_normal, uniform};
use distkit::{Bijector, Chain, DType, Distribution, Invert, NdValue, RngState, Shape};

/// Copy without the cache token, so the inverse kernel actually runs.
fn fresh(v: &NdValue) -> NdValue {
    NdValue::new(v.shape().clone(), v.dtype(), v.data().to_vec()).unwrap()
}

fn points(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> NdValue {
    let shape = if d == 0 { Shape::from([n]) } else { Shape::from([n, d]) };
    uniform(&RngState::from_seed(seed), &shape, DType::F64)
        .unwrap()
        .map(|u| lo + (hi - lo) * u)
}

fn tril(d: usize, seed: u64) -> NdValue {
    let z = standard_normal(&RngState::from_seed(seed), &Shape::from([d, d]), DType::F64).unwrap();
    let data = (0..d * d)
        .map(|k| {
            let (i, j) = (k / d, k % d);
            match i.cmp(&j) {
                std::cmp::Ordering::Greater => 0.3 * z.data()[k],
                std::cmp::Ordering::Equal => 1.0 + 0.5 * z.data()[k].abs(),
                std::cmp::Ordering::Less => 0.0,
            }
        })
        .collect();
    NdValue::new([d, d], DType::F64, data).unwrap()
}

fn maf(d: usize, seed: u64) -> Arc<dyn Bijector> {
    let f = LinearAutoregressive::random(d, &RngState::from_seed(seed));
    Arc::new(MaskedAutoregressive::new(Arc::new(f), true).unwrap())
}

/// Injective bijectors with 1000 points from their domain and the event rank used for log-det checks.
fn injective() -> Vec<(Arc<dyn Bijector>, NdValue, usize)> {
    let n = 1000;
    vec![
        (Arc::new(Identity::new()), points(n, 0, -10.0, 10.0, 1), 0),
        (Arc::new(Exp::default()), points(n, 0, -5.0, 5.0, 2), 0),
        (Arc::new(Sigmoid::default()), points(n, 0, -5.0, 5.0, 3), 0),
        (Arc::new(Softplus::default()), points(n, 0, -5.0, 5.0, 4), 0),
        (
            Arc::new(Affine::new(Some(2.0.into()), AffineScale::Multiplier((-0.7).into()), true).unwrap()),
            points(n, 0, -10.0, 10.0, 5),
            0,
        ),
        (
            Arc::new(
                Affine::new(
                    Some(NdValue::vector(vec![1.0, -2.0, 0.5])),
                    AffineScale::Diag(NdValue::vector(vec![0.5, 2.0, -1.5])),
                    true,
                )
                .unwrap(),
            ),
            points(n, 3, -3.0, 3.0, 6),
            1,
        ),
        (Arc::new(Affine::new(None, AffineScale::TriL(tril(5, 7)), true).unwrap()), points(n, 5, -3.0, 3.0, 8), 1),
        (Arc::new(Permute::new(vec![3, 0, 2, 1]).unwrap()), points(n, 4, -3.0, 3.0, 9), 1),
        (
            Arc::new(Reshape::new(Shape::from([4]), Shape::from([2, 2])).unwrap()),
            points(n, 4, -3.0, 3.0, 10),
            1,
        ),
        (Arc::new(SoftmaxCentered::default()), points(n, 3, -4.0, 4.0, 11), 1),
        (maf(3, 12), points(n, 3, -2.0, 2.0, 13), 1),
        (
            Arc::new(Chain::new(vec![Arc::new(Exp::default()), Arc::new(Softplus::default())]).unwrap()),
            points(n, 0, -4.0, 4.0, 14),
            0,
        ),
        (Arc::new(Invert::new(Arc::new(Sigmoid::default())).unwrap()), points(n, 0, 0.01, 0.99, 15), 0),
    ]
}

#[test]
fn round_trip_over_a_thousand_points() {
    for (b, x, _) in injective() {
        let y = b.forward(&x).unwrap();
        let back = b.inverse(&fresh(&y)).unwrap();
        let err = back.max_abs_diff(&x);
        assert!(err < 1e-9, "{}: {err}", b.name());
    }
}

#[test]
fn forward_and_inverse_log_dets_cancel() {
    for (b, x, rank) in injective() {
        let y = b.forward(&x).unwrap();
        let f = b.forward_log_det_jacobian(&x, rank).unwrap();
        let i = b.inverse_log_det_jacobian(&fresh(&y), b.forward_event_rank(rank).unwrap()).unwrap();
        let err = f.add(&i).unwrap().data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-10, "{}: {err}", b.name());
    }
}

#[test]
fn ildj_matches_finite_differences() {
    let v = |x: &[f64]| NdValue::vector(x.to_vec());
    let mut cases: Vec<(Arc<dyn Bijector>, NdValue)> = vec![
        (Arc::new(Exp::default()), v(&[0.3, -1.2, 0.8])),
        (Arc::new(Sigmoid::default()), v(&[0.3, -1.2, 0.8, 2.5])),
        (Arc::new(Softplus::default()), v(&[0.3, -1.2, 0.8])),
        (Arc::new(Invert::new(Arc::new(Softplus::default())).unwrap()), v(&[0.3, 1.2, 2.8])),
    ];
    for d in 1..=9 {
        let x = points(1, d, -1.5, 1.5, 40 + d as u64).reshape([d]).unwrap();
        cases.push((Arc::new(Affine::new(None, AffineScale::TriL(tril(d, d as u64)), true).unwrap()), x.clone()));
        cases.push((maf(d, 100 + d as u64), x.clone()));
        let perm: Vec<usize> = (0..d).rev().collect();
        cases.push((Arc::new(Permute::new(perm).unwrap()), x.clone()));
        if d < 9 {
            cases.push((Arc::new(SoftmaxCentered::default()), x.clone()));
        }
        let chain: Arc<dyn Bijector> = Arc::new(
            Chain::new(vec![
                Arc::new(Affine::new(None, AffineScale::TriL(tril(d, 200 + d as u64)), true).unwrap()),
                Arc::new(Sigmoid::default()),
                maf(d, 300 + d as u64),
            ])
            .unwrap(),
        );
        cases.push((chain, x));
    }
    cases.push((
        Arc::new(Reshape::new(Shape::from([2, 3]), Shape::from([6])).unwrap()),
        NdValue::matrix(&[vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]).unwrap(),
    ));
    for (b, x) in cases {
        let (a, n) = ildj_against_numeric(b.as_ref(), &x).unwrap();
        let rel = (a - n).abs() / a.abs().max(1.0);
        assert!(rel < 1e-5, "{} at {:?}: analytic {a}, numeric {n}", b.name(), x.shape());
    }
}

#[test]
fn chain_log_det_is_sum_of_parts() {
    let parts: Vec<Arc<dyn Bijector>> = vec![
        Arc::new(Affine::new(Some(NdValue::vector(vec![0.5, -1.0, 2.0])), AffineScale::TriL(tril(3, 9)), true).unwrap()),
        Arc::new(Softplus::default()),
        maf(3, 5),
    ];
    let chain = Chain::new(parts.clone()).unwrap();
    let x = points(50, 3, -2.0, 2.0, 77);
    let total = chain.forward_log_det_jacobian(&x, 1).unwrap();
    // the rightmost part acts first
    let mut h = x.clone();
    let mut sum = NdValue::zeros([50], DType::F64);
    for b in parts.iter().rev() {
        sum = sum.add(&b.forward_log_det_jacobian(&h, 1).unwrap()).unwrap();
        h = b.forward(&h).unwrap();
    }
    assert!(total.max_abs_diff(&sum) < 1e-12);
    assert!(chain.forward(&x).unwrap().max_abs_diff(&h) < 1e-12);
}

#[test]
fn coverings_integrate_to_one() {
    let half_cauchy = TransformedDistribution::new(Arc::new(Cauchy::new(0.0, 1.0).unwrap()), Arc::new(AbsValue::new()))
        .unwrap();
    let pdf = |y: f64| half_cauchy.prob(&NdValue::scalar(y)).unwrap().item().unwrap();
    let total = integrate(pdf, 0.0, f64::INFINITY).unwrap();
    assert!((total - 1.0).abs() < 1e-6, "{total}");
    assert!((pdf(0.0) - 2.0 / PI).abs() < 1e-10);

    // chi-square with one degree of freedom; y = t^2 removes the singularity at 0
    let chi2 = TransformedDistribution::new(Arc::new(Normal::new(0.0, 1.0).unwrap()), Arc::new(Square::new())).unwrap();
    let pdf = |y: f64| chi2.prob(&NdValue::scalar(y)).unwrap().item().unwrap();
    let total = integrate(|t| if t == 0.0 { 0.0 } else { 2.0 * t * pdf(t * t) }, 0.0, f64::INFINITY).unwrap();
    assert!((total - 1.0).abs() < 1e-6, "{total}");
    let y = 0.7f64;
    let oracle = (-y / 2.0).exp() / (2.0 * PI * y).sqrt();
    assert!((pdf(y) - oracle).abs() < 1e-14);
}

#[test]
fn covering_samples_land_in_the_image() {
    let d = TransformedDistribution::new(Arc::new(Normal::new(0.3, 1.0).unwrap()), Arc::new(AbsValue::new())).unwrap();
    let s = d.sample(&Shape::from([2000]), &RngState::from_seed(3)).unwrap();
    assert!(s.data().iter().all(|&v| v >= 0.0));
    let set = AbsValue::new().inverse_set(&NdValue::scalar(1.5)).unwrap();
    assert_eq!(set.len(), 2);
}

#[test]
fn transformed_expectation_matches_quadrature() {
    // E[g(Y)] for Y = sigmoid(X), X ~ Normal(0.4, 1.3), g bounded on (0, 1)
    let td = TransformedDistribution::new(Arc::new(Normal::new(0.4, 1.3).unwrap()), Arc::new(Sigmoid::default()))
        .unwrap();
    let g = |y: f64| (3.0 * y).sin() + y * y;
    let pdf = |y: f64| td.prob(&NdValue::scalar(y)).unwrap().item().unwrap();
    let exact = integrate(|y| g(y) * pdf(y), 0.0, 1.0).unwrap();
    let s = td.sample(&Shape::from([100_000]), &RngState::from_seed(21)).unwrap();
    let values: Vec<f64> = s.data().iter().map(|&y| g(y)).collect();
    let (m, se) = mean_and_stderr(&values);
    assert!((m - exact).abs() < 3.0 * se, "mc {m} +- {se}, quadrature {exact}");
}

#[test]
fn maf_flow_density() {
    let b = maf(3, 8);
    let y = points(20, 3, -2.0, 2.0, 31);
    let x = b.inverse(&y).unwrap();
    assert!(b.forward(&fresh(&x)).unwrap().max_abs_diff(&y) < 1e-10);

    let base: Arc<dyn Distribution> = Arc::new(Independent::rightmost(Arc::new(Normal::new(vec![0.0; 3], 1.0).unwrap())).unwrap());
    let td = TransformedDistribution::new(base.clone(), b.clone()).unwrap();
    let lp = td.log_prob(&y).unwrap();
    let expect = base
        .log_prob(&x)
        .unwrap()
        .add(&b.inverse_log_det_jacobian(&fresh(&y), 1).unwrap())
        .unwrap();
    assert!(lp.max_abs_diff(&expect) < 1e-12);
}

const W_SHIFT: [[f64; 4]; 4] = [[0.0; 4], [0.8, 0.0, 0.0, 0.0], [-0.5, 0.3, 0.0, 0.0], [0.2, -0.4, 0.9, 0.0]];
const W_SCALE: [[f64; 4]; 4] = [[0.0; 4], [0.1, 0.0, 0.0, 0.0], [0.0, -0.2, 0.0, 0.0], [0.05, 0.0, 0.1, 0.0]];

fn shift_and_scale(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dot = |w: &[f64; 4]| -> f64 { w.iter().zip(x).map(|(a, b)| a * b).sum() };
    ((0..4).map(|i| 0.1 + dot(&W_SHIFT[i])).collect(), (0..4).map(|i| dot(&W_SCALE[i]).exp()).collect())
}

#[test]
fn autoregressive_matches_sequential_oracle() {
    let make: distkit::meta::MakeDistribution = Arc::new(|x: &NdValue| {
        let mut loc = Vec::new();
        let mut scale = Vec::new();
        for r in x.rows(1) {
            let (m, s) = shift_and_scale(r);
            loc.extend(m);
            scale.extend(s);
        }
        let shape = x.shape().clone();
        let n = Normal::new(NdValue::new(shape.clone(), DType::F64, loc)?, NdValue::new(shape, DType::F64, scale)?)?;
        Ok(Arc::new(Independent::rightmost(Arc::new(n))?) as Arc<dyn Distribution>)
    });
    let ar = Autoregressive::new(make, Shape::from([4]), 4).unwrap();
    let rng = RngState::from_seed(17);
    let x = ar.sample(&Shape::scalar(), &rng).unwrap();

    let mut oracle = vec![0.0; 4];
    for key in rng.split(4) {
        let z = standard_normal(&key, &Shape::from([4]), DType::F64).unwrap();
        let (m, s) = shift_and_scale(&oracle);
        oracle = (0..4).map(|i| m[i] + s[i] * z.data()[i]).collect();
    }
    for (a, b) in x.data().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-12, "{:?} vs {oracle:?}", x.data());
    }

    let (m, s) = shift_and_scale(x.data());
    let expect: f64 = (0..4)
        .map(|i| {
            let z = (x.data()[i] - m[i]) / s[i];
            -0.5 * z * z - s[i].ln() - 0.5 * (2.0 * PI).ln()
        })
        .sum();
    assert!((ar.log_prob(&x).unwrap().item().unwrap() - expect).abs() < 1e-12);
}
