//! Closed-form KL divergences against Monte Carlo estimates.

use distkit::diagnostics::mean_and_stderr;
use distkit::families::{Beta, Dirichlet, Exponential, Gamma, Laplace, MultivariateNormalDiag, Normal};
use distkit::{kl_divergence, Distribution, NdValue, RngState, Shape};

const N: usize = 100_000;

/// Per batch member: |closed form - MC| < 4 standard errors, and KL(p, p) = 0.
fn check(p: &dyn Distribution, q: &dyn Distribution, seed: u64) {
    let exact = kl_divergence(p, q).unwrap();
    let x = p.sample(&Shape::from([N]), &RngState::from_seed(seed)).unwrap();
    let diff = p.log_prob(&x).unwrap().sub(&q.log_prob(&x).unwrap()).unwrap();
    let width = exact.len();
    assert_eq!(diff.len(), N * width);
    for j in 0..width {
        let col: Vec<f64> = (0..N).map(|i| diff.data()[i * width + j]).collect();
        let (m, se) = mean_and_stderr(&col);
        let k = exact.data()[j];
        assert!((m - k).abs() < 4.0 * se, "{} member {j}: closed {k}, mc {m} +- {se}", p.name());
    }
    let own = kl_divergence(p, p).unwrap();
    assert!(own.data().iter().all(|&v| v == 0.0), "{}: {:?}", p.name(), own.data());
}

fn v(x: &[f64]) -> NdValue {
    NdValue::vector(x.to_vec())
}

#[test]
fn normal() {
    check(
        &Normal::new(v(&[0.0, 1.0, -2.0]), v(&[1.0, 0.5, 3.0])).unwrap(),
        &Normal::new(v(&[-1.0, 1.5, 0.0]), v(&[2.0, 0.7, 1.0])).unwrap(),
        1,
    );
}

#[test]
fn laplace() {
    check(
        &Laplace::new(v(&[0.0, 2.0]), v(&[1.0, 0.4])).unwrap(),
        &Laplace::new(v(&[0.5, -1.0]), v(&[2.0, 1.5])).unwrap(),
        2,
    );
}

#[test]
fn exponential() {
    check(&Exponential::new(v(&[1.0, 3.0])).unwrap(), &Exponential::new(v(&[2.5, 0.8])).unwrap(), 3);
}

#[test]
fn gamma() {
    check(
        &Gamma::new(v(&[2.0, 0.7, 5.0]), v(&[1.0, 2.0, 0.5])).unwrap(),
        &Gamma::new(v(&[3.0, 1.2, 4.0]), v(&[0.5, 1.5, 0.6])).unwrap(),
        4,
    );
}

#[test]
fn beta() {
    check(
        &Beta::new(v(&[2.0, 0.8]), v(&[3.0, 1.5])).unwrap(),
        &Beta::new(v(&[1.0, 2.0]), v(&[1.0, 2.5])).unwrap(),
        5,
    );
}

#[test]
fn dirichlet() {
    let p = Dirichlet::new(NdValue::matrix(&[vec![2.0, 3.0, 1.5], vec![0.9, 1.1, 4.0]]).unwrap()).unwrap();
    let q = Dirichlet::new(NdValue::matrix(&[vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]]).unwrap()).unwrap();
    check(&p, &q, 6);
}

#[test]
fn multivariate_normal_diag() {
    let p = MultivariateNormalDiag::new(
        NdValue::matrix(&[vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap(),
        NdValue::matrix(&[vec![1.0, 0.5], vec![2.0, 1.0]]).unwrap(),
    )
    .unwrap();
    let q = MultivariateNormalDiag::new(v(&[0.0, 0.5]), v(&[1.5, 1.0])).unwrap();
    check(&p, &q, 7);
}
