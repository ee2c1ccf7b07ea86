//! Numerical oracles used by the test suites and `selfcheck`: KS statistics,
//! adaptive quadrature and finite-difference Jacobians.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::bijector::Bijector;
use crate::error::{Error, Result};
use crate::nd::NdValue;

/// One-sample Kolmogorov-Smirnov statistic against a continuous cdf.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Two-sample Kolmogorov-Smirnov statistic. Ties are consumed together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Gauss-Kronrod 15/7 on `[a, b]`: (estimate, error estimate).
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl Quadrature {
    /// Adaptive GK15 with global bisection of the worst interval. Infinite
    /// bounds are mapped onto finite ones.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return self.integrate(f, b, a).map(|v| -v);
        }
        if a == b {
            return Ok(0.0);
        }
        match (a.is_finite(), b.is_finite()) {
            (true, true) => self.finite(&f, a, b),
            (false, false) => self.finite(
                &|t: f64| {
                    let d = 1.0 - t * t;
                    f(t / d) * (1.0 + t * t) / (d * d)
                },
                -1.0,
                1.0,
            ),
            (true, false) => self.finite(
                &|t: f64| {
                    let d = 1.0 - t;
                    f(a + t / d) / (d * d)
                },
                0.0,
                1.0,
            ),
            (false, true) => self.finite(
                &|t: f64| {
                    let d = 1.0 - t;
                    f(b - t / d) / (d * d)
                },
                0.0,
                1.0,
            ),
        }
    }

    fn finite(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
        let (value, err) = gk15(f, a, b);
        let mut heap = BinaryHeap::from([Piece { a, b, value, err }]);
        let (mut total, mut total_err) = (value, err);
        loop {
            if !total.is_finite() {
                return Err(Error::Numerical(format!("integrand is not finite on [{a}, {b}]")));
            }
            if total_err <= self.abs_tol.max(self.rel_tol * total.abs()) {
                return Ok(total);
            }
            if heap.len() >= self.max_intervals {
                return Err(Error::Numerical(format!(
                    "quadrature did not converge: estimate {total}, error {total_err:e}"
                )));
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            let (lv, le) = gk15(f, worst.a, mid);
            let (rv, re) = gk15(f, mid, worst.b);
            total += lv + rv - worst.value;
            total_err += le + re - worst.err;
            heap.push(Piece { a: worst.a, b: mid, value: lv, err: le });
            heap.push(Piece { a: mid, b: worst.b, value: rv, err: re });
        }
    }
}

/// [`Quadrature::integrate`] with default tolerances.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    Quadrature::default().integrate(f, a, b)
}

/// Central-difference Jacobian with one Richardson step; `jac[i][j] = d f_i / d x_j`.
pub fn jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<Vec<f64>> {
    let m = f(x).len();
    let mut jac = vec![vec![0.0; x.len()]; m];
    let diff = |j: usize, h: f64| -> Vec<f64> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        f(&xp).iter().zip(f(&xm)).map(|(p, q)| (p - q) / (2.0 * h)).collect()
    };
    for j in 0..x.len() {
        let h = 1e-3 * (1.0 + x[j].abs());
        let coarse = diff(j, h);
        let fine = diff(j, 0.5 * h);
        for i in 0..m {
            jac[i][j] = (4.0 * fine[i] - coarse[i]) / 3.0;
        }
    }
    jac
}

/// `log|det A|` by LU with partial pivoting.
pub fn log_abs_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut acc = 0.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .expect("non-empty range");
        if m[p][k] == 0.0 {
            return f64::NEG_INFINITY;
        }
        m.swap(k, p);
        acc += m[k][k].abs().ln();
        for i in k + 1..n {
            let r = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= r * m[k][j];
            }
        }
    }
    acc
}

/// `log|det J_f(x)|` from finite differences. `keep` selects the output
/// coordinates when `f` maps into a higher-dimensional space.
pub fn numeric_log_det_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], keep: Option<&[usize]>) -> f64 {
    let jac = jacobian(f, x);
    match keep {
        Some(rows) => log_abs_det(&rows.iter().map(|&i| jac[i].clone()).collect::<Vec<_>>()),
        None => log_abs_det(&jac),
    }
}

/// Analytic `ildj(forward(x))` next to `-log|det J|` of the forward map from
/// finite differences, with `x` a single event. When the output has more
/// coordinates than the input, the Jacobian is restricted to the leading ones.
pub fn ildj_against_numeric(b: &dyn Bijector, x: &NdValue) -> Result<(f64, f64)> {
    let rank = x.rank();
    let fresh = |v: &NdValue| NdValue::new(v.shape().clone(), v.dtype(), v.data().to_vec());
    let y = fresh(&b.forward(x)?)?;
    let analytic = b.inverse_log_det_jacobian(&y, b.forward_event_rank(rank)?)?.item()?;
    let n = x.len();
    let keep: Vec<usize> = (0..n).collect();
    let f = |v: &[f64]| -> Vec<f64> {
        let xv = NdValue::new(x.shape().clone(), x.dtype(), v.to_vec()).expect("same shape");
        b.forward(&xv).map(|y| y.data().to_vec()).unwrap_or_else(|_| vec![f64::NAN; y.len()])
    };
    let numeric = -numeric_log_det_jacobian(f, x.data(), (y.len() > n).then_some(keep.as_slice()));
    Ok((analytic, numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::reg_inc_gamma;

    #[test]
    fn kronrod_rule_is_exact_to_degree_22() {
        for deg in 0..=22 {
            let (v, _) = gk15(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-15, "degree {deg}");
        }
    }

    #[test]
    fn adaptive_and_infinite_ranges() {
        let g = integrate(|x: f64| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-10);
        let e = integrate(|x: f64| (-x).exp(), 0.0, f64::INFINITY).unwrap();
        assert!((e - 1.0).abs() < 1e-10);
        let s = integrate(|x: f64| x.sqrt(), 0.0, 1.0).unwrap();
        assert!((s - 2.0 / 3.0).abs() < 1e-10);
        let r = integrate(|x: f64| x, 1.0, 0.0).unwrap();
        assert!((r + 0.5).abs() < 1e-15);
    }

    #[test]
    fn incomplete_gamma_against_quadrature() {
        for &(a, x) in &[(2.0, 2.0), (0.7, 0.3), (5.5, 9.0)] {
            let q = integrate(|t: f64| t.powf(a - 1.0) * (-t).exp(), 0.0, x).unwrap();
            let expect = q / crate::special::lgamma(a).exp();
            assert!((reg_inc_gamma(a, x) - expect).abs() < 1e-9, "a={a} x={x}");
        }
        assert!((reg_inc_gamma(2.0, 2.0) - 0.593_994_150_290_161_9).abs() < 1e-14);
    }

    #[test]
    fn ks_statistics() {
        let n = 1000;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_one_sample(&grid, |x| x) - 0.5 / n as f64).abs() < 1e-12);
        assert_eq!(ks_two_sample(&grid, &grid), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[2.0, 3.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn determinants() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        assert!((log_abs_det(&a) - 6f64.ln()).abs() < 1e-15);
        let ld = numeric_log_det_jacobian(|x| x.iter().map(|v| v.exp()).collect(), &[0.5, -1.0], None);
        assert!((ld - (-0.5)).abs() < 1e-9);
        let proj = numeric_log_det_jacobian(|x| vec![2.0 * x[0], 7.0, 3.0 * x[0]], &[1.0], Some(&[2]));
        assert!((proj - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bijector_oracle() {
        let b = crate::bijector::SoftmaxCentered::default();
        let (a, n) = ildj_against_numeric(&b, &NdValue::vector(vec![0.3, -1.2, 0.5])).unwrap();
        assert!((a - n).abs() < 1e-6 * a.abs().max(1.0), "{a} {n}");
    }
}
