use std::f64::consts::PI;

use super::{param_map, Args};
use crate::dist::{
    invert_cdf, scalar_distribution, Analytic, Constraint, Flags, Noise, ParamMap, ScalarCore, ScalarFamily,
};
use crate::error::Result;
use crate::nd::{NdValue, Shape};
use crate::random::{standard_gamma, standard_normal, RngState};
use crate::special::{digamma, erfc, lbeta, lgamma, ndtr, ndtri, reg_inc_beta, reg_inc_gamma, reg_inc_gamma_upper, HALF_LN_2PI};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Normal with mean `loc` and standard deviation `scale`.
#[derive(Clone, Debug)]
pub struct Normal {
    core: ScalarCore,
}

impl Normal {
    pub fn new(loc: impl Into<NdValue>, scale: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(loc, scale, Flags::default())
    }

    pub fn with_flags(loc: impl Into<NdValue>, scale: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let (loc, scale) = (loc.into(), scale.into());
        let given = param_map(&[("loc", &loc), ("scale", &scale)]);
        Ok(Normal {
            core: ScalarCore::new::<Self>(given, vec![loc, scale], flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Normal", p, &["loc", "scale"])?;
        Self::with_flags(a.req("loc")?.clone(), a.req("scale")?.clone(), flags)
    }

    pub fn loc(&self) -> &NdValue {
        &self.core.params[0]
    }

    pub fn scale(&self) -> &NdValue {
        &self.core.params[1]
    }
}

impl ScalarFamily for Normal {
    const FAMILY: &'static str = "Normal";
    const PARAMS: &'static [&'static str] = &["loc", "scale"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Real, Constraint::Positive];
    const ANALYTIC: Analytic = Analytic::ALL;
    const NOISE: Option<Noise> = Some(Noise::Normal);

    fn in_support(_x: f64, _p: &[f64]) -> bool {
        true
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        let z = (x - p[0]) / p[1];
        -0.5 * z * z - p[1].ln() - HALF_LN_2PI
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        ndtr((x - p[0]) / p[1])
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        ndtr((p[0] - x) / p[1])
    }
    fn log_cdf(x: f64, p: &[f64]) -> f64 {
        let z = (x - p[0]) / p[1];
        if z > -20.0 {
            ndtr(z).ln()
        } else {
            // erfc underflows; use the asymptotic ratio
            (0.5 * erfc(-z / SQRT_2)).ln()
        }
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * ndtri(u)
    }
    fn mean(p: &[f64]) -> f64 {
        p[0]
    }
    fn variance(p: &[f64]) -> f64 {
        p[1] * p[1]
    }
    fn mode(p: &[f64]) -> f64 {
        p[0]
    }
    fn entropy(p: &[f64]) -> f64 {
        0.5 + HALF_LN_2PI + p[1].ln()
    }
    fn transform(z: f64, p: &[f64]) -> f64 {
        p[1] * z + p[0]
    }
}

scalar_distribution!(Normal);

/// Laplace with location `loc` and diversity `scale`.
#[derive(Clone, Debug)]
pub struct Laplace {
    core: ScalarCore,
}

impl Laplace {
    pub fn new(loc: impl Into<NdValue>, scale: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(loc, scale, Flags::default())
    }

    pub fn with_flags(loc: impl Into<NdValue>, scale: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let (loc, scale) = (loc.into(), scale.into());
        let given = param_map(&[("loc", &loc), ("scale", &scale)]);
        Ok(Laplace {
            core: ScalarCore::new::<Self>(given, vec![loc, scale], flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Laplace", p, &["loc", "scale"])?;
        Self::with_flags(a.req("loc")?.clone(), a.req("scale")?.clone(), flags)
    }

    pub fn loc(&self) -> &NdValue {
        &self.core.params[0]
    }

    pub fn scale(&self) -> &NdValue {
        &self.core.params[1]
    }
}

impl ScalarFamily for Laplace {
    const FAMILY: &'static str = "Laplace";
    const PARAMS: &'static [&'static str] = &["loc", "scale"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Real, Constraint::Positive];
    const ANALYTIC: Analytic = Analytic::ALL;
    const NOISE: Option<Noise> = Some(Noise::Uniform);

    fn in_support(_x: f64, _p: &[f64]) -> bool {
        true
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        -(x - p[0]).abs() / p[1] - (2.0 * p[1]).ln()
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        let z = (x - p[0]) / p[1];
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        <Self as ScalarFamily>::cdf(-x, &[-p[0], p[1]])
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        if u < 0.5 {
            p[0] + p[1] * (2.0 * u).ln()
        } else {
            p[0] - p[1] * (2.0 - 2.0 * u).ln()
        }
    }
    fn mean(p: &[f64]) -> f64 {
        p[0]
    }
    fn variance(p: &[f64]) -> f64 {
        2.0 * p[1] * p[1]
    }
    fn mode(p: &[f64]) -> f64 {
        p[0]
    }
    fn entropy(p: &[f64]) -> f64 {
        1.0 + (2.0 * p[1]).ln()
    }
    fn transform(u: f64, p: &[f64]) -> f64 {
        <Self as ScalarFamily>::quantile(u, p)
    }
}

scalar_distribution!(Laplace);

/// Exponential with `rate`.
#[derive(Clone, Debug)]
pub struct Exponential {
    core: ScalarCore,
}

impl Exponential {
    pub fn new(rate: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(rate, Flags::default())
    }

    pub fn with_flags(rate: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let rate = rate.into();
        let given = param_map(&[("rate", &rate)]);
        Ok(Exponential {
            core: ScalarCore::new::<Self>(given, vec![rate], flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Exponential", p, &["rate"])?;
        Self::with_flags(a.req("rate")?.clone(), flags)
    }

    pub fn rate(&self) -> &NdValue {
        &self.core.params[0]
    }
}

impl ScalarFamily for Exponential {
    const FAMILY: &'static str = "Exponential";
    const PARAMS: &'static [&'static str] = &["rate"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Positive];
    const ANALYTIC: Analytic = Analytic::ALL;
    const NOISE: Option<Noise> = Some(Noise::Uniform);

    fn in_support(x: f64, _p: &[f64]) -> bool {
        x >= 0.0
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        p[0].ln() - p[0] * x
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -(-p[0] * x).exp_m1()
        }
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            (-p[0] * x).exp()
        }
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        -(-u).ln_1p() / p[0]
    }
    fn mean(p: &[f64]) -> f64 {
        1.0 / p[0]
    }
    fn variance(p: &[f64]) -> f64 {
        1.0 / (p[0] * p[0])
    }
    fn mode(_p: &[f64]) -> f64 {
        0.0
    }
    fn entropy(p: &[f64]) -> f64 {
        1.0 - p[0].ln()
    }
    fn transform(u: f64, p: &[f64]) -> f64 {
        <Self as ScalarFamily>::quantile(u, p)
    }
}

scalar_distribution!(Exponential);

/// Cauchy with location `loc` and `scale`. Mean and variance are undefined.
#[derive(Clone, Debug)]
pub struct Cauchy {
    core: ScalarCore,
}

impl Cauchy {
    pub fn new(loc: impl Into<NdValue>, scale: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(loc, scale, Flags::default())
    }

    pub fn with_flags(loc: impl Into<NdValue>, scale: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let (loc, scale) = (loc.into(), scale.into());
        let given = param_map(&[("loc", &loc), ("scale", &scale)]);
        Ok(Cauchy {
            core: ScalarCore::new::<Self>(given, vec![loc, scale], flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Cauchy", p, &["loc", "scale"])?;
        Self::with_flags(a.req("loc")?.clone(), a.req("scale")?.clone(), flags)
    }
}

impl ScalarFamily for Cauchy {
    const FAMILY: &'static str = "Cauchy";
    const PARAMS: &'static [&'static str] = &["loc", "scale"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Real, Constraint::Positive];
    const ANALYTIC: Analytic = Analytic::ALL;
    const NOISE: Option<Noise> = Some(Noise::Uniform);

    fn in_support(_x: f64, _p: &[f64]) -> bool {
        true
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        let z = (x - p[0]) / p[1];
        -PI.ln() - p[1].ln() - (z * z).ln_1p()
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        0.5 + ((x - p[0]) / p[1]).atan() / PI
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        0.5 - ((x - p[0]) / p[1]).atan() / PI
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * (PI * (u - 0.5)).tan()
    }
    fn mode(p: &[f64]) -> f64 {
        p[0]
    }
    fn entropy(p: &[f64]) -> f64 {
        (4.0 * PI * p[1]).ln()
    }
    fn transform(u: f64, p: &[f64]) -> f64 {
        <Self as ScalarFamily>::quantile(u, p)
    }
}

scalar_distribution!(Cauchy);

/// Student's t with `df` degrees of freedom, `loc` and `scale`.
#[derive(Clone, Debug)]
pub struct StudentT {
    core: ScalarCore,
}

impl StudentT {
    pub fn new(df: impl Into<NdValue>, loc: impl Into<NdValue>, scale: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(df, loc, scale, Flags::default())
    }

    pub fn with_flags(
        df: impl Into<NdValue>,
        loc: impl Into<NdValue>,
        scale: impl Into<NdValue>,
        flags: Flags,
    ) -> Result<Self> {
        let (df, loc, scale) = (df.into(), loc.into(), scale.into());
        let given = param_map(&[("df", &df), ("loc", &loc), ("scale", &scale)]);
        Ok(StudentT {
            core: ScalarCore::new::<Self>(given, vec![df, loc, scale], flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("StudentT", p, &["df", "loc", "scale"])?;
        Self::with_flags(a.req("df")?.clone(), a.req("loc")?.clone(), a.req("scale")?.clone(), flags)
    }

    fn pdf(x: f64, p: &[f64]) -> f64 {
        <Self as ScalarFamily>::log_prob(x, p).exp()
    }
}

impl ScalarFamily for StudentT {
    const FAMILY: &'static str = "StudentT";
    const PARAMS: &'static [&'static str] = &["df", "loc", "scale"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Positive, Constraint::Real, Constraint::Positive];
    const ANALYTIC: Analytic = Analytic::ALL;

    fn in_support(_x: f64, _p: &[f64]) -> bool {
        true
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        let (nu, z) = (p[0], (x - p[1]) / p[2]);
        lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu) - 0.5 * (nu * PI).ln() - p[2].ln()
            - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        let (nu, t) = (p[0], (x - p[1]) / p[2]);
        let tail = 0.5 * reg_inc_beta(0.5 * nu, 0.5, nu / (nu + t * t));
        if t < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        <Self as ScalarFamily>::cdf(-x, &[p[0], -p[1], p[2]])
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        let cdf = |x: f64| <Self as ScalarFamily>::cdf(x, p);
        let pdf = |x: f64| Self::pdf(x, p);
        invert_cdf(u, f64::NEG_INFINITY, f64::INFINITY, p[1], p[2], cdf, pdf)
    }
    fn mean(p: &[f64]) -> f64 {
        if p[0] > 1.0 {
            p[1]
        } else {
            f64::NAN
        }
    }
    fn variance(p: &[f64]) -> f64 {
        if p[0] > 2.0 {
            p[2] * p[2] * p[0] / (p[0] - 2.0)
        } else {
            f64::NAN
        }
    }
    fn mode(p: &[f64]) -> f64 {
        p[1]
    }
    fn entropy(p: &[f64]) -> f64 {
        let nu = p[0];
        0.5 * (nu + 1.0) * (digamma(0.5 * (nu + 1.0)) - digamma(0.5 * nu))
            + 0.5 * nu.ln()
            + lbeta(0.5 * nu, 0.5)
            + p[2].ln()
    }
    fn draw(core: &ScalarCore, shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let streams = rng.split(2);
        let z = standard_normal(&streams[0], shape, core.pdtype)?;
        let half_df = core.params[0].map(|v| 0.5 * v);
        let g = standard_gamma(&streams[1], &half_df, shape, false)?;
        NdValue::map_n(&[&z, &g, &core.params[0], &core.params[1], &core.params[2]], |a| {
            let chi = a[1] / (0.5 * a[2]);
            a[3] + a[4] * a[0] / chi.sqrt()
        })
    }
}

scalar_distribution!(StudentT);

/// Continuous uniform on `[low, high]`.
#[derive(Clone, Debug)]
pub struct Uniform {
    core: ScalarCore,
}

impl Uniform {
    pub fn new(low: impl Into<NdValue>, high: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(low, high, Flags::default())
    }

    pub fn with_flags(low: impl Into<NdValue>, high: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let (low, high) = (low.into(), high.into());
        let given = param_map(&[("low", &low), ("high", &high)]);
        Ok(Uniform {
            core: ScalarCore::new::<Self>(given, vec![low, high], flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Uniform", p, &["low", "high"])?;
        Self::with_flags(a.req("low")?.clone(), a.req("high")?.clone(), flags)
    }
}

impl ScalarFamily for Uniform {
    const FAMILY: &'static str = "Uniform";
    const PARAMS: &'static [&'static str] = &["low", "high"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Real, Constraint::Real];
    const ANALYTIC: Analytic = Analytic {
        mode: false,
        ..Analytic::ALL
    };
    const NOISE: Option<Noise> = Some(Noise::Uniform);

    fn check_params(p: &[f64]) -> Option<String> {
        (p[0] >= p[1]).then(|| format!("low ({}) must be below high ({})", p[0], p[1]))
    }
    fn in_support(x: f64, p: &[f64]) -> bool {
        x >= p[0] && x <= p[1]
    }
    fn log_prob(_x: f64, p: &[f64]) -> f64 {
        -(p[1] - p[0]).ln()
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        ((x - p[0]) / (p[1] - p[0])).clamp(0.0, 1.0)
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        p[0] + u * (p[1] - p[0])
    }
    fn mean(p: &[f64]) -> f64 {
        0.5 * (p[0] + p[1])
    }
    fn variance(p: &[f64]) -> f64 {
        let w = p[1] - p[0];
        w * w / 12.0
    }
    fn entropy(p: &[f64]) -> f64 {
        (p[1] - p[0]).ln()
    }
    fn transform(u: f64, p: &[f64]) -> f64 {
        <Self as ScalarFamily>::quantile(u, p)
    }
}

scalar_distribution!(Uniform);

/// Gamma with `concentration` and either `rate` or `log_rate`.
#[derive(Clone, Debug)]
pub struct Gamma {
    core: ScalarCore,
}

impl Gamma {
    pub fn new(concentration: impl Into<NdValue>, rate: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(concentration, rate, Flags::default())
    }

    pub fn with_flags(concentration: impl Into<NdValue>, rate: impl Into<NdValue>, flags: Flags) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("concentration".into(), concentration.into());
        p.insert("rate".into(), rate.into());
        Self::from_params(&p, flags)
    }

    pub fn from_log_rate(concentration: impl Into<NdValue>, log_rate: impl Into<NdValue>) -> Result<Self> {
        let mut p = ParamMap::new();
        p.insert("concentration".into(), concentration.into());
        p.insert("log_rate".into(), log_rate.into());
        Self::from_params(&p, Flags::default())
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Gamma", p, &["concentration", "rate", "log_rate"])?;
        let conc = a.req("concentration")?.clone();
        let rate = match a.exclusive("rate", "log_rate")? {
            Ok(rate) => rate.clone(),
            Err(log_rate) => log_rate.map(f64::exp),
        };
        Ok(Gamma {
            core: ScalarCore::new::<Self>(p.clone(), vec![conc, rate], flags)?,
        })
    }

    pub fn concentration(&self) -> &NdValue {
        &self.core.params[0]
    }

    pub fn rate(&self) -> &NdValue {
        &self.core.params[1]
    }
}

impl ScalarFamily for Gamma {
    const FAMILY: &'static str = "Gamma";
    const PARAMS: &'static [&'static str] = &["concentration", "rate"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Positive, Constraint::Positive];
    const ANALYTIC: Analytic = Analytic::ALL;

    fn in_support(x: f64, _p: &[f64]) -> bool {
        x >= 0.0
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        let (a, b) = (p[0], p[1]);
        let xterm = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
        a * b.ln() + xterm - b * x - lgamma(a)
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            reg_inc_gamma(p[0], p[1] * x)
        }
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            reg_inc_gamma_upper(p[0], p[1] * x)
        }
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        let cdf = |x: f64| <Self as ScalarFamily>::cdf(x, p);
        let pdf = |x: f64| if x > 0.0 { <Self as ScalarFamily>::log_prob(x, p).exp() } else { 0.0 };
        invert_cdf(u, 0.0, f64::INFINITY, p[0] / p[1], p[0].sqrt() / p[1], cdf, pdf)
    }
    fn mean(p: &[f64]) -> f64 {
        p[0] / p[1]
    }
    fn variance(p: &[f64]) -> f64 {
        p[0] / (p[1] * p[1])
    }
    fn mode(p: &[f64]) -> f64 {
        if p[0] >= 1.0 {
            (p[0] - 1.0) / p[1]
        } else {
            f64::NAN
        }
    }
    fn entropy(p: &[f64]) -> f64 {
        let a = p[0];
        a - p[1].ln() + lgamma(a) + (1.0 - a) * digamma(a)
    }
    fn draw(core: &ScalarCore, shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let g = standard_gamma(rng, &core.params[0], shape, false)?;
        g.zip_with(&core.params[1], |g, b| g / b)
    }
}

scalar_distribution!(Gamma);

/// Beta on `[0, 1]` with `concentration1` (alpha) and `concentration0` (beta).
#[derive(Clone, Debug)]
pub struct Beta {
    core: ScalarCore,
}

impl Beta {
    pub fn new(concentration1: impl Into<NdValue>, concentration0: impl Into<NdValue>) -> Result<Self> {
        Self::with_flags(concentration1, concentration0, Flags::default())
    }

    pub fn with_flags(
        concentration1: impl Into<NdValue>,
        concentration0: impl Into<NdValue>,
        flags: Flags,
    ) -> Result<Self> {
        let (c1, c0) = (concentration1.into(), concentration0.into());
        let given = param_map(&[("concentration1", &c1), ("concentration0", &c0)]);
        Ok(Beta {
            core: ScalarCore::new::<Self>(given, vec![c1, c0], flags)?,
        })
    }

    pub fn from_params(p: &ParamMap, flags: Flags) -> Result<Self> {
        let a = Args::new("Beta", p, &["concentration1", "concentration0"])?;
        Self::with_flags(a.req("concentration1")?.clone(), a.req("concentration0")?.clone(), flags)
    }

    pub fn concentration1(&self) -> &NdValue {
        &self.core.params[0]
    }

    pub fn concentration0(&self) -> &NdValue {
        &self.core.params[1]
    }
}

impl ScalarFamily for Beta {
    const FAMILY: &'static str = "Beta";
    const PARAMS: &'static [&'static str] = &["concentration1", "concentration0"];
    const CONSTRAINTS: &'static [Constraint] = &[Constraint::Positive, Constraint::Positive];
    const ANALYTIC: Analytic = Analytic::ALL;

    fn in_support(x: f64, _p: &[f64]) -> bool {
        (0.0..=1.0).contains(&x)
    }
    fn log_prob(x: f64, p: &[f64]) -> f64 {
        let (a, b) = (p[0], p[1]);
        let lx = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
        let l1x = if b == 1.0 { 0.0 } else { (b - 1.0) * (-x).ln_1p() };
        lx + l1x - lbeta(a, b)
    }
    fn cdf(x: f64, p: &[f64]) -> f64 {
        reg_inc_beta(p[0], p[1], x.clamp(0.0, 1.0))
    }
    fn survival(x: f64, p: &[f64]) -> f64 {
        reg_inc_beta(p[1], p[0], (1.0 - x).clamp(0.0, 1.0))
    }
    fn quantile(u: f64, p: &[f64]) -> f64 {
        let cdf = |x: f64| <Self as ScalarFamily>::cdf(x, p);
        let pdf = |x: f64| {
            if x > 0.0 && x < 1.0 {
                <Self as ScalarFamily>::log_prob(x, p).exp()
            } else {
                0.0
            }
        };
        let mean = p[0] / (p[0] + p[1]);
        invert_cdf(u, 0.0, 1.0, mean, 0.25, cdf, pdf)
    }
    fn mean(p: &[f64]) -> f64 {
        p[0] / (p[0] + p[1])
    }
    fn variance(p: &[f64]) -> f64 {
        let s = p[0] + p[1];
        p[0] * p[1] / (s * s * (s + 1.0))
    }
    fn mode(p: &[f64]) -> f64 {
        if p[0] > 1.0 && p[1] > 1.0 {
            (p[0] - 1.0) / (p[0] + p[1] - 2.0)
        } else {
            f64::NAN
        }
    }
    fn entropy(p: &[f64]) -> f64 {
        let (a, b) = (p[0], p[1]);
        lbeta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
    }
    fn draw(core: &ScalarCore, shape: &Shape, rng: &RngState) -> Result<NdValue> {
        let streams = rng.split(2);
        let g1 = standard_gamma(&streams[0], &core.params[0], shape, false)?;
        let g0 = standard_gamma(&streams[1], &core.params[1], shape, false)?;
        g1.zip_with(&g0, |a, b| a / (a + b))
    }
}

scalar_distribution!(Beta);
