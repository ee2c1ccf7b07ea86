use super::{reduce_elementwise, reduce_per_event, Bijector, BijectorCache};
use crate::error::{Error, Result};
use crate::nd::{broadcast_rows, NdValue, Shape};

/// Scale operator of an [`Affine`] bijector.
#[derive(Clone, Debug)]
pub enum AffineScale {
    Identity,
    /// Scalar (or batch of scalars) times the identity; event rank 0.
    Multiplier(NdValue),
    /// Diagonal `[..., k]`; event rank 1.
    Diag(NdValue),
    /// Lower-triangular `[..., k, k]`; entries above the diagonal are ignored.
    TriL(NdValue),
}

/// `y = scale * x + shift`.
pub struct Affine {
    shift: Option<NdValue>,
    scale: AffineScale,
    cache: BijectorCache,
}

impl Affine {
    pub fn new(shift: Option<NdValue>, scale: AffineScale, validate_args: bool) -> Result<Self> {
        let diag: Option<Vec<f64>> = match &scale {
            AffineScale::Identity => None,
            AffineScale::Multiplier(m) => Some(m.data().to_vec()),
            AffineScale::Diag(d) => {
                if d.rank() == 0 {
                    return Err(Error::invalid("scale_diag", "needs at least one axis"));
                }
                Some(d.data().to_vec())
            }
            AffineScale::TriL(l) => {
                let dims = l.shape().dims();
                if dims.len() < 2 || dims[dims.len() - 1] != dims[dims.len() - 2] {
                    return Err(Error::invalid("scale_tril", format!("must be [..., k, k], got {}", l.shape())));
                }
                let k = dims[dims.len() - 1];
                let mut diag = Vec::new();
                for m in l.rows(2) {
                    for i in 0..k {
                        diag.push(m[i * k + i]);
                        if validate_args {
                            if let Some(j) = (i + 1..k).find(|&j| m[i * k + j] != 0.0) {
                                return Err(Error::invalid(
                                    "scale_tril",
                                    format!("entry ({i}, {j}) above the diagonal is nonzero"),
                                ));
                            }
                        }
                    }
                }
                Some(diag)
            }
        };
        if validate_args {
            if let Some(d) = diag {
                if d.iter().any(|v| *v == 0.0 || !v.is_finite()) {
                    let param = match scale {
                        AffineScale::Multiplier(_) => "scale_identity_multiplier",
                        AffineScale::Diag(_) => "scale_diag",
                        _ => "scale_tril",
                    };
                    return Err(Error::invalid(param, "diagonal must be nonzero and finite"));
                }
            }
            if let Some(s) = &shift {
                if s.data().iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("shift", "must be finite"));
                }
            }
        }
        Ok(Affine {
            shift,
            scale,
            cache: BijectorCache::new(),
        })
    }

    pub fn shift(&self) -> Option<&NdValue> {
        self.shift.as_ref()
    }

    pub fn scale(&self) -> &AffineScale {
        &self.scale
    }

    fn event_size(&self) -> Option<usize> {
        match &self.scale {
            AffineScale::Diag(d) => d.shape().dims().last().copied(),
            AffineScale::TriL(l) => l.shape().dims().last().copied(),
            _ => None,
        }
    }

    fn check_event(&self, v: &NdValue) -> Result<()> {
        if let Some(k) = self.event_size() {
            let last = v.shape().dims().last().copied();
            if last != Some(k) {
                return Err(Error::Shape(format!("Affine expects event size {k}, got shape {}", v.shape())));
            }
        }
        Ok(())
    }

    fn per_event_fldj(&self) -> Result<NdValue> {
        Ok(match &self.scale {
            AffineScale::Identity => NdValue::scalar(0.0),
            AffineScale::Multiplier(m) => m.map(|v| v.abs().ln()),
            AffineScale::Diag(d) => d.map(|v| v.abs().ln()).sum_trailing(1)?,
            AffineScale::TriL(l) => {
                let k = self.event_size().unwrap_or(0);
                let data = l
                    .rows(2)
                    .map(|m| (0..k).map(|i| m[i * k + i].abs().ln()).sum())
                    .collect();
                NdValue::new(l.shape().drop_last(2), l.dtype().float(), data)?
            }
        })
    }

    fn ldj(&self, v: &NdValue, event_rank: usize, sign: f64) -> Result<NdValue> {
        let pe = self.per_event_fldj()?.map(|t| sign * t).cast(v.dtype().float())?;
        match &self.scale {
            AffineScale::Identity | AffineScale::Multiplier(_) => reduce_elementwise(pe, v.shape(), event_rank),
            _ => reduce_per_event(pe, v.shape(), 1, event_rank),
        }
    }
}

fn tril_apply(l: &NdValue, x: &NdValue, solve: bool) -> Result<NdValue> {
    let k = *l.shape().dims().last().unwrap_or(&0);
    let (lead, pairs) = broadcast_rows(&x.shape().drop_last(1), &l.shape().drop_last(2))?;
    let mut out = Vec::with_capacity(pairs.len() * k);
    for (xi, li) in pairs {
        let xr = &x.data()[xi * k..(xi + 1) * k];
        let m = &l.data()[li * k * k..(li + 1) * k * k];
        let start = out.len();
        for i in 0..k {
            let row = &m[i * k..i * k + i];
            if solve {
                let acc: f64 = row.iter().zip(&out[start..start + i]).map(|(a, b)| a * b).sum();
                out.push((xr[i] - acc) / m[i * k + i]);
            } else {
                let acc: f64 = row.iter().zip(&xr[..i]).map(|(a, b)| a * b).sum();
                out.push(acc + m[i * k + i] * xr[i]);
            }
        }
    }
    NdValue::new(lead.concat(&Shape::from([k])), x.dtype().float(), out)
}

impl Bijector for Affine {
    fn name(&self) -> &str {
        "Affine"
    }

    fn forward_min_event_rank(&self) -> usize {
        match self.scale {
            AffineScale::Identity | AffineScale::Multiplier(_) => 0,
            _ => 1,
        }
    }

    fn is_constant_jacobian(&self) -> bool {
        true
    }

    fn cache(&self) -> &BijectorCache {
        &self.cache
    }

    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.check_event(x)?;
        let dt = x.dtype().float();
        let scaled = match &self.scale {
            AffineScale::Identity => x.cast(dt)?,
            AffineScale::Multiplier(m) | AffineScale::Diag(m) => x.cast(dt)?.mul(&m.cast(dt)?)?,
            AffineScale::TriL(l) => tril_apply(&l.cast(dt)?, &x.cast(dt)?, false)?,
        };
        match &self.shift {
            Some(s) => scaled.add(&s.cast(dt)?),
            None => Ok(scaled),
        }
    }

    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        self.check_event(y)?;
        let dt = y.dtype().float();
        let centered = match &self.shift {
            Some(s) => y.cast(dt)?.sub(&s.cast(dt)?)?,
            None => y.cast(dt)?,
        };
        match &self.scale {
            AffineScale::Identity => Ok(centered),
            AffineScale::Multiplier(m) | AffineScale::Diag(m) => centered.zip_with(&m.cast(dt)?, |a, b| a / b),
            AffineScale::TriL(l) => tril_apply(&l.cast(dt)?, &centered, true),
        }
    }

    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        Some(self.ldj(x, event_rank, 1.0))
    }

    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        Some(self.ldj(y, event_rank, -1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_negation() {
        let b = Affine::new(None, AffineScale::Multiplier((-1.0).into()), true).unwrap();
        let y = b.forward(&NdValue::vector(vec![1.0, -2.5])).unwrap();
        assert_eq!(y.data(), &[-1.0, 2.5]);
        let l = b.forward_log_det_jacobian(&NdValue::vector(vec![1.0, -2.5]), 0).unwrap();
        assert_eq!(l.data(), &[0.0, 0.0]);
    }

    #[test]
    fn diag_and_tril_ldj() {
        let d = Affine::new(None, AffineScale::Diag(NdValue::vector(vec![2.0, 4.0])), true).unwrap();
        let l = d.forward_log_det_jacobian(&NdValue::vector(vec![0.3, 0.1]), 1).unwrap();
        assert!((l.item().unwrap() - 8f64.ln()).abs() < 1e-15);
        let t = Affine::new(
            None,
            AffineScale::TriL(NdValue::matrix(&[vec![2.0, 0.0], vec![1.0, 3.0]]).unwrap()),
            true,
        )
        .unwrap();
        let l = t.forward_log_det_jacobian(&NdValue::vector(vec![0.3, 0.1]), 1).unwrap();
        assert!((l.item().unwrap() - 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tril_forward_and_solve() {
        let lt = NdValue::matrix(&[vec![2.0, 0.0, 0.0], vec![1.0, 3.0, 0.0], vec![-1.0, 0.5, 0.5]]).unwrap();
        let b = Affine::new(Some(NdValue::vector(vec![1.0, 0.0, -1.0])), AffineScale::TriL(lt), true).unwrap();
        b.set_caching(false);
        let x = NdValue::from_shape_vec([2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 0.5]).unwrap();
        let y = b.forward(&x).unwrap();
        assert_eq!(&y.data()[..3], &[3.0, 7.0, 0.5]);
        assert!(b.inverse(&y).unwrap().max_abs_diff(&x) < 1e-14);
    }

    #[test]
    fn validation() {
        assert!(Affine::new(None, AffineScale::Diag(NdValue::vector(vec![1.0, 0.0])), true).is_err());
        assert!(Affine::new(None, AffineScale::Diag(NdValue::vector(vec![1.0, 0.0])), false).is_ok());
        let upper = NdValue::matrix(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(Affine::new(None, AffineScale::TriL(upper), true).is_err());
        let b = Affine::new(None, AffineScale::Diag(NdValue::vector(vec![1.0, 2.0])), true).unwrap();
        assert!(matches!(b.forward(&NdValue::vector(vec![1.0, 2.0, 3.0])), Err(Error::Shape(_))));
    }

    #[test]
    fn batched_scale_broadcasts() {
        let d = NdValue::matrix(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let b = Affine::new(None, AffineScale::Diag(d), false).unwrap();
        let y = b.forward(&NdValue::vector(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.shape(), &Shape::from([3, 2]));
        let l = b.forward_log_det_jacobian(&NdValue::vector(vec![1.0, 1.0]), 1).unwrap();
        assert_eq!(l.shape(), &Shape::from([3]));
        assert!((l.data()[2] - 30f64.ln()).abs() < 1e-14);
    }
}
