use super::{reduce_per_event, Bijector, BijectorCache};
use crate::error::{Error, Result};
use crate::nd::{log_sum_exp_slice, NdValue, Shape};

fn last_dim(v: &NdValue) -> Option<usize> {
    v.shape().dims().last().copied()
}

fn zero_ldj(v: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
    Some(Ok(NdValue::zeros(v.shape().drop_last(event_rank), v.dtype().float())))
}

/// Permutes the last axis: `y[i] = x[perm[i]]`.
pub struct Permute {
    perm: Vec<usize>,
    inverse_perm: Vec<usize>,
    cache: BijectorCache,
}

impl Permute {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut inverse_perm = vec![usize::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || inverse_perm[p] != usize::MAX {
                return Err(Error::invalid("permutation", format!("{perm:?} is not a permutation of 0..{n}")));
            }
            inverse_perm[p] = i;
        }
        Ok(Permute {
            perm,
            inverse_perm,
            cache: BijectorCache::new(),
        })
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn gather(&self, v: &NdValue, idx: &[usize]) -> Result<NdValue> {
        if last_dim(v) != Some(idx.len()) {
            return Err(Error::Shape(format!("Permute of size {} got shape {}", idx.len(), v.shape())));
        }
        let data = v.rows(1).flat_map(|r| idx.iter().map(move |&i| r[i])).collect();
        NdValue::new(v.shape().clone(), v.dtype(), data)
    }
}

impl Bijector for Permute {
    fn name(&self) -> &str {
        "Permute"
    }
    fn forward_min_event_rank(&self) -> usize {
        1
    }
    fn is_constant_jacobian(&self) -> bool {
        true
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        self.gather(x, &self.perm)
    }
    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        self.gather(y, &self.inverse_perm)
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        zero_ldj(x, event_rank)
    }
    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        zero_ldj(y, event_rank)
    }
}

/// Reshapes the trailing event dims from `event_shape_in` to `event_shape_out`.
pub struct Reshape {
    shape_in: Shape,
    shape_out: Shape,
    cache: BijectorCache,
}

impl Reshape {
    pub fn new(shape_in: Shape, shape_out: Shape) -> Result<Self> {
        if shape_in.num_elements() != shape_out.num_elements() {
            return Err(Error::Shape(format!("cannot reshape {shape_in} into {shape_out}")));
        }
        Ok(Reshape {
            shape_in,
            shape_out,
            cache: BijectorCache::new(),
        })
    }

    fn swap(from: &Shape, to: &Shape, s: &Shape) -> Result<Shape> {
        if !s.ends_with(from) {
            return Err(Error::Shape(format!("Reshape expects trailing dims {from}, got {s}")));
        }
        Ok(s.drop_last(from.rank()).concat(to))
    }
}

impl Bijector for Reshape {
    fn name(&self) -> &str {
        "Reshape"
    }
    fn forward_min_event_rank(&self) -> usize {
        self.shape_in.rank()
    }
    fn inverse_min_event_rank(&self) -> usize {
        self.shape_out.rank()
    }
    fn is_constant_jacobian(&self) -> bool {
        true
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_event_shape(&self, shape: &Shape) -> Result<Shape> {
        Self::swap(&self.shape_in, &self.shape_out, shape)
    }
    fn inverse_event_shape(&self, shape: &Shape) -> Result<Shape> {
        Self::swap(&self.shape_out, &self.shape_in, shape)
    }
    fn forward_event_rank(&self, rank: usize) -> Result<usize> {
        if rank < self.shape_in.rank() {
            return Err(Error::Rank(format!("Reshape needs event rank >= {}", self.shape_in.rank())));
        }
        Ok(rank - self.shape_in.rank() + self.shape_out.rank())
    }
    fn inverse_event_rank(&self, rank: usize) -> Result<usize> {
        if rank < self.shape_out.rank() {
            return Err(Error::Rank(format!("Reshape needs event rank >= {}", self.shape_out.rank())));
        }
        Ok(rank - self.shape_out.rank() + self.shape_in.rank())
    }
    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        x.reshape(Self::swap(&self.shape_in, &self.shape_out, x.shape())?)
    }
    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        y.reshape(Self::swap(&self.shape_out, &self.shape_in, y.shape())?)
    }
    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        zero_ldj(x, event_rank)
    }
    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        zero_ldj(y, event_rank)
    }
}

/// `[k] -> [k+1]`: appends a zero coordinate and applies softmax.
pub struct SoftmaxCentered {
    validate_args: bool,
    cache: BijectorCache,
}

impl SoftmaxCentered {
    pub fn new(validate_args: bool) -> Self {
        SoftmaxCentered {
            validate_args,
            cache: BijectorCache::new(),
        }
    }
}

impl Default for SoftmaxCentered {
    fn default() -> Self {
        Self::new(false)
    }
}

fn resize_last(s: &Shape, grow: bool) -> Result<Shape> {
    let mut dims = s.dims().to_vec();
    match dims.last_mut() {
        Some(d) if grow => *d += 1,
        Some(d) if *d >= 1 => *d -= 1,
        _ => return Err(Error::Shape(format!("SoftmaxCentered cannot resize event {s}"))),
    }
    Ok(Shape::new(dims))
}

impl Bijector for SoftmaxCentered {
    fn name(&self) -> &str {
        "SoftmaxCentered"
    }
    fn forward_min_event_rank(&self) -> usize {
        1
    }
    fn cache(&self) -> &BijectorCache {
        &self.cache
    }
    fn forward_event_shape(&self, shape: &Shape) -> Result<Shape> {
        resize_last(shape, true)
    }
    fn inverse_event_shape(&self, shape: &Shape) -> Result<Shape> {
        resize_last(shape, false)
    }

    fn forward_kernel(&self, x: &NdValue) -> Result<NdValue> {
        let k = last_dim(x).unwrap_or(0);
        let mut data = Vec::with_capacity(x.len() / k.max(1) * (k + 1));
        let mut row = vec![0.0; k + 1];
        for r in x.rows(1) {
            row[..k].copy_from_slice(r);
            row[k] = 0.0;
            let lse = log_sum_exp_slice(&row);
            data.extend(row.iter().map(|v| (v - lse).exp()));
        }
        NdValue::new(resize_last(x.shape(), true)?, x.dtype().float(), data)
    }

    fn inverse_kernel(&self, y: &NdValue) -> Result<NdValue> {
        let shape = resize_last(y.shape(), false)?;
        let mut data = Vec::with_capacity(shape.num_elements());
        for r in y.rows(1) {
            if self.validate_args {
                let s: f64 = r.iter().sum();
                if r.iter().any(|&v| v <= 0.0) || (s - 1.0).abs() > 1e-6 {
                    return Err(Error::Domain(format!("SoftmaxCentered: {r:?} is not in the open simplex")));
                }
            }
            let last = r[r.len() - 1].ln();
            data.extend(r[..r.len() - 1].iter().map(|v| v.ln() - last));
        }
        NdValue::new(shape, y.dtype().float(), data)
    }

    fn fldj_kernel(&self, x: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        let k = last_dim(x).unwrap_or(0);
        let mut row = vec![0.0; k + 1];
        let per_event: Vec<f64> = x
            .rows(1)
            .map(|r| {
                row[..k].copy_from_slice(r);
                row[k] = 0.0;
                let lse = log_sum_exp_slice(&row);
                r.iter().sum::<f64>() - (k as f64 + 1.0) * lse
            })
            .collect();
        Some(
            NdValue::new(x.shape().drop_last(1), x.dtype().float(), per_event)
                .and_then(|pe| reduce_per_event(pe, x.shape(), 1, event_rank)),
        )
    }

    fn ildj_kernel(&self, y: &NdValue, event_rank: usize) -> Option<Result<NdValue>> {
        let per_event = y.rows(1).map(|r| -r.iter().map(|v| v.ln()).sum::<f64>()).collect();
        Some(
            NdValue::new(y.shape().drop_last(1), y.dtype().float(), per_event)
                .and_then(|pe| reduce_per_event(pe, y.shape(), 1, event_rank)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_round_trip() {
        let b = Permute::new(vec![2, 0, 1]).unwrap();
        let x = NdValue::vector(vec![10.0, 20.0, 30.0]);
        let y = b.forward(&x).unwrap();
        assert_eq!(y.data(), &[30.0, 10.0, 20.0]);
        assert_eq!(b.inverse(&NdValue::vector(y.data().to_vec())).unwrap(), x);
        assert!(Permute::new(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn reshape_shapes() {
        let b = Reshape::new(Shape::from([784]), Shape::from([28, 28, 1])).unwrap();
        assert_eq!(b.forward_event_shape(&Shape::from([784])).unwrap(), Shape::from([28, 28, 1]));
        assert_eq!(b.inverse_event_shape(&Shape::from([28, 28, 1])).unwrap(), Shape::from([784]));
        assert!(b.forward_event_shape(&Shape::from([783])).is_err());
        assert!(Reshape::new(Shape::from([3]), Shape::from([2, 2])).is_err());
        let x = NdValue::zeros([2, 784], crate::nd::DType::F64);
        let y = b.forward(&x).unwrap();
        assert_eq!(y.shape(), &Shape::from([2, 28, 28, 1]));
        assert_eq!(b.forward_log_det_jacobian(&x, 1).unwrap().shape(), &Shape::from([2]));
    }

    #[test]
    fn softmax_centered_reference() {
        let b = SoftmaxCentered::new(true);
        assert_eq!(b.forward_event_shape(&Shape::from([1])).unwrap(), Shape::from([2]));
        let y = b.forward(&NdValue::vector(vec![0.0])).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
        let x = NdValue::vector(vec![0.3, -1.2, 2.0]);
        let y = b.forward(&x).unwrap();
        assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let back = b.inverse(&NdValue::vector(y.data().to_vec())).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-14);
        let f = b.forward_log_det_jacobian(&x, 1).unwrap().item().unwrap();
        let i = b.inverse_log_det_jacobian(&NdValue::vector(y.data().to_vec()), 1).unwrap().item().unwrap();
        assert!((f + i).abs() < 1e-12);
    }
}
