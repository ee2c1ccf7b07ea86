use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::broadcast::BroadcastIndex;
use super::shape::{broadcast_all, Shape};
use crate::error::{Error, Result};

/// Element type of an [`NdValue`].
///
/// Storage is always `f64`; `F32` values are rounded through `f32` whenever
/// they are produced and `I64` values are integral and bounded by 2^53.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    F64,
    I64,
}

impl DType {
    pub fn is_float(self) -> bool {
        !matches!(self, DType::I64)
    }

    /// Float dtype used for arithmetic on values of this dtype.
    pub fn float(self) -> DType {
        match self {
            DType::I64 => DType::F64,
            d => d,
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
            DType::I64 => "i64",
        })
    }
}

/// Provenance id attached to values produced by bijector forward/inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CacheToken(u64);

impl CacheToken {
    pub(crate) fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        CacheToken(NEXT.fetch_add(1, Ordering::Relaxed))
    }

    pub fn id(self) -> u64 {
        self.0
    }
}

/// Dense row-major n-dimensional array.
#[derive(Clone)]
pub struct NdValue {
    shape: Shape,
    dtype: DType,
    data: Arc<[f64]>,
    token: Option<CacheToken>,
}

impl PartialEq for NdValue {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.dtype == other.dtype && self.data == other.data
    }
}

impl fmt::Debug for NdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NdValue")
            .field("shape", &self.shape)
            .field("dtype", &self.dtype)
            .field("data", &&self.data[..])
            .finish()
    }
}

impl NdValue {
    /// Builds a value, checking the element count and the dtype's domain.
    pub fn new(shape: impl Into<Shape>, dtype: DType, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if shape.num_elements() != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape} needs {} elements, got {}",
                shape.num_elements(),
                data.len()
            )));
        }
        if dtype == DType::I64 {
            if let Some(v) = data.iter().find(|v| v.fract() != 0.0 || v.abs() > MAX_EXACT_INT) {
                return Err(Error::DTypeMismatch(format!("{v} is not a representable integer")));
            }
        }
        Ok(Self::from_parts(shape, dtype, data))
    }

    pub(crate) fn from_parts(shape: Shape, dtype: DType, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.num_elements(), data.len());
        if dtype == DType::F32 {
            for v in &mut data {
                *v = *v as f32 as f64;
            }
        }
        NdValue {
            shape,
            dtype,
            data: data.into(),
            token: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_parts(Shape::scalar(), DType::F64, vec![v])
    }

    pub fn vector(v: Vec<f64>) -> Self {
        let n = v.len();
        Self::from_parts(Shape::from([n]), DType::F64, v)
    }

    /// Builds a rank-2 value from equal-length rows.
    pub fn matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self::from_parts(Shape::from([rows.len(), cols]), DType::F64, data))
    }

    pub fn from_shape_vec(shape: impl Into<Shape>, data: Vec<f64>) -> Result<Self> {
        Self::new(shape, DType::F64, data)
    }

    pub fn full(shape: impl Into<Shape>, dtype: DType, v: f64) -> Self {
        let shape = shape.into();
        let n = shape.num_elements();
        Self::from_parts(shape, dtype, vec![v; n])
    }

    pub fn zeros(shape: impl Into<Shape>, dtype: DType) -> Self {
        Self::full(shape, dtype, 0.0)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    /// The single element of a one-element value.
    pub fn item(&self) -> Result<f64> {
        match &self.data[..] {
            [v] => Ok(*v),
            _ => Err(Error::Shape(format!("expected one element, shape is {}", self.shape))),
        }
    }

    /// Element at a multi-index.
    pub fn get(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.rank() {
            return None;
        }
        let mut flat = 0;
        for ((&i, &d), s) in index.iter().zip(self.shape.dims()).zip(self.shape.strides()) {
            if i >= d {
                return None;
            }
            flat += i * s;
        }
        self.data.get(flat).copied()
    }

    pub fn token(&self) -> Option<CacheToken> {
        self.token
    }

    pub(crate) fn with_token(mut self, token: CacheToken) -> Self {
        self.token = Some(token);
        self
    }

    pub(crate) fn ensure_token(self) -> Self {
        if self.token.is_some() {
            self
        } else {
            self.with_token(CacheToken::fresh())
        }
    }

    pub fn cast(&self, dtype: DType) -> Result<Self> {
        if dtype == self.dtype {
            return Ok(self.untokened());
        }
        if dtype == DType::I64 {
            return Self::new(self.shape.clone(), dtype, self.data.to_vec());
        }
        Ok(Self::from_parts(self.shape.clone(), dtype, self.data.to_vec()))
    }

    fn untokened(&self) -> Self {
        NdValue {
            token: None,
            ..self.clone()
        }
    }

    pub fn reshape(&self, shape: impl Into<Shape>) -> Result<Self> {
        let shape = shape.into();
        if shape.num_elements() != self.len() {
            return Err(Error::Shape(format!("cannot reshape {} into {shape}", self.shape)));
        }
        Ok(NdValue {
            shape,
            dtype: self.dtype,
            data: self.data.clone(),
            token: None,
        })
    }

    /// Inserts a size-1 axis at `axis` (negative counts from the end, -1 appends).
    pub fn expand_dims(&self, axis: isize) -> Result<Self> {
        let rank = self.rank();
        let pos = normalize_axis(axis, rank + 1)?;
        let mut dims = self.shape.dims().to_vec();
        dims.insert(pos, 1);
        self.reshape(dims)
    }

    /// Elementwise map; integer inputs produce `F64` output.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let dtype = self.dtype.float();
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::from_parts(self.shape.clone(), dtype, data)
    }

    /// Elementwise map over broadcast inputs of a single dtype.
    pub fn map_n(inputs: &[&NdValue], mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let dtype = common_dtype(inputs)?.float();
        let shapes: Vec<&Shape> = inputs.iter().map(|v| &v.shape).collect();
        let index = BroadcastIndex::new(&shapes)?;
        let mut out = Vec::with_capacity(index.out_shape().num_elements());
        let mut args = vec![0.0; inputs.len()];
        index.for_each(|_, offsets| {
            for (a, (v, &o)) in args.iter_mut().zip(inputs.iter().zip(offsets)) {
                *a = v.data[o];
            }
            out.push(f(&args));
        });
        Ok(Self::from_parts(index.out_shape().clone(), dtype, out))
    }

    pub fn zip_with(&self, other: &NdValue, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::map_n(&[self, other], |a| f(a[0], a[1]))
    }

    pub fn add(&self, other: &NdValue) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &NdValue) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &NdValue) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    /// The slice at `index` along `axis`, with that axis removed.
    pub fn index_axis(&self, axis: isize, index: usize) -> Result<Self> {
        let a = normalize_axis(axis, self.rank())?;
        let dims = self.shape.dims();
        if index >= dims[a] {
            return Err(Error::Shape(format!("index {index} out of range for axis {a} of {}", self.shape)));
        }
        let inner: usize = dims[a + 1..].iter().product();
        let outer: usize = dims[..a].iter().product();
        let mut out = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * dims[a] + index) * inner;
            out.extend_from_slice(&self.data[start..start + inner]);
        }
        let mut shape = dims.to_vec();
        shape.remove(a);
        Ok(Self::from_parts(shape.into(), self.dtype, out))
    }

    /// Materializes the broadcast of `self` to `shape`.
    pub fn broadcast_to(&self, shape: &Shape) -> Result<Self> {
        let target = broadcast_all([&self.shape, shape])?;
        if &target != shape {
            return Err(Error::IncompatibleShapes {
                a: self.shape.clone(),
                b: shape.clone(),
            });
        }
        if &self.shape == shape {
            return Ok(self.untokened());
        }
        let index = BroadcastIndex::new(&[shape, &self.shape])?;
        let mut out = Vec::with_capacity(shape.num_elements());
        index.for_each(|_, o| out.push(self.data[o[1]]));
        Ok(Self::from_parts(shape.clone(), self.dtype, out))
    }

    /// Contiguous blocks of the trailing `k` dims.
    pub fn rows(&self, k: usize) -> std::slice::Chunks<'_, f64> {
        let row = self.shape.last(k).num_elements().max(1);
        self.data.chunks(row)
    }

    /// Sums the trailing `k` axes, accumulating each block left to right in
    /// row-major order.
    pub fn sum_trailing(&self, k: usize) -> Result<Self> {
        if k > self.rank() {
            return Err(Error::Rank(format!("cannot reduce {k} axes of rank {}", self.rank())));
        }
        if k == 0 {
            return Ok(self.untokened());
        }
        let out_shape = self.shape.drop_last(k);
        let row = self.shape.last(k).num_elements();
        let data = if row == 0 {
            vec![0.0; out_shape.num_elements()]
        } else {
            self.data
                .chunks(row)
                .map(|c| c.iter().fold(0.0, |acc, &v| acc + v))
                .collect()
        };
        Ok(Self::from_parts(out_shape, self.dtype.float(), data))
    }

    /// Reduction along one axis with a per-lane function.
    pub fn reduce_axis(&self, axis: isize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let ax = normalize_axis(axis, self.rank())?;
        let dims = self.shape.dims();
        let outer: usize = dims[..ax].iter().product();
        let n = dims[ax];
        let inner: usize = dims[ax + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * inner);
        let mut lane = vec![0.0; n];
        for o in 0..outer {
            for i in 0..inner {
                for (j, l) in lane.iter_mut().enumerate() {
                    *l = self.data[(o * n + j) * inner + i];
                }
                out.push(f(&lane));
            }
        }
        let mut out_dims = dims.to_vec();
        out_dims.remove(ax);
        Ok(Self::from_parts(out_dims.into(), self.dtype.float(), out))
    }

    pub fn sum_axis(&self, axis: isize) -> Result<Self> {
        self.reduce_axis(axis, |l| l.iter().sum())
    }

    pub fn mean_axis(&self, axis: isize) -> Result<Self> {
        self.reduce_axis(axis, |l| l.iter().sum::<f64>() / l.len() as f64)
    }

    /// `log(sum(exp(x)))` along `axis`, stabilized by max subtraction.
    pub fn log_sum_exp(&self, axis: isize) -> Result<Self> {
        if !self.dtype.is_float() {
            return Err(Error::DTypeMismatch("log_sum_exp needs a floating dtype".into()));
        }
        self.reduce_axis(axis, log_sum_exp_slice)
    }

    /// Stacks equally-typed values along a new trailing axis after broadcasting.
    pub fn stack_last(values: &[NdValue]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("cannot stack zero values".into()));
        }
        let refs: Vec<&NdValue> = values.iter().collect();
        let dtype = common_dtype(&refs)?;
        let shape = broadcast_all(values.iter().map(|v| &v.shape))?;
        let parts: Vec<NdValue> = values
            .iter()
            .map(|v| v.broadcast_to(&shape))
            .collect::<Result<_>>()?;
        let k = parts.len();
        let n = shape.num_elements();
        let mut out = Vec::with_capacity(n * k);
        for i in 0..n {
            out.extend(parts.iter().map(|p| p.data[i]));
        }
        let mut dims = shape.dims().to_vec();
        dims.push(k);
        Ok(Self::from_parts(dims.into(), dtype, out))
    }

    pub fn any_nan(&self) -> bool {
        self.data.iter().any(|v| v.is_nan())
    }

    /// Largest absolute elementwise difference; `inf` on shape mismatch.
    pub fn max_abs_diff(&self, other: &NdValue) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, f64::max)
    }
}

pub(crate) const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

pub fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m.is_infinite() || m.is_nan() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

fn common_dtype(inputs: &[&NdValue]) -> Result<DType> {
    let first = inputs.first().map_or(DType::F64, |v| v.dtype);
    if let Some(v) = inputs.iter().find(|v| v.dtype != first) {
        return Err(Error::DTypeMismatch(format!(
            "cannot combine {first} with {} without an explicit cast",
            v.dtype
        )));
    }
    Ok(first)
}

pub(crate) fn normalize_axis(axis: isize, rank: usize) -> Result<usize> {
    let r = rank as isize;
    let a = if axis < 0 { axis + r } else { axis };
    if a < 0 || a >= r {
        return Err(Error::AxisOutOfBounds { axis, rank });
    }
    Ok(a as usize)
}

impl From<f64> for NdValue {
    fn from(v: f64) -> Self {
        NdValue::scalar(v)
    }
}

impl From<Vec<f64>> for NdValue {
    fn from(v: Vec<f64>) -> Self {
        NdValue::vector(v)
    }
}

impl<const N: usize> From<[f64; N]> for NdValue {
    fn from(v: [f64; N]) -> Self {
        NdValue::vector(v.to_vec())
    }
}

impl<const R: usize, const C: usize> From<[[f64; C]; R]> for NdValue {
    fn from(v: [[f64; C]; R]) -> Self {
        let data = v.iter().flatten().copied().collect();
        NdValue::from_parts(Shape::from([R, C]), DType::F64, data)
    }
}
