use std::fmt;

use crate::error::{Error, Result};

/// A statically known array shape.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: Vec<usize>) -> Self {
        Shape(dims)
    }

    /// The rank-0 shape.
    pub fn scalar() -> Self {
        Shape(Vec::new())
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn num_elements(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_scalar(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Shape) -> Shape {
        let mut dims = self.0.clone();
        dims.extend_from_slice(&other.0);
        Shape(dims)
    }

    /// The first `rank - k` dims.
    pub fn drop_last(&self, k: usize) -> Shape {
        let n = self.0.len().saturating_sub(k);
        Shape(self.0[..n].to_vec())
    }

    /// Dims after the first `k`.
    pub fn drop_first(&self, k: usize) -> Shape {
        Shape(self.0[k.min(self.0.len())..].to_vec())
    }

    /// The last `k` dims (all of them when `k >= rank`).
    pub fn last(&self, k: usize) -> Shape {
        let n = self.0.len().saturating_sub(k);
        Shape(self.0[n..].to_vec())
    }

    pub fn ends_with(&self, suffix: &Shape) -> bool {
        self.0.ends_with(&suffix.0)
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for i in (0..self.0.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.0[i + 1];
        }
        strides
    }

    pub fn push(&mut self, d: usize) {
        self.0.push(d);
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

impl From<Vec<usize>> for Shape {
    fn from(v: Vec<usize>) -> Self {
        Shape(v)
    }
}

impl From<&[usize]> for Shape {
    fn from(v: &[usize]) -> Self {
        Shape(v.to_vec())
    }
}

impl<const N: usize> From<[usize; N]> for Shape {
    fn from(v: [usize; N]) -> Self {
        Shape(v.to_vec())
    }
}

/// Right-aligned broadcast of two shapes.
pub fn broadcast_shapes(a: &Shape, b: &Shape) -> Result<Shape> {
    let rank = a.rank().max(b.rank());
    let mut out = vec![0; rank];
    for (i, slot) in out.iter_mut().enumerate() {
        let da = dim_from_right(a, rank - 1 - i);
        let db = dim_from_right(b, rank - 1 - i);
        *slot = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(Error::IncompatibleShapes {
                    a: a.clone(),
                    b: b.clone(),
                })
            }
        };
    }
    Ok(Shape(out))
}

/// Broadcast of any number of shapes.
pub fn broadcast_all<'a>(shapes: impl IntoIterator<Item = &'a Shape>) -> Result<Shape> {
    shapes
        .into_iter()
        .try_fold(Shape::scalar(), |acc, s| broadcast_shapes(&acc, s))
}

fn dim_from_right(s: &Shape, k: usize) -> usize {
    if k < s.rank() {
        s.0[s.rank() - 1 - k]
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn size_one_expansion() {
        let s = broadcast_shapes(&Shape::from([3]), &Shape::from([1])).unwrap();
        assert_eq!(s, Shape::from([3]));
    }

    #[test]
    fn rank_padding() {
        let s = broadcast_shapes(&Shape::from([2, 1]), &Shape::from([3])).unwrap();
        assert_eq!(s, Shape::from([2, 3]));
    }

    #[test]
    fn scalar_with_vector() {
        let s = broadcast_shapes(&Shape::scalar(), &Shape::from([3])).unwrap();
        assert_eq!(s, Shape::from([3]));
    }

    #[test]
    fn mismatch_is_error() {
        let err = broadcast_shapes(&Shape::from([2]), &Shape::from([3])).unwrap_err();
        assert!(matches!(err, Error::IncompatibleShapes { .. }));
    }

    #[test]
    fn strides_row_major() {
        assert_eq!(Shape::from([2, 3, 4]).strides(), vec![12, 4, 1]);
        assert!(Shape::scalar().strides().is_empty());
    }

    fn small_shape() -> impl Strategy<Value = Shape> {
        prop::collection::vec(prop_oneof![Just(1usize), Just(2), Just(3)], 0..4).prop_map(Shape)
    }

    proptest! {
        #[test]
        fn commutative(a in small_shape(), b in small_shape()) {
            let ab = broadcast_shapes(&a, &b).ok();
            let ba = broadcast_shapes(&b, &a).ok();
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn associative(a in small_shape(), b in small_shape(), c in small_shape()) {
            let left = broadcast_shapes(&a, &b).and_then(|ab| broadcast_shapes(&ab, &c));
            let right = broadcast_shapes(&b, &c).and_then(|bc| broadcast_shapes(&a, &bc));
            if let (Ok(l), Ok(r)) = (&left, &right) {
                prop_assert_eq!(l, r);
            } else {
                prop_assert!(left.is_err() && right.is_err());
            }
        }
    }
}
