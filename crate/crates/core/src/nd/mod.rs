//! Dense n-dimensional values, shapes and right-aligned broadcasting.

mod broadcast;
mod shape;
mod value;

pub use broadcast::{broadcast_rows, BroadcastIndex};
pub use shape::{broadcast_all, broadcast_shapes, Shape};
pub use value::{log_sum_exp_slice, CacheToken, DType, NdValue};

pub(crate) use value::MAX_EXACT_INT;
