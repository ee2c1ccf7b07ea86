use super::shape::{broadcast_all, Shape};
use crate::error::Result;

/// Index arithmetic for iterating a broadcast output and its inputs together
/// without materializing the expanded inputs.
#[derive(Debug, Clone)]
pub struct BroadcastIndex {
    out: Shape,
    // Per input, per output axis: stride into that input (0 on broadcast axes).
    strides: Vec<Vec<usize>>,
}

impl BroadcastIndex {
    pub fn new(shapes: &[&Shape]) -> Result<Self> {
        let out = broadcast_all(shapes.iter().copied())?;
        let rank = out.rank();
        let strides = shapes
            .iter()
            .map(|s| {
                let own = s.strides();
                let pad = rank - s.rank();
                (0..rank)
                    .map(|ax| {
                        if ax < pad || s.dims()[ax - pad] == 1 {
                            0
                        } else {
                            own[ax - pad]
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(BroadcastIndex { out, strides })
    }

    pub fn out_shape(&self) -> &Shape {
        &self.out
    }

    /// Calls `f(out_flat, input_flat_offsets)` for every output element in
    /// row-major order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[usize])) {
        let n = self.out.num_elements();
        if n == 0 {
            return;
        }
        let dims = self.out.dims();
        let rank = dims.len();
        let mut offsets = vec![0usize; self.strides.len()];
        let mut counter = vec![0usize; rank];
        for i in 0..n {
            f(i, &offsets);
            let mut ax = rank;
            while ax > 0 {
                ax -= 1;
                counter[ax] += 1;
                for (o, s) in offsets.iter_mut().zip(&self.strides) {
                    *o += s[ax];
                }
                if counter[ax] < dims[ax] {
                    break;
                }
                for (o, s) in offsets.iter_mut().zip(&self.strides) {
                    *o -= s[ax] * dims[ax];
                }
                counter[ax] = 0;
            }
        }
    }

    /// Flat offsets into each input for every output element.
    pub fn offsets(&self) -> Vec<Vec<usize>> {
        let mut all = vec![Vec::with_capacity(self.out.num_elements()); self.strides.len()];
        self.for_each(|_, o| {
            for (dst, &v) in all.iter_mut().zip(o) {
                dst.push(v);
            }
        });
        all
    }
}

/// Pairs leading-dim indices of two values whose trailing blocks are
/// processed as units (e.g. a scalar outcome against a row of logits).
/// Returns the broadcast leading shape and `(a_row, b_row)` for each element.
pub fn broadcast_rows(a_lead: &Shape, b_lead: &Shape) -> Result<(Shape, Vec<(usize, usize)>)> {
    let index = BroadcastIndex::new(&[a_lead, b_lead])?;
    let mut pairs = Vec::with_capacity(index.out_shape().num_elements());
    index.for_each(|_, o| pairs.push((o[0], o[1])));
    Ok((index.out.clone(), pairs))
}
