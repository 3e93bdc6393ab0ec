//! Parameter-free linear layers: frame reversal, feature-map to sequence
//! permutation, and elementwise sum.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reverses the frame order of a `T × D` sequence. Its own inverse, so the
/// backward pass is the same operation applied to the gradient.
pub fn reverse(x: &Tensor) -> Result<Tensor> {
    let (steps, d) = x.dims2("reverse")?;
    let mut out = Vec::with_capacity(steps * d);
    for row in x.data().chunks(d.max(1)).rev() {
        out.extend_from_slice(row);
    }
    Tensor::from_vec(&[steps, d], out)
}

pub fn reverse_backward(grad_out: &Tensor) -> Result<Tensor> {
    reverse(grad_out)
}

/// `C × H × W` feature map to a `W × (C·H)` sequence: width becomes time and
/// each column is flattened channel-major, then by row.
pub fn permute_to_sequence(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3("permute")?;
    let src = x.data();
    let mut out = vec![0.0; c * h * w];
    let features = c * h;
    for ci in 0..c {
        for y in 0..h {
            let row = &src[(ci * h + y) * w..(ci * h + y + 1) * w];
            let f = ci * h + y;
            for (t, &v) in row.iter().enumerate() {
                out[t * features + f] = v;
            }
        }
    }
    Tensor::from_vec(&[w, features], out)
}

/// Inverse of [`permute_to_sequence`]; also its backward pass.
pub fn sequence_to_feature_map(seq: &Tensor, channels: usize, height: usize) -> Result<Tensor> {
    let (w, features) = seq.dims2("inverse permute")?;
    if features != channels * height {
        return Err(Error::shape(format!(
            "{features} features cannot unfold into {channels}x{height}"
        )));
    }
    let src = seq.data();
    let mut out = vec![0.0; features * w];
    for ci in 0..channels {
        for y in 0..height {
            let f = ci * height + y;
            let row = &mut out[f * w..(f + 1) * w];
            for (t, d) in row.iter_mut().enumerate() {
                *d = src[t * features + f];
            }
        }
    }
    Tensor::from_vec(&[channels, height, w], out)
}

pub fn eltwise_sum(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "eltwise sum of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::from_vec(a.shape(), data)
}

/// Both summands receive the upstream gradient unchanged.
pub fn eltwise_sum_backward(grad_out: &Tensor) -> (Tensor, Tensor) {
    (grad_out.clone(), grad_out.clone())
}
