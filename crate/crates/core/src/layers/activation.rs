use crate::ctc::logspace::log_softmax_rows;
use crate::ctc::FramePosteriors;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

/// Gradient of [`relu`] given its output.
pub fn relu_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape(output.shape(), "relu backward")?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| if y > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(output.shape(), data)
}

/// Row-wise log-softmax of a `T × K` logit matrix.
pub fn log_softmax_per_frame(logits: &Tensor) -> Result<Tensor> {
    let (_, k) = logits.dims2("softmax")?;
    if !logits.all_finite() {
        return Err(Error::InvalidInput("non-finite logits".into()));
    }
    let mut out = vec![0.0; logits.len()];
    log_softmax_rows(logits.data(), k, &mut out);
    Tensor::from_vec(logits.shape(), out)
}

/// Row-wise softmax with max-subtraction.
pub fn softmax_per_frame(logits: &Tensor) -> Result<FramePosteriors> {
    let (steps, k) = logits.dims2("softmax")?;
    let log_probs = log_softmax_per_frame(logits)?;
    let mut values = log_probs.into_data();
    for v in &mut values {
        *v = v.exp();
    }
    // exp(log_softmax) is normalised to rounding; renormalise so each row
    // sums to one within a few ulps.
    for row in values.chunks_mut(k) {
        let s: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    FramePosteriors::from_flat(steps, k, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_logits_give_uniform_rows() {
        let y = softmax_per_frame(&Tensor::filled(&[3, 4], 2.5)).unwrap();
        assert!(y.values().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn closed_form_row() {
        let logits = Tensor::from_vec(&[1, 3], vec![0.0, 2f64.ln(), 3f64.ln()]).unwrap();
        let y = softmax_per_frame(&logits).unwrap();
        for (v, e) in y.row(0).iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_invariance_and_row_sums() {
        let base = vec![0.3, -1.2, 4.0, 2.2, 700.0, 699.0];
        let shifted: Vec<f64> = base.iter().map(|v| v + 123.0).collect();
        let a = softmax_per_frame(&Tensor::from_vec(&[2, 3], base).unwrap()).unwrap();
        let b = softmax_per_frame(&Tensor::from_vec(&[2, 3], shifted).unwrap()).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
        for row in a.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let t = Tensor::from_vec(&[1, 2], vec![f64::INFINITY, 0.0]).unwrap();
        assert!(softmax_per_frame(&t).is_err());
    }

    #[test]
    fn relu_gradient_masks() {
        let x = Tensor::from_vec(&[4], vec![-1.0, 0.0, 0.5, 2.0]).unwrap();
        let y = relu(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 0.5, 2.0]);
        let g = relu_backward(&y, &Tensor::filled(&[4], 3.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 3.0, 3.0]);
    }
}
