use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm, Tensor};

/// Per-frame affine map `y_t = W·x_t + b` over a `T × D` sequence.
/// Weight is `[units, D]`.
#[derive(Clone, Debug)]
pub struct InnerProduct {
    pub inputs: usize,
    pub units: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct InnerProductCache {
    input: Tensor,
}

impl InnerProduct {
    pub fn new(params: &mut ParamStore, name: &str, inputs: usize, units: usize) -> Self {
        let weight = params.add(format!("{name}.weight"), &[units, inputs], vec![0.0; units * inputs]);
        let bias = params.add(format!("{name}.bias"), &[units], vec![0.0; units]);
        InnerProduct {
            inputs,
            units,
            weight,
            bias,
        }
    }

    pub fn forward(&self, params: &ParamStore, x: &Tensor) -> Result<(Tensor, InnerProductCache)> {
        let (steps, d) = x.dims2("inner product")?;
        if d != self.inputs {
            return Err(Error::shape(format!(
                "inner product expects {} features, got {d}",
                self.inputs
            )));
        }
        let bias = params.get(self.bias);
        let mut out = Vec::with_capacity(steps * self.units);
        for _ in 0..steps {
            out.extend_from_slice(bias);
        }
        gemm(
            steps,
            d,
            self.units,
            x.data(),
            (d, 1),
            params.get(self.weight),
            (1, d),
            1.0,
            &mut out,
        );
        Ok((
            Tensor::from_vec(&[steps, self.units], out)?,
            InnerProductCache { input: x.clone() },
        ))
    }

    pub fn backward(
        &self,
        params: &ParamStore,
        cache: &InnerProductCache,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor> {
        let (steps, d) = cache.input.dims2("inner product")?;
        grad_out.expect_shape(&[steps, self.units], "inner product backward")?;
        let g = grad_out.data();
        {
            let db = grads.get_mut(self.bias);
            for row in g.chunks(self.units) {
                for (b, v) in db.iter_mut().zip(row) {
                    *b += v;
                }
            }
        }
        gemm(
            self.units,
            steps,
            d,
            g,
            (1, self.units),
            cache.input.data(),
            (d, 1),
            1.0,
            grads.get_mut(self.weight),
        );
        let mut dx = vec![0.0; steps * d];
        gemm(
            steps,
            self.units,
            d,
            g,
            (self.units, 1),
            params.get(self.weight),
            (d, 1),
            0.0,
            &mut dx,
        );
        Tensor::from_vec(&[steps, d], dx)
    }
}
