use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Max pooling without padding.
#[derive(Clone, Copy, Debug)]
pub struct MaxPool {
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Debug)]
pub struct PoolCache {
    in_shape: (usize, usize, usize),
    out_shape: (usize, usize, usize),
    /// Flat input index of the maximum for each output element.
    argmax: Vec<usize>,
}

impl MaxPool {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if h < self.kernel || w < self.kernel || self.stride == 0 {
            return Err(Error::shape(format!(
                "{h}x{w} input is smaller than the {k}x{k} pooling window",
                k = self.kernel
            )));
        }
        Ok(((h - self.kernel) / self.stride + 1, (w - self.kernel) / self.stride + 1))
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, PoolCache)> {
        let (c, h, w) = x.dims3("maxpool")?;
        let (ho, wo) = self.output_hw(h, w)?;
        let data = x.data();
        let mut out = Vec::with_capacity(c * ho * wo);
        let mut argmax = Vec::with_capacity(c * ho * wo);
        for ci in 0..c {
            let base = ci * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = base + oy * self.stride * w + ox * self.stride;
                    for ky in 0..self.kernel {
                        let row = base + (oy * self.stride + ky) * w + ox * self.stride;
                        for kx in 0..self.kernel {
                            // strict '>' keeps the first maximum in scan order
                            if data[row + kx] > data[best] {
                                best = row + kx;
                            }
                        }
                    }
                    out.push(data[best]);
                    argmax.push(best);
                }
            }
        }
        Ok((
            Tensor::from_vec(&[c, ho, wo], out)?,
            PoolCache {
                in_shape: (c, h, w),
                out_shape: (c, ho, wo),
                argmax,
            },
        ))
    }

    pub fn backward(&self, cache: &PoolCache, grad_out: &Tensor) -> Result<Tensor> {
        let (c, ho, wo) = cache.out_shape;
        grad_out.expect_shape(&[c, ho, wo], "maxpool backward")?;
        let (c, h, w) = cache.in_shape;
        let mut dx = vec![0.0; c * h * w];
        for (&src, &g) in cache.argmax.iter().zip(grad_out.data()) {
            dx[src] += g;
        }
        Tensor::from_vec(&[c, h, w], dx)
    }
}
