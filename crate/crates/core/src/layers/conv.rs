use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm, Tensor};

/// Square-kernel 2-D cross-correlation over a `C × H × W` input.
///
/// Weights are `[out, in, k, k]`, bias `[out]`.
#[derive(Clone, Debug)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

pub fn conv_output_len(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    in_shape: (usize, usize, usize),
    out_hw: (usize, usize),
    /// im2col matrix `[C·k·k, Ho·Wo]`.
    cols: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        params: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        let fan = in_channels * kernel * kernel;
        let weight = params.add(
            format!("{name}.weight"),
            &[out_channels, in_channels, kernel, kernel],
            vec![0.0; out_channels * fan],
        );
        let bias = params.add(format!("{name}.bias"), &[out_channels], vec![0.0; out_channels]);
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight,
            bias,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let ho = conv_output_len(h, self.kernel, self.stride, self.padding);
        let wo = conv_output_len(w, self.kernel, self.stride, self.padding);
        match (ho, wo) {
            (Some(ho), Some(wo)) => Ok((ho, wo)),
            _ => Err(Error::shape(format!(
                "{h}x{w} input admits no {k}x{k} placement with padding {p}",
                k = self.kernel,
                p = self.padding
            ))),
        }
    }

    fn im2col(&self, x: &[f64], (c, h, w): (usize, usize, usize), (ho, wo): (usize, usize)) -> Vec<f64> {
        let k = self.kernel;
        let n = ho * wo;
        let mut cols = vec![0.0; c * k * k * n];
        for ci in 0..c {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut cols[((ci * k + ky) * k + kx) * n..][..n];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix >= 0 && ix < w as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, cols: &[f64], (c, h, w): (usize, usize, usize), (ho, wo): (usize, usize)) -> Vec<f64> {
        let k = self.kernel;
        let n = ho * wo;
        let mut x = vec![0.0; c * h * w];
        for ci in 0..c {
            let plane = &mut x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &cols[((ci * k + ky) * k + kx) * n..][..n];
                    for oy in 0..ho {
                        let iy = (oy * self.stride + ky) as isize - self.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, &g) in row[oy * wo..(oy + 1) * wo].iter().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.padding as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += g;
                            }
                        }
                    }
                }
            }
        }
        x
    }

    pub fn forward(&self, params: &ParamStore, x: &Tensor) -> Result<(Tensor, ConvCache)> {
        let (c, h, w) = x.dims3("conv2d")?;
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "conv2d expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        let (ho, wo) = self.output_hw(h, w)?;
        let cols = self.im2col(x.data(), (c, h, w), (ho, wo));
        let n = ho * wo;
        let fan = self.fan_in();
        let bias = params.get(self.bias);
        let mut out = vec![0.0; self.out_channels * n];
        for (o, row) in out.chunks_mut(n).enumerate() {
            row.fill(bias[o]);
        }
        gemm(
            self.out_channels,
            fan,
            n,
            params.get(self.weight),
            (fan, 1),
            &cols,
            (n, 1),
            1.0,
            &mut out,
        );
        let out = Tensor::from_vec(&[self.out_channels, ho, wo], out)?;
        Ok((
            out,
            ConvCache {
                in_shape: (c, h, w),
                out_hw: (ho, wo),
                cols,
            },
        ))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(
        &self,
        params: &ParamStore,
        cache: &ConvCache,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor> {
        let (ho, wo) = cache.out_hw;
        grad_out.expect_shape(&[self.out_channels, ho, wo], "conv2d backward")?;
        let n = ho * wo;
        let fan = self.fan_in();
        let g = grad_out.data();

        {
            let db = grads.get_mut(self.bias);
            for (o, row) in g.chunks(n).enumerate() {
                db[o] += row.iter().sum::<f64>();
            }
        }
        // dW[o, j] += Σ_p g[o, p] · cols[j, p]
        gemm(
            self.out_channels,
            n,
            fan,
            g,
            (n, 1),
            &cache.cols,
            (1, n),
            1.0,
            grads.get_mut(self.weight),
        );
        // dcols[j, p] = Σ_o W[o, j] · g[o, p]
        let mut dcols = vec![0.0; fan * n];
        gemm(
            fan,
            self.out_channels,
            n,
            params.get(self.weight),
            (1, fan),
            g,
            (n, 1),
            0.0,
            &mut dcols,
        );
        let (c, h, w) = cache.in_shape;
        let dx = self.col2im(&dcols, cache.in_shape, cache.out_hw);
        Tensor::from_vec(&[c, h, w], dx)
    }
}
