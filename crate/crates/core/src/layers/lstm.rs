//! Single-direction LSTM with full backpropagation through time.
//!
//! Gate rows are stacked in the order input, forget, output, candidate
//! (`i, f, o, g`), each `H` rows tall:
//!
//! ```text
//! z_t = Wx·x_t + Wh·h_{t-1} + b
//! i = σ(z_i)  f = σ(z_f)  o = σ(z_o)  g = tanh(z_g)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! The initial state is zero. Parameters: `wx [4H, D]`, `wh [4H, H]`, `b [4H]`.

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm, Tensor};

pub const GATES: usize = 4;

#[derive(Clone, Debug)]
pub struct Lstm {
    pub inputs: usize,
    pub hidden: usize,
    pub wx: ParamId,
    pub wh: ParamId,
    pub bias: ParamId,
}

/// Recurrent state carried between frames.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        LstmState {
            hidden: vec![0.0; units],
            cell: vec![0.0; units],
        }
    }
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    input: Tensor,
    /// Post-activation gates per frame, `T × 4H`.
    gates: Vec<f64>,
    /// Cell states per frame, `T × H`.
    cells: Vec<f64>,
    /// `tanh(c_t)` per frame.
    cell_tanh: Vec<f64>,
    /// Hidden outputs per frame, `T × H`.
    hidden: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Lstm {
    pub fn new(params: &mut ParamStore, name: &str, inputs: usize, hidden: usize) -> Self {
        let rows = GATES * hidden;
        let wx = params.add(format!("{name}.wx"), &[rows, inputs], vec![0.0; rows * inputs]);
        let wh = params.add(format!("{name}.wh"), &[rows, hidden], vec![0.0; rows * hidden]);
        let bias = params.add(format!("{name}.bias"), &[rows], vec![0.0; rows]);
        Lstm {
            inputs,
            hidden,
            wx,
            wh,
            bias,
        }
    }

    /// Range of the forget-gate rows in the stacked bias.
    pub fn forget_rows(&self) -> std::ops::Range<usize> {
        self.hidden..2 * self.hidden
    }

    pub fn forward(&self, params: &ParamStore, x: &Tensor) -> Result<(Tensor, LstmCache)> {
        let (steps, d) = x.dims2("lstm")?;
        if steps == 0 {
            return Err(Error::shape("lstm needs at least one frame"));
        }
        if d != self.inputs {
            return Err(Error::shape(format!(
                "lstm expects {} features, got {d}",
                self.inputs
            )));
        }
        let h = self.hidden;
        let rows = GATES * h;
        let wh = params.get(self.wh);
        let bias = params.get(self.bias);

        // input contribution for all frames at once
        let mut gates = Vec::with_capacity(steps * rows);
        for _ in 0..steps {
            gates.extend_from_slice(bias);
        }
        gemm(steps, d, rows, x.data(), (d, 1), params.get(self.wx), (1, d), 1.0, &mut gates);

        let mut cells = vec![0.0; steps * h];
        let mut cell_tanh = vec![0.0; steps * h];
        let mut hidden = vec![0.0; steps * h];
        let mut state = LstmState::zeros(h);
        for t in 0..steps {
            let z = &mut gates[t * rows..(t + 1) * rows];
            for (r, zr) in z.iter_mut().enumerate() {
                let w = &wh[r * h..(r + 1) * h];
                *zr += w.iter().zip(&state.hidden).map(|(a, b)| a * b).sum::<f64>();
            }
            for j in 0..h {
                z[j] = sigmoid(z[j]);
                z[h + j] = sigmoid(z[h + j]);
                z[2 * h + j] = sigmoid(z[2 * h + j]);
                z[3 * h + j] = z[3 * h + j].tanh();
                let c = z[h + j] * state.cell[j] + z[j] * z[3 * h + j];
                let tc = c.tanh();
                state.cell[j] = c;
                state.hidden[j] = z[2 * h + j] * tc;
            }
            cells[t * h..(t + 1) * h].copy_from_slice(&state.cell);
            cell_tanh[t * h..(t + 1) * h]
                .iter_mut()
                .zip(&state.cell)
                .for_each(|(d, c)| *d = c.tanh());
            hidden[t * h..(t + 1) * h].copy_from_slice(&state.hidden);
        }
        if hidden.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite LSTM activation".into()));
        }
        let out = Tensor::from_vec(&[steps, h], hidden.clone())?;
        Ok((
            out,
            LstmCache {
                input: x.clone(),
                gates,
                cells,
                cell_tanh,
                hidden,
            },
        ))
    }

    pub fn backward(
        &self,
        params: &ParamStore,
        cache: &LstmCache,
        grad_out: &Tensor,
        grads: &mut Gradients,
    ) -> Result<Tensor> {
        let (steps, d) = cache.input.dims2("lstm")?;
        let h = self.hidden;
        let rows = GATES * h;
        grad_out.expect_shape(&[steps, h], "lstm backward")?;
        let wh = params.get(self.wh);
        let g_out = grad_out.data();

        let mut dz_all = vec![0.0; steps * rows];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..steps).rev() {
            let gates = &cache.gates[t * rows..(t + 1) * rows];
            let tc = &cache.cell_tanh[t * h..(t + 1) * h];
            let dz = &mut dz_all[t * rows..(t + 1) * rows];
            for j in 0..h {
                let (i, f, o, g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let c_prev = if t > 0 { cache.cells[(t - 1) * h + j] } else { 0.0 };
                let dh = g_out[t * h + j] + dh_next[j];
                let dc = dh * o * (1.0 - tc[j] * tc[j]) + dc_next[j];
                dz[j] = dc * g * i * (1.0 - i);
                dz[h + j] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + j] = dh * tc[j] * o * (1.0 - o);
                dz[3 * h + j] = dc * i * (1.0 - g * g);
                dc_next[j] = dc * f;
            }
            // dh_{t-1} = Whᵀ·dz_t
            dh_next.fill(0.0);
            for (r, &dzr) in dz.iter().enumerate() {
                if dzr != 0.0 {
                    let w = &wh[r * h..(r + 1) * h];
                    for (acc, wv) in dh_next.iter_mut().zip(w) {
                        *acc += dzr * wv;
                    }
                }
            }
            if t > 0 {
                let h_prev = &cache.hidden[(t - 1) * h..t * h];
                let dwh = grads.get_mut(self.wh);
                for (r, &dzr) in dz.iter().enumerate() {
                    if dzr != 0.0 {
                        for (acc, hv) in dwh[r * h..(r + 1) * h].iter_mut().zip(h_prev) {
                            *acc += dzr * hv;
                        }
                    }
                }
            }
        }

        {
            let db = grads.get_mut(self.bias);
            for row in dz_all.chunks(rows) {
                for (b, v) in db.iter_mut().zip(row) {
                    *b += v;
                }
            }
        }
        gemm(
            rows,
            steps,
            d,
            &dz_all,
            (1, rows),
            cache.input.data(),
            (d, 1),
            1.0,
            grads.get_mut(self.wx),
        );
        let mut dx = vec![0.0; steps * d];
        gemm(steps, rows, d, &dz_all, (rows, 1), params.get(self.wx), (d, 1), 0.0, &mut dx);
        Tensor::from_vec(&[steps, d], dx)
    }
}
