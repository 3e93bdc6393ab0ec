//! Weight initialisation.
//!
//! Convolutions draw from `U(-√(6/fan_in), √(6/fan_in))` (variance `2/fan_in`,
//! suited to rectifiers). Inner products and LSTM matrices draw from
//! `U(-√(3/fan_in), √(3/fan_in))` (variance `1/fan_in`). Biases start at zero
//! except the LSTM forget gate, which starts at [`FORGET_BIAS`].

use rand::Rng;

use super::{Conv2d, InnerProduct, Lstm};
use crate::params::{ParamId, ParamStore};

pub const CONV_GAIN: f64 = 6.0;
pub const LINEAR_GAIN: f64 = 3.0;
pub const FORGET_BIAS: f64 = 1.0;

fn uniform_fill(params: &mut ParamStore, id: ParamId, bound: f64, rng: &mut impl Rng) {
    for v in params.get_mut(id) {
        *v = rng.random_range(-bound..=bound);
    }
}

/// `scale` multiplies the bound; residual branches use it to start small.
pub fn init_conv(params: &mut ParamStore, conv: &Conv2d, scale: f64, rng: &mut impl Rng) {
    let bound = scale * (CONV_GAIN / conv.fan_in() as f64).sqrt();
    uniform_fill(params, conv.weight, bound, rng);
    params.get_mut(conv.bias).fill(0.0);
}

pub fn init_inner_product(params: &mut ParamStore, ip: &InnerProduct, rng: &mut impl Rng) {
    let bound = (LINEAR_GAIN / ip.inputs as f64).sqrt();
    uniform_fill(params, ip.weight, bound, rng);
    params.get_mut(ip.bias).fill(0.0);
}

pub fn init_lstm(params: &mut ParamStore, lstm: &Lstm, rng: &mut impl Rng) {
    uniform_fill(params, lstm.wx, (LINEAR_GAIN / lstm.inputs as f64).sqrt(), rng);
    uniform_fill(params, lstm.wh, (LINEAR_GAIN / lstm.hidden as f64).sqrt(), rng);
    let forget = lstm.forget_rows();
    let bias = params.get_mut(lstm.bias);
    bias.fill(0.0);
    bias[forget].fill(FORGET_BIAS);
}
