//! Log-domain arithmetic. `ln 0` is `f64::NEG_INFINITY` and is absorbing for
//! multiplication and neutral for addition.

pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// `ln(e^a + e^b)` with max-shift.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ e^xᵢ`; the empty sum is `LOG_ZERO`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Row-wise log-softmax of a `rows × cols` matrix into `out`.
pub fn log_softmax_rows(logits: &[f64], cols: usize, out: &mut [f64]) {
    for (row, dst) in logits.chunks(cols).zip(out.chunks_mut(cols)) {
        let lse = log_sum_exp(row);
        for (d, v) in dst.iter_mut().zip(row) {
            *d = v - lse;
        }
    }
}
